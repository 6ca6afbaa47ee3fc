#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "coagflux/params.hpp"

namespace coagflux {

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Full pipeline configuration; serializes to a flat key = value file so
/// reproducibility manifests stay diffable.
struct RunConfig {
    double gamma = 0.0;
    double p = 0.0;
    double z_a = 2.0;
    double z_b = 1.0;
    double epsilon = 0.02;
    double s = 0.01;
    double J0 = 1.0;
    int N = 16;
    double quad_abs_tol = 1e-12;
    double quad_rel_tol = 1e-10;
    double k_scan_lo = 15.0;
    double k_scan_hi = 25.0;
    double K_max = 500.0;
    double M = 10.0;
    double fp_tol = 1e-12;
    int max_iter = 50;
    std::uint64_t seed = 12345;
    std::string out_dir = "out";

    void validate() const {
        if (!(quad_abs_tol > 0.0) || !(quad_rel_tol > 0.0) || !(fp_tol > 0.0))
            throw config_error("tolerances must be positive");
        if (N < 8) throw config_error("N must be at least 8");
        if (max_iter < 1) throw config_error("max_iter must be positive");
        validate_params(gamma, p);  // throws outside the constant-flux window
    }
};

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Canonical serialization: fixed key order, 17 significant digits.
inline std::string serialize(const RunConfig& c) {
    std::ostringstream os;
    os << "gamma = " << fmt17(c.gamma) << "\n";
    os << "p = " << fmt17(c.p) << "\n";
    os << "z_a = " << fmt17(c.z_a) << "\n";
    os << "z_b = " << fmt17(c.z_b) << "\n";
    os << "epsilon = " << fmt17(c.epsilon) << "\n";
    os << "s = " << fmt17(c.s) << "\n";
    os << "J0 = " << fmt17(c.J0) << "\n";
    os << "N = " << c.N << "\n";
    os << "quad_abs_tol = " << fmt17(c.quad_abs_tol) << "\n";
    os << "quad_rel_tol = " << fmt17(c.quad_rel_tol) << "\n";
    os << "k_scan_lo = " << fmt17(c.k_scan_lo) << "\n";
    os << "k_scan_hi = " << fmt17(c.k_scan_hi) << "\n";
    os << "K_max = " << fmt17(c.K_max) << "\n";
    os << "M = " << fmt17(c.M) << "\n";
    os << "fp_tol = " << fmt17(c.fp_tol) << "\n";
    os << "max_iter = " << c.max_iter << "\n";
    os << "seed = " << c.seed << "\n";
    os << "out_dir = " << c.out_dir << "\n";
    return os.str();
}

/// Applies `key = value` lines (# comments allowed) on top of the defaults.
inline void apply_config_line(RunConfig& c, const std::string& key, const std::string& val) {
    auto d = [&] { return std::stod(val); };
    if (key == "gamma") c.gamma = d();
    else if (key == "p") c.p = d();
    else if (key == "z_a") c.z_a = d();
    else if (key == "z_b") c.z_b = d();
    else if (key == "epsilon") c.epsilon = d();
    else if (key == "s") c.s = d();
    else if (key == "J0") c.J0 = d();
    else if (key == "N") c.N = std::stoi(val);
    else if (key == "quad_abs_tol") c.quad_abs_tol = d();
    else if (key == "quad_rel_tol") c.quad_rel_tol = d();
    else if (key == "k_scan_lo") c.k_scan_lo = d();
    else if (key == "k_scan_hi") c.k_scan_hi = d();
    else if (key == "K_max") c.K_max = d();
    else if (key == "M") c.M = d();
    else if (key == "fp_tol") c.fp_tol = d();
    else if (key == "max_iter") c.max_iter = std::stoi(val);
    else if (key == "seed") c.seed = std::stoull(val);
    else if (key == "out_dir") c.out_dir = val;
    else throw config_error("unknown config key: " + key);
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file " + path);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string t) {
            const auto a = t.find_first_not_of(" \t\r");
            const auto b = t.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : t.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (!key.empty()) apply_config_line(base, key, val);
    }
    return base;
}

/// FNV-1a over the canonical serialization.
inline std::string config_hash(const RunConfig& c) {
    const std::string s = serialize(c);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
    return buf;
}

}  // namespace coagflux
