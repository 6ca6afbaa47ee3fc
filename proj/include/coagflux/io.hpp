#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coagflux/config.hpp"
#include "coagflux/fluxcheck.hpp"
#include "coagflux/solver.hpp"
#include "coagflux/version.hpp"

namespace coagflux {

using ordered_json = nlohmann::ordered_json;

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// CSV with a provenance comment line, a header row, 17-significant-digit
/// values and LF line endings.
inline void write_csv(const std::string& path, const std::string& header,
                      const std::vector<std::vector<double>>& rows,
                      const std::string& hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << "# config_hash=" << hash << " version=" << kVersion << "\n";
    out << header << "\n";
    for (const auto& r : rows) {
        for (size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << fmt17(r[i]);
        out << "\n";
    }
}

inline void write_json(const std::string& path, const ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

inline ordered_json read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read " + path);
    ordered_json j;
    in >> j;
    return j;
}

/// Construction manifest: recipe, bifurcation point, perturbation pair.
inline ordered_json manifest_json(const BifurcationKernel& bk, const PerturbationPair& pp,
                                  const std::string& hash) {
    ordered_json j;
    j["config_hash"] = hash;
    j["version"] = kVersion;
    j["gamma"] = bk.recipe.params.gamma;
    j["p"] = bk.recipe.params.p;
    j["q"] = bk.recipe.params.q;
    j["z_a"] = bk.recipe.z_a;
    j["z_b"] = bk.recipe.z_b;
    j["epsilon"] = bk.recipe.epsilon;
    j["a"] = bk.recipe.a;
    j["b"] = bk.recipe.b;
    j["sigma"] = bk.recipe.sigma;
    j["k_star"] = bk.point.k_star;
    j["T"] = bk.point.T;
    j["Q"] = bk.point.Q;
    j["psi_residual"] = bk.point.residual;
    j["psi_scale"] = bk.point.psi_scale;
    j["certified_to"] = bk.point.certified_to;
    j["cert_margin"] = bk.point.cert_margin;
    j["asym_mod_ratio"] = bk.point.asym_mod_ratio;
    j["asym_phase_diff"] = bk.point.asym_phase_diff;
    j["z1"] = pp.z1;
    j["z2"] = pp.z2;
    j["dual_matrix"] = {{pp.M[0][0], pp.M[0][1]}, {pp.M[1][0], pp.M[1][1]}};
    j["psi_w11"] = {pp.psi1.real(), pp.psi1.imag()};
    j["psi_w12"] = {pp.psi2.real(), pp.psi2.imag()};
    return j;
}

struct LoadedManifest {
    BifurcationKernel bk;
    PerturbationPair pp;
};

/// Rebuilds the kernel and perturbation pair bit-for-bit from a manifest.
inline LoadedManifest load_manifest(const std::string& path) {
    const ordered_json j = read_json(path);
    LoadedManifest out;
    out.bk.recipe.params = validate_params(j.at("gamma").get<double>(), j.at("p").get<double>());
    out.bk.recipe.z_a = j.at("z_a").get<double>();
    out.bk.recipe.z_b = j.at("z_b").get<double>();
    out.bk.recipe.epsilon = j.at("epsilon").get<double>();
    out.bk.recipe.a = j.at("a").get<double>();
    out.bk.recipe.b = j.at("b").get<double>();
    out.bk.recipe.sigma = j.at("sigma").get<double>();
    out.bk.w0 = build_w0(out.bk.recipe);
    out.bk.point.k_star = j.at("k_star").get<double>();
    out.bk.point.T = j.at("T").get<double>();
    out.bk.point.Q = j.at("Q").get<double>();
    out.bk.point.residual = j.at("psi_residual").get<double>();
    out.bk.point.psi_scale = j.at("psi_scale").get<double>();
    out.bk.point.certified_to = j.at("certified_to").get<double>();
    out.bk.point.cert_margin = j.at("cert_margin").get<double>();
    out.pp.z1 = j.at("z1").get<double>();
    out.pp.z2 = j.at("z2").get<double>();
    out.pp.w11 = bump_kernel(out.pp.z1, out.bk.recipe.epsilon);
    out.pp.w12 = bump_kernel(out.pp.z2, out.bk.recipe.epsilon);
    const auto m = j.at("dual_matrix");
    out.pp.M[0][0] = m[0][0].get<double>();
    out.pp.M[0][1] = m[0][1].get<double>();
    out.pp.M[1][0] = m[1][0].get<double>();
    out.pp.M[1][1] = m[1][1].get<double>();
    const double det = out.pp.M[0][0] * out.pp.M[1][1] - out.pp.M[0][1] * out.pp.M[1][0];
    out.pp.Minv[0][0] = out.pp.M[1][1] / det;
    out.pp.Minv[0][1] = -out.pp.M[0][1] / det;
    out.pp.Minv[1][0] = -out.pp.M[1][0] / det;
    out.pp.Minv[1][1] = out.pp.M[0][0] / det;
    out.pp.psi1 = cplx{j.at("psi_w11")[0].get<double>(), j.at("psi_w11")[1].get<double>()};
    out.pp.psi2 = cplx{j.at("psi_w12")[0].get<double>(), j.at("psi_w12")[1].get<double>()};
    return out;
}

inline ordered_json solution_json(const Solution& sol, int N, const RunConfig& cfg,
                                  const std::string& hash) {
    ordered_json j;
    j["config_hash"] = hash;
    j["version"] = kVersion;
    j["s"] = sol.s;
    j["alpha1"] = sol.alpha1;
    j["alpha2"] = sol.alpha2;
    j["K0"] = sol.K0;
    j["J0"] = sol.J0;
    j["k_star"] = sol.k_star;
    j["N"] = N;
    j["fp_tol"] = cfg.fp_tol;
    j["quad_abs_tol"] = cfg.quad_abs_tol;
    j["quad_rel_tol"] = cfg.quad_rel_tol;
    j["residual_p1"] = sol.residual_p1;
    j["residual_p2"] = sol.residual_p2;
    ordered_json coeffs = ordered_json::array();
    for (int n = -sol.h_tilde.N(); n <= sol.h_tilde.N(); ++n)
        coeffs.push_back({sol.h_tilde.a(n).real(), sol.h_tilde.a(n).imag()});
    j["h_tilde"] = coeffs;
    return j;
}

/// Rebuilds a Solution from solution.json plus the manifest kernel data.
inline Solution load_solution(const std::string& path, const LoadedManifest& m) {
    const ordered_json j = read_json(path);
    Solution sol;
    sol.params = m.bk.recipe.params;
    sol.recipe = m.bk.recipe;
    sol.k_star = j.at("k_star").get<double>();
    sol.s = j.at("s").get<double>();
    sol.alpha1 = j.at("alpha1").get<double>();
    sol.alpha2 = j.at("alpha2").get<double>();
    sol.K0 = j.at("K0").get<double>();
    sol.J0 = j.at("J0").get<double>();
    const int N = j.at("N").get<int>();
    sol.h_tilde = PeriodicField(N, sol.k_star);
    const auto coeffs = j.at("h_tilde");
    if ((int)coeffs.size() != 2 * N + 1) throw io_error("solution coefficient count mismatch");
    for (int n = -N; n <= N; ++n) {
        const auto& c = coeffs[(size_t)(n + N)];
        sol.h_tilde.a(n) = cplx{c[0].get<double>(), c[1].get<double>()};
    }
    sol.H = scale(sol.h_tilde, std::sqrt(sol.J0 / sol.K0));
    sol.kernel = combined_kernel(m.bk.w0, m.pp.w11, m.pp.w12, sol.alpha1, sol.alpha2);
    return sol;
}

inline ordered_json verify_json(const VerifyReport& rep, const std::string& hash) {
    ordered_json j;
    j["config_hash"] = hash;
    j["version"] = kVersion;
    j["J0"] = rep.J0;
    j["max_rel_dev_X"] = rep.max_rel_dev_X;
    j["max_rel_dev_x"] = rep.max_rel_dev_x;
    j["X_grid"] = rep.X_grid;
    j["x_grid"] = rep.x_grid;
    j["tol"] = rep.tol;
    j["pass"] = rep.pass;
    return j;
}

// ---- symbol table cache -------------------------------------------------

/// Binary sidecar for symbol tables, keyed by kernel id, k_star, N and the
/// quadrature tolerances.  Doubles are stored bit-exact, so a cache hit
/// reproduces the in-memory table exactly.
class TableCache {
  public:
    explicit TableCache(std::string dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    static std::string key_of(const LogKernel& w, double k_star, int N,
                              const TableBuildOptions& opt) {
        std::uint64_t kb, ab, rb;
        std::memcpy(&kb, &k_star, 8);
        std::memcpy(&ab, &opt.abs_tol, 8);
        std::memcpy(&rb, &opt.rel_tol, 8);
        std::string s = w.id + "|" + std::to_string(kb) + "|" + std::to_string(N) + "|" +
                        std::to_string(ab) + "|" + std::to_string(rb);
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 1099511628211ull;
        }
        char buf[20];
        std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
        return buf;
    }

    std::optional<SymbolTable> load(const std::string& key, double k_star, int N) const {
        const std::string path = dir_ + "/tab_" + key + ".bin";
        std::ifstream in(path, std::ios::binary);
        if (!in) return std::nullopt;
        char magic[8];
        in.read(magic, 8);
        if (std::memcmp(magic, "CFXTAB01", 8) != 0) return std::nullopt;
        std::int64_t n64 = 0;
        double ks = 0.0;
        in.read(reinterpret_cast<char*>(&n64), 8);
        in.read(reinterpret_cast<char*>(&ks), 8);
        if ((int)n64 != N || ks != k_star) return std::nullopt;
        SymbolTable tab;
        tab.N = N;
        tab.k_star = k_star;
        tab.kernel_id = "cache:" + key;
        tab.j.resize((size_t)(4 * N + 1) * (size_t)(2 * N + 1));
        in.read(reinterpret_cast<char*>(tab.j.data()), (std::streamsize)(tab.j.size() * 16));
        if (!in) return std::nullopt;
        return tab;
    }

    void store(const std::string& key, const SymbolTable& tab) const {
        const std::string path = dir_ + "/tab_" + key + ".bin";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw io_error("cannot write table cache " + path);
        out.write("CFXTAB01", 8);
        const std::int64_t n64 = tab.N;
        out.write(reinterpret_cast<const char*>(&n64), 8);
        out.write(reinterpret_cast<const char*>(&tab.k_star), 8);
        out.write(reinterpret_cast<const char*>(tab.j.data()),
                  (std::streamsize)(tab.j.size() * 16));
    }

    /// build_symbol_table with read-through caching.
    SymbolTable get(const LogKernel& w, double k_star, int N,
                    const TableBuildOptions& opt) const {
        const std::string key = key_of(w, k_star, N, opt);
        if (auto hit = load(key, k_star, N)) {
            auto tab = *hit;
            tab.kernel_id = w.id;
            return tab;
        }
        SymbolTable tab = build_symbol_table(w, k_star, N, opt);
        store(key, tab);
        return tab;
    }

  private:
    std::string dir_;
};

}  // namespace coagflux
