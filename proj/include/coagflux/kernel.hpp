#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "coagflux/params.hpp"
#include "coagflux/quadrature.hpp"

namespace coagflux {

struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

/// Kernel on the simplex: Phi(s) = K(s, 1-s), symmetric about s = 1/2 with
/// endpoint exponent p (s^p Phi(s) has a positive limit at 0+).
struct ShapeFunction {
    std::function<double(double)> phi;
    double p = 0.0;

    double operator()(double s) const {
        if (!(s > 0.0 && s < 1.0)) throw domain_error("Phi argument outside (0,1)");
        return phi(s);
    }
};

/// Kernel in log variables: even W with growth envelope C e^{q|Y|}.
struct LogKernel {
    std::function<double(double)> w;
    double q = 0.0;
    double envelope_const = 1.0;
    bool symmetric = true;
    /// localized parts (Gaussian bumps) are negligible beyond |Y| > support;
    /// +inf when the whole kernel has an exponential tail
    double support = std::numeric_limits<double>::infinity();
    /// envelope constant valid beyond `support` (defaults to envelope_const);
    /// lets integrators truncate by the tail alone once the bumps are dead
    double tail_const = std::numeric_limits<double>::quiet_NaN();
    std::string id;  // cache key component

    double operator()(double Y) const { return w(Y); }
    double tail_envelope() const {
        return std::isnan(tail_const) ? envelope_const : tail_const;
    }
};

inline ShapeFunction constant_shape() {
    return {[](double) { return 1.0; }, 0.0};
}

inline LogKernel constant_log_kernel() {
    LogKernel k;
    k.w = [](double) { return 1.0; };
    k.q = 0.0;
    k.envelope_const = 1.0;
    k.id = "const";
    return k;
}

/// W(Y) = (e^{Y/2} + e^{-Y/2})^gamma * Phi(1/(1+e^Y)).
/// Evaluated through exp(gamma*(|Y|/2 + log1p(e^{-|Y|}))) so that large |Y|
/// neither overflows nor loses the endpoint power law.
inline LogKernel w_from_phi(const ShapeFunction& phi, const HomogeneityParams& params) {
    const double gamma = params.gamma;
    auto fn = phi.phi;
    LogKernel k;
    k.w = [fn, gamma](double Y) {
        const double ay = std::fabs(Y);
        const double cosh_pow = std::exp(gamma * (0.5 * ay + std::log1p(std::exp(-ay))));
        // Phi(1/(1+e^Y)) = Phi(1/(1+e^{-Y})) by the simplex symmetry; the
        // small-s side stays representable where 1-s would round to 1
        const double s = std::exp(-ay) / (1.0 + std::exp(-ay));
        return cosh_pow * fn(std::max(s, 1e-300));
    };
    k.q = params.q;
    k.symmetric = true;
    // measure the envelope constant on the standard check grid
    double c = 0.0;
    for (int i = 0; i < 1024; ++i) {
        const double Y = -30.0 + 60.0 * (double)i / 1023.0;
        c = std::max(c, std::fabs(k.w(Y)) * std::exp(-k.q * std::fabs(Y)));
    }
    k.envelope_const = 1.25 * c;
    k.id = "phi-derived";
    return k;
}

/// Phi(s) = W(log((1-s)/s)) * (s(1-s))^{gamma/2}; exact inverse of w_from_phi
/// since sqrt((1-s)/s) + sqrt(s/(1-s)) = 1/sqrt(s(1-s)).
inline ShapeFunction phi_from_w(const LogKernel& w, const HomogeneityParams& params) {
    if (!w.symmetric) throw std::invalid_argument("phi_from_w requires a symmetric W");
    const double gamma = params.gamma;
    auto fn = w.w;
    ShapeFunction s;
    s.phi = [fn, gamma](double x) {
        if (!(x > 0.0 && x < 1.0)) throw domain_error("Phi argument outside (0,1)");
        const double Y = std::log((1.0 - x) / x);
        return fn(Y) * std::pow(x * (1.0 - x), 0.5 * gamma);
    };
    s.p = params.p;
    return s;
}

/// K(x,y) = (x+y)^gamma * Phi(x/(x+y)).
inline double kernel_eval(const ShapeFunction& phi, const HomogeneityParams& params,
                          double x, double y) {
    if (!(x > 0.0) || !(y > 0.0))
        throw domain_error("kernel_eval requires positive sizes");
    return std::pow(x + y, params.gamma) * phi.phi(x / (x + y));
}

namespace detail {
/// 4096-point metric grid on (0,1): geometric refinement near s=0 and s=1
/// where s^p Phi varies fastest, uniform across the midrange.
inline const std::vector<double>& metric_grid() {
    static const std::vector<double> grid = [] {
        std::vector<double> g;
        g.reserve(4096);
        const int edge = 1024, mid = 2048;
        const double lo = 1e-9;
        for (int i = 0; i < edge; ++i)
            g.push_back(lo * std::pow(0.1 / lo, (double)i / (double)edge));
        for (int i = 0; i < mid; ++i)
            g.push_back(0.1 + 0.8 * (double)i / (double)(mid - 1));
        for (int i = edge - 1; i >= 0; --i)
            g.push_back(1.0 - lo * std::pow(0.1 / lo, (double)i / (double)edge));
        return g;
    }();
    return grid;
}
}  // namespace detail

/// dist(Phi1, Phi2) = sup s^p |Phi1 - Phi2| over the refined grid.
inline double kernel_metric(const ShapeFunction& phi1, const ShapeFunction& phi2,
                            double p) {
    double sup = 0.0;
    for (double s : detail::metric_grid()) {
        const double d = std::pow(s, p) * std::fabs(phi1.phi(s) - phi2.phi(s));
        sup = std::max(sup, d);
    }
    return sup;
}

/// Largest symmetry residual max|W(Y)-W(-Y)| over the 1024-point check grid.
inline double symmetry_residual(const LogKernel& w, double ymax = 30.0, int npts = 1024) {
    double res = 0.0, scale = 0.0;
    for (int i = 0; i < npts; ++i) {
        const double Y = ymax * (double)(i + 1) / (double)npts;
        res = std::max(res, std::fabs(w.w(Y) - w.w(-Y)));
        scale = std::max(scale, std::fabs(w.w(Y)));
    }
    return scale > 0.0 ? res / scale : res;
}

/// Checks |W(Y)| <= envelope_const * e^{q|Y|} on the standard grid.
inline bool envelope_holds(const LogKernel& w, double ymax = 30.0, int npts = 1024) {
    for (int i = 0; i < npts; ++i) {
        const double Y = -ymax + 2.0 * ymax * (double)i / (double)(npts - 1);
        if (std::fabs(w.w(Y)) > w.envelope_const * std::exp(w.q * std::fabs(Y)) * (1.0 + 1e-12))
            return false;
    }
    return true;
}

/// Cauchy-sequence certificate for the endpoint limit of s^p Phi(s):
/// successive values at s = 1e-6, 1e-7, 1e-8 must settle.
inline bool endpoint_limit_settles(const ShapeFunction& phi, double rel = 1e-3) {
    const double v6 = std::pow(1e-6, phi.p) * phi.phi(1e-6);
    const double v7 = std::pow(1e-7, phi.p) * phi.phi(1e-7);
    const double v8 = std::pow(1e-8, phi.p) * phi.phi(1e-8);
    if (!(v8 > 0.0)) return false;
    return std::fabs(v6 - v7) <= rel * std::fabs(v8) &&
           std::fabs(v7 - v8) <= rel * std::fabs(v8);
}

}  // namespace coagflux
