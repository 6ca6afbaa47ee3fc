#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace coagflux {

using cplx = std::complex<double>;

struct quadrature_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tolerances and integrand envelope for the semi-infinite engine.
/// The envelope |f(z)| <= C * exp(tail_exponent * z) (tail_exponent < 0)
/// fixes the truncation point; oscillation_freq caps the panel width.
struct QuadratureSpec {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    long max_panels = 4000000;
    double tail_exponent = -0.5;
    double oscillation_freq = 0.0;
};

struct QuadResult {
    cplx value{0.0, 0.0};
    double err_est = 0.0;
    long panels = 0;
};

namespace gl15 {
// 15-point Gauss-Legendre rule on [-1,1].
inline constexpr double node[15] = {
    -0.98799251802048542849, -0.93727339240070590431, -0.84820658341042721620,
    -0.72441773136017004742, -0.57097217260853884754, -0.39415134707756336990,
    -0.20119409399743452230, 0.0,
    0.20119409399743452230,  0.39415134707756336990,  0.57097217260853884754,
    0.72441773136017004742,  0.84820658341042721620,  0.93727339240070590431,
    0.98799251802048542849};
inline constexpr double weight[15] = {
    0.03075324199611726835, 0.07036604748810812471, 0.10715922046717193501,
    0.13957067792615431445, 0.16626920581699393355, 0.18616100001556221103,
    0.19843148532711157646, 0.20257824192556127288,
    0.19843148532711157646, 0.18616100001556221103, 0.16626920581699393355,
    0.13957067792615431445, 0.10715922046717193501, 0.07036604748810812471,
    0.03075324199611726835};
}  // namespace gl15

/// One GL15 panel over [a,b].  Throws on non-finite samples.
template <class F>
cplx gl15_panel(F&& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double hal = 0.5 * (b - a);
    cplx acc{0.0, 0.0};
    for (int i = 0; i < 15; ++i) {
        cplx v = f(mid + hal * gl15::node[i]);
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw quadrature_error("non-finite integrand sample at z=" +
                                   std::to_string(mid + hal * gl15::node[i]));
        acc += gl15::weight[i] * v;
    }
    return hal * acc;
}

namespace detail {

// Deterministic depth-first adaptive pass over a fixed list of seed panels.
// Seeds are processed left to right; each is accepted or bisected based on
// the GL15 vs two-half comparison, and leaves accumulate in traversal order.
// Refinement stops at the machine floor relative to the local panel mass,
// so integrals that cancel to ~0 do not refine without bound.
template <class F>
QuadResult adapt_panels(F&& f, const std::vector<std::pair<double, double>>& seeds,
                        double tol_total, long max_panels) {
    double total_len = 0.0;
    for (auto& s : seeds) total_len += s.second - s.first;
    QuadResult res;
    const double min_width_factor = 1e-13;
    struct Item {
        double a, b;
        cplx whole;
        bool have_whole;
    };
    for (auto& seed : seeds) {
        std::vector<Item> stack;
        stack.push_back({seed.first, seed.second, {}, false});
        while (!stack.empty()) {
            Item it = stack.back();
            stack.pop_back();
            cplx whole = it.have_whole ? it.whole : gl15_panel(f, it.a, it.b);
            if (++res.panels > max_panels)
                throw quadrature_error("quadrature did not converge within max_panels");
            const double m = 0.5 * (it.a + it.b);
            cplx left = gl15_panel(f, it.a, m);
            cplx right = gl15_panel(f, m, it.b);
            res.panels += 2;
            const double err = std::abs(whole - (left + right));
            const double budget = tol_total * ((it.b - it.a) / total_len);
            const double floor = 1e-15 * (std::abs(left) + std::abs(right));
            if (err <= budget || err <= floor ||
                (it.b - it.a) < min_width_factor * total_len) {
                res.value += left + right;
                res.err_est += err;
            } else {
                // right pushed first so the left half is processed next
                stack.push_back({m, it.b, right, true});
                stack.push_back({it.a, m, left, true});
            }
        }
    }
    return res;
}

}  // namespace detail

/// Uniform seed panels over [a,b] with width <= cap.
inline std::vector<std::pair<double, double>> uniform_panels(double a, double b,
                                                             double cap) {
    std::vector<std::pair<double, double>> out;
    long n = std::max(1L, (long)std::ceil((b - a) / cap));
    const double h = (b - a) / (double)n;
    for (long i = 0; i < n; ++i)
        out.emplace_back(a + h * (double)i, (i + 1 == n) ? b : a + h * (double)(i + 1));
    return out;
}

/// Geometrically graded panels accumulating toward `endpoint` (one side of
/// [a,b]); used for integrable endpoint singularities u^{-(q+1/2)}.
inline std::vector<std::pair<double, double>> graded_panels(double a, double b,
                                                            double endpoint,
                                                            double floor_width,
                                                            double ratio = 0.5) {
    std::vector<std::pair<double, double>> out;
    const double len = b - a;
    if (endpoint <= a + 0.5 * len) {  // grade toward a
        double hi = b;
        double w = len * (1.0 - ratio);
        while (hi - a > floor_width) {
            double lo = std::max(a + floor_width, hi - w);
            if (hi - lo < 0.25 * floor_width) lo = a;
            out.emplace_back(lo, hi);
            hi = lo;
            w *= ratio;
            if (hi <= a) break;
        }
        if (hi > a) out.emplace_back(a, hi);
        std::reverse(out.begin(), out.end());
    } else {  // grade toward b
        double lo = a;
        double w = len * (1.0 - ratio);
        while (b - lo > floor_width) {
            double hi = std::min(b - floor_width, lo + w);
            if (hi - lo < 0.25 * floor_width) hi = b;
            out.emplace_back(lo, hi);
            lo = hi;
            w *= ratio;
            if (lo >= b) break;
        }
        if (lo < b) out.emplace_back(lo, b);
    }
    return out;
}

/// Adaptive GL15 over the finite interval [a,b]: seed panels capped at
/// pi/(2 max(freq,1)), then deterministic bisection refinement.
template <class F>
QuadResult integrate_interval(F&& f, double a, double b, const QuadratureSpec& spec) {
    if (!(spec.abs_tol > 0.0) || !(spec.rel_tol > 0.0))
        throw std::invalid_argument("tolerances must be positive");
    const double cap = M_PI / (2.0 * std::max(spec.oscillation_freq, 1.0));
    auto seeds = uniform_panels(a, b, std::min(cap, 0.5));

    // coarse pass fixes the scale entering the relative tolerance; the L1
    // panel mass is the achievable scale when the signed total cancels
    double l1 = 0.0;
    for (auto& s : seeds) l1 += std::abs(gl15_panel(f, s.first, s.second));
    const double tol = std::max(spec.abs_tol, spec.rel_tol * l1);

    return detail::adapt_panels(f, seeds, tol, spec.max_panels);
}

/// Truncation point where C e^{-lam (Z - lower)} / lam < abs_tol / 10.
inline double envelope_cutoff(double lower, double lam, double envelope_const,
                              double abs_tol) {
    const double C = std::max(envelope_const, 1e-300);
    return lower + std::max(1.0, std::log(10.0 * C / (lam * abs_tol)) / lam);
}

/// Adaptive GL15 over [lower, oo) for integrands with |f(z)| <= C e^{t z},
/// t = spec.tail_exponent < 0.  Truncates where the envelope tail drops
/// below abs_tol/10, caps the panel width at pi/(2 max(freq,1)), then
/// refines by deterministic bisection.  err_est covers truncation and the
/// local bisection residuals.
template <class F>
QuadResult integrate_semi_infinite(F&& f, double lower, const QuadratureSpec& spec,
                                   double envelope_const = 1.0) {
    if (!(spec.tail_exponent < 0.0))
        throw std::invalid_argument("tail_exponent must be negative");
    const double lam = -spec.tail_exponent;
    const double zmax = envelope_cutoff(lower, lam, envelope_const, spec.abs_tol);
    QuadResult res = integrate_interval(f, lower, zmax, spec);
    res.err_est += std::max(envelope_const, 1e-300) * std::exp(-lam * (zmax - lower)) / lam;
    return res;
}

/// Whole-line version, split at the given point (default 0).  The left half
/// is mapped to t in (0,oo) by reflection; spec_left describes the envelope
/// of f(-t).
template <class F>
QuadResult integrate_real_line(F&& f, const QuadratureSpec& spec_right,
                               const QuadratureSpec& spec_left,
                               double envelope_right = 1.0, double envelope_left = 1.0,
                               double split = 0.0) {
    QuadResult right = integrate_semi_infinite(f, split, spec_right, envelope_right);
    auto g = [&](double t) { return f(2.0 * split - t); };
    QuadResult left = integrate_semi_infinite(g, split, spec_left, envelope_left);
    QuadResult out;
    out.value = left.value + right.value;
    out.err_est = left.err_est + right.err_est;
    out.panels = left.panels + right.panels;
    return out;
}

/// ln(1 + e^z) without overflow or cancellation.
inline double log1p_exp(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

/// (1 - e^{-ikL}) evaluated stably; for |kL| < 1e-8 the Taylor form
/// ikL(1 - ikL/2) avoids cancellation.
inline cplx stable_bracket(double L, double k) {
    const double th = k * L;
    if (std::abs(th) < 1e-8) {
        const cplx ith{0.0, th};
        return ith * (1.0 - 0.5 * ith);
    }
    const double s = std::sin(0.5 * th);
    return {2.0 * s * s, std::sin(th)};
}

/// (1 - e^{-ikL}) / (ik), continuous through k = 0 where it equals L.
inline cplx stable_bracket_over_ik(double L, double k) {
    const double th = k * L;
    if (std::abs(th) < 1e-8) {
        const cplx ith{0.0, th};
        return L * (1.0 - 0.5 * ith * (1.0 - ith / 3.0));
    }
    return stable_bracket(L, k) / cplx{0.0, k};
}

}  // namespace coagflux
