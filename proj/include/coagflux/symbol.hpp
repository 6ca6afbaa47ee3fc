#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "coagflux/kernel.hpp"
#include "coagflux/quadrature.hpp"

namespace coagflux {

struct symbol_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// G(z,k) = e^{-z/2}(1+e^{ikz})(1-(e^z+1)^{-ik})
///        + e^{z/2}(1+e^{-ikz})(1-(e^{-z}+1)^{-ik}).
/// The growing-branch bracket uses L = log1p(e^{-z}) so that the product
/// stays O(e^{-z/2}) for large z instead of overflowing.
inline cplx eval_G(double z, double k) {
    const cplx eikz{std::cos(k * z), std::sin(k * z)};
    const double L1 = log1p_exp(z);    // ln(e^z + 1)
    const double L2 = log1p_exp(-z);   // ln(e^{-z} + 1)
    const cplx term1 = std::exp(-0.5 * z) * (1.0 + eikz) * stable_bracket(L1, k);
    const cplx term2 = std::exp(0.5 * z) * (1.0 + std::conj(eikz)) * stable_bracket(L2, k);
    return term1 + term2;
}

/// G(z,k)/(ik), continuous through k = 0 (value 2[e^{-z/2} L1 + e^{z/2} L2]).
inline cplx eval_G_over_ik(double z, double k) {
    const cplx eikz{std::cos(k * z), std::sin(k * z)};
    const double L1 = log1p_exp(z);
    const double L2 = log1p_exp(-z);
    return std::exp(-0.5 * z) * (1.0 + eikz) * stable_bracket_over_ik(L1, k) +
           std::exp(0.5 * z) * (1.0 + std::conj(eikz)) * stable_bracket_over_ik(L2, k);
}

struct PsiOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    double k_floor = 1e-4;  // below this the bracket/(ik) quotient form is used
};

/// Symbol of the linearized flux operator: for k != 0
///   Psi(k;W) = (1/ik) Int_0^oo W(z) G(z,k) dz,
/// and for |k| < k_floor the integrand G(z,k)/(ik) is evaluated stably, so
/// Psi(0;W) = 2 Int W(z)[e^{-z/2}ln(e^z+1) + e^{z/2}ln(1+e^{-z})]dz.
/// Requires W even with q < 1/2.
inline cplx eval_psi(double k, const LogKernel& w, const PsiOptions& opt = {}) {
    if (!(w.q < 0.5)) throw symbol_error("eval_psi requires q < 1/2");
    QuadratureSpec spec;
    spec.abs_tol = opt.abs_tol;
    spec.rel_tol = opt.rel_tol;
    spec.tail_exponent = w.q - 0.5;
    spec.oscillation_freq = 2.0 * std::fabs(k);
    const bool small_k = std::fabs(k) < opt.k_floor;
    auto fn = [&](double z) -> cplx {
        const double wz = w.w(z);
        if (wz == 0.0) return {0.0, 0.0};
        return small_k ? wz * eval_G_over_ik(z, k) : wz * eval_G(z, k);
    };
    // |G| <= 4 e^{-z/2} + (bracket <= min(2,|k|e^{-z})) e^{z/2}; truncation by
    // the tail envelope once the localized parts are past their support
    const double gfac = 4.0 + 4.0 * std::fabs(k);
    double zmax = envelope_cutoff(0.0, 0.5 - w.q, w.tail_envelope() * gfac, opt.abs_tol);
    if (std::isfinite(w.support)) zmax = std::max(zmax, w.support + 2.0);
    QuadResult r = integrate_interval(fn, 0.0, zmax, spec);
    return small_k ? r.value : r.value / cplx{0.0, k};
}

/// Corrected large-|k| law of the symbol.  The bracketed derivation gives
///   ik * Psi(k;W0) -> a sgn(k) e^{i (pi sgn(k)/2)(q - 1/2)} |k|^{1/2+q},
/// a = 2i Gamma(1/2-q)/(1+gamma+2p), so Psi itself decays like |k|^{q-1/2}:
///   Psi_asym(k) = (2 Gamma(1/2-q)/(1+gamma+2p)) e^{i (pi sgn(k)/2)(q-1/2)} |k|^{q-1/2}.
struct SymbolAsymptotics {
    cplx amplitude;        // a = 2i Gamma(1/2-q)/(1+gamma+2p)
    double exponent;       // 1/2 + q, the power carried by ik*Psi
    double phase_per_sign; // (pi/2)(q - 1/2)
};

inline SymbolAsymptotics symbol_asymptotics(const HomogeneityParams& params) {
    SymbolAsymptotics out;
    const double q = params.q;
    out.amplitude = cplx{0.0, 2.0} * std::tgamma(0.5 - q) /
                    (1.0 + params.gamma + 2.0 * params.p);
    out.exponent = 0.5 + q;
    out.phase_per_sign = 0.5 * M_PI * (q - 0.5);
    return out;
}

inline cplx psi_asymptotic(double k, const HomogeneityParams& params) {
    if (k == 0.0) throw symbol_error("psi_asymptotic undefined at k = 0");
    const SymbolAsymptotics a = symbol_asymptotics(params);
    const double sgn = k > 0.0 ? 1.0 : -1.0;
    const cplx phase{std::cos(a.phase_per_sign * sgn), std::sin(a.phase_per_sign * sgn)};
    const cplx ik_psi = a.amplitude * sgn * phase * std::pow(std::fabs(k), a.exponent);
    return ik_psi / cplx{0.0, k};
}

/// Bracketed alignment root: interval where Im(conj(G(z_b,k)) G(z_a,k))
/// changes sign with Re < 0 (the two G-vectors point in opposite directions).
struct AlignmentBracket {
    double lo = 0.0, hi = 0.0, root = 0.0;
};

/// Scans k in [k_lo, k_hi] on `grid` points for alignment roots: sign
/// changes of h(k) = Im(conj(G(z_b,k))G(z_a,k)) with Re < 0 at the change,
/// refined by bisection to width <= 1e-10.  Im also crosses zero wherever
/// G(z,k) itself vanishes (e.g. G(z,(2m+1)pi/z) = 0); there Re flips sign
/// across the crossing, so requiring Re < 0 on both sides keeps exactly the
/// opposite-direction alignments.  Empty output is not an error.
inline std::vector<AlignmentBracket> alignment_scan(double z_a, double z_b,
                                                    double k_lo, double k_hi,
                                                    int grid = 4096) {
    if (!(k_hi > k_lo) || !(k_lo > 0.0))
        throw std::invalid_argument("alignment_scan needs a positive k range");
    std::vector<AlignmentBracket> out;
    if (z_a == z_b) return out;  // ratio identically 1 > 0
    auto prod = [&](double k) { return std::conj(eval_G(z_b, k)) * eval_G(z_a, k); };
    auto h = [&](double k) { return std::imag(prod(k)); };
    double kprev = k_lo, hprev = h(kprev);
    for (int i = 1; i <= grid; ++i) {
        const double k = k_lo + (k_hi - k_lo) * (double)i / (double)grid;
        const double hk = h(k);
        if (hprev == 0.0 || hprev * hk < 0.0) {
            double lo = kprev, hi = k;
            const double hlo_sign = hprev;
            while (hi - lo > 1e-10) {
                const double mid = 0.5 * (lo + hi);
                const double hm = h(mid);
                if (hm == 0.0) { lo = hi = mid; break; }
                if (hm * hlo_sign < 0.0) hi = mid; else lo = mid;
            }
            AlignmentBracket b{lo, hi, 0.5 * (lo + hi)};
            const double off = 1e-5 * std::max(1.0, std::fabs(b.root));
            if (std::real(prod(b.root - off)) < 0.0 && std::real(prod(b.root + off)) < 0.0)
                out.push_back(b);
        }
        kprev = k;
        hprev = hk;
    }
    return out;
}

/// Bifurcation wavenumber and the derived period/dilation factor.
struct BifurcationPoint {
    double k_star = 0.0;
    double T = 0.0;       // 2 pi / k_star
    double Q = 0.0;       // e^T
    double residual = 0.0;   // |Psi(k_star; W0)|
    double psi_scale = 0.0;  // median |Psi| over the scan grid
    double certified_to = 0.0;   // no further zero up to this k
    double cert_margin = 0.0;    // min k|Psi| / median k|Psi| on the cert grid
    double asym_mod_ratio = 0.0;   // |Psi/Psi_asym| at K_max (reported)
    double asym_phase_diff = 0.0;  // phase difference at K_max (reported)
};

struct KstarOptions {
    double k_lo = 15.0, k_hi = 25.0;
    int scan_grid = 512;
    double K_max = 500.0;
    int cert_grid = 256;
    double residual_factor = 1e-10;  // refine to |Psi| <= factor * scale
    double cert_margin = 0.02;       // min k|Psi| vs median k|Psi| threshold
    PsiOptions psi;
};

/// Locates the largest zero of k -> |Psi(k;w0)| inside the scan window and
/// refines it by golden-section on |Psi|.  The no-further-zero certificate
/// checks min k|Psi(k)| over a geometric grid in (k_star, K_max] against the
/// grid median of k|Psi| (the symbol decays like 1/k at mollifier scales, so
/// the k-normalized margin is the meaningful one).  The ratio to the ideal
/// envelope asymptotics at K_max is recorded for reporting; it approaches 1
/// only for kernels without mollified bumps, see the kernel notes.
inline BifurcationPoint find_kstar(const LogKernel& w0, const HomogeneityParams& params,
                                   const KstarOptions& opt = {}) {
    auto apsi = [&](double k) { return std::abs(eval_psi(k, w0, opt.psi)); };

    std::vector<double> mags(opt.scan_grid + 1);
    std::vector<double> ks(opt.scan_grid + 1);
    for (int i = 0; i <= opt.scan_grid; ++i) {
        ks[i] = opt.k_lo + (opt.k_hi - opt.k_lo) * (double)i / (double)opt.scan_grid;
        mags[i] = apsi(ks[i]);
    }
    std::vector<double> sorted = mags;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double scale = sorted[sorted.size() / 2];

    // candidate local minima, deepest-refinable largest k wins
    std::vector<int> candidates;
    for (int i = 1; i < opt.scan_grid; ++i)
        if (mags[i] <= mags[i - 1] && mags[i] <= mags[i + 1] && mags[i] < 0.2 * scale)
            candidates.push_back(i);
    if (candidates.empty())
        throw symbol_error("find_kstar: no zero candidate in scan window");

    BifurcationPoint bp;
    bool found = false;
    for (auto it = candidates.rbegin(); it != candidates.rend() && !found; ++it) {
        double lo = ks[*it - 1], hi = ks[*it + 1];
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
        double f1 = apsi(x1), f2 = apsi(x2);
        while (hi - lo > 1e-12 * std::max(1.0, hi)) {
            if (f1 < f2) {
                hi = x2; x2 = x1; f2 = f1;
                x1 = hi - gr * (hi - lo); f1 = apsi(x1);
            } else {
                lo = x1; x1 = x2; f1 = f2;
                x2 = lo + gr * (hi - lo); f2 = apsi(x2);
            }
        }
        const double kc = 0.5 * (lo + hi);
        const double res = apsi(kc);
        if (res <= opt.residual_factor * scale) {
            bp.k_star = kc;
            bp.residual = res;
            found = true;
        }
    }
    if (!found)
        throw symbol_error("find_kstar: no candidate refines below tolerance");
    bp.T = 2.0 * M_PI / bp.k_star;
    bp.Q = std::exp(bp.T);
    bp.psi_scale = scale;

    // certification sweep on a geometric grid up to K_max
    const double start = bp.k_star * 1.02;
    std::vector<double> kmags(opt.cert_grid + 1);
    double minmag = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= opt.cert_grid; ++i) {
        const double k = start * std::pow(opt.K_max / start, (double)i / (double)opt.cert_grid);
        kmags[i] = k * apsi(k);
        minmag = std::min(minmag, kmags[i]);
    }
    std::nth_element(kmags.begin(), kmags.begin() + kmags.size() / 2, kmags.end());
    const double kmed = kmags[kmags.size() / 2];
    bp.cert_margin = kmed > 0.0 ? minmag / kmed : 0.0;
    if (!(bp.cert_margin >= opt.cert_margin))
        throw symbol_error("find_kstar: k|Psi| margin " + std::to_string(bp.cert_margin) +
                           " beyond k_star below threshold; zero certificate failed");
    const cplx at_kmax = eval_psi(opt.K_max, w0, opt.psi);
    const cplx asym = psi_asymptotic(opt.K_max, params);
    bp.asym_mod_ratio = std::abs(at_kmax) / std::abs(asym);
    bp.asym_phase_diff = std::arg(at_kmax / asym);
    bp.certified_to = opt.K_max;
    return bp;
}

}  // namespace coagflux
