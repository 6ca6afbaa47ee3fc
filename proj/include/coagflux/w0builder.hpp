#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "coagflux/kernel.hpp"
#include "coagflux/symbol.hpp"

namespace coagflux {

struct construction_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Unit-mass Gaussian bump (1/(eps sqrt(pi))) exp(-((z-center)/eps)^2).
/// The paper's zeta has mass sqrt(pi); amplitudes are re-tuned downstream,
/// so the normalization only fixes the delta-mass limit of the Psi action.
inline double mollifier(double z, double center, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("mollifier needs epsilon > 0");
    const double t = (z - center) / epsilon;
    return std::exp(-t * t) / (epsilon * std::sqrt(M_PI));
}

/// Even unit-mass bump at |z| = center, as a LogKernel.
inline LogKernel bump_kernel(double center, double epsilon) {
    LogKernel k;
    k.w = [center, epsilon](double z) { return mollifier(std::fabs(z), center, epsilon); };
    k.q = 0.0;
    k.envelope_const = 1.0 / (epsilon * std::sqrt(M_PI));
    k.support = center + 30.0 * epsilon;
    k.tail_const = 0.0;
    k.id = "bump(" + std::to_string(center) + "," + std::to_string(epsilon) + ")";
    return k;
}

/// Everything needed to rebuild W0 bit-for-bit.
struct W0Recipe {
    double z_a = 2.0, z_b = 1.0;
    double epsilon = 0.02;
    double a = 0.0, b = 0.0;  // bump amplitudes
    double sigma = 1.0;       // amplitude ratio parameter, b = sigma / R_b
    HomogeneityParams params;
};

/// Tail component (1 - e^{-(eps z)^2}) exp(q sqrt(z^2+1)); vanishes
/// quadratically at the origin and matches the growth envelope at infinity.
inline LogKernel tail_kernel(double epsilon, const HomogeneityParams& params) {
    const double q = params.q;
    LogKernel k;
    k.w = [epsilon, q](double z) {
        const double t = epsilon * z;
        return -std::expm1(-t * t) * std::exp(q * std::sqrt(z * z + 1.0));
    };
    k.q = q;
    k.envelope_const = std::exp(std::fabs(q));
    k.id = "tail(" + std::to_string(epsilon) + "," + std::to_string(q) + ")";
    return k;
}

/// W0(z) = a * bump(|z|; z_a) + b * bump(|z|; z_b) + tail(z).
inline LogKernel build_w0(const W0Recipe& r) {
    if (!(r.z_a > r.z_b && r.z_b > 0.0))
        throw std::invalid_argument("build_w0 requires z_a > z_b > 0");
    if (!(r.epsilon > 0.0 && r.epsilon < std::min(r.z_b, 1.0)))
        throw std::invalid_argument("build_w0 requires epsilon << min(z_b, 1)");
    if (!(r.a > 0.0 && r.b > 0.0))
        throw std::invalid_argument("build_w0 requires positive amplitudes");
    const double za = r.z_a, zb = r.z_b, eps = r.epsilon, a = r.a, b = r.b;
    const double q = r.params.q;
    LogKernel k;
    k.w = [za, zb, eps, a, b, q](double z) {
        const double az = std::fabs(z);
        const double t = eps * z;
        return a * mollifier(az, za, eps) + b * mollifier(az, zb, eps) -
               std::expm1(-t * t) * std::exp(q * std::sqrt(z * z + 1.0));
    };
    k.q = q;
    k.envelope_const = std::exp(std::fabs(q)) +
                       (a + b) / (eps * std::sqrt(M_PI));
    k.support = za + 30.0 * eps;
    k.tail_const = 1.0001 * std::exp(std::fabs(q));
    k.id = "w0(za=" + std::to_string(za) + ",zb=" + std::to_string(zb) +
           ",eps=" + std::to_string(eps) + ",a=" + std::to_string(a) +
           ",b=" + std::to_string(b) + ",q=" + std::to_string(q) + ")";
    return k;
}

struct BifurcationKernel {
    LogKernel w0;
    BifurcationPoint point;
    W0Recipe recipe;
};

struct ConstructOptions {
    double k_lo = 15.0, k_hi = 25.0;
    double K_max = 500.0;
    int cert_grid = 256;
    double newton_tol_factor = 1e-12;  // residual < factor * scale
    int max_newton = 50;
    PsiOptions psi;
};

/// Tunes (k, sigma) so that Psi(k; W0) = 0 with the amplitude rule
/// a = 1/R_a(k), b = sigma/R_b(k), R_j = |Psi(k; unit bump at z_j)|.
/// In those variables the residual is e^{i theta_a} + sigma e^{i theta_b}
/// + Psi(k; tail), attacked by a damped Newton iteration with a
/// finite-difference k-derivative, started from the delta-mass alignment
/// root with sigma = 1.
inline BifurcationKernel solve_bifurcation_kernel(double z_a, double z_b, double epsilon,
                                                  const HomogeneityParams& params,
                                                  const ConstructOptions& opt = {}) {
    auto roots = alignment_scan(z_a, z_b, opt.k_lo, opt.k_hi);
    if (roots.empty())
        throw construction_error("no alignment root in the scan window; widen k range");
    const LogKernel bump_a = bump_kernel(z_a, epsilon);
    const LogKernel bump_b = bump_kernel(z_b, epsilon);
    const LogKernel tail = tail_kernel(epsilon, params);

    auto residual = [&](double k, double sigma, cplx& psi_a, cplx& psi_b) -> cplx {
        psi_a = eval_psi(k, bump_a, opt.psi);
        psi_b = eval_psi(k, bump_b, opt.psi);
        const cplx psi_t = eval_psi(k, tail, opt.psi);
        return psi_a / std::abs(psi_a) + sigma * psi_b / std::abs(psi_b) + psi_t;
    };

    double k = roots.back().root;  // largest alignment root in the window
    double sigma = 1.0;
    cplx pa, pb;
    cplx F = residual(k, sigma, pa, pb);
    const double scale = 1.0 + std::abs(sigma);
    int it = 0;
    for (; it < opt.max_newton && std::abs(F) > opt.newton_tol_factor * scale; ++it) {
        const double dk = 1e-6 * std::max(1.0, std::fabs(k));
        cplx pa2, pb2;
        const cplx Fk = (residual(k + dk, sigma, pa2, pb2) - F) / dk;
        const cplx Fs = pb / std::abs(pb);  // exact sigma-derivative
        // solve [Re Fk  Re Fs; Im Fk  Im Fs] * (dk, dsig) = -F
        const double det = Fk.real() * Fs.imag() - Fk.imag() * Fs.real();
        if (std::fabs(det) < 1e-300)
            throw construction_error("degenerate Newton system in kernel construction");
        double step_k = (-F.real() * Fs.imag() + F.imag() * Fs.real()) / det;
        double step_s = (-Fk.real() * F.imag() + Fk.imag() * F.real()) / det;
        // keep the step inside the trust window
        const double lim = 0.5;
        const double mag = std::max(std::fabs(step_k), std::fabs(step_s) * 2.0);
        if (mag > lim) { step_k *= lim / mag; step_s *= lim / mag; }
        k += step_k;
        sigma += step_s;
        F = residual(k, sigma, pa, pb);
    }
    if (std::abs(F) > opt.newton_tol_factor * scale)
        throw construction_error(
            "kernel construction did not converge; try smaller epsilon or wider scan");
    if (std::fabs(sigma - 1.0) > 0.5)
        throw construction_error("amplitude ratio sigma=" + std::to_string(sigma) +
                                 " outside the working regime |sigma-1| <= 1/2");

    W0Recipe recipe;
    recipe.z_a = z_a;
    recipe.z_b = z_b;
    recipe.epsilon = epsilon;
    recipe.a = 1.0 / std::abs(pa);
    recipe.b = sigma / std::abs(pb);
    recipe.sigma = sigma;
    recipe.params = params;

    BifurcationKernel out;
    out.w0 = build_w0(recipe);
    out.recipe = recipe;
    KstarOptions ko;
    ko.k_lo = opt.k_lo;
    ko.k_hi = opt.k_hi;
    ko.K_max = opt.K_max;
    ko.cert_grid = opt.cert_grid;
    ko.psi = opt.psi;
    out.point = find_kstar(out.w0, params, ko);
    return out;
}

/// Gaussian bump pair whose linearized images span the critical subspace,
/// with the dual 2x2 matrix M (column j = (Re Psi_j, -Im Psi_j)) and the
/// dual forms given by the rows of M^{-1}.
struct PerturbationPair {
    LogKernel w11, w12;
    double z1 = 0.0, z2 = 0.0;
    double M[2][2] = {{0, 0}, {0, 0}};
    double Minv[2][2] = {{0, 0}, {0, 0}};
    cplx psi1{0, 0}, psi2{0, 0};  // Psi(k*; W_{1,j})

    /// dual forms applied to w = c*cos(k* .) + s*sin(k* .)
    std::array<double, 2> ell(double c, double s) const {
        return {Minv[0][0] * c + Minv[0][1] * s, Minv[1][0] * c + Minv[1][1] * s};
    }
};

struct PerturbationOptions {
    double z_lo = 0.5, z_hi = 4.0;
    int grid = 64;
    double cond_floor = 0.05;  // |det M| >= cond_floor * ||M||_F^2
    PsiOptions psi;
};

/// Scans the z-grid for the bump pair maximizing |det M|; fails if no pair
/// clears the conditioning floor.
inline PerturbationPair build_perturbations(double k_star, double epsilon,
                                            const PerturbationOptions& opt = {}) {
    const int n = opt.grid;
    std::vector<cplx> psis(n);
    std::vector<double> zs(n);
    for (int i = 0; i < n; ++i) {
        zs[i] = opt.z_lo + (opt.z_hi - opt.z_lo) * (double)i / (double)(n - 1);
        psis[i] = eval_psi(k_star, bump_kernel(zs[i], epsilon), opt.psi);
    }
    int bi = -1, bj = -1;
    double best = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double det = psis[i].real() * (-psis[j].imag()) -
                               (-psis[i].imag()) * psis[j].real();
            const double fro = std::norm(psis[i]) + std::norm(psis[j]);
            if (std::fabs(det) > best && std::fabs(det) >= opt.cond_floor * fro) {
                best = std::fabs(det);
                bi = i;
                bj = j;
            }
        }
    if (bi < 0)
        throw construction_error("no perturbation pair clears the conditioning floor");
    PerturbationPair out;
    out.z1 = zs[bi];
    out.z2 = zs[bj];
    out.w11 = bump_kernel(out.z1, epsilon);
    out.w12 = bump_kernel(out.z2, epsilon);
    out.psi1 = psis[bi];
    out.psi2 = psis[bj];
    out.M[0][0] = out.psi1.real();
    out.M[1][0] = -out.psi1.imag();
    out.M[0][1] = out.psi2.real();
    out.M[1][1] = -out.psi2.imag();
    const double det = out.M[0][0] * out.M[1][1] - out.M[0][1] * out.M[1][0];
    out.Minv[0][0] = out.M[1][1] / det;
    out.Minv[0][1] = -out.M[0][1] / det;
    out.Minv[1][0] = -out.M[1][0] / det;
    out.Minv[1][1] = out.M[0][0] / det;
    return out;
}

}  // namespace coagflux
