#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "coagflux/spectral.hpp"
#include "coagflux/w0builder.hpp"

namespace coagflux {

struct solver_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// W0 + alpha1 W11 + alpha2 W12 as a single evaluatable kernel.
inline LogKernel combined_kernel(const LogKernel& w0, const LogKernel& w11,
                                 const LogKernel& w12, double alpha1, double alpha2) {
    LogKernel k;
    auto f0 = w0.w, f1 = w11.w, f2 = w12.w;
    k.w = [f0, f1, f2, alpha1, alpha2](double z) {
        return f0(z) + alpha1 * f1(z) + alpha2 * f2(z);
    };
    k.q = w0.q;
    k.envelope_const = w0.envelope_const + std::fabs(alpha1) * w11.envelope_const +
                       std::fabs(alpha2) * w12.envelope_const;
    k.support = std::max({w0.support, w11.support, w12.support});
    k.tail_const = w0.tail_envelope();
    k.id = w0.id + "+[" + std::to_string(alpha1) + "]" + w11.id + "+[" +
           std::to_string(alpha2) + "]" + w12.id;
    return k;
}

/// Precomputed operator data for the fixed-point iteration: N-tables for the
/// three kernel components (combined linearly per iterate) and their symbol
/// diagonals up to mode 2N for the Z2 inversion.
struct SolverContext {
    HomogeneityParams params;
    double k_star = 0.0;
    int N = 16;
    double M_weight = 10.0;  // metric weight, also the trust-region slope
    LogKernel w0, w11, w12;
    PerturbationPair pert;
    SymbolTable tab0, tab11, tab12;
    SymbolDiagonal diag0, diag11, diag12;  // modes to 2N
};

struct SolverBuildOptions {
    int N = 16;
    double M_weight = 10.0;
    TableBuildOptions table;
    PsiOptions psi;
};

inline SolverContext build_solver_context(const BifurcationKernel& bk,
                                          const PerturbationPair& pert,
                                          const SolverBuildOptions& opt = {}) {
    SolverContext ctx;
    ctx.params = bk.recipe.params;
    ctx.k_star = bk.point.k_star;
    ctx.N = opt.N;
    ctx.M_weight = opt.M_weight;
    ctx.w0 = bk.w0;
    ctx.w11 = pert.w11;
    ctx.w12 = pert.w12;
    ctx.pert = pert;
    ctx.tab0 = build_symbol_table(bk.w0, ctx.k_star, ctx.N, opt.table);
    ctx.tab11 = build_symbol_table(pert.w11, ctx.k_star, ctx.N, opt.table);
    ctx.tab12 = build_symbol_table(pert.w12, ctx.k_star, ctx.N, opt.table);
    ctx.diag0 = symbol_diagonal(bk.w0, ctx.k_star, 2 * ctx.N, opt.psi);
    ctx.diag11 = symbol_diagonal(pert.w11, ctx.k_star, 2 * ctx.N, opt.psi);
    ctx.diag12 = symbol_diagonal(pert.w12, ctx.k_star, 2 * ctx.N, opt.psi);
    return ctx;
}

/// Fixed-point unknowns (alpha1, alpha2, psi) at amplitude s, plus the
/// iteration trace.
struct SolverState {
    double s = 0.0;
    double alpha1 = 0.0, alpha2 = 0.0;
    PeriodicField psi;  // Z2, bandwidth N
    int iter = 0;
    std::vector<double> dist_history;
};

inline SolverState zero_state(double s, const SolverContext& ctx) {
    SolverState st;
    st.s = s;
    st.psi = PeriodicField(ctx.N, ctx.k_star);
    return st;
}

/// One application of the fixed-point map:
///   T1 = -(1/s) l1(P1 B(U,U; W0+W1)),  T2 likewise,
///   T3 = -A_W^{-1}(P2 L(psi;W1)) - A_W^{-1}(P2 B(U,U; W0+W1)),
/// U = s cos(k* .) + psi, W1 = alpha1 W11 + alpha2 W12.  B is evaluated
/// spectrally with the per-iterate table tab0 + alpha1 tab11 + alpha2 tab12;
/// the new psi is truncated back to bandwidth N.
inline SolverState t_map(const SolverState& st, const SolverContext& ctx) {
    if (st.s == 0.0) return zero_state(0.0, ctx);
    PeriodicField U = add(scale(cosine_field(ctx.N, ctx.k_star), st.s), st.psi);
    const SymbolTable tab = combine_tables(
        {{1.0, &ctx.tab0}, {st.alpha1, &ctx.tab11}, {st.alpha2, &ctx.tab12}});
    const PeriodicField B = bilinear_fourier(U, U, tab);

    // P1 component in (cos, sin) coordinates and the dual forms
    const cplx c1 = B.a(1);
    const auto l = ctx.pert.ell(2.0 * c1.real(), -2.0 * c1.imag());
    SolverState out;
    out.s = st.s;
    out.alpha1 = -l[0] / st.s;
    out.alpha2 = -l[1] / st.s;

    // Z2 part: the inverted operator is the fixed A_{W0} (the W1 part of the
    // linearization stays explicit), so the fixed point solves
    // P2[L(psi;W0) + L(psi;W1) + B(U,U;W)] = 0
    const SymbolDiagonal diag_w1 =
        combine_diagonals({{st.alpha1, &ctx.diag11}, {st.alpha2, &ctx.diag12}});
    PeriodicField rhs =
        add(project(linearized_L(st.psi, diag_w1), Projection::P2).truncated(2 * ctx.N),
            project(B, Projection::P2));
    const auto inv = apply_Aw_inverse(rhs, ctx.diag0, ctx.params.q);
    out.psi = scale(inv.field, -1.0).truncated(ctx.N);
    out.iter = st.iter + 1;
    out.dist_history = st.dist_history;
    return out;
}

inline double state_dist(const SolverState& a, const SolverState& b, double M_weight) {
    PeriodicField d = add(a.psi, scale(b.psi, -1.0));
    return std::fabs(a.alpha1 - b.alpha1) + std::fabs(a.alpha2 - b.alpha2) +
           M_weight * d.norm(1.0);
}

struct FixedPointOptions {
    double tol = 1e-12;
    int max_iter = 50;
    double contraction_ratio = 0.9;  // required after the burn-in
    int burn_in = 3;
};

/// Iterates T from (0,0,0) until dist(x_{n+1}, x_n) < tol.  Enforces the
/// trust region |alpha1|+|alpha2| <= M|s|, ||psi||_{H1} <= |s| on every
/// iterate and geometric decay of the step after the burn-in.
inline SolverState fixed_point_solve(double s, const SolverContext& ctx,
                                     const FixedPointOptions& opt = {}) {
    if (s == 0.0) return zero_state(0.0, ctx);
    SolverState cur = zero_state(s, ctx);
    for (int it = 1; it <= opt.max_iter; ++it) {
        SolverState nxt = t_map(cur, ctx);
        const double d = state_dist(nxt, cur, ctx.M_weight);
        nxt.dist_history.push_back(d);
        nxt.iter = it;
        if (std::fabs(nxt.alpha1) + std::fabs(nxt.alpha2) > ctx.M_weight * std::fabs(s) ||
            nxt.psi.norm(1.0) > std::fabs(s))
            throw solver_error("iterate left the trust region; reduce |s|");
        const size_t h = nxt.dist_history.size();
        if ((int)h > opt.burn_in && d > opt.tol) {
            const double prev = nxt.dist_history[h - 2];
            if (d >= opt.contraction_ratio * prev)
                throw solver_error("iteration is not contracting (step ratio " +
                                   std::to_string(d / prev) + "); reduce |s|");
        }
        cur = std::move(nxt);
        if (d < opt.tol) return cur;
    }
    throw solver_error("fixed point did not converge within max_iter");
}

/// Assembled constant-flux solution.
struct Solution {
    PeriodicField h_tilde;  // 1 + s cos(k* .) + psi, flux K0
    PeriodicField H;        // rescaled to flux J0
    LogKernel kernel;       // W0 + alpha1 W11 + alpha2 W12
    HomogeneityParams params;
    double k_star = 0.0;
    double s = 0.0;
    double alpha1 = 0.0, alpha2 = 0.0;
    double K0 = 0.0, J0 = 0.0;
    double residual_p1 = 0.0;  // ||P1 B(h,h)|| in H^{1/2-q}
    double residual_p2 = 0.0;  // ||P2 B(h,h)|| in H^{1/2-q}
    W0Recipe recipe;
};

/// h_tilde = 1 + s cos + psi; K0 = P0 B(h,h;W); H = sqrt(J0/K0) h_tilde.
/// Checks kernel positivity on the standard grid and K0 > 0.
inline Solution assemble_solution(const SolverState& st, const SolverContext& ctx,
                                  const W0Recipe& recipe, double J0) {
    if (!(J0 > 0.0)) throw std::invalid_argument("J0 must be positive");
    Solution sol;
    sol.params = ctx.params;
    sol.k_star = ctx.k_star;
    sol.s = st.s;
    sol.alpha1 = st.alpha1;
    sol.alpha2 = st.alpha2;
    sol.J0 = J0;
    sol.recipe = recipe;
    PeriodicField h = constant_field(1.0, ctx.N, ctx.k_star);
    h = add(h, add(scale(cosine_field(ctx.N, ctx.k_star), st.s), st.psi));
    sol.h_tilde = h;

    const SymbolTable tab = combine_tables(
        {{1.0, &ctx.tab0}, {st.alpha1, &ctx.tab11}, {st.alpha2, &ctx.tab12}});
    const PeriodicField B = bilinear_fourier(h, h, tab);
    sol.K0 = B.a(0).real();
    if (!(sol.K0 > 0.0)) throw solver_error("invalid solution: K0 <= 0");
    sol.residual_p1 = project(B, Projection::P1).norm(0.5 - ctx.params.q);
    sol.residual_p2 = project(B, Projection::P2).norm(0.5 - ctx.params.q);

    sol.H = scale(h, std::sqrt(J0 / sol.K0));
    sol.kernel = combined_kernel(ctx.w0, ctx.w11, ctx.w12, st.alpha1, st.alpha2);
    if (!(sol.kernel(0.0) >= 0.0)) throw solver_error("kernel negative at the origin");
    for (int i = 0; i < 1024; ++i) {
        const double z = 1e-3 * std::pow(30.0 / 1e-3, (double)i / 1023.0);
        if (!(sol.kernel(z) > 0.0))
            throw solver_error("kernel positivity violated at |z|=" + std::to_string(z) +
                               "; reduce |s|");
    }
    return sol;
}

/// Size distribution in the original variables:
/// f(x) = H(log x) x^{-(gamma+3)/2}, so f(Qx) = Q^{-(gamma+3)/2} f(x) with
/// Q = e^{2 pi / k*}.
inline double back_transform(const Solution& sol, double x) {
    if (!(x > 0.0)) throw domain_error("back_transform requires x > 0");
    const double ex = 0.5 * (sol.params.gamma + 3.0);
    return sol.H.eval(std::log(x)) * std::pow(x, -ex);
}

}  // namespace coagflux
