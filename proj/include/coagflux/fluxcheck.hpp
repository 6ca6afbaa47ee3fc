#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "coagflux/kernel.hpp"
#include "coagflux/solver.hpp"
#include "coagflux/spectral.hpp"

namespace coagflux {

struct fluxcheck_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Direct quadrature of B(H1,H2;W)(X) through the substitution
/// u = Y - X, wt = Z - X - ln(1-e^u), which maps the integration region to
/// (-oo,0) x (0,oo).  For band-limited H2 the inner wt-integral reduces
/// exactly to the cumulative transforms
///   Phi_n(r) = int_{-oo}^r e^{t/2} W(t) e^{-i n k* t} dt,  r(u) = u - ln(1-e^u),
/// tabulated once per kernel; the outer u-integral is graded exponentially
/// toward u -> 0- where the integrand grows like (-u)^{-(q+1/2)}.
class BilinearDirect {
  public:
    static constexpr int kMaxModes = 64;

    BilinearDirect(const LogKernel& w, double k_star, int N, double abs_tol = 1e-12)
        : w_(w), k_star_(k_star), N_(N), abs_tol_(abs_tol) {
        if (!(w.q < 0.5)) throw fluxcheck_error("bilinear_direct requires q < 1/2");
        if (N > kMaxModes) throw fluxcheck_error("bilinear_direct: mode budget exceeded");
        const double lam = 0.5 - w.q;
        const double C = 40.0 * std::max(w.envelope_const, 1.0);
        v_max_ = std::min(std::log(C / abs_tol) / lam, 600.0 / (0.5 + w.q));
        u_cut_ = std::log(C / abs_tol) / lam;  // |u| range of the smooth region
        t_lo_ = -std::log(C / abs_tol) / lam - 2.0;
        t_hi_ = v_max_ + 1.0;
        width_ = std::min(8.0 / ((double)std::max(N, 1) * k_star + 1.0), 0.01);
        const long panels = (long)std::ceil((t_hi_ - t_lo_) / width_);
        width_ = (t_hi_ - t_lo_) / (double)panels;  // exact cover
        cum_.assign((size_t)(panels + 1) * (size_t)(N + 1), cplx{0.0, 0.0});
        // cumulative sweep left to right
        std::vector<cplx> acc((size_t)N + 1, cplx{0.0, 0.0});
        for (long j = 0; j < panels; ++j) {
            const double a = t_lo_ + width_ * (double)j;
            add_partial(acc.data(), a, a + width_);
            for (int n = 0; n <= N; ++n)
                cum_[(size_t)(j + 1) * (size_t)(N + 1) + (size_t)n] = acc[(size_t)n];
        }
        npanels_ = panels;
        trunc_err_ = std::max(w.envelope_const, 1.0) *
                     (std::exp(-lam * (0.0 - t_lo_)) + std::exp(-lam * v_max_)) / lam;
    }

    double k_star() const { return k_star_; }
    int N() const { return N_; }
    double truncation_err() const { return trunc_err_; }

    /// B(H1,H2;W)(X); fields must share k_star and fit the mode budget.
    double eval(const PeriodicField& h1, const PeriodicField& h2, double X) const {
        if (h1.N() > N_ || h2.N() > N_)
            throw fluxcheck_error("bilinear_direct: field bandwidth exceeds engine");
        if (N_ > 0 && (h1.k_star() != k_star_ || h2.k_star() != k_star_))
            throw fluxcheck_error("bilinear_direct: wavenumber mismatch");
        double total = 0.0;
        // smooth region u in [-U, -1/2]
        {
            const double U = u_cut_;
            const double wu = std::min(8.0 / (2.0 * (double)std::max(N_, 1) * k_star_ + 2.0), 0.01);
            const long pn = (long)std::ceil((U - 0.5) / wu);
            const double h = (U - 0.5) / (double)pn;
            for (long p = 0; p < pn; ++p) {
                const double a = -U + h * (double)p;
                total += outer_panel(h1, h2, X, a, a + h, false);
            }
        }
        // graded region u = -e^{-v}, v in [ln 2, v_max]
        {
            double v = std::log(2.0);
            while (v < v_max_) {
                const double wv = std::min(
                    0.4, 8.0 / (2.0 * (double)std::max(N_, 1) * k_star_ * std::exp(-v) + 2.0));
                const double b = std::min(v_max_, v + wv);
                total += outer_panel(h1, h2, X, v, b, true);
                v = b;
            }
        }
        return total;
    }

  private:
    // integrand of the outer u-integral at a point (u given directly or
    // through v with u = -e^{-v}, including the Jacobian e^{-v} = -u)
    double outer_integrand(const PeriodicField& h1, const PeriodicField& h2, double X,
                           double coord, bool graded) const {
        const double u = graded ? -std::exp(-coord) : coord;
        const double m1 = -std::expm1(u);  // 1 - e^u > 0
        const double r = u - std::log(m1);
        const double inner = mode_sum(h2, X + u, r);
        const double jac = graded ? -u : 1.0;
        return jac * h1.eval(X + u) * inner;
    }

    double outer_panel(const PeriodicField& h1, const PeriodicField& h2, double X,
                       double a, double b, bool graded) const {
        const double mid = 0.5 * (a + b), hal = 0.5 * (b - a);
        double acc = 0.0;
        for (int i = 0; i < 15; ++i)
            acc += gl15::weight[i] *
                   outer_integrand(h1, h2, X, mid + hal * gl15::node[i], graded);
        return hal * acc;
    }

    // sum_n b_n e^{i n k* theta} Phi_n(r), real by Hermitian symmetry
    double mode_sum(const PeriodicField& h2, double theta, double r) const {
        cplx phi[kMaxModes + 1];
        phi_all(r, phi);
        double out = (h2.a(0) * phi[0]).real();
        if (h2.N() > 0) {
            const cplx rot{std::cos(k_star_ * theta), std::sin(k_star_ * theta)};
            cplx pw{1.0, 0.0};
            for (int n = 1; n <= h2.N(); ++n) {
                pw *= rot;
                out += 2.0 * (h2.a(n) * pw * phi[(size_t)n]).real();
            }
        }
        return out;
    }

    // kernel factor e^{t/2} W(t) with the e^{-i k* t} mode phases, GL15 over
    // [a,b], accumulated into out[0..N]
    void add_partial(cplx* out, double a, double b) const {
        const double mid = 0.5 * (a + b), hal = 0.5 * (b - a);
        for (int i = 0; i < 15; ++i) {
            const double t = mid + hal * gl15::node[i];
            const double wv = w_.w(t);
            if (wv == 0.0) continue;
            const double base = gl15::weight[i] * hal * std::exp(0.5 * t) * wv;
            const cplx ph{std::cos(k_star_ * t), -std::sin(k_star_ * t)};
            cplx pw{1.0, 0.0};
            out[0] += base;
            for (int n = 1; n <= N_; ++n) {
                pw *= ph;
                out[(size_t)n] += base * pw;
            }
        }
    }

    // Phi_n(r) for all n >= 0: stored cumulative plus a partial panel
    void phi_all(double r, cplx* out) const {
        if (r <= t_lo_) {
            for (int n = 0; n <= N_; ++n) out[(size_t)n] = cplx{0.0, 0.0};
            return;
        }
        const double rr = std::min(r, t_hi_);
        long j = (long)std::floor((rr - t_lo_) / width_);
        j = std::max(0L, std::min(j, npanels_ - 1));
        const double a = t_lo_ + width_ * (double)j;
        for (int n = 0; n <= N_; ++n)
            out[(size_t)n] = cum_[(size_t)j * (size_t)(N_ + 1) + (size_t)n];
        if (rr > a) add_partial(out, a, rr);
    }

    LogKernel w_;
    double k_star_;
    int N_;
    double abs_tol_;
    double v_max_, u_cut_, t_lo_, t_hi_, width_, trunc_err_ = 0.0;
    long npanels_ = 0;
    std::vector<cplx> cum_;
};

/// One-off direct evaluation (engine built per call).
inline double bilinear_direct(const PeriodicField& h1, const PeriodicField& h2,
                              const LogKernel& w, double X) {
    BilinearDirect engine(w, h1.N() > 0 ? h1.k_star() : (h2.N() > 0 ? h2.k_star() : 1.0),
                          std::max(h1.N(), h2.N()));
    return engine.eval(h1, h2, X);
}

inline LogKernel abs_kernel(const LogKernel& w) {
    LogKernel k = w;
    auto fn = w.w;
    k.w = [fn](double z) { return std::fabs(fn(z)); };
    k.id = "abs(" + w.id + ")";
    return k;
}

/// b_{Phi,gamma} = B(1,1;W)^{-1/2}; cross-checked against (Psi(0;W)/2)^{-1/2}.
inline double compute_b(const LogKernel& w) {
    BilinearDirect engine(w, 1.0, 0);
    PeriodicField one = constant_field(1.0, 0, 1.0);
    const double B11 = engine.eval(one, one, 0.0);
    if (!(B11 > 0.0)) throw fluxcheck_error("compute_b: non-positive B(1,1;W)");
    const double via_psi = 0.5 * eval_psi(0.0, w).real();
    if (std::fabs(B11 - via_psi) > 1e-6 * std::fabs(B11))
        throw fluxcheck_error("compute_b: direct quadrature and symbol route disagree");
    return 1.0 / std::sqrt(B11);
}

/// C_W = B(1,1;|W|)(0), the L-infinity bound constant of the flux operator.
inline double compute_cw(const LogKernel& w) {
    BilinearDirect engine(abs_kernel(w), 1.0, 0);
    PeriodicField one = constant_field(1.0, 0, 1.0);
    return engine.eval(one, one, 0.0);
}

/// Direct quadrature of the flux J(x;f) in the original variables for size
/// distributions of the self-similar form f(y) = H(ln y) y^{-(gamma+3)/2}.
/// The inner z-integral reduces per mode (z = y w) to the cumulants
///   Q_n(v) = int_v^oo (1+w)^gamma Phi(1/(1+w)) w^{i n k* - (gamma+3)/2} dw,
/// tabulated on a log grid; the outer y-integral splits at y = x/2 with
/// log-graded panels toward both endpoints, mirroring the y<z / y>=z split
/// of the finiteness analysis.
class FluxJ {
  public:
    static constexpr int kMaxModes = 64;

    FluxJ(const ShapeFunction& phi, const HomogeneityParams& params, double k_star, int N,
          double abs_tol = 1e-12)
        : phi_(phi), params_(params), k_star_(k_star), N_(N) {
        if (N > kMaxModes) throw fluxcheck_error("flux_J: mode budget exceeded");
        if (!(params.gamma + 2.0 * params.p < 1.0) || !(params.gamma + 2.0 * params.p >= 0.0))
            throw fluxcheck_error("flux_J requires 0 <= gamma+2p < 1");
        const double lam = 0.5 - params.q;
        const double C = 400.0;
        zeta_hi_ = std::log(C / abs_tol) / lam + 2.0;
        zeta_lo_ = -std::min(std::log(C / abs_tol) / lam + 2.0, 600.0 / (0.5 + params.q));
        width_ = std::min(8.0 / ((double)std::max(N, 1) * k_star + 1.0), 0.01);
        const long panels = (long)std::ceil((zeta_hi_ - zeta_lo_) / width_);
        width_ = (zeta_hi_ - zeta_lo_) / (double)panels;
        npanels_ = panels;
        // cumulative from the top: top_[j][n] = Q_n at boundary j
        top_.assign((size_t)(panels + 1) * (size_t)(N + 1), cplx{0.0, 0.0});
        std::vector<cplx> acc((size_t)N + 1, cplx{0.0, 0.0});
        for (long j = panels - 1; j >= 0; --j) {
            const double a = zeta_lo_ + width_ * (double)j;
            add_partial(acc.data(), a, a + width_);
            for (int n = 0; n <= N_; ++n)
                top_[(size_t)j * (size_t)(N_ + 1) + (size_t)n] = acc[(size_t)n];
        }
    }

    /// J(x; f) with f(y) = H(ln y) y^{-(gamma+3)/2}.
    double eval(const PeriodicField& H, double x) const {
        if (H.N() > N_) throw fluxcheck_error("flux_J: field bandwidth exceeds engine");
        if (!(x > 0.0)) throw fluxcheck_error("flux_J requires x > 0");
        double total = 0.0;
        const double osc = 4.0 * (double)std::max(N_, 1) * k_star_;
        const double wpan = std::min(8.0 / (osc + 2.0), 0.01);
        // piece 1: y = x e^{eta}, eta in [eta_lo, -ln 2]; the integrand
        // decays like e^{(1/2-q)eta} and Q vanishes beyond the grid top
        {
            const double eta_lo = -zeta_hi_ + 1.0;
            const long pn = (long)std::ceil((-std::log(2.0) - eta_lo) / wpan);
            const double h = (-std::log(2.0) - eta_lo) / (double)pn;
            for (long p = 0; p < pn; ++p) {
                const double a = eta_lo + h * (double)p;
                total += y_panel(H, x, a, a + h, false);
            }
        }
        // piece 2: y = x(1 - e^{theta}), theta in [theta_lo, -ln 2]
        {
            const double theta_lo = zeta_lo_ + 1.0;
            const long pn = (long)std::ceil((-std::log(2.0) - theta_lo) / wpan);
            const double h = (-std::log(2.0) - theta_lo) / (double)pn;
            for (long p = 0; p < pn; ++p) {
                const double a = theta_lo + h * (double)p;
                total += y_panel(H, x, a, a + h, true);
            }
        }
        return total;
    }

  private:
    // kernel factor (1+w)^gamma Phi(1/(1+w)) w^{-(gamma+3)/2} with the mode
    // phases w^{i n k*}, in zeta = ln w, times the Jacobian w; GL15 over [a,b]
    void add_partial(cplx* out, double a, double b) const {
        const double g = params_.gamma;
        const double mid = 0.5 * (a + b), hal = 0.5 * (b - a);
        for (int i = 0; i < 15; ++i) {
            const double zeta = mid + hal * gl15::node[i];
            // Phi evaluated on the small-s side via the simplex symmetry
            const double ss = std::exp(-std::fabs(zeta)) / (1.0 + std::exp(-std::fabs(zeta)));
            const double kernel = phi_.phi(std::max(ss, 1e-300)) *
                                  std::exp(g * log1p_exp(zeta) - 0.5 * (g + 1.0) * zeta);
            const double base = gl15::weight[i] * hal * kernel;
            const double th = k_star_ * zeta;
            const cplx ph{std::cos(th), std::sin(th)};
            cplx pw{1.0, 0.0};
            out[0] += base;
            for (int n = 1; n <= N_; ++n) {
                pw *= ph;
                out[(size_t)n] += base * pw;
            }
        }
    }

    // Q_n(e^{zeta}) for all n >= 0 (cumulative from the top + partial panel)
    void q_all(double zeta, cplx* out) const {
        if (zeta >= zeta_hi_) {
            for (int n = 0; n <= N_; ++n) out[(size_t)n] = cplx{0.0, 0.0};
            return;
        }
        const double zz = std::max(zeta, zeta_lo_);
        long j = (long)std::floor((zz - zeta_lo_) / width_);
        j = std::max(0L, std::min(j, npanels_ - 1));
        const double b = zeta_lo_ + width_ * (double)(j + 1);
        for (int n = 0; n <= N_; ++n)
            out[(size_t)n] = top_[(size_t)(j + 1) * (size_t)(N_ + 1) + (size_t)n];
        if (b > zz) add_partial(out, zz, b);
    }

    // y-integrand: dy * y^{(gamma+1)/2} f(y) sum_n b_n y^{i n k*} Q_n((x-y)/y)
    // = dy * y^{-1} H(ln y) sum_n ..., carried entirely in ln y so the
    // y -> x endpoint (where x - y underflows relative to x) stays exact;
    // coord is eta = ln(y/x) for piece 1, theta = ln(1 - y/x) for piece 2
    double y_integrand(const PeriodicField& H, double x, double coord, bool near_x) const {
        const double lnx = std::log(x);
        double lny, zeta, jac_over_y;
        if (near_x) {
            lny = lnx + std::log1p(-std::exp(coord));   // y = x(1 - e^theta)
            zeta = coord - std::log1p(-std::exp(coord));  // ln((x-y)/y)
            jac_over_y = x * std::exp(coord - lny);       // dy = x e^theta dtheta
        } else {
            lny = lnx + coord;  // y = x e^eta
            zeta = std::log1p(-std::exp(coord)) - coord;
            jac_over_y = 1.0;  // dy = y d eta
        }
        cplx q[kMaxModes + 1];
        q_all(zeta, q);
        // sum_n b_n y^{i n k*} Q_n, Hermitian
        double msum = (H.a(0) * q[0]).real();
        if (H.N() > 0) {
            const cplx rot{std::cos(k_star_ * lny), std::sin(k_star_ * lny)};
            cplx pw{1.0, 0.0};
            for (int n = 1; n <= H.N(); ++n) {
                pw *= rot;
                msum += 2.0 * (H.a(n) * pw * q[(size_t)n]).real();
            }
        }
        return jac_over_y * H.eval(lny) * msum;
    }

    double y_panel(const PeriodicField& H, double x, double a, double b, bool near_x) const {
        const double mid = 0.5 * (a + b), hal = 0.5 * (b - a);
        double acc = 0.0;
        for (int i = 0; i < 15; ++i)
            acc += gl15::weight[i] * y_integrand(H, x, mid + hal * gl15::node[i], near_x);
        return hal * acc;
    }

    ShapeFunction phi_;
    HomogeneityParams params_;
    double k_star_;
    int N_;
    double zeta_lo_, zeta_hi_, width_;
    long npanels_ = 0;
    std::vector<cplx> top_;
};

/// One-off flux evaluation for f(y) = H(ln y) y^{-(gamma+3)/2}.
inline double flux_J(const PeriodicField& H, const ShapeFunction& phi,
                     const HomogeneityParams& params, double x) {
    FluxJ engine(phi, params, H.N() > 0 ? H.k_star() : 1.0, H.N());
    return engine.eval(H, x);
}

/// Mutually consistent constants of the constant-flux family.
struct FluxConstants {
    double b = 0.0;    // b_{Phi,gamma} = B(1,1;W)^{-1/2}
    double c_w = 0.0;  // C_W
    double j0 = 0.0;   // target flux
};

inline FluxConstants flux_constants(const LogKernel& w, double j0) {
    FluxConstants out;
    out.b = compute_b(w);
    out.c_w = compute_cw(w);
    out.j0 = j0;
    return out;
}

/// Constant-flux verification report (both coordinate systems).
struct VerifyReport {
    double J0 = 0.0;
    double max_rel_dev_X = 0.0;  // sup over X of |B(H,H;W)(X) - J0| / J0
    double max_rel_dev_x = 0.0;  // sup over x of |J(x;f) - J0| / J0
    std::vector<double> X_grid, B_values;
    std::vector<double> x_grid, J_values;
    double tol = 0.0;
    bool pass = false;
};

/// Evaluates B(H,H;W)(X) on X_grid and J(x;f) on x_grid against J0.
inline VerifyReport verify_constant_flux(const Solution& sol,
                                         const std::vector<double>& X_grid,
                                         const std::vector<double>& x_grid, double tol) {
    VerifyReport rep;
    rep.J0 = sol.J0;
    rep.tol = tol;
    rep.X_grid = X_grid;
    rep.x_grid = x_grid;
    BilinearDirect bd(sol.kernel, sol.k_star, sol.H.N());
    for (double X : X_grid) {
        const double v = bd.eval(sol.H, sol.H, X);
        rep.B_values.push_back(v);
        rep.max_rel_dev_X = std::max(rep.max_rel_dev_X, std::fabs(v - sol.J0) / sol.J0);
    }
    const ShapeFunction phi = phi_from_w(sol.kernel, sol.params);
    FluxJ fj(phi, sol.params, sol.k_star, sol.H.N());
    for (double x : x_grid) {
        const double v = fj.eval(sol.H, x);
        rep.J_values.push_back(v);
        rep.max_rel_dev_x = std::max(rep.max_rel_dev_x, std::fabs(v - sol.J0) / sol.J0);
    }
    rep.pass = rep.max_rel_dev_X <= tol && rep.max_rel_dev_x <= tol;
    return rep;
}

}  // namespace coagflux
