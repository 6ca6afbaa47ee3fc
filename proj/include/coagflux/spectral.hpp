#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "coagflux/kernel.hpp"
#include "coagflux/quadrature.hpp"
#include "coagflux/symbol.hpp"

namespace coagflux {

struct spectral_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Real periodic function on [0, T], T = 2 pi / k_star, stored as
/// Hermitian-symmetric Fourier coefficients a_n, |n| <= N.
class PeriodicField {
  public:
    PeriodicField() = default;
    PeriodicField(int N, double k_star)
        : N_(N), k_star_(k_star), a_(2 * N + 1, cplx{0.0, 0.0}) {
        if (N < 0 || !(k_star > 0.0))
            throw std::invalid_argument("PeriodicField needs N >= 0 and k_star > 0");
    }

    int N() const { return N_; }
    double k_star() const { return k_star_; }
    double period() const { return 2.0 * M_PI / k_star_; }

    const cplx& a(int n) const { return a_.at((size_t)(n + N_)); }
    cplx& a(int n) { return a_.at((size_t)(n + N_)); }

    /// sets a_n and a_{-n} = conj(a_n)
    void set_mode(int n, cplx v) {
        a(n) = v;
        if (n != 0) a(-n) = std::conj(v);
    }

    double eval(double X) const {
        // Hermitian sum: a_0 + 2 Re sum_{n>=1} a_n e^{i n k X}
        const cplx rot{std::cos(k_star_ * X), std::sin(k_star_ * X)};
        cplx pw{1.0, 0.0};
        double out = a(0).real();
        for (int n = 1; n <= N_; ++n) {
            pw *= rot;
            out += 2.0 * (a(n) * pw).real();
        }
        return out;
    }

    /// naive two-sided summation; second evaluation path for tests
    cplx eval_sum(double X) const {
        cplx out{0.0, 0.0};
        for (int n = -N_; n <= N_; ++n) {
            const double th = (double)n * k_star_ * X;
            out += a(n) * cplx{std::cos(th), std::sin(th)};
        }
        return out;
    }

    double max_hermitian_defect() const {
        double d = 0.0;
        for (int n = 1; n <= N_; ++n) d = std::max(d, std::abs(a(-n) - std::conj(a(n))));
        return d;
    }

    /// Sobolev sequence norm (sum (1+|n|^{2s}) |a_n|^2)^{1/2}, s > 0;
    /// the n = 0 term carries weight 1.
    double norm(double s) const {
        if (!(s > 0.0)) throw std::invalid_argument("norm requires s > 0");
        double acc = std::norm(a(0));
        for (int n = 1; n <= N_; ++n) {
            const double w = 1.0 + std::pow((double)n, 2.0 * s);
            acc += w * (std::norm(a(n)) + std::norm(a(-n)));
        }
        return std::sqrt(acc);
    }

    /// H1 norm by its integral formula: (int_0^T |f|^2 + |f'|^2)^{1/2}
    /// = (T sum (1 + (n k)^2) |a_n|^2)^{1/2}.
    double norm_h1_integral() const {
        double acc = std::norm(a(0));
        for (int n = 1; n <= N_; ++n) {
            const double w = 1.0 + std::pow((double)n * k_star_, 2.0);
            acc += w * (std::norm(a(n)) + std::norm(a(-n)));
        }
        return std::sqrt(period() * acc);
    }

    PeriodicField truncated(int M) const {
        PeriodicField out(M, k_star_);
        for (int n = -std::min(M, N_); n <= std::min(M, N_); ++n) out.a(n) = a(n);
        return out;
    }

  private:
    int N_ = 0;
    double k_star_ = 1.0;
    std::vector<cplx> a_;
};

inline PeriodicField constant_field(double value, int N, double k_star) {
    PeriodicField f(N, k_star);
    f.a(0) = value;
    return f;
}

/// 1 * cos(k_star X) as a field: a_{+-1} = 1/2.
inline PeriodicField cosine_field(int N, double k_star) {
    PeriodicField f(N, k_star);
    f.set_mode(1, cplx{0.5, 0.0});
    return f;
}

enum class Projection { P0, P1, P2 };

/// P0 keeps n = 0, P1 keeps n = +-1, P2 keeps |n| >= 2; P0+P1+P2 = I.
inline PeriodicField project(const PeriodicField& f, Projection which) {
    PeriodicField out(f.N(), f.k_star());
    for (int n = -f.N(); n <= f.N(); ++n) {
        const int an = std::abs(n);
        const bool keep = (which == Projection::P0 && an == 0) ||
                          (which == Projection::P1 && an == 1) ||
                          (which == Projection::P2 && an >= 2);
        if (keep) out.a(n) = f.a(n);
    }
    return out;
}

inline PeriodicField add(const PeriodicField& f, const PeriodicField& g) {
    if (f.N() != g.N() || f.k_star() != g.k_star())
        throw spectral_error("field shape mismatch in add");
    PeriodicField out = f;
    for (int n = -f.N(); n <= f.N(); ++n) out.a(n) += g.a(n);
    return out;
}

inline PeriodicField scale(const PeriodicField& f, double c) {
    PeriodicField out = f;
    for (int n = -f.N(); n <= f.N(); ++n) out.a(n) *= c;
    return out;
}

/// Interaction coefficients Jhat(n, l), |n| <= N, |l| <= 2N, for a kernel W
/// and base wavenumber k_star.  The classical double-index coefficient is
/// J_{m,n} = Jhat(n, m+n).
struct SymbolTable {
    double k_star = 0.0;
    int N = 0;
    std::string kernel_id;
    std::vector<cplx> j;  // index (l + 2N) * (2N+1) + (n + N)

    const cplx& jhat(int n, int l) const {
        if (std::abs(n) > N || std::abs(l) > 2 * N)
            throw spectral_error("Jhat index out of range");
        return j[(size_t)(l + 2 * N) * (size_t)(2 * N + 1) + (size_t)(n + N)];
    }
    cplx& jhat_mut(int n, int l) {
        return j[(size_t)(l + 2 * N) * (size_t)(2 * N + 1) + (size_t)(n + N)];
    }
    double max_abs() const {
        double m = 0.0;
        for (auto& v : j) m = std::max(m, std::abs(v));
        return m;
    }
};

/// table(c0*W0 + c1*W1 + ...) = c0*table(W0) + c1*table(W1) + ... (Jhat is
/// linear in W).
inline SymbolTable combine_tables(const std::vector<std::pair<double, const SymbolTable*>>& terms) {
    if (terms.empty()) throw spectral_error("combine_tables: empty input");
    SymbolTable out = *terms[0].second;
    out.kernel_id = "combo";
    for (auto& v : out.j) v *= terms[0].first;
    for (size_t t = 1; t < terms.size(); ++t) {
        const SymbolTable& s = *terms[t].second;
        if (s.N != out.N || s.k_star != out.k_star)
            throw spectral_error("combine_tables: shape mismatch");
        for (size_t i = 0; i < out.j.size(); ++i) out.j[i] += terms[t].first * s.j[i];
    }
    return out;
}

struct TableBuildOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int threads = 0;  // 0 = hardware_concurrency
};

namespace detail {

struct TableGrid {
    double z_lo, z_hi, width;
    long panels;
};

inline TableGrid table_grid(const LogKernel& w, double k_star, int N,
                            double abs_tol) {
    const double lam = 0.5 - w.q;
    const double osc = 3.0 * (double)N * k_star;  // |n| k* + |l| k* <= 3 N k*
    // decay e^{(q-1/2)|xi|} on both sides once the bumps are out of range;
    // +10 covers the logarithmic factor of the l=0 entries
    double Z = envelope_cutoff(0.0, lam, 2.0 * w.tail_envelope() *
                                              std::max(1.0, 2.0 * N * k_star),
                               abs_tol) + 10.0;
    if (std::isfinite(w.support)) Z = std::max(Z, w.support + 2.0);
    TableGrid g;
    g.z_hi = Z;
    g.z_lo = -Z;
    g.width = std::min(M_PI / (2.0 * std::max(osc, 1.0)), 0.004);
    g.panels = (long)std::ceil((g.z_hi - g.z_lo) / g.width);
    return g;
}

}  // namespace detail

/// Builds the full table by one shared panelization resolving the highest
/// mode frequency 3 N k_star.  Every panel contributes to every (n, l)
/// through phase recurrences; the bracket factor is evaluated by
/// stable_bracket per (node, l).  Panel blocks are fixed, threads own whole
/// blocks, and the final block reduction is ordered, so the result is
/// bit-identical for any thread count.
inline SymbolTable build_symbol_table(const LogKernel& w, double k_star, int N,
                                      const TableBuildOptions& opt = {}) {
    if (!(w.q < 0.5)) throw spectral_error("build_symbol_table requires q < 1/2");
    if (!(k_star > 0.0) || N < 1) throw spectral_error("bad k_star or N");
    const auto grid = detail::table_grid(w, k_star, N, opt.abs_tol);
    const int nn = 2 * N + 1, nl = 2 * N + 1;  // n in [-N,N], l in [0,2N]
    const size_t acc_size = (size_t)nn * (size_t)(2 * N + 1);

    const long block_size = 256;
    const long nblocks = (grid.panels + block_size - 1) / block_size;
    std::vector<std::vector<cplx>> block_acc((size_t)nblocks);

    auto run_block = [&](long bi) {
        std::vector<cplx> acc(acc_size, cplx{0.0, 0.0});
        std::vector<cplx> rpow((size_t)nn);
        const long p_lo = bi * block_size;
        const long p_hi = std::min(grid.panels, p_lo + block_size);
        for (long p = p_lo; p < p_hi; ++p) {
            const double a = grid.z_lo + grid.width * (double)p;
            const double b = (p + 1 == grid.panels) ? grid.z_hi : a + grid.width;
            const double mid = 0.5 * (a + b), hal = 0.5 * (b - a);
            for (int gi = 0; gi < 15; ++gi) {
                const double xi = mid + hal * gl15::node[gi];
                const double wv = w.w(xi);
                if (!std::isfinite(wv))
                    throw quadrature_error("non-finite kernel sample in table build");
                if (wv == 0.0) continue;
                const double base = gl15::weight[gi] * hal * std::exp(-0.5 * xi) * wv;
                const double L = log1p_exp(xi);
                // rpow[n] = e^{i n k xi}
                const cplx r{std::cos(k_star * xi), std::sin(k_star * xi)};
                rpow[(size_t)N] = cplx{1.0, 0.0};
                for (int n = 1; n <= N; ++n) {
                    rpow[(size_t)(N + n)] = rpow[(size_t)(N + n - 1)] * r;
                    rpow[(size_t)(N - n)] = std::conj(rpow[(size_t)(N + n)]);
                }
                for (int l = 0; l <= 2 * N; ++l) {
                    const cplx fac =
                        base * (l == 0 ? cplx{L, 0.0} : stable_bracket(L, (double)l * k_star));
                    cplx* row = acc.data() + (size_t)l * (size_t)nn;
                    for (int idx = 0; idx < nn; ++idx) row[idx] += fac * rpow[(size_t)idx];
                }
            }
        }
        block_acc[(size_t)bi] = std::move(acc);
    };

    int nthreads = opt.threads > 0 ? opt.threads
                                   : (int)std::max(1u, std::thread::hardware_concurrency());
    nthreads = (int)std::min<long>(nthreads, nblocks);
    if (nthreads <= 1) {
        for (long bi = 0; bi < nblocks; ++bi) run_block(bi);
    } else {
        std::vector<std::thread> pool;
        std::atomic_long next{0};
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back([&] {
                for (long bi = next.fetch_add(1); bi < nblocks; bi = next.fetch_add(1))
                    run_block(bi);
            });
        for (auto& th : pool) th.join();
    }

    // ordered reduction over blocks
    std::vector<cplx> acc(acc_size, cplx{0.0, 0.0});
    for (long bi = 0; bi < nblocks; ++bi)
        for (size_t i = 0; i < acc_size; ++i) acc[i] += block_acc[(size_t)bi][i];

    SymbolTable tab;
    tab.k_star = k_star;
    tab.N = N;
    tab.kernel_id = w.id;
    tab.j.assign((size_t)(4 * N + 1) * (size_t)nn, cplx{0.0, 0.0});
    for (int l = 0; l <= 2 * N; ++l)
        for (int n = -N; n <= N; ++n) {
            cplx v = acc[(size_t)l * (size_t)nn + (size_t)(n + N)];
            if (l != 0) v /= cplx{0.0, (double)l * k_star};
            tab.jhat_mut(n, l) = v;
            tab.jhat_mut(-n, -l) = std::conj(v);  // real kernel symmetry
        }
    return tab;
}

/// Single-entry reference path through the adaptive 1D engine; the batched
/// builder is validated against this in the tests.
inline cplx reference_table_entry(const LogKernel& w, double k_star, int N, int n, int l,
                                  double abs_tol = 1e-12, double rel_tol = 1e-10) {
    (void)N;
    QuadratureSpec spec;
    spec.abs_tol = abs_tol;
    spec.rel_tol = rel_tol;
    spec.tail_exponent = w.q - 0.5;
    spec.oscillation_freq = (std::fabs((double)n) + std::fabs((double)l)) * k_star;
    auto fn = [&](double xi) -> cplx {
        const double wv = w.w(xi);
        if (wv == 0.0) return {0.0, 0.0};
        const double L = log1p_exp(xi);
        const double th = (double)n * k_star * xi;
        const cplx ph{std::cos(th), std::sin(th)};
        const cplx fac = l == 0 ? cplx{L, 0.0} : stable_bracket(L, (double)l * k_star);
        return std::exp(-0.5 * xi) * wv * ph * fac;
    };
    const double env = w.envelope_const * std::max(2.0, std::fabs((double)l) * k_star);
    QuadResult right = integrate_semi_infinite(fn, 0.0, spec, env);
    auto fn_left = [&](double t) { return fn(-t); };
    QuadResult left = integrate_semi_infinite(fn_left, 0.0, spec, env);
    cplx v = right.value + left.value;
    if (l != 0) v /= cplx{0.0, (double)l * k_star};
    return v;
}

/// Fourier-side bilinear flux operator: c_l = sum_{m+n=l} Jhat(n,l) a_m b_n,
/// exact for band-limited inputs (output bandwidth 2N).
inline PeriodicField bilinear_fourier(const PeriodicField& u1, const PeriodicField& u2,
                                      const SymbolTable& tab) {
    if (u1.N() > tab.N || u2.N() > tab.N)
        throw spectral_error("bilinear_fourier: field bandwidth exceeds table");
    if (u1.k_star() != tab.k_star || u2.k_star() != tab.k_star)
        throw spectral_error("bilinear_fourier: wavenumber mismatch");
    const int N1 = u1.N(), N2 = u2.N();
    PeriodicField out(2 * tab.N, tab.k_star);
    for (int l = -(N1 + N2); l <= N1 + N2; ++l) {
        cplx c{0.0, 0.0};
        for (int n = std::max(-N2, l - N1); n <= std::min(N2, l + N1); ++n)
            c += tab.jhat(n, l) * u1.a(l - n) * u2.a(n);
        out.a(l) = c;
    }
    return out;
}

/// Diagonal symbol values Psi(n k_star; W) for |n| <= N.
struct SymbolDiagonal {
    double k_star = 0.0;
    int N = 0;
    std::vector<cplx> psi;  // index n + N

    const cplx& at(int n) const { return psi.at((size_t)(n + N)); }
    double scale() const {
        double m = 0.0;
        for (auto& v : psi) m = std::max(m, std::abs(v));
        return m;
    }
};

/// Quadrature route: Psi(n k*) by direct symbol evaluation.
inline SymbolDiagonal symbol_diagonal(const LogKernel& w, double k_star, int N,
                                      const PsiOptions& opt = {}) {
    SymbolDiagonal d;
    d.k_star = k_star;
    d.N = N;
    d.psi.resize((size_t)(2 * N + 1));
    for (int n = 0; n <= N; ++n) {
        const cplx v = eval_psi((double)n * k_star, w, opt);
        d.psi[(size_t)(N + n)] = v;
        d.psi[(size_t)(N - n)] = std::conj(v);
    }
    return d;
}

/// Table route: Psi(n k*) = Jhat(n,n) + Jhat(0,n) for |n| <= N.
inline SymbolDiagonal symbol_diagonal_from_table(const SymbolTable& tab) {
    SymbolDiagonal d;
    d.k_star = tab.k_star;
    d.N = tab.N;
    d.psi.resize((size_t)(2 * tab.N + 1));
    for (int n = -tab.N; n <= tab.N; ++n)
        d.psi[(size_t)(n + tab.N)] = tab.jhat(n, n) + tab.jhat(0, n);
    return d;
}

inline SymbolDiagonal combine_diagonals(
    const std::vector<std::pair<double, const SymbolDiagonal*>>& terms) {
    if (terms.empty()) throw spectral_error("combine_diagonals: empty input");
    SymbolDiagonal out = *terms[0].second;
    for (auto& v : out.psi) v *= terms[0].first;
    for (size_t t = 1; t < terms.size(); ++t) {
        const SymbolDiagonal& s = *terms[t].second;
        if (s.N != out.N || s.k_star != out.k_star)
            throw spectral_error("combine_diagonals: shape mismatch");
        for (size_t i = 0; i < out.psi.size(); ++i) out.psi[i] += terms[t].first * s.psi[i];
    }
    return out;
}

/// Linearized flux operator, diagonal in Fourier: (L f)_n = Psi(n k*) a_n.
inline PeriodicField linearized_L(const PeriodicField& f, const SymbolDiagonal& d) {
    if (f.N() > d.N) throw spectral_error("linearized_L: diagonal does not cover field");
    PeriodicField out = f;
    for (int n = -f.N(); n <= f.N(); ++n) out.a(n) *= d.at(n);
    return out;
}

inline PeriodicField linearized_L(const PeriodicField& f, const LogKernel& w,
                                  const PsiOptions& opt = {}) {
    return linearized_L(f, symbol_diagonal(w, f.k_star(), f.N(), opt));
}

inline PeriodicField linearized_L(const PeriodicField& f, const SymbolTable& tab) {
    return linearized_L(f, symbol_diagonal_from_table(tab));
}

struct AwInverseResult {
    PeriodicField field;
    double op_norm_surrogate = 0.0;  // max_n sqrt(1+n^2)/(sqrt(1+|n|^{2s'}) |Psi(nk*)|)
};

/// Inverse of the Z2-restricted linearization: divides mode n by Psi(n k*).
/// Requires a_0 = a_{+-1} = 0 and a symbol margin of 1e-3 of the Z2 diagonal
/// scale (|n| >= 2; the n = 0 value is orders of magnitude larger and does
/// not enter the inverse).  s' = 1/2 - q is the source regularity.
inline AwInverseResult apply_Aw_inverse(const PeriodicField& f, const SymbolDiagonal& d,
                                        double q, double margin_factor = 1e-3) {
    if (f.N() > d.N) throw spectral_error("apply_Aw_inverse: diagonal does not cover field");
    if (std::abs(f.a(0)) != 0.0 ||
        (f.N() >= 1 && (std::abs(f.a(1)) != 0.0 || std::abs(f.a(-1)) != 0.0)))
        throw spectral_error("apply_Aw_inverse: field must lie in Z2 (a_0 = a_{+-1} = 0)");
    double scale = 0.0;
    for (int n = 2; n <= d.N; ++n) scale = std::max(scale, std::abs(d.at(n)));
    const double sp = 0.5 - q;
    AwInverseResult out{PeriodicField(f.N(), f.k_star()), 0.0};
    for (int n = 2; n <= f.N(); ++n) {
        const cplx psi_n = d.at(n);
        if (std::abs(psi_n) < margin_factor * scale)
            throw spectral_error("apply_Aw_inverse: symbol margin too small at mode " +
                                 std::to_string(n) + " (invalid kernel)");
        out.field.a(n) = f.a(n) / psi_n;
        out.field.a(-n) = f.a(-n) / std::conj(psi_n);
        const double surro = std::sqrt(1.0 + (double)n * (double)n) /
                             (std::sqrt(1.0 + std::pow((double)n, 2.0 * sp)) * std::abs(psi_n));
        out.op_norm_surrogate = std::max(out.op_norm_surrogate, surro);
    }
    return out;
}

}  // namespace coagflux
