// Pipeline driver: construct the bifurcation kernel, solve the fixed-point
// system for the oscillatory constant-flux solution, verify the flux by
// direct quadrature in both coordinate systems, and export figure data.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "coagflux/fluxcheck.hpp"
#include "coagflux/io.hpp"
#include "coagflux/solver.hpp"
#include "coagflux/version.hpp"

using namespace coagflux;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConstruct = 2;
constexpr int kExitSolver = 3;
constexpr int kExitVerify = 4;

void emit_error(const std::string& msg, int code) {
    ordered_json j;
    j["error"] = msg;
    j["exit_code"] = code;
    std::cout << j.dump() << "\n";
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return cfg.out_dir + "/" + name;
}

PsiOptions psi_options(const RunConfig& cfg) {
    PsiOptions p;
    p.abs_tol = cfg.quad_abs_tol;
    p.rel_tol = cfg.quad_rel_tol;
    return p;
}

int cmd_construct(const RunConfig& cfg) {
    const std::string hash = config_hash(cfg);
    const auto params = validate_params(cfg.gamma, cfg.p);
    ConstructOptions copt;
    copt.k_lo = cfg.k_scan_lo;
    copt.k_hi = cfg.k_scan_hi;
    copt.K_max = cfg.K_max;
    copt.psi = psi_options(cfg);
    const BifurcationKernel bk =
        solve_bifurcation_kernel(cfg.z_a, cfg.z_b, cfg.epsilon, params, copt);
    PerturbationOptions popt;
    popt.psi = copt.psi;
    const PerturbationPair pp = build_perturbations(bk.point.k_star, cfg.epsilon, popt);
    write_json(out_path(cfg, "w0_manifest.json"), manifest_json(bk, pp, hash));

    // kernel tabulations
    std::vector<std::vector<double>> rows;
    const ShapeFunction phi = phi_from_w(bk.w0, params);
    for (int i = 0; i < 2048; ++i) {
        const double lo = 1e-9;
        const double t = (double)i / 2047.0;
        const double s = t < 0.5 ? lo * std::pow(0.5 / lo, 2.0 * t)
                                 : 1.0 - lo * std::pow(0.5 / lo, 2.0 * (1.0 - t));
        rows.push_back({s, phi.phi(std::min(s, 1.0 - 1e-9))});
    }
    write_csv(out_path(cfg, "phi.csv"), "s,phi", rows, hash);
    rows.clear();
    for (int i = 0; i < 1024; ++i) {
        const double Y = -30.0 + 60.0 * (double)i / 1023.0;
        rows.push_back({Y, bk.w0(Y)});
    }
    write_csv(out_path(cfg, "w0.csv"), "Y,W", rows, hash);
    rows.clear();
    for (int i = 0; i < 512; ++i) {
        const double k =
            cfg.k_scan_lo + (cfg.k_scan_hi - cfg.k_scan_lo) * (double)i / 511.0;
        const cplx v = eval_psi(k, bk.w0, copt.psi);
        rows.push_back({k, v.real(), v.imag()});
    }
    write_csv(out_path(cfg, "psi_scan.csv"), "k,Re_psi,Im_psi", rows, hash);
    std::cout << "constructed kernel: k_star = " << fmt17(bk.point.k_star)
              << ", residual = " << fmt17(bk.point.residual) << "\n";
    return 0;
}

int cmd_solve(const RunConfig& cfg) {
    const std::string hash = config_hash(cfg);
    const LoadedManifest m = load_manifest(out_path(cfg, "w0_manifest.json"));
    SolverBuildOptions sopt;
    sopt.N = cfg.N;
    sopt.M_weight = cfg.M;
    sopt.table.abs_tol = cfg.quad_abs_tol;
    sopt.table.rel_tol = cfg.quad_rel_tol;
    sopt.psi = psi_options(cfg);

    // tables through the cache sidecar
    SolverContext ctx;
    ctx.params = m.bk.recipe.params;
    ctx.k_star = m.bk.point.k_star;
    ctx.N = sopt.N;
    ctx.M_weight = sopt.M_weight;
    ctx.w0 = m.bk.w0;
    ctx.w11 = m.pp.w11;
    ctx.w12 = m.pp.w12;
    ctx.pert = m.pp;
    TableCache cache(cfg.out_dir + "/cache");
    ctx.tab0 = cache.get(m.bk.w0, ctx.k_star, ctx.N, sopt.table);
    ctx.tab11 = cache.get(m.pp.w11, ctx.k_star, ctx.N, sopt.table);
    ctx.tab12 = cache.get(m.pp.w12, ctx.k_star, ctx.N, sopt.table);
    ctx.diag0 = symbol_diagonal(m.bk.w0, ctx.k_star, 2 * ctx.N, sopt.psi);
    ctx.diag11 = symbol_diagonal(m.pp.w11, ctx.k_star, 2 * ctx.N, sopt.psi);
    ctx.diag12 = symbol_diagonal(m.pp.w12, ctx.k_star, 2 * ctx.N, sopt.psi);

    FixedPointOptions fopt;
    fopt.tol = cfg.fp_tol;
    fopt.max_iter = cfg.max_iter;
    const SolverState st = fixed_point_solve(cfg.s, ctx, fopt);
    const Solution sol = assemble_solution(st, ctx, m.bk.recipe, cfg.J0);
    write_json(out_path(cfg, "solution.json"), solution_json(sol, cfg.N, cfg, hash));

    std::vector<std::vector<double>> rows;
    const double T = sol.H.period();
    for (int i = 0; i < 512; ++i) {
        const double X = T * (double)i / 512.0;
        rows.push_back({X, sol.H.eval(X)});
    }
    write_csv(out_path(cfg, "H.csv"), "X,H", rows, hash);
    rows.clear();
    const SymbolTable tab_full = combine_tables(
        {{1.0, &ctx.tab0}, {st.alpha1, &ctx.tab11}, {st.alpha2, &ctx.tab12}});
    const double C0 = std::sqrt(sol.J0 / tab_full.jhat(0, 0).real());
    const double Q = std::exp(2.0 * M_PI / sol.k_star);
    const double ex = 0.5 * (sol.params.gamma + 3.0);
    for (int i = 0; i < 1024; ++i) {
        const double x = std::pow(Q, 3.0 * (double)i / 1023.0);
        rows.push_back({x, back_transform(sol, x), C0 * std::pow(x, -ex)});
    }
    write_csv(out_path(cfg, "f_vs_powerlaw.csv"), "x,f,powerlaw", rows, hash);
    std::cout << "solved: alpha = (" << fmt17(st.alpha1) << ", " << fmt17(st.alpha2)
              << "), K0 = " << fmt17(sol.K0) << ", iters = " << st.iter << "\n";
    return 0;
}

int cmd_verify(const RunConfig& cfg) {
    const std::string hash = config_hash(cfg);
    const LoadedManifest m = load_manifest(out_path(cfg, "w0_manifest.json"));
    const Solution sol = load_solution(out_path(cfg, "solution.json"), m);
    const double T = sol.H.period();
    std::vector<double> Xg, xg;
    for (int i = 0; i < 32; ++i) Xg.push_back(T * (double)i / 32.0);
    const double Q = std::exp(T);
    xg = {1.0, std::pow(Q, 1.0 / 3.0), std::sqrt(Q), std::pow(Q, 2.0 / 3.0), Q, 10.0 * Q};
    const double tol = 1e-4;
    const VerifyReport rep = verify_constant_flux(sol, Xg, xg, tol);
    write_json(out_path(cfg, "verify.json"), verify_json(rep, hash));
    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < Xg.size(); ++i) rows.push_back({Xg[i], rep.B_values[i]});
    write_csv(out_path(cfg, "flux_X.csv"), "X,B_HH", rows, hash);
    rows.clear();
    for (size_t i = 0; i < xg.size(); ++i) rows.push_back({xg[i], rep.J_values[i]});
    write_csv(out_path(cfg, "flux_x.csv"), "x,J", rows, hash);
    std::cout << "verify: max_rel_dev_X = " << fmt17(rep.max_rel_dev_X)
              << ", max_rel_dev_x = " << fmt17(rep.max_rel_dev_x) << ", pass = "
              << (rep.pass ? "true" : "false") << "\n";
    return rep.pass ? 0 : kExitVerify;
}

int cmd_figdata(const RunConfig& cfg, double k_lo, double k_hi, int grid) {
    const std::string hash = config_hash(cfg);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < grid; ++i) {
        const double k = k_lo + (k_hi - k_lo) * (double)i / (double)(grid - 1);
        const cplx prod = std::conj(eval_G(cfg.z_b, k)) * eval_G(cfg.z_a, k);
        rows.push_back({k, prod.real(), prod.imag()});
    }
    write_csv(out_path(cfg, "G_align.csv"), "k,Re_align,Im_align", rows, hash);
    rows.clear();
    for (int i = 0; i < grid; ++i) {
        const double k = k_lo + (k_hi - k_lo) * (double)i / (double)(grid - 1);
        rows.push_back({k, std::arg(eval_G(cfg.z_a, k)), std::arg(eval_G(cfg.z_b, k))});
    }
    write_csv(out_path(cfg, "G_vectors.csv"), "k,theta_a,theta_b", rows, hash);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oscillatory constant-flux solutions of the coagulation equation"};
    app.set_version_flag("--version", kVersion);
    RunConfig cfg;
    app.set_config("--config");
    app.fallthrough();
    app.add_option("--gamma", cfg.gamma, "kernel homogeneity degree");
    app.add_option("--p", cfg.p, "kernel endpoint exponent");
    app.add_option("--z_a", cfg.z_a, "outer bump center");
    app.add_option("--z_b", cfg.z_b, "inner bump center");
    app.add_option("--epsilon", cfg.epsilon, "mollifier width");
    app.add_option("--s", cfg.s, "bifurcation amplitude");
    app.add_option("--J0", cfg.J0, "target flux");
    app.add_option("--N", cfg.N, "Fourier truncation");
    app.add_option("--quad_abs_tol", cfg.quad_abs_tol, "quadrature absolute tolerance");
    app.add_option("--quad_rel_tol", cfg.quad_rel_tol, "quadrature relative tolerance");
    app.add_option("--k_scan_lo", cfg.k_scan_lo, "scan window lower end");
    app.add_option("--k_scan_hi", cfg.k_scan_hi, "scan window upper end");
    app.add_option("--K_max", cfg.K_max, "zero-certification upper end");
    app.add_option("--M", cfg.M, "fixed-point metric weight");
    app.add_option("--fp_tol", cfg.fp_tol, "fixed-point convergence tolerance");
    app.add_option("--max_iter", cfg.max_iter, "fixed-point iteration cap");
    app.add_option("--seed", cfg.seed, "seed for randomized test fields");
    app.add_option("--out_dir", cfg.out_dir, "output directory");

    auto* c_construct = app.add_subcommand("construct", "build the bifurcation kernel");
    auto* c_solve = app.add_subcommand("solve", "run the fixed-point solver");
    auto* c_verify = app.add_subcommand("verify", "check constant flux by quadrature");
    auto* c_figdata = app.add_subcommand("figdata", "emit alignment figure data");
    auto* c_all = app.add_subcommand("all", "construct, solve, verify, figdata");
    double fig_k_lo = 19.31, fig_k_hi = 19.53;
    int fig_grid = 512;
    for (auto* c : {c_figdata, c_all}) {
        c->add_option("--fig_k_lo", fig_k_lo, "figure k range lower end");
        c->add_option("--fig_k_hi", fig_k_hi, "figure k range upper end");
        c->add_option("--fig_grid", fig_grid, "figure grid size");
    }
    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        cfg.validate();
    } catch (const std::exception& e) {
        emit_error(e.what(), kExitConstruct);
        return kExitConstruct;
    }

    try {
        if (c_construct->parsed()) return cmd_construct(cfg);
        if (c_solve->parsed()) return cmd_solve(cfg);
        if (c_verify->parsed()) return cmd_verify(cfg);
        if (c_figdata->parsed()) return cmd_figdata(cfg, fig_k_lo, fig_k_hi, fig_grid);
        if (c_all->parsed()) {
            int rc = cmd_construct(cfg);
            if (rc == 0) rc = cmd_solve(cfg);
            if (rc == 0) rc = cmd_verify(cfg);
            if (rc == 0) rc = cmd_figdata(cfg, fig_k_lo, fig_k_hi, fig_grid);
            return rc;
        }
    } catch (const solver_error& e) {
        emit_error(e.what(), kExitSolver);
        return kExitSolver;
    } catch (const std::exception& e) {
        const bool in_verify = c_verify->parsed();
        const int code = in_verify ? kExitVerify : kExitConstruct;
        emit_error(e.what(), code);
        return code;
    }
    return kExitUsage;
}
