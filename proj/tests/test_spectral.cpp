#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "coagflux/spectral.hpp"
#include "coagflux/w0builder.hpp"
#include "support.hpp"

using namespace coagflux;
using coagflux::testing::random_field;
using coagflux::testing::random_z2_field;

namespace {
const double KS = 19.514600;  // typical bifurcation wavenumber

const SymbolTable& table_const_kernel() {
    static const SymbolTable t = build_symbol_table(constant_log_kernel(), KS, 6);
    return t;
}
}  // namespace

TEST_CASE("PeriodicField basics") {
    SECTION("norm of the constant field is 1 for s > 0") {
        auto f = constant_field(1.0, 4, KS);
        CHECK(f.norm(1.0) == Catch::Approx(1.0));
        CHECK(f.norm(0.5) == Catch::Approx(1.0));
        CHECK_THROWS_AS(f.norm(0.0), std::invalid_argument);
    }
    SECTION("norm of cos(k*X) is 1 at s = 1") {
        auto f = cosine_field(4, KS);
        CHECK(f.norm(1.0) == Catch::Approx(1.0));
        // integral H1 norm for comparison: sqrt(T (1 + k*^2) / 2)
        const double expect = std::sqrt(f.period() * (1.0 + KS * KS) * 0.5);
        CHECK(f.norm_h1_integral() == Catch::Approx(expect));
    }
    SECTION("norm is monotone in s when a_0 = 0") {
        std::mt19937_64 rng(23);
        auto f = random_z2_field(8, KS, rng);
        double prev = f.norm(0.25);
        for (double s : {0.5, 1.0, 1.5, 2.0}) {
            const double cur = f.norm(s);
            CHECK(cur >= prev * (1.0 - 1e-14));
            prev = cur;
        }
    }
    SECTION("point evaluation real and consistent across summation orders") {
        std::mt19937_64 rng(29);
        auto f = random_field(8, KS, rng);
        std::uniform_real_distribution<double> ux(0.0, f.period());
        for (int i = 0; i < 16; ++i) {
            const double X = ux(rng);
            const cplx naive = f.eval_sum(X);
            CHECK(std::fabs(naive.imag()) < 1e-12);
            CHECK(f.eval(X) == Catch::Approx(naive.real()).margin(1e-10));
        }
        CHECK(f.max_hermitian_defect() == 0.0);
    }
}

TEST_CASE("projections") {
    std::mt19937_64 rng(31);
    SECTION("P1 of cos(2 k* X) vanishes") {
        PeriodicField f(4, KS);
        f.set_mode(2, cplx{0.5, 0.0});
        auto p1 = project(f, Projection::P1);
        for (int n = -4; n <= 4; ++n) CHECK(std::abs(p1.a(n)) == 0.0);
    }
    SECTION("P0 of 1 + 0.3 cos(k*X) is 1") {
        PeriodicField f(4, KS);
        f.a(0) = 1.0;
        f.set_mode(1, cplx{0.15, 0.0});
        auto p0 = project(f, Projection::P0);
        CHECK(p0.a(0).real() == 1.0);
        CHECK(std::abs(p0.a(1)) == 0.0);
    }
    SECTION("idempotent, mutually annihilating, summing to identity") {
        auto f = random_field(8, KS, rng);
        auto p0 = project(f, Projection::P0);
        auto p1 = project(f, Projection::P1);
        auto p2 = project(f, Projection::P2);
        for (int n = -8; n <= 8; ++n) {
            CHECK(std::abs(project(p1, Projection::P1).a(n) - p1.a(n)) == 0.0);
            CHECK(std::abs(project(p1, Projection::P2).a(n)) == 0.0);
            CHECK(std::abs(project(p2, Projection::P0).a(n)) == 0.0);
            CHECK(std::abs(p0.a(n) + p1.a(n) + p2.a(n) - f.a(n)) == 0.0);
        }
    }
}

TEST_CASE("symbol table for W = 1") {
    const auto& tab = table_const_kernel();
    SECTION("Jhat(0,0) = 2 pi") {
        CHECK(tab.jhat(0, 0).real() == Catch::Approx(2.0 * M_PI).epsilon(1e-9));
        CHECK(std::fabs(tab.jhat(0, 0).imag()) < 1e-10);
    }
    SECTION("conjugate symmetry on all entries") {
        for (int l = -12; l <= 12; ++l)
            for (int n = -6; n <= 6; ++n)
                CHECK(std::abs(tab.jhat(-n, -l) - std::conj(tab.jhat(n, l))) < 1e-14);
    }
    SECTION("identity Psi(n k*) = Jhat(n,n) + Jhat(0,n) for n = 2..5") {
        for (int n = 2; n <= 5; ++n) {
            const cplx via_table = tab.jhat(n, n) + tab.jhat(0, n);
            const cplx direct = eval_psi((double)n * KS, constant_log_kernel());
            CHECK(std::abs(via_table - direct) <= 1e-8 * std::abs(direct));
        }
    }
    SECTION("batched build matches the adaptive reference entries") {
        for (auto [n, l] : {std::pair{0, 0}, {1, 0}, {3, 2}, {-4, 7}, {6, 12}, {2, -5}}) {
            const cplx ref = reference_table_entry(constant_log_kernel(), KS, 6, n, l);
            CHECK(std::abs(tab.jhat(n, l) - ref) < 1e-10 * (1.0 + std::abs(ref)));
        }
    }
    SECTION("uniform bound stable under tolerance halving") {
        TableBuildOptions opt;
        opt.abs_tol = 0.5e-12;
        opt.rel_tol = 0.5e-10;
        const auto tab2 = build_symbol_table(constant_log_kernel(), KS, 6, opt);
        CHECK(std::fabs(tab.max_abs() - tab2.max_abs()) < 1e-9);
    }
    SECTION("bit-identical across thread counts") {
        TableBuildOptions one;
        one.threads = 1;
        TableBuildOptions two;
        two.threads = 2;
        const auto t1 = build_symbol_table(constant_log_kernel(), KS, 4, one);
        const auto t2 = build_symbol_table(constant_log_kernel(), KS, 4, two);
        REQUIRE(t1.j.size() == t2.j.size());
        for (size_t i = 0; i < t1.j.size(); ++i) CHECK(t1.j[i] == t2.j[i]);
    }
}

TEST_CASE("symbol table for a bump kernel matches reference entries") {
    auto bump = bump_kernel(1.3, 0.05);
    auto tab = build_symbol_table(bump, KS, 5);
    for (auto [n, l] : {std::pair{0, 0}, {2, 3}, {-5, 9}, {4, -1}}) {
        const cplx ref = reference_table_entry(bump, KS, 5, n, l);
        CHECK(std::abs(tab.jhat(n, l) - ref) < 1e-10 * (1.0 + std::abs(ref)));
    }
}

TEST_CASE("bilinear_fourier") {
    const auto& tab = table_const_kernel();
    SECTION("constant inputs give the constant Jhat(0,0)") {
        auto one = constant_field(1.0, 6, KS);
        auto b = bilinear_fourier(one, one, tab);
        CHECK(b.a(0).real() == Catch::Approx(2.0 * M_PI).epsilon(1e-9));
        for (int l = 1; l <= 12; ++l) CHECK(std::abs(b.a(l)) == 0.0);
    }
    SECTION("real inputs give Hermitian output") {
        std::mt19937_64 rng(41);
        for (int t = 0; t < 8; ++t) {
            auto u1 = random_field(6, KS, rng);
            auto u2 = random_field(6, KS, rng);
            auto b = bilinear_fourier(u1, u2, tab);
            CHECK(b.max_hermitian_defect() <= 1e-12 * (1.0 + std::abs(b.a(0))));
        }
    }
    SECTION("bandwidth and wavenumber guards") {
        auto big = constant_field(1.0, 9, KS);
        CHECK_THROWS_AS(bilinear_fourier(big, big, tab), spectral_error);
        auto off = constant_field(1.0, 6, KS * 1.1);
        CHECK_THROWS_AS(bilinear_fourier(off, off, tab), spectral_error);
    }
}

TEST_CASE("linearized operator") {
    const auto& tab = table_const_kernel();
    const auto one_kernel = constant_log_kernel();
    std::mt19937_64 rng(43);
    auto f = random_field(6, KS, rng);
    SECTION("table route equals quadrature route") {
        auto via_tab = linearized_L(f, tab);
        auto via_quad = linearized_L(f, one_kernel);
        for (int n = -6; n <= 6; ++n)
            CHECK(std::abs(via_tab.a(n) - via_quad.a(n)) <=
                  1e-8 * (1.0 + std::abs(via_quad.a(n))));
    }
    SECTION("L(1;W) = Psi(0;W) as a constant field") {
        auto one = constant_field(1.0, 6, KS);
        auto Lf = linearized_L(one, tab);
        CHECK(Lf.a(0).real() == Catch::Approx(4.0 * M_PI).epsilon(1e-8));
    }
    SECTION("diagonal action equals B(1,f) + B(f,1)") {
        auto one = constant_field(1.0, 6, KS);
        auto sum = add(bilinear_fourier(one, f, tab), bilinear_fourier(f, one, tab));
        auto diag = linearized_L(f, tab);
        for (int n = -6; n <= 6; ++n)
            CHECK(std::abs(sum.a(n) - diag.a(n)) <= 1e-10 * (1.0 + std::abs(diag.a(n))));
        for (int n = 7; n <= 12; ++n) CHECK(std::abs(sum.a(n)) < 1e-14);
    }
}

TEST_CASE("A_W inverse") {
    const auto diag = symbol_diagonal_from_table(table_const_kernel());
    std::mt19937_64 rng(47);
    SECTION("A_W(A_W^{-1} f) = f on random Z2 fields") {
        for (int t = 0; t < 8; ++t) {
            auto f = random_z2_field(6, KS, rng);
            auto inv = apply_Aw_inverse(f, diag, 0.0);
            auto back = linearized_L(inv.field, diag);
            for (int n = -6; n <= 6; ++n)
                CHECK(std::abs(back.a(n) - f.a(n)) <= 1e-12 * (1.0 + std::abs(f.a(n))));
        }
    }
    SECTION("zero maps to zero") {
        PeriodicField z(6, KS);
        auto inv = apply_Aw_inverse(z, diag, 0.0);
        for (int n = -6; n <= 6; ++n) CHECK(std::abs(inv.field.a(n)) == 0.0);
    }
    SECTION("rejects fields outside Z2") {
        auto f = constant_field(1.0, 6, KS);
        CHECK_THROWS_AS(apply_Aw_inverse(f, diag, 0.0), spectral_error);
    }
    SECTION("norm bound with the reported surrogate constant") {
        for (int t = 0; t < 32; ++t) {
            auto f = random_z2_field(6, KS, rng);
            auto inv = apply_Aw_inverse(f, diag, 0.0);
            // ||A^{-1} f||_{H^1} <= C ||f||_{H^{1/2-q}} with C the surrogate
            CHECK(inv.field.norm(1.0) <=
                  inv.op_norm_surrogate * f.norm(0.5) * (1.0 + 1e-12));
        }
    }
    SECTION("near-zero symbol margin raises") {
        SymbolDiagonal bad = diag;
        bad.psi[(size_t)(bad.N + 3)] = cplx{1e-12, 0.0};
        auto f = random_z2_field(6, KS, rng);
        CHECK_THROWS_AS(apply_Aw_inverse(f, bad, 0.0), spectral_error);
    }
}
