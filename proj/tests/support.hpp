#pragma once

#include <random>

#include "coagflux/spectral.hpp"

namespace coagflux::testing {

/// Seeded random real band-limited field: order-one mean mode plus decaying
/// higher modes, so bilinear values stay away from zero.
inline PeriodicField random_field(int N, double k_star, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    PeriodicField f(N, k_star);
    f.a(0) = 1.0 + 0.5 * (u(rng) + 1.0);  // in [1, 2]
    for (int n = 1; n <= N; ++n) {
        const double s = 0.5 / (1.0 + (double)n * (double)n);
        f.set_mode(n, cplx{s * u(rng), s * u(rng)});
    }
    return f;
}

/// Random element of Z2 (a_0 = a_{+-1} = 0).
inline PeriodicField random_z2_field(int N, double k_star, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    PeriodicField f(N, k_star);
    for (int n = 2; n <= N; ++n)
        f.set_mode(n, cplx{u(rng) / (double)n, u(rng) / (double)n});
    return f;
}

}  // namespace coagflux::testing
