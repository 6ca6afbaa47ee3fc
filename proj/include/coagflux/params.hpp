#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace coagflux {

struct invalid_params : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Kernel exponents (gamma, p) normalized into the window 0 <= gamma+2p < 1,
/// with the derived decay exponent q = gamma/2 + p of the log-variable kernel.
struct HomogeneityParams {
    double gamma = 0.0;
    double p = 0.0;
    double q = 0.0;  // gamma/2 + p
};

/// Validates (gamma, p) and applies the normalization p -> -(gamma+p) when
/// gamma+2p < 0, so the output always satisfies 0 <= gamma+2p < 1.  Outside
/// that window no constant-flux solution exists and the pair is rejected.
inline HomogeneityParams validate_params(double gamma, double p) {
    if (!std::isfinite(gamma) || !std::isfinite(p))
        throw invalid_params("gamma and p must be finite");
    double pp = p;
    if (gamma + 2.0 * p < 0.0) pp = -(gamma + p);
    const double g2p = gamma + 2.0 * pp;
    if (g2p >= 1.0)
        throw invalid_params("no constant-flux regime: gamma+2p = " +
                             std::to_string(gamma + 2.0 * p) +
                             " lies outside (-1, 1)");
    HomogeneityParams out;
    out.gamma = gamma;
    out.p = pp;
    out.q = 0.5 * gamma + pp;
    return out;
}

}  // namespace coagflux
