#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "diffsurv/drift.hpp"

namespace diffsurv {

/// State-dependent diffusion coefficient sigma(x) together with the pieces
/// the unit-coefficient transform needs: the antiderivative of 1/sigma and
/// its inverse.
struct StateSigma {
    std::function<double(double)> value;
    std::function<double(double)> deriv;
    std::function<double(double)> antideriv;      // eta(x) = int^x 1/sigma(z) dz
    std::function<double(double)> antideriv_inv;  // eta^{-1}
};

inline StateSigma constant_sigma(double s) {
    if (!(s > 0.0)) throw std::invalid_argument("constant_sigma: s must be positive");
    return StateSigma{[s](double) { return s; }, [](double) { return 0.0; },
                      [s](double x) { return x / s; }, [s](double y) { return s * y; }};
}

/// sigma(x) = s * x on the positive half-line.
inline StateSigma linear_sigma(double s) {
    if (!(s > 0.0)) throw std::invalid_argument("linear_sigma: s must be positive");
    return StateSigma{[s](double x) { return s * x; }, [s](double) { return s; },
                      [s](double x) { return std::log(x) / s; },
                      [s](double y) { return std::exp(s * y); }};
}

struct LampertiTransform {
    std::function<double(double)> forward;  // y = eta(x)
    std::function<double(double)> inverse;  // x = eta^{-1}(y)
    DriftSpec transformed_drift;            // drift of Y = eta(X); unit diffusion coefficient
};

/// Transform dX = beta(X,theta) dt + sigma(X) dB into unit coefficient via
/// Y = eta(X). Ito's formula gives the drift of Y:
///
///   g(y, theta) = beta(x, theta) / sigma(x) - sigma'(x) / 2,   x = eta^{-1}(y).
///
/// Evaluation throws if sigma fails to be strictly positive at the point the
/// drift is requested.
inline LampertiTransform lamperti_transform(const StateSigma& sigma_fn, const DriftSpec& drift) {
    auto names = drift.names();
    auto transformed = DriftSpec::general(
        std::move(names), [sigma_fn, drift](double y, std::span<const double> theta) {
            const double x = sigma_fn.antideriv_inv(y);
            const double s = sigma_fn.value(x);
            if (!(s > 0.0))
                throw std::runtime_error("lamperti_transform: sigma(x) vanishes at x=" +
                                         std::to_string(x));
            return drift.value(x, theta) / s - 0.5 * sigma_fn.deriv(x);
        });
    return LampertiTransform{sigma_fn.antideriv, sigma_fn.antideriv_inv, std::move(transformed)};
}

}  // namespace diffsurv
