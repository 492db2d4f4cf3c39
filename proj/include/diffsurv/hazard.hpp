#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace diffsurv {

/// Nonnegative continuous map from latent state to hazard rate.
class HazardSpec {
public:
    enum class Kind { Abs, Square, Identity, ExpScaled };

    static HazardSpec absolute() { return HazardSpec{Kind::Abs, 0.0}; }
    static HazardSpec square() { return HazardSpec{Kind::Square, 0.0}; }
    /// Positive part max(u, 0); coincides with the identity wherever the
    /// state is positive.
    static HazardSpec identity() { return HazardSpec{Kind::Identity, 0.0}; }
    /// h(u) = exp(scale * u).
    static HazardSpec exp_scaled(double scale) { return HazardSpec{Kind::ExpScaled, scale}; }

    double operator()(double u) const {
        switch (kind_) {
            case Kind::Abs: return std::abs(u);
            case Kind::Square: return u * u;
            case Kind::Identity: return u > 0.0 ? u : 0.0;
            case Kind::ExpScaled: return std::exp(scale_ * u);
        }
        return 0.0;
    }

    Kind kind() const { return kind_; }
    double scale() const { return scale_; }

    std::string describe() const {
        switch (kind_) {
            case Kind::Abs: return "abs";
            case Kind::Square: return "square";
            case Kind::Identity: return "identity";
            case Kind::ExpScaled: return "exp(" + std::to_string(scale_) + "*u)";
        }
        return "?";
    }

private:
    HazardSpec(Kind kind, double scale) : kind_(kind), scale_(scale) {}
    Kind kind_;
    double scale_;
};

}  // namespace diffsurv
