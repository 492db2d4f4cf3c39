#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace diffsurv {

/// Parametric drift beta(x, theta). The leading `linear_count` components of
/// theta enter linearly through basis functions that may depend on the
/// trailing (nonlinear) components, plus an optional theta-free offset:
///
///     beta(x, theta) = sum_i theta_i * f_i(x; theta_tail) + c(x; theta_tail)
///
/// which is exactly the shape the conjugate Gaussian update needs.
class DriftSpec {
public:
    using BasisFn = std::function<void(double x, std::span<const double> nonlinear,
                                       std::span<double> out)>;
    using OffsetFn = std::function<double(double x, std::span<const double> nonlinear)>;
    using GeneralFn = std::function<double(double x, std::span<const double> theta)>;

    /// Fully linear drift: beta(x, theta) = theta . f(x).
    static DriftSpec linear(std::vector<std::string> names,
                            std::vector<std::function<double(double)>> basis) {
        if (names.size() != basis.size())
            throw std::invalid_argument("DriftSpec::linear: names/basis size mismatch");
        DriftSpec d;
        d.names_ = std::move(names);
        d.linear_count_ = d.names_.size();
        d.basis_ = [fs = std::move(basis)](double x, std::span<const double>,
                                           std::span<double> out) {
            for (std::size_t i = 0; i < fs.size(); ++i) out[i] = fs[i](x);
        };
        return d;
    }

    /// Linear in the first linear_count parameters given the remaining ones.
    static DriftSpec conditionally_linear(std::vector<std::string> names,
                                          std::size_t linear_count, BasisFn basis,
                                          OffsetFn offset = {}) {
        if (linear_count == 0 || linear_count > names.size())
            throw std::invalid_argument("DriftSpec: invalid linear_count");
        DriftSpec d;
        d.names_ = std::move(names);
        d.linear_count_ = linear_count;
        d.basis_ = std::move(basis);
        d.offset_ = std::move(offset);
        return d;
    }

    /// Black-box drift; no conjugate block.
    static DriftSpec general(std::vector<std::string> names, GeneralFn fn) {
        DriftSpec d;
        d.names_ = std::move(names);
        d.linear_count_ = 0;
        d.general_ = std::move(fn);
        return d;
    }

    /// beta identically zero, no parameters.
    static DriftSpec none() {
        return general({}, [](double, std::span<const double>) { return 0.0; });
    }

    std::size_t dim() const { return names_.size(); }
    std::size_t linear_count() const { return linear_count_; }
    bool has_conjugate_block() const { return linear_count_ > 0; }
    const std::vector<std::string>& names() const { return names_; }

    void eval_basis(double x, std::span<const double> nonlinear, std::span<double> out) const {
        basis_(x, nonlinear, out);
    }

    double offset(double x, std::span<const double> nonlinear) const {
        return offset_ ? offset_(x, nonlinear) : 0.0;
    }

    double value(double x, std::span<const double> theta) const {
        if (theta.size() != dim()) throw std::invalid_argument("DriftSpec: theta dimension mismatch");
        if (general_) return general_(x, theta);
        const auto nonlinear = theta.subspan(linear_count_);
        double fx[kMaxLinear];
        basis_(x, nonlinear, std::span<double>(fx, linear_count_));
        double v = offset_ ? offset_(x, nonlinear) : 0.0;
        for (std::size_t i = 0; i < linear_count_; ++i) v += theta[i] * fx[i];
        return v;
    }

    static constexpr std::size_t kMaxLinear = 16;

private:
    std::vector<std::string> names_;
    std::size_t linear_count_ = 0;
    BasisFn basis_;
    OffsetFn offset_;
    GeneralFn general_;
};

inline double sign(double u) { return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0); }

}  // namespace diffsurv
