#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace diffsurv {

/// Strictly increasing time nodes. The discrete skeleton shared by sample
/// paths, hazard integrals and the MCMC block updates; observation times and
/// block knots are merged in as nodes so nothing is ever interpolated.
class TimeGrid {
public:
    static TimeGrid from_nodes(std::vector<double> nodes) {
        if (nodes.size() < 2) throw std::invalid_argument("TimeGrid: need at least 2 nodes");
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (!std::isfinite(nodes[k])) throw std::invalid_argument("TimeGrid: non-finite node");
            if (k > 0 && !(nodes[k] > nodes[k - 1]))
                throw std::invalid_argument("TimeGrid: nodes must be strictly increasing");
        }
        return TimeGrid(std::move(nodes));
    }

    const std::vector<double>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    double operator[](std::size_t k) const { return nodes_[k]; }
    double front() const { return nodes_.front(); }
    double back() const { return nodes_.back(); }
    double dt(std::size_t k) const { return nodes_[k + 1] - nodes_[k]; }

    /// Node index whose time matches t (within an absolute tolerance that is
    /// tiny relative to any usable step size), or nullopt.
    std::optional<std::size_t> find(double t) const {
        const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t);
        if (it != nodes_.end() && std::abs(*it - t) <= tol_)
            return static_cast<std::size_t>(it - nodes_.begin());
        if (it != nodes_.begin() && std::abs(*(it - 1) - t) <= tol_)
            return static_cast<std::size_t>(it - nodes_.begin()) - 1;
        return std::nullopt;
    }

    std::size_t index_of(double t) const {
        const auto k = find(t);
        if (!k) throw std::invalid_argument("TimeGrid: time is not a grid node");
        return *k;
    }

    bool contains(double t) const { return find(t).has_value(); }

    /// Union with another sorted set of times; existing nodes win on near
    /// collision so the original grid is a subset of the result.
    TimeGrid refined_with(std::span<const double> extra) const {
        std::vector<double> add(extra.begin(), extra.end());
        std::sort(add.begin(), add.end());
        std::vector<double> merged;
        merged.reserve(nodes_.size() + add.size());
        std::size_t i = 0, j = 0;
        while (i < nodes_.size() || j < add.size()) {
            if (j == add.size() || (i < nodes_.size() && nodes_[i] <= add[j] + tol_)) {
                if (merged.empty() || nodes_[i] > merged.back() + tol_) merged.push_back(nodes_[i]);
                // drop extras colliding with this node
                while (j < add.size() && std::abs(add[j] - nodes_[i]) <= tol_) ++j;
                ++i;
            } else {
                if (merged.empty() || add[j] > merged.back() + tol_) merged.push_back(add[j]);
                ++j;
            }
        }
        return TimeGrid(std::move(merged));
    }

    bool same_nodes(const TimeGrid& other) const { return nodes_ == other.nodes_; }

private:
    explicit TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
        tol_ = 1e-9 * std::max({1.0, std::abs(nodes_.front()), std::abs(nodes_.back())});
    }

    friend TimeGrid make_grid(double, double, double, std::span<const double>);

    std::vector<double> nodes_;
    double tol_;
};

/// Uniform nodes at spacing dt on [t_start, t_end], merged (sorted,
/// deduplicated) with extra_nodes. The extras win on near collision so that
/// observation times sit on the grid at their exact values; the endpoints are
/// always exactly t_start and t_end.
inline TimeGrid make_grid(double t_start, double t_end, double dt,
                          std::span<const double> extra_nodes = {}) {
    if (!std::isfinite(t_start) || !std::isfinite(t_end) || !std::isfinite(dt))
        throw std::invalid_argument("make_grid: non-finite input");
    if (!(t_end > t_start)) throw std::invalid_argument("make_grid: t_end must exceed t_start");
    if (!(dt > 0.0)) throw std::invalid_argument("make_grid: dt must be positive");

    const double tol = 1e-9 * std::max({1.0, std::abs(t_start), std::abs(t_end)});
    std::vector<double> extras;
    extras.reserve(extra_nodes.size());
    for (const double e : extra_nodes) {
        if (!std::isfinite(e) || e < t_start - tol || e > t_end + tol)
            throw std::invalid_argument("make_grid: extra node outside [t_start, t_end]");
        if (e > t_start + tol && e < t_end - tol) extras.push_back(e);
    }
    std::sort(extras.begin(), extras.end());

    std::vector<double> nodes;
    nodes.reserve(static_cast<std::size_t>((t_end - t_start) / dt) + extras.size() + 2);
    std::size_t j = 0;
    auto push_merged = [&](double uniform_t) {
        while (j < extras.size() && extras[j] < uniform_t - tol) {
            if (nodes.empty() || extras[j] > nodes.back() + tol) nodes.push_back(extras[j]);
            ++j;
        }
        // an extra within tol of the uniform node replaces it
        if (j < extras.size() && std::abs(extras[j] - uniform_t) <= tol) {
            if (nodes.empty() || extras[j] > nodes.back() + tol) nodes.push_back(extras[j]);
            ++j;
            return;
        }
        if (nodes.empty() || uniform_t > nodes.back() + tol) nodes.push_back(uniform_t);
    };

    push_merged(t_start);
    for (std::size_t k = 1;; ++k) {
        const double t = t_start + static_cast<double>(k) * dt;
        if (t >= t_end - tol) break;
        push_merged(t);
    }
    while (j < extras.size()) {
        if (nodes.back() + tol < extras[j]) nodes.push_back(extras[j]);
        ++j;
    }
    if (nodes.back() + tol < t_end)
        nodes.push_back(t_end);
    else
        nodes.back() = t_end;
    nodes.front() = t_start;

    return TimeGrid(std::move(nodes));
}

}  // namespace diffsurv
