#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "diffsurv/brownian.hpp"
#include "diffsurv/girsanov.hpp"
#include "diffsurv/linalg.hpp"
#include "diffsurv/model.hpp"
#include "diffsurv/path.hpp"
#include "diffsurv/prior.hpp"
#include "diffsurv/rng.hpp"
#include "diffsurv/survival_data.hpp"
#include "diffsurv/time_grid.hpp"

namespace diffsurv {

// ---------------------------------------------------------------------------
// Parametrizations of the latent object
// ---------------------------------------------------------------------------

/// Centered: the latent is the diffusion path X itself.
/// Partially non-centered: X up to the last observation time, then a standard
/// Brownian motion; the tail of X is rebuilt from the SDE.
/// Fully non-centered: the driving Brownian motion; X is rebuilt from the SDE
/// everywhere. The non-centered forms make the parameter update depend on the
/// latent only through [0, y_max], so the chain is unaffected by the horizon.
enum class Parametrization { Centered, PartiallyNonCentered, FullyNonCentered };

inline std::string to_string(Parametrization p) {
    switch (p) {
        case Parametrization::Centered: return "centered";
        case Parametrization::PartiallyNonCentered: return "pnc";
        case Parametrization::FullyNonCentered: return "ncp";
    }
    return "?";
}

inline Parametrization parse_parametrization(const std::string& s) {
    if (s == "centered") return Parametrization::Centered;
    if (s == "pnc") return Parametrization::PartiallyNonCentered;
    if (s == "ncp") return Parametrization::FullyNonCentered;
    throw std::invalid_argument("unknown parametrization: " + s +
                                " (expected centered|pnc|ncp)");
}

// ---------------------------------------------------------------------------
// Configuration and output
// ---------------------------------------------------------------------------

struct SamplerConfig {
    std::size_t iterations = 20000;
    std::size_t burn_in = 2000;
    std::size_t thin = 1;
    double dt = 0.01;
    double block_length = 0.2;
    double horizon = 0.0;          // 0 = per-group max observation time
    std::vector<double> horizons;  // optional per-group override
    Parametrization parametrization = Parametrization::PartiallyNonCentered;
    std::uint64_t seed = 1;
    double sigma_walk_step = 0.1;  // random-walk step on log sigma
    std::map<std::size_t, ProposalSpec> scalar_proposals;  // overrides model hints
    std::size_t curve_nodes = 100;
    std::size_t curve_max_draws = 5000;  // stored curve draws are thinned to this cap
    bool record_curves = true;

    void validate() const {
        if (iterations == 0) throw std::invalid_argument("SamplerConfig: iterations == 0");
        if (burn_in > iterations)
            throw std::invalid_argument("SamplerConfig: burn_in exceeds iterations");
        if (thin == 0) throw std::invalid_argument("SamplerConfig: thin == 0");
        if (!(dt > 0.0)) throw std::invalid_argument("SamplerConfig: dt must be positive");
        if (!(block_length >= 2.0 * dt))
            throw std::invalid_argument("SamplerConfig: block_length must be >= 2*dt");
        if (!(sigma_walk_step > 0.0))
            throw std::invalid_argument("SamplerConfig: sigma_walk_step must be positive");
        if (curve_nodes < 2) throw std::invalid_argument("SamplerConfig: curve_nodes < 2");
        if (curve_max_draws == 0) throw std::invalid_argument("SamplerConfig: curve_max_draws == 0");
    }
};

struct AcceptStat {
    std::uint64_t attempts = 0;
    std::uint64_t accepts = 0;
    double rate() const { return attempts ? static_cast<double>(accepts) / attempts : 0.0; }
};

struct Trace {
    std::uint64_t seed = 0;
    std::vector<std::string> theta_names;
    bool has_sigma = false;
    std::vector<std::uint64_t> iterations;
    std::vector<std::vector<double>> theta;  // one row per retained draw
    std::vector<double> sigma;
    std::vector<double> loglik;
    std::vector<std::string> cell_labels;
    std::vector<std::vector<double>> curve_times;  // per cell
    // [cell][stored draw][output node]
    std::vector<std::vector<std::vector<double>>> survival_draws;
    std::vector<std::vector<std::vector<double>>> hazard_draws;
    std::vector<std::vector<std::vector<double>>> density_draws;
    std::map<std::string, AcceptStat> acceptance;

    std::size_t retained() const { return theta.size(); }

    std::vector<double> theta_series(std::size_t j) const {
        std::vector<double> s(theta.size());
        for (std::size_t i = 0; i < theta.size(); ++i) s[i] = theta[i][j];
        return s;
    }
};

// ---------------------------------------------------------------------------
// Path reconstruction
// ---------------------------------------------------------------------------

/// Rebuild the diffusion path from the latent object.
///   centered: identity.
///   pnc: equal to the latent up to y_max, then the Euler recursion driven by
///        the latent's increments (continuous at y_max by construction).
///   ncp: full Euler recursion from x0 driven by the latent's increments.
inline DiffusionPath reconstruct_path(Parametrization par, const DriftSpec& drift,
                                      std::span<const double> theta, double sigma,
                                      const DiffusionPath& latent, double x0, double y_max) {
    const std::size_t y_idx = latent.grid.index_of(y_max);
    std::vector<double> out(latent.values.size());
    const auto& times = latent.grid.nodes();
    auto beta = [&](double x) { return drift.value(x, theta); };
    switch (par) {
        case Parametrization::Centered:
            out = latent.values;
            break;
        case Parametrization::PartiallyNonCentered: {
            std::copy(latent.values.begin(), latent.values.begin() + y_idx + 1, out.begin());
            for (std::size_t k = y_idx; k + 1 < out.size(); ++k) {
                const double b = beta(out[k]);
                if (!std::isfinite(b)) throw std::runtime_error("reconstruct_path: drift not finite");
                out[k + 1] = out[k] + b * (times[k + 1] - times[k]) +
                             sigma * (latent.values[k + 1] - latent.values[k]);
            }
            break;
        }
        case Parametrization::FullyNonCentered: {
            out[0] = x0;
            for (std::size_t k = 0; k + 1 < out.size(); ++k) {
                const double b = beta(out[k]);
                if (!std::isfinite(b)) throw std::runtime_error("reconstruct_path: drift not finite");
                out[k + 1] = out[k] + b * (times[k + 1] - times[k]) +
                             sigma * (latent.values[k + 1] - latent.values[k]);
            }
            break;
        }
    }
    return DiffusionPath{latent.grid, std::move(out)};
}

// ---------------------------------------------------------------------------
// Conjugate Gaussian update of the linear drift block
// ---------------------------------------------------------------------------

struct PathWindow {
    std::span<const double> times;
    std::span<const double> values;
    std::size_t end_idx = 0;  // integrate over node indices [0, end_idx]
};

struct GaussianConditional {
    std::vector<double> mean;
    Matrix precision;
};

/// Full conditional of the coefficients that enter the drift linearly, given
/// the path windows. With drift theta.f(x) + c(x) and Gaussian prior
/// (mu, P):
///   S_i = sum_w [ int f_i dx - int f_i c dt ] / sigma^2 + (P mu)_i
///   L_ij = sum_w int f_i f_j dt / sigma^2 + P_ij
/// and the conditional is N(L^{-1} S, L^{-1}). Integrals are discretized with
/// left-endpoint evaluation, matching the Euler scheme.
inline GaussianConditional conjugate_posterior(const DriftSpec& drift,
                                               std::span<const double> nonlinear, double sigma,
                                               std::span<const PathWindow> windows,
                                               const GaussianBlockPrior& prior) {
    const std::size_t d = drift.linear_count();
    if (d == 0) throw std::invalid_argument("conjugate_posterior: drift has no linear block");
    if (prior.mean.size() != d)
        throw std::invalid_argument("conjugate_posterior: prior dimension mismatch");
    std::vector<double> S(d, 0.0);
    Matrix L(d);
    double fx[DriftSpec::kMaxLinear];
    for (const auto& w : windows) {
        for (std::size_t k = 0; k < w.end_idx; ++k) {
            drift.eval_basis(w.values[k], nonlinear, std::span<double>(fx, d));
            const double c = drift.offset(w.values[k], nonlinear);
            const double dx = w.values[k + 1] - w.values[k];
            const double dt = w.times[k + 1] - w.times[k];
            for (std::size_t i = 0; i < d; ++i) {
                S[i] += fx[i] * dx - fx[i] * c * dt;
                for (std::size_t j = 0; j <= i; ++j) L(i, j) += fx[i] * fx[j] * dt;
            }
        }
    }
    const double inv_s2 = 1.0 / (sigma * sigma);
    for (std::size_t i = 0; i < d; ++i) {
        S[i] *= inv_s2;
        for (std::size_t j = 0; j < d; ++j) S[i] += prior.precision(i, j) * prior.mean[j];
        for (std::size_t j = 0; j <= i; ++j) {
            L(i, j) = L(i, j) * inv_s2 + prior.precision(i, j);
            L(j, i) = L(i, j);
        }
    }
    const Matrix chol = cholesky(L);  // throws when the basis is degenerate on the window
    return GaussianConditional{cholesky_solve(chol, S), std::move(L)};
}

inline std::vector<double> sample_gaussian(const GaussianConditional& cond, Rng& rng) {
    const Matrix L = cholesky(cond.precision);
    std::vector<double> z(cond.mean.size());
    for (auto& v : z) v = rng.gaussian();
    auto x = upper_solve(L, z);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += cond.mean[i];
    return x;
}

inline std::vector<double> conjugate_theta_update(const DriftSpec& drift,
                                                  std::span<const double> nonlinear, double sigma,
                                                  std::span<const PathWindow> windows,
                                                  const GaussianBlockPrior& prior, Rng& rng) {
    return sample_gaussian(conjugate_posterior(drift, nonlinear, sigma, windows, prior), rng);
}

// ---------------------------------------------------------------------------
// Independence sampler
// ---------------------------------------------------------------------------

inline double log_beta_pdf(double x, double a, double b) {
    if (!(x > 0.0) || !(x < 1.0)) return kNegInf;
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + std::lgamma(a + b) -
           std::lgamma(a) - std::lgamma(b);
}

struct ScalarProposal {
    std::function<double(Rng&)> sample;
    std::function<double(double)> log_density;
};

inline ScalarProposal make_scalar_proposal(const ProposalSpec& spec, const ScalarPrior& prior) {
    if (spec.kind == ProposalSpec::Kind::Prior) {
        return ScalarProposal{[prior](Rng& rng) { return diffsurv::sample(prior, rng); },
                              [prior](double x) { return diffsurv::log_density(prior, x); }};
    }
    const double a = spec.a, b = spec.b;
    return ScalarProposal{[a, b](Rng& rng) { return rng.beta(a, b); },
                          [a, b](double x) { return log_beta_pdf(x, a, b); }};
}

struct McmcStep {
    double value = 0.0;
    bool accepted = false;
};

/// One Metropolis-Hastings step with an independence proposal. Returns the
/// current value on rejection.
inline McmcStep independence_update(double current, const ScalarProposal& proposal,
                                    const std::function<double(double)>& log_target, Rng& rng) {
    const double lq_cur = proposal.log_density(current);
    if (lq_cur == kNegInf)
        throw std::invalid_argument(
            "independence_update: proposal density vanishes at the current value");
    const double cand = proposal.sample(rng);
    const double num = log_target(cand) - proposal.log_density(cand);
    const double u = rng.uniform();
    if (num == kNegInf) return {current, false};
    const double den = log_target(current) - lq_cur;
    const double log_ratio = den == kNegInf ? std::numeric_limits<double>::infinity() : num - den;
    if (std::log(u) < log_ratio) return {cand, true};
    return {current, false};
}

// ---------------------------------------------------------------------------
// The Hastings-within-Gibbs sampler
// ---------------------------------------------------------------------------

/// Alternates (1) parameter updates -- the conjugate Gaussian draw for the
/// linear drift block (centered/pnc), independence samplers elsewhere, a
/// log-scale random walk for an unknown sigma -- with (2) latent updates via
/// overlapping Brownian-bridge blocks plus a free-end block, and, under the
/// non-centered forms, a direct redraw of the latent tail beyond the last
/// observation.
///
/// Every acceptance ratio targets the discretized posterior (Gaussian-
/// increment path law), for which the bridge / free-walk proposals and the
/// discretized Girsanov weights are exact.
///
/// Randomness is split into dedicated substreams (parameters; per-latent path
/// updates on [0, y_max]; per-latent tail updates), so under pnc/ncp the
/// retained theta draws are a function of the seed and the latent restricted
/// to [0, y_max] only -- extending the horizon cannot change them.
class Sampler {
public:
    struct Block {
        std::size_t lo = 0;
        std::size_t hi = 0;
        bool free_end = false;
    };

    Sampler(const ModelInstance& model, const SurvivalDataset& data, SamplerConfig config)
        : model_(model), cfg_(std::move(config)), param_rng_(0), root_(cfg_.seed) {
        cfg_.validate();
        model_.prior.validate();
        par_ = cfg_.parametrization;
        sigma_unknown_ = model_.sigma_mode == SigmaMode::Unknown;
        if (sigma_unknown_) {
            if (par_ != Parametrization::Centered)
                throw std::invalid_argument(
                    "Sampler: unknown sigma is only supported with the centered parametrization");
            if (model_.covariates)
                throw std::invalid_argument(
                    "Sampler: unknown sigma is not supported for covariate models");
        }
        if (model_.covariates && par_ != Parametrization::FullyNonCentered)
            throw std::invalid_argument(
                "Sampler: covariate models share one Brownian motion and require ncp");
        build_layout(data);
        param_rng_ = root_.fork(1);
        initialize_state();
    }

    Trace run() {
        Trace trace = make_trace_skeleton();
        const std::size_t total = (cfg_.iterations - cfg_.burn_in) / cfg_.thin;
        const std::size_t curve_stride = std::max<std::size_t>(1, total / cfg_.curve_max_draws);
        std::size_t record_count = 0;
        for (std::size_t it = 1; it <= cfg_.iterations; ++it) {
            iterate();
            if (it > cfg_.burn_in && (it - cfg_.burn_in) % cfg_.thin == 0) {
                record(trace, it, record_count % curve_stride == 0);
                ++record_count;
            }
        }
        trace.acceptance = accept_;
        return trace;
    }

    /// One full Gibbs iteration.
    void iterate() {
        update_parameters();
        sweep_all_latents();
        refresh_recording_paths();
    }

    // -- pieces, exposed so the kernel identities are checkable --------------

    void update_parameters() {
        if (model_.theta_dim() > 0) {
            if (model_.has_conjugate_block() && par_ != Parametrization::FullyNonCentered)
                conjugate_block_update();
            else if (model_.prior.block)
                block_independence_update();
            for (std::size_t s = 0; s < model_.prior.scalars.size(); ++s) scalar_update(s);
        }
        if (sigma_unknown_) sigma_step();
        rebuild_all_recon();
    }

    void sweep_all_latents() {
        for (std::size_t i = 0; i < latents_.size(); ++i) sweep_latent(i);
    }

    /// One sweep over the update-span blocks of a latent, then the tail.
    void sweep_latent(std::size_t li) {
        auto& L = latents_[li];
        for (std::size_t b = 0; b < L.blocks.size(); ++b) block_update(li, b);
        redraw_tail(li);
    }

    /// Propose and accept/reject one block of the latent path.
    bool block_update(std::size_t li, std::size_t block_index) {
        auto& L = latents_[li];
        const Block& blk = L.blocks[block_index];
        const auto times = std::span<const double>(L.grid.nodes());
        const std::size_t n_prop = blk.free_end ? blk.hi - blk.lo : blk.hi - blk.lo - 1;
        L.prop.resize(n_prop);
        const double prop_sigma = proposal_sigma();
        if (blk.free_end)
            fill_free_walk(times.subspan(blk.lo, blk.hi - blk.lo + 1), L.values[blk.lo],
                           prop_sigma, L.path_rng, L.prop);
        else
            fill_bridge_interior(times.subspan(blk.lo, blk.hi - blk.lo + 1), L.values[blk.lo],
                                 L.values[blk.hi], prop_sigma, L.path_rng, L.prop);
        const double log_ratio = block_log_ratio(li, blk.lo, blk.hi, blk.free_end, L.prop);
        const double u = L.path_rng.uniform();
        auto& stat = accept_[blk.free_end ? "path_free" : "path_bridge"];
        ++stat.attempts;
        if (!(std::log(u) < log_ratio)) return false;
        ++stat.accepts;
        apply_block(li, blk, L.prop);
        return true;
    }

    /// Log acceptance ratio for replacing the latent values strictly inside
    /// (lo, hi) -- or (lo, hi] for a free-end block -- with `proposed`.
    /// Girsanov restricted to the block, times the likelihood ratio over the
    /// affected observations (terms outside cancel exactly).
    double block_log_ratio(std::size_t li, std::size_t lo, std::size_t hi, bool free_end,
                           std::span<const double> proposed) const {
        const auto& L = latents_[li];
        const auto times = std::span<const double>(L.grid.nodes());
        double lr = 0.0;

        if (par_ != Parametrization::FullyNonCentered) {
            // Girsanov over [lo, hi] in latent coordinates
            L.scratch_a.assign(L.values.begin() + lo, L.values.begin() + hi + 1);
            std::copy(proposed.begin(), proposed.end(), L.scratch_a.begin() + 1);
            auto beta = latent_drift();
            const double g_new = girsanov_logdensity_core(times.subspan(lo, hi - lo + 1),
                                                          L.scratch_a, beta, model_.sigma, 0,
                                                          hi - lo);
            const double g_old =
                girsanov_logdensity_core(times, L.values, beta, model_.sigma, lo, hi);
            lr += g_new - g_old;
        }

        for (std::size_t c = 0; c < L.cells.size(); ++c) {
            const auto& cell = L.cells[c];
            if (par_ == Parametrization::FullyNonCentered) {
                // splice the candidate latent and re-run the recursion to the
                // end of the likelihood window
                L.scratch_a.assign(L.values.begin() + lo, L.values.begin() + L.span_end + 1);
                std::copy(proposed.begin(), proposed.end(), L.scratch_a.begin() + 1);
                L.scratch_b.resize(L.span_end - lo + 1);
                L.scratch_b[0] = cell.recon[lo];
                const auto sub_times = times.subspan(lo, L.span_end - lo + 1);
                for (std::size_t k = 0; k + 1 < L.scratch_b.size(); ++k) {
                    const double b =
                        model_.drift_value(cell.cov_cell, L.scratch_b[k], theta_);
                    if (!std::isfinite(b)) throw std::runtime_error("block update: drift not finite");
                    L.scratch_b[k + 1] = L.scratch_b[k] + b * (sub_times[k + 1] - sub_times[k]) +
                                         sigma_ * (L.scratch_a[k + 1] - L.scratch_a[k]);
                }
                lr += loglik_delta(L, cell, cell.recon,
                                   std::span<const double>(L.scratch_b).subspan(1), lo + 1,
                                   L.span_end);
            } else if (sigma_unknown_) {
                const std::size_t c2 = free_end ? hi : hi - 1;
                L.scratch_b.resize(proposed.size());
                for (std::size_t k = 0; k < proposed.size(); ++k)
                    L.scratch_b[k] = model_.x0 + sigma_ * proposed[k];
                lr += loglik_delta(L, cell, cell.recon, L.scratch_b, lo + 1, c2);
            } else {
                const std::size_t c2 = free_end ? hi : hi - 1;
                lr += loglik_delta(L, cell, L.values, proposed, lo + 1, c2);
            }
            if (lr == kNegInf) return lr;
        }
        return lr;
    }

    /// Random-walk Metropolis step on log sigma (unknown-sigma models): the
    /// latent is the unit-coefficient path, so the target combines the sigma
    /// prior, the unit Girsanov weight with drift beta(x0 + sigma*x, theta)/sigma,
    /// and the data likelihood through the rebuilt paths.
    bool sigma_step() {
        if (!sigma_unknown_) throw std::invalid_argument("sigma_step: sigma is fixed in this model");
        const double cand = sigma_ * std::exp(cfg_.sigma_walk_step * param_rng_.gaussian());
        const double u = param_rng_.uniform();
        auto target = [&](double s) {
            double acc = log_density(ScalarPrior{model_.sigma_prior}, s);
            if (acc == kNegInf) return acc;
            for (const auto& L : latents_) {
                const auto times = std::span<const double>(L.grid.nodes());
                auto beta = [&](double xd) {
                    return model_.drift.value(model_.x0 + s * xd, theta_) / s;
                };
                acc += girsanov_logdensity_core(times, L.values, beta, 1.0, 0, L.span_end);
                for (const auto& cell : L.cells) {
                    L.scratch_b.resize(L.span_end + 1);
                    for (std::size_t k = 0; k <= L.span_end; ++k)
                        L.scratch_b[k] = model_.x0 + s * L.values[k];
                    acc += cell_loglik(L, cell, L.scratch_b);
                }
                if (acc == kNegInf) return acc;
            }
            return acc;
        };
        // log-scale walk: include the Jacobian (factor sigma'/sigma)
        const double log_ratio =
            target(cand) + std::log(cand) - (target(sigma_) + std::log(sigma_));
        auto& stat = accept_["sigma"];
        ++stat.attempts;
        if (!(std::log(u) < log_ratio)) return false;
        ++stat.accepts;
        sigma_ = cand;
        return true;
    }

    // -- accessors ------------------------------------------------------------

    const std::vector<double>& theta() const { return theta_; }
    double sigma_value() const { return sigma_; }
    std::size_t latent_count() const { return latents_.size(); }
    const TimeGrid& latent_grid(std::size_t li) const { return latents_[li].grid; }
    std::span<const double> latent_values(std::size_t li) const { return latents_[li].values; }
    std::span<const Block> schedule(std::size_t li) const { return latents_[li].blocks; }
    std::size_t span_end(std::size_t li) const { return latents_[li].span_end; }
    std::span<const double> recon_values(std::size_t li, std::size_t cell = 0) const {
        return latents_[li].cells[cell].recon;
    }
    const std::vector<std::string>& cell_labels() const { return cell_labels_; }
    const std::map<std::string, AcceptStat>& acceptance() const { return accept_; }

    /// Reconstructed paths recomputed from scratch; used to check the cache
    /// invariant.
    std::vector<double> recompute_recon(std::size_t li, std::size_t cell) const {
        const auto& L = latents_[li];
        std::vector<double> out(L.values.size());
        rebuild_cell_recon(L, L.cells[cell], out);
        return out;
    }

    /// Overwrite a latent path and rebuild its reconstructions (testing and
    /// instrumentation).
    void force_latent(std::size_t li, std::span<const double> values) {
        auto& L = latents_[li];
        if (values.size() != L.values.size())
            throw std::invalid_argument("force_latent: size mismatch");
        std::copy(values.begin(), values.end(), L.values.begin());
        for (auto& cell : L.cells) rebuild_cell_recon(L, cell, cell.recon);
    }

private:
    struct CellWork {
        std::string label;
        std::size_t cov_cell = 0;
        std::vector<std::size_t> obs_node;  // ascending
        std::vector<char> obs_event;
        std::vector<std::size_t> count_after;  // count_after[k] = #obs with node >= k
        std::size_t y_idx = 0;
        std::vector<double> recon;
    };

    struct LatentWork {
        TimeGrid grid = make_grid(0.0, 1.0, 1.0);
        std::vector<double> values;
        std::vector<CellWork> cells;
        std::size_t span_end = 0;
        std::vector<Block> blocks;
        Rng path_rng{0}, tail_rng{0};
        mutable std::vector<double> prop, scratch_a, scratch_b, scratch_prefix;
    };

    // ---- construction -------------------------------------------------------

    void build_layout(const SurvivalDataset& data) {
        struct CellSeed {
            std::string label;
            std::size_t cov_cell;
            std::vector<const Observation*> obs;
        };
        std::vector<std::vector<CellSeed>> latent_seeds;
        if (model_.covariates) {
            std::vector<CellSeed> cells;
            for (std::size_t k = 0; k < model_.covariates->cells.size(); ++k)
                cells.push_back({model_.covariates->cell_label(k), k, {}});
            for (const auto& o : data.observations)
                cells[model_.covariates->cell_of(o.covariates)].obs.push_back(&o);
            latent_seeds.push_back(std::move(cells));
        } else if (model_.pool_groups || data.observations.empty()) {
            CellSeed seed{"all", 0, {}};
            for (const auto& o : data.observations) seed.obs.push_back(&o);
            latent_seeds.push_back({std::move(seed)});
        } else {
            for (const auto& label : data.group_labels()) {
                CellSeed seed{label.empty() ? "all" : label, 0, {}};
                for (const auto& o : data.observations)
                    if (o.group == label) seed.obs.push_back(&o);
                latent_seeds.push_back({std::move(seed)});
            }
        }

        const bool span_is_horizon =
            par_ == Parametrization::Centered;  // includes the unknown-sigma scheme
        for (std::size_t li = 0; li < latent_seeds.size(); ++li) {
            LatentWork L;
            double y_all = model_.time_origin;
            std::vector<double> obs_times;
            for (const auto& cell : latent_seeds[li])
                for (const auto* o : cell.obs) {
                    obs_times.push_back(o->time);
                    y_all = std::max(y_all, o->time);
                }
            double horizon = cfg_.horizon;
            if (li < cfg_.horizons.size()) horizon = cfg_.horizons[li];
            if (horizon <= 0.0) horizon = y_all;
            if (horizon < y_all - 1e-12)
                throw std::invalid_argument("Sampler: horizon is below the largest observation");
            if (horizon <= model_.time_origin)
                throw std::invalid_argument("Sampler: horizon does not exceed the time origin");
            const double span_end_time = span_is_horizon ? horizon : y_all;
            if (!span_is_horizon && !(y_all > model_.time_origin))
                throw std::invalid_argument(
                    "Sampler: non-centered parametrizations need at least one observation");

            std::vector<double> extras = obs_times;
            const auto knot_times = make_knot_times(model_.time_origin, span_end_time);
            extras.insert(extras.end(), knot_times.begin(), knot_times.end());
            L.grid = make_grid(model_.time_origin, horizon, cfg_.dt, extras);
            L.span_end = L.grid.index_of(span_end_time);
            L.blocks = make_blocks(L.grid, knot_times, L.span_end);

            for (const auto& seed : latent_seeds[li]) {
                CellWork cw;
                cw.label = seed.label;
                cw.cov_cell = seed.cov_cell;
                std::vector<std::pair<std::size_t, char>> tagged;
                for (const auto* o : seed.obs)
                    tagged.emplace_back(L.grid.index_of(o->time), o->event ? 1 : 0);
                std::sort(tagged.begin(), tagged.end());
                for (const auto& [node, ev] : tagged) {
                    cw.obs_node.push_back(node);
                    cw.obs_event.push_back(ev);
                    cw.y_idx = std::max(cw.y_idx, node);
                }
                cw.count_after.assign(L.grid.size() + 2, 0);
                for (const std::size_t node : cw.obs_node) ++cw.count_after[node];
                for (std::size_t k = L.grid.size(); k-- > 0;)
                    cw.count_after[k] += cw.count_after[k + 1];
                cw.recon.assign(L.grid.size(), 0.0);
                L.cells.push_back(std::move(cw));
                cell_labels_.push_back(L.cells.back().label);
            }
            L.path_rng = root_.fork(100 + li);
            L.tail_rng = root_.fork(200 + li);
            latents_.push_back(std::move(L));
        }
    }

    /// Knot times at block_length spacing, snapped to the dt lattice so a
    /// knot that lands on a uniform node is that node bit-for-bit.
    std::vector<double> make_knot_times(double origin, double span_end_time) const {
        std::vector<double> knots;
        const double span = span_end_time - origin;
        if (span < 2.0 * cfg_.block_length) {  // degenerate: a single free-end block
            knots = {origin, span_end_time};
            return knots;
        }
        const double steps_per_block = std::round(cfg_.block_length / cfg_.dt);
        const double tol = 1e-9 * std::max(1.0, std::abs(span_end_time));
        for (std::size_t m = 0;; ++m) {
            const double t = origin + static_cast<double>(m) * steps_per_block * cfg_.dt;
            if (t >= span_end_time - tol) break;
            knots.push_back(t);
        }
        knots.push_back(span_end_time);
        return knots;
    }

    /// Overlapping bridge blocks (k_i, k_{i+2}) plus a free-end block over the
    /// last two knot intervals, so every node is covered and the span-end
    /// value may vary.
    static std::vector<Block> make_blocks(const TimeGrid& grid,
                                          const std::vector<double>& knot_times,
                                          std::size_t span_end) {
        std::vector<std::size_t> knots;
        for (const double t : knot_times) knots.push_back(grid.index_of(t));
        std::vector<Block> blocks;
        const std::size_t m = knots.size();
        if (m < 3) {
            blocks.push_back(Block{knots.front(), span_end, true});
            return blocks;
        }
        const std::size_t n_bridges = std::max<std::size_t>(1, m - 3);
        for (std::size_t i = 0; i < n_bridges; ++i)
            blocks.push_back(Block{knots[i], knots[i + 2], false});
        blocks.push_back(Block{knots[m - 3], knots[m - 1], true});
        return blocks;
    }

    void initialize_state() {
        theta_ = model_.prior.mean();
        sigma_ = sigma_unknown_ ? model_.sigma_prior.mean : model_.sigma;
        for (auto& L : latents_) {
            L.values.assign(L.grid.size(), 0.0);
            const auto times = std::span<const double>(L.grid.nodes());
            const bool latent_is_path = par_ != Parametrization::FullyNonCentered && !sigma_unknown_;
            const double origin_value =
                latent_is_path ? model_.cell_x0(L.cells.front().cov_cell, theta_) : 0.0;
            const double scale = latent_is_path ? model_.sigma : 1.0;
            L.values[0] = origin_value;
            if (L.span_end > 0)
                fill_free_walk(times.subspan(0, L.span_end + 1), origin_value, scale, L.path_rng,
                               std::span<double>(L.values).subspan(1, L.span_end));
            if (L.span_end + 1 < L.grid.size())
                fill_free_walk(times.subspan(L.span_end), L.values[L.span_end], 1.0, L.tail_rng,
                               std::span<double>(L.values).subspan(L.span_end + 1));
        }
        rebuild_all_recon();
        refresh_recording_paths();
    }

    // ---- reconstruction maintenance ----------------------------------------

    std::function<double(double)> latent_drift() const {
        if (sigma_unknown_) {
            const double s = sigma_;
            const double x0 = model_.x0;
            return [this, s, x0](double xd) { return model_.drift.value(x0 + s * xd, theta_) / s; };
        }
        return [this](double x) { return model_.drift.value(x, theta_); };
    }

    void rebuild_cell_recon(const LatentWork& L, const CellWork& cell,
                            std::span<double> out) const {
        const auto times = std::span<const double>(L.grid.nodes());
        if (sigma_unknown_) {
            for (std::size_t k = 0; k < out.size(); ++k)
                out[k] = model_.x0 + sigma_ * L.values[k];
            return;
        }
        switch (par_) {
            case Parametrization::Centered:
                std::copy(L.values.begin(), L.values.end(), out.begin());
                break;
            case Parametrization::PartiallyNonCentered: {
                std::copy(L.values.begin(), L.values.begin() + L.span_end + 1, out.begin());
                for (std::size_t k = L.span_end; k + 1 < out.size(); ++k) {
                    const double b = model_.drift_value(cell.cov_cell, out[k], theta_);
                    if (!std::isfinite(b))
                        throw std::runtime_error("reconstruction: drift not finite");
                    out[k + 1] = out[k] + b * (times[k + 1] - times[k]) +
                                 model_.sigma * (L.values[k + 1] - L.values[k]);
                }
                break;
            }
            case Parametrization::FullyNonCentered: {
                out[0] = model_.cell_x0(cell.cov_cell, theta_);
                for (std::size_t k = 0; k + 1 < out.size(); ++k) {
                    const double b = model_.drift_value(cell.cov_cell, out[k], theta_);
                    if (!std::isfinite(b))
                        throw std::runtime_error("reconstruction: drift not finite");
                    out[k + 1] = out[k] + b * (times[k + 1] - times[k]) +
                                 sigma_ * (L.values[k + 1] - L.values[k]);
                }
                break;
            }
        }
    }

    void rebuild_all_recon() {
        for (auto& L : latents_)
            for (auto& cell : L.cells) rebuild_cell_recon(L, cell, cell.recon);
    }

    void refresh_recording_paths() { rebuild_all_recon(); }

    // ---- likelihood ----------------------------------------------------------

    /// Log-likelihood of one cell's observations against `path` (full-grid or
    /// at least span-covering values).
    double cell_loglik(const LatentWork& L, const CellWork& cell,
                       std::span<const double> path) const {
        if (cell.obs_node.empty()) return 0.0;
        const auto times = std::span<const double>(L.grid.nodes());
        double acc = 0.0;
        double lambda = 0.0;
        std::size_t oi = 0;
        for (std::size_t k = 0; k <= cell.y_idx && oi < cell.obs_node.size(); ++k) {
            while (oi < cell.obs_node.size() && cell.obs_node[oi] == k) {
                acc -= lambda;
                if (cell.obs_event[oi]) {
                    const double hv = model_.hazard(path[k]);
                    if (!(hv > 0.0)) return kNegInf;
                    acc += std::log(hv);
                }
                ++oi;
            }
            if (k + 1 < times.size())
                lambda += model_.hazard(path[k]) * (times[k + 1] - times[k]);
        }
        return acc;
    }

    double total_loglik_current() const {
        double acc = 0.0;
        for (const auto& L : latents_)
            for (const auto& cell : L.cells) acc += cell_loglik(L, cell, likelihood_path(L, cell));
        return acc;
    }

    std::span<const double> likelihood_path(const LatentWork& L, const CellWork& cell) const {
        if (par_ == Parametrization::FullyNonCentered || sigma_unknown_) return cell.recon;
        return L.values;
    }

    /// Change in the cell log-likelihood when the likelihood path changes
    /// exactly at node indices [c1, c2]; new_vals[k - c1] is the new value at
    /// node k. Only block-local terms plus one shared cumulative-hazard
    /// correction for observations past the block are needed -- everything
    /// else cancels.
    double loglik_delta(const LatentWork& L, const CellWork& cell,
                        std::span<const double> old_path, std::span<const double> new_vals,
                        std::size_t c1, std::size_t c2) const {
        if (cell.obs_node.empty()) return 0.0;
        const auto times = std::span<const double>(L.grid.nodes());
        const std::size_t n = times.size();
        // prefix of the change in the hazard integral over [c1, k]
        L.scratch_prefix.resize(c2 - c1 + 1);
        double cum = 0.0;
        for (std::size_t k = c1; k <= c2; ++k) {
            if (k + 1 < n)
                cum += (model_.hazard(new_vals[k - c1]) - model_.hazard(old_path[k])) *
                       (times[k + 1] - times[k]);
            L.scratch_prefix[k - c1] = cum;
        }
        double delta = 0.0;
        auto it = std::lower_bound(cell.obs_node.begin(), cell.obs_node.end(), c1);
        for (; it != cell.obs_node.end() && *it <= c2; ++it) {
            const std::size_t node = *it;
            const std::size_t oi = static_cast<std::size_t>(it - cell.obs_node.begin());
            if (cell.obs_event[oi]) {
                const double hn = model_.hazard(new_vals[node - c1]);
                if (!(hn > 0.0)) return kNegInf;
                delta += std::log(hn) - std::log(model_.hazard(old_path[node]));
            }
            if (node > c1) delta -= L.scratch_prefix[node - 1 - c1];
        }
        const std::size_t beyond = cell.count_after[c2 + 1];
        if (beyond > 0) delta -= static_cast<double>(beyond) * L.scratch_prefix[c2 - c1];
        return delta;
    }

    // ---- parameter updates ----------------------------------------------------

    void conjugate_block_update() {
        std::vector<PathWindow> windows;
        windows.reserve(latents_.size());
        for (const auto& L : latents_) {
            const auto src = sigma_unknown_ ? std::span<const double>(L.cells[0].recon)
                                            : std::span<const double>(L.values);
            windows.push_back(PathWindow{L.grid.nodes(), src, L.span_end});
        }
        const auto nonlinear =
            std::span<const double>(theta_).subspan(model_.drift.linear_count());
        auto draw = conjugate_theta_update(model_.drift, nonlinear, sigma_, windows,
                                           *model_.prior.block, param_rng_);
        std::copy(draw.begin(), draw.end(), theta_.begin());
        auto& stat = accept_["theta_conjugate"];
        ++stat.attempts;
        ++stat.accepts;
    }

    /// Joint independence update of the leading block with proposal = prior
    /// (used under ncp, where the likelihood depends on theta through the
    /// reconstruction and conjugacy is lost). Prior and proposal cancel.
    void block_independence_update() {
        auto cand_block = model_.prior.block->sample(param_rng_);
        const double u = param_rng_.uniform();
        std::vector<double> cand(theta_);
        std::copy(cand_block.begin(), cand_block.end(), cand.begin());
        double log_ratio;
        if (par_ == Parametrization::FullyNonCentered)
            log_ratio = ncp_loglik(cand) - ncp_loglik(theta_);
        else
            log_ratio = girsanov_all_latents(cand) - girsanov_all_latents(theta_);
        auto& stat = accept_["theta_block"];
        ++stat.attempts;
        if (std::log(u) < log_ratio) {
            std::copy(cand_block.begin(), cand_block.end(), theta_.begin());
            if (par_ == Parametrization::FullyNonCentered) rebuild_span_recon();
            ++stat.accepts;
        }
    }

    void scalar_update(std::size_t s) {
        const std::size_t idx = model_.prior.block_dim() + s;
        ProposalSpec spec = ProposalSpec::use_prior();
        if (auto it = model_.proposal_hints.find(s); it != model_.proposal_hints.end())
            spec = it->second;
        if (auto it = cfg_.scalar_proposals.find(s); it != cfg_.scalar_proposals.end())
            spec = it->second;
        const auto proposal = make_scalar_proposal(spec, model_.prior.scalars[s]);
        const ScalarPrior& prior = model_.prior.scalars[s];

        std::function<double(double)> log_target;
        if (par_ == Parametrization::FullyNonCentered) {
            log_target = [this, idx, &prior](double v) {
                const double lp = log_density(prior, v);
                if (lp == kNegInf) return lp;
                std::vector<double> cand(theta_);
                cand[idx] = v;
                return lp + ncp_loglik(cand);
            };
        } else {
            log_target = [this, idx, &prior](double v) {
                const double lp = log_density(prior, v);
                if (lp == kNegInf) return lp;
                std::vector<double> cand(theta_);
                cand[idx] = v;
                return lp + girsanov_all_latents(cand);
            };
        }
        const auto step = independence_update(theta_[idx], proposal, log_target, param_rng_);
        auto& stat = accept_["theta_" + model_.drift.names()[idx]];
        ++stat.attempts;
        if (step.accepted) {
            theta_[idx] = step.value;
            if (par_ == Parametrization::FullyNonCentered) rebuild_span_recon();
            ++stat.accepts;
        }
    }

    /// Sum over latents of the discretized Girsanov weight of the latent path
    /// under candidate parameters, over the update span.
    double girsanov_all_latents(std::span<const double> cand) const {
        double acc = 0.0;
        for (const auto& L : latents_) {
            const auto times = std::span<const double>(L.grid.nodes());
            if (sigma_unknown_) {
                const double s = sigma_;
                acc += girsanov_logdensity_core(
                    times, L.values,
                    [&](double xd) { return model_.drift.value(model_.x0 + s * xd, cand) / s; },
                    1.0, 0, L.span_end);
            } else {
                acc += girsanov_logdensity_core(
                    times, L.values, [&](double x) { return model_.drift.value(x, cand); },
                    model_.sigma, 0, L.span_end);
            }
        }
        return acc;
    }

    /// Likelihood under candidate theta with paths rebuilt over the update
    /// span (ncp only); touches nothing beyond [0, span_end].
    double ncp_loglik(std::span<const double> cand) const {
        double acc = 0.0;
        for (const auto& L : latents_) {
            const auto times = std::span<const double>(L.grid.nodes());
            for (const auto& cell : L.cells) {
                L.scratch_b.resize(L.span_end + 1);
                L.scratch_b[0] = model_.cell_x0(cell.cov_cell, cand);
                for (std::size_t k = 0; k + 1 <= L.span_end; ++k) {
                    const double b = model_.drift_value(cell.cov_cell, L.scratch_b[k], cand);
                    if (!std::isfinite(b))
                        throw std::runtime_error("ncp likelihood: drift not finite");
                    L.scratch_b[k + 1] = L.scratch_b[k] + b * (times[k + 1] - times[k]) +
                                         sigma_ * (L.values[k + 1] - L.values[k]);
                }
                acc += cell_loglik(L, cell, L.scratch_b);
                if (acc == kNegInf) return acc;
            }
        }
        return acc;
    }

    /// Rebuild recon over [0, span_end] (ncp after accepted theta moves).
    void rebuild_span_recon() {
        for (auto& L : latents_) {
            const auto times = std::span<const double>(L.grid.nodes());
            for (auto& cell : L.cells) {
                cell.recon[0] = model_.cell_x0(cell.cov_cell, theta_);
                for (std::size_t k = 0; k + 1 <= L.span_end; ++k) {
                    const double b = model_.drift_value(cell.cov_cell, cell.recon[k], theta_);
                    cell.recon[k + 1] = cell.recon[k] + b * (times[k + 1] - times[k]) +
                                        sigma_ * (L.values[k + 1] - L.values[k]);
                }
            }
        }
    }

    // ---- latent updates --------------------------------------------------------

    double proposal_sigma() const {
        if (par_ == Parametrization::FullyNonCentered || sigma_unknown_) return 1.0;
        return model_.sigma;
    }

    void apply_block(std::size_t li, const Block& blk, std::span<const double> proposed) {
        auto& L = latents_[li];
        std::copy(proposed.begin(), proposed.end(), L.values.begin() + blk.lo + 1);
        if (par_ == Parametrization::FullyNonCentered || sigma_unknown_) {
            // keep recon in step with the latent over the span
            const auto times = std::span<const double>(L.grid.nodes());
            for (auto& cell : L.cells) {
                if (sigma_unknown_) {
                    const std::size_t c2 = blk.free_end ? blk.hi : blk.hi - 1;
                    for (std::size_t k = blk.lo + 1; k <= c2; ++k)
                        cell.recon[k] = model_.x0 + sigma_ * L.values[k];
                } else {
                    for (std::size_t k = blk.lo; k + 1 <= L.span_end; ++k) {
                        const double b = model_.drift_value(cell.cov_cell, cell.recon[k], theta_);
                        cell.recon[k + 1] = cell.recon[k] + b * (times[k + 1] - times[k]) +
                                            sigma_ * (L.values[k + 1] - L.values[k]);
                    }
                }
            }
        }
    }

    /// Redraw the latent beyond the update span as a standard Brownian motion
    /// (its exact conditional under pnc/ncp) and rebuild the path tail.
    void redraw_tail(std::size_t li) {
        auto& L = latents_[li];
        if (L.span_end + 1 >= L.grid.size()) return;
        if (par_ == Parametrization::Centered && !sigma_unknown_) return;  // span covers everything
        const auto times = std::span<const double>(L.grid.nodes());
        fill_free_walk(times.subspan(L.span_end), L.values[L.span_end], 1.0, L.tail_rng,
                       std::span<double>(L.values).subspan(L.span_end + 1));
        auto& stat = accept_["path_tail"];
        ++stat.attempts;
        ++stat.accepts;
    }

    // ---- recording ---------------------------------------------------------------

    Trace make_trace_skeleton() {
        Trace t;
        t.seed = cfg_.seed;
        t.theta_names = model_.drift.names();
        t.has_sigma = sigma_unknown_;
        t.cell_labels = cell_labels_;
        out_nodes_.clear();
        for (const auto& L : latents_) {
            for (std::size_t c = 0; c < L.cells.size(); ++c) {
                // snap output nodes to the uniform dt lattice so that latents
                // sharing an origin, step and horizon report identical times
                std::vector<std::size_t> idx;
                const double t0 = L.grid.front(), t1 = L.grid.back();
                for (std::size_t k = 0; k < cfg_.curve_nodes; ++k) {
                    const double target =
                        t0 + (t1 - t0) * static_cast<double>(k) /
                                 static_cast<double>(cfg_.curve_nodes - 1);
                    const double snapped =
                        t0 + std::round((target - t0) / cfg_.dt) * cfg_.dt;
                    std::size_t j;
                    if (const auto found = L.grid.find(snapped); found && snapped < t1)
                        j = *found;
                    else
                        j = L.grid.size() - 1;
                    if (idx.empty() || j > idx.back()) idx.push_back(j);
                }
                std::vector<double> out_times;
                for (const std::size_t j : idx) out_times.push_back(L.grid[j]);
                t.curve_times.push_back(std::move(out_times));
                out_nodes_.push_back(std::move(idx));
            }
        }
        t.survival_draws.resize(cell_labels_.size());
        t.hazard_draws.resize(cell_labels_.size());
        t.density_draws.resize(cell_labels_.size());
        return t;
    }

    void record(Trace& t, std::uint64_t iteration, bool store_curves) {
        t.iterations.push_back(iteration);
        t.theta.push_back(theta_);
        if (sigma_unknown_) t.sigma.push_back(sigma_);
        t.loglik.push_back(total_loglik_current());
        if (!cfg_.record_curves || !store_curves) return;
        std::size_t flat = 0;
        for (const auto& L : latents_) {
            const auto times = std::span<const double>(L.grid.nodes());
            for (const auto& cell : L.cells) {
                const auto& idx = out_nodes_[flat];
                std::vector<double> surv(idx.size()), haz(idx.size()), dens(idx.size());
                double lambda = 0.0;
                std::size_t pos = 0;
                for (std::size_t k = 0; k < times.size() && pos < idx.size(); ++k) {
                    if (k == idx[pos]) {
                        const double s = std::exp(-lambda);
                        const double h = model_.hazard(cell.recon[k]);
                        surv[pos] = s;
                        haz[pos] = h;
                        dens[pos] = h * s;
                        ++pos;
                    }
                    if (k + 1 < times.size())
                        lambda += model_.hazard(cell.recon[k]) * (times[k + 1] - times[k]);
                }
                t.survival_draws[flat].push_back(std::move(surv));
                t.hazard_draws[flat].push_back(std::move(haz));
                t.density_draws[flat].push_back(std::move(dens));
                ++flat;
            }
        }
    }

    // ---- members -------------------------------------------------------------

    ModelInstance model_;
    SamplerConfig cfg_;
    Parametrization par_ = Parametrization::Centered;
    bool sigma_unknown_ = false;
    std::vector<double> theta_;
    double sigma_ = 1.0;
    Rng param_rng_;
    Rng root_;
    std::vector<LatentWork> latents_;
    std::vector<std::string> cell_labels_;
    std::vector<std::vector<std::size_t>> out_nodes_;  // per flat cell
    std::map<std::string, AcceptStat> accept_;
};

/// Run the full Hastings-within-Gibbs chain; deterministic given config.seed.
inline Trace run_chain(const ModelInstance& model, const SurvivalDataset& data,
                       const SamplerConfig& config) {
    data.validate();
    Sampler sampler(model, data, config);
    return sampler.run();
}

}  // namespace diffsurv
