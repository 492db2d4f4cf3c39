#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffsurv/brownian.hpp"
#include "diffsurv/euler.hpp"
#include "diffsurv/kaplan_meier.hpp"
#include "diffsurv/mcmc.hpp"
#include "diffsurv/model.hpp"
#include "diffsurv/summary.hpp"
#include "diffsurv/survival.hpp"
#include "diffsurv/survival_data.hpp"

namespace diffsurv {

// ---------------------------------------------------------------------------
// CSV datasets
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline double parse_double(const std::string& s, std::size_t row, const std::string& column) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("unparseable value '" + s + "' at row " + std::to_string(row) +
                                    ", column '" + column + "'");
    }
}

}  // namespace detail

/// Columns: time (positive, required), status (1=event, 0=censored, required),
/// group (string, optional); any further numeric columns become named
/// covariates. Header row required; '#' lines are comments.
inline SurvivalDataset load_dataset_csv(const std::string& path, double time_divisor = 1.0) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open dataset file: " + path);
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        const auto t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        header = detail::split_csv_line(t);
        break;
    }
    if (header.empty()) throw std::invalid_argument("dataset file has no header row: " + path);

    std::optional<std::size_t> time_col, status_col, group_col;
    std::vector<std::pair<std::size_t, std::string>> covariate_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "time") time_col = c;
        else if (header[c] == "status") status_col = c;
        else if (header[c] == "group") group_col = c;
        else covariate_cols.emplace_back(c, header[c]);
    }
    if (!time_col) throw std::invalid_argument("dataset is missing the required 'time' column");
    if (!status_col) throw std::invalid_argument("dataset is missing the required 'status' column");

    SurvivalDataset data;
    for (const auto& [c, name] : covariate_cols) data.covariate_names.push_back(name);
    std::size_t row = 0;
    while (std::getline(in, line)) {
        const auto t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        ++row;
        const auto fields = detail::split_csv_line(t);
        if (fields.size() != header.size())
            throw std::invalid_argument("row " + std::to_string(row) + " has " +
                                        std::to_string(fields.size()) + " fields, expected " +
                                        std::to_string(header.size()));
        Observation o;
        o.time = detail::parse_double(fields[*time_col], row, "time") / time_divisor;
        if (!std::isfinite(o.time) || !(o.time > 0.0))
            throw std::invalid_argument("nonpositive or non-finite time at row " +
                                        std::to_string(row) + ", column 'time'");
        const double status = detail::parse_double(fields[*status_col], row, "status");
        if (status != 0.0 && status != 1.0)
            throw std::invalid_argument("status must be 0 or 1 at row " + std::to_string(row) +
                                        ", column 'status'");
        o.event = status == 1.0;
        if (group_col) o.group = fields[*group_col];
        for (const auto& [c, name] : covariate_cols)
            o.covariates.push_back(detail::parse_double(fields[c], row, name));
        data.observations.push_back(std::move(o));
    }
    data.validate();
    return data;
}

inline void write_dataset_csv(const std::string& path, const SurvivalDataset& data,
                              std::optional<std::uint64_t> seed = std::nullopt) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    out.precision(17);
    if (seed) out << "# seed=" << *seed << "\n";
    out << "time,status";
    if (std::any_of(data.observations.begin(), data.observations.end(),
                    [](const Observation& o) { return !o.group.empty(); }))
        out << ",group";
    for (const auto& name : data.covariate_names) out << "," << name;
    out << "\n";
    const bool has_group =
        std::any_of(data.observations.begin(), data.observations.end(),
                    [](const Observation& o) { return !o.group.empty(); });
    for (const auto& o : data.observations) {
        out << o.time << "," << (o.event ? 1 : 0);
        if (has_group) out << "," << o.group;
        for (const double z : o.covariates) out << "," << z;
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Embedded clinical-trial dataset
// ---------------------------------------------------------------------------

/// Remission lengths (weeks) from the classic acute-leukemia maintenance
/// trial: 21 patients on 6-MP (12 right-censored) and 21 on placebo (fully
/// observed).
inline SurvivalDataset embedded_leukemia_weeks() {
    SurvivalDataset data;
    data.time_unit = "weeks";
    const std::vector<std::pair<double, bool>> mp6 = {
        {6, true},   {6, true},   {6, true},   {6, false},  {7, true},   {9, false},
        {10, true},  {10, false}, {11, false}, {13, true},  {16, true},  {17, false},
        {19, false}, {20, false}, {22, true},  {23, true},  {25, false}, {32, false},
        {32, false}, {34, false}, {35, false}};
    const std::vector<double> placebo = {1, 1, 2, 2,  3,  4,  4,  5,  5,  8, 8,
                                         8, 8, 11, 11, 12, 12, 15, 17, 22, 23};
    for (const auto& [t, ev] : mp6) data.observations.push_back({t, ev, "6-MP", {}});
    for (const double t : placebo) data.observations.push_back({t, true, "placebo", {}});
    data.validate();
    return data;
}

/// Same observations expressed as fractions of a year (weeks / 52).
inline SurvivalDataset embedded_leukemia() {
    SurvivalDataset data = embedded_leukemia_weeks();
    data.time_unit = "fractions of a year (weeks/52)";
    for (auto& o : data.observations) o.time /= 52.0;
    return data;
}

// ---------------------------------------------------------------------------
// Synthetic data generation
// ---------------------------------------------------------------------------

struct SimulatedData {
    SurvivalDataset data;
    std::vector<DiffusionPath> paths;  // one generating path per cell
    std::vector<std::string> cell_labels;
};

/// Draw one latent path per cell from the model at the given parameters and
/// sample n observations from the induced event-time law, right-censoring at
/// `censor`. Covariate cells share a single Brownian motion; counts are split
/// evenly across cells unless given.
inline SimulatedData simulate_dataset(const ModelInstance& model, std::span<const double> theta,
                                      std::size_t n, double censor, double horizon, double dt,
                                      std::uint64_t seed,
                                      std::vector<std::size_t> cell_counts = {}) {
    if (!(horizon >= censor)) throw std::invalid_argument("simulate_dataset: horizon < censor");
    Rng root(seed);
    Rng path_rng = root.fork(11);
    Rng event_rng = root.fork(12);
    const TimeGrid grid = make_grid(model.time_origin, horizon, dt);
    const std::size_t q = model.cell_count();
    if (cell_counts.empty()) {
        cell_counts.assign(q, n / q);
        for (std::size_t k = 0; k < n % q; ++k) ++cell_counts[k];
    }
    if (cell_counts.size() != q)
        throw std::invalid_argument("simulate_dataset: cell_counts size mismatch");

    SimulatedData out;
    const auto noise = sample_noise(grid, path_rng);  // shared across cells
    for (std::size_t cell = 0; cell < q; ++cell) {
        std::vector<double> values(grid.size());
        values[0] = model.cell_x0(cell, theta);
        euler_recursion(
            grid.nodes(), [&](double x) { return model.drift_value(cell, x, theta); },
            model.sigma, noise.increments, values);
        DiffusionPath path{grid, std::move(values)};
        for (std::size_t i = 0; i < cell_counts[cell]; ++i) {
            const auto draw = sample_event_time(path, model.hazard, censor, event_rng);
            Observation o;
            o.time = draw.time;
            o.event = draw.event;
            if (model.covariates) {
                o.covariates = model.covariates->cells[cell];
                out.data.covariate_names = model.covariates->names;
            }
            out.data.observations.push_back(std::move(o));
        }
        out.cell_labels.push_back(model.covariates ? model.covariates->cell_label(cell) : "all");
        out.paths.push_back(std::move(path));
    }
    out.data.time_unit = "model time";
    return out;
}

// ---------------------------------------------------------------------------
// Flat dotted-key configuration files
// ---------------------------------------------------------------------------

/// `key = value` per line; '#' starts a comment. Keys are dotted paths
/// (model.type, prior.theta1.mean, sampler.iterations, ...).
class ConfigMap {
public:
    ConfigMap() = default;

    static ConfigMap from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("cannot open config file: " + path);
        ConfigMap cfg;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const auto t = detail::trim(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            " is not key = value");
            cfg.set(detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get(const std::string& key, const std::string& fallback = "") const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end())
            throw std::invalid_argument("config is missing required key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : detail::parse_double(it->second, 0, key);
    }

    double require_double(const std::string& key) const {
        return detail::parse_double(require(key), 0, key);
    }

    std::size_t get_size(const std::string& key, std::size_t fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const double v = detail::parse_double(it->second, 0, key);
        if (v < 0 || v != std::floor(v))
            throw std::invalid_argument("config key '" + key + "' must be a nonnegative integer");
        return static_cast<std::size_t>(v);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw std::invalid_argument("config key '" + key + "' must be true/false");
    }

    const std::map<std::string, std::string>& raw() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// Build the model a config describes. Covariate models need the dataset (for
/// cells and centering shares), so it is passed when available.
inline ModelInstance build_model_from_config(const ConfigMap& cfg,
                                             const SurvivalDataset* data = nullptr) {
    const std::string type = cfg.require("model.type");
    ModelInstance m;
    if (type == "toy") {
        m = toy_model();
    } else if (type == "gompertz") {
        m = gompertz_perturbation(
            GaussianPrior{cfg.get_double("prior.theta.mean", 0.0),
                          cfg.get_double("prior.theta.var", 5.0)},
            cfg.require_double("model.sigma"), cfg.require_double("model.x0"));
    } else if (type == "weibull") {
        m = weibull_perturbation(
            GaussianPrior{cfg.get_double("prior.theta1.mean", 0.0),
                          cfg.get_double("prior.theta1.var", 5.0)},
            UniformPrior{cfg.get_double("prior.theta2.lo", 0.0),
                         cfg.get_double("prior.theta2.hi", 1.0)},
            cfg.require_double("model.sigma"), cfg.require_double("model.x0"));
    } else if (type == "pareto") {
        m = pareto_perturbation(
            GaussianPrior{cfg.get_double("prior.theta.mean", 0.0),
                          cfg.get_double("prior.theta.var", 5.0)},
            cfg.require_double("model.sigma"), cfg.require_double("model.x_lambda"),
            cfg.require_double("model.lambda"));
    } else if (type == "covariate_weibull") {
        if (!data)
            throw std::invalid_argument("covariate_weibull models need a dataset to enumerate cells");
        std::vector<std::size_t> drift_covs;
        std::stringstream ss(cfg.get("model.drift_covariates", ""));
        std::string name;
        while (std::getline(ss, name, ',')) {
            name = detail::trim(name);
            if (name.empty()) continue;
            const auto it = std::find(data->covariate_names.begin(), data->covariate_names.end(), name);
            if (it == data->covariate_names.end())
                throw std::invalid_argument("model.drift_covariates names unknown covariate '" +
                                            name + "'");
            drift_covs.push_back(static_cast<std::size_t>(it - data->covariate_names.begin()));
        }
        m = build_covariate_model(
            CovariateModelSpec::from_dataset(*data, drift_covs),
            GaussianPrior{cfg.get_double("prior.coef.mean", 0.0),
                          cfg.get_double("prior.coef.var", 5.0)},
            UniformPrior{cfg.get_double("prior.theta2.lo", 0.0),
                         cfg.get_double("prior.theta2.hi", 1.0)},
            cfg.require_double("model.sigma"));
    } else {
        throw std::invalid_argument("unknown model.type '" + type + "'");
    }
    if (cfg.get_bool("model.sigma.unknown", false)) {
        m.sigma_mode = SigmaMode::Unknown;
        m.sigma_prior = ExponentialPrior{cfg.get_double("model.sigma.prior.mean", 1.0)};
    }
    m.pool_groups = cfg.get("data.grouping", "by_label") == "pooled";
    return m;
}

inline SamplerConfig build_sampler_config(const ConfigMap& cfg) {
    SamplerConfig sc;
    sc.iterations = cfg.get_size("sampler.iterations", sc.iterations);
    sc.burn_in = cfg.get_size("sampler.burnin", sc.iterations / 10);
    sc.thin = cfg.get_size("sampler.thin", sc.thin);
    sc.dt = cfg.get_double("sampler.dt", sc.dt);
    sc.block_length = cfg.get_double("sampler.block", sc.block_length);
    sc.horizon = cfg.get_double("sampler.horizon", sc.horizon);
    sc.parametrization = parse_parametrization(cfg.get("sampler.parametrization", "pnc"));
    sc.seed = cfg.get_size("sampler.seed", sc.seed);
    sc.sigma_walk_step = cfg.get_double("sampler.sigma_step", sc.sigma_walk_step);
    sc.curve_nodes = cfg.get_size("sampler.curve_nodes", sc.curve_nodes);
    sc.curve_max_draws = cfg.get_size("sampler.curve_max_draws", sc.curve_max_draws);
    const std::string prop = cfg.get("proposal.theta2", "");
    if (!prop.empty()) {
        if (prop == "prior") {
            sc.scalar_proposals[0] = ProposalSpec::use_prior();
        } else if (prop.rfind("beta:", 0) == 0) {
            const auto rest = prop.substr(5);
            const auto comma = rest.find(',');
            if (comma == std::string::npos)
                throw std::invalid_argument("proposal.theta2 beta form is beta:a,b");
            sc.scalar_proposals[0] =
                ProposalSpec::beta(detail::parse_double(rest.substr(0, comma), 0, "proposal"),
                                   detail::parse_double(rest.substr(comma + 1), 0, "proposal"));
        } else {
            throw std::invalid_argument("proposal.theta2 must be 'prior' or 'beta:a,b'");
        }
    }
    sc.validate();
    return sc;
}

// ---------------------------------------------------------------------------
// Trace and curve export
// ---------------------------------------------------------------------------

inline void write_trace_csv(const std::string& path, const Trace& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    out.precision(17);
    out << "# seed=" << trace.seed << "\n";
    for (const auto& [name, stat] : trace.acceptance)
        out << "# acceptance " << name << "=" << stat.rate() << " (" << stat.accepts << "/"
            << stat.attempts << ")\n";
    out << "iteration";
    for (const auto& name : trace.theta_names) out << "," << name;
    if (trace.has_sigma) out << ",sigma";
    out << ",loglik\n";
    for (std::size_t i = 0; i < trace.retained(); ++i) {
        out << trace.iterations[i];
        for (const double v : trace.theta[i]) out << "," << v;
        if (trace.has_sigma) out << "," << trace.sigma[i];
        out << "," << trace.loglik[i] << "\n";
    }
}

inline void write_curve_csv(const std::string& path, const CurveEstimate& est,
                            std::uint64_t seed) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write curve file: " + path);
    out.precision(17);
    out << "# seed=" << seed << "\n";
    out << "time,mean,lo,hi\n";
    for (std::size_t k = 0; k < est.times.size(); ++k)
        out << est.times[k] << "," << est.mean[k] << "," << est.band_lo[k] << "," << est.band_hi[k]
            << "\n";
}

inline void write_step_curve_csv(const std::string& path, const StepCurve& curve) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write curve file: " + path);
    out.precision(17);
    out << "time,survival\n";
    out << 0 << "," << 1 << "\n";
    for (std::size_t k = 0; k < curve.times.size(); ++k)
        out << curve.times[k] << "," << curve.values[k] << "\n";
}

/// Trace re-loaded from CSV (for the diagnostics subcommand).
struct LoadedTrace {
    std::vector<std::string> columns;                 // excluding 'iteration'
    std::vector<std::vector<double>> series;          // per column
    std::vector<std::string> acceptance_comments;
};

inline LoadedTrace load_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open trace file: " + path);
    LoadedTrace t;
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        const auto s = detail::trim(line);
        if (s.empty()) continue;
        if (s[0] == '#') {
            if (s.find("acceptance") != std::string::npos)
                t.acceptance_comments.push_back(detail::trim(s.substr(1)));
            continue;
        }
        header = detail::split_csv_line(s);
        break;
    }
    if (header.empty() || header[0] != "iteration")
        throw std::invalid_argument("not a trace CSV (expected an 'iteration' column): " + path);
    t.columns.assign(header.begin() + 1, header.end());
    t.series.resize(t.columns.size());
    std::size_t row = 0;
    while (std::getline(in, line)) {
        const auto s = detail::trim(line);
        if (s.empty() || s[0] == '#') continue;
        ++row;
        const auto fields = detail::split_csv_line(s);
        if (fields.size() != header.size())
            throw std::invalid_argument("trace row " + std::to_string(row) + " is malformed");
        for (std::size_t c = 1; c < fields.size(); ++c)
            t.series[c - 1].push_back(detail::parse_double(fields[c], row, header[c]));
    }
    return t;
}

}  // namespace diffsurv
