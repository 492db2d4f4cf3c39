#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "diffsurv/bayes_factor.hpp"
#include "diffsurv/io.hpp"
#include "diffsurv/kaplan_meier.hpp"
#include "diffsurv/mcmc.hpp"
#include "diffsurv/model.hpp"
#include "diffsurv/plot.hpp"
#include "diffsurv/summary.hpp"

namespace diffsurv {

namespace cli_detail {

/// Files written so far; removed on failure so no partial outputs survive.
class OutputTracker {
public:
    std::string track(const std::filesystem::path& p) {
        files_.push_back(p);
        return p.string();
    }
    void discard_all() {
        for (const auto& p : files_) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
    }

private:
    std::vector<std::filesystem::path> files_;
};

inline std::string sanitize_label(const std::string& label) {
    std::string out;
    for (const char c : label)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
    return out.empty() ? "all" : out;
}

inline std::string one_line(const std::string& msg) {
    std::string out = msg;
    std::replace(out.begin(), out.end(), '\n', ';');
    return out;
}

inline SurvivalDataset resolve_dataset(const std::string& source, double divisor) {
    if (source == "leukemia") return embedded_leukemia();
    if (source == "leukemia_weeks") return embedded_leukemia_weeks();
    return load_dataset_csv(source, divisor);
}

/// Observations per cell label, matching the sampler's cell layout.
inline std::map<std::string, std::vector<Observation>> observations_by_cell(
    const ModelInstance& model, const SurvivalDataset& data) {
    std::map<std::string, std::vector<Observation>> out;
    if (model.covariates) {
        for (const auto& o : data.observations)
            out[model.covariates->cell_label(model.covariates->cell_of(o.covariates))].push_back(o);
    } else if (model.pool_groups) {
        out["all"] = data.observations;
    } else {
        for (const auto& o : data.observations)
            out[o.group.empty() ? "all" : o.group].push_back(o);
    }
    return out;
}

struct FitFlags {
    std::string config, data, out = ".", parametrization;
    std::int64_t iters = -1, burnin = -1, seed = -1, chains = 1;
    double dt = -1.0, block = -1.0, horizon = -1.0;
    bool plot = false;
};

inline int cmd_fit(const FitFlags& f, OutputTracker& tracker) {
    ConfigMap cfg = f.config.empty() ? ConfigMap{} : ConfigMap::from_file(f.config);
    if (!f.data.empty()) cfg.set("data.path", f.data);
    if (f.iters >= 0) cfg.set("sampler.iterations", std::to_string(f.iters));
    if (f.burnin >= 0) cfg.set("sampler.burnin", std::to_string(f.burnin));
    if (f.dt > 0) cfg.set("sampler.dt", std::to_string(f.dt));
    if (f.block > 0) cfg.set("sampler.block", std::to_string(f.block));
    if (f.horizon > 0) cfg.set("sampler.horizon", std::to_string(f.horizon));
    if (f.seed >= 0) cfg.set("sampler.seed", std::to_string(f.seed));
    if (!f.parametrization.empty()) cfg.set("sampler.parametrization", f.parametrization);

    const auto data = resolve_dataset(cfg.require("data.path"), cfg.get_double("data.time_divisor", 1.0));
    const auto model = build_model_from_config(cfg, &data);
    const auto sc = build_sampler_config(cfg);
    const double band_level = cfg.get_double("output.band_level", 0.90);
    const auto n_chains = static_cast<std::size_t>(std::max<std::int64_t>(1, f.chains));

    std::vector<Trace> traces(n_chains);
    std::vector<std::exception_ptr> errors(n_chains);
    {
        std::vector<std::thread> workers;
        for (std::size_t c = 0; c < n_chains; ++c) {
            workers.emplace_back([&, c] {
                try {
                    SamplerConfig chain_cfg = sc;
                    if (c > 0) chain_cfg.seed = Rng(sc.seed).fork(1000 + c).seed();
                    traces[c] = run_chain(model, data, chain_cfg);
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            });
        }
        for (auto& w : workers) w.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    const std::filesystem::path out_dir(f.out);
    std::filesystem::create_directories(out_dir);
    write_trace_csv(tracker.track(out_dir / "trace.csv"), traces[0]);
    for (std::size_t c = 1; c < n_chains; ++c)
        write_trace_csv(tracker.track(out_dir / ("trace_chain" + std::to_string(c) + ".csv")),
                        traces[c]);

    const auto km_by_cell = observations_by_cell(model, data);
    std::vector<PlotSeries> survival_series;
    std::vector<PlotOverlay> km_overlays;
    for (std::size_t cell = 0; cell < traces[0].cell_labels.size(); ++cell) {
        const auto& label = traces[0].cell_labels[cell];
        const auto fname = sanitize_label(label);
        // pool stored curve draws across chains
        auto pooled = [&](auto member) {
            std::vector<std::vector<double>> draws;
            for (const auto& t : traces) {
                const auto& src = (t.*member)[cell];
                draws.insert(draws.end(), src.begin(), src.end());
            }
            return draws;
        };
        const auto& times = traces[0].curve_times[cell];
        const auto surv =
            curve_posterior_mean(times, pooled(&Trace::survival_draws), band_level);
        const auto haz = curve_posterior_mean(times, pooled(&Trace::hazard_draws), band_level);
        const auto dens = curve_posterior_mean(times, pooled(&Trace::density_draws), band_level);
        write_curve_csv(tracker.track(out_dir / ("survival_" + fname + ".csv")), surv, sc.seed);
        write_curve_csv(tracker.track(out_dir / ("hazard_" + fname + ".csv")), haz, sc.seed);
        write_curve_csv(tracker.track(out_dir / ("density_" + fname + ".csv")), dens, sc.seed);
        survival_series.push_back(PlotSeries{surv, label});
        if (km_by_cell.count(label))
            km_overlays.push_back(PlotOverlay{kaplan_meier(km_by_cell.at(label)), label + " KM"});
    }
    if (f.plot)
        export_plot(survival_series, km_overlays,
                    tracker.track(out_dir / "fit_survival.svg"), "survival");
    std::cout << "fit: wrote trace and curves for " << traces[0].cell_labels.size()
              << " group(s) to " << out_dir.string() << "\n";
    return 0;
}

inline int cmd_simulate(const std::string& config, std::int64_t n, double censor,
                        std::int64_t seed, const std::string& out, OutputTracker& tracker) {
    ConfigMap cfg = config.empty() ? ConfigMap{} : ConfigMap::from_file(config);
    if (n >= 0) cfg.set("simulate.n", std::to_string(n));
    if (censor > 0) cfg.set("simulate.censor", std::to_string(censor));
    if (seed >= 0) cfg.set("sampler.seed", std::to_string(seed));

    const auto model = build_model_from_config(cfg, nullptr);
    const auto count = cfg.get_size("simulate.n", 200);
    const double cutoff = cfg.get_double("simulate.censor", 0.9);
    const double horizon = cfg.get_double("simulate.horizon", cutoff);
    const double dt = cfg.get_double("sampler.dt", 0.01);
    const auto the_seed = cfg.get_size("sampler.seed", 1);

    std::vector<double> theta = model.prior.mean();
    const std::string theta_str = cfg.get("simulate.theta", "");
    if (!theta_str.empty()) {
        theta.clear();
        std::stringstream ss(theta_str);
        std::string tok;
        while (std::getline(ss, tok, ',')) theta.push_back(detail::parse_double(tok, 0, "simulate.theta"));
        if (theta.size() != model.theta_dim())
            throw std::invalid_argument("simulate.theta has wrong dimension");
    }

    const auto sim = simulate_dataset(model, theta, count, cutoff, horizon, dt, the_seed);
    const std::filesystem::path out_dir(out);
    std::filesystem::create_directories(out_dir);
    write_dataset_csv(tracker.track(out_dir / "data.csv"), sim.data, the_seed);
    std::cout << "simulate: wrote " << sim.data.observations.size() << " observations ("
              << sim.data.event_count() << " events) to " << (out_dir / "data.csv").string()
              << "\n";
    return 0;
}

inline int cmd_km(const std::string& data_path, double divisor, const std::string& out, bool plot,
                  OutputTracker& tracker) {
    const auto data = resolve_dataset(data_path, divisor);
    const std::filesystem::path out_dir(out);
    std::filesystem::create_directories(out_dir);
    std::map<std::string, StepCurve> curves;
    for (const auto& label : data.group_labels()) {
        const auto obs = data.group(label);
        const auto key = label.empty() ? "all" : label;
        curves[key] = kaplan_meier(obs);
        write_step_curve_csv(tracker.track(out_dir / ("km_" + sanitize_label(key) + ".csv")),
                             curves[key]);
    }
    if (plot) {
        // shared grid: union of step times; KM evaluated there with zero-width bands
        std::vector<double> grid{0.0};
        for (const auto& [label, c] : curves)
            grid.insert(grid.end(), c.times.begin(), c.times.end());
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        std::vector<PlotSeries> series;
        std::vector<PlotOverlay> overlays;
        for (const auto& [label, c] : curves) {
            CurveEstimate est;
            est.times = grid;
            for (const double t : grid) est.mean.push_back(c.at(t));
            est.band_lo = est.mean;
            est.band_hi = est.mean;
            series.push_back(PlotSeries{std::move(est), label});
            overlays.push_back(PlotOverlay{c, label + " steps"});
        }
        export_plot(series, overlays, tracker.track(out_dir / "km.svg"), "survival");
    }
    std::cout << "km: wrote " << curves.size() << " curve(s) to " << out_dir.string() << "\n";
    return 0;
}

inline int cmd_bf(const std::string& config_a, const std::string& config_b,
                  const std::string& data_path, std::int64_t samples, std::int64_t seed,
                  const std::string& out, OutputTracker& tracker) {
    ConfigMap cfg_a = ConfigMap::from_file(config_a);
    ConfigMap cfg_b = ConfigMap::from_file(config_b);
    std::string source = data_path;
    if (source.empty()) source = cfg_a.get("data.path", cfg_b.get("data.path", ""));
    if (source.empty()) throw std::invalid_argument("bf: no dataset given (--data or data.path)");
    const auto data = resolve_dataset(source, cfg_a.get_double("data.time_divisor", 1.0));
    const auto m1 = build_model_from_config(cfg_a, &data);
    const auto m2 = build_model_from_config(cfg_b, &data);
    const auto n = samples > 0 ? static_cast<std::size_t>(samples)
                               : cfg_a.get_size("bf.samples", 100000);
    const auto the_seed =
        seed >= 0 ? static_cast<std::uint64_t>(seed) : cfg_a.get_size("sampler.seed", 1);
    const double dt = cfg_a.get_double("sampler.dt", 0.01);

    const auto r = bayes_factor_prior_mc(m1, m2, data, n, dt, the_seed);
    const std::filesystem::path out_dir(out);
    std::filesystem::create_directories(out_dir);
    std::ofstream os(tracker.track(out_dir / "bf.csv"));
    os.precision(12);
    os << "# seed=" << the_seed << "\n";
    os << "log_ml_1,log_ml_2,log_bf,bf,se_log_bf,n_samples\n";
    os << r.log_ml_1 << "," << r.log_ml_2 << "," << r.log_bf << "," << r.bf << "," << r.se_log_bf
       << "," << r.n_samples << "\n";
    std::cout << "bf: BF = " << r.bf << " (log BF " << r.log_bf << " +/- " << r.se_log_bf
              << ", n=" << r.n_samples << ")\n";
    return 0;
}

inline int cmd_summarize(const std::string& trace_path, std::int64_t lags,
                         const std::string& out, OutputTracker& tracker) {
    const auto trace = load_trace_csv(trace_path);
    const auto max_lag = static_cast<std::size_t>(lags > 0 ? lags : 50);
    std::ostringstream os;
    os << "diagnostics for " << trace_path << "\n\n";
    for (const auto& c : trace.acceptance_comments) os << c << "\n";
    if (!trace.acceptance_comments.empty()) os << "\n";
    std::vector<Diagnostics> diags;
    os << "param            ESS        IAT\n";
    for (std::size_t c = 0; c < trace.columns.size(); ++c) {
        const auto& s = trace.series[c];
        if (s.size() <= max_lag + 1) {
            os << trace.columns[c] << "  (series too short)\n";
            diags.push_back({});
            continue;
        }
        auto d = acf_ess(s, max_lag);
        os << trace.columns[c];
        for (std::size_t pad = trace.columns[c].size(); pad < 12; ++pad) os << ' ';
        os << "  " << d.ess << "  " << d.iat << (d.constant_series ? "  (constant)" : "") << "\n";
        diags.push_back(std::move(d));
    }
    os << "\nACF (rows = lag)\nlag";
    for (const auto& c : trace.columns) os << "," << c;
    os << "\n";
    for (std::size_t k = 0; k <= max_lag; ++k) {
        os << k;
        for (const auto& d : diags) os << "," << (k < d.acf.size() ? d.acf[k] : 0.0);
        os << "\n";
    }
    if (out.empty()) {
        std::cout << os.str();
    } else {
        const std::filesystem::path out_dir(out);
        std::filesystem::create_directories(out_dir);
        std::ofstream file(tracker.track(out_dir / "diagnostics.txt"));
        file << os.str();
        std::cout << "summarize: wrote " << (out_dir / "diagnostics.txt").string() << "\n";
    }
    return 0;
}

}  // namespace cli_detail

/// Entry point; argv excludes the program name.
inline int run_cli(std::vector<std::string> argv) {
    CLI::App app{"latent-diffusion survival models: simulation, MCMC fitting and summaries"};
    app.require_subcommand(1);

    cli_detail::FitFlags fit;
    auto* fit_cmd = app.add_subcommand("fit", "run the Hastings-within-Gibbs sampler");
    fit_cmd->add_option("--config", fit.config, "config file (dotted keys; see README)");
    fit_cmd->add_option("--data", fit.data, "dataset CSV path, or leukemia|leukemia_weeks");
    fit_cmd->add_option("--iters", fit.iters, "MCMC iterations");
    fit_cmd->add_option("--burnin", fit.burnin, "burn-in iterations");
    fit_cmd->add_option("--dt", fit.dt, "path discretization step");
    fit_cmd->add_option("--block", fit.block, "block knot spacing");
    fit_cmd->add_option("--parametrization", fit.parametrization, "centered|pnc|ncp");
    fit_cmd->add_option("--horizon", fit.horizon, "time horizon (default: last observation)");
    fit_cmd->add_option("--seed", fit.seed, "random seed");
    fit_cmd->add_option("--out", fit.out, "output directory");
    fit_cmd->add_option("--chains", fit.chains, "number of parallel chains");
    fit_cmd->add_flag("--plot", fit.plot, "also write an SVG of the survival curves");

    std::string sim_config, sim_out = ".";
    std::int64_t sim_n = -1, sim_seed = -1;
    double sim_censor = -1.0;
    auto* sim_cmd = app.add_subcommand("simulate", "generate synthetic censored data");
    sim_cmd->add_option("--config", sim_config, "config file");
    sim_cmd->add_option("--n", sim_n, "number of observations");
    sim_cmd->add_option("--censor", sim_censor, "censoring cut-off");
    sim_cmd->add_option("--seed", sim_seed, "random seed");
    sim_cmd->add_option("--out", sim_out, "output directory");

    std::string km_data, km_out = ".", km_config;
    double km_divisor = 1.0;
    bool km_plot = false;
    std::int64_t km_seed = -1;
    auto* km_cmd = app.add_subcommand("km", "Kaplan-Meier survival estimates per group");
    km_cmd->add_option("--data", km_data, "dataset CSV path, or leukemia|leukemia_weeks")
        ->required();
    km_cmd->add_option("--time-divisor", km_divisor, "divide loaded times by this");
    km_cmd->add_option("--out", km_out, "output directory");
    km_cmd->add_option("--config", km_config, "(accepted for uniformity)");
    km_cmd->add_option("--seed", km_seed, "(accepted for uniformity)");
    km_cmd->add_flag("--plot", km_plot, "also write an SVG");

    std::string bf_a, bf_b, bf_data, bf_out = ".";
    std::int64_t bf_samples = -1, bf_seed = -1;
    auto* bf_cmd = app.add_subcommand("bf", "Bayes factor between two model configs");
    bf_cmd->add_option("--config", bf_a, "config of model 1")->required();
    bf_cmd->add_option("--config2", bf_b, "config of model 2")->required();
    bf_cmd->add_option("--data", bf_data, "dataset CSV path, or leukemia|leukemia_weeks");
    bf_cmd->add_option("--samples", bf_samples, "prior Monte Carlo samples");
    bf_cmd->add_option("--seed", bf_seed, "random seed");
    bf_cmd->add_option("--out", bf_out, "output directory");

    std::string sum_trace, sum_out, sum_config;
    std::int64_t sum_lags = 50, sum_seed = -1;
    auto* sum_cmd = app.add_subcommand("summarize", "chain diagnostics from a trace CSV");
    sum_cmd->add_option("--trace", sum_trace, "trace CSV written by fit")->required();
    sum_cmd->add_option("--lags", sum_lags, "maximum ACF lag");
    sum_cmd->add_option("--out", sum_out, "output directory (default: stdout)");
    sum_cmd->add_option("--config", sum_config, "(accepted for uniformity)");
    sum_cmd->add_option("--seed", sum_seed, "(accepted for uniformity)");

    std::vector<const char*> argv_c;
    argv_c.push_back("diffsurv");
    for (const auto& a : argv) argv_c.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv_c.size()), argv_c.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    cli_detail::OutputTracker tracker;
    try {
        if (fit_cmd->parsed()) return cli_detail::cmd_fit(fit, tracker);
        if (sim_cmd->parsed())
            return cli_detail::cmd_simulate(sim_config, sim_n, sim_censor, sim_seed, sim_out,
                                            tracker);
        if (km_cmd->parsed())
            return cli_detail::cmd_km(km_data, km_divisor, km_out, km_plot, tracker);
        if (bf_cmd->parsed())
            return cli_detail::cmd_bf(bf_a, bf_b, bf_data, bf_samples, bf_seed, bf_out, tracker);
        if (sum_cmd->parsed())
            return cli_detail::cmd_summarize(sum_trace, sum_lags, sum_out, tracker);
    } catch (const std::exception& e) {
        tracker.discard_all();
        std::cerr << "error: " << cli_detail::one_line(e.what()) << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand given\n";
    return 1;
}

}  // namespace diffsurv
