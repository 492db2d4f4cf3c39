#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "diffsurv/cli.hpp"
#include "diffsurv/io.hpp"

using namespace diffsurv;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const auto dir = fs::temp_directory_path() / ("diffsurv_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& content) {
    const auto p = dir / name;
    std::ofstream out(p);
    out << content;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("load_dataset_csv: basic parsing") {
    const auto dir = fresh_dir("csv");
    const auto p = write_file(dir, "d.csv", "time,status\n0.5,1\n0.9,0\n");
    const auto data = load_dataset_csv(p.string());
    REQUIRE(data.observations.size() == 2);
    CHECK(data.observations[0].time == 0.5);
    CHECK(data.observations[0].event);
    CHECK(data.observations[1].time == 0.9);
    CHECK(!data.observations[1].event);
}

TEST_CASE("load_dataset_csv: group column makes a two-group dataset") {
    const auto dir = fresh_dir("csv_group");
    const auto p =
        write_file(dir, "d.csv", "time,status,group\n1.0,1,6MP\n2.0,0,placebo\n3.0,1,6MP\n");
    const auto data = load_dataset_csv(p.string());
    CHECK(data.group_labels() == std::vector<std::string>{"6MP", "placebo"});
    CHECK(data.group("6MP").size() == 2);
}

TEST_CASE("load_dataset_csv: extra numeric columns become covariates") {
    const auto dir = fresh_dir("csv_cov");
    const auto p = write_file(dir, "d.csv", "time,status,F,H\n1.0,1,0,1\n2.0,0,1,0\n");
    const auto data = load_dataset_csv(p.string());
    CHECK(data.covariate_names == std::vector<std::string>{"F", "H"});
    CHECK(data.observations[0].covariates == std::vector<double>{0.0, 1.0});
}

TEST_CASE("load_dataset_csv: errors name the offending row and column") {
    const auto dir = fresh_dir("csv_err");
    const auto bad_time = write_file(dir, "a.csv", "time,status\n-1,1\n");
    CHECK_THROWS_WITH_AS(load_dataset_csv(bad_time.string()),
                         doctest::Contains("row 1"), std::invalid_argument);
    const auto bad_cell = write_file(dir, "b.csv", "time,status\n0.5,maybe\n");
    CHECK_THROWS_WITH_AS(load_dataset_csv(bad_cell.string()),
                         doctest::Contains("status"), std::invalid_argument);
    const auto no_col = write_file(dir, "c.csv", "time\n0.5\n");
    CHECK_THROWS_WITH_AS(load_dataset_csv(no_col.string()),
                         doctest::Contains("status"), std::invalid_argument);
    CHECK_THROWS_AS(load_dataset_csv((dir / "missing.csv").string()), std::invalid_argument);
}

TEST_CASE("load_dataset_csv: time divisor rescales on load") {
    const auto dir = fresh_dir("csv_div");
    const auto p = write_file(dir, "d.csv", "time,status\n26,1\n");
    const auto data = load_dataset_csv(p.string(), 52.0);
    CHECK(data.observations[0].time == 0.5);
}

TEST_CASE("dataset CSV round trip preserves everything") {
    const auto sim =
        simulate_dataset(toy_model(), std::vector<double>{-1.4, -1.0}, 60, 0.9, 1.0, 0.01, 31);
    const auto dir = fresh_dir("roundtrip");
    const auto p = dir / "sim.csv";
    write_dataset_csv(p.string(), sim.data, 31);
    const auto loaded = load_dataset_csv(p.string());
    REQUIRE(loaded.observations.size() == sim.data.observations.size());
    for (std::size_t i = 0; i < loaded.observations.size(); ++i) {
        CHECK(loaded.observations[i].time == sim.data.observations[i].time);
        CHECK(loaded.observations[i].event == sim.data.observations[i].event);
        CHECK(loaded.observations[i].group == sim.data.observations[i].group);
    }
}

TEST_CASE("embedded leukemia dataset: counts and censoring pattern") {
    const auto weeks = embedded_leukemia_weeks();
    CHECK(weeks.observations.size() == 42);
    CHECK(weeks.group("6-MP").size() == 21);
    CHECK(weeks.group("placebo").size() == 21);
    std::size_t censored_mp = 0;
    double max_mp = 0.0;
    bool max_is_censored = false;
    for (const auto& o : weeks.group("6-MP")) {
        if (!o.event) ++censored_mp;
        if (o.time >= max_mp) {
            max_mp = o.time;
            max_is_censored = !o.event;
        }
    }
    CHECK(censored_mp == 12);
    CHECK(max_mp == 35.0);
    CHECK(max_is_censored);
    for (const auto& o : weeks.group("placebo")) CHECK(o.event);

    const auto years = embedded_leukemia();
    for (std::size_t i = 0; i < years.observations.size(); ++i)
        CHECK(years.observations[i].time ==
              doctest::Approx(weeks.observations[i].time / 52.0).epsilon(1e-15));
}

TEST_CASE("config files: parsing, defaults and model building") {
    const auto dir = fresh_dir("config");
    const auto p = write_file(dir, "m.cfg",
                              "# weibull setup\n"
                              "model.type = weibull\n"
                              "model.sigma = 8\n"
                              "model.x0 = 0.8   # starting point\n"
                              "sampler.iterations = 500\n"
                              "sampler.horizon = 0.75\n"
                              "proposal.theta2 = beta:0.5,0.5\n");
    const auto cfg = ConfigMap::from_file(p.string());
    CHECK(cfg.get("model.type") == "weibull");
    CHECK(cfg.get_double("model.x0", 0.0) == 0.8);
    const auto model = build_model_from_config(cfg);
    CHECK(model.name == "weibull");
    CHECK(model.sigma == 8.0);
    const auto sc = build_sampler_config(cfg);
    CHECK(sc.iterations == 500);
    CHECK(sc.horizon == 0.75);
    CHECK(sc.scalar_proposals.at(0).kind == ProposalSpec::Kind::Beta);

    CHECK_THROWS_AS(build_model_from_config(ConfigMap{}), std::invalid_argument);
    ConfigMap bad;
    bad.set("model.type", "weibull");
    CHECK_THROWS_WITH_AS(build_model_from_config(bad), doctest::Contains("missing required key"),
                         std::invalid_argument);
}

TEST_CASE("cli: simulate then fit then summarize round trip") {
    const auto dir = fresh_dir("cli_fit");
    const auto cfg = write_file(dir, "toy.cfg",
                                "model.type = toy\n"
                                "sampler.dt = 0.02\n"
                                "sampler.iterations = 300\n"
                                "sampler.burnin = 50\n"
                                "simulate.n = 60\n"
                                "simulate.censor = 0.9\n"
                                "simulate.horizon = 1.0\n");
    const auto sim_out = dir / "sim";
    REQUIRE(run_cli({"simulate", "--config", cfg.string(), "--seed", "3",
                     "--out", sim_out.string()}) == 0);
    REQUIRE(fs::exists(sim_out / "data.csv"));
    const auto loaded = load_dataset_csv((sim_out / "data.csv").string());
    CHECK(loaded.observations.size() == 60);
    for (const auto& o : loaded.observations) {
        CHECK(o.time <= 0.9);  // statuses reflect the cut-off
        if (!o.event) CHECK(o.time == 0.9);
    }

    const auto fit_out = dir / "fit";
    REQUIRE(run_cli({"fit", "--config", cfg.string(), "--data", (sim_out / "data.csv").string(),
                     "--horizon", "1.0", "--seed", "4", "--out", fit_out.string(),
                     "--plot"}) == 0);
    CHECK(fs::exists(fit_out / "trace.csv"));
    CHECK(fs::exists(fit_out / "survival_all.csv"));
    CHECK(fs::exists(fit_out / "hazard_all.csv"));
    CHECK(fs::exists(fit_out / "density_all.csv"));
    CHECK(fs::exists(fit_out / "fit_survival.svg"));
    const auto svg = slurp(fit_out / "fit_survival.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);

    const auto trace = load_trace_csv((fit_out / "trace.csv").string());
    CHECK(trace.columns == std::vector<std::string>{"theta1", "theta2", "loglik"});
    CHECK(trace.series[0].size() == 250);
    CHECK(!trace.acceptance_comments.empty());

    REQUIRE(run_cli({"summarize", "--trace", (fit_out / "trace.csv").string(), "--lags", "20",
                     "--out", (dir / "diag").string()}) == 0);
    const auto diag = slurp(dir / "diag" / "diagnostics.txt");
    CHECK(diag.find("theta1") != std::string::npos);
    CHECK(diag.find("acceptance") != std::string::npos);
}

TEST_CASE("cli: identical seeds give byte-identical trace files") {
    const auto dir = fresh_dir("cli_det");
    const auto cfg = write_file(dir, "toy.cfg",
                                "model.type = toy\n"
                                "sampler.dt = 0.02\n"
                                "sampler.iterations = 200\n"
                                "sampler.burnin = 20\n");
    const auto sim_out = dir / "sim";
    REQUIRE(run_cli({"simulate", "--config", cfg.string(), "--n", "40", "--seed", "3", "--out",
                     sim_out.string()}) == 0);
    for (const char* run : {"a", "b"}) {
        REQUIRE(run_cli({"fit", "--config", cfg.string(), "--data",
                         (sim_out / "data.csv").string(), "--horizon", "1.0", "--seed", "11",
                         "--out", (dir / run).string()}) == 0);
    }
    CHECK(slurp(dir / "a" / "trace.csv") == slurp(dir / "b" / "trace.csv"));
    CHECK(slurp(dir / "a" / "survival_all.csv") == slurp(dir / "b" / "survival_all.csv"));
}

TEST_CASE("cli: two-group fit from the shipped config writes per-group curves") {
    const auto dir = fresh_dir("cli_leukemia");
    const std::string cfg = std::string(DIFFSURV_SOURCE_DIR) + "/configs/leukemia.cfg";
    REQUIRE(run_cli({"fit", "--config", cfg, "--iters", "400", "--burnin", "100", "--seed", "9",
                     "--out", dir.string()}) == 0);
    for (const char* f : {"trace.csv", "survival_6-MP.csv", "survival_placebo.csv",
                          "hazard_6-MP.csv", "hazard_placebo.csv", "density_6-MP.csv",
                          "density_placebo.csv"})
        CHECK(fs::exists(dir / f));
    const auto trace = load_trace_csv((dir / "trace.csv").string());
    CHECK(trace.columns == std::vector<std::string>{"theta1", "theta2", "loglik"});
}

TEST_CASE("cli: km on the embedded data") {
    const auto dir = fresh_dir("cli_km");
    REQUIRE(run_cli({"km", "--data", "leukemia_weeks", "--out", dir.string(), "--plot"}) == 0);
    REQUIRE(fs::exists(dir / "km_6-MP.csv"));
    REQUIRE(fs::exists(dir / "km_placebo.csv"));
    REQUIRE(fs::exists(dir / "km.svg"));
    const auto csv = slurp(dir / "km_6-MP.csv");
    CHECK(csv.find("time,survival") != std::string::npos);
    CHECK(csv.rfind("0,1\n") != std::string::npos);  // starts at S(0) = 1
}

TEST_CASE("cli: bayes factor between pooled and grouped configs") {
    const auto dir = fresh_dir("cli_bf");
    const auto m1 = write_file(dir, "m1.cfg",
                               "model.type = weibull\nmodel.sigma = 8\nmodel.x0 = 0.8\n"
                               "data.grouping = pooled\nsampler.dt = 0.02\n");
    const auto m2 = write_file(dir, "m2.cfg",
                               "model.type = weibull\nmodel.sigma = 8\nmodel.x0 = 0.8\n"
                               "sampler.dt = 0.02\n");
    REQUIRE(run_cli({"bf", "--config", m1.string(), "--config2", m2.string(), "--data",
                     "leukemia", "--samples", "2000", "--seed", "5", "--out",
                     dir.string()}) == 0);
    REQUIRE(fs::exists(dir / "bf.csv"));
    const auto csv = slurp(dir / "bf.csv");
    CHECK(csv.find("log_ml_1,log_ml_2,log_bf,bf,se_log_bf,n_samples") != std::string::npos);
}

TEST_CASE("cli: failures exit nonzero with no partial outputs left") {
    const auto dir = fresh_dir("cli_fail");
    CHECK(run_cli({"fit", "--out", dir.string()}) == 1);  // no data/model
    CHECK(run_cli({"km", "--data", (dir / "nope.csv").string(), "--out", dir.string()}) == 1);
    CHECK(fs::is_empty(dir));
    CHECK(run_cli({}) != 0);
}

TEST_CASE("export_plot: rejects empty input, writes well-formed files") {
    CHECK_THROWS_AS(export_plot({}, {}, "/tmp/never.svg"), std::invalid_argument);
    const auto dir = fresh_dir("plot");
    CurveEstimate c;
    c.times = {0.0, 0.5, 1.0};
    c.mean = {1.0, 0.6, 0.3};
    c.band_lo = c.mean;
    c.band_hi = c.mean;
    export_plot({PlotSeries{c, "flat"}}, {}, (dir / "p.svg").string());
    const auto svg = slurp(dir / "p.svg");
    CHECK(svg.find("</svg>") != std::string::npos);
    CurveEstimate other = c;
    other.times = {0.0, 1.0, 2.0};
    CHECK_THROWS_AS(export_plot({PlotSeries{c, "a"}, PlotSeries{other, "b"}}, {},
                                (dir / "q.svg").string()),
                    std::invalid_argument);
}
