#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "pidrl/analysis.hpp"
#include "pidrl/harness.hpp"

#include "test_helpers.hpp"

using namespace pidrl;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    std::filesystem::path dir;
    TempDir() {
        dir = std::filesystem::temp_directory_path() /
              ("pidrl_test_" + std::to_string(::getpid()) + "_" +
               std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::create_directories(dir);
    }
    ~TempDir() { std::filesystem::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("normalized errors", "[harness]") {
    auto [mdp, policy] = chain_walk(0.9);
    const Vec v_exact = exact_value_pe(mdp, policy);
    CHECK(normalized_error_pe(v_exact, v_exact) == 0.0);
    CHECK(normalized_error_pe(Vec(50, 0.0), v_exact) == 1.0);
    Vec doubled = v_exact;
    for (double& x : doubled) x *= 2.0;
    CHECK(normalized_error_pe(doubled, v_exact) == Catch::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(normalized_error_pe(Vec(3, 0.0), Vec(3, 0.0)), std::invalid_argument);

    const Vec q_exact = exact_value_control(mdp, 1e-9);
    CHECK(normalized_error_control(q_exact, q_exact) == 0.0);
    CHECK(normalized_error_control(Vec(100, 0.0), q_exact) == 1.0);
}

TEST_CASE("aggregate over runs", "[harness]") {
    RunResult a;
    a.run_id = 0;
    a.error_trace = {{0, 1.0}, {10, 0.5}};
    RunResult b;
    b.run_id = 1;
    b.error_trace = {{0, 1.0}, {10, 0.3}};

    const Aggregate single = aggregate_runs({a});
    CHECK(single.mean == Vec{1.0, 0.5});
    CHECK(single.std_error == Vec{0.0, 0.0});

    const Aggregate both = aggregate_runs({a, b});
    CHECK(both.mean[1] == Catch::Approx(0.4));
    // stderr = sample std / sqrt(n) = (0.1414.. / 1.414..)
    CHECK(both.std_error[1] == Catch::Approx(std::sqrt(0.02 / 1.0) / std::sqrt(2.0)));

    RunResult dead;
    dead.run_id = 2;
    dead.diverged = true;
    const Aggregate with_dead = aggregate_runs({a, b, dead});
    CHECK(with_dead.n_total == 3);
    CHECK(with_dead.n_diverged == 1);
    CHECK(with_dead.mean[1] == Catch::Approx(0.4));
}

TEST_CASE("experiment determinism and single-run aggregate", "[harness]") {
    ExperimentConfig cfg;
    cfg.environment = "chain-walk";
    cfg.algo = "td";
    cfg.lr_v = "0.5,50";
    cfg.total_steps = 20000;
    cfg.eval_every = 5000;
    cfg.n_runs = 1;
    cfg.jobs = 1;
    const ExperimentResult one = run_experiment(cfg);
    REQUIRE(one.runs.size() == 1);
    for (std::size_t i = 0; i < one.aggregate.steps.size(); ++i) {
        CHECK(one.aggregate.mean[i] == one.runs[0].error_trace[i].second);
        CHECK(one.aggregate.std_error[i] == 0.0);
    }

    cfg.n_runs = 4;
    cfg.jobs = 2;
    const ExperimentResult r1 = run_experiment(cfg);
    cfg.jobs = 1;
    const ExperimentResult r2 = run_experiment(cfg);
    REQUIRE(r1.runs.size() == r2.runs.size());
    for (std::size_t i = 0; i < r1.runs.size(); ++i) {
        CHECK(r1.runs[i].seed == r2.runs[i].seed);
        CHECK(r1.runs[i].error_trace == r2.runs[i].error_trace);
    }
    CHECK(r1.aggregate.mean == r2.aggregate.mean);
    CHECK(r1.aggregate.std_error == r2.aggregate.std_error);
}

TEST_CASE("paired runs: spectrally faster gains accelerate the transient", "[harness]") {
    // Cliff Walk, gamma 0.9: the scan-found PD gains cut the spectral radius
    // from 0.9 to ~0.63. The advantage shows while the optimization error
    // dominates; past the transient both algorithms sit on their noise
    // floors, where the extra PID channels cost a small variance premium.
    auto [mdp, policy] = cliff_walk(0.9);
    const Gains pd{1.4, 0.0, 0.4, 0.05, 0.0};
    const SpectralReport rep = spectral_report(mdp, policy, pd);
    REQUIRE(rep.spectral_radius < 0.9 - 0.05);

    ExperimentConfig td;
    td.environment = "cliff-walk";
    td.algo = "td";
    td.lr_v = "0.5,50";
    td.total_steps = 20000;
    td.eval_every = 1000;
    td.n_runs = 20;
    td.base_seed = 177;
    ExperimentConfig pid = td;
    pid.algo = "pid-td";
    pid.gains = pd;
    const ExperimentResult td_res = run_experiment(td);
    const ExperimentResult pid_res = run_experiment(pid);
    REQUIRE(pid_res.aggregate.n_diverged == 0);

    // transient point (first eval step): decisive separation
    const double td1 = td_res.aggregate.mean[1], se_td1 = td_res.aggregate.std_error[1];
    const double pid1 = pid_res.aggregate.mean[1], se_pid1 = pid_res.aggregate.std_error[1];
    CHECK(pid1 + 2 * se_pid1 < td1 - 2 * se_td1);

    // late steps: both on the noise floor, PID within a modest factor
    CHECK(pid_res.aggregate.mean.back() <= 1.5 * td_res.aggregate.mean.back());
}

TEST_CASE("csv emission and round trip", "[harness]") {
    TempDir tmp;

    // empty results: header only
    emit_csv({}, tmp.path("empty.csv"));
    CHECK(slurp(tmp.path("empty.csv")) == "step,run,error\n");

    ExperimentConfig cfg;
    cfg.environment = "chain-walk";
    cfg.algo = "td";
    cfg.lr_v = "0.5,50";
    cfg.total_steps = 10000;
    cfg.eval_every = 2000;
    cfg.n_runs = 3;
    cfg.jobs = 1;
    const ExperimentResult res = run_experiment(cfg);
    emit_csv(res.runs, tmp.path("runs.csv"));
    emit_aggregate_csv(res.aggregate, tmp.path("agg.csv"));

    // parse the long CSV back and recompute the aggregate
    std::ifstream in(tmp.path("runs.csv"));
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "step,run,error");
    std::map<long long, std::vector<double>> by_step;
    while (std::getline(in, line)) {
        long long step;
        int run;
        double err;
        REQUIRE(std::sscanf(line.c_str(), "%lld,%d,%lf", &step, &run, &err) == 3);
        by_step[step].push_back(err);
    }
    REQUIRE(by_step.size() == res.aggregate.steps.size());
    for (std::size_t i = 0; i < res.aggregate.steps.size(); ++i) {
        const auto& vals = by_step[res.aggregate.steps[i]];
        REQUIRE(vals.size() == 3);
        double mean = (vals[0] + vals[1] + vals[2]) / 3.0;
        CHECK(std::abs(mean - res.aggregate.mean[i]) <= 1e-12);
        double ss = 0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        CHECK(std::abs(std::sqrt(ss / 2.0) / std::sqrt(3.0) - res.aggregate.std_error[i]) <= 1e-12);
    }

    // identical traces make the stderr column all zeros
    RunResult t1, t2;
    t1.error_trace = t2.error_trace = {{0, 1.0}, {5, 0.25}};
    t2.run_id = 1;
    const Aggregate eq = aggregate_runs({t1, t2});
    for (double s : eq.std_error) CHECK(s == 0.0);

    // byte stability
    emit_csv(res.runs, tmp.path("runs2.csv"));
    CHECK(slurp(tmp.path("runs.csv")) == slurp(tmp.path("runs2.csv")));

    // svg emission is deterministic and well-formed-ish
    emit_svg(res.aggregate, tmp.path("a.svg"));
    emit_svg(res.aggregate, tmp.path("b.svg"));
    const std::string svg = slurp(tmp.path("a.svg"));
    CHECK(svg == slurp(tmp.path("b.svg")));
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("<polygon") != std::string::npos);
}

TEST_CASE("grid search ranking", "[harness]") {
    auto [mdp, policy] = chain_walk(0.9);
    ExperimentConfig base;
    base.environment = "chain-walk";
    base.algo = "td";
    base.lr_v = "0.5,50";
    base.total_steps = 30000;
    base.eval_every = 3000;
    base.n_runs = 2;
    base.jobs = 1;

    // single point: that point comes back
    GridSpec one;
    one.v = {LearningRateSchedule::count_cap(0.5, 50.0)};
    const GridSearchResult single = grid_search(mdp, policy, base, one);
    REQUIRE(single.table.size() == 1);
    CHECK(schedule_to_string(single.table[0].v) == "0.5,50");

    // a sane rate dominates a frozen one in both criteria
    GridSpec two;
    two.v = {LearningRateSchedule::count_cap(0.5, 50.0), LearningRateSchedule::count_cap(0.0, 50.0)};
    const GridSearchResult dom = grid_search(mdp, policy, base, two);
    REQUIRE(dom.table.size() == 2);
    CHECK(schedule_to_string(dom.table[0].v) == "0.5,50");
    CHECK(dom.table[0].final_error < dom.table[1].final_error);

    TempDir tmp;
    emit_grid_csv(dom, tmp.path("grid.csv"));
    const std::string table = slurp(tmp.path("grid.csv"));
    CHECK(table.find("lr_v,lr_z,lr_vp,eta,steps_to_target,final_error,diverged") == 0);
}

TEST_CASE("full default grids run to completion on a Garnet instance", "[harness]") {
    GarnetSpec spec;
    spec.seed = 2;
    auto [mdp, policy] = garnet(spec, 0.99);
    ExperimentConfig base;
    base.environment = "garnet";
    base.garnet_spec = spec;
    base.algo = "pid-td";
    base.gains = Gains{1.0, 0.2, 0.1, 0.05, 0.95};
    base.total_steps = 500;  // completeness, not tuning quality
    base.eval_every = 250;
    base.n_runs = 1;
    base.jobs = 1;
    const GridSpec grids{default_p_grid(), default_i_grid(), default_d_grid(), {}};
    const GridSearchResult res = grid_search(mdp, policy, base, grids);
    CHECK(res.table.size() == 25u * 5u * 7u);
    TempDir tmp;
    emit_grid_csv(res, tmp.path("full.csv"));
    const std::string table = slurp(tmp.path("full.csv"));
    CHECK(std::count(table.begin(), table.end(), '\n') == 25 * 5 * 7 + 1);

    // meta-learning-rate grid for adapted gains
    ExperimentConfig ga_base = base;
    ga_base.adapt_gains = true;
    ga_base.ga.eps_norm = 0.1;
    GridSpec ga_grids;
    ga_grids.v = {LearningRateSchedule::constant(0.1), LearningRateSchedule::constant(0.01)};
    ga_grids.eta = {0.1, 0.01, 0.001, 0.0001};
    const GridSearchResult ga_res = grid_search(mdp, policy, ga_base, ga_grids);
    CHECK(ga_res.table.size() == 8);
}

TEST_CASE("default search grids reproduce the standard sets", "[harness]") {
    const auto p = default_p_grid();
    CHECK(p.size() == 25);
    CHECK(p.front().epsilon == 1.0);
    CHECK(p.front().param == 10.0);
    CHECK(p.back().epsilon == 0.0001);
    CHECK(p.back().param == 10000.0);

    const auto i = default_i_grid();
    REQUIRE(i.size() == 5);
    CHECK(i[0].epsilon == 1.0);
    CHECK(std::isinf(i[0].param));
    CHECK(i[1].param == 100.0);
    CHECK(i[4].epsilon == 0.0);

    const auto d = default_d_grid();
    REQUIRE(d.size() == 7);
    CHECK(d[0].epsilon == 1.0);
    CHECK(d[6].epsilon == 0.0);
}

TEST_CASE("config parsing", "[harness]") {
    nlohmann::json doc = {{"environment", "garnet"}, {"algo", "pid-td"}, {"gains", "1,0.2,0.1"},
                          {"lr_v", "0.5,100"},       {"steps", 1000},    {"runs", 4},
                          {"seed", 9},               {"n_mdps", 3},      {"mdp_seed", 5}};
    const ExperimentConfig cfg = config_from_json(doc);
    CHECK(cfg.environment == "garnet");
    CHECK(cfg.algo == "pid-td");
    CHECK(cfg.gains.kappa_p == 1.0);
    CHECK(cfg.gains.kappa_i == 0.2);
    CHECK(cfg.gains.kappa_d == 0.1);
    CHECK(cfg.gains.alpha == 0.05);  // defaulted
    CHECK(cfg.total_steps == 1000);
    CHECK(cfg.n_runs == 4);
    CHECK(cfg.base_seed == 9);
    CHECK(cfg.n_mdps == 3);
    CHECK(cfg.garnet_spec.seed == 5);
    CHECK_NOTHROW(cfg.validate());

    nlohmann::json bad = doc;
    bad["no_such_key"] = 1;
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);

    nlohmann::json badalgo = doc;
    badalgo["algo"] = "sarsa";
    CHECK_THROWS_AS(config_from_json(badalgo).validate(), ConfigError);

    nlohmann::json study = doc;
    study["environment"] = "chain-walk";
    CHECK_THROWS_AS(config_from_json(study).validate(), ConfigError);

    // control + iid-state is inconsistent
    nlohmann::json ctrl = {{"algo", "q"}, {"sampling", "iid-state"}};
    CHECK_THROWS_AS(config_from_json(ctrl).validate(), ConfigError);
}

TEST_CASE("garnet study records both seed levels", "[harness]") {
    ExperimentConfig cfg;
    cfg.environment = "garnet";
    cfg.algo = "td";
    cfg.lr_v = "0.5,50";
    cfg.total_steps = 5000;
    cfg.eval_every = 1000;
    cfg.n_runs = 2;
    cfg.n_mdps = 3;
    cfg.garnet_spec.seed = 100;
    cfg.base_seed = 7;
    cfg.jobs = 1;
    const StudyResult study = run_garnet_study(cfg);
    REQUIRE(study.per_mdp.size() == 3);
    CHECK(study.mdp_seeds == std::vector<std::uint64_t>{100, 101, 102});
    REQUIRE(study.mdp_mean_curves.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(study.mdp_mean_curves[i].run_id == i);
        CHECK(study.mdp_mean_curves[i].error_trace.size() == study.per_mdp[i].aggregate.steps.size());
        for (const RunResult& r : study.per_mdp[i].runs) CHECK(r.seed == 7 + static_cast<std::uint64_t>(r.run_id));
    }
    CHECK(study.outer.steps.size() == study.per_mdp[0].aggregate.steps.size());
}

TEST_CASE("schedule string round trip", "[harness]") {
    for (const std::string s : {"0.5,50", "1,inf", "0.25,100", "0.1"}) {
        const LearningRateSchedule sch = parse_schedule(s);
        const LearningRateSchedule again = parse_schedule(schedule_to_string(sch));
        CHECK(sch.kind == again.kind);
        CHECK(sch.epsilon == again.epsilon);
        CHECK((std::isinf(sch.param) ? std::isinf(again.param) : sch.param == again.param));
    }
    CHECK_THROWS_AS(parse_schedule("abc"), ConfigError);
    CHECK_THROWS_AS(parse_gains("1,2"), ConfigError);
}
