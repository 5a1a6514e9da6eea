#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pidrl/environments.hpp"
#include "pidrl/errors.hpp"
#include "pidrl/gain_adaptation.hpp"
#include "pidrl/learning.hpp"
#include "pidrl/mdp_io.hpp"
#include "pidrl/report.hpp"

namespace pidrl {

inline std::vector<double> parse_number_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "inf" || tok == "Inf") {
            out.push_back(std::numeric_limits<double>::infinity());
            continue;
        }
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError("cannot parse number '" + tok + "' in '" + s + "'");
        }
    }
    return out;
}

/// "kp,ki,kd" or "kp,ki,kd,alpha,beta".
inline Gains parse_gains(const std::string& s) {
    const std::vector<double> v = parse_number_list(s);
    if (v.size() != 3 && v.size() != 5)
        throw ConfigError("gains must be 'kp,ki,kd' or 'kp,ki,kd,alpha,beta': " + s);
    Gains g;
    g.kappa_p = v[0];
    g.kappa_i = v[1];
    g.kappa_d = v[2];
    if (v.size() == 5) {
        g.alpha = v[3];
        g.beta = v[4];
    }
    return g;
}

/// "eps" (constant rate) or "eps,M" (count-capped: min(eps, M/N)); M may be
/// "inf".
inline LearningRateSchedule parse_schedule(const std::string& s) {
    const std::vector<double> v = parse_number_list(s);
    if (v.empty() || v.size() > 2) throw ConfigError("schedule must be 'eps' or 'eps,M': " + s);
    try {
        if (v.size() == 1) return LearningRateSchedule::count_cap(v[0], std::numeric_limits<double>::infinity());
        return LearningRateSchedule::count_cap(v[0], v[1]);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

inline std::string schedule_to_string(const LearningRateSchedule& s) {
    switch (s.kind) {
        case LearningRateSchedule::Kind::constant: return fmt_double(s.epsilon);
        case LearningRateSchedule::Kind::polynomial:
            return "poly:" + fmt_double(s.epsilon) + "," + fmt_double(s.param);
        case LearningRateSchedule::Kind::count_cap:
            return fmt_double(s.epsilon) + "," +
                   (std::isinf(s.param) ? std::string("inf") : fmt_double(s.param));
    }
    return "";
}

inline SamplingMode parse_sampling(const std::string& s) {
    if (s == "iid-state") return SamplingMode::iid_state;
    if (s == "iid-state-action") return SamplingMode::iid_state_action;
    if (s == "trajectory") return SamplingMode::trajectory;
    throw ConfigError("unknown sampling mode: " + s);
}

inline LearningAlgo parse_algo(const std::string& s) {
    if (s == "td") return LearningAlgo::td;
    if (s == "pid-td") return LearningAlgo::pid_td;
    if (s == "q") return LearningAlgo::q;
    if (s == "pid-q") return LearningAlgo::pid_q;
    throw ConfigError("unknown algorithm: " + s);
}

/// Everything needed to reproduce one experiment; a pure function of this
/// struct determines every emitted byte.
struct ExperimentConfig {
    std::string environment = "chain-walk";  // chain-walk | cliff-walk | garnet | file
    std::string mdp_file;
    double gamma = 0.9;
    GarnetSpec garnet_spec;
    int n_mdps = 1;  // > 1: Garnet study over independently drawn MDPs

    std::string algo = "td";
    bool adapt_gains = false;
    Gains gains;
    GainAdaptationConfig ga;
    std::string lr_v = "0.1";
    std::string lr_z;   // defaults to lr_v
    std::string lr_vp;  // defaults to lr_v
    std::string sampling;  // defaults by problem kind
    double behavior_epsilon = 0.1;

    long long total_steps = 100000;
    long long eval_every = 1000;
    int n_runs = 80;
    std::uint64_t base_seed = 1;
    double exact_tol = 1e-8;
    int jobs = 0;  // 0 = hardware concurrency
    std::string out_prefix = "pidrl_out";
    bool svg = false;

    bool is_control() const { return is_control_algo(parse_algo(algo)); }

    ScheduleTriple schedules() const {
        const LearningRateSchedule v = parse_schedule(lr_v);
        return ScheduleTriple{v, lr_z.empty() ? v : parse_schedule(lr_z),
                              lr_vp.empty() ? v : parse_schedule(lr_vp)};
    }

    SamplingMode sampling_mode() const {
        if (!sampling.empty()) return parse_sampling(sampling);
        return is_control() ? SamplingMode::iid_state_action : SamplingMode::iid_state;
    }

    LearningRunConfig run_config() const {
        LearningRunConfig rc;
        rc.algo = parse_algo(algo);
        rc.sampling = sampling_mode();
        rc.gains = gains;
        rc.schedules = schedules();
        rc.total_steps = total_steps;
        rc.eval_every = eval_every;
        rc.behavior_epsilon = behavior_epsilon;
        return rc;
    }

    void validate() const {
        parse_algo(algo);
        (void)schedules();
        (void)sampling_mode();
        if (is_control() && sampling_mode() == SamplingMode::iid_state)
            throw ConfigError("control algorithms need iid-state-action or trajectory sampling");
        if (total_steps < 0 || eval_every < 1) throw ConfigError("bad total_steps/eval_every");
        if (n_runs < 1) throw ConfigError("n_runs must be >= 1");
        if (n_mdps < 1) throw ConfigError("n_mdps must be >= 1");
        if (n_mdps > 1 && environment != "garnet") throw ConfigError("n_mdps > 1 requires the garnet environment");
        if (adapt_gains) ga.validate();
    }
};

inline std::pair<TabularMdp, Policy> build_environment(const ExperimentConfig& cfg) {
    if (cfg.environment == "chain-walk") return chain_walk(cfg.gamma);
    if (cfg.environment == "cliff-walk") return cliff_walk(cfg.gamma);
    if (cfg.environment == "garnet") return garnet(cfg.garnet_spec, cfg.gamma);
    if (cfg.environment == "file") {
        TabularMdp mdp = load_mdp(cfg.mdp_file);
        Policy pi = Policy::uniform(mdp.n_states(), mdp.n_actions());
        return {std::move(mdp), std::move(pi)};
    }
    throw ConfigError("unknown environment: " + cfg.environment);
}

struct ExperimentResult {
    std::vector<RunResult> runs;
    Aggregate aggregate;
};

namespace detail {

/// Fans `count` independent tasks over a worker pool. Results land in a
/// pre-sized vector by index, so scheduling never shows in the output.
template <typename Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min(jobs, count));
    if (jobs == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    for (std::thread& t : pool) t.join();
}

}  // namespace detail

/// Runs n_runs independent learners (seeds base_seed + run_id) against one
/// environment and aggregates them. The exact solution is computed once.
inline ExperimentResult run_experiment(const TabularMdp& mdp, const Policy& policy,
                                       const ExperimentConfig& cfg) {
    cfg.validate();
    const LearningRunConfig rc = cfg.run_config();
    const bool control = cfg.is_control();
    const Vec exact = control ? exact_value_control(mdp, cfg.exact_tol)
                              : exact_value_pe(mdp, policy);

    GainAdaptationConfig ga = cfg.ga;
    ga.initial_gains = cfg.gains;

    ExperimentResult result;
    result.runs.resize(cfg.n_runs);
    detail::parallel_for(cfg.n_runs, cfg.jobs, [&](int i) {
        Rng rng(cfg.base_seed + static_cast<std::uint64_t>(i));
        RunResult r;
        if (cfg.adapt_gains) {
            r = control ? run_pid_q_with_ga(mdp, ga, rc, exact, rng)
                        : run_pid_td_with_ga(mdp, policy, ga, rc, exact, rng);
        } else {
            r = control ? run_learning_control(mdp, rc, exact, rng)
                        : run_learning_pe(mdp, policy, rc, exact, rng);
        }
        r.run_id = i;
        r.seed = cfg.base_seed + static_cast<std::uint64_t>(i);
        result.runs[i] = std::move(r);
    });
    result.aggregate = aggregate_runs(result.runs);
    return result;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    auto [mdp, policy] = build_environment(cfg);
    return run_experiment(mdp, policy, cfg);
}

/// Two-level Garnet study: n_mdps independently drawn environments (seeds
/// garnet_spec.seed + index), n_runs learners on each. The outer level
/// treats each environment's mean curve as one trajectory.
struct StudyResult {
    std::vector<ExperimentResult> per_mdp;
    std::vector<std::uint64_t> mdp_seeds;
    std::vector<RunResult> mdp_mean_curves;  // run_id = environment index
    Aggregate outer;
};

inline StudyResult run_garnet_study(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.environment != "garnet") throw ConfigError("garnet study needs the garnet environment");
    StudyResult study;
    study.per_mdp.resize(cfg.n_mdps);
    study.mdp_seeds.resize(cfg.n_mdps);
    for (int i = 0; i < cfg.n_mdps; ++i) {
        ExperimentConfig sub = cfg;
        sub.n_mdps = 1;
        sub.garnet_spec.seed = cfg.garnet_spec.seed + static_cast<std::uint64_t>(i);
        study.mdp_seeds[i] = sub.garnet_spec.seed;
        study.per_mdp[i] = run_experiment(sub);
        RunResult mean_curve;
        mean_curve.run_id = i;
        mean_curve.seed = sub.garnet_spec.seed;
        const Aggregate& agg = study.per_mdp[i].aggregate;
        mean_curve.diverged = agg.steps.empty();
        for (std::size_t k = 0; k < agg.steps.size(); ++k)
            mean_curve.error_trace.emplace_back(agg.steps[k], agg.mean[k]);
        study.mdp_mean_curves.push_back(std::move(mean_curve));
    }
    study.outer = aggregate_runs(study.mdp_mean_curves);
    return study;
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

/// Candidate learning rates per stacked component, plus meta-learning rates
/// when gain adaptation is on.
struct GridSpec {
    std::vector<LearningRateSchedule> v;
    std::vector<LearningRateSchedule> z;
    std::vector<LearningRateSchedule> v_prev;
    std::vector<double> eta;
};

/// The (eps, M) sets searched for the proportional component.
inline std::vector<LearningRateSchedule> default_p_grid() {
    std::vector<LearningRateSchedule> out;
    auto add = [&](double eps, std::initializer_list<double> caps) {
        for (double m : caps) out.push_back(LearningRateSchedule::count_cap(eps, m));
    };
    add(1.0, {10, 50, 100, 500, 1000, 10000});
    add(0.75, {10, 50, 100, 500, 1000});
    add(0.5, {10, 50, 100, 500, 1000});
    add(0.25, {10, 50, 100});
    add(0.1, {10, 50, 100});
    add(0.01, {10000});
    add(0.001, {10000});
    add(0.0001, {10000});
    return out;
}

/// The sets searched for the integral component.
inline std::vector<LearningRateSchedule> default_i_grid() {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<LearningRateSchedule> out;
    out.push_back(LearningRateSchedule::count_cap(1.0, inf));
    out.push_back(LearningRateSchedule::count_cap(1.0, 100));
    out.push_back(LearningRateSchedule::count_cap(0.5, inf));
    out.push_back(LearningRateSchedule::count_cap(0.1, inf));
    out.push_back(LearningRateSchedule::count_cap(0.0, inf));
    return out;
}

/// The sets searched for the derivative component.
inline std::vector<LearningRateSchedule> default_d_grid() {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<LearningRateSchedule> out;
    out.push_back(LearningRateSchedule::count_cap(1.0, inf));
    out.push_back(LearningRateSchedule::count_cap(1.0, 100));
    out.push_back(LearningRateSchedule::count_cap(0.5, inf));
    out.push_back(LearningRateSchedule::count_cap(0.25, inf));
    out.push_back(LearningRateSchedule::count_cap(0.1, inf));
    out.push_back(LearningRateSchedule::count_cap(0.01, inf));
    out.push_back(LearningRateSchedule::count_cap(0.0, inf));
    return out;
}

struct GridEntry {
    LearningRateSchedule v;
    LearningRateSchedule z;
    LearningRateSchedule v_prev;
    double eta = 0.0;
    double steps_to_target = std::numeric_limits<double>::infinity();
    double final_error = std::numeric_limits<double>::infinity();
    int diverged = 0;
};

struct GridSearchResult {
    std::vector<GridEntry> table;  // sorted best-first
    double target = 0.2;
};

/// Evaluates every grid point with the configured protocol; ranks by time to
/// reach the target mean error, breaking ties by final mean error.
inline GridSearchResult grid_search(const TabularMdp& mdp, const Policy& policy,
                                    const ExperimentConfig& base, const GridSpec& grids,
                                    double target = 0.2) {
    if (grids.v.empty()) throw ConfigError("grid_search: empty grid for the value component");
    const std::vector<LearningRateSchedule> zs =
        grids.z.empty() ? std::vector<LearningRateSchedule>{parse_schedule(base.lr_v)} : grids.z;
    const std::vector<LearningRateSchedule> vps =
        grids.v_prev.empty() ? std::vector<LearningRateSchedule>{parse_schedule(base.lr_v)} : grids.v_prev;
    const std::vector<double> etas = grids.eta.empty() ? std::vector<double>{base.ga.eta} : grids.eta;

    GridSearchResult result;
    result.target = target;
    for (const auto& sv : grids.v)
        for (const auto& sz : zs)
            for (const auto& svp : vps)
                for (double eta : etas) {
                    ExperimentConfig cfg = base;
                    cfg.lr_v = schedule_to_string(sv);
                    cfg.lr_z = schedule_to_string(sz);
                    cfg.lr_vp = schedule_to_string(svp);
                    cfg.ga.eta = eta;
                    GridEntry entry;
                    entry.v = sv;
                    entry.z = sz;
                    entry.v_prev = svp;
                    entry.eta = eta;
                    const ExperimentResult res = run_experiment(mdp, policy, cfg);
                    entry.diverged = res.aggregate.n_diverged;
                    if (!res.aggregate.steps.empty()) {
                        entry.final_error = res.aggregate.mean.back();
                        for (std::size_t i = 0; i < res.aggregate.steps.size(); ++i)
                            if (res.aggregate.mean[i] <= target) {
                                entry.steps_to_target = double(res.aggregate.steps[i]);
                                break;
                            }
                    }
                    result.table.push_back(entry);
                }
    std::stable_sort(result.table.begin(), result.table.end(),
                     [](const GridEntry& a, const GridEntry& b) {
                         if (a.steps_to_target != b.steps_to_target)
                             return a.steps_to_target < b.steps_to_target;
                         return a.final_error < b.final_error;
                     });
    return result;
}

inline void emit_grid_csv(const GridSearchResult& res, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "lr_v,lr_z,lr_vp,eta,steps_to_target,final_error,diverged\n";
    for (const GridEntry& e : res.table)
        out << schedule_to_string(e.v) << ';' << schedule_to_string(e.z) << ';'
            << schedule_to_string(e.v_prev) << ',' << fmt_double(e.eta) << ','
            << fmt_double(e.steps_to_target) << ',' << fmt_double(e.final_error) << ','
            << e.diverged << '\n';
    if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// JSON config
// ---------------------------------------------------------------------------

/// Flat JSON; every CLI flag has a same-named key (dashes become
/// underscores). Unknown keys are rejected to catch typos.
inline ExperimentConfig config_from_json(const nlohmann::json& doc) {
    ExperimentConfig cfg;
    static const char* known[] = {
        "environment", "mdp_file", "gamma", "n_states", "n_actions", "branching",
        "reward_states", "mdp_seed", "n_mdps", "algo", "adapt_gains", "gains",
        "eta", "lambda", "eps_norm", "lr_v", "lr_z", "lr_vp", "sampling",
        "behavior_epsilon", "steps", "eval_every", "runs", "seed", "exact_tol", "jobs", "out", "svg"};
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) ok = true;
        if (!ok) throw ConfigError("unknown config key: " + it.key());
    }
    auto get = [&](const char* key, auto& field) {
        if (doc.contains(key)) {
            try {
                field = doc.at(key).get<std::decay_t<decltype(field)>>();
            } catch (const nlohmann::json::exception&) {
                throw ConfigError(std::string("bad value for config key: ") + key);
            }
        }
    };
    get("environment", cfg.environment);
    get("mdp_file", cfg.mdp_file);
    get("gamma", cfg.gamma);
    get("n_states", cfg.garnet_spec.n_states);
    get("n_actions", cfg.garnet_spec.n_actions);
    get("branching", cfg.garnet_spec.branching);
    get("reward_states", cfg.garnet_spec.n_reward_states);
    get("mdp_seed", cfg.garnet_spec.seed);
    get("n_mdps", cfg.n_mdps);
    get("algo", cfg.algo);
    get("adapt_gains", cfg.adapt_gains);
    std::string gains_str;
    get("gains", gains_str);
    if (!gains_str.empty()) cfg.gains = parse_gains(gains_str);
    get("eta", cfg.ga.eta);
    get("lambda", cfg.ga.lambda);
    get("eps_norm", cfg.ga.eps_norm);
    get("lr_v", cfg.lr_v);
    get("lr_z", cfg.lr_z);
    get("lr_vp", cfg.lr_vp);
    get("sampling", cfg.sampling);
    get("behavior_epsilon", cfg.behavior_epsilon);
    get("steps", cfg.total_steps);
    get("eval_every", cfg.eval_every);
    get("runs", cfg.n_runs);
    get("seed", cfg.base_seed);
    get("exact_tol", cfg.exact_tol);
    get("jobs", cfg.jobs);
    get("out", cfg.out_prefix);
    get("svg", cfg.svg);
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
    return config_from_json(doc);
}

/// Grid-search config: an experiment config plus optional grid_lr_v,
/// grid_lr_z, grid_lr_vp (schedule strings) and grid_eta (numbers) keys.
/// Absent grids fall back to the standard per-component search sets (and to
/// the eta set {0.1, 0.01, 0.001, 0.0001} when gains are adapted).
inline std::pair<ExperimentConfig, GridSpec> load_grid_search_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
    GridSpec grids;
    auto take_schedules = [&](const char* key, std::vector<LearningRateSchedule>& out) {
        if (!doc.contains(key)) return;
        for (const auto& item : doc.at(key)) out.push_back(parse_schedule(item.get<std::string>()));
        doc.erase(key);
    };
    take_schedules("grid_lr_v", grids.v);
    take_schedules("grid_lr_z", grids.z);
    take_schedules("grid_lr_vp", grids.v_prev);
    if (doc.contains("grid_eta")) {
        for (const auto& item : doc.at("grid_eta")) grids.eta.push_back(item.get<double>());
        doc.erase("grid_eta");
    }
    ExperimentConfig cfg = config_from_json(doc);
    const bool pid = parse_algo(cfg.algo) == LearningAlgo::pid_td || parse_algo(cfg.algo) == LearningAlgo::pid_q;
    if (grids.v.empty()) grids.v = default_p_grid();
    if (grids.z.empty() && pid) grids.z = default_i_grid();
    if (grids.v_prev.empty() && pid) grids.v_prev = default_d_grid();
    if (grids.eta.empty() && cfg.adapt_gains) grids.eta = {0.1, 0.01, 0.001, 0.0001};
    return {std::move(cfg), std::move(grids)};
}

}  // namespace pidrl
