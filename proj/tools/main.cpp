// pidrl command-line harness: planning, learning, spectral analysis, and
// experiment reproduction for PID-accelerated tabular RL.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pidrl/pidrl.hpp"

namespace {

using namespace pidrl;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitIo = 3;

struct EnvOptions {
    std::string env = "chain-walk";
    std::string mdp_file;
    double gamma = 0.9;
    bool gamma_set = false;
    GarnetSpec garnet_spec;

    /// seed_alias also exposes the garnet seed as plain --seed; learning
    /// commands keep --seed for the run seed instead.
    void attach(CLI::App* cmd, bool seed_alias = true) {
        cmd->add_option("--env", env, "environment: chain-walk, cliff-walk, garnet")
            ->check(CLI::IsMember({"chain-walk", "cliff-walk", "garnet"}));
        cmd->add_option("--mdp-file", mdp_file, "load the MDP from a JSON file instead");
        cmd->add_option("--gamma", gamma, "discount factor")->each([this](const std::string&) {
            gamma_set = true;
        });
        cmd->add_option(seed_alias ? "--mdp-seed,--seed" : "--mdp-seed", garnet_spec.seed,
                        "garnet generation seed");
        cmd->add_option("--n-states", garnet_spec.n_states, "garnet state count");
        cmd->add_option("--n-actions", garnet_spec.n_actions, "garnet action count");
        cmd->add_option("--branching", garnet_spec.branching, "garnet successors per pair");
        cmd->add_option("--reward-states", garnet_spec.n_reward_states, "garnet rewarded states");
    }

    std::pair<TabularMdp, Policy> build() const {
        if (!mdp_file.empty()) {
            TabularMdp mdp = load_mdp(mdp_file);
            Policy pi = Policy::uniform(mdp.n_states(), mdp.n_actions());
            return {std::move(mdp), std::move(pi)};
        }
        if (env == "chain-walk") return chain_walk(gamma);
        if (env == "cliff-walk") return cliff_walk(gamma);
        return garnet(garnet_spec, gamma_set ? gamma : 0.99);
    }
};

int jobs_from_env() {
    if (const char* v = std::getenv("PIDRL_JOBS")) {
        try {
            return std::stoi(v);
        } catch (const std::exception&) {
            throw ConfigError(std::string("PIDRL_JOBS is not a number: ") + v);
        }
    }
    return 0;
}

void write_or_print(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

int cmd_plan(const EnvOptions& envopt, const std::string& gains_str, long iters, double tol,
             bool control, bool adapt, double eta, const std::string& out_path) {
    auto [mdp, policy] = envopt.build();
    const Gains gains = parse_gains(gains_str);
    std::string csv = "iter,error,kp,ki,kd\n";
    PlanResult res;
    if (control) {
        if (adapt) throw ConfigError("--adapt-gains is only available for policy evaluation planning");
        const Vec q_exact = exact_value_control(mdp, 1e-9);
        res = pid_vi_run_control(mdp, gains, QState::zero(mdp.n_states(), mdp.n_actions()),
                                 iters, tol, &q_exact);
    } else {
        const Vec v_exact = exact_value_pe(mdp, policy);
        PeState init = PeState::zero(mdp.n_states());
        res = adapt ? pid_vi_run_pe_adaptive(mdp, policy, gains, init, iters, tol, eta, &v_exact)
                    : pid_vi_run_pe(mdp, policy, gains, init, iters, tol, &v_exact);
    }
    for (const PlanIterRecord& rec : res.trace)
        csv += std::to_string(rec.iter) + "," + fmt_double(rec.error) + "," +
               fmt_double(rec.gains.kappa_p) + "," + fmt_double(rec.gains.kappa_i) + "," +
               fmt_double(rec.gains.kappa_d) + "\n";
    write_or_print(csv, out_path);
    if (res.diverged) {
        std::cerr << "plan: iterates exceeded the blow-up threshold (divergent gains)\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_analyze(const EnvOptions& envopt, const std::string& gains_str,
                const std::string& scan_kp, const std::string& scan_ki, const std::string& scan_kd,
                const std::string& out_path) {
    auto [mdp, policy] = envopt.build();
    const Gains base = parse_gains(gains_str);
    if (!scan_kp.empty() || !scan_ki.empty() || !scan_kd.empty()) {
        auto axis = [&](const std::string& s, double fallback) {
            return s.empty() ? std::vector<double>{fallback} : parse_number_list(s);
        };
        std::string csv = "kp,ki,kd,spectral_radius,max_real_part\n";
        for (double kp : axis(scan_kp, base.kappa_p))
            for (double ki : axis(scan_ki, base.kappa_i))
                for (double kd : axis(scan_kd, base.kappa_d)) {
                    Gains g = base;
                    g.kappa_p = kp;
                    g.kappa_i = ki;
                    g.kappa_d = kd;
                    const SpectralReport rep = spectral_report(mdp, policy, g);
                    csv += fmt_double(kp) + "," + fmt_double(ki) + "," + fmt_double(kd) + "," +
                           fmt_double(rep.spectral_radius) + "," + fmt_double(rep.max_real_part) + "\n";
                }
        write_or_print(csv, out_path);
        return kExitOk;
    }

    const SpectralReport rep = spectral_report(mdp, policy, base);
    const DeterminismReport det = d_determinism(mdp, policy);
    const Vec v_exact = exact_value_pe(mdp, policy);
    const double v_inf = norm_inf(v_exact);

    nlohmann::json doc;
    doc["spectral_radius"] = rep.spectral_radius;
    doc["max_real_part"] = rep.max_real_part;
    doc["vi_convergent"] = rep.vi_convergent;
    doc["td_convergent"] = rep.td_convergent;
    nlohmann::json evs = nlohmann::json::array();
    for (const auto& ev : rep.eigenvalues) evs.push_back({ev.real(), ev.imag()});
    doc["eigenvalues"] = std::move(evs);
    doc["d_determinism"] = det.d;
    doc["min_max_transition"] = det.min_max_transition;
    doc["v_exact_inf_norm"] = v_inf;
    doc["noise_bound_scalar"] = noise_bound_scalar(det.d, mdp.gamma(), v_inf);
    doc["noise_bound_td"] = noise_bound_td(det.d, mdp.n_states(), mdp.gamma(), v_inf);
    doc["noise_bound_pid"] = noise_bound_pid(det.d, mdp.n_states(), mdp.gamma(), base, v_inf);
    write_or_print(doc.dump(1) + "\n", out_path);
    return kExitOk;
}

int emit_experiment_outputs(const ExperimentConfig& cfg, const std::vector<RunResult>& runs,
                            const Aggregate& agg) {
    emit_csv(runs, cfg.out_prefix + "_runs.csv");
    emit_aggregate_csv(agg, cfg.out_prefix + "_agg.csv");
    if (cfg.svg) emit_svg(agg, cfg.out_prefix + "_agg.svg");
    if (agg.n_diverged > 0)
        std::cerr << agg.n_diverged << "/" << agg.n_total
                  << " runs diverged and were excluded from the aggregate\n";
    if (agg.steps.empty()) {
        std::cerr << "all runs diverged; aggregate is empty\n";
        return kExitRuntime;
    }
    std::cout << "final mean error " << fmt_double(agg.mean.back()) << " after "
              << agg.steps.back() << " steps (" << agg.n_total - agg.n_diverged << " runs)\n";
    return kExitOk;
}

int run_and_emit(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.n_mdps > 1) {
        const StudyResult study = run_garnet_study(cfg);
        nlohmann::json meta;
        meta["mdp_seeds"] = study.mdp_seeds;
        meta["run_seed_base"] = cfg.base_seed;
        meta["runs_per_mdp"] = cfg.n_runs;
        meta["note"] = "runs CSV: 'run' is the environment index and 'error' its mean curve "
                       "over the inner runs";
        write_or_print(meta.dump(1) + "\n", cfg.out_prefix + "_meta.json");
        return emit_experiment_outputs(cfg, study.mdp_mean_curves, study.outer);
    }
    const ExperimentResult res = run_experiment(cfg);
    return emit_experiment_outputs(cfg, res.runs, res.aggregate);
}

int cmd_learning(const EnvOptions& envopt, ExperimentConfig cfg, const std::string& gains_str) {
    if (!gains_str.empty()) cfg.gains = parse_gains(gains_str);
    if (cfg.jobs == 0) cfg.jobs = jobs_from_env();
    cfg.environment = envopt.mdp_file.empty() ? envopt.env : "file";
    cfg.mdp_file = envopt.mdp_file;
    cfg.gamma = (envopt.gamma_set || envopt.env != "garnet") ? envopt.gamma : 0.99;
    cfg.garnet_spec = envopt.garnet_spec;
    return run_and_emit(cfg);
}

int cmd_garnet_gen(const GarnetSpec& spec, double gamma, const std::string& out_path) {
    auto [mdp, policy] = garnet(spec, gamma);
    (void)policy;
    save_mdp(mdp, out_path);
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

int cmd_grid_search(const std::string& config_path) {
    auto [cfg, grids] = load_grid_search_config(config_path);
    cfg.validate();
    if (cfg.jobs == 0) cfg.jobs = jobs_from_env();
    auto [mdp, policy] = build_environment(cfg);
    const GridSearchResult res = grid_search(mdp, policy, cfg, grids);
    emit_grid_csv(res, cfg.out_prefix + "_grid.csv");
    const GridEntry& best = res.table.front();
    std::cout << "best: lr_v=" << schedule_to_string(best.v) << " lr_z=" << schedule_to_string(best.z)
              << " lr_vp=" << schedule_to_string(best.v_prev);
    if (cfg.adapt_gains) std::cout << " eta=" << fmt_double(best.eta);
    std::cout << " steps_to_" << fmt_double(res.target) << "=" << fmt_double(best.steps_to_target)
              << " final_error=" << fmt_double(best.final_error) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PID-accelerated planning and temporal-difference learning on tabular MDPs"};
    app.require_subcommand(1);
    std::function<int()> action;

    // ---- plan ----
    auto* plan = app.add_subcommand("plan", "model-based PID value iteration");
    auto plan_env = std::make_shared<EnvOptions>();
    plan_env->attach(plan);
    auto plan_gains = std::make_shared<std::string>("1,0,0,0.05,0.95");
    auto plan_iters = std::make_shared<long>(1000);
    auto plan_tol = std::make_shared<double>(1e-10);
    auto plan_control = std::make_shared<bool>(false);
    auto plan_adapt = std::make_shared<bool>(false);
    auto plan_eta = std::make_shared<double>(0.05);
    auto plan_out = std::make_shared<std::string>();
    plan->add_option("--gains", *plan_gains, "kp,ki,kd[,alpha,beta]");
    plan->add_option("--iters", *plan_iters, "iteration cap");
    plan->add_option("--tol", *plan_tol, "Bellman residual stopping tolerance");
    plan->add_flag("--control", *plan_control, "plan for control instead of policy evaluation");
    plan->add_flag("--adapt-gains", *plan_adapt, "adapt gains by normalized gradient descent");
    plan->add_option("--eta", *plan_eta, "gain adaptation meta-learning rate");
    plan->add_option("--out", *plan_out, "CSV output path (default: stdout)");
    plan->callback([=, &action]() {
        action = [=]() {
            return cmd_plan(*plan_env, *plan_gains, *plan_iters, *plan_tol, *plan_control,
                            *plan_adapt, *plan_eta, *plan_out);
        };
    });

    // ---- evaluate / control ----
    auto add_learning_cmd = [&](const char* name, const char* help, const char* default_algo) {
        auto* cmd = app.add_subcommand(name, help);
        auto env = std::make_shared<EnvOptions>();
        env->attach(cmd, /*seed_alias=*/false);
        auto cfg = std::make_shared<ExperimentConfig>();
        auto gains_str = std::make_shared<std::string>();
        cfg->algo = default_algo;
        cmd->add_option("--algo", cfg->algo, "algorithm");
        cmd->add_option("--gains", *gains_str, "kp,ki,kd[,alpha,beta]");
        cmd->add_option("--lr-v", cfg->lr_v, "value learning rate 'eps[,M]'");
        cmd->add_option("--lr-z", cfg->lr_z, "z learning rate (default: --lr-v)");
        cmd->add_option("--lr-vp", cfg->lr_vp, "previous-value learning rate (default: --lr-v)");
        cmd->add_option("--steps", cfg->total_steps, "samples per run");
        cmd->add_option("--eval-every", cfg->eval_every, "evaluation grid spacing");
        cmd->add_option("--runs", cfg->n_runs, "independent runs");
        cmd->add_option("--seed", cfg->base_seed, "base seed; run i uses seed base+i");
        cmd->add_option("--sampling", cfg->sampling, "iid-state, iid-state-action, or trajectory");
        cmd->add_flag("--adapt-gains", cfg->adapt_gains, "enable gain adaptation");
        cmd->add_option("--eta", cfg->ga.eta, "gain adaptation meta-learning rate");
        cmd->add_option("--lambda", cfg->ga.lambda, "running-residual smoothing factor");
        cmd->add_option("--eps-norm", cfg->ga.eps_norm, "normalization offset");
        cmd->add_option("--behavior-epsilon", cfg->behavior_epsilon,
                        "exploration rate of the trajectory behavior policy");
        cmd->add_option("--jobs", cfg->jobs, "worker threads (default: PIDRL_JOBS or all cores)");
        cmd->add_option("--out", cfg->out_prefix, "output file prefix");
        cmd->add_flag("--svg", cfg->svg, "also write an SVG chart of the aggregate");
        cmd->callback([=, &action]() {
            action = [=]() { return cmd_learning(*env, *cfg, *gains_str); };
        });
    };
    add_learning_cmd("evaluate", "sample-based policy evaluation (td, pid-td)", "td");
    add_learning_cmd("control", "sample-based control (q, pid-q)", "q");

    // ---- analyze ----
    auto* analyze = app.add_subcommand("analyze", "spectral and statistical analysis of gains");
    auto an_env = std::make_shared<EnvOptions>();
    an_env->attach(analyze);
    auto an_gains = std::make_shared<std::string>("1,0,0,0.05,0.95");
    auto an_scan_kp = std::make_shared<std::string>();
    auto an_scan_ki = std::make_shared<std::string>();
    auto an_scan_kd = std::make_shared<std::string>();
    auto an_out = std::make_shared<std::string>();
    analyze->add_option("--gains", *an_gains, "kp,ki,kd[,alpha,beta]");
    analyze->add_option("--scan-kp", *an_scan_kp, "comma list: scan kp over these values");
    analyze->add_option("--scan-ki", *an_scan_ki, "comma list: scan ki");
    analyze->add_option("--scan-kd", *an_scan_kd, "comma list: scan kd");
    analyze->add_option("--out", *an_out, "output path (default: stdout)");
    analyze->callback([=, &action]() {
        action = [=]() {
            return cmd_analyze(*an_env, *an_gains, *an_scan_kp, *an_scan_ki, *an_scan_kd, *an_out);
        };
    });

    // ---- garnet-gen ----
    auto* gen = app.add_subcommand("garnet-gen", "write a random Garnet MDP as JSON");
    auto gen_spec = std::make_shared<GarnetSpec>();
    auto gen_gamma = std::make_shared<double>(0.99);
    auto gen_out = std::make_shared<std::string>();
    gen->add_option("--seed", gen_spec->seed, "generation seed");
    gen->add_option("--n-states", gen_spec->n_states, "state count");
    gen->add_option("--n-actions", gen_spec->n_actions, "action count");
    gen->add_option("--branching", gen_spec->branching, "successors per state-action");
    gen->add_option("--reward-states", gen_spec->n_reward_states, "rewarded states");
    gen->add_option("--gamma", *gen_gamma, "discount factor");
    gen->add_option("--out", *gen_out, "output path")->required();
    gen->callback([=, &action]() {
        action = [=]() { return cmd_garnet_gen(*gen_spec, *gen_gamma, *gen_out); };
    });

    // ---- experiment ----
    auto* exp = app.add_subcommand("experiment", "run an experiment described by a JSON config");
    auto exp_config = std::make_shared<std::string>();
    auto exp_jobs = std::make_shared<int>(0);
    exp->add_option("config", *exp_config, "config JSON path")->required();
    exp->add_option("--jobs", *exp_jobs, "worker threads (overrides config)");
    exp->callback([=, &action]() {
        action = [=]() {
            ExperimentConfig cfg = load_experiment_config(*exp_config);
            if (*exp_jobs > 0)
                cfg.jobs = *exp_jobs;
            else if (cfg.jobs == 0)
                cfg.jobs = jobs_from_env();
            return run_and_emit(cfg);
        };
    });

    // ---- grid-search ----
    auto* gs = app.add_subcommand("grid-search", "hyperparameter grid search from a JSON config");
    auto gs_config = std::make_shared<std::string>();
    gs->add_option("config", *gs_config, "config JSON path")->required();
    gs->callback([=, &action]() {
        action = [=]() { return cmd_grid_search(*gs_config); };
    });

    try {
        app.parse(argc, argv);
        if (action) return action();
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitConfig;
    } catch (const pidrl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const pidrl::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
