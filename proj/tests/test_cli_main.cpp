// End-to-end checks of the command-line interface: subcommands, file
// formats, exit codes, and output reproducibility. Takes the binary path as
// argv[1].

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "pidrl/environments.hpp"
#include "pidrl/mdp_io.hpp"

namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::string g_bin;
fs::path g_dir;

void expect(bool ok, const std::string& what) {
    if (!ok) {
        ++g_failures;
        std::cerr << "[FAIL] " << what << "\n";
    } else {
        std::cout << "[ok] " << what << "\n";
    }
}

int run(const std::string& args, const std::string& log_name = "out.log") {
    const std::string cmd = g_bin + " " + args + " > " + (g_dir / log_name).string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: cli_tests <path-to-pidrl-binary>\n";
        return 2;
    }
    g_bin = argv[1];
    g_dir = fs::temp_directory_path() / "pidrl_cli_test";
    fs::remove_all(g_dir);
    fs::create_directories(g_dir);

    // ---- analyze: spectral report JSON
    {
        const std::string out = (g_dir / "report.json").string();
        expect(run("analyze --env chain-walk --gains 1,0,0,0.05,0 --out " + out) == 0,
               "analyze exits 0");
        nlohmann::json doc;
        std::ifstream in(out);
        in >> doc;
        expect(std::abs(doc["spectral_radius"].get<double>() - 0.9) < 1e-8,
               "analyze reports rho = gamma for plain-VI gains");
        expect(doc["d_determinism"].get<double>() == 0.7, "analyze reports d = 0.7");
        expect(doc["td_convergent"].get<bool>(), "analyze reports td-convergent");
        expect(doc["eigenvalues"].size() == 150, "analyze lists all 3n eigenvalues");
    }

    // ---- analyze --scan-kp
    {
        const std::string out = (g_dir / "scan.csv").string();
        expect(run("analyze --env chain-walk --gains 1,0,0,0.05,0 --scan-kp 0.8,1.0,1.5 --out " +
                   out) == 0,
               "analyze --scan-kp exits 0");
        const std::string csv = slurp(out);
        expect(csv.rfind("kp,ki,kd,spectral_radius,max_real_part\n", 0) == 0, "scan header");
        expect(std::count(csv.begin(), csv.end(), '\n') == 4, "scan rows");
    }

    // ---- plan: per-iteration CSV
    {
        const std::string out = (g_dir / "plan.csv").string();
        expect(run("plan --env chain-walk --gains 1,0,0 --iters 50 --tol 1e-13 --out " + out) == 0,
               "plan exits 0");
        const std::string csv = slurp(out);
        expect(csv.rfind("iter,error,kp,ki,kd\n", 0) == 0, "plan CSV header");
        expect(std::count(csv.begin(), csv.end(), '\n') == 52, "plan CSV rows (51 iterates)");
    }

    // ---- plan with divergent gains exits 2
    expect(run("plan --env chain-walk --gains 1.5,0,0,0,0 --iters 600 --tol 1e-13 --out " +
               (g_dir / "boom.csv").string()) == 2,
           "plan flags divergence via exit code 2");

    // ---- garnet-gen round trip
    {
        const std::string out = (g_dir / "garnet.json").string();
        expect(run("garnet-gen --seed 5 --gamma 0.99 --out " + out) == 0, "garnet-gen exits 0");
        const pidrl::TabularMdp loaded = pidrl::load_mdp(out);
        pidrl::GarnetSpec spec;
        spec.seed = 5;
        auto [expected, policy] = pidrl::garnet(spec, 0.99);
        expect(loaded.transitions() == expected.transitions() &&
                   loaded.rewards() == expected.rewards() && loaded.gamma() == expected.gamma(),
               "garnet-gen file round-trips bit-exactly");
        expect(run("analyze --mdp-file " + out + " --gains 1,0,0,0.05,0") == 0,
               "analyze accepts --mdp-file");
    }

    // ---- evaluate: reproducible outputs
    {
        const std::string p1 = (g_dir / "e1").string(), p2 = (g_dir / "e2").string();
        const std::string flags =
            " --env chain-walk --algo pid-td --gains 1,0.2,0.1 --lr-v 0.5,50 --steps 20000"
            " --eval-every 5000 --runs 3 --seed 42 --svg --out ";
        expect(run("evaluate" + flags + p1) == 0, "evaluate exits 0");
        expect(run("evaluate" + flags + p2) == 0, "evaluate rerun exits 0");
        expect(!slurp(p1 + "_runs.csv").empty() &&
                   slurp(p1 + "_runs.csv") == slurp(p2 + "_runs.csv"),
               "evaluate runs CSV is byte-identical across reruns");
        expect(slurp(p1 + "_agg.csv") == slurp(p2 + "_agg.csv"), "aggregate CSV byte-identical");
        expect(slurp(p1 + "_agg.svg") == slurp(p2 + "_agg.svg"), "SVG byte-identical");
        const std::string header = slurp(p1 + "_runs.csv").substr(0, 15);
        expect(header == "step,run,error\n", "evaluate long CSV header");
    }

    // ---- control with gain adaptation emits gain columns
    {
        const std::string p = (g_dir / "c1").string();
        expect(run("control --env chain-walk --algo pid-q --adapt-gains --eta 1e-6 --eps-norm 0.1"
                   " --lr-v 0.1,100 --steps 20000 --eval-every 5000 --runs 2 --seed 7 --out " +
                   p) == 0,
               "control --adapt-gains exits 0");
        expect(slurp(p + "_runs.csv").rfind("step,run,error,kp,ki,kd\n", 0) == 0,
               "gain columns appended");
    }

    // ---- experiment from a JSON config
    {
        const fs::path cfg_path = g_dir / "exp.json";
        write_file(cfg_path, R"({
  "environment": "garnet", "mdp_seed": 3, "n_mdps": 2,
  "algo": "td", "lr_v": "0.5,50",
  "steps": 10000, "eval_every": 2000, "runs": 3, "seed": 11,
  "out": ")" + (g_dir / "study").string() + R"("
})");
        expect(run("experiment " + cfg_path.string()) == 0, "experiment exits 0");
        expect(fs::exists(g_dir / "study_runs.csv") && fs::exists(g_dir / "study_agg.csv") &&
                   fs::exists(g_dir / "study_meta.json"),
               "experiment writes runs, aggregate, and study metadata");
        nlohmann::json meta;
        std::ifstream in(g_dir / "study_meta.json");
        in >> meta;
        expect(meta["mdp_seeds"].size() == 2 && meta["runs_per_mdp"] == 3,
               "study metadata records both seed levels");
    }

    // ---- grid-search from a JSON config
    {
        const fs::path cfg_path = g_dir / "grid.json";
        write_file(cfg_path, R"({
  "environment": "chain-walk", "algo": "td",
  "grid_lr_v": ["0.5,50", "0.1,50"],
  "steps": 10000, "eval_every": 2000, "runs": 2, "seed": 3,
  "out": ")" + (g_dir / "gs").string() + R"("
})");
        expect(run("grid-search " + cfg_path.string(), "grid.log") == 0, "grid-search exits 0");
        const std::string log = slurp(g_dir / "grid.log");
        expect(log.find("best:") != std::string::npos, "grid-search prints the best entry");
        const std::string table = slurp(g_dir / "gs_grid.csv");
        expect(std::count(table.begin(), table.end(), '\n') == 3, "grid table has 2 rows");
    }

    // ---- exit codes
    expect(run("evaluate --no-such-flag") == 1, "unknown flag exits 1");
    expect(run("evaluate --env chain-walk --algo sarsa") == 1, "unknown algorithm exits 1");
    expect(run("analyze --mdp-file " + (g_dir / "missing.json").string()) == 3,
           "missing MDP file exits 3");
    {
        const fs::path bad = g_dir / "bad.json";
        write_file(bad, R"({"algo": "td", "no_such_key": 1})");
        expect(run("experiment " + bad.string()) == 1, "unknown config key exits 1");
        write_file(bad, "{ not json");
        expect(run("experiment " + bad.string()) == 1, "malformed JSON exits 1");
    }
    expect(run("evaluate --env chain-walk --algo pid-td --gains 40,0,0,0,0 --lr-v 1,inf"
               " --steps 5000 --eval-every 1000 --runs 2 --seed 1 --out " +
               (g_dir / "div").string()) == 2,
           "divergence-only results exit 2");

    // ---- PIDRL_JOBS env var mirrors --jobs
    {
        const std::string p1 = (g_dir / "j1").string(), p2 = (g_dir / "j2").string();
        const std::string flags =
            " --env chain-walk --algo td --lr-v 0.5,50 --steps 10000 --eval-every 2000"
            " --runs 4 --seed 9 --out ";
        expect(run("evaluate" + flags + p1 + " --jobs 2") == 0, "--jobs 2 exits 0");
        setenv("PIDRL_JOBS", "1", 1);
        expect(run("evaluate" + flags + p2) == 0, "PIDRL_JOBS=1 exits 0");
        unsetenv("PIDRL_JOBS");
        expect(slurp(p1 + "_runs.csv") == slurp(p2 + "_runs.csv"),
               "output independent of worker count");
    }

    fs::remove_all(g_dir);
    if (g_failures > 0) {
        std::printf("%d CLI check(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all CLI checks passed\n");
    return 0;
}
