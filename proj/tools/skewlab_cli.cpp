#include "skewlab/experiments.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

using namespace skewlab;

namespace {

struct Flag {
    const char* name;
    const char* key;
    const char* help;
};

void bind_flags(CLI::App* cmd, const std::vector<Flag>& flags, std::map<std::string, std::string>& overrides) {
    for (const auto& f : flags) {
        const std::string key = f.key;
        cmd->add_option_function<std::string>(
            f.name, [&overrides, key](const std::string& v) { overrides[key] = v; },
            std::string(f.help) + " [" + key + "]");
    }
}

const std::vector<Flag> kSystemFlags = {
    {"--family", "system.family", "fiber family: standard, coupled-p, coupled-q, froeschle, identity"},
    {"--r", "system.r", "kick strength"},
    {"--tau", "system.tau", "coupling of coupled-p"},
    {"--tau1", "system.tau1", "first Froeschle coefficient"},
    {"--tau2", "system.tau2", "second Froeschle coefficient"},
    {"--tau3", "system.tau3", "Froeschle coupling"},
    {"--fiber-dim", "system.fiber_dim", "identity fiber dimension"},
    {"--base", "system.base", "base automorphism: cat or jordan"},
    {"--base-iterates", "system.base_iterates", "iterates of the base per step"},
    {"--kick-iterates", "system.kick_iterates", "base iterate read by the kick"},
};

const std::vector<Flag> kLyapunovFlags = {
    {"--mode", "lyapunov.mode", "iid-kick, markov-shift, deterministic-skew, skew-fiber or expanding-base"},
    {"--n", "lyapunov.n", "steps per seed"},
    {"--burn-in", "lyapunov.burn_in", "discarded steps"},
    {"--qr-period", "lyapunov.qr_period", "steps between reorthonormalizations"},
    {"--seeds", "lyapunov.seeds", "seed list such as 1-10"},
    {"--threads", "lyapunov.threads", "worker threads, 0 for all cores"},
    {"--multiplier", "lyapunov.multiplier", "expanding base multiplier"},
    {"--transition", "lyapunov.transition", "0-1 transition matrix such as 1,1;1,0"},
    {"--sum-tol", "lyapunov.sum_tol", "tolerance on the exponent sum"},
};

const std::vector<Flag> kCheckFlags = {
    {"--grid-n", "hypotheses.grid_n", "grid resolution for beta and zeta"},
    {"--sample-n", "hypotheses.sample_n", "cone invariance samples"},
    {"--sigma", "hypotheses.sigma", "domination exponent"},
};

const std::vector<Flag> kCurveFlags = {
    {"--block", "curves.block", "fiber block carrying the curve"},
    {"--k-max", "curves.k_max", "deepest level"},
    {"--paths", "curves.paths", "sampled paths per level beyond the first"},
    {"--seed", "curves.seed", "path sampling seed"},
    {"--start", "curves.start", "comma-separated start point, base coordinates first"},
    {"--field-mode", "curves.mode", "product or w-adapted"},
    {"--quadrature-tol", "curves.quadrature_tol", "relative quadrature tolerance"},
};

const std::vector<Flag> kMapFlags = {
    {"--point", "maps.point", "comma-separated start point"},
    {"--steps", "maps.steps", "number of iterates"},
    {"--target", "maps.target", "fiber or skew"},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skewlab: skew products over hyperbolic toral automorphisms"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::vector<std::string> sets;
    std::map<std::string, std::string> overrides;
    app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory (default $SKEWLAB_OUT or ./out)");
    app.add_option("--set", sets, "extra key=value override, repeatable");

    std::function<RunResult(ExperimentConfig&)> runner;
    std::string stem;

    auto* maps = app.add_subcommand("maps", "fiber and skew maps");
    maps->require_subcommand(1);
    auto* maps_eval = maps->add_subcommand("eval", "iterate a point and report Jacobian determinants");
    bind_flags(maps_eval, kSystemFlags, overrides);
    bind_flags(maps_eval, kMapFlags, overrides);
    maps_eval->callback([&] {
        runner = run_maps_eval;
        stem = "maps_eval";
    });

    auto* check = app.add_subcommand("check", "hypothesis battery");
    bind_flags(check, kSystemFlags, overrides);
    bind_flags(check, kCheckFlags, overrides);
    check->callback([&] {
        runner = run_check;
        stem = "check";
    });

    auto* lyap = app.add_subcommand("lyapunov", "Lyapunov spectrum of a cocycle or skew product");
    bind_flags(lyap, kSystemFlags, overrides);
    bind_flags(lyap, kLyapunovFlags, overrides);
    lyap->callback([&] {
        runner = run_lyapunov;
        stem = "lyapunov";
    });

    auto* curves = app.add_subcommand("curves", "admissible curves and decomposition ledgers");
    curves->require_subcommand(1);
    auto* curves_run = curves->add_subcommand("run", "grow a curve and compute the ledger");
    bind_flags(curves_run, kSystemFlags, overrides);
    bind_flags(curves_run, kCurveFlags, overrides);
    curves_run->callback([&] {
        runner = run_curves;
        stem = "curves";
    });

    std::string preset;
    auto* repro = app.add_subcommand("reproduce", "run a named preset");
    repro->add_option("preset", preset, "nuhd, coupled-p, coupled-q, froeschle, shift, hypotheses")->required();
    bind_flags(repro, kSystemFlags, overrides);
    bind_flags(repro, kLyapunovFlags, overrides);
    bind_flags(repro, kCheckFlags, overrides);
    repro->callback([&] {
        runner = [&preset](ExperimentConfig& cfg) { return run_preset(preset, cfg); };
        stem = preset;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(config_path);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + s);
            cfg.set(s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& [k, v] : overrides) cfg.set(k, v);
        if (out_dir.empty()) {
            const char* env = std::getenv("SKEWLAB_OUT");
            out_dir = env && *env ? env : "out";
        }

        RunResult res = runner(cfg);
        attach_config(res, cfg);
        for (const auto& path : write_outputs(res, out_dir, stem)) std::cout << "wrote " << path << "\n";
        std::cout << (res.pass ? "PASS" : "FAIL") << " " << stem << "\n";
        for (const auto& f : res.failures) std::cout << "  failed: " << f << "\n";
        return res.pass ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
