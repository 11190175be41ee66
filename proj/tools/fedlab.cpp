// fedlab: generate federated problems, run solvers, verify fixed points and run studies.
//
//   fedlab generate --config ensemble.json --out DIR      -> DIR/problem.json
//   fedlab solve    --config solve.json --out DIR         -> DIR/<label>.csv, DIR/<label>.json
//   fedlab verify   --config verify.json --out DIR        -> DIR/verify.json
//   fedlab study    --config experiment.json --out DIR    -> DIR/report.json + traces
//   fedlab floors   --config experiment.json --out DIR    -> DIR/floors.json + traces
//
// Exit codes: 0 success, 1 numerical failure, 2 configuration error.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fedsplit/fedsplit.hpp"

namespace fs = std::filesystem;
using namespace fedsplit;

namespace
{

struct Invocation
{
    std::string subcommand;
    std::string config_path;
    std::string output_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::vector<std::string> overrides;
};

json load_config(const Invocation& inv)
{
    if (inv.config_path.empty()) {
        throw ConfigError("--config is required");
    }
    json root = read_json_file(inv.config_path);
    expect_object(root, "config");
    for (const auto& assignment : inv.overrides) {
        apply_override(root, assignment);
    }
    return root;
}

/// Relative problem paths resolve against the directory of the config file.
fs::path resolve_relative(const Invocation& inv, const std::string& path)
{
    const fs::path p(path);
    if (p.is_absolute()) return p;
    return fs::path(inv.config_path).parent_path() / p;
}

void reject_flag(bool present, const char* flag, const std::string& subcommand)
{
    if (present) {
        throw ConfigError(std::string(flag) + " does not apply to '" + subcommand + "'");
    }
}

// generate: {"ensemble": {...}, "seed": N}
void cmd_generate(const Invocation& inv)
{
    json root = load_config(inv);
    reject_flag(inv.threads.has_value(), "--threads", inv.subcommand);
    if (inv.seed) root["seed"] = *inv.seed;
    expect_keys(root, {"ensemble", "seed"}, "config");
    if (!root.contains("ensemble")) throw ConfigError("missing key 'ensemble' in config");
    EnsembleSpec spec{ensemble_from_json(root.at("ensemble"), "config.ensemble"),
                      get_field_or<std::uint64_t>(root, "seed", 0, "config")};
    const auto generated = generate(spec);
    write_text_file(fs::path(inv.output_dir) / "problem.json", dump_json(problem_to_json(generated.problem)));
}

// solve: {"problem": path, "algorithm": {...}, "threads": N, "record_timing": bool}
void cmd_solve(const Invocation& inv)
{
    json root = load_config(inv);
    reject_flag(inv.seed.has_value(), "--seed", inv.subcommand);
    if (inv.threads) root["threads"] = *inv.threads;
    expect_keys(root, {"problem", "algorithm", "threads", "record_timing"}, "config");
    const FederatedProblem problem = load_problem(resolve_relative(inv, get_field<std::string>(root, "problem", "config")));
    if (!root.contains("algorithm")) throw ConfigError("missing key 'algorithm' in config");
    const AlgorithmSpec spec = algorithm_spec_from_json(root.at("algorithm"), "config.algorithm");
    RunOptions options;
    options.threads = get_field_or<int>(root, "threads", 1, "config");
    if (options.threads < 0) throw ConfigError("threads must be >= 0");
    const bool timing = get_field_or<bool>(root, "record_timing", false, "config");

    const ReferenceSolution reference = reference_optimum(problem);
    options.reference = reference.x_star;
    const Trace trace = run_algorithm(problem, spec, options);
    write_trace(inv.output_dir, trace.label, trace, reference.F_star, timing);
}

// verify: {"problem": path, "s": scalar, "e": integer}
void cmd_verify(const Invocation& inv)
{
    json root = load_config(inv);
    reject_flag(inv.seed.has_value(), "--seed", inv.subcommand);
    reject_flag(inv.threads.has_value(), "--threads", inv.subcommand);
    expect_keys(root, {"problem", "s", "e"}, "config");
    const FederatedProblem problem = load_problem(resolve_relative(inv, get_field<std::string>(root, "problem", "config")));
    const double s = get_field<double>(root, "s", "config");
    const int e = get_field_or<int>(root, "e", 1, "config");
    if (!(s > 0.0)) throw ConfigError("s must be > 0");
    if (e < 1) throw ConfigError("e must be >= 1");
    const json report = verify_report(problem, s, e);
    write_text_file(fs::path(inv.output_dir) / "verify.json", dump_json(report));
}

ExperimentConfig experiment_config(const Invocation& inv)
{
    json root = load_config(inv);
    if (inv.seed) root["seed"] = *inv.seed;
    if (inv.threads) root["threads"] = *inv.threads;
    root["output_dir"] = inv.output_dir;
    return experiment_config_from_json(root);
}

void cmd_study(const Invocation& inv)
{
    ExperimentConfig config = experiment_config(inv);
    if (config.experiment != ExperimentKind::Auto && config.experiment != ExperimentKind::Conditioning) {
        throw ConfigError("'study' runs the conditioning study; got experiment '" +
                          experiment_name(config.experiment) + "'");
    }
    const StudyReport report = run_conditioning_study(config);
    write_study(report, config);
}

void cmd_floors(const Invocation& inv)
{
    ExperimentConfig config = experiment_config(inv);
    ExperimentKind kind = config.experiment;
    if (kind == ExperimentKind::Auto) {
        kind = config.ensemble.is_least_squares() ? ExperimentKind::InexactFloor : ExperimentKind::Logistic;
    }
    ExperimentResult result;
    switch (kind) {
    case ExperimentKind::InexactFloor: result = run_inexact_floor_experiment(config); break;
    case ExperimentKind::Nonconvergence: result = run_nonconvergence_experiment(config); break;
    case ExperimentKind::Logistic: result = run_logistic_experiment(config); break;
    default: throw ConfigError("'floors' does not run the conditioning study; use 'study'");
    }
    write_experiment(result, config);
}

void emit_error(const char* kind, const std::string& message, std::optional<int> round = std::nullopt,
                std::optional<double> residual = std::nullopt)
{
    json diag = {{"error", kind}, {"message", message}};
    if (round) diag["round"] = *round;
    if (residual) diag["residual"] = *residual;
    std::string line = dump_json(diag, -1);
    std::cerr << line;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Federated optimization experiments: FedSplit, FedGD, FedProx"};
    app.require_subcommand(1);
    Invocation inv;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", inv.config_path, "Configuration JSON file")->required();
        sub->add_option("--out", inv.output_dir, "Output directory");
        sub->add_option("--set", inv.overrides, "Override a config value: dotted.key=value (repeatable)");
        sub->add_option("--seed", inv.seed, "Seed override");
        sub->add_option("--threads", inv.threads, "Worker threads (0 = auto)");
    };
    for (const char* name : {"generate", "solve", "verify", "study", "floors"}) {
        add_common(app.add_subcommand(name));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("config", e.what());
        return 2;
    }
    inv.subcommand = app.get_subcommands().front()->get_name();

    try {
        if (inv.subcommand == "generate") cmd_generate(inv);
        else if (inv.subcommand == "solve") cmd_solve(inv);
        else if (inv.subcommand == "verify") cmd_verify(inv);
        else if (inv.subcommand == "study") cmd_study(inv);
        else cmd_floors(inv);
    } catch (const ConfigError& e) {
        emit_error("config", e.what());
        return 2;
    } catch (const DimensionMismatch& e) {
        emit_error("config", e.what());
        return 2;
    } catch (const NumericalError& e) {
        emit_error("numerical", e.what(), e.round(), e.residual());
        return 1;
    } catch (const std::exception& e) {
        emit_error("internal", e.what());
        return 1;
    }
    return 0;
}
