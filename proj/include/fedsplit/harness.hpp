#pragma once

// Experiment drivers: the FedGD/FedProx nonconvergence study, the conditioning
// (iteration complexity vs kappa) study, the inexact-prox floor study, and the
// logistic regression comparison. Every driver computes its results in memory;
// `write_*` functions persist them.

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedsplit/algorithms.hpp"
#include "fedsplit/analysis.hpp"
#include "fedsplit/datagen.hpp"
#include "fedsplit/serialization.hpp"
#include "fedsplit/trace_io.hpp"

namespace fedsplit
{

enum class ExperimentKind
{
    Auto,
    Nonconvergence,
    Conditioning,
    InexactFloor,
    Logistic,
};

struct ExperimentConfig
{
    EnsembleSpec ensemble;
    /// Empty means "use the experiment's default algorithm set".
    std::vector<AlgorithmSpec> algorithms;
    double eps_target = 1e-3;
    std::optional<std::vector<double>> kappa_grid;
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 0;
    int threads = 1;
    ExperimentKind experiment = ExperimentKind::Auto;
    /// Round cap for first-hit searches in the conditioning study.
    long round_cap = 1000000;
    bool record_timing = false;
};

inline std::string experiment_name(ExperimentKind kind)
{
    switch (kind) {
    case ExperimentKind::Nonconvergence: return "nonconvergence";
    case ExperimentKind::Conditioning: return "conditioning";
    case ExperimentKind::InexactFloor: return "inexact_floor";
    case ExperimentKind::Logistic: return "logistic";
    default: return "auto";
    }
}

inline ExperimentConfig experiment_config_from_json(const json& j)
{
    const std::string ctx = "config";
    expect_keys(j, {"ensemble", "algorithms", "eps_target", "kappa_grid", "output_dir", "seed",
                    "threads", "experiment", "round_cap", "record_timing"},
                ctx);
    ExperimentConfig cfg;
    if (!j.contains("ensemble")) {
        throw ConfigError("missing key 'ensemble' in config");
    }
    cfg.seed = get_field_or<std::uint64_t>(j, "seed", 0, ctx);
    cfg.ensemble = {ensemble_from_json(j.at("ensemble"), "config.ensemble"), cfg.seed};
    cfg.ensemble.validate();
    if (j.contains("algorithms")) {
        const json& list = j.at("algorithms");
        if (!list.is_array()) throw ConfigError("config.algorithms must be an array");
        for (std::size_t i = 0; i < list.size(); ++i) {
            cfg.algorithms.push_back(
                algorithm_spec_from_json(list[i], "config.algorithms[" + std::to_string(i) + "]"));
        }
        if (cfg.algorithms.empty()) throw ConfigError("config.algorithms must be nonempty");
    }
    cfg.eps_target = get_field_or<double>(j, "eps_target", 1e-3, ctx);
    if (!(cfg.eps_target > 0.0)) throw ConfigError("eps_target must be > 0");
    if (j.contains("kappa_grid")) {
        cfg.kappa_grid = get_field<std::vector<double>>(j, "kappa_grid", ctx);
        for (double k : *cfg.kappa_grid) {
            if (!(k >= 1.0)) throw ConfigError("kappa_grid entries must be >= 1");
        }
    }
    cfg.output_dir = get_field_or<std::string>(j, "output_dir", "out", ctx);
    cfg.threads = get_field_or<int>(j, "threads", 1, ctx);
    if (cfg.threads < 0) throw ConfigError("threads must be >= 0");
    cfg.round_cap = get_field_or<long>(j, "round_cap", 1000000, ctx);
    if (cfg.round_cap < 1) throw ConfigError("round_cap must be >= 1");
    cfg.record_timing = get_field_or<bool>(j, "record_timing", false, ctx);
    const auto name = get_field_or<std::string>(j, "experiment", "auto", ctx);
    if (name == "auto") cfg.experiment = ExperimentKind::Auto;
    else if (name == "nonconvergence") cfg.experiment = ExperimentKind::Nonconvergence;
    else if (name == "conditioning") cfg.experiment = ExperimentKind::Conditioning;
    else if (name == "inexact_floor") cfg.experiment = ExperimentKind::InexactFloor;
    else if (name == "logistic") cfg.experiment = ExperimentKind::Logistic;
    else throw ConfigError("config.experiment must be auto, nonconvergence, conditioning, "
                           "inexact_floor or logistic");
    return cfg;
}

namespace detail
{
inline AlgorithmSpec make_spec(AlgorithmKind kind, int rounds)
{
    AlgorithmSpec spec;
    spec.kind = std::move(kind);
    spec.rounds = rounds;
    return spec;
}

inline ProxSolverSpec gradient_prox(int steps)
{
    return {InexactGradientProx{steps}, WarmStart::ProxArgument};
}

inline void require_least_squares(const EnsembleSpec& ensemble, const char* experiment)
{
    if (!ensemble.is_least_squares()) {
        throw ConfigError(std::string(experiment) + " requires a least-squares ensemble");
    }
}

/// Relative difference |a - b| / max(|b|, tiny).
inline double relative_difference(double a, double b)
{
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}
} // namespace detail

struct ExperimentResult
{
    ExperimentKind kind = ExperimentKind::Auto;
    ReferenceSolution reference;
    std::vector<Trace> traces;
    json floors;
};

// ---------------------------------------------------------------------------
// Nonconvergence of FedGD (e > 1) and FedProx

inline std::vector<AlgorithmSpec> default_nonconvergence_algorithms()
{
    return {detail::make_spec(FedGDSpec{std::nullopt, 1}, 1000),
            detail::make_spec(FedGDSpec{std::nullopt, 10}, 1000),
            detail::make_spec(FedGDSpec{std::nullopt, 100}, 1000),
            detail::make_spec(FedProxSpec{}, 1000),
            detail::make_spec(FedSplitSpec{}, 1000)};
}

/// Runs every algorithm on one least-squares instance and compares each terminal gap
/// against the gap of its closed-form limit (zero for FedSplit and FedGD with e = 1).
inline ExperimentResult run_nonconvergence_experiment(const ExperimentConfig& config)
{
    detail::require_least_squares(config.ensemble, "nonconvergence experiment");
    const auto generated = generate(config.ensemble);
    const FederatedProblem& problem = generated.problem;
    ExperimentResult result;
    result.kind = ExperimentKind::Nonconvergence;
    result.reference = reference_optimum(problem);
    const double F_star = result.reference.F_star;

    const auto algorithms =
        config.algorithms.empty() ? default_nonconvergence_algorithms() : config.algorithms;
    RunOptions options;
    options.threads = config.threads;
    options.reference = result.reference.x_star;

    json rows = json::array();
    for (const auto& spec : algorithms) {
        Trace trace = run_algorithm(problem, spec, options);
        std::optional<Vector> limit;
        std::visit(
            [&](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, FedGDSpec>) {
                    limit = fedgd_limit_lsq(problem, trace.stepsize, k.epochs);
                } else if constexpr (std::is_same_v<K, FedProxSpec>) {
                    limit = fedprox_limit_lsq(problem, trace.stepsize);
                } else {
                    limit = result.reference.x_star;
                }
            },
            spec.kind);
        const double terminal_gap = trace.final_record().cost - F_star;
        const double predicted = problem.cost(*limit) - F_star;
        // Below this level a floor is indistinguishable from roundoff in F.
        const double resolvable = 1e-10 * (1.0 + std::abs(F_star));
        const bool reaches_optimum = std::abs(predicted) <= resolvable;
        rows.push_back({{"label", trace.label},
                        {"stepsize", trace.stepsize},
                        {"terminal_gap", terminal_gap},
                        {"predicted_floor", predicted},
                        {"limit_is_optimum", reaches_optimum},
                        {"relative_difference", reaches_optimum ? json(nullptr)
                                                                : json(detail::relative_difference(terminal_gap, predicted))},
                        {"limit_distance_to_optimum", (*limit - result.reference.x_star).norm()}});
        result.traces.push_back(std::move(trace));
    }
    result.floors = {{"experiment", "nonconvergence"},
                     {"F_star", F_star},
                     {"ensemble", ensemble_to_json(config.ensemble.kind)},
                     {"seed", config.seed},
                     {"algorithms", std::move(rows)}};
    return result;
}

// ---------------------------------------------------------------------------
// Inexact proximal updates on least squares

inline std::vector<AlgorithmSpec> default_floor_algorithms()
{
    return {detail::make_spec(FedSplitSpec{std::nullopt, ProxSolverSpec{}}, 1000),
            detail::make_spec(FedSplitSpec{std::nullopt, detail::gradient_prox(1)}, 1000),
            detail::make_spec(FedSplitSpec{std::nullopt, detail::gradient_prox(5)}, 1000),
            detail::make_spec(FedSplitSpec{std::nullopt, detail::gradient_prox(10)}, 1000)};
}

/// For every FedSplit variant, measures the largest per-client prox residual b_bar
/// over the run and compares the terminal distance to x* with (sqrt(kappa) + 1) b_bar.
/// Inexact runs are also compared against the exact-prox run (if one is configured).
inline ExperimentResult run_inexact_floor_experiment(const ExperimentConfig& config)
{
    detail::require_least_squares(config.ensemble, "inexact floor experiment");
    const auto generated = generate(config.ensemble);
    const FederatedProblem& problem = generated.problem;
    ExperimentResult result;
    result.kind = ExperimentKind::InexactFloor;
    result.reference = reference_optimum(problem);
    const double F_star = result.reference.F_star;
    const double kappa = problem.constants().kappa();

    const auto algorithms = config.algorithms.empty() ? default_floor_algorithms() : config.algorithms;
    RunOptions options;
    options.threads = config.threads;
    options.reference = result.reference.x_star;

    std::optional<double> exact_gap;
    json rows = json::array();
    for (const auto& spec : algorithms) {
        Trace trace = run_algorithm(problem, spec, options);
        double b_bar = 0.0;
        for (const auto& r : trace.records) {
            b_bar = std::max(b_bar, r.prox_residual_max.value_or(0.0));
        }
        const auto& last = trace.final_record();
        const double distance = last.dist_to_ref.value_or((last.x - result.reference.x_star).norm());
        const double floor = (std::sqrt(kappa) + 1.0) * b_bar;
        const bool exact =
            std::holds_alternative<FedSplitSpec>(spec.kind) && std::get<FedSplitSpec>(spec.kind).prox.is_exact();
        if (exact && !exact_gap) {
            exact_gap = last.cost - F_star;
        }
        rows.push_back({{"label", trace.label},
                        {"exact_prox", exact},
                        {"b_bar", b_bar},
                        {"terminal_distance", distance},
                        {"floor_bound", floor},
                        {"within_bound", distance <= 1.1 * floor || (b_bar == 0.0 && distance <= 1e-8)},
                        {"terminal_gap", last.cost - F_star}});
        result.traces.push_back(std::move(trace));
    }
    if (exact_gap) {
        for (auto& row : rows) {
            row["gap_vs_exact"] = std::abs(row["terminal_gap"].get<double>() - *exact_gap);
        }
    }
    result.floors = {{"experiment", "inexact_floor"},
                     {"F_star", F_star},
                     {"kappa", kappa},
                     {"ensemble", ensemble_to_json(config.ensemble.kind)},
                     {"seed", config.seed},
                     {"algorithms", std::move(rows)}};
    return result;
}

// ---------------------------------------------------------------------------
// Logistic regression

/// Stepsize for FedSplit on losses without a global strong convexity constant:
/// 1/sqrt(ell_loc L*) with ell_loc the smallest client Hessian eigenvalue at the
/// reference optimum.
inline double local_fedsplit_stepsize(const FederatedProblem& problem, const Vector& x_star)
{
    double ell_loc = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < problem.num_clients(); ++j) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(loss_hessian(problem.client(j), x_star),
                                                  Eigen::EigenvaluesOnly);
        ell_loc = std::min(ell_loc, eig.eigenvalues().minCoeff());
    }
    if (!(ell_loc > 0.0)) {
        throw StepsizeError("local curvature at the reference optimum is zero; set s explicitly");
    }
    return 1.0 / std::sqrt(ell_loc * problem.constants().L_star);
}

inline std::vector<AlgorithmSpec> default_logistic_algorithms()
{
    return {detail::make_spec(FedGDSpec{std::nullopt, 1}, 500),
            detail::make_spec(FedSplitSpec{std::nullopt, ProxSolverSpec{InexactNewtonProx{1e-10, 100}}}, 500),
            detail::make_spec(FedSplitSpec{std::nullopt, detail::gradient_prox(1)}, 500),
            detail::make_spec(FedSplitSpec{std::nullopt, detail::gradient_prox(5)}, 500),
            detail::make_spec(FedSplitSpec{std::nullopt, detail::gradient_prox(10)}, 500)};
}

inline ExperimentResult run_logistic_experiment(const ExperimentConfig& config)
{
    if (config.ensemble.is_least_squares()) {
        throw ConfigError("logistic experiment requires a logistic ensemble");
    }
    const auto generated = generate(config.ensemble);
    const FederatedProblem& problem = generated.problem;
    ExperimentResult result;
    result.kind = ExperimentKind::Logistic;
    result.reference = reference_optimum(problem, 1e-12);
    const double F_star = result.reference.F_star;

    auto algorithms = config.algorithms.empty() ? default_logistic_algorithms() : config.algorithms;
    std::optional<double> local_s;
    for (auto& spec : algorithms) {
        if (auto* split = std::get_if<FedSplitSpec>(&spec.kind); split && !split->s) {
            if (!local_s) local_s = local_fedsplit_stepsize(problem, result.reference.x_star);
            split->s = *local_s;
        }
    }
    RunOptions options;
    options.threads = config.threads;
    options.reference = result.reference.x_star;

    json rows = json::array();
    for (const auto& spec : algorithms) {
        Trace trace = run_algorithm(problem, spec, options);
        const auto hit = iteration_complexity(trace, F_star, 1e-8);
        rows.push_back({{"label", trace.label},
                        {"stepsize", trace.stepsize},
                        {"terminal_gap", trace.final_record().cost - F_star},
                        {"first_round_gap_below_1e-8", hit ? json(*hit) : json(nullptr)}});
        result.traces.push_back(std::move(trace));
    }
    result.floors = {{"experiment", "logistic"},
                     {"F_star", F_star},
                     {"reference_residual", result.reference.residual},
                     {"ensemble", ensemble_to_json(config.ensemble.kind)},
                     {"seed", config.seed},
                     {"algorithms", std::move(rows)}};
    if (local_s) result.floors["fedsplit_local_stepsize"] = *local_s;
    return result;
}

// ---------------------------------------------------------------------------
// Conditioning study

struct StudyRow
{
    double kappa = 1.0;
    std::string algorithm;
    std::optional<long> T_hit;
    double final_gap = 0.0;
    bool censored = false;
};

struct StudyFit
{
    std::string algorithm;
    LineFit fit;
    std::size_t censored = 0;
};

struct StudyReport
{
    std::vector<StudyRow> rows;
    std::vector<StudyFit> fits;
    double eps = 1e-3;
    /// Per-cell gap traces up to the hit round (or the cap), in row order.
    std::vector<Trace> traces;
};

inline std::vector<AlgorithmSpec> default_study_algorithms()
{
    return {detail::make_spec(FedGDSpec{std::nullopt, 1}, 1), detail::make_spec(FedSplitSpec{}, 1)};
}

/// For each kappa, generates a conditioned instance (same seed, so only kappa varies),
/// runs each algorithm until F(x^t) - F* <= eps or the round cap, and fits
/// log10 T against log10 kappa over the uncensored rows.
inline StudyReport run_conditioning_study(const ExperimentConfig& config)
{
    const auto* base = std::get_if<ConditionedLSQ>(&config.ensemble.kind);
    if (!base) {
        throw ConfigError("conditioning study requires a conditioned_lsq ensemble");
    }
    if (!config.kappa_grid || config.kappa_grid->empty()) {
        throw ConfigError("conditioning study requires a nonempty kappa_grid");
    }
    std::vector<double> grid = *config.kappa_grid;
    std::sort(grid.begin(), grid.end());
    const auto algorithms = config.algorithms.empty() ? default_study_algorithms() : config.algorithms;

    const std::size_t cells = grid.size() * algorithms.size();
    std::vector<StudyRow> rows(cells);
    std::vector<Trace> traces(cells);
    const int round_cap = static_cast<int>(std::min<long>(config.round_cap, std::numeric_limits<int>::max()));

    // Cells are independent; each writes only its own slot.
    detail::for_each_client(static_cast<Eigen::Index>(grid.size()), config.threads, [&](Eigen::Index ki) {
        ConditionedLSQ spec = *base;
        spec.kappa = grid[static_cast<std::size_t>(ki)];
        const auto generated = gen_conditioned_lsq(spec, config.seed);
        const auto reference = reference_optimum(generated.problem);
        for (std::size_t ai = 0; ai < algorithms.size(); ++ai) {
            AlgorithmSpec run_spec = algorithms[ai];
            run_spec.rounds = round_cap;
            RunOptions options;
            options.keep_iterates = false;
            options.stop_when = [&](const TraceRecord& r) { return r.cost - reference.F_star <= config.eps_target; };
            Trace trace = run_algorithm(generated.problem, run_spec, options);
            const std::size_t slot = static_cast<std::size_t>(ki) * algorithms.size() + ai;
            StudyRow& row = rows[slot];
            row.kappa = spec.kappa;
            row.algorithm = trace.label;
            row.T_hit = iteration_complexity(trace, reference.F_star, config.eps_target);
            row.censored = !row.T_hit;
            row.final_gap = trace.final_record().cost - reference.F_star;
            traces[slot] = std::move(trace);
        }
    });

    StudyReport report;
    report.eps = config.eps_target;
    report.rows = std::move(rows);
    report.traces = std::move(traces);
    for (const auto& spec : algorithms) {
        const std::string label = label_of(spec);
        StudyFit fit;
        fit.algorithm = label;
        std::vector<double> xs;
        std::vector<double> ys;
        for (const auto& row : report.rows) {
            if (row.algorithm != label) continue;
            if (row.censored) {
                ++fit.censored;
                continue;
            }
            xs.push_back(std::log10(row.kappa));
            ys.push_back(std::log10(static_cast<double>(*row.T_hit)));
        }
        if (xs.size() >= 2) {
            fit.fit = fit_line(xs, ys);
        }
        report.fits.push_back(fit);
    }
    return report;
}

inline json study_report_to_json(const StudyReport& report, const ExperimentConfig& config)
{
    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"kappa", r.kappa},
                        {"algorithm", r.algorithm},
                        {"T_hit", r.T_hit ? json(*r.T_hit) : json(nullptr)},
                        {"final_gap", r.final_gap},
                        {"censored", r.censored}});
    }
    json fits = json::array();
    for (const auto& f : report.fits) {
        json entry = {{"algorithm", f.algorithm}, {"censored_rows", f.censored}, {"points", f.fit.points}};
        if (f.fit.points >= 2) {
            entry["slope"] = f.fit.slope;
            entry["intercept"] = f.fit.intercept;
            entry["residual_std_error"] = f.fit.residual_std_error;
        } else {
            entry["slope"] = nullptr;
        }
        fits.push_back(std::move(entry));
    }
    return {{"experiment", "conditioning"},
            {"eps", report.eps},
            {"ensemble", ensemble_to_json(config.ensemble.kind)},
            {"seed", config.seed},
            {"round_cap", config.round_cap},
            {"rows", std::move(rows)},
            {"fits", std::move(fits)}};
}

// ---------------------------------------------------------------------------
// Persistence

inline void write_experiment(const ExperimentResult& result, const ExperimentConfig& config)
{
    const double F_star = result.reference.F_star;
    for (const auto& trace : result.traces) {
        write_trace(config.output_dir, trace.label, trace, F_star, config.record_timing);
    }
    write_text_file(config.output_dir / "floors.json", dump_json(result.floors));
}

inline void write_study(const StudyReport& report, const ExperimentConfig& config)
{
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& row = report.rows[i];
        const std::string stem = "kappa_" + format_double(row.kappa) + "_" + row.algorithm;
        write_trace(config.output_dir, stem, report.traces[i], std::nullopt, config.record_timing);
    }
    write_text_file(config.output_dir / "report.json", dump_json(study_report_to_json(report, config)));
}

// ---------------------------------------------------------------------------
// Fixed-point verification report

inline json verify_report(const FederatedProblem& problem, double s, int epochs)
{
    const Vector x_ls = lsq_optimum(problem);
    const Vector x_gd = fedgd_limit_lsq(problem, s, epochs);
    const Vector x_prox = fedprox_limit_lsq(problem, s);
    const auto residual_json = [&](const Vector& x) -> json {
        const auto r = fixedpoint_residuals(problem, s, epochs, x);
        return {{"fedgd", r.fedgd}, {"fedprox", r.fedprox}, {"stationarity", r.stationarity}};
    };
    json instance = {{"d", problem.dim()}, {"m", problem.num_clients()}, {"s", s}, {"e", epochs}};
    if (problem.seed()) instance["seed"] = *problem.seed();
    return {{"instance", std::move(instance)},
            {"oracle_points",
             {{"x_ls", vector_to_json(x_ls)}, {"x_fedgd", vector_to_json(x_gd)}, {"x_fedprox", vector_to_json(x_prox)}}},
            {"residuals",
             {{"at_x_ls", residual_json(x_ls)},
              {"at_fedgd_limit", residual_json(x_gd)},
              {"at_fedprox_limit", residual_json(x_prox)}}},
            {"distances",
             {{"fedgd_limit_to_x_ls", (x_gd - x_ls).norm()}, {"fedprox_limit_to_x_ls", (x_prox - x_ls).norm()}}},
            {"costs",
             {{"F_star", problem.cost(x_ls)},
              {"fedgd_limit_gap", problem.cost(x_gd) - problem.cost(x_ls)},
              {"fedprox_limit_gap", problem.cost(x_prox) - problem.cost(x_ls)}}}};
}

} // namespace fedsplit
