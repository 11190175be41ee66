#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "fedsplit/blockvec.hpp"
#include "fedsplit/errors.hpp"
#include "fedsplit/format.hpp"
#include "fedsplit/losses.hpp"
#include "fedsplit/problem.hpp"
#include "fedsplit/prox.hpp"

namespace fedsplit
{

// ---------------------------------------------------------------------------
// Algorithm specifications

/// e local gradient steps of size s per round, then server averaging. s defaults to 1/L*.
struct FedGDSpec
{
    std::optional<double> s;
    int epochs = 1;
};

/// One exact prox step per round, then averaging. s defaults to 1.
struct FedProxSpec
{
    std::optional<double> s;
};

/// Peaceman-Rachford splitting with local prox solvers. s defaults to 1/sqrt(ell* L*).
struct FedSplitSpec
{
    std::optional<double> s;
    ProxSolverSpec prox;
};

/// FedSplit on f_j + (lambda/2)||x - x^(1)||^2 with s = 1/sqrt(lambda (L* + lambda)).
struct FedSplitRegularizedSpec
{
    double eps = 1e-2;
    std::optional<double> lambda_override;
};

using AlgorithmKind = std::variant<FedGDSpec, FedProxSpec, FedSplitSpec, FedSplitRegularizedSpec>;

struct AlgorithmSpec
{
    AlgorithmKind kind = FedSplitSpec{};
    int rounds = 100;
    std::optional<Vector> init;
    /// Free-form name used for output files; derived from the kind when empty.
    std::string label;

    void validate() const
    {
        if (rounds < 1) {
            throw ConfigError("rounds must be >= 1");
        }
        std::visit(
            [](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, FedGDSpec>) {
                    if (k.s && !(*k.s > 0.0)) throw ConfigError("FedGD stepsize must be > 0");
                    if (k.epochs < 1) throw ConfigError("FedGD epochs must be >= 1");
                } else if constexpr (std::is_same_v<K, FedProxSpec>) {
                    if (k.s && !(*k.s > 0.0)) throw ConfigError("FedProx stepsize must be > 0");
                } else if constexpr (std::is_same_v<K, FedSplitSpec>) {
                    if (k.s && !(*k.s > 0.0)) throw ConfigError("FedSplit stepsize must be > 0");
                    k.prox.validate();
                } else {
                    if (!(k.eps > 0.0)) throw ConfigError("regularized FedSplit requires eps > 0");
                    if (k.lambda_override && !(*k.lambda_override > 0.0)) {
                        throw ConfigError("lambda override must be > 0");
                    }
                }
            },
            kind);
    }
};

inline std::string default_label(const AlgorithmKind& kind)
{
    return std::visit(
        [](const auto& k) -> std::string {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, FedGDSpec>) {
                return "fedgd_e" + std::to_string(k.epochs);
            } else if constexpr (std::is_same_v<K, FedProxSpec>) {
                return "fedprox";
            } else if constexpr (std::is_same_v<K, FedSplitSpec>) {
                return std::visit(
                    [](const auto& mode) -> std::string {
                        using M = std::decay_t<decltype(mode)>;
                        if constexpr (std::is_same_v<M, ExactProx>) {
                            return "fedsplit_exact";
                        } else if constexpr (std::is_same_v<M, InexactGradientProx>) {
                            return "fedsplit_grad_e" + std::to_string(mode.steps);
                        } else {
                            return "fedsplit_newton";
                        }
                    },
                    k.prox.mode);
            } else {
                return "fedsplit_regularized";
            }
        },
        kind);
}

inline std::string label_of(const AlgorithmSpec& spec)
{
    return spec.label.empty() ? default_label(spec.kind) : spec.label;
}

// ---------------------------------------------------------------------------
// Default stepsizes

inline double fedgd_default_stepsize(const FederatedProblem& problem)
{
    return 1.0 / problem.constants().L_star;
}

inline double fedsplit_default_stepsize(const FederatedProblem& problem)
{
    const auto c = problem.constants();
    if (!(c.ell_star > 0.0)) {
        throw StepsizeError(
            "FedSplit default stepsize 1/sqrt(ell* L*) needs strongly convex clients; "
            "set s explicitly or use the regularized variant");
    }
    return 1.0 / std::sqrt(c.ell_star * c.L_star);
}

// ---------------------------------------------------------------------------
// Traces

/// One row per round. Row t holds the server iterate produced by round t, so the
/// last row of a T-round run is x^(T+1).
struct TraceRecord
{
    int t = 0;
    Vector x;
    double cost = 0.0;
    /// ||sum_j grad f_j(x)||
    double grad_norm = 0.0;
    std::optional<double> dist_to_ref;
    /// ||r^(t)|| over the whole block vector.
    std::optional<double> prox_residual;
    /// max_j ||r_j^(t)||, the per-client error of the same round.
    std::optional<double> prox_residual_max;
};

struct Trace
{
    std::string label;
    AlgorithmSpec spec;
    std::optional<std::uint64_t> seed;
    /// Stepsize actually used (after defaults), and lambda for the regularized variant.
    double stepsize = 0.0;
    std::optional<double> lambda;
    double wall_ms = 0.0;
    std::vector<TraceRecord> records;

    const TraceRecord& final_record() const
    {
        if (records.empty()) {
            throw NumericalError("empty trace");
        }
        return records.back();
    }
};

/// First round whose gradient norm is at most tol.
inline std::optional<int> stationarity_probe(const Trace& trace, double tol)
{
    for (const auto& r : trace.records) {
        if (r.grad_norm <= tol) {
            return r.t;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Execution options

struct RoundView
{
    int t;
    const Vector& x;
    /// Client state z for FedSplit; the pre-averaging local iterates otherwise.
    const BlockVector& blocks;
};

struct RunOptions
{
    /// 1 runs clients serially; 0 uses the hardware concurrency.
    int threads = 1;
    std::optional<Vector> reference;
    std::function<void(const RoundView&)> observer;
    /// Abort when the cost exceeds this multiple of the initial cost.
    double divergence_factor = 1e3;
    /// Store x in every record; off for long first-hit runs.
    bool keep_iterates = true;
    /// Stops the run early once a recorded round satisfies it.
    std::function<bool(const TraceRecord&)> stop_when;
};

namespace detail
{
inline int resolve_threads(int threads)
{
    if (threads > 0) {
        return threads;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(j) for every client. Work is partitioned into contiguous ranges; the
/// first failing client (lowest index) determines the rethrown exception.
template <class Fn>
void for_each_client(Eigen::Index m, int threads, Fn&& fn)
{
    const int workers = std::min<int>(resolve_threads(threads), static_cast<int>(m));
    if (workers <= 1) {
        for (Eigen::Index j = 0; j < m; ++j) {
            fn(j);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(m));
    {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            const Eigen::Index begin = m * w / workers;
            const Eigen::Index end = m * (w + 1) / workers;
            pool.emplace_back([&, begin, end] {
                for (Eigen::Index j = begin; j < end; ++j) {
                    try {
                        fn(j);
                    } catch (...) {
                        errors[static_cast<std::size_t>(j)] = std::current_exception();
                        return;
                    }
                }
            });
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

inline Vector resolve_init(const FederatedProblem& problem, const std::optional<Vector>& init)
{
    if (!init) {
        return Vector::Zero(problem.dim());
    }
    if (init->size() != problem.dim()) {
        throw DimensionMismatch("initial point dimension differs from problem dimension");
    }
    return *init;
}
} // namespace detail

// ---------------------------------------------------------------------------
// Round steppers. Each holds the full algorithm state and advances one round.

class FedGDStepper
{
public:
    FedGDStepper(const FederatedProblem& problem, double s, int epochs, Vector init, int threads = 1)
        : problem_(&problem), s_(s), epochs_(epochs), threads_(threads), x_(std::move(init)),
          local_(problem.dim(), problem.num_clients())
    {
        if (!(s > 0.0)) throw StepsizeError("FedGD requires s > 0");
        if (epochs < 1) throw ConfigError("FedGD requires epochs >= 1");
    }

    void step(int /*t*/)
    {
        detail::for_each_client(problem_->num_clients(), threads_, [&](Eigen::Index j) {
            Vector u = x_;
            for (int k = 0; k < epochs_; ++k) {
                u -= s_ * loss_gradient(problem_->client(j), u);
            }
            local_.block(j) = u;
        });
        x_ = block_average(local_);
    }

    const Vector& server() const { return x_; }
    const BlockVector& blocks() const { return local_; }
    std::optional<double> residual_norm() const { return std::nullopt; }
    std::optional<double> residual_max() const { return std::nullopt; }

private:
    const FederatedProblem* problem_;
    double s_;
    int epochs_;
    int threads_;
    Vector x_;
    BlockVector local_;
};

class FedProxStepper
{
public:
    FedProxStepper(const FederatedProblem& problem, double s, Vector init, int threads = 1)
        : problem_(&problem), s_(s), threads_(threads), x_(std::move(init)),
          local_(problem.dim(), problem.num_clients())
    {
        if (!(s > 0.0)) throw StepsizeError("FedProx requires s > 0");
    }

    void step(int /*t*/)
    {
        detail::for_each_client(problem_->num_clients(), threads_, [&](Eigen::Index j) {
            local_.block(j) = prox_exact(problem_->client(j), s_, x_);
        });
        x_ = block_average(local_);
    }

    const Vector& server() const { return x_; }
    const BlockVector& blocks() const { return local_; }
    std::optional<double> residual_norm() const { return std::nullopt; }
    std::optional<double> residual_max() const { return std::nullopt; }

private:
    const FederatedProblem* problem_;
    double s_;
    int threads_;
    Vector x_;
    BlockVector local_;
};

/// Per round, for every client j:
///   z_j^{t+1/2} = prox_update_j(2 x^t - z_j^t)
///   z_j^{t+1}   = z_j^t + 2 (z_j^{t+1/2} - x^t)
/// then x^{t+1} = average of z^{t+1}.
///
/// With an inexact solver on an all-quadratic problem the residual
/// r^(t) = prox_update(2 x^t - z^t) - prox_{sF}(2 x^t - z^t) is measured against
/// the closed form at the same arguments.
class FedSplitStepper
{
public:
    FedSplitStepper(const FederatedProblem& problem, double s, ProxSolverSpec prox, Vector init,
                    int threads = 1, std::optional<QuadraticShift> shift = std::nullopt)
        : problem_(&problem), s_(s), prox_(std::move(prox)), threads_(threads),
          shift_(std::move(shift)), x_(init), z_(BlockVector::replicate(init, problem.num_clients())),
          residuals_(problem.dim(), problem.num_clients())
    {
        if (!(s > 0.0)) throw StepsizeError("FedSplit requires s > 0");
        prox_.validate();
        const auto c = problem.constants();
        inner_constants_ = {c.ell_star, c.L_star};
        measure_residual_ = problem.all_quadratic();
    }

    void step(int t)
    {
        BlockVector next = z_;
        const bool exact = prox_.is_exact();
        detail::for_each_client(problem_->num_clients(), threads_, [&](Eigen::Index j) {
            const Vector argument = 2.0 * x_ - z_.block(j);
            std::optional<Vector> start;
            if (prox_.warm_start == WarmStart::ServerIterate) {
                start = x_;
            }
            Vector half;
            try {
                half = prox_evaluate(problem_->client(j), s_, argument, prox_, inner_constants_,
                                     start, shift_);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string("client ") + std::to_string(j) + ": " + e.what(),
                                     t, e.residual());
            }
            if (exact) {
                residuals_.block(j).setZero();
            } else if (measure_residual_) {
                residuals_.block(j) =
                    half - prox_evaluate(problem_->client(j), s_, argument, ProxSolverSpec{},
                                         inner_constants_, std::nullopt, shift_);
            }
            next.block(j) = z_.block(j) + 2.0 * (half - x_);
        });
        z_ = std::move(next);
        x_ = block_average(z_);
    }

    const Vector& server() const { return x_; }
    const BlockVector& blocks() const { return z_; }
    double stepsize() const { return s_; }

    std::optional<double> residual_norm() const
    {
        if (!prox_.is_exact() && !measure_residual_) return std::nullopt;
        return residuals_.norm();
    }

    std::optional<double> residual_max() const
    {
        if (!prox_.is_exact() && !measure_residual_) return std::nullopt;
        return residuals_.matrix().colwise().norm().maxCoeff();
    }

private:
    const FederatedProblem* problem_;
    double s_;
    ProxSolverSpec prox_;
    int threads_;
    std::optional<QuadraticShift> shift_;
    ConvexityConstants inner_constants_;
    bool measure_residual_ = false;
    Vector x_;
    BlockVector z_;
    BlockVector residuals_;
};

/// Runs exactly `rounds` rounds, recording one TraceRecord per round.
template <class Stepper>
void drive(const FederatedProblem& problem, Stepper& stepper, int rounds, const RunOptions& options,
           Trace& trace)
{
    const auto start = std::chrono::steady_clock::now();
    const double initial_cost = problem.cost(stepper.server());
    const double ceiling = options.divergence_factor * (initial_cost + 1.0);
    trace.records.clear();
    trace.records.reserve(static_cast<std::size_t>(std::min(rounds, 1 << 14)));
    for (int t = 1; t <= rounds; ++t) {
        stepper.step(t);
        const Vector& x = stepper.server();
        TraceRecord rec;
        rec.t = t;
        if (options.keep_iterates || t == rounds) {
            rec.x = x;
        }
        rec.cost = problem.cost(x);
        rec.grad_norm = problem.gradient(x).norm();
        if (options.reference) {
            rec.dist_to_ref = (x - *options.reference).norm();
        }
        rec.prox_residual = stepper.residual_norm();
        rec.prox_residual_max = stepper.residual_max();
        if (!std::isfinite(rec.cost) || rec.cost > ceiling) {
            throw NumericalError("cost " + format_double(rec.cost) + " exceeded " +
                                     format_double(options.divergence_factor) +
                                     " x (initial cost + 1); stepsize too large",
                                 t, rec.grad_norm);
        }
        if (options.observer) {
            options.observer(RoundView{t, x, stepper.blocks()});
        }
        const bool stop = options.stop_when && options.stop_when(rec);
        if (stop && !options.keep_iterates) {
            rec.x = x;
        }
        trace.records.push_back(std::move(rec));
        if (stop) {
            break;
        }
    }
    trace.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// Entry points

inline Trace run_fedgd(const FederatedProblem& problem, double s, int epochs, int rounds,
                       const std::optional<Vector>& init = std::nullopt,
                       const RunOptions& options = {})
{
    FedGDStepper stepper(problem, s, epochs, detail::resolve_init(problem, init), options.threads);
    Trace trace;
    trace.spec = {FedGDSpec{s, epochs}, rounds, init, ""};
    trace.label = label_of(trace.spec);
    trace.stepsize = s;
    drive(problem, stepper, rounds, options, trace);
    return trace;
}

inline Trace run_fedprox(const FederatedProblem& problem, double s, int rounds,
                         const std::optional<Vector>& init = std::nullopt,
                         const RunOptions& options = {})
{
    FedProxStepper stepper(problem, s, detail::resolve_init(problem, init), options.threads);
    Trace trace;
    trace.spec = {FedProxSpec{s}, rounds, init, ""};
    trace.label = label_of(trace.spec);
    trace.stepsize = s;
    drive(problem, stepper, rounds, options, trace);
    return trace;
}

inline Trace run_fedsplit(const FederatedProblem& problem, double s, const ProxSolverSpec& prox,
                          int rounds, const std::optional<Vector>& init = std::nullopt,
                          const RunOptions& options = {})
{
    FedSplitStepper stepper(problem, s, prox, detail::resolve_init(problem, init), options.threads);
    Trace trace;
    trace.spec = {FedSplitSpec{s, prox}, rounds, init, ""};
    trace.label = label_of(trace.spec);
    trace.stepsize = s;
    drive(problem, stepper, rounds, options, trace);
    return trace;
}

/// Rough ||x^(1) - x*|| from centralized gradient descent with step 1/sum_j L_j, stopped
/// once ||grad F|| <= 1e-2 max(1, ||grad F(x^(1))||).
inline double estimate_initial_distance(const FederatedProblem& problem, const Vector& init,
                                        int max_iter = 100000)
{
    double total_L = 0.0;
    for (Eigen::Index j = 0; j < problem.num_clients(); ++j) {
        total_L += problem.client_constants(j).L;
    }
    if (!(total_L > 0.0)) {
        return 0.0;
    }
    Vector x = init;
    Vector g = problem.gradient(x);
    const double stop = 1e-2 * std::max(1.0, g.norm());
    for (int k = 0; k < max_iter && g.norm() > stop; ++k) {
        x -= g / total_L;
        g = problem.gradient(x);
    }
    return (x - init).norm();
}

/// lambda = eps / (2 m est^2); a zero estimate means x^(1) is already optimal and
/// any lambda works, so est is floored at 1e-8.
inline double default_regularization(const FederatedProblem& problem, double eps, const Vector& init)
{
    const double est = std::max(estimate_initial_distance(problem, init), 1e-8);
    return eps / (2.0 * static_cast<double>(problem.num_clients()) * est * est);
}

inline Trace run_fedsplit_regularized(const FederatedProblem& problem, double eps, int rounds,
                                      const std::optional<Vector>& init = std::nullopt,
                                      std::optional<double> lambda_override = std::nullopt,
                                      const RunOptions& options = {})
{
    if (!(eps > 0.0)) {
        throw ConfigError("regularized FedSplit requires eps > 0");
    }
    const Vector x1 = detail::resolve_init(problem, init);
    const double lambda =
        lambda_override ? *lambda_override : default_regularization(problem, eps, x1);
    if (!(lambda > 0.0)) {
        throw ConfigError("regularization lambda must be > 0");
    }
    const double L_star = problem.constants().L_star;
    const double s = 1.0 / std::sqrt(lambda * (L_star + lambda));
    FedSplitStepper stepper(problem, s, ProxSolverSpec{}, x1, options.threads,
                            QuadraticShift{lambda, x1});
    Trace trace;
    trace.spec = {FedSplitRegularizedSpec{eps, lambda_override}, rounds, init, ""};
    trace.label = label_of(trace.spec);
    trace.stepsize = s;
    trace.lambda = lambda;
    drive(problem, stepper, rounds, options, trace);
    return trace;
}

/// Dispatches on the spec kind, applying default stepsizes.
inline Trace run_algorithm(const FederatedProblem& problem, const AlgorithmSpec& spec,
                           const RunOptions& options = {})
{
    spec.validate();
    Trace trace = std::visit(
        [&](const auto& k) -> Trace {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, FedGDSpec>) {
                const double s = k.s ? *k.s : fedgd_default_stepsize(problem);
                return run_fedgd(problem, s, k.epochs, spec.rounds, spec.init, options);
            } else if constexpr (std::is_same_v<K, FedProxSpec>) {
                return run_fedprox(problem, k.s ? *k.s : 1.0, spec.rounds, spec.init, options);
            } else if constexpr (std::is_same_v<K, FedSplitSpec>) {
                const double s = k.s ? *k.s : fedsplit_default_stepsize(problem);
                return run_fedsplit(problem, s, k.prox, spec.rounds, spec.init, options);
            } else {
                return run_fedsplit_regularized(problem, k.eps, spec.rounds, spec.init,
                                                k.lambda_override, options);
            }
        },
        spec.kind);
    trace.spec = spec;
    trace.label = label_of(spec);
    trace.seed = problem.seed();
    return trace;
}

// ---------------------------------------------------------------------------
// Running to an empirical fixed point

struct FixedPointRun
{
    Vector x;
    BlockVector blocks;
    long rounds = 0;
    bool converged = false;
};

/// Iterates until ||x^{t+1} - x^t|| <= tol (1 + ||x^{t+1}||) or `cap` rounds. With
/// `track_blocks` the same test must also hold for the block state.
template <class Stepper>
FixedPointRun run_to_fixed_point(Stepper& stepper, double tol = 1e-13, long cap = 1000000,
                                 bool track_blocks = false)
{
    Vector previous = stepper.server();
    Matrix previous_blocks = stepper.blocks().matrix();
    for (long t = 1; t <= cap; ++t) {
        stepper.step(static_cast<int>(std::min<long>(t, std::numeric_limits<int>::max())));
        const Vector& x = stepper.server();
        if (!x.allFinite()) {
            throw NumericalError("iterates became non-finite", static_cast<int>(t));
        }
        bool settled = (x - previous).norm() <= tol * (1.0 + x.norm());
        if (track_blocks) {
            const Matrix& z = stepper.blocks().matrix();
            settled = settled && (z - previous_blocks).norm() <= tol * (1.0 + z.norm());
            previous_blocks = z;
        }
        if (settled) {
            return {x, stepper.blocks(), t, true};
        }
        previous = x;
    }
    return {stepper.server(), stepper.blocks(), cap, false};
}

} // namespace fedsplit
