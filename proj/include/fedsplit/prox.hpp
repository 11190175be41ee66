#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>

#include "fedsplit/errors.hpp"
#include "fedsplit/format.hpp"
#include "fedsplit/losses.hpp"

namespace fedsplit
{

// Proximal solvers for h(u) = s f(u) + 1/2 ||u - z||^2, whose minimizer is prox_{sf}(z).

struct ExactProx
{
};

/// e steps of gradient descent on h with stepsize alpha = (1 + s (ell + L) / 2)^{-1}.
struct InexactGradientProx
{
    int steps = 1;
};

struct InexactNewtonProx
{
    double tol = 1e-10;
    int max_iter = 100;
};

using ProxMode = std::variant<ExactProx, InexactGradientProx, InexactNewtonProx>;

/// Where an iterative inner solver starts: at the prox argument, or at the current
/// server iterate x^(t).
enum class WarmStart
{
    ProxArgument,
    ServerIterate,
};

struct ProxSolverSpec
{
    ProxMode mode = ExactProx{};
    WarmStart warm_start = WarmStart::ProxArgument;

    void validate() const
    {
        if (const auto* g = std::get_if<InexactGradientProx>(&mode); g && g->steps < 1) {
            throw ConfigError("inexact gradient prox requires steps >= 1");
        }
        if (const auto* n = std::get_if<InexactNewtonProx>(&mode)) {
            if (!(n->tol > 0.0)) {
                throw ConfigError("Newton prox requires tol > 0");
            }
            if (n->max_iter < 1) {
                throw ConfigError("Newton prox requires max_iter >= 1");
            }
        }
    }

    bool is_exact() const { return std::holds_alternative<ExactProx>(mode); }
};

/// Tolerance used when an exact prox is requested for a loss without a closed form.
inline constexpr InexactNewtonProx kExactNewton{1e-10, 100};

/// Adds (lambda / 2) ||x - center||^2 to a loss.
struct QuadraticShift
{
    double lambda = 0.0;
    Vector center;
};

namespace detail
{
inline void check_stepsize(double s)
{
    if (!(s > 0.0)) {
        throw StepsizeError("proximal stepsize must be positive, got " + format_double(s));
    }
}
} // namespace detail

/// Solves (I + s A^T A) u = z + s A^T b by Cholesky.
inline Vector prox_exact_quadratic(const QuadraticLoss& f, double s, const Vector& z)
{
    detail::check_stepsize(s);
    detail::check_dim(f.dim(), z);
    Matrix system = s * f.gram();
    system.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("Cholesky of I + s A^T A failed");
    }
    return llt.solve(z + s * f.moment());
}

/// u^1 = init (z by default), u^{k+1} = u^k - alpha (s grad f(u^k) + u^k - z); returns u^{e+1}.
inline Vector prox_inexact_gradient(const LocalLoss& f, double s, const Vector& z, int steps,
                                    const ConvexityConstants& constants,
                                    const std::optional<Vector>& init = std::nullopt)
{
    detail::check_stepsize(s);
    if (steps < 1) {
        throw ConfigError("inexact gradient prox requires steps >= 1");
    }
    const double alpha = 1.0 / (1.0 + s * (constants.ell + constants.L) / 2.0);
    Vector u = init ? *init : z;
    detail::check_dim(loss_dim(f), u);
    for (int k = 0; k < steps; ++k) {
        u -= alpha * (s * loss_gradient(f, u) + u - z);
    }
    return u;
}

/// Damped Newton on h with Armijo backtracking (slope 0.25, factor 1/2). Stops when
/// ||grad h(u)|| <= tol (1 + ||z||).
inline Vector prox_newton(const LocalLoss& f, double s, const Vector& z, double tol, int max_iter,
                          const std::optional<Vector>& init = std::nullopt)
{
    detail::check_stepsize(s);
    detail::check_dim(loss_dim(f), z);
    const double threshold = tol * (1.0 + z.norm());
    auto objective = [&](const Vector& u) { return s * loss_value(f, u) + 0.5 * (u - z).squaredNorm(); };
    auto gradient = [&](const Vector& u) -> Vector { return s * loss_gradient(f, u) + u - z; };

    Vector u = init ? *init : z;
    Vector g = gradient(u);
    for (int iter = 0; iter < max_iter; ++iter) {
        if (g.norm() <= threshold) {
            return u;
        }
        Matrix hessian = s * loss_hessian(f, u);
        hessian.diagonal().array() += 1.0;
        Eigen::LLT<Matrix> llt(hessian);
        if (llt.info() != Eigen::Success) {
            throw NumericalError("Newton prox: Hessian factorization failed", 0, g.norm());
        }
        const Vector direction = -llt.solve(g);
        const double slope = g.dot(direction);
        const double h0 = objective(u);

        double step = 1.0;
        Vector candidate = u + direction;
        Vector g_candidate = gradient(candidate);
        // Near the minimizer h differences fall below roundoff; a full step that halves
        // the gradient norm is accepted on that basis instead.
        const bool full_step_ok = objective(candidate) <= h0 + 0.25 * slope ||
                                  g_candidate.norm() <= 0.5 * g.norm();
        if (!full_step_ok) {
            while (true) {
                step *= 0.5;
                if (step < 1e-20) {
                    throw NumericalError("Newton prox: line search stalled", 0, g.norm());
                }
                candidate = u + step * direction;
                if (objective(candidate) <= h0 + 0.25 * step * slope) {
                    break;
                }
            }
            g_candidate = gradient(candidate);
        }
        u = std::move(candidate);
        g = std::move(g_candidate);
    }
    if (g.norm() <= threshold) {
        return u;
    }
    throw NumericalError("Newton prox did not converge in " + std::to_string(max_iter) +
                             " iterations",
                         0, g.norm());
}

inline Vector prox_logistic_newton(const LogisticLoss& f, double s, const Vector& z, double tol,
                                   int max_iter, const std::optional<Vector>& init = std::nullopt)
{
    return prox_newton(LocalLoss{f}, s, z, tol, max_iter, init);
}

/// Evaluates the prox of f (or of f + shift) with the requested solver. `init` is the
/// inner-solver starting point; it is ignored by closed-form evaluations.
///
/// With a shift, prox_{s(f + lambda/2 ||. - c||^2)}(z) = prox_{s' f}(w) where
/// s' = s / (1 + s lambda) and w = (z + s lambda c) / (1 + s lambda).
inline Vector prox_evaluate(const LocalLoss& f, double s, const Vector& z,
                            const ProxSolverSpec& spec, const ConvexityConstants& constants,
                            const std::optional<Vector>& init = std::nullopt,
                            const std::optional<QuadraticShift>& shift = std::nullopt)
{
    detail::check_stepsize(s);
    double step = s;
    Vector point = z;
    std::optional<Vector> start = init;
    if (shift && shift->lambda != 0.0) {
        const double scale = 1.0 + s * shift->lambda;
        step = s / scale;
        point = (z + s * shift->lambda * shift->center) / scale;
    }

    return std::visit(
        [&](const auto& mode) -> Vector {
            using Mode = std::decay_t<decltype(mode)>;
            if constexpr (std::is_same_v<Mode, ExactProx>) {
                if (const auto* q = std::get_if<QuadraticLoss>(&f)) {
                    return prox_exact_quadratic(*q, step, point);
                }
                return prox_newton(f, step, point, kExactNewton.tol, kExactNewton.max_iter, start);
            } else if constexpr (std::is_same_v<Mode, InexactGradientProx>) {
                return prox_inexact_gradient(f, step, point, mode.steps, constants,
                                             start ? start : std::optional<Vector>(point));
            } else {
                return prox_newton(f, step, point, mode.tol, mode.max_iter, start);
            }
        },
        spec.mode);
}

/// Exact prox of a single loss: closed form for quadratics, tight Newton otherwise.
inline Vector prox_exact(const LocalLoss& f, double s, const Vector& z)
{
    return prox_evaluate(f, s, z, ProxSolverSpec{}, ConvexityConstants{});
}

/// 2 prox(z) - z.
inline Vector reflected_prox(const LocalLoss& f, double s, const Vector& z,
                             const ProxSolverSpec& spec, const ConvexityConstants& constants,
                             const std::optional<Vector>& init = std::nullopt)
{
    return 2.0 * prox_evaluate(f, s, z, spec, constants, init) - z;
}

/// Moreau-envelope gradient using an exact prox.
inline Vector moreau_gradient(const LocalLoss& f, double s, const Vector& x)
{
    return moreau_gradient(s, x, [&](const Vector& v) { return prox_exact(f, s, v); });
}

inline Vector moreau_gradient(const LocalLoss& f, double s, const Vector& x,
                              const ProxSolverSpec& spec, const ConvexityConstants& constants)
{
    return moreau_gradient(s, x,
                           [&](const Vector& v) { return prox_evaluate(f, s, v, spec, constants); });
}

} // namespace fedsplit
