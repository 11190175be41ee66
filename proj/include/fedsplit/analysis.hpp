#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fedsplit/algorithms.hpp"
#include "fedsplit/errors.hpp"
#include "fedsplit/format.hpp"
#include "fedsplit/losses.hpp"
#include "fedsplit/problem.hpp"
#include "fedsplit/prox.hpp"

namespace fedsplit
{

namespace detail
{
inline const QuadraticLoss& as_quadratic(const FederatedProblem& problem, Eigen::Index j)
{
    const auto* q = std::get_if<QuadraticLoss>(&problem.client(j));
    if (!q) {
        throw ConfigError("closed-form oracle requires least-squares clients; client " +
                          std::to_string(j) + " is logistic");
    }
    return *q;
}

inline Vector solve_nonsingular(const Matrix& lhs, const Vector& rhs, const char* what)
{
    Eigen::FullPivLU<Matrix> lu(lhs);
    lu.setThreshold(1e-13);
    if (!lu.isInvertible()) {
        throw DegenerateProblem(std::string(what) + ": system matrix is singular");
    }
    return lu.solve(rhs);
}
} // namespace detail

/// (sum_j A_j^T A_j)^{-1} sum_j A_j^T b_j by Cholesky.
inline Vector lsq_optimum(const FederatedProblem& problem)
{
    Matrix gram = Matrix::Zero(problem.dim(), problem.dim());
    Vector moment = Vector::Zero(problem.dim());
    for (Eigen::Index j = 0; j < problem.num_clients(); ++j) {
        const auto& q = detail::as_quadratic(problem, j);
        gram += q.gram();
        moment += q.moment();
    }
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
        throw DegenerateProblem("sum of Gram matrices is singular");
    }
    return llt.solve(moment);
}

/// sum_{k=0}^{e-1} (I - s A^T A)^k, accumulated term by term.
inline Matrix fedgd_geometric_sum(const Matrix& gram, double s, int epochs)
{
    const Eigen::Index d = gram.rows();
    const Matrix contraction = Matrix::Identity(d, d) - s * gram;
    Matrix term = Matrix::Identity(d, d);
    Matrix sum = Matrix::Zero(d, d);
    for (int k = 0; k < epochs; ++k) {
        sum += term;
        term = contraction * term;
    }
    return sum;
}

/// Limit of the FedGD recursion on least squares:
///   (sum_j A_j^T A_j S_j)^{-1} sum_j S_j A_j^T b_j,  S_j = sum_{k<e} (I - s A_j^T A_j)^k.
/// Requires ||I - s A_j^T A_j|| < 1 for every client.
inline Vector fedgd_limit_lsq(const FederatedProblem& problem, double s, int epochs)
{
    if (!(s > 0.0)) throw StepsizeError("fedgd_limit_lsq requires s > 0");
    if (epochs < 1) throw ConfigError("fedgd_limit_lsq requires e >= 1");
    const Eigen::Index d = problem.dim();
    Matrix lhs = Matrix::Zero(d, d);
    Vector rhs = Vector::Zero(d);
    for (Eigen::Index j = 0; j < problem.num_clients(); ++j) {
        const auto& q = detail::as_quadratic(problem, j);
        const auto c = problem.client_constants(j);
        const double spectral = std::max(std::abs(1.0 - s * c.ell), std::abs(1.0 - s * c.L));
        if (!(spectral < 1.0)) {
            throw StepsizeError("||I - s A_j^T A_j|| = " + format_double(spectral) +
                                " >= 1 for client " + std::to_string(j));
        }
        const Matrix sum = fedgd_geometric_sum(q.gram(), s, epochs);
        lhs += q.gram() * sum;
        rhs += sum * q.moment();
    }
    return detail::solve_nonsingular(lhs, rhs, "fedgd_limit_lsq");
}

/// Limit of the FedProx recursion on least squares:
///   [sum_j (I - (I + s A_j^T A_j)^{-1})]^{-1} [sum_j (A_j^T A_j + I/s)^{-1} A_j^T b_j].
inline Vector fedprox_limit_lsq(const FederatedProblem& problem, double s)
{
    if (!(s > 0.0)) throw StepsizeError("fedprox_limit_lsq requires s > 0");
    const Eigen::Index d = problem.dim();
    const Matrix identity = Matrix::Identity(d, d);
    Matrix lhs = Matrix::Zero(d, d);
    Vector rhs = Vector::Zero(d);
    for (Eigen::Index j = 0; j < problem.num_clients(); ++j) {
        const auto& q = detail::as_quadratic(problem, j);
        const Eigen::LLT<Matrix> shifted(identity + s * q.gram());
        lhs += identity - shifted.solve(identity);
        const Eigen::LLT<Matrix> scaled(q.gram() + identity / s);
        rhs += scaled.solve(q.moment());
    }
    return detail::solve_nonsingular(lhs, rhs, "fedprox_limit_lsq");
}

struct FixedPointResiduals
{
    /// ||sum_j sum_{i=1}^{e} grad f_j(G_j^{i-1}(x))||, zero at FedGD limits.
    double fedgd = 0.0;
    /// ||sum_j grad M_{s f_j}(x)||, zero at FedProx limits.
    double fedprox = 0.0;
    /// ||sum_j grad f_j(x)||, zero at true optima.
    double stationarity = 0.0;
};

inline FixedPointResiduals fixedpoint_residuals(const FederatedProblem& problem, double s, int epochs,
                                                const Vector& x)
{
    if (!(s > 0.0)) throw StepsizeError("fixedpoint_residuals requires s > 0");
    if (epochs < 1) throw ConfigError("fixedpoint_residuals requires e >= 1");
    Vector fedgd_sum = Vector::Zero(problem.dim());
    Vector moreau_sum = Vector::Zero(problem.dim());
    for (Eigen::Index j = 0; j < problem.num_clients(); ++j) {
        const auto& f = problem.client(j);
        Vector u = x;
        for (int i = 0; i < epochs; ++i) {
            const Vector g = loss_gradient(f, u);
            fedgd_sum += g;
            u -= s * g;
        }
        moreau_sum += moreau_gradient(f, s, x);
    }
    return {fedgd_sum.norm(), moreau_sum.norm(), problem.gradient(x).norm()};
}

enum class ReferenceMethod
{
    DirectSolve,
    Newton,
};

struct ReferenceSolution
{
    Vector x_star;
    double F_star = 0.0;
    ReferenceMethod method = ReferenceMethod::DirectSolve;
    /// ||sum_j grad f_j(x_star)||
    double residual = 0.0;
};

/// Centralized damped Newton on F from `init` until ||grad F|| <= tol. A singular
/// Hessian (flat directions of a logistic loss) gets a tiny Levenberg shift.
inline Vector centralized_newton(const FederatedProblem& problem, double tol, int max_iter = 200,
                                 const std::optional<Vector>& init = std::nullopt)
{
    Vector x = init ? *init : Vector::Zero(problem.dim());
    Vector g = problem.gradient(x);
    for (int iter = 0; iter < max_iter; ++iter) {
        if (g.norm() <= tol) {
            return x;
        }
        Matrix hessian = problem.hessian(x);
        Eigen::LLT<Matrix> llt(hessian);
        if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-15)) {
            hessian.diagonal().array() += 1e-10 * (1.0 + hessian.diagonal().cwiseAbs().maxCoeff());
            llt.compute(hessian);
            if (llt.info() != Eigen::Success) {
                throw NumericalError("reference Newton: Hessian factorization failed", iter, g.norm());
            }
        }
        const Vector direction = -llt.solve(g);
        const double slope = g.dot(direction);
        const double f0 = problem.cost(x);
        Vector candidate = x + direction;
        Vector g_candidate = problem.gradient(candidate);
        if (!(problem.cost(candidate) <= f0 + 0.25 * slope || g_candidate.norm() <= 0.5 * g.norm())) {
            double step = 1.0;
            while (true) {
                step *= 0.5;
                if (step < 1e-20) {
                    throw NumericalError("reference Newton: line search stalled", iter, g.norm());
                }
                candidate = x + step * direction;
                if (problem.cost(candidate) <= f0 + 0.25 * step * slope) {
                    break;
                }
            }
            g_candidate = problem.gradient(candidate);
        }
        x = std::move(candidate);
        g = std::move(g_candidate);
    }
    if (g.norm() <= tol) {
        return x;
    }
    throw NumericalError("reference Newton did not reach tolerance", max_iter, g.norm());
}

/// Least squares: the direct solve of lsq_optimum. Otherwise centralized Newton.
inline ReferenceSolution reference_optimum(const FederatedProblem& problem, double tol = 1e-12)
{
    ReferenceSolution out;
    if (problem.all_quadratic()) {
        out.x_star = lsq_optimum(problem);
        out.method = ReferenceMethod::DirectSolve;
    } else {
        out.x_star = centralized_newton(problem, tol);
        out.method = ReferenceMethod::Newton;
    }
    out.F_star = problem.cost(out.x_star);
    out.residual = problem.gradient(out.x_star).norm();
    return out;
}

/// rho = 1 - 2 / (sqrt(L*/ell*) + 1).
inline double contraction_rate(double ell_star, double L_star)
{
    if (!(ell_star > 0.0) || !(L_star >= ell_star)) {
        throw ConfigError("contraction_rate requires 0 < ell* <= L*");
    }
    return 1.0 - 2.0 / (std::sqrt(L_star / ell_star) + 1.0);
}

/// Smallest round t with F(x^t) - F* <= eps.
inline std::optional<int> iteration_complexity(const Trace& trace, double F_star, double eps)
{
    if (trace.records.empty()) {
        throw ConfigError("iteration_complexity requires a nonempty trace");
    }
    for (const auto& r : trace.records) {
        if (r.cost - F_star <= eps) {
            return r.t;
        }
    }
    return std::nullopt;
}

/// Same as above over a bare sequence of gaps indexed from t = 1.
inline std::optional<int> iteration_complexity(const std::vector<double>& gaps, double eps)
{
    if (gaps.empty()) {
        throw ConfigError("iteration_complexity requires a nonempty trace");
    }
    for (std::size_t i = 0; i < gaps.size(); ++i) {
        if (gaps[i] <= eps) {
            return static_cast<int>(i + 1);
        }
    }
    return std::nullopt;
}

/// Ratios d_{t+1} / d_t, restricted to steps where d_t is above `floor` (below it the
/// distances are roundoff).
inline std::vector<double> contraction_ratios(const std::vector<double>& distances, double floor)
{
    std::vector<double> ratios;
    for (std::size_t t = 0; t + 1 < distances.size(); ++t) {
        if (distances[t] > floor) {
            ratios.push_back(distances[t + 1] / distances[t]);
        }
    }
    return ratios;
}

/// Ordinary least squares y = intercept + slope x.
struct LineFit
{
    double slope = 0.0;
    double intercept = 0.0;
    /// sqrt(SSR / (n - 2)); zero when n <= 2.
    double residual_std_error = 0.0;
    std::size_t points = 0;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys)
{
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw ConfigError("line fit needs at least two paired points");
    }
    const auto n = static_cast<double>(xs.size());
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mean_x) * (xs[i] - mean_x);
        sxy += (xs[i] - mean_x) * (ys[i] - mean_y);
    }
    if (!(sxx > 0.0)) {
        throw ConfigError("line fit needs at least two distinct abscissae");
    }
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = mean_y - fit.slope * mean_x;
    fit.points = xs.size();
    if (xs.size() > 2) {
        double ssr = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
            ssr += r * r;
        }
        fit.residual_std_error = std::sqrt(ssr / (n - 2.0));
    }
    return fit;
}

} // namespace fedsplit
