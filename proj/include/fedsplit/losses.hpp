#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <variant>

#include "fedsplit/blockvec.hpp"
#include "fedsplit/errors.hpp"

namespace fedsplit
{

/// f(x) = 1/2 ||A x - b||^2. The Gram matrix A^T A and A^T b are formed once at
/// construction; full column rank is not required.
class QuadraticLoss
{
public:
    QuadraticLoss(Matrix design, Vector response)
        : design_(std::move(design)), response_(std::move(response))
    {
        if (design_.rows() < 1 || design_.cols() < 1) {
            throw DimensionMismatch("QuadraticLoss: design must be at least 1x1");
        }
        if (design_.rows() != response_.size()) {
            throw DimensionMismatch("QuadraticLoss: design has " + std::to_string(design_.rows()) +
                                    " rows but response has " +
                                    std::to_string(response_.size()) + " entries");
        }
        gram_ = design_.transpose() * design_;
        moment_ = design_.transpose() * response_;
    }

    const Matrix& design() const noexcept { return design_; }
    const Vector& response() const noexcept { return response_; }
    const Matrix& gram() const noexcept { return gram_; }
    /// A^T b
    const Vector& moment() const noexcept { return moment_; }
    Eigen::Index dim() const noexcept { return design_.cols(); }
    Eigen::Index samples() const noexcept { return design_.rows(); }

private:
    Matrix design_;
    Vector response_;
    Matrix gram_;
    Vector moment_;
};

/// f(x) = sum_i log(1 + exp(-b_i a_i^T x)), labels b_i in {-1, +1}.
class LogisticLoss
{
public:
    LogisticLoss(Matrix features, Vector labels)
        : features_(std::move(features)), labels_(std::move(labels))
    {
        if (features_.rows() < 1 || features_.cols() < 1) {
            throw DimensionMismatch("LogisticLoss: features must be at least 1x1");
        }
        if (features_.rows() != labels_.size()) {
            throw DimensionMismatch("LogisticLoss: feature rows and label count differ");
        }
        for (Eigen::Index i = 0; i < labels_.size(); ++i) {
            if (labels_[i] != 1.0 && labels_[i] != -1.0) {
                throw ConfigError("LogisticLoss: label " + std::to_string(i) +
                                  " is not exactly -1 or +1");
            }
        }
    }

    const Matrix& design() const noexcept { return features_; }
    const Vector& response() const noexcept { return labels_; }
    Eigen::Index dim() const noexcept { return features_.cols(); }
    Eigen::Index samples() const noexcept { return features_.rows(); }

private:
    Matrix features_;
    Vector labels_;
};

using LocalLoss = std::variant<QuadraticLoss, LogisticLoss>;

/// Strong convexity modulus ell and smoothness modulus L, 0 <= ell <= L.
struct ConvexityConstants
{
    double ell = 0.0;
    double L = 0.0;
};

namespace detail
{
/// log(1 + exp(t)) without overflow.
inline double softplus(double t)
{
    return std::log1p(std::exp(-std::abs(t))) + std::max(t, 0.0);
}

/// 1 / (1 + exp(-t)) without overflow.
inline double sigmoid(double t)
{
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

inline void check_dim(Eigen::Index expected, const Vector& x)
{
    if (x.size() != expected) {
        throw DimensionMismatch("point has dimension " + std::to_string(x.size()) +
                                ", loss expects " + std::to_string(expected));
    }
}

inline ConvexityConstants gram_extremes(const Matrix& gram)
{
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("symmetric eigensolve failed");
    }
    const Vector& values = eig.eigenvalues();
    // Gram matrices are PSD; tiny negative roundoff is clamped.
    return {std::max(values.minCoeff(), 0.0), std::max(values.maxCoeff(), 0.0)};
}
} // namespace detail

inline Eigen::Index loss_dim(const LocalLoss& f)
{
    return std::visit([](const auto& loss) { return loss.dim(); }, f);
}

inline double loss_value(const QuadraticLoss& f, const Vector& x)
{
    detail::check_dim(f.dim(), x);
    return 0.5 * (f.design() * x - f.response()).squaredNorm();
}

inline double loss_value(const LogisticLoss& f, const Vector& x)
{
    detail::check_dim(f.dim(), x);
    const Vector margins = f.design() * x;
    double total = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
        total += detail::softplus(-f.response()[i] * margins[i]);
    }
    return total;
}

inline double loss_value(const LocalLoss& f, const Vector& x)
{
    return std::visit([&](const auto& loss) { return loss_value(loss, x); }, f);
}

inline Vector loss_gradient(const QuadraticLoss& f, const Vector& x)
{
    detail::check_dim(f.dim(), x);
    return f.design().transpose() * (f.design() * x - f.response());
}

inline Vector loss_gradient(const LogisticLoss& f, const Vector& x)
{
    detail::check_dim(f.dim(), x);
    const Vector margins = f.design() * x;
    Vector weights(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
        const double label = f.response()[i];
        weights[i] = -label * detail::sigmoid(-label * margins[i]);
    }
    return f.design().transpose() * weights;
}

inline Vector loss_gradient(const LocalLoss& f, const Vector& x)
{
    return std::visit([&](const auto& loss) { return loss_gradient(loss, x); }, f);
}

inline Matrix loss_hessian(const QuadraticLoss& f, const Vector& x)
{
    detail::check_dim(f.dim(), x);
    return f.gram();
}

inline Matrix loss_hessian(const LogisticLoss& f, const Vector& x)
{
    detail::check_dim(f.dim(), x);
    const Vector margins = f.design() * x;
    Vector curvature(margins.size());
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
        const double p = detail::sigmoid(margins[i]);
        curvature[i] = p * (1.0 - p);
    }
    return f.design().transpose() * curvature.asDiagonal() * f.design();
}

inline Matrix loss_hessian(const LocalLoss& f, const Vector& x)
{
    return std::visit([&](const auto& loss) { return loss_hessian(loss, x); }, f);
}

inline ConvexityConstants convexity_constants(const QuadraticLoss& f)
{
    return detail::gram_extremes(f.gram());
}

/// ell = 0 and L = lambda_max(A^T A) / 4, the uniform bound on the logistic Hessian.
inline ConvexityConstants convexity_constants(const LogisticLoss& f)
{
    const Matrix gram = f.design().transpose() * f.design();
    return {0.0, detail::gram_extremes(gram).L / 4.0};
}

inline ConvexityConstants convexity_constants(const LocalLoss& f)
{
    return std::visit([](const auto& loss) { return convexity_constants(loss); }, f);
}

/// Gradient of the Moreau envelope M_{sf} at x, (x - prox_{sf}(x)) / s. The prox
/// evaluation is supplied by the caller so exact and inexact solvers plug in alike.
template <class ProxFn>
Vector moreau_gradient(double s, const Vector& x, ProxFn&& prox)
{
    if (!(s > 0.0)) {
        throw StepsizeError("moreau_gradient requires s > 0");
    }
    const Vector p = prox(x);
    return (x - p) / s;
}

} // namespace fedsplit
