#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fedsplit/blockvec.hpp"
#include "fedsplit/errors.hpp"
#include "fedsplit/losses.hpp"

namespace fedsplit
{

/// ell* = min_j ell_j, L* = max_j L_j, kappa = L* / ell* (infinite when ell* = 0).
struct ProblemConstants
{
    double ell_star = 0.0;
    double L_star = 0.0;

    double kappa() const
    {
        return ell_star > 0.0 ? L_star / ell_star : std::numeric_limits<double>::infinity();
    }
};

/// min_x F(x) = sum_j f_j(x) over m clients sharing dimension d.
class FederatedProblem
{
public:
    FederatedProblem(std::vector<LocalLoss> clients,
                     std::optional<Vector> x_true = std::nullopt,
                     std::optional<std::uint64_t> seed = std::nullopt)
        : clients_(std::move(clients)), x_true_(std::move(x_true)), seed_(seed)
    {
        if (clients_.empty()) {
            throw ConfigError("a federated problem needs at least one client");
        }
        dim_ = loss_dim(clients_.front());
        for (std::size_t j = 1; j < clients_.size(); ++j) {
            if (loss_dim(clients_[j]) != dim_) {
                throw DimensionMismatch("client " + std::to_string(j) + " has dimension " +
                                        std::to_string(loss_dim(clients_[j])) + ", expected " +
                                        std::to_string(dim_));
            }
        }
        if (x_true_ && x_true_->size() != dim_) {
            throw DimensionMismatch("x_true dimension differs from problem dimension");
        }
        constants_.reserve(clients_.size());
        for (const auto& f : clients_) {
            constants_.push_back(convexity_constants(f));
        }
    }

    Eigen::Index dim() const noexcept { return dim_; }
    Eigen::Index num_clients() const noexcept { return static_cast<Eigen::Index>(clients_.size()); }
    const std::vector<LocalLoss>& clients() const noexcept { return clients_; }
    const LocalLoss& client(Eigen::Index j) const { return clients_.at(static_cast<std::size_t>(j)); }
    const ConvexityConstants& client_constants(Eigen::Index j) const
    {
        return constants_.at(static_cast<std::size_t>(j));
    }
    const std::optional<Vector>& x_true() const noexcept { return x_true_; }
    const std::optional<std::uint64_t>& seed() const noexcept { return seed_; }

    bool all_quadratic() const
    {
        for (const auto& f : clients_) {
            if (!std::holds_alternative<QuadraticLoss>(f)) {
                return false;
            }
        }
        return true;
    }

    ProblemConstants constants() const
    {
        ProblemConstants out{constants_.front().ell, constants_.front().L};
        for (const auto& c : constants_) {
            out.ell_star = std::min(out.ell_star, c.ell);
            out.L_star = std::max(out.L_star, c.L);
        }
        return out;
    }

    double cost(const Vector& x) const
    {
        double total = 0.0;
        for (const auto& f : clients_) {
            total += loss_value(f, x);
        }
        return total;
    }

    Vector gradient(const Vector& x) const
    {
        Vector total = Vector::Zero(dim_);
        for (const auto& f : clients_) {
            total += loss_gradient(f, x);
        }
        return total;
    }

    Matrix hessian(const Vector& x) const
    {
        Matrix total = Matrix::Zero(dim_, dim_);
        for (const auto& f : clients_) {
            total += loss_hessian(f, x);
        }
        return total;
    }

private:
    std::vector<LocalLoss> clients_;
    std::vector<ConvexityConstants> constants_;
    std::optional<Vector> x_true_;
    std::optional<std::uint64_t> seed_;
    Eigen::Index dim_ = 0;
};

} // namespace fedsplit
