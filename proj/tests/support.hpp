#pragma once

#include <cstdint>
#include <vector>

#include "fedsplit/fedsplit.hpp"

namespace fedsplit::testing
{

/// Two scalar clients: f_1 = 1/2 (2x - 2)^2, f_2 = 1/2 (x + 1)^2. The least-squares
/// optimum is 0.6.
inline FederatedProblem scalar_pair()
{
    std::vector<LocalLoss> clients;
    clients.emplace_back(QuadraticLoss(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 2.0)));
    clients.emplace_back(QuadraticLoss(Matrix::Constant(1, 1, 1.0), Vector::Constant(1, -1.0)));
    return FederatedProblem(std::move(clients));
}

inline Vector random_vector(Eigen::Index n, RandomStream& rng, double scale = 1.0)
{
    return gaussian_vector(n, rng, scale);
}

/// Quadratic client with a tall Gaussian design (full column rank almost surely).
inline QuadraticLoss random_quadratic(Eigen::Index d, Eigen::Index n, RandomStream& rng)
{
    return QuadraticLoss(gaussian_matrix(n, d, rng), gaussian_vector(n, rng));
}

inline LogisticLoss random_logistic(Eigen::Index d, Eigen::Index n, RandomStream& rng)
{
    Matrix a = gaussian_matrix(n, d, rng);
    const Vector w = gaussian_vector(d, rng);
    Vector b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        b[i] = draw_logistic_label((a.row(i) * w)(0), rng);
    }
    return LogisticLoss(std::move(a), std::move(b));
}

/// Least-squares instance with distinct client solutions, so FedGD/FedProx are biased.
inline FederatedProblem random_lsq(int m, int d, int n, std::uint64_t seed)
{
    RandomStream rng(seed, stream::id(stream::Purpose::Test, 7));
    std::vector<LocalLoss> clients;
    for (int j = 0; j < m; ++j) {
        Matrix a = gaussian_matrix(n, d, rng);
        a.col(j % d) *= 1.0 + j;
        clients.emplace_back(QuadraticLoss(std::move(a), gaussian_vector(n, rng, 1.0 + j)));
    }
    return FederatedProblem(std::move(clients), std::nullopt, seed);
}

} // namespace fedsplit::testing
