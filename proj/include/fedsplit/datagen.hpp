#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <variant>
#include <vector>

#include "fedsplit/blockvec.hpp"
#include "fedsplit/errors.hpp"
#include "fedsplit/losses.hpp"
#include "fedsplit/problem.hpp"
#include "fedsplit/rng.hpp"

namespace fedsplit
{

/// (A_j)_{kl} ~ N(0, 1) i.i.d., b_j = A_j x_true + v_j with v_j ~ N(0, sigma2 I).
struct IsotropicLSQ
{
    int m = 1;
    int d = 1;
    int n = 1;
    double sigma2 = 0.0;
};

/// A_j = U_j Lambda_j V_j with Haar U_j in O(n), V_j in O(d) and singular values
/// (sqrt(kappa), 1, ..., 1); b_j = A_j x_0 + v_j.
struct ConditionedLSQ
{
    int m = 1;
    int d = 1;
    int n = 1;
    double kappa = 1.0;
    double sigma2 = 0.0;
};

/// a_ij ~ N(0, I_d), labels +1 with probability exp(a^T x)/(1 + exp(a^T x)).
struct LogisticGauss
{
    int m = 1;
    int d = 1;
    int n = 1;
};

using EnsembleKind = std::variant<IsotropicLSQ, ConditionedLSQ, LogisticGauss>;

struct EnsembleSpec
{
    EnsembleKind kind = IsotropicLSQ{};
    std::uint64_t seed = 0;

    void validate() const
    {
        std::visit(
            [](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if (k.m < 1 || k.d < 1 || k.n < 1) {
                    throw ConfigError("ensemble requires m, d, n >= 1");
                }
                if constexpr (!std::is_same_v<K, LogisticGauss>) {
                    if (!(k.sigma2 >= 0.0)) throw ConfigError("ensemble requires sigma2 >= 0");
                }
                if constexpr (std::is_same_v<K, ConditionedLSQ>) {
                    if (k.n < k.d) throw ConfigError("conditioned ensemble requires n >= d");
                    if (!(k.kappa >= 1.0)) throw ConfigError("conditioned ensemble requires kappa >= 1");
                }
            },
            kind);
    }

    bool is_least_squares() const { return !std::holds_alternative<LogisticGauss>(kind); }
};

/// Row-major fill of a rows x cols standard Gaussian matrix.
inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, RandomStream& rng)
{
    Matrix out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            out(r, c) = rng.normal();
        }
    }
    return out;
}

inline Vector gaussian_vector(Eigen::Index size, RandomStream& rng, double stddev = 1.0)
{
    Vector out(size);
    for (Eigen::Index i = 0; i < size; ++i) {
        out[i] = stddev * rng.normal();
    }
    return out;
}

/// Haar-distributed Q in O(l): Householder QR of a Gaussian matrix, then Q diag(sign(R_ii))
/// so that R has a positive diagonal. Without the sign fix the law of Q is not Haar.
/// A draw with an exactly zero R_ii is discarded and redrawn from the same stream.
inline Matrix sample_haar_orthogonal(Eigen::Index l, RandomStream& rng)
{
    if (l < 1) {
        throw ConfigError("Haar sampling requires l >= 1");
    }
    while (true) {
        const Matrix g = gaussian_matrix(l, l, rng);
        Eigen::HouseholderQR<Matrix> qr(g);
        const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
        bool degenerate = false;
        Vector signs(l);
        for (Eigen::Index i = 0; i < l; ++i) {
            if (r(i, i) == 0.0) {
                degenerate = true;
                break;
            }
            signs[i] = r(i, i) > 0.0 ? 1.0 : -1.0;
        }
        if (degenerate) {
            continue;
        }
        Matrix q = qr.householderQ();
        return q * signs.asDiagonal();
    }
}

/// Design matrix of the conditioned ensemble: U[:, :d] diag(sqrt(kappa), 1, ..., 1) V.
inline Matrix conditioned_design(const ConditionedLSQ& spec, std::uint64_t seed, std::uint32_t client)
{
    RandomStream left(seed, stream::id(stream::Purpose::HaarLeft, client));
    RandomStream right(seed, stream::id(stream::Purpose::HaarRight, client));
    const Matrix u = sample_haar_orthogonal(spec.n, left);
    const Matrix v = sample_haar_orthogonal(spec.d, right);
    Vector singular = Vector::Ones(spec.d);
    singular[0] = std::sqrt(spec.kappa);
    return u.leftCols(spec.d) * singular.asDiagonal() * v;
}

struct GeneratedProblem
{
    FederatedProblem problem;
    Vector x_true;
};

namespace detail
{
inline Vector draw_truth(std::uint64_t seed, int d)
{
    RandomStream rng(seed, stream::id(stream::Purpose::Global, 0));
    return gaussian_vector(d, rng);
}

inline Vector noisy_response(const Matrix& a, const Vector& x, double sigma2, std::uint64_t seed,
                             std::uint32_t client)
{
    RandomStream noise(seed, stream::id(stream::Purpose::Noise, client));
    return a * x + gaussian_vector(a.rows(), noise, std::sqrt(sigma2));
}
} // namespace detail

inline GeneratedProblem gen_isotropic_lsq(const IsotropicLSQ& spec, std::uint64_t seed)
{
    EnsembleSpec{spec, seed}.validate();
    const Vector x_true = detail::draw_truth(seed, spec.d);
    std::vector<LocalLoss> clients;
    clients.reserve(static_cast<std::size_t>(spec.m));
    for (int j = 0; j < spec.m; ++j) {
        const auto client = static_cast<std::uint32_t>(j);
        RandomStream design(seed, stream::id(stream::Purpose::Design, client));
        Matrix a = gaussian_matrix(spec.n, spec.d, design);
        Vector b = detail::noisy_response(a, x_true, spec.sigma2, seed, client);
        clients.emplace_back(QuadraticLoss(std::move(a), std::move(b)));
    }
    return {FederatedProblem(std::move(clients), x_true, seed), x_true};
}

inline GeneratedProblem gen_conditioned_lsq(const ConditionedLSQ& spec, std::uint64_t seed)
{
    EnsembleSpec{spec, seed}.validate();
    const Vector x_true = detail::draw_truth(seed, spec.d);
    std::vector<LocalLoss> clients;
    clients.reserve(static_cast<std::size_t>(spec.m));
    for (int j = 0; j < spec.m; ++j) {
        const auto client = static_cast<std::uint32_t>(j);
        Matrix a = conditioned_design(spec, seed, client);
        Vector b = detail::noisy_response(a, x_true, spec.sigma2, seed, client);
        clients.emplace_back(QuadraticLoss(std::move(a), std::move(b)));
    }
    return {FederatedProblem(std::move(clients), x_true, seed), x_true};
}

/// Label +1 with probability sigmoid(margin), drawn as uniform < sigmoid(margin).
inline double draw_logistic_label(double margin, RandomStream& rng)
{
    return rng.uniform() < detail::sigmoid(margin) ? 1.0 : -1.0;
}

inline GeneratedProblem gen_logistic(const LogisticGauss& spec, std::uint64_t seed)
{
    EnsembleSpec{spec, seed}.validate();
    const Vector x_true = detail::draw_truth(seed, spec.d);
    std::vector<LocalLoss> clients;
    clients.reserve(static_cast<std::size_t>(spec.m));
    for (int j = 0; j < spec.m; ++j) {
        const auto client = static_cast<std::uint32_t>(j);
        RandomStream design(seed, stream::id(stream::Purpose::Design, client));
        RandomStream labels(seed, stream::id(stream::Purpose::Labels, client));
        Matrix a = gaussian_matrix(spec.n, spec.d, design);
        const Vector margins = a * x_true;
        Vector b(spec.n);
        for (int i = 0; i < spec.n; ++i) {
            b[i] = draw_logistic_label(margins[i], labels);
        }
        clients.emplace_back(LogisticLoss(std::move(a), std::move(b)));
    }
    return {FederatedProblem(std::move(clients), x_true, seed), x_true};
}

inline GeneratedProblem generate(const EnsembleSpec& spec)
{
    spec.validate();
    return std::visit(
        [&](const auto& k) -> GeneratedProblem {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, IsotropicLSQ>) {
                return gen_isotropic_lsq(k, spec.seed);
            } else if constexpr (std::is_same_v<K, ConditionedLSQ>) {
                return gen_conditioned_lsq(k, spec.seed);
            } else {
                return gen_logistic(k, spec.seed);
            }
        },
        spec.kind);
}

} // namespace fedsplit
