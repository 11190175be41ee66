#include <gtest/gtest.h>

#include "support.hpp"

using namespace fedsplit;
using namespace fedsplit::testing;

namespace
{
/// Plain gradient descent on s f(u) + 1/2 ||u - z||^2 with step 1 / (1 + s L).
Vector prox_by_gradient_descent(const LocalLoss& f, double s, const Vector& z, int iterations)
{
    const double step = 1.0 / (1.0 + s * convexity_constants(f).L);
    Vector u = z;
    for (int k = 0; k < iterations; ++k) {
        u -= step * (s * loss_gradient(f, u) + u - z);
    }
    return u;
}
} // namespace

TEST(Prox, ScalarQuadraticClosedForm)
{
    const LocalLoss f = QuadraticLoss(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 2.0));
    // (z + s A^T b) / (1 + s A^T A) = (1 + 0.4) / 1.4.
    EXPECT_NEAR(prox_exact(f, 0.1, Vector::Constant(1, 1.0))[0], 1.0, 1e-15);
}

TEST(Prox, QuadraticMatchesGradientDescentOracle)
{
    RandomStream rng(10, stream::id(stream::Purpose::Test));
    for (int trial = 0; trial < 10; ++trial) {
        const LocalLoss f = random_quadratic(4, 12, rng);
        const Vector z = random_vector(4, rng);
        const Vector oracle = prox_by_gradient_descent(f, 0.3, z, 10000);
        EXPECT_LE((prox_exact(f, 0.3, z) - oracle).norm(), 1e-10);
    }
}

TEST(Prox, NewtonMatchesGradientDescentOracle)
{
    RandomStream rng(11, stream::id(stream::Purpose::Test));
    const LocalLoss f = random_logistic(3, 15, rng);
    const Vector z = random_vector(3, rng, 2.0);
    const Vector oracle = prox_by_gradient_descent(f, 2.0, z, 1000000);
    EXPECT_LE((prox_exact(f, 2.0, z) - oracle).norm(), 1e-9);
}

TEST(Prox, NewtonStationarity)
{
    RandomStream rng(12, stream::id(stream::Purpose::Test));
    for (int trial = 0; trial < 50; ++trial) {
        const LocalLoss f = random_logistic(4, 20, rng);
        const double s = 0.01 + 5.0 * rng.uniform();
        const Vector z = random_vector(4, rng, 3.0);
        const Vector u = prox_newton(f, s, z, 1e-12, 100);
        EXPECT_LE((s * loss_gradient(f, u) + u - z).norm(), 1e-12 * (1 + z.norm()));
    }
}

TEST(Prox, InexactGradientStepSize)
{
    // s = 0.5, ell = 1, L = 4: alpha = 1 / (1 + 0.5 * 2.5) = 4/9.
    const LocalLoss f = QuadraticLoss(Matrix::Constant(1, 1, 1.0), Vector::Constant(1, 3.0));
    const Vector z = Vector::Constant(1, 1.0);
    const Vector u = prox_inexact_gradient(f, 0.5, z, 1, ConvexityConstants{1.0, 4.0});
    // One step from z: u = z - alpha * s * grad f(z) = 1 - (4/9) * 0.5 * (1 - 3).
    EXPECT_NEAR(u[0], 1.0 + 4.0 / 9.0, 1e-15);
}

TEST(Prox, InexactGradientConvergesWithSteps)
{
    RandomStream rng(13, stream::id(stream::Purpose::Test));
    const QuadraticLoss q = random_quadratic(5, 50, rng);
    const LocalLoss f = q;
    const auto c = convexity_constants(f);
    const Vector z = random_vector(5, rng);
    const double s = 1.0 / std::sqrt(c.ell * c.L);
    const Vector exact = prox_exact(f, s, z);
    double previous = std::numeric_limits<double>::infinity();
    for (int e : {1, 2, 5, 10, 20, 50}) {
        const double err = (prox_inexact_gradient(f, s, z, e, c) - exact).norm();
        EXPECT_LT(err, previous);
        previous = err;
    }
    EXPECT_LT(previous, 1e-8);
}

TEST(Prox, WarmStartIsUsed)
{
    const LocalLoss f = QuadraticLoss(Matrix::Constant(1, 1, 1.0), Vector::Constant(1, 3.0));
    const Vector z = Vector::Constant(1, 1.0);
    const double s = 1.0;
    const Vector exact = prox_exact(f, s, z);
    // Starting at the answer, the iteration stays there.
    const Vector u = prox_inexact_gradient(f, s, z, 1, {1.0, 1.0}, exact);
    EXPECT_NEAR(u[0], exact[0], 1e-15);
}

TEST(Prox, SpecValidation)
{
    EXPECT_THROW((ProxSolverSpec{InexactGradientProx{0}}.validate()), ConfigError);
    EXPECT_THROW((ProxSolverSpec{InexactNewtonProx{0.0, 10}}.validate()), ConfigError);
    EXPECT_THROW((ProxSolverSpec{InexactNewtonProx{1e-8, 0}}.validate()), ConfigError);
    EXPECT_NO_THROW(ProxSolverSpec{}.validate());
}

TEST(Prox, NonPositiveStepThrows)
{
    const LocalLoss f = QuadraticLoss(Matrix::Ones(1, 1), Vector::Ones(1));
    EXPECT_THROW(prox_exact(f, 0.0, Vector::Zero(1)), StepsizeError);
}

TEST(Prox, NewtonIterationCapRaises)
{
    RandomStream rng(14, stream::id(stream::Purpose::Test));
    const LocalLoss f = random_logistic(3, 20, rng);
    EXPECT_THROW(prox_newton(f, 50.0, random_vector(3, rng, 10.0), 1e-15, 1), NumericalError);
}

TEST(Prox, ShiftFoldsIntoStepAndArgument)
{
    RandomStream rng(15, stream::id(stream::Purpose::Test));
    const QuadraticLoss q = random_quadratic(3, 6, rng);
    const Vector z = random_vector(3, rng);
    const Vector c = random_vector(3, rng);
    const double s = 0.7;
    const double lambda = 0.4;
    // Direct closed form of prox of f + lambda/2 ||. - c||^2.
    const Matrix lhs = Matrix::Identity(3, 3) + s * (q.gram() + lambda * Matrix::Identity(3, 3));
    const Vector direct = lhs.llt().solve(z + s * (q.moment() + lambda * c));
    const Vector folded = prox_evaluate(LocalLoss{q}, s, z, ProxSolverSpec{}, convexity_constants(q),
                                        std::nullopt, QuadraticShift{lambda, c});
    EXPECT_LE((direct - folded).norm(), 1e-12);
}

TEST(ProxProperties, FirmNonexpansiveness)
{
    // ||P x - P y||^2 <= <P x - P y, x - y>.
    RandomStream rng(16, stream::id(stream::Purpose::Test));
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + trial % 5;
        const LocalLoss f = trial % 2 == 0 ? LocalLoss{random_quadratic(d, 8, rng)}
                                           : LocalLoss{random_logistic(d, 8, rng)};
        const double s = 0.05 + 2.0 * rng.uniform();
        const Vector x = random_vector(d, rng, 2.0);
        const Vector y = random_vector(d, rng, 2.0);
        const Vector dp = prox_exact(f, s, x) - prox_exact(f, s, y);
        EXPECT_LE(dp.squaredNorm(), dp.dot(x - y) + 1e-10) << "trial " << trial;
    }
}

TEST(ProxProperties, ReflectedResolventContraction)
{
    // ||R x - R y|| <= max(|1 - s ell| / (1 + s ell), |1 - s L| / (1 + s L)) ||x - y||.
    RandomStream rng(17, stream::id(stream::Purpose::Test));
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + trial % 6;
        const LocalLoss f = random_quadratic(d, 3 * d, rng);
        const auto c = convexity_constants(f);
        const double s = std::exp(-2.0 + 4.0 * rng.uniform()) / std::sqrt(c.ell * c.L);
        const double rate = std::max(std::abs(1 - s * c.ell) / (1 + s * c.ell), std::abs(1 - s * c.L) / (1 + s * c.L));
        const Vector x = random_vector(d, rng);
        const Vector y = random_vector(d, rng);
        const Vector dr = reflected_prox(f, s, x, ProxSolverSpec{}, c) - reflected_prox(f, s, y, ProxSolverSpec{}, c);
        EXPECT_LE(dr.norm(), rate * (x - y).norm() * (1 + 1e-10) + 1e-14) << "trial " << trial;
    }
}

TEST(ProxProperties, ReflectedResolventContractionAtOptimalStep)
{
    // At s = 1/sqrt(ell L) the bound is 1 - 2/(sqrt(kappa) + 1).
    RandomStream rng(18, stream::id(stream::Purpose::Test));
    for (int trial = 0; trial < 100; ++trial) {
        const LocalLoss f = random_quadratic(4, 10, rng);
        const auto c = convexity_constants(f);
        const double s = 1.0 / std::sqrt(c.ell * c.L);
        const double rho = contraction_rate(c.ell, c.L);
        const Vector x = random_vector(4, rng);
        const Vector y = random_vector(4, rng);
        const Vector dr = reflected_prox(f, s, x, ProxSolverSpec{}, c) - reflected_prox(f, s, y, ProxSolverSpec{}, c);
        EXPECT_LE(dr.norm(), rho * (x - y).norm() * (1 + 1e-10));
    }
}
