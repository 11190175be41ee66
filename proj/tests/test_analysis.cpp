#include <gtest/gtest.h>

#include "support.hpp"

using namespace fedsplit;
using namespace fedsplit::testing;

TEST(Oracles, ScalarPairValues)
{
    const auto problem = scalar_pair();
    EXPECT_NEAR(lsq_optimum(problem)[0], 0.6, 1e-15);
    EXPECT_NEAR(fedgd_limit_lsq(problem, 0.1, 2)[0], 45.0 / 83.0, 1e-14);
    EXPECT_NEAR(fedprox_limit_lsq(problem, 0.1)[0], 15.0 / 29.0, 1e-14);
}

TEST(Oracles, FedGDWithOneEpochIsUnbiased)
{
    const auto problem = random_lsq(4, 5, 15, 1);
    EXPECT_LE((fedgd_limit_lsq(problem, 0.5 * fedgd_default_stepsize(problem), 1) - lsq_optimum(problem)).norm(), 1e-10);
}

TEST(Oracles, SingleClientLimitsAreTheOptimum)
{
    RandomStream rng(2, stream::id(stream::Purpose::Test));
    std::vector<LocalLoss> clients{random_quadratic(3, 9, rng)};
    const FederatedProblem problem(std::move(clients));
    const double s = 0.5 * fedgd_default_stepsize(problem);
    const Vector x = lsq_optimum(problem);
    EXPECT_LE((fedgd_limit_lsq(problem, s, 7) - x).norm(), 1e-10);
    EXPECT_LE((fedprox_limit_lsq(problem, 3.0) - x).norm(), 1e-10);
}

TEST(Oracles, IdenticalClientsShareTheOptimum)
{
    RandomStream rng(3, stream::id(stream::Purpose::Test));
    const QuadraticLoss q = random_quadratic(3, 9, rng);
    std::vector<LocalLoss> clients{q, q, q};
    const FederatedProblem problem(std::move(clients));
    const Vector x = lsq_optimum(problem);
    const auto r = fixedpoint_residuals(problem, 0.05, 3, x);
    EXPECT_LE(r.fedgd, 1e-10);
    EXPECT_LE(r.fedprox, 1e-10);
    EXPECT_LE(r.stationarity, 1e-10);
    EXPECT_LE((fedprox_limit_lsq(problem, 0.5) - x).norm(), 1e-10);
}

TEST(Oracles, SquareInvertibleSingleClient)
{
    const Matrix a = (Matrix(2, 2) << 2, 1, 0, 3).finished();
    const Vector b = (Vector(2) << 1, -1).finished();
    std::vector<LocalLoss> clients{QuadraticLoss(a, b)};
    const FederatedProblem problem(std::move(clients));
    EXPECT_LE((lsq_optimum(problem) - a.lu().solve(b)).norm(), 1e-14);
}

TEST(Oracles, SingularGramIsDegenerate)
{
    std::vector<LocalLoss> clients{QuadraticLoss(Matrix::Ones(3, 2), Vector::Ones(3))};
    const FederatedProblem problem(std::move(clients));
    EXPECT_THROW(lsq_optimum(problem), DegenerateProblem);
}

TEST(Oracles, FedGDStepTooLargeIsRejected)
{
    EXPECT_THROW(fedgd_limit_lsq(scalar_pair(), 1.0, 2), StepsizeError);
}

TEST(Oracles, LimitsSatisfyTheirResiduals)
{
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        const auto problem = random_lsq(3, 4, 10, seed);
        const double s = fedgd_default_stepsize(problem);
        const auto gd = fixedpoint_residuals(problem, s, 4, fedgd_limit_lsq(problem, s, 4));
        const auto prox = fixedpoint_residuals(problem, s, 4, fedprox_limit_lsq(problem, s));
        EXPECT_LE(gd.fedgd, 1e-9);
        EXPECT_LE(prox.fedprox, 1e-9);
        EXPECT_GT(gd.stationarity, 1e-3);
        EXPECT_GT(prox.stationarity, 1e-3);
    }
}

TEST(Oracles, ScalarPairStationarityAtFedGDLimit)
{
    const auto r = fixedpoint_residuals(scalar_pair(), 0.1, 2, fedgd_limit_lsq(scalar_pair(), 0.1, 2));
    EXPECT_GT(r.stationarity, 1e-3);
    EXPECT_LE(r.fedgd, 1e-14);
}

TEST(Reference, NewtonAgreesWithDirectSolve)
{
    const auto problem = random_lsq(3, 5, 20, 21);
    const Vector newton = centralized_newton(problem, 1e-12);
    EXPECT_LE((newton - lsq_optimum(problem)).norm(), 1e-10);
}

TEST(Reference, LogisticResidualBelowTolerance)
{
    RandomStream rng(22, stream::id(stream::Purpose::Test));
    std::vector<LocalLoss> clients{random_logistic(4, 40, rng), random_logistic(4, 40, rng)};
    const FederatedProblem problem(std::move(clients));
    const auto ref = reference_optimum(problem, 1e-12);
    EXPECT_EQ(ref.method, ReferenceMethod::Newton);
    EXPECT_LE(ref.residual, 1e-10);
}

TEST(Reference, LeastSquaresResidualIsSmall)
{
    const auto problem = random_lsq(4, 6, 30, 23);
    const auto ref = reference_optimum(problem);
    EXPECT_EQ(ref.method, ReferenceMethod::DirectSolve);
    EXPECT_LE(ref.residual, 1e-10);
}

TEST(Rates, ContractionRate)
{
    EXPECT_DOUBLE_EQ(contraction_rate(1.0, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(contraction_rate(1.0, 4.0), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(contraction_rate(1.0, 100.0), 1.0 - 2.0 / 11.0);
    EXPECT_THROW(contraction_rate(0.0, 1.0), ConfigError);
}

TEST(Rates, IterationComplexityFirstHit)
{
    EXPECT_EQ(iteration_complexity({1.0, 0.5, 1e-4, 1e-2, 1e-5}, 1e-3), 3);
    EXPECT_FALSE(iteration_complexity({1.0, 0.5}, 1e-3).has_value());
    EXPECT_THROW(iteration_complexity(std::vector<double>{}, 1e-3), ConfigError);
}

TEST(Rates, ContractionRatiosSkipRoundoff)
{
    const auto ratios = contraction_ratios({1.0, 0.5, 0.25, 1e-20, 1e-19}, 1e-15);
    ASSERT_EQ(ratios.size(), 3u);
    EXPECT_DOUBLE_EQ(ratios[0], 0.5);
}

TEST(Rates, LineFitRecoversSlope)
{
    const auto fit = fit_line({1, 2, 3, 4}, {1.5, 2.0, 2.5, 3.0});
    EXPECT_NEAR(fit.slope, 0.5, 1e-14);
    EXPECT_NEAR(fit.intercept, 1.0, 1e-14);
    EXPECT_NEAR(fit.residual_std_error, 0.0, 1e-14);
    EXPECT_THROW(fit_line({1}, {1}), ConfigError);
}

TEST(Rates, FedSplitContractionOnScalarPair)
{
    // kappa = 4 gives rho = 1/3; the server error contracts at least that fast.
    const auto problem = scalar_pair();
    const Trace trace = run_fedsplit(problem, 0.5, ProxSolverSpec{}, 20, std::nullopt,
                                     RunOptions{1, lsq_optimum(problem)});
    const double rho = contraction_rate(1.0, 4.0);
    const double d1 = *trace.records.front().dist_to_ref;
    for (const auto& r : trace.records) {
        EXPECT_LE(*r.dist_to_ref, std::pow(rho, r.t - 1) * d1 * 3.0 + 1e-15);
    }
}
