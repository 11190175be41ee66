#include <gtest/gtest.h>

#include "support.hpp"

using namespace fedsplit;

TEST(Datagen, GenerationIsDeterministic)
{
    const EnsembleSpec spec{IsotropicLSQ{3, 4, 10, 0.25}, 99};
    const auto a = generate(spec);
    const auto b = generate(spec);
    EXPECT_EQ(a.x_true, b.x_true);
    for (Eigen::Index j = 0; j < 3; ++j) {
        const auto& qa = std::get<QuadraticLoss>(a.problem.client(j));
        const auto& qb = std::get<QuadraticLoss>(b.problem.client(j));
        EXPECT_EQ(qa.design(), qb.design());
        EXPECT_EQ(qa.response(), qb.response());
    }
}

TEST(Datagen, ClientDataIndependentOfClientCount)
{
    const auto small = gen_isotropic_lsq({2, 3, 6, 0.1}, 5);
    const auto large = gen_isotropic_lsq({6, 3, 6, 0.1}, 5);
    for (Eigen::Index j = 0; j < 2; ++j) {
        EXPECT_EQ(std::get<QuadraticLoss>(small.problem.client(j)).design(),
                  std::get<QuadraticLoss>(large.problem.client(j)).design());
        EXPECT_EQ(std::get<QuadraticLoss>(small.problem.client(j)).response(),
                  std::get<QuadraticLoss>(large.problem.client(j)).response());
    }
}

TEST(Datagen, NoiselessResponsesAreExact)
{
    const auto g = gen_isotropic_lsq({2, 3, 8, 0.0}, 6);
    for (Eigen::Index j = 0; j < 2; ++j) {
        const auto& q = std::get<QuadraticLoss>(g.problem.client(j));
        EXPECT_LE((q.design() * g.x_true - q.response()).norm(), 1e-12);
    }
    EXPECT_LE((lsq_optimum(g.problem) - g.x_true).norm(), 1e-10);
}

TEST(Datagen, SeedsChangeTheData)
{
    const auto a = gen_isotropic_lsq({1, 3, 5, 0.1}, 1);
    const auto b = gen_isotropic_lsq({1, 3, 5, 0.1}, 2);
    EXPECT_NE(a.x_true, b.x_true);
}

TEST(Datagen, SpecValidation)
{
    EXPECT_THROW((EnsembleSpec{IsotropicLSQ{0, 2, 2, 0.0}, 0}.validate()), ConfigError);
    EXPECT_THROW((EnsembleSpec{IsotropicLSQ{1, 2, 2, -1.0}, 0}.validate()), ConfigError);
    EXPECT_THROW((EnsembleSpec{ConditionedLSQ{1, 5, 3, 2.0, 0.0}, 0}.validate()), ConfigError);
    EXPECT_THROW((EnsembleSpec{ConditionedLSQ{1, 2, 3, 0.5, 0.0}, 0}.validate()), ConfigError);
}

TEST(HaarProperties, Orthogonality)
{
    RandomStream rng(7, stream::id(stream::Purpose::Test));
    for (int trial = 0; trial < 100; ++trial) {
        const int l = 1 + trial % 12;
        const Matrix q = sample_haar_orthogonal(l, rng);
        EXPECT_LE((q.transpose() * q - Matrix::Identity(l, l)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(HaarProperties, FirstEntryDistribution)
{
    // For Haar Q in O(l), Q_11 has mean 0 and variance 1/l.
    RandomStream rng(8, stream::id(stream::Purpose::Test));
    const int l = 4;
    const int n = 20000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = sample_haar_orthogonal(l, rng)(0, 0);
        sum += v;
        sq += v * v;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.015);
    EXPECT_NEAR(sq / n, 1.0 / l, 0.01);
}

TEST(HaarProperties, SignFixMakesDeterminantSymmetric)
{
    // Without the sign correction det(Q) is biased; with it +1 and -1 are equally likely.
    RandomStream rng(9, stream::id(stream::Purpose::Test));
    int positive = 0;
    const int n = 4000;
    for (int i = 0; i < n; ++i) {
        positive += sample_haar_orthogonal(3, rng).determinant() > 0.0;
    }
    EXPECT_NEAR(static_cast<double>(positive) / n, 0.5, 0.04);
}

TEST(ConditionedProperties, SingularValues)
{
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + trial % 8;
        const int n = d + trial % 5;
        const double kappa = std::pow(10.0, (trial % 9) * 0.5);
        const Matrix a = conditioned_design({1, d, n, kappa, 0.0}, 1000 + trial, 0);
        Eigen::JacobiSVD<Matrix> svd(a);
        const Vector sv = svd.singularValues();
        EXPECT_NEAR(sv[0], std::sqrt(kappa), 1e-8 * std::sqrt(kappa));
        for (Eigen::Index i = 1; i < sv.size(); ++i) {
            EXPECT_NEAR(sv[i], 1.0, 1e-8);
        }
    }
}

TEST(ConditionedProperties, ProblemConditionNumber)
{
    const auto g = gen_conditioned_lsq({3, 5, 12, 100.0, 0.0}, 10);
    const auto c = g.problem.constants();
    EXPECT_NEAR(c.ell_star, 1.0, 1e-10);
    EXPECT_NEAR(c.L_star, 100.0, 1e-8);
    EXPECT_NEAR(c.kappa(), 100.0, 1e-8);
}

TEST(Logistic, LabelRateMatchesSigmoid)
{
    RandomStream rng(11, stream::id(stream::Purpose::Test));
    const int n = 100000;
    int positive = 0;
    for (int i = 0; i < n; ++i) {
        positive += draw_logistic_label(1.0, rng) > 0;
    }
    EXPECT_NEAR(static_cast<double>(positive) / n, 0.7310585786300049, 0.005);
}

TEST(Logistic, GeneratedLabelsAreBinary)
{
    const auto g = gen_logistic({2, 3, 40}, 12);
    for (Eigen::Index j = 0; j < 2; ++j) {
        const auto& f = std::get<LogisticLoss>(g.problem.client(j));
        for (Eigen::Index i = 0; i < f.response().size(); ++i) {
            EXPECT_TRUE(f.response()[i] == 1.0 || f.response()[i] == -1.0);
        }
    }
}
