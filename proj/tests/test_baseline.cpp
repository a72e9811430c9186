#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pdesift/stridge.hpp"
#include "pdesift/systems.hpp"

using namespace pdesift;

TEST(Metrics, FalsePositiveRateUsesDictionarySize)
{
    EXPECT_DOUBLE_EQ(false_positive_rate({4, 10}, {4}, 49), 1.0 / 49.0);
    EXPECT_DOUBLE_EQ(false_positive_rate({4}, {4}, 49), 0.0);
    EXPECT_DOUBLE_EQ(false_positive_rate({}, {4}, 49), 0.0);
    EXPECT_DOUBLE_EQ(false_positive_rate({1, 2, 3}, {}, 30), 0.1);
    EXPECT_THROW(false_positive_rate({50}, {4}, 49), Error);
    EXPECT_THROW(false_positive_rate({1}, {1}, 0), Error);
}

TEST(Metrics, FalseNegativeRateUsesTruthSize)
{
    EXPECT_DOUBLE_EQ(false_negative_rate({4}, {4, 9}), 0.5);
    EXPECT_DOUBLE_EQ(false_negative_rate({4, 9, 11}, {4, 9}), 0.0);
    EXPECT_DOUBLE_EQ(false_negative_rate({}, {}), 0.0);
    EXPECT_DOUBLE_EQ(false_negative_rate({}, {1, 2, 3}), 1.0);
}

TEST(Standardize, UnitRmsColumnsAndTarget)
{
    const auto p = oracle::random_problem(1, 5, 60);
    Eigen::MatrixXd D = p.D;
    D.col(2) *= 1e4;
    const Standardized s = standardize(D, p.y);
    for (int c = 0; c < 5; ++c) EXPECT_NEAR(s.D.col(c).norm() / std::sqrt(60.0), 1.0, 1e-12);
    EXPECT_NEAR(s.y.norm() / std::sqrt(60.0), 1.0, 1e-12);
    Eigen::VectorXd phi = Eigen::VectorXd::Ones(5);
    const Eigen::VectorXd back = s.unscale(phi);
    EXPECT_NEAR(back(2), s.y_scale / s.col_scale(2), 1e-15);
}

TEST(Ridge, ZeroLambdaIsLeastSquares)
{
    const auto p = oracle::random_problem(2, 4, 50);
    std::vector<Eigen::Index> all{0, 1, 2, 3};
    const Eigen::VectorXd a = ridge_solve(p.D, p.y, all, 0.0);
    const Eigen::VectorXd b = p.D.colPivHouseholderQr().solve(p.y);
    EXPECT_LT((a - b).norm(), 1e-10);
    const Eigen::VectorXd r = ridge_solve(p.D, p.y, all, 10.0);
    EXPECT_LT(r.norm(), a.norm());
}

TEST(Stridge, RecoversSparseLinearModel)
{
    const auto p = oracle::random_problem(8, 8, 200);
    StridgeConfig cfg;
    const auto r = stridge(standardize(p.D, p.y), cfg);
    std::vector<std::size_t> truth;
    for (int i = 0; i < 8; ++i)
        if (p.phi(i) != 0.0) truth.push_back(static_cast<std::size_t>(i));
    EXPECT_EQ(r.support, truth);
    for (auto i : r.support) EXPECT_NEAR(r.coefficients(static_cast<Eigen::Index>(i)), p.phi(static_cast<Eigen::Index>(i)), 0.1);
}

TEST(Stridge, FixedToleranceThresholdsStandardizedCoefficients)
{
    const auto p = oracle::random_problem(9, 6, 200);
    StridgeConfig cfg;
    cfg.tol_search = false;
    cfg.tol = 1e6; // nothing survives
    EXPECT_TRUE(stridge(standardize(p.D, p.y), cfg).support.empty());
    cfg.tol = 0.0; // nothing is dropped
    EXPECT_EQ(stridge(standardize(p.D, p.y), cfg).support.size(), 6u);
}

TEST(Stridge, ValidatesConfig)
{
    StridgeConfig cfg;
    cfg.validation_stride = 1;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.tol_grid.clear();
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.lambda = -1.0;
    EXPECT_THROW(cfg.validate(), Error);
}
