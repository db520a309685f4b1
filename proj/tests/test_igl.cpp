#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "gct/igl.hpp"
#include "oracles.hpp"

using gct::ClassLabel;
using gct::IglConfig;
using gct::LabelMatrix;
using gct::Matrix;
using gct::Vector;

namespace {

LabelMatrix one_hot(const Matrix& y) {
    LabelMatrix out;
    out.y = y;
    for (Eigen::Index c = 0; c < y.cols(); ++c) out.class_order.push_back(c);
    return out;
}

Vector random_positive(Eigen::Index n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.2, 5.0);
    Vector b(n);
    for (Eigen::Index i = 0; i < n; ++i) b(i) = u(rng);
    return b;
}

}  // namespace

TEST(UpdateB, ZeroRowHitsEpsilonFloor) {
    const Vector b = gct::update_b(Matrix::Zero(2, 3));
    EXPECT_DOUBLE_EQ(b(0), 1e8);
    EXPECT_DOUBLE_EQ(b(1), 1e8);
}

TEST(UpdateB, SquaredNormHalf) {
    Matrix p(1, 2);
    p << 0.5, 0.5;
    EXPECT_NEAR(gct::update_b(p)(0), 1.0 / 1.00000001, 1e-15);
    EXPECT_NEAR(gct::update_b(p, gct::BUpdate::unsquared)(0), 1.0 / (2.0 * std::sqrt(0.5) + 1e-8), 1e-15);
}

TEST(UpdateB, MatchesRowNormFormula) {
    std::mt19937_64 rng(21);
    const Matrix p = oracle::random_matrix(9, 4, rng);
    const Vector norms = oracle::brute_row_norms(p);
    const Vector b = gct::update_b(p);
    for (Eigen::Index i = 0; i < 9; ++i) EXPECT_NEAR(b(i), 1.0 / (2.0 * norms(i) * norms(i) + 1e-8), 1e-12);
}

TEST(UpdateP, ReducesToScaledIdentity) {
    // X = I, L = 0, B = I: (lambda + mu) P = lambda Y.
    IglConfig cfg;
    const Matrix y = Matrix::Identity(3, 3);
    const Matrix p = gct::update_p(Matrix::Identity(3, 3), one_hot(y), Matrix::Zero(3, 3), Vector::Ones(3), cfg);
    EXPECT_LE((p - (cfg.lambda / (cfg.lambda + cfg.mu)) * y).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(UpdateP, SatisfiesNormalEquations) {
    std::mt19937_64 rng(22);
    IglConfig cfg;
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix x = oracle::random_matrix(8, 20, rng);
        const LabelMatrix y = one_hot(oracle::random_one_hot(20, 5, rng));
        const Matrix l = gct::graph_regularizer(x, cfg);
        const Vector b = random_positive(8, rng);
        const Matrix p = gct::update_p(x, y, l, b, cfg);
        const Matrix resid = gct::igl_system(x, l, b, cfg) * p - cfg.lambda * x * y.y;
        EXPECT_LE(resid.cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(UpdateP, MatchesGradientDescent) {
    std::mt19937_64 rng(23);
    IglConfig cfg;
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix x = oracle::random_matrix(8, 20, rng);
        const LabelMatrix y = one_hot(oracle::random_one_hot(20, 5, rng));
        const Matrix l = gct::graph_regularizer(x, cfg);
        const Vector b = random_positive(8, rng);
        const Matrix ref = oracle::gradient_descent_minimizer(x, y.y, l, b, cfg.lambda, cfg.mu);
        EXPECT_LE((gct::update_p(x, y, l, b, cfg) - ref).cwiseAbs().maxCoeff(), 1e-4);
    }
}

TEST(UpdateP, RejectsShapeMismatch) {
    IglConfig cfg;
    const LabelMatrix y = one_hot(Matrix::Identity(3, 3));
    EXPECT_THROW(gct::update_p(Matrix::Identity(3, 3), y, Matrix::Zero(2, 2), Vector::Ones(3), cfg),
                 gct::ValidationError);
    EXPECT_THROW(gct::update_p(Matrix::Identity(3, 3), y, Matrix::Zero(3, 3), Vector::Ones(2), cfg),
                 gct::ValidationError);
}

TEST(Objective, ZeroProjectionCostsLambdaN) {
    std::mt19937_64 rng(24);
    IglConfig cfg;
    const Matrix x = oracle::random_matrix(4, 7, rng);
    const LabelMatrix y = one_hot(oracle::random_one_hot(7, 3, rng));
    const Matrix l = gct::graph_regularizer(x, cfg);
    EXPECT_NEAR(gct::igl_objective(x, y, Matrix::Zero(4, 3), l, cfg), cfg.lambda * 7.0, 1e-14);
}

TEST(Objective, RowNormTerm) {
    // X = 0 leaves only mu * sum of row norms plus lambda * ||Y||^2.
    IglConfig cfg;
    Matrix p = Matrix::Zero(2, 2);
    p(0, 0) = 3.0;
    p(0, 1) = 4.0;
    const LabelMatrix y = one_hot(Matrix::Identity(2, 2));
    const double v = gct::igl_objective(Matrix::Zero(2, 2), y, p, Matrix::Identity(2, 2), cfg);
    EXPECT_NEAR(v, cfg.mu * 5.0 + cfg.lambda * 2.0, 1e-14);
}

TEST(Objective, TraceFormMatchesSummation) {
    std::mt19937_64 rng(25);
    IglConfig cfg;
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix x = oracle::random_matrix(6, 12, rng);
        const LabelMatrix y = one_hot(oracle::random_one_hot(12, 4, rng));
        const Matrix p = oracle::random_matrix(6, 4, rng);
        const gct::Graph g = gct::build_graph(x, cfg.k, cfg.normalize_features);
        const Matrix l = gct::laplacian_operator(g, gct::LaplacianVariant::expanded);
        const double ref = oracle::summation_objective(x, y.y, p, g.adjacency, cfg.lambda, cfg.mu);
        EXPECT_NEAR(gct::igl_objective(x, y, p, l, cfg), ref, 1e-8 * std::max(1.0, std::abs(ref)));
    }
}

TEST(FitIgl, SeparableToyIsPerfect) {
    Matrix x(2, 6);
    x << 5, 5.2, 4.8, 0, 0.1, -0.2,
         0, 0.3, -0.1, 5, 4.9, 5.3;
    const std::vector<ClassLabel> labels{7, 7, 7, 9, 9, 9};
    const gct::IglModel m = gct::fit_igl(x, gct::make_label_matrix(labels), IglConfig{});
    EXPECT_EQ(gct::predict(m, x), labels);
}

TEST(FitIgl, UnsquaredReweightingNeverIncreasesObjective) {
    std::mt19937_64 rng(26);
    IglConfig cfg;
    cfg.b_update = gct::BUpdate::unsquared;
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix x = oracle::random_matrix(8, 20, rng);
        const gct::IglModel m = gct::fit_igl(x, one_hot(oracle::random_one_hot(20, 5, rng)), cfg);
        for (std::size_t i = 1; i < m.objective_history.size(); ++i) {
            const double prev = m.objective_history[i - 1];
            EXPECT_LE(m.objective_history[i] - prev, 1e-8 * std::abs(prev)) << "trial " << trial << " step " << i;
        }
    }
}

// The squared rule is not a majorizer of the row-norm penalty, so its
// objective sequence may rise for a few steps before settling.
TEST(FitIgl, SquaredReweightingSettlesToSolveResidual) {
    std::mt19937_64 rng(30);
    IglConfig cfg;
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix x = oracle::random_matrix(8, 20, rng);
        const LabelMatrix y = one_hot(oracle::random_one_hot(20, 5, rng));
        const gct::IglModel m = gct::fit_igl(x, y, cfg);
        ASSERT_TRUE(m.converged);
        const Matrix l = gct::graph_regularizer(x, cfg);
        const Matrix resid = gct::igl_system(x, l, m.b_diag, cfg) * m.p - cfg.lambda * x * y.y;
        EXPECT_LE(resid.cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(FitIgl, ConvergedModelIsAFixedPoint) {
    std::mt19937_64 rng(27);
    IglConfig cfg;
    const Matrix x = oracle::random_matrix(8, 20, rng);
    const LabelMatrix y = one_hot(oracle::random_one_hot(20, 5, rng));
    const gct::IglModel m = gct::fit_igl(x, y, cfg);
    ASSERT_TRUE(m.converged);
    const Matrix l = gct::graph_regularizer(x, cfg);
    const Matrix again = gct::update_p(x, y, l, gct::update_b(m.p, cfg.b_update), cfg);
    const double o1 = gct::igl_objective(x, y, m.p, l, cfg);
    const double o2 = gct::igl_objective(x, y, again, l, cfg);
    EXPECT_LE(std::abs(o1 - o2), 10.0 * cfg.rel_tol * o1);
}

TEST(FitIgl, NoRegularizationGivesNormalEquations) {
    // mu = 0 and an all-zero graph term reduce the fit to least squares.
    std::mt19937_64 rng(28);
    IglConfig cfg;
    cfg.mu = 0.0;
    const Matrix x = oracle::random_matrix(4, 12, rng);
    const LabelMatrix y = one_hot(oracle::random_one_hot(12, 3, rng));
    const Matrix p = gct::update_p(x, y, Matrix::Zero(12, 12), Vector::Ones(4), cfg);
    const Matrix ls = (x * x.transpose()).ldlt().solve(x * y.y);
    EXPECT_LE((p - ls).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FitIgl, RejectsDegenerateLabels) {
    const Matrix x = Matrix::Identity(2, 2);
    const std::vector<ClassLabel> one{1, 1};
    EXPECT_THROW(gct::fit_igl(x, gct::make_label_matrix(one), IglConfig{}), gct::ValidationError);
    const std::vector<ClassLabel> labels{1, 2};
    EXPECT_THROW(gct::fit_igl(x, gct::make_label_matrix(labels, {1, 2, 3}), IglConfig{}), gct::ValidationError);
    IglConfig bad;
    bad.lambda = 0.0;
    EXPECT_THROW(gct::fit_igl(x, gct::make_label_matrix(labels), bad), gct::ValidationError);
}

TEST(Predict, TiesGoToLowestColumn) {
    Matrix s(2, 3);
    s << 1, 1, 0,
         0, 2, 2;
    EXPECT_EQ(gct::argmax_rows(s), (std::vector<Eigen::Index>{0, 1}));
}

TEST(Predict, InvariantToPositiveScaling) {
    std::mt19937_64 rng(29);
    gct::IglModel m;
    m.p = oracle::random_matrix(5, 4, rng);
    m.class_order = {10, 20, 30, 40};
    const Matrix xt = oracle::random_matrix(5, 30, rng);
    gct::IglModel scaled = m;
    scaled.p *= 3.7;
    EXPECT_EQ(gct::predict(m, xt), gct::predict(scaled, xt));
}

TEST(Predict, EmptyAndMismatchedInputs) {
    gct::IglModel m;
    m.p = Matrix::Ones(3, 2);
    m.class_order = {0, 1};
    const Matrix none(3, 0);
    EXPECT_EQ(gct::predict_soft(m, none).rows(), 0);
    EXPECT_EQ(gct::predict_soft(m, none).cols(), 2);
    EXPECT_THROW(gct::predict_soft(m, Matrix::Ones(4, 2)), gct::ValidationError);
}

TEST(LabelMatrix, RosterOrdersColumns) {
    const std::vector<ClassLabel> labels{5, 2, 5};
    const LabelMatrix y = gct::make_label_matrix(labels, {9, 5, 2});
    EXPECT_EQ(y.class_order, (std::vector<ClassLabel>{2, 5, 9}));
    EXPECT_EQ(y.y(0, 1), 1.0);
    EXPECT_EQ(y.y(1, 0), 1.0);
    EXPECT_EQ(y.y.col(2).sum(), 0.0);
    const std::vector<ClassLabel> stray{4};
    EXPECT_THROW(gct::make_label_matrix(stray, {1, 2}), gct::ValidationError);
}
