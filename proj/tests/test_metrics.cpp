#include "oracles.hpp"
#include "recourse/metrics.hpp"

#include <gtest/gtest.h>

using namespace recourse;

namespace {

Matrix normal_rows(Index n, Index d, double mean, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(mean, 1.0);
  Matrix x(n, d);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  return x;
}

Matrix col(std::initializer_list<double> v) {
  Matrix m(Index(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Classifier constant(double p) { return oracle::linear({0.0, 0.0}, std::log(p / (1 - p))); }

}  // namespace

TEST(Mmd, HandEvaluatedExamples) {
  EXPECT_NEAR(mmd(col({0, 0}), col({0, 0})), 0.0, 1e-15);
  EXPECT_NEAR(mmd(col({0, 0}), col({1, 1})), 2.0 - 2.0 * std::exp(-2.0), 1e-12);
  EXPECT_NEAR(mmd(col({0, 0}), col({1, 1})), 1.72933, 1e-5);
}

TEST(Mmd, MatchesDoubleLoopOracle) {
  Rng rng(1);
  for (int t = 0; t < 30; ++t) {
    const Index m = 2 + Index(rng() % 9), n = 2 + Index(rng() % 9), d = 1 + Index(rng() % 3);
    const Matrix x = normal_rows(m, d, 0.0, rng()), y = normal_rows(n, d, 0.3, rng());
    EXPECT_NEAR(mmd(x, y), oracle::mmd_naive(x, y, 0.5), 1e-12);
    EXPECT_NEAR(mmd(x, y, KernelSpec{1.3}), oracle::mmd_naive(x, y, 1.3), 1e-12);
    EXPECT_NEAR(mmd(x, y), mmd(y, x), 1e-12);
  }
}

TEST(Mmd, RejectsBadInputs) {
  EXPECT_THROW(mmd(col({0}), col({0, 1})), InvalidArgument);
  EXPECT_THROW(mmd(Matrix::Zero(2, 2), Matrix::Zero(2, 3)), DimensionMismatch);
  EXPECT_THROW(mmd(col({0, 1}), col({0, 1}), KernelSpec{0.0}), InvalidArgument);
}

TEST(PermutationTest, IdenticalSamplesGivePValueOne) {
  const Matrix x = normal_rows(30, 2, 0.0, 4);
  const auto r = mmd_permutation_test(x, x, {}, 200, 1);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
}

TEST(PermutationTest, SeparatedDistributionsAreDetected) {
  const auto r = mmd_permutation_test(normal_rows(100, 1, 0.0, 1), normal_rows(100, 1, 5.0, 2), {}, 1000, 3);
  EXPECT_LE(r.p_value, 0.01);
  EXPECT_GT(r.value, 0.0);
}

TEST(PermutationTest, CalibratedUnderTheNull) {
  int rejections = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const auto r = mmd_permutation_test(normal_rows(100, 1, 0.0, 1000 + t), normal_rows(100, 1, 0.0, 5000 + t), {},
                                        200, std::uint64_t(t));
    rejections += r.p_value <= 0.05;
  }
  const double rate = double(rejections) / trials;
  EXPECT_GE(1.0 - rate, 0.90);
  EXPECT_NEAR(rate, 0.05, 0.03);
}

TEST(PermutationTest, IndependentOfThreadCount) {
  const Matrix x = normal_rows(40, 2, 0.0, 7), y = normal_rows(55, 2, 0.2, 8);
  const auto a = mmd_permutation_test(x, y, {}, 300, 5, 1);
  const auto b = mmd_permutation_test(x, y, {}, 300, 5, 4);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.p_value, b.p_value);
  EXPECT_THROW(mmd_permutation_pvalue(x, y, {}, 99, 1), InvalidArgument);
}

TEST(PpMmd, Examples) {
  const Matrix pts = normal_rows(50, 2, 0.0, 1);
  const Classifier m = oracle::linear({1.0, -2.0}, 0.3);
  EXPECT_EQ(pp_mmd(m, m, pts), 0.0);
  EXPECT_NEAR(pp_mmd(constant(0.2), constant(0.8), pts), 2.0 - 2.0 * std::exp(-0.72), 1e-9);
  EXPECT_NEAR(pp_mmd(constant(0.2), constant(0.8), pts), 1.02650, 1e-5);
  Matrix shuffled = pts;
  shuffled.row(0).swap(shuffled.row(49));
  shuffled.row(3).swap(shuffled.row(17));
  const Classifier other = oracle::linear({-0.5, 1.0}, 0.0);
  EXPECT_NEAR(pp_mmd(m, other, pts), pp_mmd(m, other, shuffled), 1e-12);
}

TEST(Grid, PointCountsAndBounds) {
  const Matrix g = grid_points({{-1.0, 2.0}, {0.0, 5.0}}, 1000);
  EXPECT_EQ(g.rows(), 1024);
  EXPECT_EQ(g.cols(), 2);
  EXPECT_GE(g.col(0).minCoeff(), -1.0);
  EXPECT_LE(g.col(0).maxCoeff(), 2.0);
  EXPECT_GE(g.col(1).minCoeff(), 0.0);
  EXPECT_LE(g.col(1).maxCoeff(), 5.0);
  EXPECT_DOUBLE_EQ(g(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(g(1023, 1), 5.0);
  const Matrix line = grid_points({{0.0, 1.0}}, 3);
  ASSERT_EQ(line.rows(), 3);
  EXPECT_DOUBLE_EQ(line(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(line(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(line(2, 0), 1.0);
  EXPECT_THROW(grid_points({{1.0, 1.0}}, 3), InvalidArgument);
  EXPECT_THROW(grid_points({{0.0, 1.0}, {0.0, 1.0}}, 3), InvalidArgument);
}

TEST(Disagreement, Examples) {
  const Matrix pts = normal_rows(20, 2, 0.0, 2);
  const Classifier m = oracle::linear({1.0, 1.0}, 0.0);
  EXPECT_EQ(disagreement(m, m, pts), 0.0);
  EXPECT_EQ(disagreement(constant(0.9), constant(0.1), pts), 1.0);
}

TEST(Disagreement, AreaFractionBetweenShiftedBoundaries) {
  Rng rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Matrix pts(100000, 2);
  for (Index i = 0; i < pts.size(); ++i) pts.data()[i] = u(rng);
  const Classifier a = oracle::linear({1.0, 0.0}, 0.0), b = oracle::linear({1.0, 0.0}, -1.0);
  EXPECT_NEAR(disagreement(a, b, pts), 0.25, 0.01);
}

TEST(Decisiveness, Examples) {
  EXPECT_EQ(decisiveness_from_logits(Vector::Zero(4)), 0.0);
  Vector p(4);
  p << 0, 1, 1, 0;
  EXPECT_DOUBLE_EQ(decisiveness_from_proba(p), 0.25);
  EXPECT_DOUBLE_EQ(decisiveness_from_proba(Vector::Constant(3, 0.75)), 0.0625);
  Vector z(5);
  const double inf = std::numeric_limits<double>::infinity();
  z << -inf, inf, 1e308, -1e308, 3.0;
  const double d = decisiveness_from_logits(z);
  EXPECT_TRUE(std::isfinite(d));
  EXPECT_GE(d, 0.0);
  EXPECT_LE(d, 0.25);
}

TEST(Perturbation, Examples) {
  const Vector a = Vector::Zero(2), b = Vector::Ones(2);
  EXPECT_EQ(param_perturbation(a, a), 0.0);
  EXPECT_DOUBLE_EQ(param_perturbation(a, b), 2.0);
  EXPECT_EQ(param_perturbation(a, b), param_perturbation(b, a));
  EXPECT_THROW(param_perturbation(a, Vector::Zero(3)), DimensionMismatch);
}

TEST(Fscore, Examples) {
  EXPECT_DOUBLE_EQ(fscore({1, 0, 1}, {1, 0, 1}), 1.0);
  // TP = 1, FP = 1, FN = 1.
  EXPECT_DOUBLE_EQ(fscore({1, 1, 0}, {1, 0, 1}), 0.5);
  EXPECT_EQ(fscore({0, 0, 0}, {1, 0, 1}), 0.0);
  EXPECT_THROW(fscore({}, {}), InvalidArgument);
}

TEST(Report, TestedMetricsCarryPValues) {
  MetricReport r;
  r.mmd_positive = {0.1, 0.02};
  const auto rows = r.rows();
  int with_p = 0;
  bool saw_recoursed = false;
  for (const auto& row : rows) {
    with_p += row.p_value.has_value();
    saw_recoursed |= row.metric == "n_recoursed";
  }
  EXPECT_EQ(with_p, 3);
  EXPECT_TRUE(saw_recoursed);
}

TEST(PpMmd, SameModelTestIsExactlyNull) {
  const Matrix pts = normal_rows(30, 2, 0.0, 3);
  const Classifier m = oracle::linear({1.0, 2.0}, 0.0);
  const auto r = pp_mmd_test(m, m, pts, {}, 100, 1);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
}
