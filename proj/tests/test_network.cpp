#include "oracles.hpp"
#include "recourse/network.hpp"

#include <gtest/gtest.h>

using namespace recourse;

namespace {

Matrix random_rows(Index n, Index d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) x(i, j) = g(rng);
  return x;
}

Vector alternating_labels(Index n) {
  Vector y(n);
  for (Index i = 0; i < n; ++i) y(i) = double(i % 2);
  return y;
}

double mean_log_loss(const Classifier& m, const Matrix& x, const Vector& y) {
  const Vector p = predict_proba(m, x);
  double s = 0;
  for (Index i = 0; i < p.size(); ++i) s += oracle::log_loss(p(i), y(i));
  return s / double(p.size());
}

struct ArchCase {
  const char* name;
  Architecture arch;
};

std::vector<ArchCase> arch_cases() {
  Architecture two_deep = Architecture::real_world(ModelKind::mlp);
  two_deep.dropout = 0.0;
  Architecture ens = Architecture::synthetic(ModelKind::ensemble);
  ens.members = 3;
  return {{"logistic", Architecture::synthetic(ModelKind::logistic)},
          {"mlp_1x32", Architecture::synthetic(ModelKind::mlp)},
          {"mlp_2x64", two_deep},
          {"ensemble", ens}};
}

}  // namespace

TEST(Sigmoid, StableAtExtremes) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_TRUE(std::isfinite(sigmoid(-1000.0)));
  EXPECT_TRUE(std::isfinite(sigmoid(1000.0)));
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_GE(sigmoid(-1000.0), 0.0);
}

TEST(Logits, LinearModelExamples) {
  const Network w = oracle::linear({1.0, -1.0}, 0.0);
  Matrix x(2, 2);
  x << 2, 1, 0, 0;
  const Vector z = logits(Classifier(w), x);
  EXPECT_DOUBLE_EQ(z(0), 1.0);
  EXPECT_DOUBLE_EQ(z(1), 0.0);
  EXPECT_NEAR(predict_proba(Classifier(w), x)(0), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_THROW(logits(Classifier(w), Matrix::Zero(1, 3)), DimensionMismatch);
}

TEST(Ensemble, AveragesMemberProbabilities) {
  EnsembleModel e({oracle::linear({1.0}, 0.0), oracle::linear({-1.0}, 0.0)});
  Matrix x(1, 1);
  x << 3.0;
  EXPECT_NEAR(predict_proba(Classifier(e), x)(0), 0.5, 1e-12);
  EXPECT_NEAR(predictive_entropy(e, Vector::Constant(1, 3.0)), std::log(2.0), 1e-12);
  EnsembleModel same({oracle::linear({50.0}, 0.0), oracle::linear({50.0}, 0.0)});
  EXPECT_NEAR(predictive_entropy(same, Vector::Constant(1, 3.0)), 0.0, 1e-5);  // clamped near p = 1
}

TEST(Gradients, ParameterGradientMatchesFiniteDifferences) {
  const Matrix x = random_rows(12, 3, 1);
  const Vector y = alternating_labels(12);
  for (const auto& c : arch_cases()) {
    const Classifier m = build_classifier(c.arch, 3, 17);
    const Vector theta = flatten_params(m);
    auto f = [&](const Vector& t) {
      Classifier copy = m;
      unflatten_params(copy, t);
      if (auto* e = std::get_if<EnsembleModel>(&copy)) {
        // Concatenated member gradients: each block is the gradient of that
        // member's own loss, so the oracle sums member losses.
        double s = 0;
        for (const auto& n : e->members()) s += mean_log_loss(Classifier(n), x, y);
        return s;
      }
      return mean_log_loss(copy, x, y);
    };
    const Vector g = grad_params(m, x, y);
    ASSERT_EQ(g.size(), theta.size()) << c.name;
    EXPECT_LT(oracle::max_rel_error(g, oracle::fd_gradient(f, theta)), 1e-5) << c.name;
  }
}

TEST(Gradients, InputGradientMatchesFiniteDifferences) {
  const Vector x0 = random_rows(1, 3, 4).row(0).transpose();
  for (const auto& c : arch_cases()) {
    const Classifier m = build_classifier(c.arch, 3, 5);
    for (int target : {0, 1}) {
      auto f = [&](const Vector& v) {
        return oracle::log_loss(predict_proba(m, v.transpose())(0), double(target));
      };
      const Vector g = grad_input(m, x0, InputLoss::bce_to_target, target);
      EXPECT_LT(oracle::max_rel_error(g, oracle::fd_gradient(f, x0)), 1e-5) << c.name;
    }
  }
  Architecture ens = Architecture::synthetic(ModelKind::ensemble);
  const Classifier m = build_classifier(ens, 3, 8);
  auto h = [&](const Vector& v) {
    const double p = predict_proba(m, v.transpose())(0);
    return -(p * std::log(p) + (1 - p) * std::log(1 - p));
  };
  const Vector g = grad_input(m, x0, InputLoss::predictive_entropy);
  EXPECT_LT(oracle::max_rel_error(g, oracle::fd_gradient(h, x0)), 1e-5);
}

TEST(Training, ZeroLearningRateLeavesParametersUnchanged) {
  const Matrix x = random_rows(20, 2, 3);
  const Vector y = alternating_labels(20);
  Classifier m = build_classifier(Architecture::synthetic(ModelKind::mlp), 2, 1);
  const Vector before = flatten_params(m);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 4;
  train(m, x, y, cfg);
  EXPECT_EQ(flatten_params(m), before);
}

TEST(Training, FullBatchLossIsMonotoneAtSmallStep) {
  const Matrix x = random_rows(100, 2, 6);
  Vector y(100);
  for (Index i = 0; i < 100; ++i) y(i) = x(i, 0) + 0.3 * x(i, 1) > 0 ? 1.0 : 0.0;
  Classifier m = build_classifier(Architecture::synthetic(ModelKind::mlp), 2, 2);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 0;
  cfg.learning_rate = 1e-3;
  const auto trace = train(m, x, y, cfg);
  ASSERT_EQ(trace.size(), 50u);
  for (std::size_t e = 1; e < trace.size(); ++e) EXPECT_LE(trace[e], trace[e - 1] + 1e-12);
}

TEST(Training, ReproducibleForFixedSeed) {
  const Matrix x = random_rows(40, 2, 7);
  const Vector y = alternating_labels(40);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 1;
  cfg.seed = 4;
  Classifier a = build_classifier(Architecture::synthetic(ModelKind::mlp), 2, 1);
  Classifier b = a;
  train(a, x, y, cfg);
  train(b, x, y, cfg);
  EXPECT_EQ(flatten_params(a), flatten_params(b));
}

TEST(Training, RejectsSingleClassLabels) {
  Classifier m = build_classifier(Architecture::synthetic(ModelKind::logistic), 2, 1);
  EXPECT_THROW(train(m, Matrix::Zero(4, 2), Vector::Zero(4), TrainConfig{}), InvalidArgument);
}

TEST(Params, FlattenRoundTripAndLength) {
  Classifier logistic = build_classifier(Architecture::synthetic(ModelKind::logistic), 2, 1);
  EXPECT_EQ(param_count(logistic), 3);
  for (const auto& c : arch_cases()) {
    Classifier m = build_classifier(c.arch, 2, 3);
    const Vector t = flatten_params(m);
    Classifier other = build_classifier(c.arch, 2, 99);
    unflatten_params(other, t);
    EXPECT_EQ(flatten_params(other), t) << c.name;
    EXPECT_EQ(predict_proba(other, Matrix::Ones(1, 2)), predict_proba(m, Matrix::Ones(1, 2))) << c.name;
  }
  Classifier n = build_classifier(Architecture::synthetic(ModelKind::mlp), 2, 1);
  EXPECT_EQ(param_count(n), 2 * 32 + 32 + 32 + 1);
  EXPECT_THROW(unflatten_params(n, Vector::Zero(3)), DimensionMismatch);
}

TEST(Params, EnsembleFlattensByConcatenation) {
  Architecture a = Architecture::synthetic(ModelKind::ensemble);
  a.members = 2;
  const Classifier m = build_classifier(a, 2, 1);
  const auto& e = std::get<EnsembleModel>(m);
  const Vector t = flatten_params(m);
  const Vector a0 = e.members()[0].flatten(), a1 = e.members()[1].flatten();
  ASSERT_EQ(t.size(), a0.size() + a1.size());
  EXPECT_EQ(t.head(a0.size()), a0);
  EXPECT_EQ(t.tail(a1.size()), a1);
}

TEST(Checkpoint, RoundTripGivesIdenticalPredictions) {
  Architecture rw = Architecture::real_world(ModelKind::ensemble);
  for (const auto& arch : {Architecture::synthetic(ModelKind::mlp), rw}) {
    const Classifier m = build_classifier(arch, 4, 12);
    const auto j = nlohmann::json::parse(to_json(m).dump());
    const Classifier back = classifier_from_json(j);
    const Matrix x = random_rows(5, 4, 3);
    EXPECT_EQ(predict_proba(back, x), predict_proba(m, x));
    EXPECT_EQ(flatten_params(back), flatten_params(m));
  }
  auto j = to_json(build_classifier(Architecture::synthetic(ModelKind::logistic), 2, 1));
  j["version"] = 999;
  EXPECT_THROW(classifier_from_json(j), InvalidArgument);
}
