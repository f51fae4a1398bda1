#include "oracles.hpp"
#include "recourse/data.hpp"
#include "recourse/generators.hpp"

#include <gtest/gtest.h>

using namespace recourse;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(Index(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

GeneratorSpec spec_of(GeneratorKind k) {
  GeneratorSpec s;
  s.kind = k;
  return s;
}

/// MLP trained on standardized overlapping data, plus the data itself.
struct Fitted {
  Dataset data;
  Classifier model;
};

const Fitted& overlapping_mlp() {
  static const Fitted f = [] {
    Dataset d = make_synthetic(SyntheticKind::overlapping, 400, 0.0, 21);
    d = apply_standardizer(d, fit_standardizer(d));
    Classifier m = build_classifier(Architecture::synthetic(ModelKind::mlp), 2, 3);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 1;
    cfg.seed = 3;
    std::vector<Index> all(400);
    std::iota(all.begin(), all.end(), Index{0});
    train(m, d.features(), d.labels_of(all), cfg, false);
    return Fitted{d, m};
  }();
  return f;
}

Vector class_mean(const Dataset& d, int y) { return d.features_of(d.rows_with_label(y)).colwise().mean().transpose(); }

/// Rows predicted negative by the model, up to `n`.
std::vector<Index> negatives(const Fitted& f, std::size_t n) {
  const Vector p = predict_proba(f.model, f.data.features());
  std::vector<Index> out;
  for (Index i = 0; i < p.size() && out.size() < n; ++i)
    if (p(i) < 0.5) out.push_back(i);
  return out;
}

VAEModel identity_vae(Index d) {
  DenseLayer enc;
  enc.weight = Matrix::Zero(2 * d, d);
  enc.weight.topRows(d) = Matrix::Identity(d, d);
  enc.bias = Vector::Zero(2 * d);
  DenseLayer dec;
  dec.weight = Matrix::Identity(d, d);
  dec.bias = Vector::Zero(d);
  return VAEModel(Network({enc}), Network({dec}));
}

}  // namespace

TEST(Costs, YLossExamples) {
  const Classifier sure = oracle::linear({0.0}, 1000.0);
  EXPECT_NEAR(yloss(sure, vec({0.0}), 1), 0.0, 1e-12);
  const Classifier half = oracle::linear({0.0}, 0.0);
  EXPECT_NEAR(yloss(half, vec({0.0}), 1), std::log(2.0), 1e-12);
  const Classifier ens = EnsembleModel({oracle::linear({0.0}, 0.0), oracle::linear({0.0}, 0.0)});
  EXPECT_NEAR(yloss(ens, vec({0.0}), 1, LatentYLoss::entropy), std::log(2.0), 1e-12);
  EXPECT_THROW(yloss(half, vec({0.0}), 1, LatentYLoss::entropy), InvalidArgument);
}

TEST(Costs, PrivateCostExamples) {
  EXPECT_EQ(private_cost(vec({1, 2}), vec({1, 2})), 0.0);
  EXPECT_DOUBLE_EQ(private_cost(vec({0, 0}), vec({1, 1})), 2.0);
  EXPECT_DOUBLE_EQ(private_cost(vec({0, 0}), vec({1, 1}), Distance::l1), 2.0);
  EXPECT_THROW(private_cost(vec({0}), vec({1, 1})), DimensionMismatch);
}

TEST(Costs, ModelLossPenaltyDecreasesInProbability) {
  EXPECT_NEAR(ext_cost_claproar(oracle::linear({0.0}, 0.0), vec({0.0}), 1), std::log(2.0), 1e-12);
  EXPECT_NEAR(ext_cost_claproar(oracle::linear({0.0}, 50.0), vec({0.0}), 1), 0.0, 1e-12);
  const Classifier m = oracle::linear({1.0}, 0.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double z = -10; z <= 10; z += 0.5) {
    const double c = ext_cost_claproar(m, vec({z}), 1);
    EXPECT_LT(c, prev);
    prev = c;
  }
}

TEST(Costs, GravitationalPenaltyExamples) {
  EXPECT_EQ(ext_cost_gravitational(vec({1, 1}), vec({1, 1})), 0.0);
  EXPECT_DOUBLE_EQ(ext_cost_gravitational(vec({0, 0}), vec({1, 1})), 2.0);
  const Vector v = vec({3.5, -2});
  EXPECT_DOUBLE_EQ(ext_cost_gravitational(vec({0.2, 0.7}) + v, vec({1, -1}) + v),
                   ext_cost_gravitational(vec({0.2, 0.7}), vec({1, -1})));
}

TEST(Costs, DppExamples) {
  EXPECT_DOUBLE_EQ(dpp_diversity(Matrix::Constant(1, 2, 4.0)), 1.0);
  EXPECT_NEAR(dpp_diversity(Matrix::Ones(2, 2)), 0.0, 1e-15);
  Matrix two(2, 1);
  two << 0, 1;  // squared distance 1
  EXPECT_NEAR(dpp_diversity(two), 0.75, 1e-15);
}

TEST(Costs, DppGradientMatchesFiniteDifferences) {
  Matrix xs(3, 2);
  xs << 0.1, 0.3, -0.4, 0.8, 1.2, -0.5;
  const Matrix g = dpp_diversity_grad(xs);
  Vector flat = Eigen::Map<const Vector>(xs.data(), xs.size());
  auto f = [&](const Vector& v) { return dpp_diversity(Eigen::Map<const Matrix>(v.data(), 3, 2)); };
  const Vector fd = oracle::fd_gradient(f, flat);
  EXPECT_LT(oracle::max_rel_error(Eigen::Map<const Vector>(g.data(), g.size()), fd), 1e-6);
}

TEST(Search, WachterCrossesLinearBoundary) {
  const Classifier m = oracle::linear({1.0, 0.0}, 0.0);
  const auto r = generate(m, nullptr, vec({-1, 0}), 1, spec_of(GeneratorKind::wachter), std::nullopt, 1);
  ASSERT_EQ(r.counterfactuals.rows(), 5);
  for (Index c = 0; c < 5; ++c) {
    EXPECT_TRUE(r.converged[std::size_t(c)]);
    EXPECT_GT(r.counterfactuals(c, 0), 0.0);
  }
  EXPECT_NEAR((r.path.front() - vec({-1, 0})).norm(), 0.0, 0.1);  // jitter only
}

TEST(Search, AlreadyValidFactualIsReturnedUnchanged) {
  const Classifier m = oracle::linear({1.0, 0.0}, 0.0);
  for (auto k : {GeneratorKind::wachter, GeneratorKind::dice, GeneratorKind::greedy}) {
    const auto r = generate(m, nullptr, vec({2, 0}), 1, spec_of(k), std::nullopt, 1);
    EXPECT_EQ(r.iterations, 0);
    for (Index c = 0; c < r.counterfactuals.rows(); ++c) EXPECT_EQ(r.counterfactuals.row(c), vec({2, 0}).transpose());
    EXPECT_TRUE(r.any_converged());
  }
}

TEST(Search, DiceWithOneCandidateEqualsWachter) {
  const auto& f = overlapping_mlp();
  const Vector x = f.data.features().row(negatives(f, 1).front()).transpose();
  GeneratorSpec w = spec_of(GeneratorKind::wachter), d = spec_of(GeneratorKind::dice);
  w.k = d.k = 1;
  d.diversity_weight = 2.0;
  const auto a = generate(f.model, nullptr, x, 1, w, std::nullopt, 9);
  const auto b = generate(f.model, nullptr, x, 1, d, std::nullopt, 9);
  EXPECT_EQ(a.counterfactuals, b.counterfactuals);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Search, GreedyMovesMostSalientFeatureUntilCapped) {
  const Classifier m = oracle::linear({1.0, 0.1}, 0.0);
  GeneratorSpec s = spec_of(GeneratorKind::greedy);
  s.k = 1;
  s.init_jitter = 0.0;
  const auto r = generate(m, nullptr, vec({-3, 0}), 1, s, std::nullopt, 1);
  const int cap = s.greedy_max_steps_per_feature;
  ASSERT_GT(r.path.size(), std::size_t(cap + 1));
  for (int t = 0; t < cap; ++t) {
    const Vector step = r.path[std::size_t(t + 1)] - r.path[std::size_t(t)];
    EXPECT_NEAR(step(0), s.greedy_delta, 1e-12) << t;
    EXPECT_EQ(step(1), 0.0) << t;
  }
  const Vector next = r.path[std::size_t(cap + 1)] - r.path[std::size_t(cap)];
  EXPECT_EQ(next(0), 0.0);
  EXPECT_NEAR(next(1), s.greedy_delta, 1e-12);
}

TEST(Search, GravitationalPullLandsNearTargetMean) {
  const auto& f = overlapping_mlp();
  const Vector mean = class_mean(f.data, 1);
  GeneratorSpec s = spec_of(GeneratorKind::gravitational);
  s.lambda1 = 0.1;
  s.lambda2 = 10.0;
  s.max_iter = 500;
  for (Index i : negatives(f, 5)) {
    const auto r = generate(f.model, nullptr, f.data.features().row(i).transpose(), 1, s, mean, std::uint64_t(i));
    EXPECT_EQ(r.iterations, s.max_iter);
    for (Index c = 0; c < r.counterfactuals.rows(); ++c)
      EXPECT_LT((r.counterfactuals.row(c).transpose() - mean).norm(), 0.1);
  }
}

TEST(Search, LatentWithIdentityDecoderMatchesWachter) {
  const Classifier m = oracle::linear({1.0, 0.0}, 0.0);
  const VAEModel v = identity_vae(2);
  const auto a = generate(m, &v, vec({-1, 0}), 1, spec_of(GeneratorKind::latent), std::nullopt, 4);
  const auto b = generate(m, nullptr, vec({-1, 0}), 1, spec_of(GeneratorKind::wachter), std::nullopt, 4);
  EXPECT_TRUE(a.any_converged());
  EXPECT_GT(a.counterfactuals(0, 0), 0.0);
  EXPECT_LT((a.counterfactuals - b.counterfactuals).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(generate(m, nullptr, vec({-1, 0}), 1, spec_of(GeneratorKind::latent), std::nullopt, 4),
               InvalidArgument);
}

TEST(Search, ValidityFlagMatchesThresholdForEveryKind) {
  const auto& f = overlapping_mlp();
  const Vector mean = class_mean(f.data, 1);
  Dataset d = f.data;
  VAEModel v = VAEModel::build(2, VaeArchitecture::synthetic(), 1);
  for (std::string_view name : {"wachter", "latent", "dice", "greedy", "gravitational", "claproar"}) {
    GeneratorSpec s = spec_of(*parse_generator_kind(name));
    s.max_iter = 100;
    for (double gamma : {0.5, 0.9}) {
      s.gamma = gamma;
      for (Index i : negatives(f, 3)) {
        const auto r = generate(f.model, &v, d.features().row(i).transpose(), 1, s, mean, 3);
        const Vector p = predict_proba(f.model, r.counterfactuals);
        for (Index c = 0; c < p.size(); ++c) {
          EXPECT_NEAR(p(c), r.final_proba(c), 1e-12) << name;
          EXPECT_EQ(bool(r.converged[std::size_t(c)]), p(c) >= gamma) << name;
        }
      }
    }
  }
}

TEST(Search, DeterministicGivenSeed) {
  const auto& f = overlapping_mlp();
  const Vector x = f.data.features().row(negatives(f, 1).front()).transpose();
  const auto a = generate(f.model, nullptr, x, 1, spec_of(GeneratorKind::dice), std::nullopt, 77);
  const auto b = generate(f.model, nullptr, x, 1, spec_of(GeneratorKind::dice), std::nullopt, 77);
  const auto c = generate(f.model, nullptr, x, 1, spec_of(GeneratorKind::dice), std::nullopt, 78);
  EXPECT_EQ(a.counterfactuals, b.counterfactuals);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_NE(a.counterfactuals, c.counterfactuals);
}

TEST(Search, ObjectiveDescendsOnLinearModel) {
  const Classifier m = oracle::linear({0.8, -0.4}, 0.2);
  GeneratorSpec s = spec_of(GeneratorKind::wachter);
  s.step_size = 0.01;
  s.gamma = 0.95;
  s.max_iter = 300;
  const auto r = generate(m, nullptr, vec({-2, 1}), 1, s, std::nullopt, 2);
  ASSERT_GT(r.objective.size(), 10u);
  for (std::size_t t = 1; t < r.objective.size(); ++t) EXPECT_LE(r.objective[t], r.objective[t - 1] + 1e-12);
}

TEST(Search, HigherThresholdNeverLowersConvergedProbability) {
  const auto& f = overlapping_mlp();
  for (Index i : negatives(f, 10)) {
    const Vector x = f.data.features().row(i).transpose();
    GeneratorSpec lo = spec_of(GeneratorKind::wachter), hi = lo;
    hi.gamma = 0.9;
    const auto a = generate(f.model, nullptr, x, 1, lo, std::nullopt, 5);
    const auto b = generate(f.model, nullptr, x, 1, hi, std::nullopt, 5);
    for (Index c = 0; c < 5; ++c)
      if (a.converged[std::size_t(c)] && b.converged[std::size_t(c)]) {
        EXPECT_GE(b.final_proba(c), a.final_proba(c));
      }
  }
}

TEST(Search, DiceCandidatesAreDistinct) {
  const auto& f = overlapping_mlp();
  const Vector x = f.data.features().row(negatives(f, 1).front()).transpose();
  const auto r = generate(f.model, nullptr, x, 1, spec_of(GeneratorKind::dice), std::nullopt, 3);
  double min_dist = std::numeric_limits<double>::infinity();
  for (Index a = 0; a < r.counterfactuals.rows(); ++a)
    for (Index b = a + 1; b < r.counterfactuals.rows(); ++b)
      min_dist = std::min(min_dist, (r.counterfactuals.row(a) - r.counterfactuals.row(b)).norm());
  EXPECT_GT(min_dist, 0.0);
}

TEST(Search, ModelLossPenaltyLowersModelLossOnCounterfactuals) {
  const auto& f = overlapping_mlp();
  const auto rows = negatives(f, 20);
  double w_loss = 0, c_loss = 0;
  int n = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (Index i : rows) {
      const Vector x = f.data.features().row(i).transpose();
      const auto w = generate(f.model, nullptr, x, 1, spec_of(GeneratorKind::wachter), std::nullopt, seed);
      const auto c = generate(f.model, nullptr, x, 1, spec_of(GeneratorKind::claproar), std::nullopt, seed);
      const Vector pw = predict_proba(f.model, w.counterfactuals), pc = predict_proba(f.model, c.counterfactuals);
      for (Index k = 0; k < pw.size(); ++k) {
        w_loss += oracle::log_loss(pw(k), 1.0);
        c_loss += oracle::log_loss(pc(k), 1.0);
        ++n;
      }
    }
  }
  EXPECT_LE(c_loss / n, w_loss / n);
}

TEST(Spec, ValidationAndParsing) {
  GeneratorSpec s;
  s.gamma = 1.5;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s.gamma = 0.5;
  s.k = 0;
  EXPECT_THROW(s.validate(), InvalidArgument);
  EXPECT_FALSE(parse_generator_kind("foo"));
  EXPECT_EQ(parse_generator_kind("claproar"), GeneratorKind::claproar);
  EXPECT_TRUE(spec_of(GeneratorKind::claproar).runs_to_max_iter());
  EXPECT_FALSE(spec_of(GeneratorKind::wachter).runs_to_max_iter());
  EXPECT_THROW(generate(oracle::linear({1, 0}, 0), nullptr, vec({-1, 0}), 1, spec_of(GeneratorKind::gravitational),
                        std::nullopt, 1),
               InvalidArgument);
}
