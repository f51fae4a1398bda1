#pragma once

#include "recourse/network.hpp"
#include "recourse/vae.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace recourse {

enum class GeneratorKind { wachter, latent, dice, greedy, gravitational, claproar };
enum class Distance { l2sq, l1 };
enum class LatentYLoss { bce, entropy };
enum class ExtCost { none, claproar, gravitational };
enum class SearchOptimizer { gd, adam };

inline constexpr std::string_view kGeneratorKinds = "wachter, latent, dice, greedy, gravitational, claproar";

inline std::string to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::wachter: return "wachter";
    case GeneratorKind::latent: return "latent";
    case GeneratorKind::dice: return "dice";
    case GeneratorKind::greedy: return "greedy";
    case GeneratorKind::gravitational: return "gravitational";
    case GeneratorKind::claproar: return "claproar";
  }
  return "?";
}

inline std::optional<GeneratorKind> parse_generator_kind(std::string_view s) {
  if (s == "wachter") return GeneratorKind::wachter;
  if (s == "latent" || s == "revise" || s == "clue") return GeneratorKind::latent;
  if (s == "dice") return GeneratorKind::dice;
  if (s == "greedy") return GeneratorKind::greedy;
  if (s == "gravitational") return GeneratorKind::gravitational;
  if (s == "claproar") return GeneratorKind::claproar;
  return std::nullopt;
}

inline std::string to_string(Distance d) { return d == Distance::l2sq ? "l2sq" : "l1"; }
inline std::string to_string(LatentYLoss y) { return y == LatentYLoss::bce ? "bce" : "entropy"; }
inline std::string to_string(SearchOptimizer o) { return o == SearchOptimizer::gd ? "gd" : "adam"; }

inline std::string to_string(ExtCost e) {
  switch (e) {
    case ExtCost::none: return "none";
    case ExtCost::claproar: return "claproar";
    case ExtCost::gravitational: return "gravitational";
  }
  return "?";
}

inline std::optional<ExtCost> parse_ext_cost(std::string_view s) {
  if (s == "none") return ExtCost::none;
  if (s == "claproar") return ExtCost::claproar;
  if (s == "gravitational") return ExtCost::gravitational;
  return std::nullopt;
}

/// Everything that parameterizes one counterfactual generator.
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::wachter;
  /// Label used in result files; empty means the kind's name.
  std::string name;
  double lambda1 = 0.1;  // private cost weight
  double lambda2 = 0.5;  // external cost weight
  double gamma = 0.5;    // decision threshold for validity
  int k = 5;             // counterfactuals searched jointly
  double diversity_weight = 0.5;
  int max_iter = 500;
  double step_size = 0.05;
  double greedy_delta = 0.05;
  int greedy_max_steps_per_feature = 20;
  Distance distance = Distance::l2sq;
  LatentYLoss latent_yloss = LatentYLoss::bce;
  /// Overrides the external cost implied by `kind`, e.g. to add a penalty to
  /// latent-space search.
  std::optional<ExtCost> ext_cost;
  SearchOptimizer optimizer = SearchOptimizer::gd;
  double init_jitter = 0.01;

  ExtCost effective_ext_cost() const {
    if (ext_cost) return *ext_cost;
    if (kind == GeneratorKind::gravitational) return ExtCost::gravitational;
    if (kind == GeneratorKind::claproar) return ExtCost::claproar;
    return ExtCost::none;
  }

  bool in_latent_space() const { return kind == GeneratorKind::latent; }

  /// Penalized searches ignore the threshold and always use the full budget.
  bool runs_to_max_iter() const {
    return kind != GeneratorKind::greedy && effective_ext_cost() != ExtCost::none;
  }

  std::string label() const { return name.empty() ? to_string(kind) : name; }

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in (0,1)");
    if (k < 1) throw InvalidArgument("k must be at least 1");
    if (max_iter < 1) throw InvalidArgument("max_iter must be at least 1");
    if (!(lambda1 >= 0.0)) throw InvalidArgument("lambda1 must be nonnegative");
    if (!(lambda2 >= 0.0)) throw InvalidArgument("lambda2 must be nonnegative");
    if (!(diversity_weight >= 0.0)) throw InvalidArgument("diversity_weight must be nonnegative");
    if (!(step_size > 0.0)) throw InvalidArgument("step_size must be positive");
    if (!(greedy_delta > 0.0)) throw InvalidArgument("greedy_delta must be positive");
    if (greedy_max_steps_per_feature < 1) throw InvalidArgument("greedy_max_steps_per_feature must be at least 1");
    if (!(init_jitter >= 0.0)) throw InvalidArgument("init_jitter must be nonnegative");
  }
};

struct CounterfactualResult {
  Vector factual;
  int target = 1;
  Matrix counterfactuals;  // K x D, decoded
  Matrix states;           // K x state dim
  std::vector<Vector> path;  // decoded first counterfactual, per iteration
  std::vector<double> objective;  // total objective per iteration
  std::vector<bool> converged;
  Vector final_proba;  // p(target | counterfactual)
  int iterations = 0;

  bool any_converged() const { return std::find(converged.begin(), converged.end(), true) != converged.end(); }
};

// ---------------------------------------------------------------------------
// Objective terms

/// BCE of the prediction against the target, or predictive entropy.
inline double yloss(const Classifier& m, const Vector& x, int target, LatentYLoss mode = LatentYLoss::bce) {
  if (target != 0 && target != 1) throw InvalidArgument("target label must be 0 or 1");
  const Matrix row = x.transpose();
  if (mode == LatentYLoss::entropy) {
    if (!std::holds_alternative<EnsembleModel>(m))
      throw InvalidArgument("entropy yloss requires an ensemble model");
    return entropy_input_grad(m, row).value(0);
  }
  return bce_input_grad(m, row, target).value(0);
}

inline double private_cost(const Vector& x, const Vector& xp, Distance d = Distance::l2sq) {
  if (x.size() != xp.size()) throw DimensionMismatch("private_cost", x.size(), xp.size());
  return d == Distance::l2sq ? (xp - x).squaredNorm() : (xp - x).lpNorm<1>();
}

/// Loss the current model incurs on the counterfactual labelled as target.
inline double ext_cost_claproar(const Classifier& m, const Vector& xp, int target) {
  return bce_input_grad(m, xp.transpose(), target).value(0);
}

inline double ext_cost_gravitational(const Vector& xp, const Vector& target_mean) {
  if (xp.size() != target_mean.size()) throw DimensionMismatch("ext_cost_gravitational", target_mean.size(), xp.size());
  return (xp - target_mean).squaredNorm();
}

namespace detail {

inline double pair_distance(const RowVector& a, const RowVector& b, Distance d) {
  return d == Distance::l2sq ? (a - b).squaredNorm() : (a - b).lpNorm<1>();
}

inline Matrix dpp_kernel(const Matrix& xs, Distance d) {
  const Index k = xs.rows();
  Matrix s = Matrix::Identity(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = i + 1; j < k; ++j) s(i, j) = s(j, i) = 1.0 / (1.0 + pair_distance(xs.row(i), xs.row(j), d));
  return s;
}

/// Cofactor matrix via minors; stays defined when the kernel is singular.
inline Matrix cofactors(const Matrix& s) {
  const Index k = s.rows();
  Matrix c(k, k);
  if (k == 1) {
    c(0, 0) = 1.0;
    return c;
  }
  Matrix minor(k - 1, k - 1);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) {
      for (Index r = 0, mr = 0; r < k; ++r) {
        if (r == i) continue;
        for (Index q = 0, mq = 0; q < k; ++q) {
          if (q == j) continue;
          minor(mr, mq++) = s(r, q);
        }
        ++mr;
      }
      c(i, j) = ((i + j) % 2 == 0 ? 1.0 : -1.0) * minor.determinant();
    }
  return c;
}

}  // namespace detail

/// det of the similarity kernel S[i,j] = 1 / (1 + dist(x_i, x_j)).
inline double dpp_diversity(const Matrix& xs, Distance d = Distance::l2sq) {
  if (xs.rows() < 1) throw InvalidArgument("dpp_diversity needs at least one counterfactual");
  return detail::dpp_kernel(xs, d).determinant();
}

/// Gradient of `dpp_diversity` with respect to every row of `xs`.
inline Matrix dpp_diversity_grad(const Matrix& xs, Distance d = Distance::l2sq) {
  const Index k = xs.rows();
  Matrix g = Matrix::Zero(k, xs.cols());
  if (k < 2) return g;
  const Matrix s = detail::dpp_kernel(xs, d);
  const Matrix c = detail::cofactors(s);
  for (Index i = 0; i < k; ++i)
    for (Index j = i + 1; j < k; ++j) {
      const double dist = detail::pair_distance(xs.row(i), xs.row(j), d);
      const double ds = -1.0 / ((1.0 + dist) * (1.0 + dist));
      const double coef = (c(i, j) + c(j, i)) * ds;
      const RowVector diff = xs.row(i) - xs.row(j);
      const RowVector dd = d == Distance::l2sq ? RowVector(2.0 * diff) : RowVector(diff.array().sign().matrix());
      g.row(i) += coef * dd;
      g.row(j) -= coef * dd;
    }
  return g;
}

// ---------------------------------------------------------------------------
// Search

namespace detail {

struct ObjectiveEval {
  double total = 0.0;
  Vector proba_target;  // p(target | x'_k)
  Matrix grad_x;        // dJ / dx', K x D
};

class Search {
 public:
  Search(const Classifier& m, const VAEModel* vae, const Vector& x, int target, const GeneratorSpec& spec,
         const std::optional<Vector>& target_mean)
      : m_(m), vae_(vae), x_(x), target_(target), spec_(spec), target_mean_(target_mean) {}

  Matrix decode_states(const Matrix& s, Network::Tape* tape) const {
    if (!spec_.in_latent_space()) return s;
    return tape != nullptr ? vae_->decoder().forward(s, *tape) : decode(*vae_, s);
  }

  double p_target(double p1) const { return target_ == 1 ? p1 : 1.0 - p1; }

  ObjectiveEval evaluate(const Matrix& xp, bool with_cost_terms) const {
    const Index k = xp.rows();
    ObjectiveEval e;
    e.grad_x = Matrix::Zero(k, xp.cols());
    InputGradient yl = spec_.latent_yloss == LatentYLoss::entropy && spec_.in_latent_space()
                           ? entropy_input_grad(m_, xp)
                           : bce_input_grad(m_, xp, target_);
    e.total = yl.value.sum();
    e.grad_x += yl.grad;
    e.proba_target = yl.proba.unaryExpr([this](double p) { return p_target(p); });
    if (!with_cost_terms) return e;

    if (spec_.lambda1 > 0.0) {
      for (Index i = 0; i < k; ++i) {
        const RowVector diff = xp.row(i) - x_.transpose();
        if (spec_.distance == Distance::l2sq) {
          e.total += spec_.lambda1 * diff.squaredNorm();
          e.grad_x.row(i) += 2.0 * spec_.lambda1 * diff;
        } else {
          e.total += spec_.lambda1 * diff.lpNorm<1>();
          e.grad_x.row(i) += spec_.lambda1 * diff.array().sign().matrix();
        }
      }
    }
    const ExtCost ext = spec_.effective_ext_cost();
    if (ext == ExtCost::claproar && spec_.lambda2 > 0.0) {
      const InputGradient c = spec_.latent_yloss == LatentYLoss::bce || !spec_.in_latent_space()
                                  ? yl
                                  : bce_input_grad(m_, xp, target_);
      e.total += spec_.lambda2 * c.value.sum();
      e.grad_x += spec_.lambda2 * c.grad;
    } else if (ext == ExtCost::gravitational && spec_.lambda2 > 0.0) {
      for (Index i = 0; i < k; ++i) {
        const RowVector diff = xp.row(i) - target_mean_->transpose();
        e.total += spec_.lambda2 * diff.squaredNorm();
        e.grad_x.row(i) += 2.0 * spec_.lambda2 * diff;
      }
    }
    if (spec_.kind == GeneratorKind::dice && spec_.diversity_weight > 0.0 && k > 1) {
      e.total -= spec_.diversity_weight * dpp_diversity(xp, spec_.distance);
      e.grad_x -= spec_.diversity_weight * dpp_diversity_grad(xp, spec_.distance);
    }
    return e;
  }

 private:
  const Classifier& m_;
  const VAEModel* vae_;
  const Vector& x_;
  int target_;
  const GeneratorSpec& spec_;
  const std::optional<Vector>& target_mean_;
};

}  // namespace detail

/// Search for `spec.k` counterfactuals of `x` with respect to class `target`.
///
/// `vae` is required for latent-space search, `target_mean` for the
/// gravitational penalty. Results depend only on the inputs and `seed`.
inline CounterfactualResult generate(const Classifier& model, const VAEModel* vae, const Vector& x, int target,
                                     const GeneratorSpec& spec, const std::optional<Vector>& target_mean,
                                     std::uint64_t seed) {
  spec.validate();
  if (target != 0 && target != 1) throw InvalidArgument("target label must be 0 or 1");
  const Index d = input_dim(model);
  if (x.size() != d) throw DimensionMismatch("factual", d, x.size());
  if (spec.in_latent_space()) {
    if (vae == nullptr) throw InvalidArgument("latent-space search requires a VAE");
    if (vae->data_dim() != d) throw DimensionMismatch("VAE data dimension", d, vae->data_dim());
  }
  if (spec.latent_yloss == LatentYLoss::entropy && spec.in_latent_space() &&
      !std::holds_alternative<EnsembleModel>(model))
    throw InvalidArgument("entropy yloss requires an ensemble model");
  if (spec.effective_ext_cost() == ExtCost::gravitational && spec.kind != GeneratorKind::greedy) {
    if (!target_mean) throw InvalidArgument("gravitational penalty requires the target-class mean");
    if (target_mean->size() != d) throw DimensionMismatch("target mean", d, target_mean->size());
  }

  const int k = spec.k;
  CounterfactualResult r;
  r.factual = x;
  r.target = target;
  detail::Search search(model, vae, x, target, spec, target_mean);

  // Already on the target side: nothing to do for threshold-stopping searches.
  {
    const double p1 = predict_proba(model, x.transpose())(0);
    if (!spec.runs_to_max_iter() && search.p_target(p1) >= spec.gamma) {
      r.counterfactuals = x.transpose().replicate(k, 1);
      r.states = spec.in_latent_space() ? Matrix(encode_mean(*vae, x.transpose()).replicate(k, 1))
                                        : r.counterfactuals;
      r.path.push_back(x);
      r.objective.push_back(search.evaluate(r.counterfactuals, spec.kind != GeneratorKind::greedy).total);
      r.converged.assign(static_cast<std::size_t>(k), true);
      r.final_proba = Vector::Constant(k, search.p_target(p1));
      return r;
    }
  }

  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix state = spec.in_latent_space() ? Matrix(encode_mean(*vae, x.transpose()).replicate(k, 1))
                                        : Matrix(x.transpose().replicate(k, 1));
  for (Index i = 0; i < state.size(); ++i) state.data()[i] += spec.init_jitter * gauss(rng);

  Matrix adam_m = Matrix::Zero(state.rows(), state.cols());
  Matrix adam_v = adam_m;
  std::vector<std::vector<int>> greedy_steps(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(d), 0));
  const bool greedy = spec.kind == GeneratorKind::greedy;
  const bool stop_on_threshold = !spec.runs_to_max_iter();

  int it = 0;
  Vector proba_target;
  for (;; ++it) {
    Network::Tape tape;
    const Matrix xp = search.decode_states(state, &tape);
    detail::ObjectiveEval e = search.evaluate(xp, !greedy);
    if (!std::isfinite(e.total) || !e.grad_x.allFinite())
      throw NumericalError("non-finite counterfactual objective", it);
    r.path.push_back(xp.row(0).transpose());
    r.objective.push_back(e.total);
    proba_target = e.proba_target;
    if (stop_on_threshold && (proba_target.array() >= spec.gamma).all()) break;
    if (it >= spec.max_iter) break;

    if (greedy) {
      // dp(target)/dx, one saliency step on the most influential free feature.
      InputGradient pg = proba_input_grad(model, xp);
      if (target == 0) pg.grad = -pg.grad;
      bool moved = false;
      for (Index c = 0; c < k; ++c) {
        if (stop_on_threshold && proba_target(c) >= spec.gamma) continue;
        Index best = -1;
        double best_abs = 0.0;
        for (Index j = 0; j < d; ++j) {
          if (greedy_steps[std::size_t(c)][std::size_t(j)] >= spec.greedy_max_steps_per_feature) continue;
          const double a = std::abs(pg.grad(c, j));
          if (a > best_abs) {
            best_abs = a;
            best = j;
          }
        }
        if (best < 0) continue;
        state(c, best) += spec.greedy_delta * (pg.grad(c, best) > 0.0 ? 1.0 : -1.0);
        ++greedy_steps[std::size_t(c)][std::size_t(best)];
        moved = true;
      }
      if (!moved) break;
      continue;
    }

    Matrix g = spec.in_latent_space() ? vae->decoder().backward(tape, e.grad_x, nullptr) : e.grad_x;
    if (spec.optimizer == SearchOptimizer::adam) {
      const double t = double(it + 1);
      adam_m = 0.9 * adam_m + 0.1 * g;
      adam_v = 0.999 * adam_v + 0.001 * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(0.9, t), c2 = 1.0 - std::pow(0.999, t);
      state.array() -= spec.step_size * (adam_m.array() / c1) / ((adam_v.array() / c2).sqrt() + 1e-8);
    } else {
      state -= spec.step_size * g;
    }
  }

  r.iterations = it;
  r.states = state;
  r.counterfactuals = search.decode_states(state, nullptr);
  r.final_proba = proba_target;
  r.converged.resize(static_cast<std::size_t>(k));
  for (Index c = 0; c < k; ++c) r.converged[std::size_t(c)] = proba_target(c) >= spec.gamma;
  return r;
}

inline nlohmann::json to_json(const CounterfactualResult& r) {
  auto row = [](const auto& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json cfs = nlohmann::json::array();
  for (Index i = 0; i < r.counterfactuals.rows(); ++i) cfs.push_back(row(RowVector(r.counterfactuals.row(i))));
  nlohmann::json path = nlohmann::json::array();
  for (const auto& p : r.path) path.push_back(row(p));
  return {{"factual", row(r.factual)},   {"target", r.target},         {"counterfactuals", cfs},
          {"path", path},                {"converged", r.converged},   {"final_proba", row(r.final_proba)},
          {"iterations", r.iterations}};
}

}  // namespace recourse
