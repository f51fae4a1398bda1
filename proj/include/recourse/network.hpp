#pragma once

#include "recourse/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace recourse {

enum class Activation { identity, relu, sigmoid };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

inline std::optional<Activation> parse_activation(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  return std::nullopt;
}

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
  Activation activation = Activation::identity;
  double dropout = 0.0;  // applied to this layer's output while training

  Index in() const noexcept { return weight.cols(); }
  Index out() const noexcept { return weight.rows(); }
};

struct LayerGrad {
  Matrix weight;
  Vector bias;
};
using NetworkGrad = std::vector<LayerGrad>;

/// Shape of one dense layer, used to build networks and describe checkpoints.
struct LayerShape {
  Index out = 1;
  Activation activation = Activation::identity;
  double dropout = 0.0;
};

/// A stack of dense layers. Rows of every batch matrix are samples.
class Network {
 public:
  /// Intermediate values of one forward pass, consumed by `backward`.
  struct Tape {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
    std::vector<Matrix> mask;    // dropout mask (empty when inactive)
  };

  Network() = default;

  explicit Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw InvalidArgument("network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& L = layers_[l];
      if (L.bias.size() != L.out()) throw DimensionMismatch("layer bias", L.out(), L.bias.size());
      if (l > 0 && L.in() != layers_[l - 1].out())
        throw DimensionMismatch("layer " + std::to_string(l) + " input", layers_[l - 1].out(), L.in());
      if (!(L.dropout >= 0.0 && L.dropout < 1.0)) throw InvalidArgument("dropout rate must lie in [0,1)");
      if (!L.weight.allFinite() || !L.bias.allFinite()) throw InvalidArgument("network parameters must be finite");
    }
  }

  /// Glorot-uniform weights, zero biases.
  static Network build(Index input_dim, const std::vector<LayerShape>& shapes, std::uint64_t seed) {
    if (input_dim < 1) throw InvalidArgument("network input dimension must be positive");
    std::vector<DenseLayer> layers;
    Index in = input_dim;
    for (const auto& s : shapes) {
      layers.push_back({Matrix::Zero(s.out, in), Vector::Zero(s.out), s.activation, s.dropout});
      in = s.out;
    }
    Network net(std::move(layers));
    net.reinitialize(seed);
    return net;
  }

  void reinitialize(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& L : layers_) {
      const double limit = std::sqrt(6.0 / double(L.in() + L.out()));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Index r = 0; r < L.weight.rows(); ++r)
        for (Index c = 0; c < L.weight.cols(); ++c) L.weight(r, c) = u(rng);
      L.bias.setZero();
    }
  }

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  Index input_dim() const { return layers_.front().in(); }
  Index output_dim() const { return layers_.back().out(); }

  std::vector<LayerShape> shapes() const {
    std::vector<LayerShape> out;
    for (const auto& L : layers_) out.push_back({L.out(), L.activation, L.dropout});
    return out;
  }

  Index param_count() const {
    Index n = 0;
    for (const auto& L : layers_) n += L.weight.size() + L.bias.size();
    return n;
  }

  Matrix forward(const Matrix& x) const {
    check_input(x);
    Matrix h = x;
    for (const auto& L : layers_) {
      Matrix pre = (h * L.weight.transpose()).rowwise() + L.bias.transpose();
      h = activate(pre, L.activation);
    }
    return h;
  }

  /// Forward pass that records a tape. Dropout is active iff `dropout_rng`.
  Matrix forward(const Matrix& x, Tape& tape, Rng* dropout_rng = nullptr) const {
    check_input(x);
    tape.inputs.clear();
    tape.pre.clear();
    tape.mask.clear();
    Matrix h = x;
    for (const auto& L : layers_) {
      tape.inputs.push_back(h);
      tape.pre.push_back((h * L.weight.transpose()).rowwise() + L.bias.transpose());
      h = activate(tape.pre.back(), L.activation);
      if (dropout_rng != nullptr && L.dropout > 0.0) {
        std::bernoulli_distribution keep(1.0 - L.dropout);
        Matrix m(h.rows(), h.cols());
        const double scale = 1.0 / (1.0 - L.dropout);
        for (Index i = 0; i < m.size(); ++i) m.data()[i] = keep(*dropout_rng) ? scale : 0.0;
        h = h.cwiseProduct(m);
        tape.mask.push_back(std::move(m));
      } else {
        tape.mask.emplace_back();
      }
    }
    return h;
  }

  /// Back-propagate `grad_out` (dL/d output, same shape as the output).
  /// Accumulates parameter gradients into `grads` when non-null and returns
  /// dL/d input.
  Matrix backward(const Tape& tape, const Matrix& grad_out, NetworkGrad* grads) const {
    if (grads != nullptr && grads->size() != layers_.size()) *grads = zero_grad();
    Matrix g = grad_out;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& L = layers_[l];
      if (tape.mask[l].size() > 0) g = g.cwiseProduct(tape.mask[l]);
      Matrix dpre = activation_grad(tape.pre[l], L.activation, g);
      if (grads != nullptr) {
        (*grads)[l].weight.noalias() += dpre.transpose() * tape.inputs[l];
        (*grads)[l].bias.noalias() += dpre.colwise().sum().transpose();
      }
      g = dpre * L.weight;
    }
    return g;
  }

  NetworkGrad zero_grad() const {
    NetworkGrad g;
    for (const auto& L : layers_) g.push_back({Matrix::Zero(L.out(), L.in()), Vector::Zero(L.out())});
    return g;
  }

  /// Layer-major; within a layer the row-major weights come before the biases.
  Vector flatten() const {
    Vector v(param_count());
    Index k = 0;
    for (const auto& L : layers_) {
      for (Index r = 0; r < L.weight.rows(); ++r)
        for (Index c = 0; c < L.weight.cols(); ++c) v(k++) = L.weight(r, c);
      for (Index r = 0; r < L.bias.size(); ++r) v(k++) = L.bias(r);
    }
    return v;
  }

  void unflatten(const Vector& v) {
    if (v.size() != param_count()) throw DimensionMismatch("parameter vector", param_count(), v.size());
    if (!v.allFinite()) throw InvalidArgument("network parameters must be finite");
    Index k = 0;
    for (auto& L : layers_) {
      for (Index r = 0; r < L.weight.rows(); ++r)
        for (Index c = 0; c < L.weight.cols(); ++c) L.weight(r, c) = v(k++);
      for (Index r = 0; r < L.bias.size(); ++r) L.bias(r) = v(k++);
    }
  }

  static Vector flatten_grad(const NetworkGrad& g) {
    Index n = 0;
    for (const auto& L : g) n += L.weight.size() + L.bias.size();
    Vector v(n);
    Index k = 0;
    for (const auto& L : g) {
      for (Index r = 0; r < L.weight.rows(); ++r)
        for (Index c = 0; c < L.weight.cols(); ++c) v(k++) = L.weight(r, c);
      for (Index r = 0; r < L.bias.size(); ++r) v(k++) = L.bias(r);
    }
    return v;
  }

 private:
  void check_input(const Matrix& x) const {
    if (layers_.empty()) throw InvalidArgument("network has no layers");
    if (x.cols() != input_dim()) throw DimensionMismatch("network input", input_dim(), x.cols());
  }

  static Matrix activate(const Matrix& pre, Activation a) {
    switch (a) {
      case Activation::identity: return pre;
      case Activation::relu: return pre.cwiseMax(0.0);
      case Activation::sigmoid: return pre.unaryExpr([](double z) { return sigmoid(z); });
    }
    return pre;
  }

  static Matrix activation_grad(const Matrix& pre, Activation a, const Matrix& g) {
    switch (a) {
      case Activation::identity: return g;
      case Activation::relu: return (pre.array() > 0.0).select(g, 0.0);
      case Activation::sigmoid: {
        Matrix s = pre.unaryExpr([](double z) { return sigmoid(z); });
        return g.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
      }
    }
    return g;
  }

  std::vector<DenseLayer> layers_;
};

/// Equally weighted deep ensemble of binary classifiers.
class EnsembleModel {
 public:
  EnsembleModel() = default;
  explicit EnsembleModel(std::vector<Network> members) : members_(std::move(members)) {
    if (members_.empty()) throw InvalidArgument("ensemble needs at least one member");
    for (const auto& m : members_) {
      if (m.input_dim() != members_.front().input_dim())
        throw DimensionMismatch("ensemble member input", members_.front().input_dim(), m.input_dim());
      if (m.output_dim() != 1) throw DimensionMismatch("ensemble member output", 1, m.output_dim());
    }
  }
  const std::vector<Network>& members() const noexcept { return members_; }
  std::vector<Network>& members() noexcept { return members_; }
  Index input_dim() const { return members_.front().input_dim(); }

 private:
  std::vector<Network> members_;
};

/// Any of the classifier families used in experiments.
using Classifier = std::variant<Network, EnsembleModel>;

// ---------------------------------------------------------------------------
// Architectures

enum class ModelKind { logistic, mlp, ensemble };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::logistic: return "logistic";
    case ModelKind::mlp: return "mlp";
    case ModelKind::ensemble: return "ensemble";
  }
  return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  if (s == "logistic" || s == "logistic_regression") return ModelKind::logistic;
  if (s == "mlp") return ModelKind::mlp;
  if (s == "ensemble" || s == "deep_ensemble") return ModelKind::ensemble;
  return std::nullopt;
}

struct Architecture {
  ModelKind kind = ModelKind::mlp;
  Index hidden_dim = 32;
  Index hidden_layers = 1;
  double dropout = 0.0;
  Index members = 5;

  /// Small-network settings for 2-D synthetic problems.
  static Architecture synthetic(ModelKind k) { return {k, 32, 1, 0.0, 5}; }
  /// Wider, regularized settings for tabular data.
  static Architecture real_world(ModelKind k) { return {k, 64, 2, 0.1, 5}; }

  std::vector<LayerShape> layer_shapes() const {
    std::vector<LayerShape> s;
    if (kind != ModelKind::logistic)
      for (Index l = 0; l < hidden_layers; ++l) s.push_back({hidden_dim, Activation::relu, dropout});
    s.push_back({1, Activation::identity, 0.0});
    return s;
  }
};

inline Classifier build_classifier(const Architecture& arch, Index input_dim, std::uint64_t seed) {
  if (arch.kind == ModelKind::ensemble) {
    if (arch.members < 1) throw InvalidArgument("ensemble needs at least one member");
    std::vector<Network> members;
    for (Index k = 0; k < arch.members; ++k)
      members.push_back(Network::build(input_dim, arch.layer_shapes(), derive_seed(seed, 0xE1, std::uint64_t(k))));
    return EnsembleModel(std::move(members));
  }
  return Network::build(input_dim, arch.layer_shapes(), seed);
}

// ---------------------------------------------------------------------------
// Inference

namespace detail {

inline void require_binary_head(const Network& n) {
  if (n.output_dim() != 1) throw DimensionMismatch("classifier output", 1, n.output_dim());
}

template <class F>
void for_each_member(const Classifier& m, F&& f) {
  if (const auto* net = std::get_if<Network>(&m)) {
    f(*net, std::size_t{0}, std::size_t{1});
  } else {
    const auto& mem = std::get<EnsembleModel>(m).members();
    for (std::size_t k = 0; k < mem.size(); ++k) f(mem[k], k, mem.size());
  }
}

}  // namespace detail

inline Index input_dim(const Classifier& m) {
  return std::visit([](const auto& x) { return x.input_dim(); }, m);
}

inline Vector logits(const Network& m, const Matrix& x) {
  detail::require_binary_head(m);
  return m.forward(x).col(0);
}

inline Vector predict_proba(const Network& m, const Matrix& x) {
  return logits(m, x).unaryExpr([](double z) { return sigmoid(z); });
}

inline Vector predict_proba(const EnsembleModel& m, const Matrix& x) {
  Vector p = Vector::Zero(x.rows());
  for (const auto& net : m.members()) p += predict_proba(net, x);
  return p / double(m.members().size());
}

/// For an ensemble, the logit of the mean member probability.
inline Vector logits(const EnsembleModel& m, const Matrix& x) {
  return predict_proba(m, x).unaryExpr([](double p) { return logit_of(p); });
}

inline Vector logits(const Classifier& m, const Matrix& x) {
  return std::visit([&](const auto& v) { return logits(v, x); }, m);
}

inline Vector predict_proba(const Classifier& m, const Matrix& x) {
  return std::visit([&](const auto& v) { return predict_proba(v, x); }, m);
}

inline double predictive_entropy(const EnsembleModel& m, const Vector& x) {
  return binary_entropy(predict_proba(m, x.transpose())(0));
}

// ---------------------------------------------------------------------------
// Input gradients

enum class InputLoss { bce_to_target, predictive_entropy };

/// Per-row loss values and their gradients with respect to each input row.
struct InputGradient {
  Vector value;
  Vector proba;
  Matrix grad;  // N x D
};

namespace detail {

struct MemberPass {
  Vector logit;  // N
  Matrix dlogit; // N x D, d logit / d x per row
};

inline MemberPass member_pass(const Network& net, const Matrix& x) {
  require_binary_head(net);
  Network::Tape tape;
  Matrix out = net.forward(x, tape);
  Matrix dx = net.backward(tape, Matrix::Ones(x.rows(), 1), nullptr);
  return {out.col(0), std::move(dx)};
}

inline std::vector<MemberPass> member_passes(const Classifier& m, const Matrix& x) {
  std::vector<MemberPass> out;
  for_each_member(m, [&](const Network& net, std::size_t, std::size_t) { out.push_back(member_pass(net, x)); });
  return out;
}

}  // namespace detail

/// p(y=1|x) of every row and its gradient.
inline InputGradient proba_input_grad(const Classifier& m, const Matrix& x) {
  const auto passes = detail::member_passes(m, x);
  const double M = double(passes.size());
  InputGradient r{Vector::Zero(x.rows()), Vector::Zero(x.rows()), Matrix::Zero(x.rows(), x.cols())};
  for (const auto& p : passes) {
    for (Index i = 0; i < x.rows(); ++i) {
      const double s = sigmoid(p.logit(i));
      r.proba(i) += s / M;
      r.grad.row(i) += (s * (1.0 - s) / M) * p.dlogit.row(i);
    }
  }
  r.value = r.proba;
  return r;
}

/// Cross-entropy of the (mean) predicted probability against `target`,
/// evaluated in log space so that confident wrong predictions keep a usable
/// gradient.
inline InputGradient bce_input_grad(const Classifier& m, const Matrix& x, int target) {
  if (target != 0 && target != 1) throw InvalidArgument("target label must be 0 or 1");
  const auto passes = detail::member_passes(m, x);
  const double M = double(passes.size());
  const double sign = target == 1 ? 1.0 : -1.0;
  InputGradient r{Vector::Zero(x.rows()), Vector::Zero(x.rows()), Matrix::Zero(x.rows(), x.cols())};
  for (Index i = 0; i < x.rows(); ++i) {
    // log p(target) = logsumexp_m(log sigmoid(sign * z_m)) - log M
    std::vector<double> lp(passes.size());
    double mx = -std::numeric_limits<double>::infinity();
    double pbar = 0.0;
    for (std::size_t k = 0; k < passes.size(); ++k) {
      lp[k] = -softplus(-sign * passes[k].logit(i));
      mx = std::max(mx, lp[k]);
      pbar += sigmoid(passes[k].logit(i)) / M;
    }
    double se = 0.0;
    for (double v : lp) se += std::exp(v - mx);
    r.value(i) = -(mx + std::log(se) - std::log(M));
    r.proba(i) = pbar;
    for (std::size_t k = 0; k < passes.size(); ++k) {
      const double w = std::exp(lp[k] - mx) / se;
      const double q = sigmoid(-sign * passes[k].logit(i));  // 1 - p_k(target)
      r.grad.row(i) -= (w * q * sign) * passes[k].dlogit.row(i);
    }
  }
  return r;
}

/// Binary entropy (nats) of the mean predicted probability, clamped.
inline InputGradient entropy_input_grad(const Classifier& m, const Matrix& x) {
  InputGradient r = proba_input_grad(m, x);
  for (Index i = 0; i < x.rows(); ++i) {
    const double p = r.proba(i);
    r.value(i) = binary_entropy(p);
    const bool clamped = p <= kProbClamp || p >= 1.0 - kProbClamp;
    const double dh = clamped ? 0.0 : std::log1p(-p) - std::log(p);
    r.grad.row(i) *= dh;
  }
  return r;
}

/// Gradient of the chosen scalar loss at a single input.
inline Vector grad_input(const Classifier& m, const Vector& x, InputLoss loss, int target = 1) {
  if (x.size() != input_dim(m)) throw DimensionMismatch("grad_input", input_dim(m), x.size());
  const Matrix row = x.transpose();
  switch (loss) {
    case InputLoss::bce_to_target: return bce_input_grad(m, row, target).grad.row(0).transpose();
    case InputLoss::predictive_entropy: return entropy_input_grad(m, row).grad.row(0).transpose();
  }
  throw InvalidArgument("unknown input loss");
}

// ---------------------------------------------------------------------------
// Parameter gradients and training

/// Mean BCE of the network on (x, y), evaluated on logits.
inline double mean_bce(const Network& net, const Matrix& x, const Vector& y) {
  const Vector z = logits(net, x);
  double s = 0.0;
  for (Index i = 0; i < z.size(); ++i) s += softplus(z(i)) - y(i) * z(i);
  return s / double(z.size());
}

inline double mean_bce(const Classifier& m, const Matrix& x, const Vector& y) {
  const Vector p = predict_proba(m, x);
  double s = 0.0;
  for (Index i = 0; i < p.size(); ++i) s += bce_prob(p(i), y(i));
  return s / double(p.size());
}

namespace detail {

inline double loss_and_grad(const Network& net, const Matrix& x, const Vector& y, NetworkGrad& g,
                            Rng* dropout_rng) {
  Network::Tape tape;
  const Vector z = net.forward(x, tape, dropout_rng).col(0);
  const double n = double(x.rows());
  Matrix dz(x.rows(), 1);
  double loss = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    loss += softplus(z(i)) - y(i) * z(i);
    dz(i, 0) = (sigmoid(z(i)) - y(i)) / n;
  }
  g = net.zero_grad();
  net.backward(tape, dz, &g);
  return loss / n;
}

}  // namespace detail

/// Gradient of mean BCE with respect to the flattened parameters. For an
/// ensemble this is the concatenation of every member's own gradient.
inline Vector grad_params(const Network& net, const Matrix& x, const Vector& y) {
  if (x.rows() == 0) throw InvalidArgument("grad_params needs a nonempty batch");
  if (y.size() != x.rows()) throw DimensionMismatch("grad_params labels", x.rows(), y.size());
  NetworkGrad g;
  detail::loss_and_grad(net, x, y, g, nullptr);
  return Network::flatten_grad(g);
}

inline Vector flatten_params(const Network& n) { return n.flatten(); }

inline Vector flatten_params(const EnsembleModel& m) {
  Index total = 0;
  for (const auto& n : m.members()) total += n.param_count();
  Vector v(total);
  Index k = 0;
  for (const auto& n : m.members()) {
    v.segment(k, n.param_count()) = n.flatten();
    k += n.param_count();
  }
  return v;
}

inline Vector flatten_params(const Classifier& m) {
  return std::visit([](const auto& v) { return flatten_params(v); }, m);
}

inline Index param_count(const Classifier& m) { return flatten_params(m).size(); }

inline void unflatten_params(Network& n, const Vector& v) { n.unflatten(v); }

inline void unflatten_params(EnsembleModel& m, const Vector& v) {
  Index total = 0;
  for (const auto& n : m.members()) total += n.param_count();
  if (v.size() != total) throw DimensionMismatch("ensemble parameter vector", total, v.size());
  Index k = 0;
  for (auto& n : m.members()) {
    n.unflatten(v.segment(k, n.param_count()));
    k += n.param_count();
  }
}

inline void unflatten_params(Classifier& m, const Vector& v) {
  std::visit([&](auto& x) { unflatten_params(x, v); }, m);
}

inline Vector grad_params(const EnsembleModel& m, const Matrix& x, const Vector& y) {
  std::vector<Vector> parts;
  Index total = 0;
  for (const auto& n : m.members()) {
    parts.push_back(grad_params(n, x, y));
    total += parts.back().size();
  }
  Vector v(total);
  Index k = 0;
  for (const auto& p : parts) {
    v.segment(k, p.size()) = p;
    k += p.size();
  }
  return v;
}

inline Vector grad_params(const Classifier& m, const Matrix& x, const Vector& y) {
  return std::visit([&](const auto& v) { return grad_params(v, x, y); }, m);
}

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  int epochs = 100;
  /// 0 means full batch.
  Index batch_size = 0;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 0) throw InvalidArgument("epochs must be nonnegative");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw InvalidArgument("learning_rate must be a finite nonnegative number");
    if (batch_size < 0) throw InvalidArgument("batch_size must be nonnegative");
  }
};

/// Adam (beta1 0.9, beta2 0.999, eps 1e-8) or plain gradient descent over a
/// network's layers. Moment estimates live as long as the optimizer.
class Optimizer {
 public:
  Optimizer(const Network& net, OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {
    if (kind_ == OptimizerKind::adam) {
      m_ = net.zero_grad();
      v_ = net.zero_grad();
    }
  }

  void step(Network& net, const NetworkGrad& g) {
    auto& layers = net.layers();
    if (kind_ == OptimizerKind::sgd) {
      for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weight -= lr_ * g[l].weight;
        layers[l].bias -= lr_ * g[l].bias;
      }
      return;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(kB1, double(t_));
    const double c2 = 1.0 - std::pow(kB2, double(t_));
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weight, m_[l].weight, v_[l].weight, g[l].weight, c1, c2);
      update(layers[l].bias, m_[l].bias, v_[l].bias, g[l].bias, c1, c2);
    }
  }

 private:
  static constexpr double kB1 = 0.9;
  static constexpr double kB2 = 0.999;
  static constexpr double kEps = 1e-8;

  template <class P, class G>
  void update(P& param, P& m, P& v, const G& g, double c1, double c2) {
    m = kB1 * m + (1.0 - kB1) * g;
    v = kB2 * v + (1.0 - kB2) * g.cwiseProduct(g);
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
  }

  OptimizerKind kind_;
  double lr_;
  long t_ = 0;
  NetworkGrad m_, v_;
};

namespace detail {

inline void require_both_classes(const Vector& y) {
  bool has0 = false, has1 = false;
  for (Index i = 0; i < y.size(); ++i) {
    if (y(i) == 0.0) has0 = true;
    else if (y(i) == 1.0) has1 = true;
    else throw InvalidArgument("training labels must be 0 or 1");
  }
  if (!has0 || !has1) throw InvalidArgument("training data must contain both classes");
}

}  // namespace detail

/// Minimize mean BCE. Returns the full-data loss after every epoch.
inline std::vector<double> train(Network& net, const Matrix& x, const Vector& y, const TrainConfig& cfg,
                                 bool warm_start = true) {
  cfg.validate();
  detail::require_binary_head(net);
  if (x.rows() != y.size()) throw DimensionMismatch("training labels", x.rows(), y.size());
  detail::require_both_classes(y);
  if (!warm_start) net.reinitialize(cfg.seed);
  Rng rng(derive_seed(cfg.seed, 0x7A));
  Optimizer opt(net, cfg.optimizer, cfg.learning_rate);
  const Index n = x.rows();
  const Index bs = cfg.batch_size <= 0 || cfg.batch_size > n ? n : cfg.batch_size;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<double> trace;
  NetworkGrad g;
  Matrix xb;
  Vector yb;
  for (int e = 0; e < cfg.epochs; ++e) {
    if (bs < n) std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start < n; start += bs) {
      const Index len = std::min(bs, n - start);
      if (bs == n) {
        detail::loss_and_grad(net, x, y, g, &rng);
      } else {
        xb.resize(len, x.cols());
        yb.resize(len);
        for (Index i = 0; i < len; ++i) {
          const Index r = order[static_cast<std::size_t>(start + i)];
          xb.row(i) = x.row(r);
          yb(i) = y(r);
        }
        detail::loss_and_grad(net, xb, yb, g, &rng);
      }
      if (cfg.learning_rate > 0.0) opt.step(net, g);
    }
    const double loss = mean_bce(net, x, y);
    if (!std::isfinite(loss)) throw NumericalError("non-finite training loss", e);
    trace.push_back(loss);
  }
  return trace;
}

/// Members are trained independently, each with its own shuffle stream.
/// Returns the ensemble's loss after every epoch.
inline std::vector<double> train(EnsembleModel& m, const Matrix& x, const Vector& y, const TrainConfig& cfg,
                                 bool warm_start = true) {
  cfg.validate();
  std::vector<std::vector<double>> traces;
  for (std::size_t k = 0; k < m.members().size(); ++k) {
    TrainConfig c = cfg;
    c.seed = derive_seed(cfg.seed, 0xE1, k);
    traces.push_back(train(m.members()[k], x, y, c, warm_start));
  }
  std::vector<double> trace(static_cast<std::size_t>(cfg.epochs), 0.0);
  for (const auto& t : traces)
    for (std::size_t e = 0; e < t.size(); ++e) trace[e] += t[e] / double(traces.size());
  return trace;
}

inline std::vector<double> train(Classifier& m, const Matrix& x, const Vector& y, const TrainConfig& cfg,
                                 bool warm_start = true) {
  return std::visit([&](auto& v) { return train(v, x, y, cfg, warm_start); }, m);
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json architecture_json(const Network& n) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& L : n.layers())
    layers.push_back({{"in", L.in()}, {"out", L.out()}, {"activation", to_string(L.activation)},
                      {"dropout", L.dropout}});
  return {{"input_dim", n.input_dim()}, {"layers", layers}};
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline nlohmann::json to_json(const Network& n) {
  return {{"version", kCheckpointVersion}, {"type", "network"}, {"architecture", architecture_json(n)},
          {"params", to_std(n.flatten())}};
}

inline nlohmann::json to_json(const EnsembleModel& m) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& n : m.members()) members.push_back(architecture_json(n));
  return {{"version", kCheckpointVersion}, {"type", "ensemble"}, {"members", members},
          {"params", to_std(flatten_params(m))}};
}

inline nlohmann::json to_json(const Classifier& m) {
  return std::visit([](const auto& v) { return to_json(v); }, m);
}

namespace detail {

inline Network network_from_architecture(const nlohmann::json& a) {
  std::vector<LayerShape> shapes;
  for (const auto& l : a.at("layers")) {
    auto act = parse_activation(l.at("activation").get<std::string>());
    if (!act) throw InvalidArgument("checkpoint: unknown activation");
    shapes.push_back({l.at("out").get<Index>(), *act, l.value("dropout", 0.0)});
  }
  return Network::build(a.at("input_dim").get<Index>(), shapes, 0);
}

inline Vector params_from_json(const nlohmann::json& j) {
  const auto p = j.at("params").get<std::vector<double>>();
  return Eigen::Map<const Vector>(p.data(), static_cast<Index>(p.size()));
}

inline void check_version(const nlohmann::json& j) {
  if (j.value("version", -1) != kCheckpointVersion)
    throw InvalidArgument("checkpoint: unsupported version");
}

}  // namespace detail

inline Classifier classifier_from_json(const nlohmann::json& j) {
  detail::check_version(j);
  const auto type = j.at("type").get<std::string>();
  if (type == "network") {
    Network n = detail::network_from_architecture(j.at("architecture"));
    n.unflatten(detail::params_from_json(j));
    return n;
  }
  if (type == "ensemble") {
    std::vector<Network> members;
    for (const auto& a : j.at("members")) members.push_back(detail::network_from_architecture(a));
    EnsembleModel m(std::move(members));
    unflatten_params(m, detail::params_from_json(j));
    return m;
  }
  throw InvalidArgument("checkpoint: unknown model type '" + type + "'");
}

}  // namespace recourse
