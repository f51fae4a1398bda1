#pragma once

#include "recourse/network.hpp"

namespace recourse {

struct VaeArchitecture {
  Index latent_dim = 2;
  Index hidden_dim = 32;
  Index hidden_layers = 1;

  static VaeArchitecture synthetic() { return {2, 32, 1}; }
  static VaeArchitecture real_world() { return {8, 32, 1}; }
};

/// Gaussian-decoder variational autoencoder. The encoder's output is
/// [mu, logvar], each `latent_dim` wide.
class VAEModel {
 public:
  VAEModel() = default;

  VAEModel(Network encoder, Network decoder) : encoder_(std::move(encoder)), decoder_(std::move(decoder)) {
    if (encoder_.output_dim() % 2 != 0) throw InvalidArgument("VAE encoder output width must be even");
    latent_ = encoder_.output_dim() / 2;
    if (decoder_.input_dim() != latent_) throw DimensionMismatch("VAE decoder input", latent_, decoder_.input_dim());
    if (decoder_.output_dim() != encoder_.input_dim())
      throw DimensionMismatch("VAE decoder output", encoder_.input_dim(), decoder_.output_dim());
  }

  static VAEModel build(Index data_dim, const VaeArchitecture& a, std::uint64_t seed) {
    if (a.latent_dim < 1) throw InvalidArgument("latent_dim must be positive");
    std::vector<LayerShape> enc, dec;
    for (Index l = 0; l < a.hidden_layers; ++l) {
      enc.push_back({a.hidden_dim, Activation::relu, 0.0});
      dec.push_back({a.hidden_dim, Activation::relu, 0.0});
    }
    enc.push_back({2 * a.latent_dim, Activation::identity, 0.0});
    dec.push_back({data_dim, Activation::identity, 0.0});
    return VAEModel(Network::build(data_dim, enc, derive_seed(seed, 0xEC)),
                    Network::build(a.latent_dim, dec, derive_seed(seed, 0xDC)));
  }

  Index latent_dim() const noexcept { return latent_; }
  Index data_dim() const { return encoder_.input_dim(); }
  const Network& encoder() const noexcept { return encoder_; }
  const Network& decoder() const noexcept { return decoder_; }
  Network& encoder() noexcept { return encoder_; }
  Network& decoder() noexcept { return decoder_; }

  Index param_count() const { return encoder_.param_count() + decoder_.param_count(); }

  Vector flatten() const {
    Vector v(param_count());
    v << encoder_.flatten(), decoder_.flatten();
    return v;
  }

  void unflatten(const Vector& v) {
    if (v.size() != param_count()) throw DimensionMismatch("VAE parameter vector", param_count(), v.size());
    encoder_.unflatten(v.head(encoder_.param_count()));
    decoder_.unflatten(v.tail(decoder_.param_count()));
  }

 private:
  Network encoder_;
  Network decoder_;
  Index latent_ = 0;
};

struct LatentParams {
  Vector mu;
  Vector logvar;
};

inline LatentParams encode(const VAEModel& v, const Vector& x) {
  if (x.size() != v.data_dim()) throw DimensionMismatch("VAE encode", v.data_dim(), x.size());
  const RowVector out = v.encoder().forward(x.transpose()).row(0);
  return {out.head(v.latent_dim()).transpose(), out.tail(v.latent_dim()).transpose()};
}

/// Encoder means for every row.
inline Matrix encode_mean(const VAEModel& v, const Matrix& x) {
  return v.encoder().forward(x).leftCols(v.latent_dim());
}

inline Vector decode(const VAEModel& v, const Vector& s) {
  if (s.size() != v.latent_dim()) throw DimensionMismatch("VAE decode", v.latent_dim(), s.size());
  return v.decoder().forward(s.transpose()).row(0).transpose();
}

inline Matrix decode(const VAEModel& v, const Matrix& s) {
  if (s.cols() != v.latent_dim()) throw DimensionMismatch("VAE decode", v.latent_dim(), s.cols());
  return v.decoder().forward(s);
}

/// KL(N(mu, exp(logvar)) || N(0, I)).
inline double kl(const Vector& mu, const Vector& logvar) {
  if (mu.size() != logvar.size()) throw DimensionMismatch("kl", mu.size(), logvar.size());
  double s = 0.0;
  for (Index i = 0; i < mu.size(); ++i)
    s += -0.5 * (1.0 + logvar(i) - mu(i) * mu(i) - std::exp(logvar(i)));
  return s;
}

/// Mean squared reconstruction error of decode(encode-mean(x)).
inline double reconstruction_mse(const VAEModel& v, const Matrix& x) {
  const Matrix r = decode(v, encode_mean(v, x));
  return (r - x).squaredNorm() / double(x.size());
}

struct ElboEvaluation {
  double loss = 0.0;            // mean negative ELBO
  double reconstruction = 0.0;  // mean 0.5 * ||x - x_hat||^2
  double kl = 0.0;              // mean KL
};

/// Negative ELBO averaged over rows, with the reparameterization noise `eps`
/// (N x latent) given explicitly. Optionally accumulates parameter gradients.
inline ElboEvaluation elbo(const VAEModel& v, const Matrix& x, const Matrix& eps, NetworkGrad* enc_grad,
                           NetworkGrad* dec_grad) {
  const Index n = x.rows();
  const Index L = v.latent_dim();
  if (eps.rows() != n || eps.cols() != L) throw DimensionMismatch("VAE noise", n * L, eps.size());
  Network::Tape enc_tape, dec_tape;
  const Matrix enc = v.encoder().forward(x, enc_tape);
  const Matrix mu = enc.leftCols(L);
  const Matrix logvar = enc.rightCols(L);
  const Matrix sd = (0.5 * logvar.array()).exp().matrix();
  const Matrix z = mu + sd.cwiseProduct(eps);
  const Matrix xhat = v.decoder().forward(z, dec_tape);

  ElboEvaluation e;
  e.reconstruction = 0.5 * (xhat - x).squaredNorm() / double(n);
  e.kl = (-0.5 * (1.0 + logvar.array() - mu.array().square() - logvar.array().exp())).sum() / double(n);
  e.loss = e.reconstruction + e.kl;
  if (enc_grad == nullptr && dec_grad == nullptr) return e;

  const Matrix dxhat = (xhat - x) / double(n);
  NetworkGrad dg;
  const Matrix dz = v.decoder().backward(dec_tape, dxhat, dec_grad != nullptr ? dec_grad : &dg);
  Matrix denc(n, 2 * L);
  denc.leftCols(L) = dz + mu / double(n);
  denc.rightCols(L) = (dz.cwiseProduct(eps).cwiseProduct(sd) * 0.5).array() +
                      (0.5 * (logvar.array().exp() - 1.0)) / double(n);
  NetworkGrad eg;
  v.encoder().backward(enc_tape, denc, enc_grad != nullptr ? enc_grad : &eg);
  return e;
}

struct VaeTrainConfig {
  int epochs = 100;
  Index batch_size = 0;  // 0 = full batch
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;
};

/// Returns the mean negative ELBO of every epoch (averaged over its batches).
inline std::vector<double> train_vae(VAEModel& v, const Matrix& x, const VaeTrainConfig& cfg) {
  if (x.rows() == 0) throw InvalidArgument("VAE training data must be nonempty");
  if (x.cols() != v.data_dim()) throw DimensionMismatch("VAE training data", v.data_dim(), x.cols());
  if (cfg.epochs < 0) throw InvalidArgument("epochs must be nonnegative");
  if (!(cfg.learning_rate >= 0.0)) throw InvalidArgument("learning_rate must be nonnegative");
  Rng rng(derive_seed(cfg.seed, 0xAE));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Optimizer enc_opt(v.encoder(), cfg.optimizer, cfg.learning_rate);
  Optimizer dec_opt(v.decoder(), cfg.optimizer, cfg.learning_rate);
  const Index n = x.rows();
  const Index bs = cfg.batch_size <= 0 || cfg.batch_size > n ? n : cfg.batch_size;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<double> trace;
  Matrix xb, eps;
  for (int e = 0; e < cfg.epochs; ++e) {
    if (bs < n) std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (Index start = 0; start < n; start += bs) {
      const Index len = std::min(bs, n - start);
      xb.resize(len, x.cols());
      for (Index i = 0; i < len; ++i) xb.row(i) = x.row(order[static_cast<std::size_t>(start + i)]);
      eps.resize(len, v.latent_dim());
      for (Index i = 0; i < eps.size(); ++i) eps.data()[i] = gauss(rng);
      NetworkGrad eg = v.encoder().zero_grad(), dg = v.decoder().zero_grad();
      const auto ev = elbo(v, xb, eps, &eg, &dg);
      if (!std::isfinite(ev.loss)) throw NumericalError("non-finite VAE loss", e);
      total += ev.loss * double(len);
      if (cfg.learning_rate > 0.0) {
        enc_opt.step(v.encoder(), eg);
        dec_opt.step(v.decoder(), dg);
      }
    }
    trace.push_back(total / double(n));
  }
  return trace;
}

inline nlohmann::json to_json(const VAEModel& v) {
  return {{"version", kCheckpointVersion},
          {"type", "vae"},
          {"latent_dim", v.latent_dim()},
          {"encoder", architecture_json(v.encoder())},
          {"decoder", architecture_json(v.decoder())},
          {"params", to_std(v.flatten())}};
}

inline VAEModel vae_from_json(const nlohmann::json& j) {
  detail::check_version(j);
  if (j.at("type").get<std::string>() != "vae") throw InvalidArgument("checkpoint: not a VAE");
  VAEModel v(detail::network_from_architecture(j.at("encoder")), detail::network_from_architecture(j.at("decoder")));
  if (v.latent_dim() != j.at("latent_dim").get<Index>()) throw InvalidArgument("checkpoint: latent_dim mismatch");
  v.unflatten(detail::params_from_json(j));
  return v;
}

}  // namespace recourse
