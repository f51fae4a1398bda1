#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace recourse {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public InvalidArgument {
 public:
  DimensionMismatch(const std::string& what, Index expected, Index got)
      : InvalidArgument(what + ": expected dimension " + std::to_string(expected) +
                        ", got " + std::to_string(got)) {}
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a loss or objective becomes NaN/inf. `step` is the epoch or
// iteration at which it happened.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, long step)
      : std::runtime_error(what + " (at step " + std::to_string(step) + ")"), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

inline constexpr double kProbClamp = 1e-7;

/// SplitMix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Child seed for the stream identified by (parent, tag, index).
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag,
                                 std::uint64_t index = 0) noexcept {
  return mix_seed(mix_seed(parent ^ mix_seed(tag)) + index);
}

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) noexcept {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double clamp_prob(double p) noexcept {
  return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
}

inline double logit_of(double p) noexcept {
  p = clamp_prob(p);
  return std::log(p) - std::log1p(-p);
}

/// Binary cross-entropy of probability `p` against label `y`, clamped.
inline double bce_prob(double p, double y) noexcept {
  const double q = clamp_prob(p);
  return -(y * std::log(q) + (1.0 - y) * std::log1p(-q));
}

/// Binary entropy in nats, clamped.
inline double binary_entropy(double p) noexcept {
  const double q = clamp_prob(p);
  return -(q * std::log(q) + (1.0 - q) * std::log1p(-q));
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline Matrix select_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

inline Vector select(const Vector& v, const std::vector<Index>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
  return out;
}

/// Shortest round-trip decimal representation; stable across runs.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace recourse
