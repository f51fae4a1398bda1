#pragma once

#include "recourse/network.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

namespace recourse {

/// Gaussian kernel k(x,y) = exp(-||x-y||^2 / (2 l^2)).
struct KernelSpec {
  double length_scale = 0.5;

  void validate() const {
    if (!(length_scale > 0.0) || !std::isfinite(length_scale))
      throw InvalidArgument("kernel length_scale must be positive");
  }
  double operator()(const RowVector& a, const RowVector& b) const {
    return std::exp(-(a - b).squaredNorm() / (2.0 * length_scale * length_scale));
  }
};

namespace detail {

inline Matrix kernel_matrix(const Matrix& a, const Matrix& b, const KernelSpec& k) {
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = b.rowwise().squaredNorm();
  Matrix d2 = (-2.0 * (a * b.transpose())).colwise() + na;
  d2.rowwise() += nb.transpose();
  const double c = -1.0 / (2.0 * k.length_scale * k.length_scale);
  return (d2.array().max(0.0) * c).exp().matrix();
}

inline void check_samples(const Matrix& x, const Matrix& y) {
  if (x.rows() < 2 || y.rows() < 2) throw InvalidArgument("MMD needs at least two samples on each side");
  if (x.cols() != y.cols()) throw DimensionMismatch("MMD samples", x.cols(), y.cols());
}

}  // namespace detail

/// Unbiased estimate of the squared MMD: within-sample sums exclude the
/// diagonal, the cross term does not. Can be slightly negative.
inline double mmd(const Matrix& x, const Matrix& y, const KernelSpec& k = {}) {
  detail::check_samples(x, y);
  k.validate();
  const double m = double(x.rows()), n = double(y.rows());
  const Matrix kxx = detail::kernel_matrix(x, x, k);
  const Matrix kyy = detail::kernel_matrix(y, y, k);
  const Matrix kxy = detail::kernel_matrix(x, y, k);
  const double sxx = kxx.sum() - kxx.diagonal().sum();
  const double syy = kyy.sum() - kyy.diagonal().sum();
  return sxx / (m * (m - 1.0)) + syy / (n * (n - 1.0)) - 2.0 * kxy.sum() / (m * n);
}

struct TestResult {
  double value = 0.0;
  double p_value = 1.0;
};

/// Permutation test on the pooled sample. Permutation i uses a seed derived
/// from (seed, i), so the result does not depend on `threads`.
inline TestResult mmd_permutation_test(const Matrix& x, const Matrix& y, const KernelSpec& k, int n_permutations,
                                       std::uint64_t seed, unsigned threads = 1) {
  detail::check_samples(x, y);
  k.validate();
  if (n_permutations < 1) throw InvalidArgument("n_permutations must be positive");
  const Index m = x.rows(), n = y.rows(), total = m + n;
  Matrix z(total, x.cols());
  z << x, y;
  const Matrix kz = detail::kernel_matrix(z, z, k);
  const double ksum = kz.sum();
  const Vector diag = kz.diagonal();
  const double dm = double(m), dn = double(n);

  // Statistic for a split where `group` (size g) plays the side given by `group_is_x`.
  auto statistic = [&](const std::vector<Index>& idx) {
    // idx[0..m) form X', idx[m..) form Y'; sum over the smaller side.
    const bool use_x = m <= n;
    const Index g0 = use_x ? 0 : m, g1 = use_x ? m : total;
    Vector u = Vector::Zero(total);
    double gdiag = 0.0;
    for (Index t = g0; t < g1; ++t) {
      u += kz.col(idx[std::size_t(t)]);
      gdiag += diag(idx[std::size_t(t)]);
    }
    double within_g = 0.0;
    for (Index t = g0; t < g1; ++t) within_g += u(idx[std::size_t(t)]);
    const double cross = u.sum() - within_g;
    const double within_o = ksum - within_g - 2.0 * cross;
    const double odiag = diag.sum() - gdiag;
    const double sg = within_g - gdiag, so = within_o - odiag;
    const double sxx = use_x ? sg : so, syy = use_x ? so : sg;
    return sxx / (dm * (dm - 1.0)) + syy / (dn * (dn - 1.0)) - 2.0 * cross / (dm * dn);
  };

  std::vector<Index> identity(static_cast<std::size_t>(total));
  std::iota(identity.begin(), identity.end(), Index{0});
  TestResult r;
  r.value = mmd(x, y, k);
  const double observed = statistic(identity);
  const double tol = 1e-12 * (1.0 + std::abs(observed));

  std::vector<char> exceed(static_cast<std::size_t>(n_permutations), 0);
  auto work = [&](int begin, int end) {
    std::vector<Index> idx = identity;
    for (int i = begin; i < end; ++i) {
      idx = identity;
      Rng rng(derive_seed(seed, 0x9E, std::uint64_t(i)));
      std::shuffle(idx.begin(), idx.end(), rng);
      exceed[std::size_t(i)] = statistic(idx) >= observed - tol ? 1 : 0;
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, unsigned(n_permutations)));
  if (threads == 1) {
    work(0, n_permutations);
  } else {
    std::vector<std::jthread> pool;
    const int chunk = (n_permutations + int(threads) - 1) / int(threads);
    for (unsigned t = 0; t < threads; ++t) {
      const int b = int(t) * chunk, e = std::min(n_permutations, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  const auto count = std::count(exceed.begin(), exceed.end(), 1);
  r.p_value = (1.0 + double(count)) / (1.0 + double(n_permutations));
  return r;
}

inline double mmd_permutation_pvalue(const Matrix& x, const Matrix& y, const KernelSpec& k, int n_permutations,
                                     std::uint64_t seed) {
  if (n_permutations < 100) throw InvalidArgument("n_permutations must be at least 100");
  return mmd_permutation_test(x, y, k, n_permutations, seed).p_value;
}

/// MMD between the probability sets two models assign to the same points.
/// Identical probability sets give exactly 0 (the unbiased estimator alone
/// would dip below zero there).
inline double pp_mmd(const Classifier& a, const Classifier& b, const Matrix& points, const KernelSpec& k = {}) {
  if (points.rows() < 2) throw InvalidArgument("pp_mmd needs at least two points");
  const Matrix pa = predict_proba(a, points);
  const Matrix pb = predict_proba(b, points);
  if (pa == pb) return 0.0;
  return mmd(pa, pb, k);
}

inline TestResult pp_mmd_test(const Classifier& a, const Classifier& b, const Matrix& points, const KernelSpec& k,
                              int n_permutations, std::uint64_t seed) {
  if (points.rows() < 2) throw InvalidArgument("pp_mmd needs at least two points");
  const Matrix pa = predict_proba(a, points);
  const Matrix pb = predict_proba(b, points);
  if (pa == pb) return {0.0, 1.0};
  return mmd_permutation_test(pa, pb, k, n_permutations, seed);
}

/// Regular grid over the box spanned by `extrema` (one (min, max) per
/// feature) with ceil(total^(1/D)) points along every axis.
inline Matrix grid_points(const std::vector<std::pair<double, double>>& extrema, Index total) {
  const Index d = static_cast<Index>(extrema.size());
  if (d < 1) throw InvalidArgument("grid_points needs at least one dimension");
  for (const auto& [lo, hi] : extrema)
    if (!(hi > lo)) throw InvalidArgument("grid_points: degenerate extrema (min must be below max)");
  Index r = 1;
  auto power = [d](Index base) {
    Index p = 1;
    for (Index i = 0; i < d; ++i) p *= base;
    return p;
  };
  if (total < power(2)) throw InvalidArgument("grid_points: total must be at least 2^D");
  while (power(r) < total) ++r;
  const Index count = power(r);
  Matrix g(count, d);
  for (Index i = 0; i < count; ++i) {
    Index rem = i;
    for (Index j = d; j-- > 0;) {
      const Index step = rem % r;
      rem /= r;
      const auto [lo, hi] = extrema[std::size_t(j)];
      g(i, j) = lo + (hi - lo) * double(step) / double(r - 1);
    }
  }
  return g;
}

inline std::vector<std::pair<double, double>> feature_extrema(const Matrix& x) {
  std::vector<std::pair<double, double>> e;
  for (Index j = 0; j < x.cols(); ++j) e.emplace_back(x.col(j).minCoeff(), x.col(j).maxCoeff());
  return e;
}

/// Hard labels at the 0.5 threshold (p >= 0.5 is class 1).
inline std::vector<int> predict_labels(const Classifier& m, const Matrix& x) {
  const Vector p = predict_proba(m, x);
  std::vector<int> out(static_cast<std::size_t>(p.size()));
  for (Index i = 0; i < p.size(); ++i) out[std::size_t(i)] = p(i) >= 0.5 ? 1 : 0;
  return out;
}

inline double disagreement(const Classifier& a, const Classifier& b, const Matrix& x) {
  if (x.rows() == 0) throw InvalidArgument("disagreement needs at least one point");
  const auto la = predict_labels(a, x);
  const auto lb = predict_labels(b, x);
  std::size_t diff = 0;
  for (std::size_t i = 0; i < la.size(); ++i) diff += la[i] != lb[i];
  return double(diff) / double(la.size());
}

/// Mean of (p - 0.5)^2 over predicted probabilities.
inline double decisiveness_from_proba(const Vector& p) {
  if (p.size() == 0) throw InvalidArgument("decisiveness needs at least one point");
  return (p.array() - 0.5).square().mean();
}

inline double decisiveness_from_logits(const Vector& z) {
  return decisiveness_from_proba(z.unaryExpr([](double v) { return sigmoid(v); }));
}

inline double decisiveness(const Classifier& m, const Matrix& x) {
  if (x.rows() == 0) throw InvalidArgument("decisiveness needs at least one point");
  return decisiveness_from_proba(predict_proba(m, x));
}

/// Squared Euclidean distance between parameter vectors.
inline double param_perturbation(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("param_perturbation", a.size(), b.size());
  return (a - b).squaredNorm();
}

/// F1 of hard predictions; 0 when precision + recall is 0.
inline double fscore(const std::vector<int>& predicted, const std::vector<int>& actual, int positive = 1) {
  if (predicted.size() != actual.size()) throw DimensionMismatch("fscore", Index(actual.size()), Index(predicted.size()));
  if (predicted.empty()) throw InvalidArgument("fscore needs a nonempty test set");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == positive, a = actual[i] == positive;
    tp += p && a;
    fp += p && !a;
    fn += !p && a;
  }
  const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

inline double fscore(const Classifier& m, const Matrix& x, const std::vector<int>& y, int positive = 1) {
  return fscore(predict_labels(m, x), y, positive);
}

/// One round's evaluation of an experiment.
struct MetricReport {
  int round = 0;
  TestResult mmd_positive;
  TestResult mmd_negative;
  TestResult pp_mmd;
  double disagreement = 0.0;
  double decisiveness = 0.0;
  double perturbation = 0.0;             // ||theta_t - theta_{t-1}||^2
  double perturbation_cumulative = 0.0;  // ||theta_t - theta_0||^2
  double fscore = 0.0;
  std::size_t n_recoursed = 0;

  struct Row {
    std::string metric;
    double value;
    std::optional<double> p_value;
  };

  std::vector<Row> rows() const {
    return {{"mmd_positive", mmd_positive.value, mmd_positive.p_value},
            {"mmd_negative", mmd_negative.value, mmd_negative.p_value},
            {"pp_mmd", pp_mmd.value, pp_mmd.p_value},
            {"disagreement", disagreement, std::nullopt},
            {"decisiveness", decisiveness, std::nullopt},
            {"perturbation", perturbation, std::nullopt},
            {"perturbation_cumulative", perturbation_cumulative, std::nullopt},
            {"fscore", fscore, std::nullopt},
            {"n_recoursed", double(n_recoursed), std::nullopt}};
  }
};

}  // namespace recourse
