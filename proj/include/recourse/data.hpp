#pragma once

#include "recourse/common.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace recourse {

enum class Split : std::uint8_t { train, test };

/// A population of individuals with binary outcomes.
///
/// Labels may change as individuals implement recourse; the t=0 snapshot in
/// `labels_t0()` never does. Only training rows whose t=0 label is 0 can be
/// moved to a counterfactual state.
class Dataset {
 public:
  Dataset(Matrix features, std::vector<int> labels, std::vector<std::string> feature_names = {})
      : features_(std::move(features)), labels_(std::move(labels)), names_(std::move(feature_names)) {
    const auto n = static_cast<std::size_t>(features_.rows());
    if (features_.rows() == 0 || features_.cols() == 0)
      throw InvalidArgument("dataset must have at least one row and one feature");
    if (labels_.size() != n)
      throw DimensionMismatch("dataset labels", features_.rows(), static_cast<Index>(labels_.size()));
    if (!features_.allFinite()) throw InvalidArgument("dataset features contain non-finite values");
    for (int y : labels_)
      if (y != 0 && y != 1) throw InvalidArgument("dataset labels must be 0 or 1");
    if (names_.empty())
      for (Index j = 0; j < features_.cols(); ++j) names_.push_back("f" + std::to_string(j));
    if (names_.size() != static_cast<std::size_t>(features_.cols()))
      throw DimensionMismatch("dataset feature names", features_.cols(), static_cast<Index>(names_.size()));
    labels_t0_ = labels_;
    recoursed_.assign(n, 0);
    split_.assign(n, Split::train);
  }

  Index size() const noexcept { return features_.rows(); }
  Index dim() const noexcept { return features_.cols(); }

  const Matrix& features() const noexcept { return features_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const std::vector<int>& labels_t0() const noexcept { return labels_t0_; }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }
  bool recoursed(Index i) const { return recoursed_.at(static_cast<std::size_t>(i)) != 0; }
  Split split(Index i) const { return split_.at(static_cast<std::size_t>(i)); }
  bool is_train(Index i) const { return split(i) == Split::train; }
  const std::vector<Split>& split_mask() const noexcept { return split_; }

  std::size_t recoursed_count() const {
    return static_cast<std::size_t>(std::count(recoursed_.begin(), recoursed_.end(), 1));
  }

  /// Replace the train/test assignment. Only allowed before any recourse.
  void set_split(std::vector<Split> split) {
    if (split.size() != static_cast<std::size_t>(size()))
      throw DimensionMismatch("split mask", size(), static_cast<Index>(split.size()));
    if (recoursed_count() > 0) throw InvalidArgument("cannot re-split a dataset after recourse");
    split_ = std::move(split);
  }

  std::vector<Index> rows_where(Split s) const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i)
      if (split(i) == s) out.push_back(i);
    return out;
  }

  /// Rows with current label `y`.
  std::vector<Index> rows_with_label(int y) const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i)
      if (labels_[static_cast<std::size_t>(i)] == y) out.push_back(i);
    return out;
  }

  std::vector<Index> rows_with_label_t0(int y) const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i)
      if (labels_t0_[static_cast<std::size_t>(i)] == y) out.push_back(i);
    return out;
  }

  /// Training rows that started in the non-target class and have not yet
  /// received recourse.
  std::vector<Index> recourse_pool() const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (split_[k] == Split::train && labels_t0_[k] == 0 && recoursed_[k] == 0) out.push_back(i);
    }
    return out;
  }

  /// Move individual `i` to its counterfactual state and relabel it as target.
  void apply_recourse(Index i, const Vector& counterfactual) {
    const auto k = static_cast<std::size_t>(i);
    if (i < 0 || i >= size()) throw InvalidArgument("recourse row out of range");
    if (split_[k] != Split::train) throw InvalidArgument("test rows cannot receive recourse");
    if (labels_t0_[k] != 0) throw InvalidArgument("only non-target individuals receive recourse");
    if (counterfactual.size() != dim()) throw DimensionMismatch("counterfactual", dim(), counterfactual.size());
    if (!counterfactual.allFinite()) throw InvalidArgument("counterfactual contains non-finite values");
    features_.row(i) = counterfactual.transpose();
    labels_[k] = 1;
    recoursed_[k] = 1;
  }

  Matrix features_of(const std::vector<Index>& rows) const { return select_rows(features_, rows); }

  Vector labels_of(const std::vector<Index>& rows) const {
    Vector y(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      y(static_cast<Index>(i)) = labels_[static_cast<std::size_t>(rows[i])];
    return y;
  }

  /// Snapshot with columns `id, f0..f{D-1}, label, label_t0, recoursed, split`.
  void write_csv(std::ostream& os) const {
    os << "id";
    for (Index j = 0; j < dim(); ++j) os << ",f" << j;
    os << ",label,label_t0,recoursed,split\n";
    for (Index i = 0; i < size(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      os << i;
      for (Index j = 0; j < dim(); ++j) os << ',' << format_double(features_(i, j));
      os << ',' << labels_[k] << ',' << labels_t0_[k] << ',' << int(recoursed_[k]) << ','
         << (split_[k] == Split::train ? "train" : "test") << '\n';
    }
  }

  /// Replace features wholesale (standardization). Labels and bookkeeping stay.
  Dataset with_features(Matrix features) const {
    if (features.rows() != size() || features.cols() != dim())
      throw DimensionMismatch("replacement features", size() * dim(), features.size());
    Dataset out = *this;
    if (!features.allFinite()) throw InvalidArgument("dataset features contain non-finite values");
    out.features_ = std::move(features);
    return out;
  }

 private:
  Matrix features_;
  std::vector<int> labels_;
  std::vector<int> labels_t0_;
  std::vector<std::string> names_;
  std::vector<char> recoursed_;
  std::vector<Split> split_;
};

// ---------------------------------------------------------------------------
// Synthetic data

enum class SyntheticKind { overlapping, linearly_separable, circles, moons };

inline std::string to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::overlapping: return "overlapping";
    case SyntheticKind::linearly_separable: return "linearly_separable";
    case SyntheticKind::circles: return "circles";
    case SyntheticKind::moons: return "moons";
  }
  return "?";
}

inline std::optional<SyntheticKind> parse_synthetic_kind(std::string_view s) {
  if (s == "overlapping") return SyntheticKind::overlapping;
  if (s == "linearly_separable") return SyntheticKind::linearly_separable;
  if (s == "circles") return SyntheticKind::circles;
  if (s == "moons") return SyntheticKind::moons;
  return std::nullopt;
}

/// Noise level used when a config does not give one.
inline double default_noise(SyntheticKind k) {
  return (k == SyntheticKind::circles || k == SyntheticKind::moons) ? 0.1 : 0.0;
}

/// Balanced 2-D toy problem: rows [0, n/2) are class 0, rows [n/2, n) class 1.
/// For the Gaussian kinds `noise` is ignored (their spread is fixed).
inline Dataset make_synthetic(SyntheticKind kind, Index n, double noise, std::uint64_t seed) {
  if (n < 4 || n % 2 != 0) throw InvalidArgument("synthetic sample count must be even and at least 4");
  if (!(noise >= 0.0)) throw InvalidArgument("synthetic noise must be nonnegative");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 1.0);
  const Index half = n / 2;
  Matrix x(n, 2);
  std::vector<int> y(static_cast<std::size_t>(n));
  constexpr double pi = std::numbers::pi;

  for (Index i = 0; i < n; ++i) {
    const int cls = i < half ? 0 : 1;
    y[static_cast<std::size_t>(i)] = cls;
    double a = 0.0, b = 0.0;
    switch (kind) {
      case SyntheticKind::overlapping: {
        const double mu = cls == 0 ? -0.5 : 0.5;
        a = mu + gauss(rng);
        b = mu + gauss(rng);
        break;
      }
      case SyntheticKind::linearly_separable: {
        const double mu = cls == 0 ? -2.0 : 2.0;
        a = mu + 0.5 * gauss(rng);
        b = mu + 0.5 * gauss(rng);
        break;
      }
      case SyntheticKind::circles: {
        const double r = cls == 0 ? 1.0 : 0.5;
        const double t = 2.0 * pi * angle(rng);
        a = r * std::cos(t) + noise * gauss(rng);
        b = r * std::sin(t) + noise * gauss(rng);
        break;
      }
      case SyntheticKind::moons: {
        const double t = pi * angle(rng);
        if (cls == 0) {
          a = std::cos(t);
          b = std::sin(t);
        } else {
          a = 1.0 - std::cos(t);
          b = 0.5 - std::sin(t);
        }
        a += noise * gauss(rng);
        b += noise * gauss(rng);
        break;
      }
    }
    x(i, 0) = a;
    x(i, 1) = b;
  }
  return Dataset(std::move(x), std::move(y));
}

// ---------------------------------------------------------------------------
// Splits and preprocessing

/// Stratified train/test assignment; the same seed always yields the same split.
inline std::vector<Split> make_split(const Dataset& d, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidArgument("test_fraction must lie in (0,1)");
  std::vector<Split> mask(static_cast<std::size_t>(d.size()), Split::train);
  Rng rng(seed);
  for (int cls : {0, 1}) {
    auto rows = d.rows_with_label_t0(cls);
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * double(rows.size())));
    for (std::size_t i = 0; i < n_test && i < rows.size(); ++i)
      mask[static_cast<std::size_t>(rows[i])] = Split::test;
  }
  return mask;
}

/// 1 where value > median, else 0. The median of an even count is the mean of
/// the two middle values.
inline std::vector<int> binarize_median(const std::vector<double>& values) {
  if (values.size() < 2) throw InvalidArgument("binarize_median needs at least two values");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<int> out;
  out.reserve(n);
  for (double v : values) out.push_back(v > median ? 1 : 0);
  return out;
}

/// Exactly `per_class` rows of each class, drawn without replacement. Selected
/// rows keep their original relative order.
inline Dataset undersample_balance(const Dataset& d, std::size_t per_class, std::uint64_t seed) {
  if (per_class == 0) throw InvalidArgument("per_class must be positive");
  Rng rng(seed);
  std::vector<Index> keep;
  for (int cls : {0, 1}) {
    auto rows = d.rows_with_label(cls);
    if (rows.size() < per_class)
      throw InvalidArgument("class " + std::to_string(cls) + " has " + std::to_string(rows.size()) +
                            " rows, fewer than per_class=" + std::to_string(per_class));
    std::shuffle(rows.begin(), rows.end(), rng);
    keep.insert(keep.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(per_class));
  }
  std::sort(keep.begin(), keep.end());
  std::vector<int> labels;
  labels.reserve(keep.size());
  for (Index i : keep) labels.push_back(d.labels()[static_cast<std::size_t>(i)]);
  return Dataset(d.features_of(keep), std::move(labels), d.feature_names());
}

struct Standardizer {
  Vector mean;
  Vector stddev;  // population standard deviation

  Matrix transform(const Matrix& x) const {
    if (x.cols() != mean.size()) throw DimensionMismatch("standardizer input", mean.size(), x.cols());
    return (x.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
  }
};

/// Per-feature statistics over the rows selected by `train_mask`.
inline Standardizer fit_standardizer(const Dataset& d, const std::vector<Split>& train_mask) {
  if (train_mask.size() != static_cast<std::size_t>(d.size()))
    throw DimensionMismatch("train mask", d.size(), static_cast<Index>(train_mask.size()));
  std::vector<Index> rows;
  for (Index i = 0; i < d.size(); ++i)
    if (train_mask[static_cast<std::size_t>(i)] == Split::train) rows.push_back(i);
  if (rows.size() < 2) throw InvalidArgument("standardizer needs at least two training rows");
  const Matrix x = d.features_of(rows);
  Standardizer s;
  s.mean = x.colwise().mean().transpose();
  s.stddev = ((x.rowwise() - s.mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
  for (Index j = 0; j < s.stddev.size(); ++j)
    if (!(s.stddev(j) > 0.0))
      throw InvalidArgument("feature '" + d.feature_names()[static_cast<std::size_t>(j)] +
                            "' has zero variance in the training split");
  return s;
}

inline Standardizer fit_standardizer(const Dataset& d) { return fit_standardizer(d, d.split_mask()); }

inline Dataset apply_standardizer(const Dataset& d, const Standardizer& s) {
  return d.with_features(s.transform(d.features()));
}

// ---------------------------------------------------------------------------
// CSV ingestion

struct CsvOptions {
  char delimiter = ',';
  /// Binarize a continuous target at its median.
  bool binarize_target = false;
  /// Columns excluded when `numeric_columns` is empty (e.g. an index column).
  std::vector<std::string> exclude_columns;
};

struct CsvLoad {
  Dataset dataset;
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;
  std::array<std::size_t, 2> class_counts{0, 0};
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "?" || cell == "null";
}

}  // namespace detail

/// Read a header-first CSV. Rows with any missing cell among the used columns
/// are dropped; other unparseable cells are errors.
inline CsvLoad load_csv(const std::string& path, const std::string& target_column,
                        std::vector<std::string> numeric_columns = {}, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("CSV file '" + path + "' is empty (header row required)");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
  std::vector<std::string> header = detail::split_csv_line(line, opt.delimiter);
  for (auto& h : header) h = detail::trim(h);

  auto column_index = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InvalidArgument("column not found: '" + name + "' in '" + path + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t target_idx = column_index(target_column);
  if (numeric_columns.empty()) {
    for (const auto& h : header)
      if (h != target_column &&
          std::find(opt.exclude_columns.begin(), opt.exclude_columns.end(), h) == opt.exclude_columns.end())
        numeric_columns.push_back(h);
  }
  std::vector<std::size_t> feature_idx;
  for (const auto& c : numeric_columns) feature_idx.push_back(column_index(c));
  if (feature_idx.empty()) throw InvalidArgument("CSV '" + path + "' has no feature columns");

  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  std::size_t read = 0, dropped = 0, line_no = 1;
  auto parse = [&](const std::string& cell, const std::string& col) {
    double v = 0.0;
    const char* b = cell.data();
    const char* e = b + cell.size();
    if (!cell.empty() && *b == '+') ++b;
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e)
      throw InvalidArgument("unparseable value '" + cell + "' in column '" + col + "' at line " +
                            std::to_string(line_no) + " of '" + path + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    ++read;
    auto cells = detail::split_csv_line(line, opt.delimiter);
    if (cells.size() != header.size())
      throw InvalidArgument("line " + std::to_string(line_no) + " of '" + path + "' has " +
                            std::to_string(cells.size()) + " fields, header has " +
                            std::to_string(header.size()));
    for (auto& c : cells) c = detail::trim(c);
    bool missing = detail::is_missing(cells[target_idx]);
    for (auto j : feature_idx) missing = missing || detail::is_missing(cells[j]);
    if (missing) {
      ++dropped;
      continue;
    }
    std::vector<double> r;
    r.reserve(feature_idx.size());
    for (auto j : feature_idx) {
      const double v = parse(cells[j], header[j]);
      if (!std::isfinite(v)) throw InvalidArgument("non-finite value in column '" + header[j] + "'");
      r.push_back(v);
    }
    targets.push_back(parse(cells[target_idx], target_column));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw InvalidArgument("CSV '" + path + "' has no complete rows");

  std::vector<int> labels;
  if (opt.binarize_target) {
    labels = binarize_median(targets);
  } else {
    for (double t : targets) {
      if (t != 0.0 && t != 1.0)
        throw InvalidArgument("target column '" + target_column +
                              "' is not binary; enable binarize_target to split at the median");
      labels.push_back(t == 1.0 ? 1 : 0);
    }
  }
  Matrix x(static_cast<Index>(rows.size()), static_cast<Index>(feature_idx.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < feature_idx.size(); ++j)
      x(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];

  std::array<std::size_t, 2> counts{0, 0};
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return CsvLoad{Dataset(std::move(x), std::move(labels), numeric_columns), read, dropped, counts};
}

}  // namespace recourse
