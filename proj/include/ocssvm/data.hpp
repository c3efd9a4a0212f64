#pragma once

// Dataset loading (UCI letter, libsvm, CSV), one-vs-rest partitioning and the
// seeded bivariate Normal generator used by the toy experiments.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "ocssvm/errors.hpp"
#include "ocssvm/text.hpp"
#include "ocssvm/types.hpp"

namespace ocssvm {

struct Dataset {
  FeatureMatrix features;
  std::vector<std::string> labels;
  std::string name;
  // Optional column names (CSV header). Empty when the source has none.
  std::vector<std::string> feature_names;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }

  void validate() const {
    if (features.rows() < 1) throw FormatError(name + ": dataset is empty");
    if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
      throw FormatError(name + ": label count does not match row count");
    }
    for (const auto& label : labels) {
      if (label.empty()) throw FormatError(name + ": empty class label");
    }
  }

  // Rows whose label equals `label`, in dataset order.
  FeatureMatrix rows_with_label(const std::string& label) const {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) idx.push_back(static_cast<Eigen::Index>(i));
    }
    FeatureMatrix out(static_cast<Eigen::Index>(idx.size()), features.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = features.row(idx[r]);
    return out;
  }
};

using LoadWarnings = std::vector<std::string>;

namespace detail {

inline FeatureMatrix to_matrix(const std::vector<std::vector<double>>& rows, Eigen::Index dim) {
  FeatureMatrix m(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  }
  return m;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace detail

// UCI letter-recognition format: `<LETTER>,<16 integers in 0..15>` per line.
inline Dataset load_letter(std::istream& in, const std::string& name = "letter", LoadWarnings* warnings = nullptr) {
  constexpr std::size_t kFeatures = 16;
  Dataset data;
  data.name = name;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    const auto fields = text::split(trimmed, ',');
    if (fields.size() != kFeatures + 1) {
      throw FormatError(name + ":" + std::to_string(line_no) + ": expected 17 comma-separated fields, got " +
                        std::to_string(fields.size()));
    }
    const auto label = text::trim(fields[0]);
    if (label.empty()) throw FormatError(name + ":" + std::to_string(line_no) + ": empty class label");
    std::vector<double> row(kFeatures);
    for (std::size_t j = 0; j < kFeatures; ++j) {
      const auto value = text::parse_double(text::trim(fields[j + 1]));
      if (!value || !std::isfinite(*value)) {
        throw FormatError(name + ":" + std::to_string(line_no) + ": bad feature '" + std::string(fields[j + 1]) +
                          "'");
      }
      if (warnings && (*value < 0.0 || *value > 15.0 || *value != std::floor(*value))) {
        warnings->push_back(name + ":" + std::to_string(line_no) + ": feature " + std::to_string(j + 1) +
                            " outside the integer range 0..15");
      }
      row[j] = *value;
    }
    data.labels.emplace_back(label);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(name + ": no samples");
  data.features = detail::to_matrix(rows, kFeatures);
  return data;
}

inline Dataset load_letter(const std::filesystem::path& path, LoadWarnings* warnings = nullptr) {
  auto in = detail::open_input(path);
  return load_letter(in, path.string(), warnings);
}

// libsvm sparse format `<label> <index>:<value> ...` with 1-based, strictly
// ascending indices. Missing entries are zero. The dimension is the largest
// index seen unless `dim` is given.
inline Dataset load_libsvm(std::istream& in, const std::string& name = "libsvm", Eigen::Index dim = 0) {
  Dataset data;
  data.name = name;
  std::vector<std::vector<std::pair<Eigen::Index, double>>> sparse;
  Eigen::Index max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto content = std::string_view(line);
    if (const auto hash = content.find('#'); hash != std::string_view::npos) content = content.substr(0, hash);
    const auto tokens = text::split_whitespace(content);
    if (tokens.empty()) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    std::vector<std::pair<Eigen::Index, double>> entries;
    Eigen::Index previous = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto colon = tokens[t].find(':');
      if (colon == std::string_view::npos) throw FormatError(where + ": expected index:value, got '" +
                                                             std::string(tokens[t]) + "'");
      const auto index = text::parse_int<long long>(tokens[t].substr(0, colon));
      const auto value = text::parse_double(tokens[t].substr(colon + 1));
      if (!index || *index < 1) throw FormatError(where + ": bad index in '" + std::string(tokens[t]) + "'");
      if (!value || !std::isfinite(*value)) {
        throw FormatError(where + ": bad value in '" + std::string(tokens[t]) + "'");
      }
      if (*index <= previous) throw FormatError(where + ": indices must be strictly ascending");
      previous = static_cast<Eigen::Index>(*index);
      entries.emplace_back(previous, *value);
    }
    max_index = std::max(max_index, previous);
    data.labels.emplace_back(tokens[0]);
    sparse.push_back(std::move(entries));
  }
  if (sparse.empty()) throw FormatError(name + ": no samples");
  if (dim == 0) dim = std::max<Eigen::Index>(max_index, 1);
  if (max_index > dim) throw FormatError(name + ": index " + std::to_string(max_index) + " exceeds dimension");
  data.features = FeatureMatrix::Zero(static_cast<Eigen::Index>(sparse.size()), dim);
  for (std::size_t r = 0; r < sparse.size(); ++r) {
    for (const auto& [index, value] : sparse[r]) data.features(static_cast<Eigen::Index>(r), index - 1) = value;
  }
  return data;
}

inline Dataset load_libsvm(const std::filesystem::path& path, Eigen::Index dim = 0) {
  auto in = detail::open_input(path);
  return load_libsvm(in, path.string(), dim);
}

inline constexpr int kNoLabelColumn = -1;

// Comma-separated values; `label_column` selects the class column (or
// kNoLabelColumn, in which case every row is labelled "?"). A first line whose
// feature fields are not all numeric is treated as a header.
inline Dataset load_csv(std::istream& in, int label_column = 0, const std::string& name = "csv") {
  Dataset data;
  data.name = name;
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    const auto fields = text::split(trimmed, ',');
    const std::string where = name + ":" + std::to_string(line_no);
    if (label_column != kNoLabelColumn && static_cast<std::size_t>(label_column) >= fields.size()) {
      throw FormatError(where + ": label column " + std::to_string(label_column) + " out of range");
    }
    std::vector<double> row;
    std::vector<std::string> names;
    std::string label = "?";
    bool numeric = true;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const auto field = text::trim(fields[j]);
      if (static_cast<int>(j) == label_column) {
        label = std::string(field);
        continue;
      }
      names.emplace_back(field);
      const auto value = text::parse_double(field);
      if (!value) {
        numeric = false;
        continue;
      }
      row.push_back(*value);
    }
    if (first) {
      first = false;
      width = fields.size();
      if (!numeric) {
        data.feature_names = std::move(names);
        continue;
      }
    }
    if (!numeric) throw FormatError(where + ": unparsable number");
    if (fields.size() != width) {
      throw FormatError(where + ": expected " + std::to_string(width) + " fields, got " +
                        std::to_string(fields.size()));
    }
    if (label.empty()) throw FormatError(where + ": empty class label");
    data.labels.push_back(std::move(label));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(name + ": no samples");
  const auto dim = static_cast<Eigen::Index>(rows.front().size());
  if (dim < 1) throw FormatError(name + ": rows have no feature columns");
  data.features = detail::to_matrix(rows, dim);
  return data;
}

inline Dataset load_csv(const std::filesystem::path& path, int label_column = 0) {
  auto in = detail::open_input(path);
  return load_csv(in, label_column, path.string());
}

// Writes `label,<features...>` with a header line. Values use the shortest
// round-trip decimal form, so load_csv(write_csv(d)) reproduces d exactly.
inline void write_csv(std::ostream& out, const Dataset& data) {
  out << "label";
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    out << ',';
    if (static_cast<Eigen::Index>(data.feature_names.size()) == data.dim()) {
      out << data.feature_names[static_cast<std::size_t>(j)];
    } else {
      out << 'x' << (j + 1);
    }
  }
  out << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out << data.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < data.dim(); ++j) out << ',' << text::format_double(data.features(i, j));
    out << '\n';
  }
}

// Training rows before `boundary`, test rows from `boundary` on.
struct PartitionSplit {
  Eigen::Index boundary = 0;

  static PartitionSplit at(Eigen::Index boundary) { return {boundary}; }
  static PartitionSplit from_fraction(double train_fraction, Eigen::Index m) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DomainError("train fraction must lie in (0, 1)");
    return {static_cast<Eigen::Index>(std::floor(train_fraction * static_cast<double>(m)))};
  }
};

// The letter file's conventional split: first 16,000 rows train, last 4,000 test.
inline constexpr Eigen::Index kLetterTrainRows = 16000;

// Letter features are integers in 0..15; dividing by this maps them to [0, 1].
inline constexpr double kLetterFeatureMax = 15.0;

struct OneVsRest {
  FeatureMatrix train_positives;
  FeatureMatrix test_positives;
  FeatureMatrix test_negatives;
};

inline OneVsRest one_vs_rest(const Dataset& data, const std::string& target, PartitionSplit split) {
  const Eigen::Index m = data.size();
  if (split.boundary <= 0 || split.boundary >= m) {
    throw DomainError("split boundary " + std::to_string(split.boundary) + " leaves an empty partition");
  }
  std::vector<Eigen::Index> train_pos, test_pos, test_neg;
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool positive = data.labels[static_cast<std::size_t>(i)] == target;
    if (i < split.boundary) {
      if (positive) train_pos.push_back(i);
    } else {
      (positive ? test_pos : test_neg).push_back(i);
    }
  }
  if (train_pos.empty() && test_pos.empty()) throw DomainError("unknown target class '" + target + "'");
  if (train_pos.empty()) throw DomainError("no training rows for class '" + target + "'");
  if (test_pos.empty()) throw DomainError("no test rows for class '" + target + "'");
  if (test_neg.empty()) throw DomainError("no negative test rows for class '" + target + "'");
  auto gather = [&](const std::vector<Eigen::Index>& idx) {
    FeatureMatrix out(static_cast<Eigen::Index>(idx.size()), data.dim());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = data.features.row(idx[r]);
    return out;
  };
  return {gather(train_pos), gather(test_pos), gather(test_neg)};
}

// SplitMix64 (Steele, Lea & Flood). Fully specified, so any port seeded with
// the same value yields the same stream.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on (0, 1]: the top 53 bits, shifted away from zero.
  double uniform() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

  // Uniform integer in [0, n) by rejection, free of modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = n == 0 ? 0 : (~std::uint64_t{0} - (~std::uint64_t{0} % n));
    while (true) {
      const std::uint64_t v = next();
      if (v < limit) return v % n;
    }
  }

 private:
  std::uint64_t state_;
};

struct ToyConfig {
  Eigen::Index count = 1500;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();
  std::uint64_t seed = 1;
};

// Point i uses one Box-Muller pair from two consecutive uniforms u1, u2:
//   r = sqrt(-2 ln u1),  z = (r cos(2 pi u2), r sin(2 pi u2)),
//   x = mean + L z with L the lower Cholesky factor of the covariance.
inline Dataset sample_bivariate_normal(const ToyConfig& config) {
  if (config.count < 1) throw DomainError("toy sample count must be >= 1");
  const Eigen::Matrix2d& cov = config.covariance;
  if (!cov.allFinite() || std::abs(cov(0, 1) - cov(1, 0)) > 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff())) {
    throw DomainError("covariance must be finite and symmetric");
  }
  Eigen::LLT<Eigen::Matrix2d> llt(cov);
  if (llt.info() != Eigen::Success || !(cov(0, 0) > 0.0) || !(cov.determinant() > 0.0)) {
    throw DomainError("covariance must be positive definite");
  }
  const Eigen::Matrix2d chol = llt.matrixL();
  SplitMix64 rng(config.seed);
  Dataset data;
  data.name = "bivariate-normal";
  data.features.resize(config.count, 2);
  data.labels.assign(static_cast<std::size_t>(config.count), "+1");
  for (Eigen::Index i = 0; i < config.count; ++i) {
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    const Eigen::Vector2d z(r * std::cos(theta), r * std::sin(theta));
    data.features.row(i) = (config.mean + chol * z).transpose();
  }
  return data;
}

}  // namespace ocssvm
