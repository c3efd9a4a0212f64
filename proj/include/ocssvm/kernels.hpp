#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "ocssvm/errors.hpp"
#include "ocssvm/types.hpp"

namespace ocssvm {

enum class KernelFamily { linear, rbf, intersection, hellinger, chi_squared };

inline std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::linear: return "linear";
    case KernelFamily::rbf: return "rbf";
    case KernelFamily::intersection: return "intersection";
    case KernelFamily::hellinger: return "hellinger";
    case KernelFamily::chi_squared: return "chi2";
  }
  return "unknown";
}

inline KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "linear") return KernelFamily::linear;
  if (name == "rbf") return KernelFamily::rbf;
  if (name == "intersection") return KernelFamily::intersection;
  if (name == "hellinger") return KernelFamily::hellinger;
  if (name == "chi2" || name == "chi_squared") return KernelFamily::chi_squared;
  throw DomainError("unknown kernel family '" + std::string(name) + "'");
}

// Additive kernels are only defined on nonnegative (histogram-like) features.
inline bool is_additive(KernelFamily family) {
  return family == KernelFamily::intersection || family == KernelFamily::hellinger ||
         family == KernelFamily::chi_squared;
}

// Kernel family plus its parameters. Immutable once built; gamma exists iff
// the family is rbf.
class KernelSpec {
 public:
  static KernelSpec linear() { return KernelSpec(KernelFamily::linear, std::nullopt); }
  static KernelSpec intersection() { return KernelSpec(KernelFamily::intersection, std::nullopt); }
  static KernelSpec hellinger() { return KernelSpec(KernelFamily::hellinger, std::nullopt); }
  static KernelSpec chi_squared() { return KernelSpec(KernelFamily::chi_squared, std::nullopt); }
  static KernelSpec rbf(double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
      throw DomainError("rbf gamma must be a positive finite number");
    }
    return KernelSpec(KernelFamily::rbf, gamma);
  }

  // Builds a spec from a family and an optional gamma, enforcing the pairing.
  static KernelSpec make(KernelFamily family, std::optional<double> gamma = std::nullopt) {
    if (family == KernelFamily::rbf) {
      if (!gamma) throw DomainError("rbf kernel requires gamma");
      return rbf(*gamma);
    }
    if (gamma) throw DomainError("gamma is only valid for the rbf kernel");
    return KernelSpec(family, std::nullopt);
  }

  KernelFamily family() const { return family_; }
  std::optional<double> gamma() const { return gamma_; }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;

 private:
  KernelSpec(KernelFamily family, std::optional<double> gamma) : family_(family), gamma_(gamma) {}

  KernelFamily family_;
  std::optional<double> gamma_;
};

namespace detail {

// Caller guarantees equal sizes and valid coordinates.
template <typename A, typename B>
double eval_kernel_unchecked(const KernelSpec& spec, const Eigen::DenseBase<A>& x,
                             const Eigen::DenseBase<B>& y) {
  const Eigen::Index d = x.size();
  double sum = 0.0;
  switch (spec.family()) {
    case KernelFamily::linear:
      for (Eigen::Index i = 0; i < d; ++i) sum += x(i) * y(i);
      return sum;
    case KernelFamily::rbf: {
      for (Eigen::Index i = 0; i < d; ++i) {
        const double diff = x(i) - y(i);
        sum += diff * diff;
      }
      return std::exp(-*spec.gamma() * sum);
    }
    case KernelFamily::intersection:
      for (Eigen::Index i = 0; i < d; ++i) sum += std::min(x(i), y(i));
      return sum;
    case KernelFamily::hellinger:
      for (Eigen::Index i = 0; i < d; ++i) sum += std::sqrt(x(i) * y(i));
      return sum;
    case KernelFamily::chi_squared:
      for (Eigen::Index i = 0; i < d; ++i) {
        const double denom = x(i) + y(i);
        if (denom > 0.0) sum += 2.0 * x(i) * y(i) / denom;
      }
      return sum;
  }
  return sum;
}

template <typename A>
void check_vector(const KernelSpec& spec, const Eigen::DenseBase<A>& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i);
    if (!std::isfinite(v)) throw DomainError("non-finite feature value");
    if (v < 0.0 && is_additive(spec.family())) {
      throw DomainError("negative feature value under additive kernel " +
                        std::string(to_string(spec.family())));
    }
  }
}

template <typename M>
void check_rows(const KernelSpec& spec, const Eigen::DenseBase<M>& rows) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) check_vector(spec, rows.row(r));
}

}  // namespace detail

// k(x, y) for the family in `spec`:
//   linear        <x, y>
//   rbf           exp(-gamma |x - y|^2)
//   intersection  sum_i min(x_i, y_i)
//   hellinger     sum_i sqrt(x_i y_i)
//   chi2          sum_i 2 x_i y_i / (x_i + y_i), with 0/0 = 0
template <typename A, typename B>
double eval_kernel(const KernelSpec& spec, const Eigen::DenseBase<A>& x, const Eigen::DenseBase<B>& y) {
  if (x.size() != y.size()) {
    throw DimensionError("kernel arguments differ in dimension: " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
  }
  if (x.size() < 1) throw DimensionError("kernel arguments must have dimension >= 1");
  detail::check_vector(spec, x);
  detail::check_vector(spec, y);
  return detail::eval_kernel_unchecked(spec, x, y);
}

// Dense symmetric Gram matrix. Only the upper triangle is evaluated; the lower
// triangle is a mirror, so symmetry is exact.
class GramMatrix {
 public:
  GramMatrix() = default;
  explicit GramMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() != values_.cols()) throw DimensionError("Gram matrix must be square");
  }

  const Matrix& values() const { return values_; }
  Eigen::Index size() const { return values_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }

 private:
  Matrix values_;
};

template <typename M>
GramMatrix gram_matrix(const KernelSpec& spec, const Eigen::DenseBase<M>& rows) {
  const Eigen::Index m = rows.rows();
  if (m < 1) throw DimensionError("Gram matrix needs at least one sample");
  if (rows.cols() < 1) throw DimensionError("samples must have dimension >= 1");
  detail::check_rows(spec, rows);
  Matrix values(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      const double k = detail::eval_kernel_unchecked(spec, rows.row(i), rows.row(j));
      values(i, j) = k;
      values(j, i) = k;
    }
  }
  return GramMatrix(std::move(values));
}

// [k(x, X_0), ..., k(x, X_{m-1})]
template <typename M, typename V>
Vector gram_vector(const KernelSpec& spec, const Eigen::DenseBase<M>& rows, const Eigen::DenseBase<V>& x) {
  if (rows.rows() > 0 && rows.cols() != x.size()) {
    throw DimensionError("probe dimension " + std::to_string(x.size()) + " does not match " +
                         std::to_string(rows.cols()));
  }
  if (x.size() < 1) throw DimensionError("probe must have dimension >= 1");
  detail::check_vector(spec, x);
  Vector out(rows.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    out(i) = detail::eval_kernel_unchecked(spec, x, rows.row(i));
  }
  return out;
}

}  // namespace ocssvm
