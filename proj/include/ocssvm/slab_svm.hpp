#pragma once

// One-class slab SVM.
//
// Training solves the dual
//
//   minimize    1/2 (alpha - alpha_bar)' K (alpha - alpha_bar)
//   subject to  0 <= alpha_i <= 1 / (nu1 m),         sum alpha = 1
//               0 <= alpha_bar_i <= eps / (nu2 m),   sum alpha_bar = eps
//
// The score of x is s(x) = sum_i (alpha_i - alpha_bar_i) k(x, x_i). The lower
// offset rho1 is the mean score of the samples whose alpha_i is strictly inside
// its box, rho2 likewise for alpha_bar. A sample is positive iff
// (s - rho1)(rho2 - s) > 0.
//
// The one-class SVM baseline (single hyperplane, threshold rho) lives here too.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "ocssvm/errors.hpp"
#include "ocssvm/kernels.hpp"
#include "ocssvm/qp_solver.hpp"
#include "ocssvm/types.hpp"

namespace ocssvm {

inline constexpr double kDefaultEpsilon = 2.0 / 3.0;
// Dual coefficients with |alpha_i - alpha_bar_i| at or below this are dropped
// from the prediction-time support set.
inline constexpr double kPruneThreshold = 1e-8;

struct SlabTrainConfig {
  double nu1 = 0.10;
  double nu2 = 0.01;
  double epsilon = kDefaultEpsilon;
  KernelSpec kernel = KernelSpec::linear();
  SolverConfig solver;
  // Fraction of the box width used to decide whether a dual variable sits on
  // one of its bounds.
  double sv_bound_tolerance = 1e-6;

  double lower_cap(Eigen::Index m) const { return 1.0 / (nu1 * static_cast<double>(m)); }
  double upper_cap(Eigen::Index m) const { return epsilon / (nu2 * static_cast<double>(m)); }

  void validate() const {
    if (!(nu1 > 0.0 && nu1 <= 1.0)) throw DomainError("nu1 must lie in (0, 1]");
    if (!(nu2 > 0.0 && nu2 <= 1.0)) throw DomainError("nu2 must lie in (0, 1]");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw DomainError("epsilon must be positive and finite");
    if (epsilon == 1.0) throw DomainError("epsilon must differ from 1 (epsilon = 1 gives the trivial solution)");
    if (!(sv_bound_tolerance > 0.0 && sv_bound_tolerance < 0.5)) {
      throw DomainError("sv_bound_tolerance must lie in (0, 0.5)");
    }
    solver.validate();
  }

  void validate(Eigen::Index m) const {
    validate();
    // The boxes must admit sum alpha = 1 and sum alpha_bar = epsilon.
    const double md = static_cast<double>(m);
    if (md * lower_cap(m) < 1.0 - 1e-12 || md * upper_cap(m) < epsilon * (1.0 - 1e-12)) {
      throw DomainError("dual boxes cannot satisfy the equality constraints");
    }
  }
};

// Hessian of the slab dual over z = (alpha, alpha_bar):
//   Q = [[K, -K], [-K, K]]
// Q is singular, but Q + diag(d1, d2) with d > 0 reduces to the m x m SPD system
//   (K + diag(1 / (1/d1 + 1/d2))) v = ...,   v = x_alpha - x_alpha_bar,
// so each Newton step costs one m x m Cholesky instead of a 2m x 2m one.
class SlabHessian {
 public:
  SlabHessian() = default;
  explicit SlabHessian(Matrix k) : k_(std::move(k)) {}

  Eigen::Index size() const { return 2 * k_.rows(); }
  const Matrix& kernel_matrix() const { return k_; }

  Vector apply(const Vector& z) const {
    const Eigen::Index m = k_.rows();
    const Vector kv = k_ * (z.head(m) - z.tail(m));
    Vector out(2 * m);
    out.head(m) = kv;
    out.tail(m) = -kv;
    return out;
  }

  double mean_diagonal() const { return k_.rows() > 0 ? k_.diagonal().mean() : 0.0; }

  Matrix principal_block(const std::vector<Eigen::Index>& idx) const {
    const Eigen::Index m = k_.rows();
    const auto n = static_cast<Eigen::Index>(idx.size());
    Matrix out(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::Index i = idx[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < n; ++c) {
        const Eigen::Index j = idx[static_cast<std::size_t>(c)];
        const double sign = (i < m) == (j < m) ? 1.0 : -1.0;
        out(r, c) = sign * k_(i % m, j % m);
      }
    }
    return out;
  }

  class Factor {
   public:
    Factor(const Matrix& k, const Vector& d) : k_(&k), d_(d) {
      const Eigen::Index m = k.rows();
      const Vector d1 = d.head(m), d2 = d.tail(m);
      inv_e_ = (d1.cwiseInverse() + d2.cwiseInverse()).cwiseInverse();
      Matrix reduced = k;
      reduced.diagonal() += inv_e_;
      llt_.compute(reduced);
      use_llt_ = llt_.info() == Eigen::Success;
      if (!use_llt_) ldlt_.compute(reduced);
    }

    Vector solve(const Vector& r) const {
      const Eigen::Index m = k_->rows();
      const Vector d1 = d_.head(m), d2 = d_.tail(m);
      const Vector r1 = r.head(m), r2 = r.tail(m);
      const Vector rhs = inv_e_.cwiseProduct(r1.cwiseQuotient(d1) - r2.cwiseQuotient(d2));
      const Vector v = use_llt_ ? Vector(llt_.solve(rhs)) : Vector(ldlt_.solve(rhs));
      const Vector kv = (*k_) * v;
      Vector out(2 * m);
      out.head(m) = (r1 - kv).cwiseQuotient(d1);
      out.tail(m) = (r2 + kv).cwiseQuotient(d2);
      return out;
    }

   private:
    const Matrix* k_;
    Vector d_;
    Vector inv_e_;
    Eigen::LLT<Matrix> llt_;
    Eigen::LDLT<Matrix> ldlt_;
    bool use_llt_ = false;
  };

  Factor factor(const Vector& d) const { return Factor(k_, d); }

 private:
  Matrix k_;
};

using SlabQpProblem = BasicQpProblem<SlabHessian>;

struct SlabOffsets {
  double rho1 = 0.0;
  double rho2 = 0.0;
  int n_sv1 = 0;
  int n_sv2 = 0;
  bool lower_fallback = false;  // no alpha strictly inside its box
  bool upper_fallback = false;  // no alpha_bar strictly inside its box
  bool degenerate = false;      // rho2 - rho1 <= 1e-8 (zero-width slab)
};

namespace detail {

inline void check_duals(Eigen::Index m, const Vector& alpha, const Vector& alpha_bar) {
  if (alpha.size() != m || alpha_bar.size() != m) {
    throw DimensionError("dual vectors must have one entry per training sample");
  }
}

// Chooses the offset for one plane: mean score over on-plane samples, or, when
// that set is empty, the score bound implied by the off-plane samples.
//   `at_zero` samples lie on the inner side of the plane,
//   `at_cap` samples lie beyond it.
// `inner_is_above` tells which side the inner side is (true for the lower plane).
struct PlaneOffset {
  double value = 0.0;
  int on_plane = 0;
  bool fallback = false;
};

inline PlaneOffset plane_offset(const Vector& scores, const Vector& duals, double cap, double tol,
                                bool inner_is_above) {
  const Eigen::Index m = scores.size();
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (duals(i) > tol && duals(i) < cap - tol) {
      sum += scores(i);
      ++count;
    }
  }
  if (count > 0) return {sum / count, count, false};

  // Lower plane: rho1 = min score over alpha ~ 0, else max over alpha at cap.
  // Upper plane: rho2 = max score over alpha_bar ~ 0, else min over capped.
  double inner = inner_is_above ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  double outer = -inner;
  bool have_inner = false, have_outer = false;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (duals(i) <= tol) {
      inner = inner_is_above ? std::min(inner, scores(i)) : std::max(inner, scores(i));
      have_inner = true;
    } else if (duals(i) >= cap - tol) {
      outer = inner_is_above ? std::max(outer, scores(i)) : std::min(outer, scores(i));
      have_outer = true;
    }
  }
  if (have_inner) return {inner, 0, true};
  if (have_outer) return {outer, 0, true};
  return {0.0, 0, true};
}

}  // namespace detail

// Offsets from the KKT conditions. `gram` must be the training Gram matrix.
inline SlabOffsets compute_offsets(const GramMatrix& gram, const Vector& alpha, const Vector& alpha_bar,
                                   const SlabTrainConfig& config) {
  const Eigen::Index m = gram.size();
  detail::check_duals(m, alpha, alpha_bar);
  config.validate(m);
  const double cap1 = config.lower_cap(m);
  const double cap2 = config.upper_cap(m);
  const Vector scores = gram.values() * (alpha - alpha_bar);

  const auto lower = detail::plane_offset(scores, alpha, cap1, config.sv_bound_tolerance * cap1, true);
  const auto upper = detail::plane_offset(scores, alpha_bar, cap2, config.sv_bound_tolerance * cap2, false);
  SlabOffsets out;
  out.rho1 = lower.value;
  out.rho2 = upper.value;
  out.n_sv1 = lower.on_plane;
  out.n_sv2 = upper.on_plane;
  out.lower_fallback = lower.fallback;
  out.upper_fallback = upper.fallback;
  out.degenerate = out.rho2 - out.rho1 <= 1e-8;
  return out;
}

namespace detail {

// Training rows with nonzero coefficients, in training order.
struct SupportSet {
  FeatureMatrix vectors;
  Vector coefficients;
};

inline SupportSet prune_support(const FeatureMatrix& rows, const Vector& coefficients) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < coefficients.size(); ++i) {
    if (std::abs(coefficients(i)) > kPruneThreshold) keep.push_back(i);
  }
  SupportSet set;
  set.vectors.resize(static_cast<Eigen::Index>(keep.size()), rows.cols());
  set.coefficients.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    set.vectors.row(static_cast<Eigen::Index>(r)) = rows.row(keep[r]);
    set.coefficients(static_cast<Eigen::Index>(r)) = coefficients(keep[r]);
  }
  return set;
}

template <typename V>
double support_score(const KernelSpec& kernel, const SupportSet& support, Eigen::Index dim,
                     const Eigen::DenseBase<V>& x) {
  if (x.size() != dim) {
    throw DimensionError("sample has dimension " + std::to_string(x.size()) + ", model expects " +
                         std::to_string(dim));
  }
  if (support.coefficients.size() == 0) {
    check_vector(kernel, x);
    return 0.0;
  }
  return support.coefficients.dot(gram_vector(kernel, support.vectors, x));
}

}  // namespace detail

// Trained slab model. Keeps every training row with its dual pair (the model
// file records all of them); predictions use only the pruned support set.
class SlabModel {
 public:
  SlabModel(FeatureMatrix training_rows, Vector alpha, Vector alpha_bar, const SlabOffsets& offsets,
            SlabTrainConfig config, SolveStatus solver_status = SolveStatus::converged, int solver_iterations = 0)
      : rows_(std::move(training_rows)),
        alpha_(std::move(alpha)),
        alpha_bar_(std::move(alpha_bar)),
        offsets_(offsets),
        config_(std::move(config)),
        solver_status_(solver_status),
        solver_iterations_(solver_iterations) {
    detail::check_duals(rows_.rows(), alpha_, alpha_bar_);
    if (rows_.rows() < 1 || rows_.cols() < 1) throw DimensionError("model needs at least one training row");
    support_ = detail::prune_support(rows_, alpha_ - alpha_bar_);
  }

  const FeatureMatrix& training_rows() const { return rows_; }
  const Vector& alpha() const { return alpha_; }
  const Vector& alpha_bar() const { return alpha_bar_; }
  const FeatureMatrix& support_vectors() const { return support_.vectors; }
  // alpha_i - alpha_bar_i for each retained support vector.
  const Vector& coefficients() const { return support_.coefficients; }
  double rho1() const { return offsets_.rho1; }
  double rho2() const { return offsets_.rho2; }
  const SlabOffsets& offsets() const { return offsets_; }
  const KernelSpec& kernel() const { return config_.kernel; }
  const SlabTrainConfig& train_config() const { return config_; }
  Eigen::Index m() const { return rows_.rows(); }
  Eigen::Index dim() const { return rows_.cols(); }
  int n_sv1() const { return offsets_.n_sv1; }
  int n_sv2() const { return offsets_.n_sv2; }
  SolveStatus solver_status() const { return solver_status_; }
  int solver_iterations() const { return solver_iterations_; }
  bool converged() const { return solver_status_ == SolveStatus::converged; }
  bool slab_order_violated() const { return offsets_.rho1 > offsets_.rho2 + 1e-8; }

 private:
  FeatureMatrix rows_;
  Vector alpha_;
  Vector alpha_bar_;
  SlabOffsets offsets_;
  SlabTrainConfig config_;
  SolveStatus solver_status_;
  int solver_iterations_;
  detail::SupportSet support_;
};

inline SlabQpProblem make_slab_problem(const GramMatrix& gram, const SlabTrainConfig& config) {
  const Eigen::Index m = gram.size();
  SlabQpProblem problem;
  problem.hessian = SlabHessian(gram.values());
  problem.c = Vector::Zero(2 * m);
  problem.a = Matrix::Zero(2, 2 * m);
  problem.a.block(0, 0, 1, m).setOnes();
  problem.a.block(1, m, 1, m).setOnes();
  problem.b = Vector(2);
  problem.b << 1.0, config.epsilon;
  problem.lower = Vector::Zero(2 * m);
  problem.upper = Vector(2 * m);
  problem.upper.head(m).setConstant(config.lower_cap(m));
  problem.upper.tail(m).setConstant(config.upper_cap(m));
  return problem;
}

template <typename M>
SlabModel train_slab(const Eigen::DenseBase<M>& rows, const SlabTrainConfig& config) {
  const Eigen::Index m = rows.rows();
  if (m < 2) throw DomainError("slab training needs at least 2 samples (one sample forces a zero-width slab)");
  config.validate(m);
  FeatureMatrix x = rows;
  const GramMatrix gram = gram_matrix(config.kernel, x);
  const SlabQpProblem problem = make_slab_problem(gram, config);
  const QpSolution sol = solve(problem, config.solver);
  if (sol.status == SolveStatus::infeasible) throw DomainError("slab dual reported infeasible");

  // Interior-point iterates are strictly inside the boxes; clip rounding noise.
  Vector alpha = sol.z.head(m).cwiseMax(0.0).cwiseMin(config.lower_cap(m));
  Vector alpha_bar = sol.z.tail(m).cwiseMax(0.0).cwiseMin(config.upper_cap(m));
  const SlabOffsets offsets = compute_offsets(gram, alpha, alpha_bar, config);
  return SlabModel(std::move(x), std::move(alpha), std::move(alpha_bar), offsets, config, sol.status,
                   sol.iterations);
}

template <typename V>
double score(const SlabModel& model, const Eigen::DenseBase<V>& x) {
  return detail::support_score(model.kernel(), detail::SupportSet{model.support_vectors(), model.coefficients()},
                               model.dim(), x);
}

// +1 iff (s - rho1)(rho2 - s) > 0. A score exactly on a plane is negative.
inline int slab_decision(double s, double rho1, double rho2) {
  const double below = s - rho1;
  const double above = rho2 - s;
  return ((below > 0.0 && above > 0.0) || (below < 0.0 && above < 0.0)) ? 1 : -1;
}

template <typename V>
int predict(const SlabModel& model, const Eigen::DenseBase<V>& x) {
  return slab_decision(score(model, x), model.rho1(), model.rho2());
}

// One-class SVM baseline.
class OcsvmModel {
 public:
  OcsvmModel(FeatureMatrix training_rows, Vector alpha, double rho, double nu, KernelSpec kernel,
             SolveStatus solver_status = SolveStatus::converged, int solver_iterations = 0)
      : rows_(std::move(training_rows)),
        alpha_(std::move(alpha)),
        rho_(rho),
        nu_(nu),
        kernel_(std::move(kernel)),
        solver_status_(solver_status),
        solver_iterations_(solver_iterations) {
    if (alpha_.size() != rows_.rows()) throw DimensionError("alpha must have one entry per training sample");
    if (rows_.rows() < 1 || rows_.cols() < 1) throw DimensionError("model needs at least one training row");
    support_ = detail::prune_support(rows_, alpha_);
  }

  const FeatureMatrix& training_rows() const { return rows_; }
  const Vector& alpha() const { return alpha_; }
  const FeatureMatrix& support_vectors() const { return support_.vectors; }
  const Vector& coefficients() const { return support_.coefficients; }
  double rho() const { return rho_; }
  double nu() const { return nu_; }
  const KernelSpec& kernel() const { return kernel_; }
  Eigen::Index m() const { return rows_.rows(); }
  Eigen::Index dim() const { return rows_.cols(); }
  SolveStatus solver_status() const { return solver_status_; }
  int solver_iterations() const { return solver_iterations_; }
  bool converged() const { return solver_status_ == SolveStatus::converged; }

 private:
  FeatureMatrix rows_;
  Vector alpha_;
  double rho_;
  double nu_;
  KernelSpec kernel_;
  SolveStatus solver_status_;
  int solver_iterations_;
  detail::SupportSet support_;
};

template <typename M>
OcsvmModel train_ocsvm(const Eigen::DenseBase<M>& rows, double nu, const KernelSpec& kernel,
                       const SolverConfig& solver = {}, double sv_bound_tolerance = 1e-6) {
  const Eigen::Index m = rows.rows();
  if (m < 1) throw DomainError("one-class SVM training needs at least 1 sample");
  if (!(nu > 0.0 && nu <= 1.0)) throw DomainError("nu must lie in (0, 1]");
  FeatureMatrix x = rows;
  const GramMatrix gram = gram_matrix(kernel, x);
  const double cap = 1.0 / (nu * static_cast<double>(m));
  Matrix a = Matrix::Ones(1, m);
  QpProblem problem = make_qp(gram.values(), Vector::Zero(m), a, Vector::Ones(1), Vector::Zero(m),
                              Vector::Constant(m, cap));
  const QpSolution sol = solve(problem, solver);
  if (sol.status == SolveStatus::infeasible) throw DomainError("one-class SVM dual reported infeasible");
  Vector alpha = sol.z.cwiseMax(0.0).cwiseMin(cap);
  const Vector scores = gram.values() * alpha;
  const auto offset = detail::plane_offset(scores, alpha, cap, sv_bound_tolerance * cap, true);
  return OcsvmModel(std::move(x), std::move(alpha), offset.value, nu, kernel, sol.status, sol.iterations);
}

template <typename V>
double score(const OcsvmModel& model, const Eigen::DenseBase<V>& x) {
  return detail::support_score(model.kernel(), detail::SupportSet{model.support_vectors(), model.coefficients()},
                               model.dim(), x);
}

// +1 iff score > rho.
template <typename V>
int ocsvm_predict(const OcsvmModel& model, const Eigen::DenseBase<V>& x) {
  return score(model, x) > model.rho() ? 1 : -1;
}

template <typename V>
int predict(const OcsvmModel& model, const Eigen::DenseBase<V>& x) {
  return ocsvm_predict(model, x);
}

// Geometric role of a training sample, read off its dual pair.
enum class KktCase {
  interior_slab,       // alpha = alpha_bar = 0
  on_lower_plane,      // 0 < alpha < cap1, alpha_bar = 0
  on_upper_plane,      // alpha = 0, 0 < alpha_bar < cap2
  below_slab_outlier,  // alpha = cap1, alpha_bar = 0
  above_slab_outlier,  // alpha = 0, alpha_bar = cap2
  invalid,             // any pattern with both duals nonzero
};

inline constexpr std::array<KktCase, 6> kAllKktCases = {KktCase::interior_slab,      KktCase::on_lower_plane,
                                                        KktCase::on_upper_plane,     KktCase::below_slab_outlier,
                                                        KktCase::above_slab_outlier, KktCase::invalid};

inline std::string_view to_string(KktCase c) {
  switch (c) {
    case KktCase::interior_slab: return "interior_slab";
    case KktCase::on_lower_plane: return "on_lower_plane";
    case KktCase::on_upper_plane: return "on_upper_plane";
    case KktCase::below_slab_outlier: return "below_slab_outlier";
    case KktCase::above_slab_outlier: return "above_slab_outlier";
    case KktCase::invalid: return "invalid";
  }
  return "unknown";
}

struct KktCaseReport {
  std::vector<KktCase> labels;
  std::array<std::size_t, 6> counts{};
  Vector scores;  // training scores from the full dual vectors
  Vector xi;      // max(0, rho1 - s)
  Vector xi_bar;  // max(0, s - rho2)

  std::size_t count(KktCase c) const { return counts[static_cast<std::size_t>(c)]; }
};

inline KktCaseReport classify_kkt_cases(const SlabModel& model, const GramMatrix& gram) {
  const Eigen::Index m = model.m();
  if (gram.size() != m) throw DimensionError("Gram matrix does not match the model's training set");
  const auto& cfg = model.train_config();
  const double cap1 = cfg.lower_cap(m), cap2 = cfg.upper_cap(m);
  const double tol1 = cfg.sv_bound_tolerance * cap1, tol2 = cfg.sv_bound_tolerance * cap2;

  enum class Level { zero, inside, cap };
  auto level = [](double v, double cap, double tol) {
    if (v <= tol) return Level::zero;
    if (v >= cap - tol) return Level::cap;
    return Level::inside;
  };

  KktCaseReport report;
  report.scores = gram.values() * (model.alpha() - model.alpha_bar());
  report.xi = (model.rho1() - report.scores.array()).cwiseMax(0.0).matrix();
  report.xi_bar = (report.scores.array() - model.rho2()).cwiseMax(0.0).matrix();
  report.labels.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const Level a = level(model.alpha()(i), cap1, tol1);
    const Level b = level(model.alpha_bar()(i), cap2, tol2);
    KktCase c = KktCase::invalid;
    if (a == Level::zero && b == Level::zero) c = KktCase::interior_slab;
    else if (a == Level::inside && b == Level::zero) c = KktCase::on_lower_plane;
    else if (a == Level::zero && b == Level::inside) c = KktCase::on_upper_plane;
    else if (a == Level::cap && b == Level::zero) c = KktCase::below_slab_outlier;
    else if (a == Level::zero && b == Level::cap) c = KktCase::above_slab_outlier;
    report.labels.push_back(c);
    ++report.counts[static_cast<std::size_t>(c)];
  }
  return report;
}

}  // namespace ocssvm
