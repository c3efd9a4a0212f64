#pragma once

// Dense primal-dual interior-point solver for convex quadratic programs
//
//   minimize    1/2 z'Qz + c'z
//   subject to  A z = b,  lower <= z <= upper
//
// using Mehrotra's predictor-corrector. Bounds may be infinite. The Hessian is
// a policy type: `DenseHessian` stores Q explicitly, while structured Hessians
// (see slab_svm.hpp) can provide a cheaper factorization of Q + diag(d).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ocssvm/errors.hpp"
#include "ocssvm/types.hpp"

namespace ocssvm {

struct SolverConfig {
  double tolerance = 1e-8;
  int max_iterations = 100;
  // Diagonal regularization of the Newton matrix; unset means 1e-10 times the
  // mean diagonal of Q.
  std::optional<double> ridge;
  double step_fraction = 0.995;
  // After convergence, fix the variables the iterate identifies as active,
  // solve the remaining equality-constrained QP directly and keep that point
  // if it certifies optimality. Interior-point iterates only approach bounds
  // at the rate of the barrier parameter; the polished point sits on them.
  bool polish = true;

  void validate() const {
    if (!(tolerance > 0.0)) throw DomainError("solver tolerance must be positive");
    if (max_iterations < 1) throw DomainError("solver max_iterations must be >= 1");
    if (!(step_fraction > 0.0 && step_fraction < 1.0)) throw DomainError("step_fraction must lie in (0, 1)");
    if (ridge && !(*ridge >= 0.0)) throw DomainError("ridge must be nonnegative");
  }
};

enum class SolveStatus { converged, max_iterations, infeasible };

inline std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

// Q stored explicitly.
class DenseHessian {
 public:
  DenseHessian() = default;
  explicit DenseHessian(Matrix q) : q_(std::move(q)) {}

  Eigen::Index size() const { return q_.rows(); }
  const Matrix& matrix() const { return q_; }
  Vector apply(const Vector& z) const { return q_ * z; }
  double mean_diagonal() const { return q_.rows() > 0 ? q_.diagonal().mean() : 0.0; }
  Matrix principal_block(const std::vector<Eigen::Index>& idx) const { return q_(idx, idx); }

  // Factorization of Q + diag(d).
  class Factor {
   public:
    explicit Factor(Matrix h) {
      llt_.compute(h);
      use_llt_ = llt_.info() == Eigen::Success;
      if (!use_llt_) ldlt_.compute(h);
    }
    Vector solve(const Vector& r) const { return use_llt_ ? Vector(llt_.solve(r)) : Vector(ldlt_.solve(r)); }

   private:
    Eigen::LLT<Matrix> llt_;
    Eigen::LDLT<Matrix> ldlt_;
    bool use_llt_ = false;
  };

  Factor factor(const Vector& d) const {
    Matrix h = q_;
    h.diagonal() += d;
    return Factor(std::move(h));
  }

 private:
  Matrix q_;
};

template <typename Hessian>
struct BasicQpProblem {
  Hessian hessian;
  Vector c;
  Matrix a;  // p x n
  Vector b;
  Vector lower;
  Vector upper;

  Eigen::Index size() const { return hessian.size(); }

  void validate() const {
    const Eigen::Index n = hessian.size();
    if (c.size() != n || lower.size() != n || upper.size() != n) {
      throw DimensionError("QP vectors must all have length n = " + std::to_string(n));
    }
    if (a.cols() != n && a.rows() > 0) throw DimensionError("equality matrix must have n columns");
    if (a.rows() != b.size()) throw DimensionError("equality matrix rows must match b");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::isnan(lower(i)) || std::isnan(upper(i)) || lower(i) > upper(i)) {
        throw DomainError("invalid box at index " + std::to_string(i));
      }
      if (lower(i) == std::numeric_limits<double>::infinity() ||
          upper(i) == -std::numeric_limits<double>::infinity()) {
        throw DomainError("empty box at index " + std::to_string(i));
      }
    }
    if (!c.allFinite() || !a.allFinite() || !b.allFinite()) throw DomainError("QP data must be finite");
  }
};

using QpProblem = BasicQpProblem<DenseHessian>;

// Builds a dense QP, symmetrizing Q. An asymmetry above 1e-12 relative to
// max|Q| is rejected rather than silently averaged away.
inline QpProblem make_qp(const Matrix& q, Vector c, Matrix a, Vector b, Vector lower, Vector upper) {
  if (q.rows() != q.cols()) throw DimensionError("Q must be square");
  if (!q.allFinite()) throw DomainError("Q must be finite");
  const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  if (q.size() > 0 && (q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw DomainError("Q is not symmetric");
  }
  if (a.size() == 0) a.resize(0, q.rows());
  QpProblem problem{DenseHessian(0.5 * (q + q.transpose())), std::move(c), std::move(a), std::move(b),
                    std::move(lower), std::move(upper)};
  problem.validate();
  return problem;
}

struct QpSolution {
  Vector z;
  Vector equality_multipliers;
  Vector bound_multipliers_lower;
  Vector bound_multipliers_upper;
  double objective = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iterations;
  bool polished = false;
  // Merit value after every accepted iteration, starting with the initial point.
  std::vector<double> merit_history;

  bool converged() const { return status == SolveStatus::converged; }
};

// All entries are max-norms of the corresponding optimality condition.
struct KktResiduals {
  double stationarity = 0.0;     // |Qz + c - A'y - lambda_l + lambda_u|
  double primal_equality = 0.0;  // |Az - b|
  double bound_violation = 0.0;  // box violation of z, negative multipliers
  double complementarity = 0.0;  // |(z - l) lambda_l|, |(u - z) lambda_u|

  double max() const { return std::max({stationarity, primal_equality, bound_violation, complementarity}); }
};

template <typename Hessian>
KktResiduals kkt_residuals(const BasicQpProblem<Hessian>& problem, const QpSolution& solution) {
  const Eigen::Index n = problem.size();
  if (solution.z.size() != n || solution.bound_multipliers_lower.size() != n ||
      solution.bound_multipliers_upper.size() != n || solution.equality_multipliers.size() != problem.b.size()) {
    throw DimensionError("solution dimensions do not match the problem");
  }
  const Vector& z = solution.z;
  const Vector& ll = solution.bound_multipliers_lower;
  const Vector& lu = solution.bound_multipliers_upper;
  KktResiduals r;
  Vector grad = problem.hessian.apply(z) + problem.c - ll + lu;
  if (problem.a.rows() > 0) grad -= problem.a.transpose() * solution.equality_multipliers;
  r.stationarity = n > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (problem.a.rows() > 0) r.primal_equality = (problem.a * z - problem.b).cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i) {
    r.bound_violation = std::max({r.bound_violation, problem.lower(i) - z(i), z(i) - problem.upper(i),
                                  -ll(i), -lu(i)});
    if (std::isfinite(problem.lower(i))) {
      r.complementarity = std::max(r.complementarity, std::abs((z(i) - problem.lower(i)) * ll(i)));
    } else {
      r.complementarity = std::max(r.complementarity, std::abs(ll(i)));
    }
    if (std::isfinite(problem.upper(i))) {
      r.complementarity = std::max(r.complementarity, std::abs((problem.upper(i) - z(i)) * lu(i)));
    } else {
      r.complementarity = std::max(r.complementarity, std::abs(lu(i)));
    }
  }
  return r;
}

namespace detail {

inline Vector clamp_to_box(Vector z, const Vector& lower, const Vector& upper) {
  return z.cwiseMax(lower).cwiseMin(upper);
}

// Alternating projections between the box and {z : Az = b}, starting from the
// box-projected least-squares point. Returns the final box-projected iterate.
inline Vector find_feasible_point(const Matrix& a, const Vector& b, const Vector& lower, const Vector& upper,
                                  const Vector& start, const Eigen::CompleteOrthogonalDecomposition<Matrix>& a_cod,
                                  double tolerance) {
  Vector z = start;
  if (a.rows() > 0) z += a_cod.solve(Vector(b - a * z));
  z = clamp_to_box(std::move(z), lower, upper);
  if (a.rows() == 0) return z;
  for (int it = 0; it < 5000; ++it) {
    const Vector r = b - a * z;
    if (r.cwiseAbs().maxCoeff() <= tolerance) break;
    z = clamp_to_box(z + a_cod.solve(r), lower, upper);
  }
  return z;
}

enum class BoundState { free, at_lower, at_upper, pinned };

// Solves the QP with every non-free variable held at its bound, as a
// correction to the guess (z, y): the reduced KKT matrix can be badly
// conditioned, and solving only for the small correction keeps the error in
// proportion to it. Returns false if the system cannot be solved.
template <typename Hessian>
bool solve_reduced(const BasicQpProblem<Hessian>& problem, const std::vector<BoundState>& state, double ridge,
                   Vector& z, Vector& y) {
  const Eigen::Index n = problem.size();
  const Eigen::Index p = problem.b.size();
  std::vector<Eigen::Index> free_idx;
  for (Eigen::Index i = 0; i < n; ++i) {
    switch (state[static_cast<std::size_t>(i)]) {
      case BoundState::free: free_idx.push_back(i); break;
      case BoundState::at_lower:
      case BoundState::pinned: z(i) = problem.lower(i); break;
      case BoundState::at_upper: z(i) = problem.upper(i); break;
    }
  }
  const auto f = static_cast<Eigen::Index>(free_idx.size());
  // A dense reduced system beyond this size costs more than the whole
  // interior-point run; such iterates are left unpolished.
  if (f > 1200) return false;
  // [Q_FF  A_F'] [ dz_F] = -[(Qz + c - A'y)_F]
  // [A_F   0   ] [-dy  ]    [ Az - b        ]
  Matrix kkt = Matrix::Zero(f + p, f + p);
  kkt.topLeftCorner(f, f) = problem.hessian.principal_block(free_idx);
  // Same regularization as the Newton matrix; keeps rank-deficient kernels solvable.
  kkt.topLeftCorner(f, f).diagonal().array() += ridge;
  for (Eigen::Index k = 0; k < f; ++k) {
    const Eigen::Index i = free_idx[static_cast<std::size_t>(k)];
    for (Eigen::Index r = 0; r < p; ++r) {
      kkt(f + r, k) = problem.a(r, i);
      kkt(k, f + r) = problem.a(r, i);
    }
  }
  const Eigen::PartialPivLU<Matrix> lu(kkt);
  auto residual = [&]() {
    Vector grad = problem.hessian.apply(z) + problem.c;
    if (p > 0) grad -= problem.a.transpose() * y;
    Vector r(f + p);
    for (Eigen::Index k = 0; k < f; ++k) r(k) = -grad(free_idx[static_cast<std::size_t>(k)]);
    if (p > 0) r.tail(p) = problem.b - problem.a * z;
    return r;
  };
  for (int pass = 0; pass < 2; ++pass) {
    const Vector x = lu.solve(residual());
    if (!x.allFinite()) return false;
    for (Eigen::Index k = 0; k < f; ++k) z(free_idx[static_cast<std::size_t>(k)]) += x(k);
    if (p > 0) y -= x.tail(p);
  }
  return true;
}

// Active-set refinement of a converged interior-point iterate (a primal
// active-set method started from the iterate). Boxed variables within
// `band_fraction` of the box width of a bound start on it, one-sided ones when their multiplier
// exceeds their slack. Each round moves toward the optimum of the reduced
// problem; a blocking bound is added, otherwise the bound with the most
// negative multiplier is released. The result must certify optimality within
// `tol` and not raise the objective.
template <typename Hessian>
std::optional<QpSolution> polish(const BasicQpProblem<Hessian>& problem, const QpSolution& start, double tol,
                                 double ridge, double band_fraction = 1e-3, int max_rounds = 60) {
  const Eigen::Index n = problem.size();
  const Eigen::Index p = problem.b.size();
  const Vector& lower = problem.lower;
  const Vector& upper = problem.upper;
  std::vector<BoundState> state(static_cast<std::size_t>(n), BoundState::free);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& st = state[static_cast<std::size_t>(i)];
    const double lo = lower(i), hi = upper(i), zi = start.z(i);
    if (lo == hi) {
      st = BoundState::pinned;
    } else if (std::isfinite(lo) && std::isfinite(hi)) {
      const double band = band_fraction * (hi - lo);
      if (zi - lo < band && zi - lo <= hi - zi) st = BoundState::at_lower;
      else if (hi - zi < band) st = BoundState::at_upper;
    } else if (std::isfinite(lo) && start.bound_multipliers_lower(i) > zi - lo) {
      st = BoundState::at_lower;
    } else if (std::isfinite(hi) && start.bound_multipliers_upper(i) > hi - zi) {
      st = BoundState::at_upper;
    }
  }

  Vector z = start.z.cwiseMax(lower).cwiseMin(upper);
  Vector y = start.equality_multipliers;

  for (int round = 0; round < max_rounds; ++round) {
    Vector trial = z, trial_y = y;
    if (!solve_reduced(problem, state, ridge, trial, trial_y)) return std::nullopt;
    // Variables just placed on a bound were moved there by solve_reduced.
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[static_cast<std::size_t>(i)] != BoundState::free) z(i) = trial(i);
    }

    double step = 1.0;
    Eigen::Index blocking = -1;
    BoundState blocking_state = BoundState::free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[static_cast<std::size_t>(i)] != BoundState::free) continue;
      const double dz = trial(i) - z(i);
      if (dz < 0.0 && trial(i) < lower(i)) {
        const double t = std::max(0.0, (lower(i) - z(i)) / dz);
        if (t < step) step = t, blocking = i, blocking_state = BoundState::at_lower;
      } else if (dz > 0.0 && trial(i) > upper(i)) {
        const double t = std::max(0.0, (upper(i) - z(i)) / dz);
        if (t < step) step = t, blocking = i, blocking_state = BoundState::at_upper;
      }
    }
    if (blocking >= 0) {
      const Vector full = trial;
      z += step * (trial - z);
      y = trial_y;
      state[static_cast<std::size_t>(blocking)] = blocking_state;
      z(blocking) = blocking_state == BoundState::at_lower ? lower(blocking) : upper(blocking);
      // A negligible step means the start misplaced many variables; bind every
      // one the reduced optimum pushes out of the box at once.
      if (step < 1e-3) {
        for (Eigen::Index i = 0; i < n; ++i) {
          auto& st = state[static_cast<std::size_t>(i)];
          if (st != BoundState::free) continue;
          if (full(i) < lower(i)) st = BoundState::at_lower, z(i) = lower(i);
          else if (full(i) > upper(i)) st = BoundState::at_upper, z(i) = upper(i);
        }
      }
      continue;
    }
    z = trial;
    y = trial_y;

    Vector grad = problem.hessian.apply(z) + problem.c;
    if (p > 0) grad -= problem.a.transpose() * y;
    QpSolution cand;
    cand.z = z;
    cand.equality_multipliers = y;
    cand.bound_multipliers_lower = Vector::Zero(n);
    cand.bound_multipliers_upper = Vector::Zero(n);
    double worst = -tol;
    Eigen::Index release = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      switch (state[static_cast<std::size_t>(i)]) {
        case BoundState::pinned:
          cand.bound_multipliers_lower(i) = std::max(0.0, grad(i));
          cand.bound_multipliers_upper(i) = std::max(0.0, -grad(i));
          break;
        case BoundState::at_lower:
          cand.bound_multipliers_lower(i) = grad(i);
          if (grad(i) < worst) worst = grad(i), release = i;
          break;
        case BoundState::at_upper:
          cand.bound_multipliers_upper(i) = -grad(i);
          if (-grad(i) < worst) worst = -grad(i), release = i;
          break;
        case BoundState::free: break;
      }
    }
    if (release >= 0) {
      state[static_cast<std::size_t>(release)] = BoundState::free;
      continue;
    }
    cand.objective = 0.5 * z.dot(problem.hessian.apply(z)) + problem.c.dot(z);
    if (kkt_residuals(problem, cand).max() > tol) return std::nullopt;
    if (cand.objective > start.objective + tol * (1.0 + std::abs(start.objective))) return std::nullopt;
    return cand;
  }
  return std::nullopt;
}

}  // namespace detail

template <typename Hessian>
QpSolution solve(const BasicQpProblem<Hessian>& problem, const SolverConfig& config = {}) {
  problem.validate();
  config.validate();
  const Eigen::Index n = problem.size();
  const Eigen::Index p = problem.b.size();
  const Matrix& a = problem.a;
  const Vector& lower = problem.lower;
  const Vector& upper = problem.upper;
  const double tol = config.tolerance;

  Eigen::Array<bool, Eigen::Dynamic, 1> has_lower(n), has_upper(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    has_lower(i) = std::isfinite(lower(i));
    has_upper(i) = std::isfinite(upper(i));
  }
  const Eigen::Index bound_count = has_lower.count() + has_upper.count();

  const double ridge = config.ridge.value_or(1e-10 * std::abs(problem.hessian.mean_diagonal()));

  QpSolution sol;
  sol.z = Vector::Zero(n);
  sol.equality_multipliers = Vector::Zero(p);
  sol.bound_multipliers_lower = Vector::Zero(n);
  sol.bound_multipliers_upper = Vector::Zero(n);

  // Starting point: box midpoint (or a point near the finite bound).
  Vector start(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (has_lower(i) && has_upper(i)) start(i) = 0.5 * (lower(i) + upper(i));
    else if (has_lower(i)) start(i) = lower(i) + 1.0;
    else if (has_upper(i)) start(i) = upper(i) - 1.0;
    else start(i) = 0.0;
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> a_cod;
  if (p > 0) a_cod.compute(a);

  // Feasibility screen. The threshold is looser than `tol` because alternating
  // projections converge only linearly when the feasible set is thin.
  const double feas_tol = std::max(tol, 1e-6 * (1.0 + (p > 0 ? problem.b.cwiseAbs().maxCoeff() : 0.0)));
  {
    const Vector feasible = detail::find_feasible_point(a, problem.b, lower, upper, start, a_cod, tol);
    if (p > 0 && (a * feasible - problem.b).cwiseAbs().maxCoeff() > feas_tol) {
      sol.z = feasible;
      sol.objective = 0.5 * feasible.dot(problem.hessian.apply(feasible)) + problem.c.dot(feasible);
      sol.status = SolveStatus::infeasible;
      return sol;
    }
  }

  // Least-squares projection onto Az = b, then push strictly inside the box.
  Vector z = start;
  if (p > 0) z += a_cod.solve(Vector(problem.b - a * z));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (has_lower(i) && has_upper(i)) {
      const double push = 1e-3 * (upper(i) - lower(i));
      if (push > 0.0) {
        z(i) = std::clamp(z(i), lower(i) + push, upper(i) - push);
      }
    } else if (has_lower(i)) {
      z(i) = std::max(z(i), lower(i) + 1e-3 * std::max(1.0, std::abs(lower(i))));
    } else if (has_upper(i)) {
      z(i) = std::min(z(i), upper(i) - 1e-3 * std::max(1.0, std::abs(upper(i))));
    }
  }

  // Fixed variables (lower == upper) are pinned and removed from the barrier.
  Eigen::Array<bool, Eigen::Dynamic, 1> fixed(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    fixed(i) = has_lower(i) && has_upper(i) && lower(i) == upper(i);
    if (fixed(i)) z(i) = lower(i);
  }

  Vector y = Vector::Zero(p);
  Vector lam_l = Vector::Zero(n), lam_u = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (has_lower(i) && !fixed(i)) lam_l(i) = 1.0;
    if (has_upper(i) && !fixed(i)) lam_u(i) = 1.0;
  }
  const Eigen::Index barrier_count = bound_count - 2 * fixed.count();

  auto slack_l = [&](const Vector& zz) {
    Vector s = Vector::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (has_lower(i) && !fixed(i)) s(i) = zz(i) - lower(i);
    }
    return s;
  };
  auto slack_u = [&](const Vector& zz) {
    Vector s = Vector::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (has_upper(i) && !fixed(i)) s(i) = upper(i) - zz(i);
    }
    return s;
  };
  auto dual_residual = [&](const Vector& zz, const Vector& yy, const Vector& ll, const Vector& lu) {
    Vector r = problem.hessian.apply(zz) + problem.c - ll + lu;
    if (p > 0) r -= a.transpose() * yy;
    // Multipliers of pinned variables absorb their stationarity exactly.
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fixed(i)) r(i) = 0.0;
    }
    return r;
  };
  auto mean_complementarity = [&](const Vector& sl, const Vector& sll, const Vector& su, const Vector& suu) {
    if (barrier_count == 0) return 0.0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fixed(i)) continue;
      if (has_lower(i)) total += sl(i) * sll(i);
      if (has_upper(i)) total += su(i) * suu(i);
    }
    return total / static_cast<double>(barrier_count);
  };
  auto inf_norm = [](const Vector& v) { return v.size() > 0 ? v.cwiseAbs().maxCoeff() : 0.0; };
  auto merit = [&](const Vector& rd, const Vector& rp, double mu) { return inf_norm(rd) + inf_norm(rp) + mu; };

  // Largest step in (0, 1] keeping v + step * dv > 0 on the masked entries.
  auto max_step = [&](const Vector& v, const Vector& dv, const Eigen::Array<bool, Eigen::Dynamic, 1>& mask) {
    double step = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (mask(i) && !fixed(i) && dv(i) < 0.0) step = std::min(step, -v(i) / dv(i));
    }
    return step;
  };

  auto finish = [&](SolveStatus status, int iterations) {
    // Recover multipliers for pinned variables from stationarity.
    Vector grad = problem.hessian.apply(z) + problem.c - lam_l + lam_u;
    if (p > 0) grad -= a.transpose() * y;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!fixed(i)) continue;
      lam_l(i) = std::max(0.0, grad(i));
      lam_u(i) = std::max(0.0, -grad(i));
    }
    sol.z = z;
    sol.equality_multipliers = y;
    sol.bound_multipliers_lower = lam_l;
    sol.bound_multipliers_upper = lam_u;
    sol.objective = 0.5 * z.dot(problem.hessian.apply(z)) + problem.c.dot(z);
    sol.iterations = iterations;
    sol.status = status;
    return sol;
  };

  auto residuals_ok = [&](double target) {
    QpSolution probe;
    probe.z = z;
    probe.equality_multipliers = y;
    probe.bound_multipliers_lower = lam_l;
    probe.bound_multipliers_upper = lam_u;
    if (fixed.any()) {
      Vector grad = problem.hessian.apply(z) + problem.c - lam_l + lam_u;
      if (p > 0) grad -= a.transpose() * y;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!fixed(i)) continue;
        probe.bound_multipliers_lower(i) = std::max(0.0, grad(i));
        probe.bound_multipliers_upper(i) = std::max(0.0, -grad(i));
      }
    }
    return kkt_residuals(problem, probe).max() <= target;
  };

  // Active-set refinement of the current iterate. The result is returned only
  // when it certifies optimality at `tol`, so it is safe to try from an
  // iterate that has not converged.
  auto try_polish = [&](int iter) -> std::optional<QpSolution> {
    if (!config.polish) return std::nullopt;
    const QpSolution start_point = finish(SolveStatus::converged, iter);
    // Wide bands suit ill-conditioned problems whose small duals decay slowly;
    // narrower ones recover variables that sit close to a bound but are free.
    for (const double band : {1e-1, 1e-2, 1e-3}) {
      if (auto refined = detail::polish(problem, start_point, tol, ridge, band)) {
        refined->iterations = iter;
        refined->status = SolveStatus::converged;
        refined->merit_history = start_point.merit_history;
        refined->polished = true;
        return refined;
      }
    }
    return std::nullopt;
  };

  // Residual target of the iteration; tightened below `tol` when polishing
  // needs a better-separated iterate. The latest iterate meeting a target is kept.
  double target = tol;
  const double kTightestTarget = std::min(tol, 1e-13);
  std::optional<QpSolution> fallback;

  Vector sl = slack_l(z), su = slack_u(z);
  Vector rd = dual_residual(z, y, lam_l, lam_u);
  Vector rp = p > 0 ? Vector(a * z - problem.b) : Vector();
  double mu = mean_complementarity(sl, lam_l, su, lam_u);
  double current_merit = merit(rd, rp, mu);
  sol.merit_history.push_back(current_merit);

  // Solves the reduced Newton system
  //   (Q + D) dz - A' dy = g,   A dz = h.
  struct NewtonStep {
    Vector dz, dy;
  };

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    Vector d = Vector::Constant(n, ridge);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fixed(i)) {
        // Decouples pinned variables: their Newton component is ~0.
        d(i) = 1e30;
        continue;
      }
      if (has_lower(i)) d(i) += lam_l(i) / sl(i);
      if (has_upper(i)) d(i) += lam_u(i) / su(i);
    }
    const auto factor = problem.hessian.factor(d);

    Matrix h_inv_at;  // (Q + D)^-1 A'
    Matrix schur;
    Eigen::CompleteOrthogonalDecomposition<Matrix> schur_cod;
    if (p > 0) {
      h_inv_at.resize(n, p);
      for (Eigen::Index k = 0; k < p; ++k) {
        Vector col = a.row(k).transpose();
        for (Eigen::Index i = 0; i < n; ++i) {
          if (fixed(i)) col(i) = 0.0;
        }
        Vector sol_col = factor.solve(col);
        for (Eigen::Index i = 0; i < n; ++i) {
          if (fixed(i)) sol_col(i) = 0.0;
        }
        h_inv_at.col(k) = sol_col;
      }
      schur = a * h_inv_at;
      schur_cod.compute(schur);
    }

    auto newton = [&](const Vector& rl, const Vector& ru) {
      Vector g = -rd;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (fixed(i)) {
          g(i) = 0.0;
          continue;
        }
        if (has_lower(i)) g(i) += rl(i) / sl(i);
        if (has_upper(i)) g(i) -= ru(i) / su(i);
      }
      Vector h_inv_g = factor.solve(g);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (fixed(i)) h_inv_g(i) = 0.0;
      }
      NewtonStep step;
      if (p > 0) {
        const Vector rhs = -rp - a * h_inv_g;
        step.dy = schur_cod.solve(rhs);
        step.dz = h_inv_g + h_inv_at * step.dy;
      } else {
        step.dy = Vector();
        step.dz = h_inv_g;
      }
      return step;
    };
    auto multiplier_steps = [&](const Vector& dz, const Vector& rl, const Vector& ru, Vector& dl, Vector& du) {
      dl = Vector::Zero(n);
      du = Vector::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (fixed(i)) continue;
        if (has_lower(i)) dl(i) = (rl(i) - lam_l(i) * dz(i)) / sl(i);
        if (has_upper(i)) du(i) = (ru(i) + lam_u(i) * dz(i)) / su(i);
      }
    };
    auto step_limit = [&](const Vector& dz, const Vector& dl, const Vector& du) {
      const Vector neg_dz = -dz;
      return std::min({max_step(sl, dz, has_lower), max_step(su, neg_dz, has_upper),
                       max_step(lam_l, dl, has_lower), max_step(lam_u, du, has_upper)});
    };

    // Predictor.
    Vector rl = Vector::Zero(n), ru = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fixed(i)) continue;
      if (has_lower(i)) rl(i) = -sl(i) * lam_l(i);
      if (has_upper(i)) ru(i) = -su(i) * lam_u(i);
    }
    NewtonStep affine = newton(rl, ru);
    Vector dl_aff, du_aff;
    multiplier_steps(affine.dz, rl, ru, dl_aff, du_aff);

    NewtonStep step = affine;
    Vector dl = dl_aff, du = du_aff;
    if (barrier_count > 0) {
      const double alpha_aff = step_limit(affine.dz, dl_aff, du_aff);
      const double mu_aff = mean_complementarity(sl + alpha_aff * affine.dz, lam_l + alpha_aff * dl_aff,
                                                 su - alpha_aff * affine.dz, lam_u + alpha_aff * du_aff);
      const double ratio = mu > 0.0 ? mu_aff / mu : 0.0;
      const double sigma = std::clamp(ratio * ratio * ratio, 0.0, 1.0);

      // Corrector.
      for (Eigen::Index i = 0; i < n; ++i) {
        if (fixed(i)) continue;
        if (has_lower(i)) rl(i) = sigma * mu - sl(i) * lam_l(i) - affine.dz(i) * dl_aff(i);
        if (has_upper(i)) ru(i) = sigma * mu - su(i) * lam_u(i) + affine.dz(i) * du_aff(i);
      }
      step = newton(rl, ru);
      multiplier_steps(step.dz, rl, ru, dl, du);
    }

    double alpha = std::min(1.0, config.step_fraction * step_limit(step.dz, dl, du));
    if (barrier_count == 0) alpha = 1.0;

    // Backtrack until the merit does not increase.
    Vector z_new, y_new, ll_new, lu_new, sl_new, su_new, rd_new, rp_new;
    double mu_new = 0.0, merit_new = 0.0;
    bool accepted = false;
    for (int tries = 0; tries < 40; ++tries) {
      z_new = z + alpha * step.dz;
      y_new = p > 0 ? Vector(y + alpha * step.dy) : y;
      ll_new = lam_l + alpha * dl;
      lu_new = lam_u + alpha * du;
      sl_new = slack_l(z_new);
      su_new = slack_u(z_new);
      rd_new = dual_residual(z_new, y_new, ll_new, lu_new);
      rp_new = p > 0 ? Vector(a * z_new - problem.b) : Vector();
      mu_new = mean_complementarity(sl_new, ll_new, su_new, lu_new);
      merit_new = merit(rd_new, rp_new, mu_new);
      if (merit_new <= current_merit) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // No descent available at working precision; keep the current iterate.
      if (fallback) return *std::move(fallback);
      if (residuals_ok(tol)) return finish(SolveStatus::converged, iter);
      if (auto refined = try_polish(iter)) return *std::move(refined);
      return finish(SolveStatus::max_iterations, iter);
    }

    z = std::move(z_new);
    y = std::move(y_new);
    lam_l = std::move(ll_new);
    lam_u = std::move(lu_new);
    sl = std::move(sl_new);
    su = std::move(su_new);
    rd = std::move(rd_new);
    rp = std::move(rp_new);
    mu = mu_new;
    current_merit = merit_new;
    sol.merit_history.push_back(current_merit);

    if (!residuals_ok(target)) {
      // Stagnation: the merit has barely moved over the last few iterations.
      constexpr std::size_t kWindow = 8;
      const auto& hist = sol.merit_history;
      if (!fallback && hist.size() > kWindow && hist.back() > 0.99 * hist[hist.size() - 1 - kWindow]) {
        if (auto refined = try_polish(iter)) return *std::move(refined);
        return finish(SolveStatus::max_iterations, iter);
      }
      continue;
    }
    QpSolution converged = finish(SolveStatus::converged, iter);
    if (!config.polish) return converged;
    if (auto refined = try_polish(iter)) return *std::move(refined);
    fallback = std::move(converged);
    // Identification failed: iterate further along the central path, where
    // active and inactive bounds separate more clearly, and try again.
    if (target <= kTightestTarget) return *std::move(fallback);
    target = std::max(kTightestTarget, target * 1e-2);
  }
  if (fallback) return *std::move(fallback);
  return finish(SolveStatus::max_iterations, config.max_iterations);
}

}  // namespace ocssvm
