#pragma once

#include <random>

#include "ocssvm/qp_solver.hpp"

namespace ocssvm::testing {

struct RandomQp {
  Eigen::MatrixXd q;
  Eigen::VectorXd c;
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

// Strictly convex QP with n <= max_n, p <= min(2, n), and a feasible point
// drawn strictly inside the box.
inline RandomQp random_strictly_convex_qp(std::mt19937_64& rng, int max_n = 8) {
  std::uniform_int_distribution<int> n_dist(1, max_n);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = n_dist(rng);
  std::uniform_int_distribution<int> p_dist(0, std::min(2, n));
  const int p = p_dist(rng);

  RandomQp qp;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = normal(rng);
  qp.q = m.transpose() * m + 0.1 * Eigen::MatrixXd::Identity(n, n);
  qp.c.resize(n);
  qp.lower.resize(n);
  qp.upper.resize(n);
  Eigen::VectorXd inside(n);
  for (int i = 0; i < n; ++i) {
    qp.c(i) = 3.0 * normal(rng);
    qp.lower(i) = -2.0 * unit(rng) - 0.1;
    qp.upper(i) = 2.0 * unit(rng) + 0.1;
    inside(i) = qp.lower(i) + (0.1 + 0.8 * unit(rng)) * (qp.upper(i) - qp.lower(i));
  }
  qp.a.resize(p, n);
  for (int k = 0; k < p; ++k)
    for (int i = 0; i < n; ++i) qp.a(k, i) = normal(rng);
  qp.b = qp.a * inside;
  return qp;
}

inline QpProblem to_problem(const RandomQp& qp) {
  return make_qp(qp.q, qp.c, qp.a, qp.b, qp.lower, qp.upper);
}

}  // namespace ocssvm::testing
