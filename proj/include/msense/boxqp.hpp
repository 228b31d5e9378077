#pragma once

#include <Eigen/Dense>

namespace msense::boxqp {

struct Options {
  double kkt_tol = 1e-8;  // relative first-order optimality
  int max_iterations = 300;
};

struct Result {
  Eigen::VectorXd x;
  double kkt_residual = 0.0;  // relative to the gradient scale
  int iterations = 0;
  bool converged = false;
};

/// min 1/2 x' H x + g' x subject to x >= lower, H symmetric PSD.
/// Two-metric projected Newton with Armijo backtracking; active
/// coordinates land exactly on their bounds.
Result solve_lower_bounded(const Eigen::MatrixXd& hessian,
                           const Eigen::VectorXd& gradient_at_zero,
                           const Eigen::VectorXd& lower,
                           const Eigen::VectorXd& start,
                           const Options& options = {});

}  // namespace msense::boxqp
