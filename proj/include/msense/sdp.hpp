#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace msense::sdp {

enum class SolverStatus {
  optimal,
  max_iterations,
  numerical_trouble,
  infeasible_start,
};

const char* to_string(SolverStatus status);

/// One PSD constraint F0 + sum_i x_i coeff_i >= 0; only the variables that
/// actually touch the block are listed.
struct Block {
  Eigen::MatrixXd f0;
  std::vector<std::pair<int, Eigen::MatrixXd>> terms;
};

/// min c'x subject to every block staying positive semidefinite.
struct Problem {
  int num_vars = 0;
  Eigen::VectorXd objective;
  std::vector<Block> blocks;
};

struct Options {
  double gap_tol = 1e-8;    // relative duality gap
  double feas_tol = 1e-8;   // relative dual-constraint residual
  int max_iterations = 100;
  bool verbose = false;
};

struct Result {
  Eigen::VectorXd x;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;
  double relative_gap = 0.0;
  double dual_residual = 0.0;
  SolverStatus status = SolverStatus::numerical_trouble;
  int iterations = 0;
  double min_slack_eigenvalue = 0.0;
};

/// Evaluate the slack matrices F_b(x).
std::vector<Eigen::MatrixXd> evaluate_blocks(const Problem& problem,
                                             const Eigen::VectorXd& x);

/// Smallest slack eigenvalue over all blocks (feasibility audit).
double min_slack_eigenvalue(const Problem& problem, const Eigen::VectorXd& x);

/// Primal-dual interior-point solve from a strictly feasible x0
/// (HKM direction, Mehrotra predictor-corrector).
Result solve(const Problem& problem, const Eigen::VectorXd& x0,
             const Options& options = {});

}  // namespace msense::sdp
