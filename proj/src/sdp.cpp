#include "msense/sdp.hpp"

#include <cmath>
#include <iostream>
#include <limits>

#include "msense/errors.hpp"

namespace msense::sdp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double trace_dot(const MatrixXd& a, const MatrixXd& b) {
  return (a.array() * b.array()).sum();
}

/// Largest alpha in (0, 1] with S + alpha * dS staying PSD, through the
/// Cholesky-whitened eigenvalue of dS.
double max_step(const std::vector<Eigen::LLT<MatrixXd>>& chol,
                const std::vector<MatrixXd>& ds) {
  double alpha = 1.0;
  for (std::size_t b = 0; b < ds.size(); ++b) {
    const auto& llt = chol[b];
    const MatrixXd l_inv_ds =
        llt.matrixL().solve(ds[b]);
    const MatrixXd whitened =
        llt.matrixL().solve(l_inv_ds.transpose()).transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(
        (whitened + whitened.transpose()) / 2.0);
    const double lmin = eig.eigenvalues().minCoeff();
    if (lmin < 0.0) alpha = std::min(alpha, -1.0 / lmin);
  }
  return alpha;
}

}  // namespace

const char* to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::optimal: return "optimal";
    case SolverStatus::max_iterations: return "max_iterations";
    case SolverStatus::numerical_trouble: return "numerical_trouble";
    case SolverStatus::infeasible_start: return "infeasible_start";
  }
  return "unknown";
}

std::vector<MatrixXd> evaluate_blocks(const Problem& problem,
                                      const VectorXd& x) {
  std::vector<MatrixXd> out;
  out.reserve(problem.blocks.size());
  for (const auto& block : problem.blocks) {
    MatrixXd s = block.f0;
    for (const auto& [idx, coeff] : block.terms) {
      s += x[idx] * coeff;
    }
    out.push_back(std::move(s));
  }
  return out;
}

double min_slack_eigenvalue(const Problem& problem, const VectorXd& x) {
  double lmin = std::numeric_limits<double>::infinity();
  for (const auto& s : evaluate_blocks(problem, x)) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s);
    lmin = std::min(lmin, eig.eigenvalues().minCoeff());
  }
  return lmin;
}

Result solve(const Problem& problem, const VectorXd& x0,
             const Options& options) {
  const int n = problem.num_vars;
  const std::size_t nb = problem.blocks.size();
  if (x0.size() != n || problem.objective.size() != n) {
    throw DomainError("sdp: dimension mismatch");
  }

  Result res;
  res.x = x0;

  double total_dim = 0.0;
  for (const auto& block : problem.blocks) total_dim += block.f0.rows();

  std::vector<MatrixXd> slack = evaluate_blocks(problem, res.x);
  std::vector<MatrixXd> dual;
  dual.reserve(nb);
  for (const auto& s : slack) {
    // Cholesky certifies strict feasibility; it resolves small pivots that
    // an eigensolver loses next to large ones.
    Eigen::LLT<MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) {
      res.status = SolverStatus::infeasible_start;
      return res;
    }
    dual.push_back(MatrixXd::Identity(s.rows(), s.cols()));
  }

  const double c_scale = 1.0 + problem.objective.cwiseAbs().maxCoeff();

  std::vector<Eigen::LLT<MatrixXd>> chol_s(nb), chol_y(nb);
  std::vector<MatrixXd> s_inv(nb);
  bool numerical_trouble = false;

  VectorXd best_x = res.x;
  double best_score = std::numeric_limits<double>::infinity();
  double best_pobj = 0.0, best_dobj = 0.0, best_gap = 0.0, best_relgap = 0.0,
         best_dres = 0.0;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    res.iterations = iter;

    // factor slacks and duals
    bool ok = true;
    for (std::size_t b = 0; b < nb; ++b) {
      chol_s[b].compute(slack[b]);
      chol_y[b].compute(dual[b]);
      if (chol_s[b].info() != Eigen::Success ||
          chol_y[b].info() != Eigen::Success) {
        ok = false;
        break;
      }
      s_inv[b] = chol_s[b].solve(MatrixXd::Identity(slack[b].rows(),
                                                    slack[b].cols()));
    }
    if (!ok) {
      numerical_trouble = true;
      break;
    }

    double mu = 0.0;
    for (std::size_t b = 0; b < nb; ++b) mu += trace_dot(slack[b], dual[b]);
    const double gap = mu;
    mu /= total_dim;

    // objective values and dual residual
    res.primal_objective = problem.objective.dot(res.x);
    res.dual_objective = 0.0;
    VectorXd a = VectorXd::Zero(n);  // a_i = <F_i, Y>
    VectorXd g = VectorXd::Zero(n);  // g_i = <F_i, S^-1>
    for (std::size_t b = 0; b < nb; ++b) {
      res.dual_objective -= trace_dot(problem.blocks[b].f0, dual[b]);
      for (const auto& [idx, coeff] : problem.blocks[b].terms) {
        a[idx] += trace_dot(coeff, dual[b]);
        g[idx] += trace_dot(coeff, s_inv[b]);
      }
    }
    res.gap = gap;
    res.relative_gap =
        gap / (1.0 + std::abs(res.primal_objective) +
               std::abs(res.dual_objective));
    res.dual_residual = (problem.objective - a).cwiseAbs().maxCoeff() / c_scale;

    if (options.verbose) {
      std::cerr << "sdp iter " << iter << " pobj " << res.primal_objective
                << " dobj " << res.dual_objective << " relgap "
                << res.relative_gap << " dres " << res.dual_residual << "\n";
    }
    const double score = std::max(res.relative_gap, res.dual_residual);
    if (score < best_score) {
      best_score = score;
      best_x = res.x;
      best_pobj = res.primal_objective;
      best_dobj = res.dual_objective;
      best_gap = res.gap;
      best_relgap = res.relative_gap;
      best_dres = res.dual_residual;
    }
    if (res.relative_gap <= options.gap_tol &&
        res.dual_residual <= options.feas_tol) {
      res.status = SolverStatus::optimal;
      res.min_slack_eigenvalue = min_slack_eigenvalue(problem, res.x);
      return res;
    }

    // Schur complement matrix M_ij = sum_b <A_i, S^-1 A_j Y>
    MatrixXd schur = MatrixXd::Zero(n, n);
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& terms = problem.blocks[b].terms;
      for (const auto& [j, coeff_j] : terms) {
        const MatrixXd t = s_inv[b] * coeff_j * dual[b];
        for (const auto& [i, coeff_i] : terms) {
          schur(i, j) += trace_dot(coeff_i, t);
        }
      }
    }
    // The Schur system grows very ill-conditioned near optimality for
    // epigraph problems; partial-pivot LU still yields usable directions,
    // so only a non-finite solve aborts.
    Eigen::PartialPivLU<MatrixXd> schur_lu(schur);

    auto direction = [&](double sigma_mu, const std::vector<MatrixXd>* corr_s,
                         const std::vector<MatrixXd>* corr_y,
                         VectorXd& dx_out, std::vector<MatrixXd>& ds_out,
                         std::vector<MatrixXd>& dy_out) {
      VectorXd rhs = sigma_mu * g - problem.objective;
      if (corr_s != nullptr) {
        for (std::size_t b = 0; b < nb; ++b) {
          const MatrixXd h = s_inv[b] * (*corr_s)[b] * (*corr_y)[b];
          for (const auto& [idx, coeff] : problem.blocks[b].terms) {
            rhs[idx] -= trace_dot(coeff, h);
          }
        }
      }
      dx_out = schur_lu.solve(rhs);
      ds_out.assign(nb, MatrixXd());
      dy_out.assign(nb, MatrixXd());
      for (std::size_t b = 0; b < nb; ++b) {
        MatrixXd ds = MatrixXd::Zero(slack[b].rows(), slack[b].cols());
        for (const auto& [idx, coeff] : problem.blocks[b].terms) {
          ds += dx_out[idx] * coeff;
        }
        MatrixXd dy = sigma_mu * s_inv[b] - dual[b] - s_inv[b] * ds * dual[b];
        if (corr_s != nullptr) {
          dy -= s_inv[b] * (*corr_s)[b] * (*corr_y)[b];
        }
        dy = ((dy + dy.transpose()) / 2.0).eval();
        ds_out[b] = std::move(ds);
        dy_out[b] = std::move(dy);
      }
    };

    // predictor
    VectorXd dx_aff;
    std::vector<MatrixXd> ds_aff, dy_aff;
    direction(0.0, nullptr, nullptr, dx_aff, ds_aff, dy_aff);
    if (!dx_aff.allFinite()) {
      numerical_trouble = true;
      break;
    }
    const double ap_aff = max_step(chol_s, ds_aff);
    const double ad_aff = max_step(chol_y, dy_aff);
    double mu_aff = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      mu_aff += trace_dot(slack[b] + ap_aff * ds_aff[b],
                          dual[b] + ad_aff * dy_aff[b]);
    }
    mu_aff /= total_dim;
    double sigma = std::pow(std::max(mu_aff, 0.0) / mu, 3.0);
    sigma = std::min(1.0, std::max(sigma, 1e-10));

    // corrector
    VectorXd dx;
    std::vector<MatrixXd> ds, dy;
    direction(sigma * mu, &ds_aff, &dy_aff, dx, ds, dy);
    if (!dx.allFinite()) {
      numerical_trouble = true;
      break;
    }

    const double tau = 0.98;
    const double ap = std::min(1.0, tau * max_step(chol_s, ds));
    const double ad = std::min(1.0, tau * max_step(chol_y, dy));
    if (ap < 1e-10 && ad < 1e-10) {
      numerical_trouble = true;
      break;
    }

    res.x += ap * dx;
    slack = evaluate_blocks(problem, res.x);
    for (std::size_t b = 0; b < nb; ++b) dual[b] += ad * dy[b];
  }

  // hand back the best iterate seen
  res.x = best_x;
  res.primal_objective = best_pobj;
  res.dual_objective = best_dobj;
  res.gap = best_gap;
  res.relative_gap = best_relgap;
  res.dual_residual = best_dres;
  if (best_relgap <= options.gap_tol && best_dres <= options.feas_tol) {
    res.status = SolverStatus::optimal;
  } else {
    res.status = numerical_trouble ? SolverStatus::numerical_trouble
                                   : SolverStatus::max_iterations;
  }
  res.min_slack_eigenvalue = min_slack_eigenvalue(problem, res.x);
  return res;
}

}  // namespace msense::sdp
