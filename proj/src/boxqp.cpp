#include "msense/boxqp.hpp"

#include <cmath>

#include "msense/errors.hpp"

namespace msense::boxqp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double kkt_residual(const VectorXd& x, const VectorXd& grad,
                    const VectorXd& lower, double bound_tol) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double r = (x[i] > lower[i] + bound_tol)
                         ? std::abs(grad[i])
                         : std::max(0.0, -grad[i]);
    worst = std::max(worst, r);
  }
  return worst;
}

}  // namespace

Result solve_lower_bounded(const MatrixXd& hessian, const VectorXd& g,
                           const VectorXd& lower, const VectorXd& start,
                           const Options& options) {
  const auto n = g.size();
  if (hessian.rows() != n || hessian.cols() != n || lower.size() != n ||
      start.size() != n) {
    throw DomainError("boxqp: dimension mismatch");
  }
  auto project = [&](VectorXd v) {
    for (Eigen::Index i = 0; i < n; ++i) v[i] = std::max(v[i], lower[i]);
    return v;
  };
  auto objective = [&](const VectorXd& v) {
    return 0.5 * v.dot(hessian * v) + g.dot(v);
  };

  Result res;
  res.x = project(start);
  const double grad_scale0 =
      std::max(1e-300, (hessian * res.x + g).cwiseAbs().maxCoeff());
  const double bound_tol = 1e-12 * (1.0 + lower.cwiseAbs().maxCoeff());

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    res.iterations = iter;
    const VectorXd grad = hessian * res.x + g;
    const double scale =
        std::max({1e-300, grad_scale0, grad.cwiseAbs().maxCoeff()});
    res.kkt_residual = kkt_residual(res.x, grad, lower, bound_tol) / scale;
    if (res.kkt_residual <= options.kkt_tol) {
      res.converged = true;
      return res;
    }

    // epsilon-active set: at the bound and pushing outward
    std::vector<Eigen::Index> free;
    free.reserve(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(res.x[i] <= lower[i] + bound_tol && grad[i] > 0.0)) {
        free.push_back(i);
      }
    }

    VectorXd dir = VectorXd::Zero(n);
    bool newton_ok = false;
    if (!free.empty()) {
      MatrixXd h_ff(free.size(), free.size());
      VectorXd g_f(free.size());
      for (std::size_t a = 0; a < free.size(); ++a) {
        g_f[a] = grad[free[a]];
        for (std::size_t b = 0; b < free.size(); ++b) {
          h_ff(a, b) = hessian(free[a], free[b]);
        }
      }
      Eigen::LDLT<MatrixXd> ldlt(h_ff);
      if (ldlt.info() == Eigen::Success &&
          ldlt.vectorD().minCoeff() >
              1e-14 * std::max(1e-300, ldlt.vectorD().maxCoeff())) {
        const VectorXd d_f = ldlt.solve(-g_f);
        for (std::size_t a = 0; a < free.size(); ++a) dir[free[a]] = d_f[a];
        newton_ok = true;
      }
    }
    if (!newton_ok) {
      // gradient fallback for semidefinite reduced systems
      for (Eigen::Index i = 0; i < n; ++i) dir[i] = -grad[i];
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (res.x[i] <= lower[i] + bound_tol && grad[i] > 0.0) {
        dir[i] = -grad[i];  // active coordinates move by projected gradient
      }
    }

    // projected Armijo backtracking
    const double f0 = objective(res.x);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const VectorXd cand = project(res.x + alpha * dir);
      const double f1 = objective(cand);
      const double decrease = grad.dot(cand - res.x);
      if (f1 <= f0 + 1e-4 * decrease && decrease <= 0.0) {
        res.x = cand;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // no further progress representable
      res.converged = res.kkt_residual <= std::sqrt(options.kkt_tol);
      return res;
    }
  }
  const VectorXd grad = hessian * res.x + g;
  const double scale =
      std::max({1e-300, grad_scale0, grad.cwiseAbs().maxCoeff()});
  res.kkt_residual = kkt_residual(res.x, grad, lower, bound_tol) / scale;
  res.converged = res.kkt_residual <= options.kkt_tol;
  return res;
}

}  // namespace msense::boxqp
