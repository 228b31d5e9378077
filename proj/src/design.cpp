#include "msense/design.hpp"

#include <algorithm>
#include <cmath>

#include "msense/boxqp.hpp"
#include "msense/em.hpp"
#include "msense/errors.hpp"
#include "msense/rng.hpp"

namespace msense::design {

namespace {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

constexpr Complex kJ{0.0, 1.0};

MatrixXd stack_real(const MatrixXcd& m) {
  MatrixXd out(2 * m.rows(), m.cols());
  out.topRows(m.rows()) = m.real();
  out.bottomRows(m.rows()) = m.imag();
  return out;
}

/// Whitener S with (columns * S) orthonormal, from a column-pivoted QR.
MatrixXd qr_whitener(const MatrixXd& columns, const char* what) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(columns);
  const auto k = columns.cols();
  const MatrixXd r = qr.matrixR().topRows(k).triangularView<Eigen::Upper>();
  const double r_max = r.diagonal().cwiseAbs().maxCoeff();
  if (qr.rank() < k || r.diagonal().cwiseAbs().minCoeff() < 1e-12 * r_max) {
    throw SolveError(std::string("subspace FIM is singular in the ") + what +
                         " block",
                     std::numeric_limits<double>::infinity());
  }
  const MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(k, k));
  return qr.colsPermutation() * r_inv;
}

int vech_size(int d) { return d * (d + 1) / 2; }

}  // namespace

SubspaceBasis build_subspace(const em::OperatingPoint& op,
                             const em::PanelGeometry& panel,
                             const std::vector<channel::Target>& targets) {
  const int uc = static_cast<int>(targets.size());
  if (uc < 1) throw DomainError("subspace needs at least one target");
  const int n = panel.count();
  SubspaceBasis basis;
  basis.num_targets = uc;
  basis.u_tx.resize(n, 4 * uc);
  for (int u = 0; u < uc; ++u) {
    basis.u_tx.col(u) = channel::tx_focusing_vector(op, panel, targets[u]).values;
    const MatrixXcd jac = channel::tx_focusing_jacobian(op, panel, targets[u]);
    for (int c = 0; c < 3; ++c) {
      basis.u_tx.col((1 + c) * uc + u) = jac.col(c);
    }
  }
  return basis;
}

SubspaceFim::SubspaceFim(const channel::Scenario& scenario,
                         const SubspaceBasis& basis, double trace_budget)
    : num_targets_(basis.num_targets), trace_budget_(trace_budget) {
  if (basis.u_tx.cols() != 4 * num_targets_) {
    throw DomainError("subspace basis must have 4U columns");
  }
  if (basis.u_tx.rows() != scenario.num_elements()) {
    throw DomainError("subspace basis rows must match the element count");
  }
  if (!(trace_budget > 0.0)) throw DomainError("trace budget must be positive");
  fim_scale_ =
      2.0 * scenario.num_pilots * scenario.tx_power_w / scenario.noise_variance_w;

  const int cols = 4 * num_targets_;
  const int pv = 3 * num_targets_;
  const int bv = 2 * num_targets_;
  basis_ = basis.u_tx;
  for (int d = 0; d < cols; ++d) {
    const double norm = basis_.col(d).norm();
    if (!(norm > 0.0)) throw DomainError("zero subspace basis column");
    basis_.col(d) /= norm;
  }

  // raw gradient columns per basis vector
  std::vector<MatrixXcd> grads(cols);
  const double amp = std::sqrt(fim_scale_ * trace_budget_);
  for (int d = 0; d < cols; ++d) {
    grads[d] = amp * crb::mean_response_gradient(scenario, basis_.col(d));
  }

  // block whiteners from the nominal equal-split mixture
  const double nominal = 1.0 / (2.0 * cols);
  const int m = scenario.num_rx();
  MatrixXd stacked_pos(2 * m * cols, pv), stacked_beta(2 * m * cols, bv);
  for (int d = 0; d < cols; ++d) {
    const MatrixXd real_grad = std::sqrt(nominal) * stack_real(grads[d]);
    stacked_pos.middleRows(2 * m * d, 2 * m) = real_grad.leftCols(pv);
    stacked_beta.middleRows(2 * m * d, 2 * m) = real_grad.rightCols(bv);
  }
  sp_ = qr_whitener(stacked_pos, "position");
  sbeta_ = qr_whitener(stacked_beta, "reflection-coefficient");
  sp_inv_ = sp_.inverse();
  weight_ = sp_.transpose() * sp_;

  // whitened gradients and their cross-Grams
  std::vector<MatrixXcd> white(cols);
  const MatrixXcd sp_c = sp_.cast<Complex>();
  const MatrixXcd sbeta_c = sbeta_.cast<Complex>();
  for (int d = 0; d < cols; ++d) {
    white[d].resize(grads[d].rows(), pv + bv);
    white[d].leftCols(pv) = grads[d].leftCols(pv) * sp_c;
    white[d].rightCols(bv) = grads[d].rightCols(bv) * sbeta_c;
  }
  xg_.assign(cols, std::vector<MatrixXcd>(cols));
  k_diag_.resize(cols);
  for (int e = 0; e < cols; ++e) {
    for (int d = 0; d < cols; ++d) {
      xg_[e][d] = white[e].adjoint() * white[d];
    }
  }
  for (int d = 0; d < cols; ++d) k_diag_[d] = xg_[d][d].real();
}

MatrixXd SubspaceFim::fim_of_theta(const VectorXd& theta) const {
  const int cols = subspace_dim();
  if (theta.size() != cols) throw DomainError("theta must have 4U entries");
  MatrixXd fim = MatrixXd::Zero(5 * num_targets_, 5 * num_targets_);
  for (int d = 0; d < cols; ++d) fim += theta[d] * k_diag_[d];
  return fim;
}

MatrixXd SubspaceFim::fim_of_theta(const MatrixXcd& theta) const {
  const int cols = subspace_dim();
  if (theta.rows() != cols || theta.cols() != cols) {
    throw DomainError("theta must be 4U x 4U");
  }
  MatrixXcd acc = MatrixXcd::Zero(5 * num_targets_, 5 * num_targets_);
  for (int e = 0; e < cols; ++e) {
    for (int d = 0; d < cols; ++d) {
      acc += theta(d, e) * xg_[e][d];
    }
  }
  return acc.real();
}

MatrixXd SubspaceFim::kernel_sym(int d, int e) const {
  return (xg_[e][d] + xg_[d][e]).real();
}

MatrixXd SubspaceFim::kernel_skew(int d, int e) const {
  return -(xg_[e][d] - xg_[d][e]).imag();
}

MatrixXd SubspaceFim::unwhiten_pp(const MatrixXd& z_white) const {
  return sp_inv_.transpose() * z_white * sp_inv_;
}

double SubspaceFim::peb_of_coefficients(const VectorXcd& c) const {
  const int cols = subspace_dim();
  if (c.size() != cols) throw DomainError("coefficient vector must be 4U long");
  MatrixXcd acc = MatrixXcd::Zero(5 * num_targets_, 5 * num_targets_);
  for (int e = 0; e < cols; ++e) {
    for (int d = 0; d < cols; ++d) {
      acc += (c[d] * std::conj(c[e]) / trace_budget_) * xg_[e][d];
    }
  }
  const MatrixXd fim = acc.real();
  const int pv = 3 * num_targets_;
  const int bv = 2 * num_targets_;
  const MatrixXd pp = fim.topLeftCorner(pv, pv);
  const MatrixXd pb = fim.topRightCorner(pv, bv);
  const MatrixXd bb = fim.bottomRightCorner(bv, bv);
  Eigen::LLT<MatrixXd> bb_llt(bb);
  if (bb_llt.info() != Eigen::Success) {
    return std::numeric_limits<double>::infinity();
  }
  const MatrixXd schur = pp - pb * bb_llt.solve(pb.transpose());
  Eigen::LLT<MatrixXd> schur_llt(schur);
  if (schur_llt.info() != Eigen::Success) {
    return std::numeric_limits<double>::infinity();
  }
  return std::sqrt(schur_llt.solve(weight_).trace());
}

namespace {

struct VechLayout {
  int dim;
  int offset;
  int index(int r, int c) const {
    if (r > c) std::swap(r, c);
    // row-major upper triangle
    return offset + r * dim - r * (r - 1) / 2 + (c - r);
  }
};

MatrixXd sym_unit(int dim, int r, int c) {
  MatrixXd e = MatrixXd::Zero(dim, dim);
  e(r, c) = 1.0;
  e(c, r) = 1.0;
  return e;
}

}  // namespace

MatrixXcd SdpSolution::coefficient_factor() const {
  if (!fim) throw Error("sdp solution lacks its subspace data");
  const int cols = fim->subspace_dim();
  if (!full_lambda) {
    MatrixXcd t = MatrixXcd::Zero(cols, cols);
    t.diagonal() =
        lambda.cwiseMax(0.0).cwiseSqrt().cast<Complex>();
    return t;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(lambda_full);
  const VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

MatrixXcd SdpSolution::moment_factor() const {
  return fim->normalized_basis() * coefficient_factor();
}

MatrixXcd SdpSolution::moment_covariance() const {
  const MatrixXcd w = moment_factor();
  return w * w.adjoint();
}

SdpSolution solve_p1(const channel::Scenario& scenario,
                     const SubspaceBasis& basis, double passivity_c,
                     const P1Options& options) {
  channel::validate_scenario(scenario);
  if (basis.num_targets != scenario.num_targets()) {
    throw DomainError("basis and scenario disagree on the target count");
  }
  const int uc = basis.num_targets;
  const int cols = 4 * uc;
  const int pv = 3 * uc;
  const double budget =
      scenario.num_elements() * passivity_c * passivity_c;
  auto fim = std::make_shared<SubspaceFim>(scenario, basis, budget);

  const int sv = vech_size(pv);
  VechLayout v_layout{pv, 0};
  VechLayout z_layout{pv, sv};
  const int theta_offset = 2 * sv;
  int num_theta;
  // full mode: X upper triangle then Y strict upper triangle
  const int x_count = vech_size(cols);
  const int y_count = cols * (cols - 1) / 2;
  num_theta = options.full_lambda ? x_count + y_count : cols;
  const int n_vars = 2 * sv + num_theta;

  auto x_index = [&](int d, int e) {  // d <= e
    return theta_offset + d * cols - d * (d - 1) / 2 + (e - d);
  };
  auto y_index = [&](int d, int e) {  // d < e
    return theta_offset + x_count + d * (cols - 1) - d * (d - 1) / 2 +
           (e - d - 1);
  };

  // The optimal Z hugs the subspace Schur complement, whose weak
  // directions sit many orders below its strong ones. Solving in scaled
  // variables V-hat = zhat V', Z-hat = Z'/zhat (a congruence of the
  // epigraph block by diag(sqrt(zhat) I, I/sqrt(zhat))) puts the start at
  // V-hat = 2I, Z-hat = I and keeps the early Schur systems balanced.
  const double nominal = 1.0 / (2.0 * cols);
  const VectorXd theta0 = VectorXd::Constant(cols, nominal);
  const MatrixXd fim0 = fim->fim_of_theta(theta0);
  double schur_min = 0.0;
  {
    const MatrixXd pp = fim0.topLeftCorner(pv, pv);
    const MatrixXd pb = fim0.topRightCorner(pv, 2 * uc);
    const MatrixXd bb = fim0.bottomRightCorner(2 * uc, 2 * uc);
    Eigen::LLT<MatrixXd> bb_llt(bb);
    if (bb_llt.info() != Eigen::Success) {
      throw SolveError("nominal subspace FIM has a singular beta block",
                       std::numeric_limits<double>::infinity());
    }
    const MatrixXd schur = pp - pb * bb_llt.solve(pb.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(schur);
    schur_min = eig.eigenvalues().minCoeff();
    if (!(schur_min > 0.0)) {
      throw SolveError("scenario unobservable on the design subspace", 0.0);
    }
  }
  const double zhat = 0.5 * schur_min;

  sdp::Problem problem;
  problem.num_vars = n_vars;
  problem.objective = VectorXd::Zero(n_vars);
  const MatrixXd& weight = fim->position_weight();
  // objective Tr(V-hat P / p_scale): O(1) entries, so the duality-gap
  // criterion is relative to the bound itself
  const double p_scale = weight.cwiseAbs().maxCoeff();
  for (int r = 0; r < pv; ++r) {
    for (int c = r; c < pv; ++c) {
      problem.objective[v_layout.index(r, c)] =
          ((r == c) ? weight(r, r) : 2.0 * weight(r, c)) / p_scale;
    }
  }

  // epigraph block [[V, I], [I, Z]]
  {
    sdp::Block block;
    block.f0 = MatrixXd::Zero(2 * pv, 2 * pv);
    block.f0.topRightCorner(pv, pv).setIdentity();
    block.f0.bottomLeftCorner(pv, pv).setIdentity();
    for (int r = 0; r < pv; ++r) {
      for (int c = r; c < pv; ++c) {
        MatrixXd ev = MatrixXd::Zero(2 * pv, 2 * pv);
        ev.topLeftCorner(pv, pv) = sym_unit(pv, r, c);
        block.terms.push_back({v_layout.index(r, c), ev});
        MatrixXd ez = MatrixXd::Zero(2 * pv, 2 * pv);
        ez.bottomRightCorner(pv, pv) = sym_unit(pv, r, c);
        block.terms.push_back({z_layout.index(r, c), ez});
      }
    }
    problem.blocks.push_back(std::move(block));
  }

  // FIM LMI [[Jpp - Z, Jpb], [Jpb^T, Jbb]] with Z = zhat * Z-hat
  {
    sdp::Block block;
    block.f0 = MatrixXd::Zero(5 * uc, 5 * uc);
    for (int r = 0; r < pv; ++r) {
      for (int c = r; c < pv; ++c) {
        MatrixXd ez = MatrixXd::Zero(5 * uc, 5 * uc);
        ez.topLeftCorner(pv, pv) = -zhat * sym_unit(pv, r, c);
        block.terms.push_back({z_layout.index(r, c), ez});
      }
    }
    if (!options.full_lambda) {
      for (int d = 0; d < cols; ++d) {
        block.terms.push_back({theta_offset + d, fim->kernel_diag(d)});
      }
    } else {
      for (int d = 0; d < cols; ++d) {
        block.terms.push_back({x_index(d, d), fim->kernel_diag(d)});
        for (int e = d + 1; e < cols; ++e) {
          block.terms.push_back({x_index(d, e), fim->kernel_sym(d, e)});
          block.terms.push_back({y_index(d, e), fim->kernel_skew(d, e)});
        }
      }
    }
    problem.blocks.push_back(std::move(block));
  }

  // Z >= 0
  {
    sdp::Block block;
    block.f0 = MatrixXd::Zero(pv, pv);
    for (int r = 0; r < pv; ++r) {
      for (int c = r; c < pv; ++c) {
        block.terms.push_back({z_layout.index(r, c), sym_unit(pv, r, c)});
      }
    }
    problem.blocks.push_back(std::move(block));
  }

  // Lambda >= 0
  if (!options.full_lambda) {
    for (int d = 0; d < cols; ++d) {
      sdp::Block block;
      block.f0 = MatrixXd::Zero(1, 1);
      block.terms.push_back({theta_offset + d, MatrixXd::Ones(1, 1)});
      problem.blocks.push_back(std::move(block));
    }
  } else {
    sdp::Block block;
    block.f0 = MatrixXd::Zero(2 * cols, 2 * cols);
    for (int d = 0; d < cols; ++d) {
      for (int e = d; e < cols; ++e) {
        MatrixXd ex = MatrixXd::Zero(2 * cols, 2 * cols);
        ex.topLeftCorner(cols, cols) = sym_unit(cols, d, e);
        ex.bottomRightCorner(cols, cols) = sym_unit(cols, d, e);
        block.terms.push_back({x_index(d, e), ex});
        if (e > d) {
          MatrixXd ey = MatrixXd::Zero(2 * cols, 2 * cols);
          ey(d, cols + e) = -1.0;
          ey(e, cols + d) = 1.0;
          ey(cols + e, d) = -1.0;
          ey(cols + d, e) = 1.0;
          block.terms.push_back({y_index(d, e), ey});
        }
      }
    }
    problem.blocks.push_back(std::move(block));
  }

  // trace budget: 1 - sum theta >= 0 (normalized basis columns)
  {
    sdp::Block block;
    block.f0 = MatrixXd::Ones(1, 1);
    if (!options.full_lambda) {
      for (int d = 0; d < cols; ++d) {
        block.terms.push_back({theta_offset + d, -MatrixXd::Ones(1, 1)});
      }
    } else {
      for (int d = 0; d < cols; ++d) {
        block.terms.push_back({x_index(d, d), -MatrixXd::Ones(1, 1)});
      }
    }
    problem.blocks.push_back(std::move(block));
  }

  // strictly feasible start from the equal-split mixture
  VectorXd x0 = VectorXd::Zero(n_vars);
  for (int r = 0; r < pv; ++r) {
    x0[z_layout.index(r, r)] = 1.0;  // Z = zhat I, strictly below the Schur
    x0[v_layout.index(r, r)] = 2.0;  // V Z = 2 I
  }
  if (!options.full_lambda) {
    x0.segment(theta_offset, cols).setConstant(nominal);
  } else {
    for (int d = 0; d < cols; ++d) x0[x_index(d, d)] = nominal;
  }

  sdp::Options sdp_opts;
  sdp_opts.gap_tol = options.gap_tol;
  sdp_opts.max_iterations = options.max_iterations;
  sdp_opts.verbose = options.verbose;
  const auto res = sdp::solve(problem, x0, sdp_opts);
  if (res.status == sdp::SolverStatus::infeasible_start) {
    throw SolveError("relaxation start infeasible", 0.0);
  }

  SdpSolution out;
  out.fim = fim;
  out.full_lambda = options.full_lambda;
  out.status = res.status;
  out.iterations = res.iterations;
  out.trace_budget = budget;
  out.min_block_eigenvalue = res.min_slack_eigenvalue;

  MatrixXd z_white(pv, pv);
  MatrixXd v_white(pv, pv);
  for (int r = 0; r < pv; ++r) {
    for (int c = r; c < pv; ++c) {
      z_white(r, c) = z_white(c, r) = zhat * res.x[z_layout.index(r, c)];
      v_white(r, c) = v_white(c, r) = res.x[v_layout.index(r, c)] / zhat;
    }
  }
  out.z = fim->unwhiten_pp(z_white);
  Eigen::LLT<MatrixXd> z_llt(z_white);
  if (z_llt.info() == Eigen::Success) {
    out.bound_m = std::sqrt(z_llt.solve(fim->position_weight()).trace());
  } else {
    out.bound_m = std::numeric_limits<double>::infinity();
  }
  out.objective_bound_m =
      std::sqrt(std::max(0.0, (v_white * fim->position_weight()).trace()));

  if (!options.full_lambda) {
    out.lambda = budget * res.x.segment(theta_offset, cols);
    out.trace_m = out.lambda.sum();
  } else {
    out.lambda_full.resize(cols, cols);
    for (int d = 0; d < cols; ++d) {
      for (int e = d; e < cols; ++e) {
        const double xr = res.x[x_index(d, e)];
        const double yi = e > d ? res.x[y_index(d, e)] : 0.0;
        out.lambda_full(d, e) = budget * Complex(xr, yi);
        out.lambda_full(e, d) = budget * Complex(xr, -yi);
      }
    }
    out.trace_m = out.lambda_full.real().diagonal().sum();
  }
  return out;
}

Eigen::VectorXcd extract_moments(const SdpSolution& solution,
                                 ExtractionMode mode, std::uint64_t seed) {
  if (!solution.fim) throw Error("sdp solution lacks its subspace data");
  const MatrixXcd w = solution.moment_factor();
  const double trace = (w.adjoint() * w).real().trace();
  if (!(trace > 0.0) ||
      trace <= 1e-14 * solution.trace_budget) {
    throw SolveError("degenerate moment covariance", 0.0);
  }
  const double budget = solution.trace_budget;

  auto finalize = [&](VectorXcd m) {
    const double norm2 = m.squaredNorm();
    if (norm2 > budget) m *= std::sqrt(budget / norm2);
    // deterministic global phase: largest entry real positive
    Eigen::Index imax;
    m.cwiseAbs().maxCoeff(&imax);
    const Complex pivot = m[imax];
    if (std::abs(pivot) > 0.0) m *= std::conj(pivot) / std::abs(pivot);
    return m;
  };

  const MatrixXcd mix = solution.coefficient_factor();

  if (mode == ExtractionMode::rank_one) {
    const MatrixXcd gram = w.adjoint() * w;  // 4U x 4U
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(gram);
    const Eigen::Index top = gram.rows() - 1;  // ascending order
    return finalize(w * eig.eigenvectors().col(top));
  }

  // sampling mode: best of 8 covariance draws by subspace PEB
  rng::CounterRng gen(rng::derive_key({seed, 0x73616d706cULL}));
  const int dim = static_cast<int>(w.cols());
  double best_peb = std::numeric_limits<double>::infinity();
  VectorXcd best;
  for (int k = 0; k < 8; ++k) {
    VectorXcd g(dim);
    for (int i = 0; i < dim; ++i) g[i] = gen.complex_normal(1.0);
    VectorXcd c = mix * g;
    const double norm2 =
        (solution.fim->normalized_basis() * c).squaredNorm();
    if (norm2 > budget) c *= std::sqrt(budget / norm2);
    const double peb = solution.fim->peb_of_coefficients(c);
    if (peb < best_peb) {
      best_peb = peb;
      best = c;
    }
  }
  if (best.size() == 0) throw SolveError("sampling extraction failed", 0.0);
  return finalize(solution.fim->normalized_basis() * best);
}

DesignResult retract_p2(const VectorXcd& m_opt, const MatrixXcd& coupling,
                        const VectorXcd& h_f, const VectorXd& damping_rad_s,
                        double omega, double passivity_c,
                        const P2Options& options) {
  const auto n = coupling.rows();
  if (coupling.cols() != n || m_opt.size() != n || h_f.size() != n ||
      damping_rad_s.size() != n) {
    throw DomainError("retract_p2: dimension mismatch");
  }
  if (!(omega > 0.0) || !(passivity_c > 0.0)) {
    throw DomainError("retract_p2: omega and the passivity constant must be positive");
  }
  Eigen::PartialPivLU<MatrixXcd> lu(coupling);
  const double rcond = lu.rcond();
  const double cond =
      rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(cond < options.condition_cap)) {
    throw SolveError("coupling matrix is singular or near-singular", cond);
  }

  const VectorXcd t = lu.solve(h_f);
  const VectorXcd r0 = m_opt + t;
  const MatrixXcd g_inv = lu.inverse();
  MatrixXcd cmat(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cmat.col(i) = g_inv.col(i) * (kJ * damping_rad_s[i] * t[i] / omega);
  }

  const MatrixXd hess = 2.0 * (cmat.adjoint() * cmat).real();
  const VectorXd grad0 = 2.0 * (cmat.adjoint() * r0).real();
  VectorXd lower(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    lower[i] = passivity_c * omega / damping_rad_s[i];
  }

  boxqp::Options qp_opts;
  qp_opts.kkt_tol = options.kkt_tol;
  qp_opts.max_iterations = options.max_iterations;
  const auto qp = boxqp::solve_lower_bounded(hess, grad0, lower, lower, qp_opts);

  DesignResult result;
  result.kkt_residual = qp.kkt_residual;
  result.converged = qp.converged;
  result.retraction_residual = (r0 + cmat * qp.x).norm();
  result.strengths.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double floor_f = 1e-12 * damping_rad_s[i] / (passivity_c * omega);
    result.strengths[i] = std::max(1.0 / qp.x[i], floor_f);
  }
  return result;
}

crb::PebValue evaluate_design(const channel::Scenario& scenario,
                              DesignResult& result) {
  const int n = scenario.num_elements();
  if (result.strengths.size() != n) {
    throw DomainError("design strength count must match the panel");
  }
  const auto cm = em::build_coupling_matrix(scenario.op, scenario.panel);
  const auto ev = em::excitation_vector(scenario.op, scenario.panel);
  const VectorXcd alpha = em::resonant_polarizabilities(
      result.strengths, scenario.resonance_rad_s, scenario.damping_rad_s);
  const auto sol = em::solve_dipoles_exact(cm.g, alpha, ev.h_f);
  result.achieved_moments = sol.moments;

  const VectorXcd local = ev.h_f + cm.g * sol.moments;
  result.passivity_ok = true;
  for (int i = 0; i < n; ++i) {
    const auto audit = em::power_audit(
        scenario.op, scenario.panel.waveguide_height_m, alpha[i], local[i]);
    if (!audit.passive) result.passivity_ok = false;
  }

  const auto peb = crb::peb_of_moments(scenario, sol.moments);
  result.achieved_peb_m = peb.peb_m;
  return peb;
}

}  // namespace msense::design
