#include "msense/crb.hpp"

#include <cmath>
#include <vector>

#include "msense/errors.hpp"

namespace msense::crb {

namespace {

using channel::FocusingVector;
using channel::Scenario;
using em::Complex;

constexpr Complex kJ{0.0, 1.0};

double fim_scale(const Scenario& s) {
  return 2.0 * s.num_pilots * s.tx_power_w / s.noise_variance_w;
}

struct TargetGeometry {
  FocusingVector tx;
  FocusingVector rx;
  Eigen::MatrixXcd tx_jac;  // N x 3
  Eigen::MatrixXcd rx_jac;  // M x 3
};

std::vector<TargetGeometry> target_geometry(const Scenario& s) {
  std::vector<TargetGeometry> geo(s.num_targets());
  for (int u = 0; u < s.num_targets(); ++u) {
    geo[u].tx = channel::tx_focusing_vector(s.op, s.panel, s.targets[u]);
    geo[u].rx = channel::rx_focusing_vector(s.op, s.rx, s.targets[u]);
    geo[u].tx_jac = channel::tx_focusing_jacobian(s.op, s.panel, s.targets[u]);
    geo[u].rx_jac = channel::rx_focusing_jacobian(s.op, s.rx, s.targets[u]);
  }
  return geo;
}

/// Columns of d mu / d xi for one moment column, ordered
/// [x1 y1 z1 ... xU yU zU | Re b_1..Re b_U | Im b_1..Im b_U].
Eigen::MatrixXcd gradient_columns(const Scenario& s,
                                  const std::vector<TargetGeometry>& geo,
                                  const Eigen::VectorXcd& moments) {
  const int u_count = s.num_targets();
  const int m = s.num_rx();
  const auto& w = s.rx.combiner;
  Eigen::MatrixXcd grad(m, 5 * u_count);
  for (int u = 0; u < u_count; ++u) {
    const Complex beta = s.targets[u].beta;
    const Complex tx_dot = geo[u].tx.values.dot(moments);  // a_TX^H m
    const Eigen::VectorXcd w_rx = w.adjoint() * geo[u].rx.values;
    for (int c = 0; c < 3; ++c) {
      // d a_TX^H m / dc conjugates the jacobian column.
      const Complex d_tx_dot = geo[u].tx_jac.col(c).dot(moments);
      const Eigen::VectorXcd d_rx = w.adjoint() * geo[u].rx_jac.col(c);
      grad.col(3 * u + c) = beta * (d_rx * tx_dot + w_rx * d_tx_dot);
    }
    grad.col(3 * u_count + u) = w_rx * tx_dot;
    grad.col(3 * u_count + u_count + u) = kJ * w_rx * tx_dot;
  }
  return grad;
}

FimBlocks partition(const Eigen::MatrixXd& full, int u_count) {
  FimBlocks b;
  b.pp = full.topLeftCorner(3 * u_count, 3 * u_count);
  b.pbeta = full.topRightCorner(3 * u_count, 2 * u_count);
  b.betabeta = full.bottomRightCorner(2 * u_count, 2 * u_count);
  return b;
}

}  // namespace

Eigen::MatrixXd FimBlocks::full() const {
  const auto p = pp.rows();
  const auto q = betabeta.rows();
  Eigen::MatrixXd f(p + q, p + q);
  f.topLeftCorner(p, p) = pp;
  f.topRightCorner(p, q) = pbeta;
  f.bottomLeftCorner(q, p) = pbeta.transpose();
  f.bottomRightCorner(q, q) = betabeta;
  return f;
}

Eigen::MatrixXcd mean_response_gradient(const Scenario& scenario,
                                        const Eigen::VectorXcd& moments) {
  if (moments.size() != scenario.num_elements()) {
    throw DomainError("moment vector length must be N");
  }
  if (!moments.allFinite()) throw DomainError("moments must be finite");
  const auto geo = target_geometry(scenario);
  return gradient_columns(scenario, geo, moments);
}

FimBlocks location_fim(const Scenario& scenario,
                       const Eigen::VectorXcd& moments) {
  const Eigen::MatrixXcd grad = mean_response_gradient(scenario, moments);
  const Eigen::MatrixXd full =
      fim_scale(scenario) * (grad.adjoint() * grad).real();
  return partition(full, scenario.num_targets());
}

int channel_param_length(int num_elements, int num_rx, int num_targets) {
  return num_targets * (3 * num_elements + 3 * num_rx + 2);
}

FimBlocks chain_rule_fim_oracle(const Scenario& scenario,
                                const Eigen::VectorXcd& moments) {
  const int n = scenario.num_elements();
  const int m = scenario.num_rx();
  const int uc = scenario.num_targets();
  const int l = channel_param_length(n, m, uc);
  if (l > 5000) {
    throw DomainError("channel-parameter FIM of length " + std::to_string(l) +
                      " exceeds the desk-scale guard");
  }
  if (moments.size() != n) throw DomainError("moment vector length must be N");

  // Channel parameters [theta_a; theta_e; psi_a; psi_e; rho; upsilon; beta],
  // extended with the per-target center distances (R_u, B_u) that the
  // focusing amplitudes depend on.
  const int off_theta_a = 0;
  const int off_theta_e = n * uc;
  const int off_psi_a = 2 * n * uc;
  const int off_psi_e = 2 * n * uc + m * uc;
  const int off_rho = 2 * n * uc + 2 * m * uc;
  const int off_upsilon = 3 * n * uc + 2 * m * uc;
  const int off_beta = 3 * n * uc + 3 * m * uc;
  const int off_rc = l;
  const int off_bc = l + uc;
  const int l_ext = l + 2 * uc;

  const auto geo = target_geometry(scenario);
  const auto& w = scenario.rx.combiner;
  const double k = scenario.op.wavenumber_rad_m;

  Eigen::MatrixXcd dmu = Eigen::MatrixXcd::Zero(m, l_ext);
  Eigen::MatrixXd jac_t = Eigen::MatrixXd::Zero(l_ext, 5 * uc);

  for (int u = 0; u < uc; ++u) {
    const auto& g = geo[u];
    const Complex beta = scenario.targets[u].beta;
    const Complex tx_dot = g.tx.values.dot(moments);
    const Eigen::VectorXcd w_rx = w.adjoint() * g.rx.values;
    const Eigen::Vector3d p = scenario.targets[u].position_m;
    const double r_center = g.tx.center_distance_m;
    const double b_center = g.rx.center_distance_m;
    const double amp = -k * k * scenario.op.impedance_ohm /
                       (2.0 * std::numbers::pi * r_center);

    for (int i = 0; i < n; ++i) {
      const double dx = p.x() - scenario.panel.elements(0, i);
      const double dy = p.y() - scenario.panel.elements(1, i);
      const double dz = p.z();
      const double r = g.tx.distances_m[i];
      const double rho_xy = std::sqrt(dx * dx + dy * dy);
      const double sin_e = rho_xy / r;
      const double cos_e = dz / r;
      const double sin_a = rho_xy > 0.0 ? dy / rho_xy : 0.0;
      const double cos_a = rho_xy > 0.0 ? dx / rho_xy : 0.0;
      const Complex phase = std::exp(kJ * k * r);
      const Complex f = g.tx.values[i];

      // d mu columns: the n-th TX entry touches only target u's term.
      const Complex common = beta * moments[i];
      dmu.col(off_theta_a + u * n + i) =
          common * std::conj(amp * sin_e * cos_a * phase) * w_rx;
      dmu.col(off_theta_e + u * n + i) =
          common * std::conj(amp * cos_e * sin_a * phase) * w_rx;
      dmu.col(off_rho + u * n + i) = common * std::conj(kJ * k * f) * w_rx;

      // Jacobian rows onto (x_u, y_u, z_u).
      if (rho_xy > 0.0) {
        jac_t(off_theta_a + u * n + i, 3 * u + 0) = -dy / (rho_xy * rho_xy);
        jac_t(off_theta_a + u * n + i, 3 * u + 1) = dx / (rho_xy * rho_xy);
        jac_t(off_theta_e + u * n + i, 3 * u + 0) =
            dz * dx / (r * r * rho_xy);
        jac_t(off_theta_e + u * n + i, 3 * u + 1) =
            dz * dy / (r * r * rho_xy);
        jac_t(off_theta_e + u * n + i, 3 * u + 2) = -rho_xy / (r * r);
      }
      jac_t(off_rho + u * n + i, 3 * u + 0) = dx / r;
      jac_t(off_rho + u * n + i, 3 * u + 1) = dy / r;
      jac_t(off_rho + u * n + i, 3 * u + 2) = dz / r;
    }

    for (int a = 0; a < m; ++a) {
      const Eigen::Vector3d d = p - scenario.rx.antenna_positions_m.col(a);
      const double b = g.rx.distances_m[a];
      const double rho_xy = std::hypot(d.x(), d.y());
      // psi angles do not enter the response; their d mu columns stay zero
      // but the geometric Jacobian rows are still well defined.
      if (rho_xy > 0.0) {
        jac_t(off_psi_a + u * m + a, 3 * u + 0) = -d.y() / (rho_xy * rho_xy);
        jac_t(off_psi_a + u * m + a, 3 * u + 1) = d.x() / (rho_xy * rho_xy);
        jac_t(off_psi_e + u * m + a, 3 * u + 0) =
            d.z() * d.x() / (b * b * rho_xy);
        jac_t(off_psi_e + u * m + a, 3 * u + 1) =
            d.z() * d.y() / (b * b * rho_xy);
        jac_t(off_psi_e + u * m + a, 3 * u + 2) = -rho_xy / (b * b);
      }
      dmu.col(off_upsilon + u * m + a) =
          beta * tx_dot * kJ * k * g.rx.values[a] * w.adjoint().col(a);
      jac_t(off_upsilon + u * m + a, 3 * u + 0) = d.x() / b;
      jac_t(off_upsilon + u * m + a, 3 * u + 1) = d.y() / b;
      jac_t(off_upsilon + u * m + a, 3 * u + 2) = d.z() / b;
    }

    dmu.col(off_beta + u) = w_rx * tx_dot;
    dmu.col(off_beta + uc + u) = kJ * w_rx * tx_dot;
    jac_t(off_beta + u, 3 * uc + u) = 1.0;
    jac_t(off_beta + uc + u, 3 * uc + uc + u) = 1.0;

    dmu.col(off_rc + u) = beta * (-tx_dot / r_center) * w_rx;
    dmu.col(off_bc + u) = beta * (-tx_dot / b_center) * w_rx;
    jac_t.row(off_rc + u).segment(3 * u, 3) = (p / r_center).transpose();
    jac_t.row(off_bc + u).segment(3 * u, 3) =
        ((p - scenario.rx.center_m) / b_center).transpose();
  }

  const Eigen::MatrixXd j_channel =
      fim_scale(scenario) * (dmu.adjoint() * dmu).real();
  const Eigen::MatrixXd j_location = jac_t.transpose() * j_channel * jac_t;
  return partition(j_location, uc);
}

FimBlocks fim_linear_in_covariance(const Scenario& scenario,
                                   const Eigen::MatrixXcd& covariance) {
  const int n = scenario.num_elements();
  if (covariance.rows() != n || covariance.cols() != n) {
    throw DomainError("moment covariance must be N x N");
  }
  const double scale = covariance.cwiseAbs().maxCoeff();
  if ((covariance - covariance.adjoint()).cwiseAbs().maxCoeff() >
      1e-10 * std::max(scale, 1e-300)) {
    throw DomainError("moment covariance must be Hermitian");
  }
  const int uc = scenario.num_targets();
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(5 * uc, 5 * uc);
  if (scale == 0.0) return partition(full, uc);

  const auto geo = target_geometry(scenario);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(
      (covariance + covariance.adjoint()) / 2.0);
  for (int r = 0; r < n; ++r) {
    const double lambda = eig.eigenvalues()[r];
    if (std::abs(lambda) <= 1e-14 * scale) continue;
    const Eigen::MatrixXcd grad =
        gradient_columns(scenario, geo, eig.eigenvectors().col(r));
    full += lambda * (grad.adjoint() * grad).real();
  }
  full *= fim_scale(scenario);
  return partition(full, uc);
}

namespace {

Eigen::MatrixXd stack_real(const Eigen::MatrixXcd& grad) {
  Eigen::MatrixXd stacked(2 * grad.rows(), grad.cols());
  stacked.topRows(grad.rows()) = grad.real();
  stacked.bottomRows(grad.rows()) = grad.imag();
  return stacked;
}

}  // namespace

PebValue peb_from_gradients(const Eigen::MatrixXd& stacked_gradients,
                            double fim_scale, int num_targets) {
  const int uc = num_targets;
  if (stacked_gradients.cols() != 5 * uc) {
    throw DomainError("gradient stack must have 5U columns");
  }
  if (stacked_gradients.rows() < 5 * uc) {
    throw SolveError("fewer observations than parameters", 0.0);
  }
  const Eigen::MatrixXd pos = stacked_gradients.leftCols(3 * uc);
  const Eigen::MatrixXd beta = stacked_gradients.rightCols(2 * uc);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(beta);
  qr.setThreshold(1e-12);
  if (qr.rank() < 2 * uc) {
    throw SolveError("reflection-coefficient FIM block is singular",
                     std::numeric_limits<double>::infinity());
  }
  const Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(beta.rows(), 2 * uc);
  // Orthogonalize twice so the projection holds to working precision.
  Eigen::MatrixXd resid = pos - q * (q.transpose() * pos);
  resid -= q * (q.transpose() * resid);

  const Eigen::MatrixXd schur = fim_scale * (resid.transpose() * resid);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(schur);
  const double s_max = eig.eigenvalues().maxCoeff();
  const double s_min = eig.eigenvalues().minCoeff();
  if (!(s_min > 1e-12 * s_max)) {
    throw SolveError(
        "effective position FIM is singular: configuration unobservable",
        s_max > 0.0 && s_min > 0.0 ? s_max / s_min
                                   : std::numeric_limits<double>::infinity());
  }
  PebValue out;
  out.peb_m = std::sqrt(eig.eigenvalues().cwiseInverse().sum());
  out.condition_estimate = s_max / s_min;
  out.valid = true;
  return out;
}

PebValue peb_of_moments(const channel::Scenario& scenario,
                        const Eigen::VectorXcd& moments) {
  const Eigen::MatrixXcd grad = mean_response_gradient(scenario, moments);
  return peb_from_gradients(stack_real(grad), fim_scale(scenario),
                            scenario.num_targets());
}

PebValue peb_of_covariance(const channel::Scenario& scenario,
                           const Eigen::MatrixXcd& covariance) {
  const int n = scenario.num_elements();
  if (covariance.rows() != n || covariance.cols() != n) {
    throw DomainError("moment covariance must be N x N");
  }
  const double scale = covariance.cwiseAbs().maxCoeff();
  if ((covariance - covariance.adjoint()).cwiseAbs().maxCoeff() >
      1e-10 * std::max(scale, 1e-300)) {
    throw DomainError("moment covariance must be Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(
      (covariance + covariance.adjoint()) / 2.0);
  const auto geo = target_geometry(scenario);
  std::vector<Eigen::MatrixXd> parts;
  for (int r = 0; r < n; ++r) {
    const double lambda = eig.eigenvalues()[r];
    if (lambda <= 1e-14 * scale) continue;  // PSD use only
    const Eigen::MatrixXcd grad = gradient_columns(
        scenario, geo, (std::sqrt(lambda) * eig.eigenvectors().col(r)).eval());
    parts.push_back(stack_real(grad));
  }
  if (parts.empty()) {
    throw SolveError("zero moment covariance has no information", 0.0);
  }
  Eigen::Index rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Eigen::MatrixXd stacked(rows, 5 * scenario.num_targets());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    stacked.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return peb_from_gradients(stacked, fim_scale(scenario),
                            scenario.num_targets());
}

PebValue peb(const FimBlocks& blocks) {
  const auto p = blocks.pp.rows();
  const auto q = blocks.betabeta.rows();
  if (blocks.pbeta.rows() != p || blocks.pbeta.cols() != q) {
    throw DomainError("inconsistent FIM block shapes");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_bb(blocks.betabeta);
  const double bb_max = eig_bb.eigenvalues().cwiseAbs().maxCoeff();
  if (eig_bb.eigenvalues().minCoeff() <= 1e-12 * bb_max) {
    throw SolveError("reflection-coefficient FIM block is singular",
                     bb_max > 0.0 ? bb_max / eig_bb.eigenvalues().minCoeff()
                                  : std::numeric_limits<double>::infinity());
  }
  const Eigen::MatrixXd bb_inv = eig_bb.eigenvectors() *
                                 eig_bb.eigenvalues().cwiseInverse().asDiagonal() *
                                 eig_bb.eigenvectors().transpose();
  const Eigen::MatrixXd schur =
      blocks.pp - blocks.pbeta * bb_inv * blocks.pbeta.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_s(schur);
  const double s_max = eig_s.eigenvalues().cwiseAbs().maxCoeff();
  const double s_min = eig_s.eigenvalues().minCoeff();
  if (s_min <= 1e-12 * s_max) {
    throw SolveError(
        "effective position FIM is singular: configuration unobservable",
        s_max > 0.0 && s_min > 0.0 ? s_max / s_min
                                   : std::numeric_limits<double>::infinity());
  }
  PebValue out;
  out.peb_m = std::sqrt(eig_s.eigenvalues().cwiseInverse().sum());
  out.condition_estimate = s_max / s_min;
  out.valid = true;
  return out;
}

}  // namespace msense::crb
