#include "msense/em.hpp"

#include <cmath>
#include <fstream>

#include "msense/errors.hpp"
#include "msense/specfun.hpp"

namespace msense::em {

namespace {

using specfun::bessel_j;  // NOLINT(misc-unused-using-decls)
using specfun::CylinderOrder;
using specfun::hankel2;

constexpr Complex kJ{0.0, 1.0};

}  // namespace

OperatingPoint OperatingPoint::at_frequency(double frequency_hz) {
  if (!std::isfinite(frequency_hz) || frequency_hz <= 0.0) {
    throw DomainError("operating frequency must be finite and positive");
  }
  OperatingPoint op;
  op.frequency_hz = frequency_hz;
  op.omega_rad_s = 2.0 * std::numbers::pi * frequency_hz;
  op.wavelength_m = kSpeedOfLight / frequency_hz;
  op.wavenumber_rad_m = op.omega_rad_s / kSpeedOfLight;
  op.mu0_h_m = kVacuumPermeability;
  op.impedance_ohm = kVacuumPermeability * kSpeedOfLight;
  return op;
}

void validate_panel(const PanelGeometry& panel, double min_spacing_m) {
  const int n = panel.count();
  if (n < 1) throw DomainError("panel needs at least one element");
  if (panel.width_m <= 0.0 || panel.depth_m <= 0.0 ||
      panel.waveguide_height_m <= 0.0) {
    throw DomainError("panel extents and waveguide height must be positive");
  }
  const double hw = panel.width_m / 2.0;
  const double hd = panel.depth_m / 2.0;
  const double slack = 1e-12;
  auto inside = [&](const Eigen::Vector2d& p) {
    return std::abs(p.x()) <= hw + slack && std::abs(p.y()) <= hd + slack;
  };
  if (!inside(panel.feed)) throw DomainError("feed lies outside the aperture");
  for (int i = 0; i < n; ++i) {
    if (!inside(panel.elements.col(i))) {
      throw DomainError("element " + std::to_string(i) +
                        " lies outside the aperture");
    }
    const double feed_dist = (panel.elements.col(i) - panel.feed).norm();
    if (feed_dist <= 0.0) {
      throw SingularityError("element " + std::to_string(i) +
                             " collocated with the feed");
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = (panel.elements.col(i) - panel.elements.col(j)).norm();
      if (d < min_spacing_m * (1.0 - 1e-9)) {
        throw DomainError("elements " + std::to_string(i) + " and " +
                          std::to_string(j) + " violate the minimum spacing");
      }
    }
  }
}

Complex polarizability_lorentzian(const LorentzianParams& params,
                                  double omega_rad_s) {
  if (params.strength <= 0.0 || params.resonance_rad_s <= 0.0 ||
      params.damping_rad_s <= 0.0) {
    throw DomainError("Lorentzian parameters must be positive");
  }
  if (!(omega_rad_s > 0.0)) {
    throw DomainError("polarizability requires omega > 0");
  }
  const double w = omega_rad_s;
  const double w0 = params.resonance_rad_s;
  const Complex denom(w0 * w0 - w * w, params.damping_rad_s * w);
  return params.strength * w * w / denom;
}

Eigen::VectorXcd resonant_polarizabilities(
    const Eigen::VectorXd& strengths, const Eigen::VectorXd& resonance_rad_s,
    const Eigen::VectorXd& damping_rad_s) {
  const auto n = strengths.size();
  if (resonance_rad_s.size() != n || damping_rad_s.size() != n) {
    throw DomainError("Lorentzian parameter vectors must share one length");
  }
  Eigen::VectorXcd alpha(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (strengths[i] <= 0.0 || resonance_rad_s[i] <= 0.0 ||
        damping_rad_s[i] <= 0.0) {
      throw DomainError("Lorentzian parameters must be positive (element " +
                        std::to_string(i) + ")");
    }
    alpha[i] = Complex(0.0, -strengths[i] * resonance_rad_s[i] / damping_rad_s[i]);
  }
  return alpha;
}

Complex green_wg(const OperatingPoint& op, double waveguide_height_m,
                 const Eigen::Vector2d& dr) {
  if (waveguide_height_m <= 0.0) {
    throw DomainError("waveguide height must be positive");
  }
  const double rho = dr.norm();
  if (rho <= 0.0) {
    throw SingularityError("green_wg evaluated at zero separation");
  }
  const double k = op.wavenumber_rad_m;
  // cos(2 psi) through the quadrant-insensitive ratio (dx^2 - dy^2)/rho^2.
  const double cos2psi = (dr.x() * dr.x() - dr.y() * dr.y()) / (rho * rho);
  const Complex h0 = hankel2(CylinderOrder::zero, k * rho);
  const Complex h2 = hankel2(CylinderOrder::two, k * rho);
  return -kJ * k * k / (8.0 * waveguide_height_m) * (h0 - cos2psi * h2);
}

Complex green_fs(const OperatingPoint& op, const Eigen::Vector2d& dr) {
  const double rho = dr.norm();
  if (rho <= 0.0) {
    throw SingularityError("green_fs evaluated at zero separation");
  }
  const double k = op.wavenumber_rad_m;
  const double kr = k * rho;
  const double cos2 = dr.x() * dr.x() / (rho * rho);
  const Complex radial(3.0 / (kr * kr) - 1.0, 3.0 / kr);
  const Complex trans(1.0 - 1.0 / (kr * kr), -1.0 / kr);
  const Complex phase = std::exp(-kJ * kr);
  return (radial * cos2 + trans) * k * k * phase /
         (2.0 * std::numbers::pi * rho);
}

CouplingMatrix build_coupling_matrix(const OperatingPoint& op,
                                     const PanelGeometry& panel) {
  const int n = panel.count();
  CouplingMatrix cm;
  cm.g = Eigen::MatrixXcd::Zero(n, n);
  cm.pair_distance_m = Eigen::MatrixXd::Zero(n, n);
  cm.pair_azimuth_rad = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = r + 1; c < n; ++c) {
      const Eigen::Vector2d dr = panel.elements.col(r) - panel.elements.col(c);
      if (dr.norm() <= 0.0) {
        throw SingularityError("duplicate element positions " +
                               std::to_string(r) + "," + std::to_string(c));
      }
      const Complex v =
          green_wg(op, panel.waveguide_height_m, dr) + green_fs(op, dr);
      cm.g(r, c) = v;
      cm.g(c, r) = v;
      const double rho = dr.norm();
      cm.pair_distance_m(r, c) = rho;
      cm.pair_distance_m(c, r) = rho;
      cm.pair_azimuth_rad(r, c) = std::atan2(dr.y(), dr.x());
      cm.pair_azimuth_rad(c, r) = std::atan2(-dr.y(), -dr.x());
    }
  }
  return cm;
}

ExcitationVector excitation_vector(const OperatingPoint& op,
                                   const PanelGeometry& panel) {
  const int n = panel.count();
  const double k = op.wavenumber_rad_m;
  ExcitationVector ev;
  ev.h_f.resize(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d d = panel.feed - panel.elements.col(i);
    const double dist = d.norm();
    if (dist <= 0.0) {
      throw SingularityError("feed collocated with element " +
                             std::to_string(i));
    }
    // sin(atan2(p_y - r_y, p_x - r_x)) as the quadrant-correct ratio.
    const double s = d.y() / dist;
    ev.h_f[i] = kJ * k / 4.0 * hankel2(CylinderOrder::one, k * dist) * s;
  }
  return ev;
}

DipoleSolution solve_dipoles_exact(const Eigen::MatrixXcd& g,
                                   const Eigen::VectorXcd& alpha,
                                   const Eigen::VectorXcd& h_f,
                                   double condition_cap) {
  const auto n = g.rows();
  if (g.cols() != n || alpha.size() != n || h_f.size() != n) {
    throw DomainError("solve_dipoles_exact: dimension mismatch");
  }
  Eigen::MatrixXcd a = -g;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (alpha[i] == Complex(0.0, 0.0)) {
      throw DomainError("zero polarizability at element " + std::to_string(i));
    }
    a(i, i) += 1.0 / alpha[i];
  }

  // Symmetric diagonal equilibration: near-off elements blow up the raw
  // condition number without making the solve any harder, so the cap is
  // checked on the scaled system.
  Eigen::VectorXd scale(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = std::abs(a(i, i));
    scale[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 1.0;
  }
  const Eigen::MatrixXcd a_eq =
      scale.asDiagonal() * a * scale.asDiagonal();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a_eq);
  const double rcond = lu.rcond();
  const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(cond < condition_cap)) {
    throw SolveError("dipole system condition estimate " +
                         std::to_string(cond) + " exceeds cap",
                     cond);
  }
  DipoleSolution sol;
  auto solve_scaled = [&](const Eigen::VectorXcd& rhs) {
    return (scale.asDiagonal() *
            lu.solve(scale.asDiagonal() * rhs).eval())
        .eval();
  };
  sol.moments = solve_scaled(h_f);
  const double hnorm = h_f.norm();
  if (hnorm > 0.0) {
    // One or two rounds of refinement keep the residual at working accuracy.
    for (int it = 0; it < 2; ++it) {
      const Eigen::VectorXcd r = h_f - a * sol.moments;
      if (r.norm() <= 1e-12 * hnorm) break;
      sol.moments += solve_scaled(r);
    }
    sol.residual_rel = (h_f - a * sol.moments).norm() / hnorm;
  }
  sol.condition_estimate = cond;
  sol.approximate = false;
  return sol;
}

DipoleSolution solve_dipoles_neumann(const Eigen::MatrixXcd& g,
                                     const Eigen::VectorXcd& alpha,
                                     const Eigen::VectorXcd& h_f,
                                     double condition_cap) {
  const auto n = g.rows();
  if (g.cols() != n || alpha.size() != n || h_f.size() != n) {
    throw DomainError("solve_dipoles_neumann: dimension mismatch");
  }
  Eigen::VectorXcd alpha_inv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (alpha[i] == Complex(0.0, 0.0)) {
      throw DomainError("zero polarizability at element " + std::to_string(i));
    }
    alpha_inv[i] = 1.0 / alpha[i];
  }
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(g);
  const double rcond = lu.rcond();
  const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(cond < condition_cap)) {
    throw SolveError("coupling matrix condition estimate " +
                         std::to_string(cond) + " exceeds cap",
                     cond);
  }
  const Eigen::VectorXcd t = lu.solve(h_f);
  const Eigen::VectorXcd s = lu.solve(alpha_inv.cwiseProduct(t));

  DipoleSolution sol;
  sol.moments = -(t + s);
  sol.approximate = true;
  sol.condition_estimate = cond;

  // Spectral-norm estimate of B = G^-1 diag(alpha)^-1 by power iteration
  // on B^H B with a fixed starting vector.
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_adj(g.adjoint());
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v[i] = Complex(1.0 + 0.25 * std::cos(1.0 + 2.0 * static_cast<double>(i)),
                   0.25 * std::sin(0.5 + static_cast<double>(i)));
  }
  v.normalize();
  double q = 0.0;
  for (int it = 0; it < 40; ++it) {
    const Eigen::VectorXcd bv = lu.solve(alpha_inv.cwiseProduct(v));
    const Eigen::VectorXcd bhbv =
        alpha_inv.conjugate().cwiseProduct(lu_adj.solve(bv));
    const double norm = bhbv.norm();
    if (norm == 0.0) break;
    q = std::sqrt(norm);
    v = bhbv / norm;
  }
  sol.contraction_q = q;
  sol.contractive = q < 1.0;
  return sol;
}

double passivity_limit(const OperatingPoint& op, double waveguide_height_m) {
  if (waveguide_height_m <= 0.0) {
    throw DomainError("waveguide height must be positive");
  }
  const double k = op.wavenumber_rad_m;
  return k * k * k / (3.0 * std::numbers::pi) +
         k * k / (8.0 * waveguide_height_m);
}

PowerAudit power_audit(const OperatingPoint& op, double waveguide_height_m,
                       Complex alpha, Complex local_field) {
  if (alpha == Complex(0.0, 0.0)) {
    throw DomainError("power_audit requires a non-zero polarizability");
  }
  const double c = passivity_limit(op, waveguide_height_m);
  const double h2 = std::norm(local_field);
  const double wmu = op.omega_rad_s * op.mu0_h_m;
  PowerAudit audit;
  audit.local_field_a_m = local_field;
  audit.supplied_w = -0.5 * wmu * alpha.imag() * h2;
  audit.radiated_w = 0.5 * wmu * std::norm(alpha) * h2 * c;
  audit.margin_w = audit.supplied_w - audit.radiated_w;
  const double scale = std::max(std::abs(audit.supplied_w),
                                std::abs(audit.radiated_w));
  audit.passive = audit.margin_w >= -1e-9 * scale;
  return audit;
}

void write_complex_csv(const Eigen::MatrixXcd& values, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "row,col,re,im\n";
  out.precision(17);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      out << r << ',' << c << ',' << values(r, c).real() << ','
          << values(r, c).imag() << '\n';
    }
  }
  if (!out.good()) throw Error("write failed for '" + path + "'");
}

}  // namespace msense::em
