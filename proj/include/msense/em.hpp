#pragma once

#include <Eigen/Dense>
#include <complex>
#include <numbers>
#include <string>

namespace msense::em {

using Complex = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kVacuumPermeability =
    4.0e-7 * std::numbers::pi;  // H/m

/// Frequency-derived quantities shared by every kernel. Air-filled
/// waveguide: the guided wavenumber equals the free-space one.
struct OperatingPoint {
  double frequency_hz;
  double omega_rad_s;
  double wavenumber_rad_m;
  double wavelength_m;
  double impedance_ohm;
  double mu0_h_m;

  static OperatingPoint at_frequency(double frequency_hz);
};

/// Aperture, element and feed layout. The aperture is centered at the
/// origin of the xy-plane; elements and feed sit at z = 0.
struct PanelGeometry {
  double width_m = 0.0;
  double depth_m = 0.0;
  double waveguide_height_m = 0.0;
  Eigen::Matrix2Xd elements;  // 2 x N in-plane positions
  Eigen::Vector2d feed = Eigen::Vector2d::Zero();

  int count() const { return static_cast<int>(elements.cols()); }
};

/// Checks the panel invariants: everything inside the aperture, pairwise
/// spacing at least `min_spacing_m`, feed not collocated with any element.
void validate_panel(const PanelGeometry& panel, double min_spacing_m);

struct LorentzianParams {
  double strength;          // F, dimensionless
  double resonance_rad_s;   // omega_0
  double damping_rad_s;     // Gamma
};

/// alpha(omega) = F omega^2 / (omega_0^2 - omega^2 + j Gamma omega)
Complex polarizability_lorentzian(const LorentzianParams& params,
                                  double omega_rad_s);

/// Resonant polarizabilities -j F_n omega_0,n / Gamma_n for a whole panel.
Eigen::VectorXcd resonant_polarizabilities(const Eigen::VectorXd& strengths,
                                           const Eigen::VectorXd& resonance_rad_s,
                                           const Eigen::VectorXd& damping_rad_s);

struct CouplingMatrix {
  Eigen::MatrixXcd g;                 // N x N, zero diagonal, symmetric
  Eigen::MatrixXd pair_distance_m;    // rho_{n,j}
  Eigen::MatrixXd pair_azimuth_rad;   // psi_{n,j}
};

/// Waveguide (guided-mode) coupling kernel for in-plane displacement dr.
Complex green_wg(const OperatingPoint& op, double waveguide_height_m,
                 const Eigen::Vector2d& dr);

/// Free-space x-to-x dyadic kernel, image-corrected, for in-plane dr.
Complex green_fs(const OperatingPoint& op, const Eigen::Vector2d& dr);

/// Pairwise interaction matrix: green_wg + green_fs off the diagonal.
CouplingMatrix build_coupling_matrix(const OperatingPoint& op,
                                     const PanelGeometry& panel);

struct ExcitationVector {
  Eigen::VectorXcd h_f;        // per-element feed coupling
  double feed_current_a = 1.0;
};

/// Line-source feed coupling vector h_f.
ExcitationVector excitation_vector(const OperatingPoint& op,
                                   const PanelGeometry& panel);

struct DipoleSolution {
  Eigen::VectorXcd moments;        // m-bar, per unit feed current
  bool approximate = false;
  double condition_estimate = 0.0; // of the solved system
  double residual_rel = 0.0;       // exact solve only
  double contraction_q = 0.0;      // Neumann solve only
  bool contractive = true;
};

/// Solves (diag(alpha)^-1 - G) m = h_f directly.
DipoleSolution solve_dipoles_exact(const Eigen::MatrixXcd& g,
                                   const Eigen::VectorXcd& alpha,
                                   const Eigen::VectorXcd& h_f,
                                   double condition_cap = 1e12);

/// Two-term truncated-series approximation
///   m ~ -(G^-1 + G^-1 diag(alpha)^-1 G^-1) h_f,
/// flagged with the contraction estimate q = ||G^-1 diag(alpha)^-1||_2.
DipoleSolution solve_dipoles_neumann(const Eigen::MatrixXcd& g,
                                     const Eigen::VectorXcd& alpha,
                                     const Eigen::VectorXcd& h_f,
                                     double condition_cap = 1e12);

/// Passivity constant C = k^3/(3 pi) + k^2/(8 h).
double passivity_limit(const OperatingPoint& op, double waveguide_height_m);

struct PowerAudit {
  Complex local_field_a_m;
  double supplied_w;
  double radiated_w;
  double margin_w;   // supplied - radiated
  bool passive;
};

/// Per-element power balance under local field H_loc.
PowerAudit power_audit(const OperatingPoint& op, double waveguide_height_m,
                       Complex alpha, Complex local_field);

/// Debug dump with columns row,col,re,im (vectors use col 0).
void write_complex_csv(const Eigen::MatrixXcd& values, const std::string& path);

}  // namespace msense::em
