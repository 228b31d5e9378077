#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "msense/em.hpp"

namespace msense::channel {

using em::Complex;

/// Point scatterer with complex reflection coefficient.
struct Target {
  Eigen::Vector3d position_m;
  Complex beta;
};

/// M antennas at half-wavelength spacing with a digital combining matrix
/// (required unitary). A line layout leaves every target position
/// ambiguous along the rotation circle about the array axis once the
/// reflection coefficients are unknown, so multi-dimensional localization
/// uses the planar layout.
struct RxArray {
  Eigen::Vector3d center_m;
  Eigen::Matrix3Xd antenna_positions_m;  // 3 x M
  Eigen::MatrixXcd combiner;             // W_RX, M x M

  int count() const { return static_cast<int>(antenna_positions_m.cols()); }

  static RxArray uniform_line(const Eigen::Vector3d& center_m, int num_antennas,
                              const Eigen::Vector3d& axis,
                              const em::OperatingPoint& op);

  /// Near-square grid (rows x cols = M, rows the largest divisor <=
  /// sqrt(M)) spanned by two orthogonal axes, centered at the given point.
  static RxArray uniform_planar(const Eigen::Vector3d& center_m,
                                int num_antennas, const Eigen::Vector3d& axis1,
                                const Eigen::Vector3d& axis2,
                                const em::OperatingPoint& op);
};

/// DFT-codebook combiner: unitary DFT matrix with a seeded random column
/// permutation.
Eigen::MatrixXcd make_dft_combiner(int num_antennas, std::uint64_t seed);

/// Everything a single bistatic sensing experiment needs.
struct Scenario {
  em::OperatingPoint op;
  em::PanelGeometry panel;
  double min_spacing_m = 0.0;
  Eigen::VectorXd strengths;         // F_n
  Eigen::VectorXd resonance_rad_s;   // omega_0,n
  Eigen::VectorXd damping_rad_s;     // Gamma_n
  std::vector<Target> targets;
  RxArray rx;
  double noise_variance_w = 0.0;
  int num_pilots = 0;
  double tx_power_w = 0.0;

  int num_elements() const { return panel.count(); }
  int num_rx() const { return rx.count(); }
  int num_targets() const { return static_cast<int>(targets.size()); }
};

/// Full invariant check (panel, Lorentzian positivity, target placement,
/// unitary combiner, U <= min(N, M), noise/pilot settings).
void validate_scenario(const Scenario& scenario);

/// Near-field array response with cached geometry for reporting and for
/// the channel-parameter oracle.
struct FocusingVector {
  Eigen::VectorXcd values;
  double center_distance_m = 0.0;   // R_u (TX) or B_u (RX)
  Eigen::VectorXd distances_m;      // R_{n,u} or B_{m,u}
  Eigen::VectorXd elevation_rad;    // theta_e or psi_e
  Eigen::VectorXd azimuth_rad;      // theta_a or psi_a
};

FocusingVector tx_focusing_vector(const em::OperatingPoint& op,
                                  const em::PanelGeometry& panel,
                                  const Target& target);

/// d a_TX / d(target x, y, z); columns ordered x, y, z.
Eigen::MatrixXcd tx_focusing_jacobian(const em::OperatingPoint& op,
                                      const em::PanelGeometry& panel,
                                      const Target& target);

FocusingVector rx_focusing_vector(const em::OperatingPoint& op,
                                  const RxArray& rx, const Target& target);

Eigen::MatrixXcd rx_focusing_jacobian(const em::OperatingPoint& op,
                                      const RxArray& rx, const Target& target);

/// H_R = sum_u beta_u a_RX(p_u) a_TX(p_u)^H.
Eigen::MatrixXcd round_trip_channel(const std::vector<FocusingVector>& tx,
                                    const std::vector<FocusingVector>& rx,
                                    const Eigen::VectorXcd& betas);

/// Convenience overload building the focusing vectors from the scenario.
Eigen::MatrixXcd round_trip_channel(const Scenario& scenario);

/// mu = W_RX^H H_R m-bar.
Eigen::VectorXcd mean_response(const Eigen::MatrixXcd& combiner,
                               const Eigen::MatrixXcd& round_trip,
                               const Eigen::VectorXcd& moments);

/// Received pilot block Y = mu i^T + N, deterministic under the seed.
Eigen::MatrixXcd simulate_received(const Scenario& scenario,
                                   const Eigen::VectorXcd& moments,
                                   std::uint64_t seed);

double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);

}  // namespace msense::channel
