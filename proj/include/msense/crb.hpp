#pragma once

#include <Eigen/Dense>

#include "msense/channel.hpp"

namespace msense::crb {

/// Location-parameter Fisher information, partitioned into the 3U target
/// coordinates and the 2U reflection-coefficient components.
struct FimBlocks {
  Eigen::MatrixXd pp;        // 3U x 3U
  Eigen::MatrixXd pbeta;     // 3U x 2U
  Eigen::MatrixXd betabeta;  // 2U x 2U

  Eigen::MatrixXd full() const;
};

struct PebValue {
  double peb_m = 0.0;
  double condition_estimate = 0.0;  // of the effective (Schur) FIM
  bool valid = false;
};

/// Gradient of the combined mean response mu = W^H H_R m-bar with respect
/// to the 5U location parameters [x1 y1 z1 ... | Re beta | Im beta].
/// Returned as an M x 5U matrix of derivative columns.
Eigen::MatrixXcd mean_response_gradient(const channel::Scenario& scenario,
                                        const Eigen::VectorXcd& moments);

/// FIM over the location parameters, computed directly by the chain rule
/// with analytic geometry derivatives.
FimBlocks location_fim(const channel::Scenario& scenario,
                       const Eigen::VectorXcd& moments);

/// Desk-scale oracle: materializes the FIM over the channel-parameter
/// vector (angles, distances, reflection coefficients) and maps it through
/// the Jacobian onto the location parameters. Guarded to L <= 5000.
FimBlocks chain_rule_fim_oracle(const channel::Scenario& scenario,
                                const Eigen::VectorXcd& moments);

/// Length of the channel-parameter vector used by the oracle.
int channel_param_length(int num_elements, int num_rx, int num_targets);

/// FIM as a linear function of a Hermitian moment covariance M.
FimBlocks fim_linear_in_covariance(const channel::Scenario& scenario,
                                   const Eigen::MatrixXcd& covariance);

/// PEB = sqrt(Tr{(J_pp - J_pb J_bb^-1 J_pb^T)^-1}), evaluated from
/// explicitly assembled blocks. The nuisance elimination cancels many
/// digits for strongly beta-correlated geometries; the gradient-level
/// overloads below stay accurate in that regime and are preferred
/// wherever gradient columns are available.
PebValue peb(const FimBlocks& blocks);

/// Stable PEB from stacked real gradient columns (rows: any number of
/// observations, cols: 5U parameters). Projects the position columns
/// against the beta columns by QR instead of forming the Schur
/// difference.
PebValue peb_from_gradients(const Eigen::MatrixXd& stacked_gradients,
                            double fim_scale, int num_targets);

/// PEB of a moment vector via the stable gradient route.
PebValue peb_of_moments(const channel::Scenario& scenario,
                        const Eigen::VectorXcd& moments);

/// PEB of a Hermitian PSD moment covariance via the stable gradient route.
PebValue peb_of_covariance(const channel::Scenario& scenario,
                           const Eigen::MatrixXcd& covariance);

}  // namespace msense::crb
