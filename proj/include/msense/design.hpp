#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

#include "msense/channel.hpp"
#include "msense/crb.hpp"
#include "msense/sdp.hpp"

namespace msense::design {

using em::Complex;

/// Columns [A_TX | A_TX,x | A_TX,y | A_TX,z]: the stacked focusing vectors
/// of all targets followed by their coordinate-derivative vectors.
struct SubspaceBasis {
  Eigen::MatrixXcd u_tx;  // N x 4U
  int num_targets = 0;
};

SubspaceBasis build_subspace(const em::OperatingPoint& op,
                             const em::PanelGeometry& panel,
                             const std::vector<channel::Target>& targets);

/// FIM restricted to the moment subspace, stored in whitened location
/// coordinates so every block the optimizer touches is O(1). Whitening is
/// a block-diagonal congruence (positions, reflection coefficients) built
/// from QR factors of stacked gradient columns; `unwhiten_pp` maps back.
class SubspaceFim {
 public:
  SubspaceFim(const channel::Scenario& scenario, const SubspaceBasis& basis,
              double trace_budget);

  int subspace_dim() const { return static_cast<int>(basis_.cols()); }
  int num_targets() const { return num_targets_; }
  double trace_budget() const { return trace_budget_; }
  const Eigen::MatrixXcd& normalized_basis() const { return basis_; }

  /// Whitened FIM of the covariance sum_{de} budget * theta_{de} u_d u_e^H
  /// (diagonal theta for the literal structure, Hermitian for the full
  /// variant); theta is dimensionless with trace <= 1.
  Eigen::MatrixXd fim_of_theta(const Eigen::VectorXd& theta) const;
  Eigen::MatrixXd fim_of_theta(const Eigen::MatrixXcd& theta) const;

  /// Whitened-coordinate kernels, one per scalar optimization variable.
  const Eigen::MatrixXd& kernel_diag(int d) const { return k_diag_[d]; }
  Eigen::MatrixXd kernel_sym(int d, int e) const;
  Eigen::MatrixXd kernel_skew(int d, int e) const;

  /// Position-block weight P = Sp^T Sp: Tr(Z^-1) = Tr(Z'^-1 P).
  const Eigen::MatrixXd& position_weight() const { return weight_; }

  /// Map a whitened Z' back to original location coordinates.
  Eigen::MatrixXd unwhiten_pp(const Eigen::MatrixXd& z_white) const;

  /// PEB of the rank-one covariance (basis * c)(basis * c)^H, evaluated in
  /// whitened coordinates where the nuisance elimination is benign.
  double peb_of_coefficients(const Eigen::VectorXcd& c) const;

 private:
  Eigen::MatrixXcd basis_;  // normalized columns
  int num_targets_;
  double trace_budget_;
  double fim_scale_;
  Eigen::MatrixXd sp_, sp_inv_, sbeta_;
  Eigen::MatrixXd weight_;
  // cross-Gram tensors of whitened gradient columns, xg_[e][d] = G'_e^H G'_d
  std::vector<std::vector<Eigen::MatrixXcd>> xg_;
  std::vector<Eigen::MatrixXd> k_diag_;
};

struct P1Options {
  bool full_lambda = false;   // Hermitian Lambda instead of diagonal
  double gap_tol = 1e-8;
  int max_iterations = 200;
  bool verbose = false;
};

struct SdpSolution {
  Eigen::VectorXd lambda;        // diagonal-mode weights (physical trace units)
  Eigen::MatrixXcd lambda_full;  // full-mode Hermitian weights
  bool full_lambda = false;
  Eigen::MatrixXd z;             // original location coordinates
  double bound_m = 0.0;          // sqrt(Tr Z^-1)
  double objective_bound_m = 0.0;  // sqrt(Tr V) at the optimum
  double trace_m = 0.0;
  double trace_budget = 0.0;
  sdp::SolverStatus status = sdp::SolverStatus::numerical_trouble;
  int iterations = 0;
  double min_block_eigenvalue = 0.0;  // feasibility audit, whitened scale
  std::shared_ptr<const SubspaceFim> fim;

  Eigen::MatrixXcd coefficient_factor() const;  // T with M_opt = (U T)(U T)^H
  Eigen::MatrixXcd moment_factor() const;       // W = U T
  Eigen::MatrixXcd moment_covariance() const;   // N x N
};

/// Convex covariance relaxation: minimizes the PEB epigraph over the
/// structured moment covariance under the trace budget N C^2.
SdpSolution solve_p1(const channel::Scenario& scenario,
                     const SubspaceBasis& basis, double passivity_c,
                     const P1Options& options = {});

enum class ExtractionMode { rank_one, sample };

/// Feasible moment sequence from the optimal covariance: principal
/// eigenpair, or the best of eight covariance samples under the seed.
Eigen::VectorXcd extract_moments(const SdpSolution& solution,
                                 ExtractionMode mode, std::uint64_t seed);

struct P2Options {
  double kkt_tol = 1e-8;
  int max_iterations = 300;
  double condition_cap = 1e12;
};

struct DesignResult {
  Eigen::VectorXd strengths;           // F_n
  Eigen::VectorXcd achieved_moments;   // exact solve under the design
  double bound_peb_m = 0.0;
  double achieved_peb_m = 0.0;
  double retraction_residual = 0.0;    // || m_opt + (G^-1 + ...) h_f ||
  double kkt_residual = 0.0;
  bool converged = false;
  bool passivity_ok = false;           // per-element audit of the design
};

/// Least-squares retraction of the relaxed moments onto per-element
/// resonance strengths under the passivity bound, convex in x_n = 1/F_n.
DesignResult retract_p2(const Eigen::VectorXcd& m_opt,
                        const Eigen::MatrixXcd& coupling,
                        const Eigen::VectorXcd& h_f,
                        const Eigen::VectorXd& damping_rad_s, double omega,
                        double passivity_c, const P2Options& options = {});

/// Achieved PEB of the retracted design via the exact dipole solve; also
/// audits per-element passivity. Fills the result's achieved fields.
crb::PebValue evaluate_design(const channel::Scenario& scenario,
                              DesignResult& result);

}  // namespace msense::design
