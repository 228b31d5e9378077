#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "msense/channel.hpp"
#include "msense/placement.hpp"

namespace msense::harness {

struct TargetConfig {
  Eigen::Vector3d position_m;
  double beta_magnitude = 1.0;
  double beta_phase_rad = 0.0;
};

struct RxConfig {
  Eigen::Vector3d center_m;
  int count = 16;
  std::string geometry = "planar";  // "planar" | "line"
  Eigen::Vector3d axis1{0.0, 1.0, 0.0};
  Eigen::Vector3d axis2{0.0, 0.0, 1.0};
  std::uint64_t codebook_seed = 0;
};

struct SweepConfig {
  std::vector<int> element_counts;
  std::vector<PlacementSpec> placements;
  int trials = 1;
  std::uint64_t master_seed = 1;
  bool fully_digital = true;
  bool random_strength = true;
  bool randomize_beta_phase = true;
  bool randomize_codebook = true;
};

struct Config {
  double frequency_hz = 20e9;
  PanelTemplate panel;  // min spacing included
  int element_count = 64;
  PlacementSpec placement;          // single-scenario commands
  double quality_factor = 100.0;    // Gamma = omega_0 / Q
  double strength_fraction = 1.0;   // F_n as a fraction of Gamma/(C omega)
  std::vector<TargetConfig> targets;
  RxConfig rx;
  double sigma2_dbm = -80.0;
  int num_pilots = 100;
  double tx_power_dbm = 1.0;
  bool extraction_sample = false;   // rank-one unless told otherwise
  bool full_lambda = false;
  SweepConfig sweep;

  em::OperatingPoint operating_point() const;
};

/// Parse and validate a JSON configuration file (see the README for the
/// schema). Length-like panel keys accept either *_m or *_lambdas.
Config load_config(const std::string& path);
Config parse_config(const std::string& json_text);

/// Panel for one placement draw.
em::PanelGeometry make_panel(const Config& config, const PlacementSpec& spec);

/// Scenario with the given panel; the combiner and reflection phases come
/// from the explicit seeds so sweep trials stay counter-addressable.
channel::Scenario make_scenario(const Config& config,
                                const em::PanelGeometry& panel,
                                std::uint64_t codebook_seed,
                                std::optional<std::uint64_t> beta_phase_seed);

}  // namespace msense::harness
