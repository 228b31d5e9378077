#pragma once

#include <cstdint>
#include <string>

#include "msense/em.hpp"

namespace msense::harness {

enum class PlacementKind { random, uniform_grid, gaussian_cluster };

PlacementKind placement_kind_from_string(const std::string& name);
const char* to_string(PlacementKind kind);

struct PlacementSpec {
  PlacementKind kind = PlacementKind::uniform_grid;
  int count = 0;
  double cluster_variance_m2 = 0.05;  // per-axis, gaussian-cluster only
  std::uint64_t seed = 0;
};

/// Aperture parameters shared by all placements; the feed sits at the
/// aperture center with an exclusion zone of one minimum spacing.
struct PanelTemplate {
  double width_m = 0.0;
  double depth_m = 0.0;
  double waveguide_height_m = 0.0;
  Eigen::Vector2d feed = Eigen::Vector2d::Zero();
  double min_spacing_m = 0.0;
};

/// Random: uniform rejection sampling. Grid: ceil(sqrt(N)) x ceil(N/rows)
/// cell-center lattice, row-major, grown until N points clear the feed
/// exclusion. Gaussian: centered normal draws clipped to the aperture by
/// redrawing. All kinds enforce the minimum spacing; the rejection budget
/// is 1e5 attempts.
em::PanelGeometry generate_placement(const PlacementSpec& spec,
                                     const PanelTemplate& panel);

}  // namespace msense::harness
