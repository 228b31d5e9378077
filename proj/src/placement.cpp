#include "msense/placement.hpp"

#include <cmath>
#include <vector>

#include "msense/errors.hpp"
#include "msense/rng.hpp"

namespace msense::harness {

namespace {

constexpr int kRejectionBudget = 100000;

void check_packing(const PlacementSpec& spec, const PanelTemplate& panel) {
  if (spec.count < 1) throw PlacementError("placement needs at least one element");
  if (panel.min_spacing_m <= 0.0) {
    throw PlacementError("minimum spacing must be positive");
  }
  // square-lattice packing estimate
  const auto per_axis = [&](double extent) {
    return static_cast<long>(std::floor(extent / panel.min_spacing_m)) + 1;
  };
  const long cap = per_axis(panel.width_m) * per_axis(panel.depth_m);
  if (spec.count > cap) {
    throw PlacementError("requested " + std::to_string(spec.count) +
                         " elements but the aperture packs at most " +
                         std::to_string(cap));
  }
}

em::PanelGeometry finish(const PanelTemplate& panel,
                         const std::vector<Eigen::Vector2d>& points) {
  em::PanelGeometry g;
  g.width_m = panel.width_m;
  g.depth_m = panel.depth_m;
  g.waveguide_height_m = panel.waveguide_height_m;
  g.feed = panel.feed;
  g.elements.resize(2, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    g.elements.col(static_cast<Eigen::Index>(i)) = points[i];
  }
  return g;
}

bool admissible(const Eigen::Vector2d& cand, const PanelTemplate& panel,
                const std::vector<Eigen::Vector2d>& accepted) {
  if ((cand - panel.feed).norm() < panel.min_spacing_m) return false;
  for (const auto& p : accepted) {
    if ((cand - p).norm() < panel.min_spacing_m) return false;
  }
  return true;
}

em::PanelGeometry place_random(const PlacementSpec& spec,
                               const PanelTemplate& panel) {
  rng::CounterRng gen(rng::derive_key({spec.seed, 0x726e64ULL}));
  std::vector<Eigen::Vector2d> points;
  points.reserve(spec.count);
  const double hw = panel.width_m / 2.0;
  const double hd = panel.depth_m / 2.0;
  for (int attempt = 0; attempt < kRejectionBudget; ++attempt) {
    Eigen::Vector2d cand(gen.uniform(-hw, hw), gen.uniform(-hd, hd));
    if (admissible(cand, panel, points)) {
      points.push_back(cand);
      if (static_cast<int>(points.size()) == spec.count) {
        return finish(panel, points);
      }
    }
  }
  throw PlacementError("random placement exhausted the rejection budget at " +
                       std::to_string(points.size()) + " of " +
                       std::to_string(spec.count) + " elements");
}

em::PanelGeometry place_grid(const PlacementSpec& spec,
                             const PanelTemplate& panel) {
  int rows = static_cast<int>(
      std::ceil(std::sqrt(static_cast<double>(spec.count))));
  int cols = (spec.count + rows - 1) / rows;
  for (int grow = 0; grow < 64; ++grow) {
    const double sx = panel.width_m / cols;
    const double sy = panel.depth_m / rows;
    if (std::min(sx, sy) < panel.min_spacing_m * (1.0 - 1e-12)) {
      throw PlacementError("grid spacing would fall below the minimum");
    }
    std::vector<Eigen::Vector2d> points;
    points.reserve(spec.count);
    for (int r = 0; r < rows && static_cast<int>(points.size()) < spec.count;
         ++r) {
      for (int c = 0; c < cols && static_cast<int>(points.size()) < spec.count;
           ++c) {
        Eigen::Vector2d cand(-panel.width_m / 2.0 + (c + 0.5) * sx,
                             -panel.depth_m / 2.0 + (r + 0.5) * sy);
        if ((cand - panel.feed).norm() >= panel.min_spacing_m) {
          points.push_back(cand);
        }
      }
    }
    if (static_cast<int>(points.size()) == spec.count) {
      return finish(panel, points);
    }
    // feed exclusion swallowed lattice points: grow the short axis
    if (cols <= rows) {
      ++cols;
    } else {
      ++rows;
    }
  }
  throw PlacementError("grid placement failed to clear the feed exclusion");
}

em::PanelGeometry place_gaussian(const PlacementSpec& spec,
                                 const PanelTemplate& panel) {
  if (spec.cluster_variance_m2 <= 0.0) {
    throw PlacementError("cluster variance must be positive");
  }
  rng::CounterRng gen(rng::derive_key({spec.seed, 0x67617573ULL}));
  const double sigma = std::sqrt(spec.cluster_variance_m2);
  const double hw = panel.width_m / 2.0;
  const double hd = panel.depth_m / 2.0;
  std::vector<Eigen::Vector2d> points;
  points.reserve(spec.count);
  for (int attempt = 0; attempt < kRejectionBudget; ++attempt) {
    Eigen::Vector2d cand(sigma * gen.normal(), sigma * gen.normal());
    if (std::abs(cand.x()) > hw || std::abs(cand.y()) > hd) continue;
    if (admissible(cand, panel, points)) {
      points.push_back(cand);
      if (static_cast<int>(points.size()) == spec.count) {
        return finish(panel, points);
      }
    }
  }
  throw PlacementError(
      "gaussian placement exhausted the rejection budget at " +
      std::to_string(points.size()) + " of " + std::to_string(spec.count));
}

}  // namespace

PlacementKind placement_kind_from_string(const std::string& name) {
  if (name == "random") return PlacementKind::random;
  if (name == "uniform-grid") return PlacementKind::uniform_grid;
  if (name == "gaussian-cluster") return PlacementKind::gaussian_cluster;
  throw ConfigError("unknown placement kind '" + name + "'");
}

const char* to_string(PlacementKind kind) {
  switch (kind) {
    case PlacementKind::random: return "random";
    case PlacementKind::uniform_grid: return "uniform-grid";
    case PlacementKind::gaussian_cluster: return "gaussian-cluster";
  }
  return "unknown";
}

em::PanelGeometry generate_placement(const PlacementSpec& spec,
                                     const PanelTemplate& panel) {
  check_packing(spec, panel);
  em::PanelGeometry geometry;
  switch (spec.kind) {
    case PlacementKind::random: geometry = place_random(spec, panel); break;
    case PlacementKind::uniform_grid: geometry = place_grid(spec, panel); break;
    case PlacementKind::gaussian_cluster:
      geometry = place_gaussian(spec, panel);
      break;
  }
  em::validate_panel(geometry, panel.min_spacing_m);
  return geometry;
}

}  // namespace msense::harness
