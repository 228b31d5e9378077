#include "msense/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "msense/em.hpp"
#include "msense/errors.hpp"
#include "msense/rng.hpp"

namespace msense::harness {

namespace {

using nlohmann::json;

double require_number(const json& j, const std::string& key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw ConfigError("missing or non-numeric key '" + key + "'");
  }
  return j[key].get<double>();
}

double number_or(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError("key '" + key + "' must be numeric");
  return j[key].get<double>();
}

Eigen::Vector3d vec3(const json& j, const std::string& key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3) {
    throw ConfigError("key '" + key + "' must be a 3-element array");
  }
  return {j[key][0].get<double>(), j[key][1].get<double>(),
          j[key][2].get<double>()};
}

/// Length given either directly in meters or in wavelengths.
double length_key(const json& j, const std::string& base, double wavelength,
                  double fallback_lambdas) {
  const std::string meters = base + "_m";
  const std::string lambdas = base + "_lambdas";
  if (j.contains(meters) && j.contains(lambdas)) {
    throw ConfigError("give either '" + meters + "' or '" + lambdas + "'");
  }
  if (j.contains(meters)) return j[meters].get<double>();
  if (j.contains(lambdas)) return j[lambdas].get<double>() * wavelength;
  return fallback_lambdas * wavelength;
}

PlacementSpec parse_placement(const json& j, int count,
                              std::uint64_t default_seed) {
  PlacementSpec spec;
  spec.count = count;
  spec.seed = default_seed;
  if (j.contains("kind")) {
    spec.kind = placement_kind_from_string(j["kind"].get<std::string>());
  }
  spec.cluster_variance_m2 = number_or(j, "variance_m2", 0.05);
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  return spec;
}

}  // namespace

em::OperatingPoint Config::operating_point() const {
  return em::OperatingPoint::at_frequency(frequency_hz);
}

Config parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& err) {
    throw ConfigError(std::string("config is not valid JSON: ") + err.what());
  }

  Config cfg;
  cfg.frequency_hz = number_or(root, "frequency_hz", 20e9);
  if (!(cfg.frequency_hz > 0.0)) throw ConfigError("frequency must be positive");
  const double lambda = em::kSpeedOfLight / cfg.frequency_hz;

  const json panel = root.value("panel", json::object());
  cfg.panel.width_m = number_or(panel, "width_m", 0.5);
  cfg.panel.depth_m = number_or(panel, "depth_m", 0.5);
  cfg.panel.waveguide_height_m =
      length_key(panel, "waveguide_height", lambda, 0.2);
  cfg.panel.min_spacing_m = length_key(panel, "min_spacing", lambda, 0.25);
  if (panel.contains("feed_m")) {
    const auto& f = panel["feed_m"];
    if (!f.is_array() || f.size() != 2) {
      throw ConfigError("panel.feed_m must be a 2-element array");
    }
    cfg.panel.feed = Eigen::Vector2d(f[0].get<double>(), f[1].get<double>());
  }
  if (cfg.panel.width_m <= 0.0 || cfg.panel.depth_m <= 0.0 ||
      cfg.panel.waveguide_height_m <= 0.0 || cfg.panel.min_spacing_m <= 0.0) {
    throw ConfigError("panel dimensions must be positive");
  }

  const json elements = root.value("elements", json::object());
  cfg.element_count = static_cast<int>(number_or(elements, "count", 64));
  if (cfg.element_count < 1) throw ConfigError("elements.count must be >= 1");
  cfg.quality_factor = number_or(elements, "quality_factor", 100.0);
  if (cfg.quality_factor <= 0.0) {
    throw ConfigError("elements.quality_factor must be positive");
  }
  cfg.strength_fraction = number_or(elements, "strength_fraction", 1.0);
  if (!(cfg.strength_fraction > 0.0) || cfg.strength_fraction > 1.0) {
    throw ConfigError("elements.strength_fraction must lie in (0, 1]");
  }
  cfg.placement = parse_placement(elements.value("placement", json::object()),
                                  cfg.element_count, 1);

  if (!root.contains("targets") || !root["targets"].is_array() ||
      root["targets"].empty()) {
    throw ConfigError("at least one target is required");
  }
  for (const auto& t : root["targets"]) {
    TargetConfig target;
    target.position_m = vec3(t, "position_m");
    target.beta_magnitude = number_or(t, "beta_magnitude", 1.0);
    target.beta_phase_rad = number_or(t, "beta_phase_rad", 0.0);
    if (!(target.beta_magnitude > 0.0)) {
      throw ConfigError("target beta_magnitude must be positive");
    }
    cfg.targets.push_back(target);
  }

  const json rx = root.value("rx", json::object());
  cfg.rx.center_m = rx.contains("center_m") ? vec3(rx, "center_m")
                                            : Eigen::Vector3d(10.0, 5.0, 5.0);
  cfg.rx.count = static_cast<int>(number_or(rx, "count", 16));
  if (cfg.rx.count < 1) throw ConfigError("rx.count must be >= 1");
  cfg.rx.geometry = rx.value("geometry", std::string("planar"));
  if (cfg.rx.geometry != "planar" && cfg.rx.geometry != "line") {
    throw ConfigError("rx.geometry must be 'planar' or 'line'");
  }
  if (rx.contains("axis1")) cfg.rx.axis1 = vec3(rx, "axis1");
  if (rx.contains("axis2")) cfg.rx.axis2 = vec3(rx, "axis2");
  cfg.rx.codebook_seed = rx.value("codebook_seed", 0ULL);

  const json noise = root.value("noise", json::object());
  cfg.sigma2_dbm = number_or(noise, "sigma2_dbm", -80.0);
  cfg.num_pilots = static_cast<int>(number_or(noise, "num_pilots", 100));
  cfg.tx_power_dbm = number_or(noise, "tx_power_dbm", 1.0);
  if (cfg.num_pilots < 1) throw ConfigError("noise.num_pilots must be >= 1");

  const json design = root.value("design", json::object());
  const std::string extraction =
      design.value("extraction", std::string("rank-one"));
  if (extraction == "rank-one") {
    cfg.extraction_sample = false;
  } else if (extraction == "sample") {
    cfg.extraction_sample = true;
  } else {
    throw ConfigError("design.extraction must be 'rank-one' or 'sample'");
  }
  cfg.full_lambda = design.value("full_lambda", false);

  const json sweep = root.value("sweep", json::object());
  if (sweep.contains("element_counts")) {
    for (const auto& n : sweep["element_counts"]) {
      cfg.sweep.element_counts.push_back(n.get<int>());
      if (cfg.sweep.element_counts.back() < 1) {
        throw ConfigError("sweep.element_counts entries must be >= 1");
      }
    }
  } else {
    cfg.sweep.element_counts = {16, 64, 256};
  }
  if (sweep.contains("placements")) {
    for (const auto& p : sweep["placements"]) {
      cfg.sweep.placements.push_back(parse_placement(p, 0, 0));
    }
  } else {
    cfg.sweep.placements.push_back({PlacementKind::uniform_grid, 0, 0.05, 0});
  }
  cfg.sweep.trials = static_cast<int>(number_or(sweep, "trials", 1));
  if (cfg.sweep.trials < 1) throw ConfigError("sweep.trials must be >= 1");
  cfg.sweep.master_seed = sweep.value("master_seed", 1ULL);
  const json baselines = sweep.value("baselines", json::object());
  cfg.sweep.fully_digital = baselines.value("fully_digital", true);
  cfg.sweep.random_strength = baselines.value("random_strength", true);
  cfg.sweep.randomize_beta_phase = sweep.value("randomize_beta_phase", true);
  cfg.sweep.randomize_codebook = sweep.value("randomize_codebook", true);

  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

em::PanelGeometry make_panel(const Config& config, const PlacementSpec& spec) {
  return generate_placement(spec, config.panel);
}

channel::Scenario make_scenario(const Config& config,
                                const em::PanelGeometry& panel,
                                std::uint64_t codebook_seed,
                                std::optional<std::uint64_t> beta_phase_seed) {
  channel::Scenario s;
  s.op = config.operating_point();
  s.panel = panel;
  s.min_spacing_m = config.panel.min_spacing_m;
  const int n = panel.count();
  const double w0 = s.op.omega_rad_s;
  const double gamma = w0 / config.quality_factor;
  const double c = em::passivity_limit(s.op, panel.waveguide_height_m);
  const double f_max = gamma / (c * w0);
  s.strengths = Eigen::VectorXd::Constant(n, config.strength_fraction * f_max);
  s.resonance_rad_s = Eigen::VectorXd::Constant(n, w0);
  s.damping_rad_s = Eigen::VectorXd::Constant(n, gamma);

  std::optional<rng::CounterRng> beta_rng;
  if (beta_phase_seed.has_value()) {
    beta_rng.emplace(rng::derive_key({*beta_phase_seed, 0x62657461ULL}));
  }
  for (const auto& t : config.targets) {
    const double phase = beta_rng.has_value()
                             ? beta_rng->uniform(0.0, 2.0 * std::numbers::pi)
                             : t.beta_phase_rad;
    s.targets.push_back(
        {t.position_m, std::polar(t.beta_magnitude, phase)});
  }

  if (config.rx.geometry == "planar") {
    s.rx = channel::RxArray::uniform_planar(config.rx.center_m, config.rx.count,
                                            config.rx.axis1, config.rx.axis2,
                                            s.op);
  } else {
    s.rx = channel::RxArray::uniform_line(config.rx.center_m, config.rx.count,
                                          config.rx.axis1, s.op);
  }
  s.rx.combiner = channel::make_dft_combiner(config.rx.count, codebook_seed);

  s.noise_variance_w = channel::dbm_to_watt(config.sigma2_dbm);
  s.num_pilots = config.num_pilots;
  s.tx_power_w = channel::dbm_to_watt(config.tx_power_dbm);
  channel::validate_scenario(s);
  return s;
}

}  // namespace msense::harness
