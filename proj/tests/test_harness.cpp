#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "msense/config.hpp"
#include "msense/errors.hpp"
#include "msense/placement.hpp"
#include "msense/rng.hpp"
#include "msense/sweep.hpp"

using namespace msense;
using harness::Config;
using harness::PanelTemplate;
using harness::PlacementKind;
using harness::PlacementSpec;

namespace {

PanelTemplate reference_panel() {
  const auto op = em::OperatingPoint::at_frequency(20e9);
  PanelTemplate panel;
  panel.width_m = 0.5;
  panel.depth_m = 0.5;
  panel.waveguide_height_m = op.wavelength_m / 5.0;
  panel.min_spacing_m = op.wavelength_m / 4.0;
  return panel;
}

std::string reference_config_json(int trials, const char* counts,
                                  const char* placements) {
  std::ostringstream out;
  out << R"({
    "frequency_hz": 2.0e10,
    "panel": {"width_m": 0.5, "depth_m": 0.5,
              "waveguide_height_lambdas": 0.2, "min_spacing_lambdas": 0.25},
    "elements": {"count": 12, "quality_factor": 100.0},
    "targets": [
      {"position_m": [5.4, 5.3, 4.0], "beta_magnitude": 1.0},
      {"position_m": [7.1, 3.5, 5.25], "beta_magnitude": 1.0}
    ],
    "rx": {"center_m": [10.0, 5.0, 5.0], "count": 16, "geometry": "planar"},
    "noise": {"sigma2_dbm": -80.0, "num_pilots": 100, "tx_power_dbm": 1.0},
    "sweep": {"element_counts": )"
      << counts << R"(, "placements": )" << placements << R"(,
              "trials": )"
      << trials << R"(, "master_seed": 9}
  })";
  return out.str();
}

}  // namespace

TEST_CASE("placement generation") {
  const auto panel = reference_panel();

  SUBCASE("grid with one element avoids the feed") {
    const auto g = harness::generate_placement(
        {PlacementKind::uniform_grid, 1, 0.05, 0}, panel);
    CHECK(g.count() == 1);
    CHECK((g.elements.col(0) - g.feed).norm() >= panel.min_spacing_m);
  }

  SUBCASE("all kinds respect the minimum spacing") {
    for (auto kind : {PlacementKind::random, PlacementKind::uniform_grid,
                      PlacementKind::gaussian_cluster}) {
      const auto g = harness::generate_placement({kind, 40, 0.05, 3}, panel);
      CHECK(g.count() == 40);
      double min_d = 1e300;
      for (int i = 0; i < 40; ++i) {
        for (int j = i + 1; j < 40; ++j) {
          min_d = std::min(min_d,
                           (g.elements.col(i) - g.elements.col(j)).norm());
        }
      }
      CAPTURE(to_string(kind));
      CHECK(min_d >= panel.min_spacing_m * (1.0 - 1e-12));
    }
  }

  SUBCASE("random placement is seed-reproducible") {
    const auto a = harness::generate_placement(
        {PlacementKind::random, 25, 0.05, 11}, panel);
    const auto b = harness::generate_placement(
        {PlacementKind::random, 25, 0.05, 11}, panel);
    CHECK((a.elements - b.elements).cwiseAbs().maxCoeff() == 0.0);
    const auto c = harness::generate_placement(
        {PlacementKind::random, 25, 0.05, 12}, panel);
    CHECK((a.elements - c.elements).cwiseAbs().maxCoeff() > 0.0);
  }

  SUBCASE("gaussian sample variance tracks the requested variance") {
    // raw (pre-clipping) per-axis variance of the underlying sampler
    rng::CounterRng gen(rng::derive_key({77u, 0x67617573ULL}));
    const double sigma2 = 0.05;
    double acc = 0.0;
    const int draws = 1000;
    for (int i = 0; i < draws; ++i) {
      const double x = std::sqrt(sigma2) * gen.normal();
      acc += x * x;
    }
    const double sample_var = acc / draws;
    CHECK(std::abs(sample_var - sigma2) < 0.15 * sigma2);
  }

  SUBCASE("infeasible packing is rejected up front") {
    CHECK_THROWS_AS(harness::generate_placement(
                        {PlacementKind::uniform_grid, 100000, 0.05, 0}, panel),
                    PlacementError);
    CHECK_THROWS_AS(harness::generate_placement(
                        {PlacementKind::random, 100000, 0.05, 0}, panel),
                    PlacementError);
  }

  SUBCASE("rejection budget surfaces as a placement error") {
    // tight cluster variance cannot fit many spaced elements
    CHECK_THROWS_AS(
        harness::generate_placement(
            {PlacementKind::gaussian_cluster, 400, 1e-6, 5}, panel),
        PlacementError);
  }
}

TEST_CASE("config parsing") {
  SUBCASE("reference json round trips") {
    const auto cfg = harness::parse_config(
        reference_config_json(2, "[9, 12]", R"([{"kind": "uniform-grid"}])"));
    CHECK(cfg.frequency_hz == 2.0e10);
    CHECK(cfg.panel.min_spacing_m ==
          doctest::Approx(0.25 * 0.0149896229).epsilon(1e-12));
    CHECK(cfg.targets.size() == 2);
    CHECK(cfg.sweep.trials == 2);
    CHECK(cfg.sweep.element_counts == std::vector<int>{9, 12});
  }

  SUBCASE("bad json is a config error") {
    CHECK_THROWS_AS(harness::parse_config("{ not json"), ConfigError);
    CHECK_THROWS_AS(harness::parse_config("{}"), ConfigError);  // no targets
  }

  SUBCASE("conflicting length keys are rejected") {
    std::string text = reference_config_json(1, "[9]",
                                             R"([{"kind": "random"}])");
    text.replace(text.find("\"waveguide_height_lambdas\": 0.2"),
                 std::string("\"waveguide_height_lambdas\": 0.2").size(),
                 "\"waveguide_height_lambdas\": 0.2, \"waveguide_height_m\": 0.003");
    CHECK_THROWS_AS(harness::parse_config(text), ConfigError);
  }

  SUBCASE("scenario materializes and validates") {
    const auto cfg = harness::parse_config(
        reference_config_json(1, "[12]", R"([{"kind": "uniform-grid"}])"));
    auto spec = cfg.placement;
    const auto panel = harness::make_panel(cfg, spec);
    const auto scenario = harness::make_scenario(cfg, panel, 3u, std::nullopt);
    CHECK(scenario.num_elements() == 12);
    CHECK(scenario.num_rx() == 16);
    CHECK(scenario.noise_variance_w == doctest::Approx(1e-11).epsilon(1e-12));
    CHECK(scenario.tx_power_w ==
          doctest::Approx(1.2589254117941675e-3).epsilon(1e-12));
    // fixed beta phase by default
    CHECK(scenario.targets[0].beta == em::Complex(1.0, 0.0));
  }
}

TEST_CASE("sweep execution") {
  SUBCASE("single cell single trial gives exactly one row") {
    const auto cfg = harness::parse_config(
        reference_config_json(1, "[9]", R"([{"kind": "uniform-grid"}])"));
    const auto rows = harness::run_sweep(cfg);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].placement == "uniform-grid");
    CHECK(rows[0].count == 9);
    CHECK(std::isfinite(rows[0].peb_achieved_m));
    CHECK(rows[0].peb_achieved_m > 0.0);
    CHECK(rows[0].peb_bound_m <= rows[0].peb_achieved_m);
  }

  SUBCASE("row count is cells times trials and order is canonical") {
    const auto cfg = harness::parse_config(reference_config_json(
        2, "[9, 12]",
        R"([{"kind": "uniform-grid"}, {"kind": "random"}])"));
    const auto rows = harness::run_sweep(cfg);
    REQUIRE(rows.size() == 8);
    CHECK(rows[0].placement == "uniform-grid");
    CHECK(rows[0].count == 9);
    CHECK(rows[0].trial == 0);
    CHECK(rows[1].trial == 1);
    CHECK(rows[4].placement == "random");
  }

  SUBCASE("thread count does not change the result") {
    const auto cfg = harness::parse_config(reference_config_json(
        2, "[9, 12]",
        R"([{"kind": "random"}, {"kind": "gaussian-cluster", "variance_m2": 0.05}])"));
    harness::SweepOptions serial;
    serial.threads = 1;
    harness::SweepOptions parallel;
    parallel.threads = 4;
    const auto a = harness::run_sweep(cfg, serial);
    const auto b = harness::run_sweep(cfg, parallel);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].peb_achieved_m == b[i].peb_achieved_m);
      CHECK(a[i].peb_bound_m == b[i].peb_bound_m);
      CHECK(a[i].peb_random_strength_m == b[i].peb_random_strength_m);
      CHECK(a[i].seed == b[i].seed);
    }
  }
}

TEST_CASE("csv output") {
  const auto dir = std::filesystem::temp_directory_path();

  SUBCASE("rows round trip bit-exactly") {
    const auto cfg = harness::parse_config(
        reference_config_json(2, "[9]", R"([{"kind": "uniform-grid"}])"));
    const auto rows = harness::run_sweep(cfg);
    const auto path = (dir / "msense_rows.csv").string();
    harness::write_rows_csv(rows, path);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line ==
          "placement,count,trial,seed,peb_bound_m,peb_achieved_m,"
          "peb_fully_digital_m,peb_random_strength_m,solver_status,"
          "wall_time_s");
    int row_idx = 0;
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(ss, field, ',')) fields.push_back(field);
      REQUIRE(fields.size() == 10);
      CHECK(std::stod(fields[4]) == rows[row_idx].peb_bound_m);
      CHECK(std::stod(fields[5]) == rows[row_idx].peb_achieved_m);
      CHECK(std::stod(fields[7]) == rows[row_idx].peb_random_strength_m);
      ++row_idx;
    }
    CHECK(row_idx == 2);
    std::filesystem::remove(path);
  }

  SUBCASE("summary means match a hand-computed fixture") {
    std::vector<harness::SweepRow> rows(3);
    for (int i = 0; i < 3; ++i) {
      rows[i].placement = "random";
      rows[i].count = 4;
      rows[i].trial = i;
      rows[i].solver_status = "optimal";
    }
    rows[0].peb_bound_m = 1.0;
    rows[1].peb_bound_m = 2.0;
    rows[2].peb_bound_m = 6.0;
    rows[0].peb_achieved_m = 2.0;
    rows[1].peb_achieved_m = 4.0;
    rows[2].peb_achieved_m = 9.0;
    rows[0].peb_fully_digital_m = 1.0;
    rows[1].peb_fully_digital_m = 1.0;
    rows[2].peb_fully_digital_m = 1.0;
    rows[0].peb_random_strength_m = 8.0;
    rows[1].peb_random_strength_m = 10.0;
    rows[2].peb_random_strength_m = 3.0;

    const auto path = (dir / "msense_summary.csv").string();
    harness::write_summary_csv(rows, path);
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    std::getline(in, line);
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 12);
    CHECK(fields[0] == "random");
    CHECK(std::stod(fields[4]) == 3.0);   // mean bound = (1+2+6)/3
    CHECK(std::stod(fields[5]) == 2.0);   // median bound
    CHECK(std::stod(fields[6]) == 5.0);   // mean achieved
    CHECK(std::stod(fields[7]) == 4.0);   // median achieved
    CHECK(std::stod(fields[10]) == 7.0);  // mean random strength
    CHECK(std::stod(fields[11]) == 8.0);  // median random strength
    std::filesystem::remove(path);
  }

  SUBCASE("svg plot is written") {
    std::vector<harness::SweepRow> rows(2);
    rows[0].placement = "random";
    rows[0].count = 16;
    rows[0].peb_achieved_m = 0.5;
    rows[1].placement = "random";
    rows[1].count = 64;
    rows[1].peb_achieved_m = 0.2;
    const auto path = (dir / "msense_plot.svg").string();
    harness::write_svg(rows, path);
    std::ifstream in(path);
    std::string all((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    CHECK(all.find("<svg") != std::string::npos);
    CHECK(all.find("polyline") != std::string::npos);
    std::filesystem::remove(path);
  }

  SUBCASE("empty outputs are refused") {
    CHECK_THROWS_AS(harness::write_rows_csv({}, "/tmp/never.csv"), Error);
  }
}
