#include "msense/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>
#include <bit>

#include "msense/design.hpp"
#include "msense/errors.hpp"
#include "msense/rng.hpp"

namespace msense::harness {

namespace {

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

double finite_or_inf(double v) {
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

SweepRow run_cell_trial(const Config& config, const PlacementSpec& placement,
                        int count, int trial, bool timing) {
  SweepRow row;
  row.placement = placement_label(placement);
  row.count = count;
  row.trial = trial;

  // content-addressed trial key: stable under re-ordering of the sweep grid
  const std::uint64_t key = rng::derive_key(
      {config.sweep.master_seed, static_cast<std::uint64_t>(placement.kind),
       std::bit_cast<std::uint64_t>(placement.cluster_variance_m2),
       static_cast<std::uint64_t>(count), static_cast<std::uint64_t>(trial)});
  row.seed = key;

  const auto t0 = std::chrono::steady_clock::now();
  try {
    PlacementSpec spec = placement;
    spec.count = count;
    spec.seed = rng::derive_key({key, 1});
    const auto panel = make_panel(config, spec);

    const std::uint64_t codebook_seed = config.sweep.randomize_codebook
                                            ? rng::derive_key({key, 2})
                                            : config.rx.codebook_seed;
    std::optional<std::uint64_t> beta_seed;
    if (config.sweep.randomize_beta_phase) beta_seed = rng::derive_key({key, 3});
    const auto scenario = make_scenario(config, panel, codebook_seed, beta_seed);

    const double c =
        em::passivity_limit(scenario.op, panel.waveguide_height_m);
    const auto basis =
        design::build_subspace(scenario.op, scenario.panel, scenario.targets);

    design::P1Options p1_opts;
    p1_opts.full_lambda = config.full_lambda;
    auto sdp_solution = design::solve_p1(scenario, basis, c, p1_opts);
    row.peb_bound_m = finite_or_inf(sdp_solution.bound_m);
    row.solver_status = sdp::to_string(sdp_solution.status);

    const auto mode = config.extraction_sample ? design::ExtractionMode::sample
                                               : design::ExtractionMode::rank_one;
    const auto m_opt =
        design::extract_moments(sdp_solution, mode, rng::derive_key({key, 4}));

    if (config.sweep.fully_digital) {
      row.peb_fully_digital_m =
          finite_or_inf(crb::peb_of_moments(scenario, m_opt).peb_m);
    } else {
      row.peb_fully_digital_m = std::numeric_limits<double>::infinity();
    }

    const auto cm = em::build_coupling_matrix(scenario.op, scenario.panel);
    const auto ev = em::excitation_vector(scenario.op, scenario.panel);
    auto result =
        design::retract_p2(m_opt, cm.g, ev.h_f, scenario.damping_rad_s,
                           scenario.op.omega_rad_s, c);
    result.bound_peb_m = sdp_solution.bound_m;
    design::evaluate_design(scenario, result);
    row.peb_achieved_m = finite_or_inf(result.achieved_peb_m);

    if (config.sweep.random_strength) {
      rng::CounterRng strength_rng(rng::derive_key({key, 5}));
      Eigen::VectorXd f_random(count);
      for (int i = 0; i < count; ++i) {
        const double f_max =
            scenario.damping_rad_s[i] / (c * scenario.op.omega_rad_s);
        f_random[i] = strength_rng.uniform_open01() * f_max;
      }
      const auto alpha = em::resonant_polarizabilities(
          f_random, scenario.resonance_rad_s, scenario.damping_rad_s);
      const auto sol = em::solve_dipoles_exact(cm.g, alpha, ev.h_f);
      row.peb_random_strength_m =
          finite_or_inf(crb::peb_of_moments(scenario, sol.moments).peb_m);
    } else {
      row.peb_random_strength_m = std::numeric_limits<double>::infinity();
    }
  } catch (const Error& err) {
    const std::string reason = err.what();
    row.solver_status = "error: " + reason.substr(0, 80);
    const double inf = std::numeric_limits<double>::infinity();
    if (row.peb_bound_m == 0.0) row.peb_bound_m = inf;
    row.peb_achieved_m = inf;
    if (row.peb_fully_digital_m == 0.0) row.peb_fully_digital_m = inf;
    row.peb_random_strength_m = inf;
  }
  if (timing) {
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  }
  return row;
}

struct CellStats {
  std::vector<double> bound, achieved, digital, random;
  int failures = 0;
};

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

std::string placement_label(const PlacementSpec& spec) {
  std::string label = to_string(spec.kind);
  if (spec.kind == PlacementKind::gaussian_cluster) {
    std::ostringstream out;
    out << label << "@" << spec.cluster_variance_m2;
    label = out.str();
  }
  return label;
}

std::vector<SweepRow> run_sweep(const Config& config,
                                const SweepOptions& options) {
  if (config.sweep.element_counts.empty() || config.sweep.placements.empty()) {
    throw ConfigError("sweep needs at least one placement and element count");
  }
  struct Job {
    const PlacementSpec* placement;
    int count;
    int trial;
  };
  std::vector<Job> jobs;
  for (const auto& placement : config.sweep.placements) {
    for (int count : config.sweep.element_counts) {
      for (int trial = 0; trial < config.sweep.trials; ++trial) {
        jobs.push_back({&placement, count, trial});
      }
    }
  }

  std::vector<SweepRow> rows(jobs.size());
  int threads = options.threads;
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
  }
  threads = std::min<int>(threads, static_cast<int>(jobs.size()));

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= jobs.size()) break;
      const Job& job = jobs[idx];
      rows[idx] = run_cell_trial(config, *job.placement, job.count, job.trial,
                                 options.timing);
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

void write_rows_csv(const std::vector<SweepRow>& rows,
                    const std::string& path) {
  if (rows.empty()) throw Error("refusing to write an empty sweep CSV");
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "placement,count,trial,seed,peb_bound_m,peb_achieved_m,"
         "peb_fully_digital_m,peb_random_strength_m,solver_status,"
         "wall_time_s\n";
  for (const auto& row : rows) {
    out << row.placement << ',' << row.count << ',' << row.trial << ','
        << row.seed << ',' << format_double(row.peb_bound_m) << ','
        << format_double(row.peb_achieved_m) << ','
        << format_double(row.peb_fully_digital_m) << ','
        << format_double(row.peb_random_strength_m) << ','
        << row.solver_status << ',' << format_double(row.wall_time_s) << '\n';
  }
  if (!out.good()) throw Error("write failed for '" + path + "'");
}

void write_summary_csv(const std::vector<SweepRow>& rows,
                       const std::string& path) {
  if (rows.empty()) throw Error("refusing to write an empty summary");
  std::map<std::pair<std::string, int>, CellStats> cells;
  for (const auto& row : rows) {
    auto& cell = cells[{row.placement, row.count}];
    if (std::isfinite(row.peb_achieved_m)) {
      cell.bound.push_back(row.peb_bound_m);
      cell.achieved.push_back(row.peb_achieved_m);
      cell.digital.push_back(row.peb_fully_digital_m);
      cell.random.push_back(row.peb_random_strength_m);
    } else {
      ++cell.failures;
    }
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "placement,count,trials,failures,mean_bound_m,median_bound_m,"
         "mean_achieved_m,median_achieved_m,mean_fully_digital_m,"
         "median_fully_digital_m,mean_random_strength_m,"
         "median_random_strength_m\n";
  for (const auto& [cell_key, stat] : cells) {
    out << cell_key.first << ',' << cell_key.second << ','
        << stat.achieved.size() + stat.failures << ',' << stat.failures << ','
        << format_double(mean_of(stat.bound)) << ','
        << format_double(median_of(stat.bound)) << ','
        << format_double(mean_of(stat.achieved)) << ','
        << format_double(median_of(stat.achieved)) << ','
        << format_double(mean_of(stat.digital)) << ','
        << format_double(median_of(stat.digital)) << ','
        << format_double(mean_of(stat.random)) << ','
        << format_double(median_of(stat.random)) << '\n';
  }
  if (!out.good()) throw Error("write failed for '" + path + "'");
}

void write_svg(const std::vector<SweepRow>& rows, const std::string& path) {
  if (rows.empty()) throw Error("refusing to plot an empty sweep");
  // median achieved PEB per (placement, count)
  std::map<std::string, std::map<int, std::vector<double>>> series;
  for (const auto& row : rows) {
    if (std::isfinite(row.peb_achieved_m)) {
      series[row.placement][row.count].push_back(row.peb_achieved_m);
    }
  }
  double x_min = 1e300, x_max = 0, y_min = 1e300, y_max = 0;
  std::map<std::string, std::vector<std::pair<double, double>>> lines;
  for (auto& [label, by_count] : series) {
    for (auto& [count, values] : by_count) {
      const double med = median_of(values);
      if (!(med > 0.0) || !std::isfinite(med)) continue;
      lines[label].push_back({static_cast<double>(count), med});
      x_min = std::min(x_min, static_cast<double>(count));
      x_max = std::max(x_max, static_cast<double>(count));
      y_min = std::min(y_min, med);
      y_max = std::max(y_max, med);
    }
  }
  if (lines.empty() || x_min >= x_max) {
    x_min = 1;
    x_max = 10;
  }
  if (y_min >= y_max) {
    y_min = y_max > 0 ? y_max / 10 : 1e-3;
    y_max = y_max > 0 ? y_max : 1.0;
  }

  const double w = 640, h = 420, ml = 70, mr = 20, mt = 20, mb = 50;
  auto sx = [&](double n) {
    return ml + (std::log10(n) - std::log10(x_min)) /
                    (std::log10(x_max) - std::log10(x_min)) * (w - ml - mr);
  };
  auto sy = [&](double v) {
    return h - mb - (std::log10(v) - std::log10(y_min)) /
                        (std::log10(y_max) - std::log10(y_min)) *
                        (h - mt - mb);
  };
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                           "#9467bd", "#ff7f0e", "#8c564b"};

  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w
      << "' height='" << h << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr
      << "' y2='" << h - mb << "' stroke='black'/>\n"
      << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='"
      << h - mb << "' stroke='black'/>\n"
      << "<text x='" << (w / 2) << "' y='" << h - 12
      << "' text-anchor='middle' font-size='13'>elements N (log)</text>\n"
      << "<text x='16' y='" << (h / 2)
      << "' text-anchor='middle' font-size='13' transform='rotate(-90 16 "
      << (h / 2) << ")'>median PEB [m] (log)</text>\n";
  int color = 0;
  double legend_y = mt + 12;
  for (const auto& [label, points] : lines) {
    const char* stroke = palette[color % 6];
    out << "<polyline fill='none' stroke='" << stroke << "' stroke-width='2' points='";
    for (const auto& [n, v] : points) out << sx(n) << ',' << sy(v) << ' ';
    out << "'/>\n";
    for (const auto& [n, v] : points) {
      out << "<circle cx='" << sx(n) << "' cy='" << sy(v)
          << "' r='3' fill='" << stroke << "'/>\n";
    }
    out << "<text x='" << w - mr - 200 << "' y='" << legend_y
        << "' font-size='12' fill='" << stroke << "'>" << label << "</text>\n";
    legend_y += 16;
    ++color;
  }
  out << "</svg>\n";
  if (!out.good()) throw Error("write failed for '" + path + "'");
}

}  // namespace msense::harness
