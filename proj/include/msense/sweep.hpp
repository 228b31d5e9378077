#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msense/config.hpp"

namespace msense::harness {

struct SweepRow {
  std::string placement;  // kind label, gaussian variants carry the variance
  int count = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  double peb_bound_m = 0.0;
  double peb_achieved_m = 0.0;
  double peb_fully_digital_m = 0.0;
  double peb_random_strength_m = 0.0;
  std::string solver_status;
  double wall_time_s = 0.0;
};

struct SweepOptions {
  int threads = 1;      // 0 picks the hardware concurrency
  bool timing = false;  // leave wall_time_s at zero unless asked, so two
                        // runs of the same config stay bit-identical
};

/// Full placement x count x trial grid; failures are recorded in-row.
/// Rows come back in canonical (placement, count, trial) order no matter
/// how many threads ran.
std::vector<SweepRow> run_sweep(const Config& config,
                                const SweepOptions& options = {});

/// Header plus one line per row, floats at 17 significant digits.
void write_rows_csv(const std::vector<SweepRow>& rows, const std::string& path);

/// Per-cell mean/median sibling summary.
void write_summary_csv(const std::vector<SweepRow>& rows,
                       const std::string& path);

/// Minimal static plot of median achieved PEB versus element count.
void write_svg(const std::vector<SweepRow>& rows, const std::string& path);

std::string placement_label(const PlacementSpec& spec);

}  // namespace msense::harness
