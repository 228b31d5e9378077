#pragma once

#include <cstdint>

#include "msense/channel.hpp"
#include "msense/em.hpp"
#include "msense/rng.hpp"

namespace msense::test_fixtures {

/// Rejection-sampled random layout on the reference 0.5 m x 0.5 m panel
/// with lambda/4 spacing and a centered feed.
inline em::PanelGeometry random_panel(const em::OperatingPoint& op, int n,
                                      std::uint64_t seed) {
  const double min_sp = op.wavelength_m / 4.0;
  rng::CounterRng gen(rng::derive_key({seed, 0x70616e656cULL}));
  em::PanelGeometry p;
  p.width_m = 0.5;
  p.depth_m = 0.5;
  p.waveguide_height_m = op.wavelength_m / 5.0;
  p.elements.resize(2, n);
  int placed = 0;
  while (placed < n) {
    Eigen::Vector2d cand(gen.uniform(-0.25, 0.25), gen.uniform(-0.25, 0.25));
    bool ok = cand.norm() >= min_sp;
    for (int j = 0; j < placed && ok; ++j) {
      ok = (p.elements.col(j) - cand).norm() >= min_sp;
    }
    if (ok) p.elements.col(placed++) = cand;
  }
  return p;
}

/// Reference-geometry scenario: 20 GHz, centered feed, RX line at
/// [10, 5, 5], unit-magnitude reflection coefficients, -80 dBm noise,
/// T = 100 pilots, 1 dBm transmit power.
inline channel::Scenario make_scenario(int n, int m, int u,
                                       std::uint64_t seed) {
  channel::Scenario s;
  s.op = em::OperatingPoint::at_frequency(20e9);
  s.panel = random_panel(s.op, n, seed);
  s.min_spacing_m = s.op.wavelength_m / 4.0;
  const double w0 = s.op.omega_rad_s;
  const double gamma = w0 / 100.0;
  const double c = em::passivity_limit(s.op, s.panel.waveguide_height_m);
  s.strengths = Eigen::VectorXd::Constant(n, 0.5 * gamma / (c * w0));
  s.resonance_rad_s = Eigen::VectorXd::Constant(n, w0);
  s.damping_rad_s = Eigen::VectorXd::Constant(n, gamma);
  const Eigen::Vector3d targets[2] = {{5.4, 5.3, 4.0}, {7.1, 3.5, 5.25}};
  for (int t = 0; t < u; ++t) {
    s.targets.push_back({targets[t % 2] +
                             Eigen::Vector3d(0.0, 0.0, 0.3 * (t / 2)),
                         em::Complex(1.0, 0.0)});
  }
  // Planar RX whenever the count factors into a grid: a pure line array
  // leaves the rotation circle about its axis unobservable.
  const int root = static_cast<int>(std::sqrt(static_cast<double>(m)));
  if (root * root == m && m >= 4) {
    s.rx = channel::RxArray::uniform_planar({10.0, 5.0, 5.0}, m,
                                            {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0},
                                            s.op);
  } else {
    s.rx = channel::RxArray::uniform_line({10.0, 5.0, 5.0}, m, {1.0, 0.0, 0.0},
                                          s.op);
  }
  s.rx.combiner = channel::make_dft_combiner(m, seed);
  s.noise_variance_w = 1e-11;
  s.num_pilots = 100;
  s.tx_power_w = channel::dbm_to_watt(1.0);
  return s;
}

/// Exact dipole moments for the scenario's resonant polarizabilities.
inline Eigen::VectorXcd scenario_moments(const channel::Scenario& s) {
  const auto cm = em::build_coupling_matrix(s.op, s.panel);
  const auto ev = em::excitation_vector(s.op, s.panel);
  const auto alpha = em::resonant_polarizabilities(
      s.strengths, s.resonance_rad_s, s.damping_rad_s);
  return em::solve_dipoles_exact(cm.g, alpha, ev.h_f).moments;
}

}  // namespace msense::test_fixtures
