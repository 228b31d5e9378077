#include "msense/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msense/errors.hpp"
#include "msense/rng.hpp"

namespace msense::channel {

namespace {
constexpr Complex kJ{0.0, 1.0};
}

RxArray RxArray::uniform_line(const Eigen::Vector3d& center_m, int num_antennas,
                              const Eigen::Vector3d& axis,
                              const em::OperatingPoint& op) {
  if (num_antennas < 1) throw DomainError("RX needs at least one antenna");
  if (axis.norm() <= 0.0) throw DomainError("RX axis must be non-zero");
  RxArray rx;
  rx.center_m = center_m;
  rx.antenna_positions_m.resize(3, num_antennas);
  const Eigen::Vector3d u = axis.normalized();
  const double d = op.wavelength_m / 2.0;
  for (int m = 0; m < num_antennas; ++m) {
    const double offset = (m - (num_antennas - 1) / 2.0) * d;
    rx.antenna_positions_m.col(m) = center_m + offset * u;
  }
  rx.combiner = Eigen::MatrixXcd::Identity(num_antennas, num_antennas);
  return rx;
}

RxArray RxArray::uniform_planar(const Eigen::Vector3d& center_m,
                                int num_antennas, const Eigen::Vector3d& axis1,
                                const Eigen::Vector3d& axis2,
                                const em::OperatingPoint& op) {
  if (num_antennas < 1) throw DomainError("RX needs at least one antenna");
  const Eigen::Vector3d u1 = axis1.normalized();
  const Eigen::Vector3d u2 = axis2.normalized();
  if (axis1.norm() <= 0.0 || axis2.norm() <= 0.0 ||
      std::abs(u1.dot(u2)) > 1e-12) {
    throw DomainError("planar RX axes must be non-zero and orthogonal");
  }
  int rows = static_cast<int>(std::sqrt(static_cast<double>(num_antennas)));
  while (rows > 1 && num_antennas % rows != 0) --rows;
  const int cols = num_antennas / rows;
  RxArray rx;
  rx.center_m = center_m;
  rx.antenna_positions_m.resize(3, num_antennas);
  const double d = op.wavelength_m / 2.0;
  int idx = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      rx.antenna_positions_m.col(idx++) =
          center_m + (r - (rows - 1) / 2.0) * d * u1 +
          (c - (cols - 1) / 2.0) * d * u2;
    }
  }
  rx.combiner = Eigen::MatrixXcd::Identity(num_antennas, num_antennas);
  return rx;
}

Eigen::MatrixXcd make_dft_combiner(int num_antennas, std::uint64_t seed) {
  if (num_antennas < 1) throw DomainError("combiner needs at least one antenna");
  const int m = num_antennas;
  Eigen::MatrixXcd dft(m, m);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) {
      const double phase =
          -2.0 * std::numbers::pi * static_cast<double>(r) * c / m;
      dft(r, c) = scale * std::exp(kJ * phase);
    }
  }
  // Seeded random column order picks one codebook draw.
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  rng::CounterRng gen(rng::derive_key({seed, 0x77727874ULL}));
  for (int i = m - 1; i > 0; --i) {
    const int j = static_cast<int>(gen.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  Eigen::MatrixXcd w(m, m);
  for (int c = 0; c < m; ++c) w.col(c) = dft.col(perm[c]);
  return w;
}

void validate_scenario(const Scenario& scenario) {
  em::validate_panel(scenario.panel, scenario.min_spacing_m);
  const int n = scenario.num_elements();
  const int m = scenario.num_rx();
  const int u = scenario.num_targets();
  if (scenario.strengths.size() != n || scenario.resonance_rad_s.size() != n ||
      scenario.damping_rad_s.size() != n) {
    throw DomainError("per-element Lorentzian parameters must have length N");
  }
  for (int i = 0; i < n; ++i) {
    if (scenario.strengths[i] <= 0.0 || scenario.resonance_rad_s[i] <= 0.0 ||
        scenario.damping_rad_s[i] <= 0.0) {
      throw DomainError("Lorentzian parameters must be positive");
    }
  }
  if (u < 1) throw DomainError("scenario needs at least one target");
  if (u > std::min(n, m)) {
    throw DomainError("number of targets must not exceed min(N, M)");
  }
  for (int t = 0; t < u; ++t) {
    const auto& tgt = scenario.targets[t];
    if (tgt.position_m.z() == 0.0) {
      throw DomainError("target " + std::to_string(t) +
                        " lies in the panel plane");
    }
    for (int i = 0; i < n; ++i) {
      Eigen::Vector3d e(scenario.panel.elements(0, i),
                        scenario.panel.elements(1, i), 0.0);
      if ((tgt.position_m - e).norm() <= 0.0) {
        throw SingularityError("target collocated with an element");
      }
    }
    for (int a = 0; a < m; ++a) {
      if ((tgt.position_m - scenario.rx.antenna_positions_m.col(a)).norm() <=
          0.0) {
        throw SingularityError("target collocated with an RX antenna");
      }
    }
  }
  if (scenario.rx.combiner.rows() != m || scenario.rx.combiner.cols() != m) {
    throw DomainError("combiner must be M x M");
  }
  const Eigen::MatrixXcd gram =
      scenario.rx.combiner.adjoint() * scenario.rx.combiner;
  const double dev =
      (gram - Eigen::MatrixXcd::Identity(m, m)).cwiseAbs().maxCoeff();
  if (dev > 1e-10) {
    throw DomainError("combiner is not unitary (deviation " +
                      std::to_string(dev) + ")");
  }
  if (m > 1) {
    // nearest-neighbor spacing must be exactly lambda/2 (line or grid)
    double min_d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < m; ++a) {
      for (int b = a + 1; b < m; ++b) {
        min_d = std::min(min_d, (scenario.rx.antenna_positions_m.col(a) -
                                 scenario.rx.antenna_positions_m.col(b))
                                    .norm());
      }
    }
    if (std::abs(min_d - scenario.op.wavelength_m / 2.0) >
        1e-12 * scenario.op.wavelength_m) {
      throw DomainError("RX antenna spacing must be lambda/2");
    }
  }
  if (!(scenario.noise_variance_w > 0.0)) {
    throw DomainError("noise variance must be positive");
  }
  if (scenario.num_pilots < 1) throw DomainError("need at least one pilot");
  if (!(scenario.tx_power_w > 0.0)) {
    throw DomainError("transmit power must be positive");
  }
}

FocusingVector tx_focusing_vector(const em::OperatingPoint& op,
                                  const em::PanelGeometry& panel,
                                  const Target& target) {
  const int n = panel.count();
  const double k = op.wavenumber_rad_m;
  const double r_center = target.position_m.norm();  // panel center at origin
  if (r_center <= 0.0) {
    throw SingularityError("target collocated with the panel center");
  }
  const double amp = -k * k * op.impedance_ohm /
                     (2.0 * std::numbers::pi * r_center);
  FocusingVector fv;
  fv.values.resize(n);
  fv.center_distance_m = r_center;
  fv.distances_m.resize(n);
  fv.elevation_rad.resize(n);
  fv.azimuth_rad.resize(n);
  for (int i = 0; i < n; ++i) {
    const double dx = target.position_m.x() - panel.elements(0, i);
    const double dy = target.position_m.y() - panel.elements(1, i);
    const double dz = target.position_m.z();
    const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (r <= 0.0) {
      throw SingularityError("target collocated with element " +
                             std::to_string(i));
    }
    // sin(theta_e) sin(theta_a) collapses to dy / R; the broadside case
    // (rho_xy = 0) is then the model-consistent null with no special case.
    fv.values[i] = amp * (dy / r) * std::exp(kJ * k * r);
    fv.distances_m[i] = r;
    fv.elevation_rad[i] = std::acos(std::clamp(dz / r, -1.0, 1.0));
    fv.azimuth_rad[i] = std::atan2(dy, dx);
  }
  return fv;
}

Eigen::MatrixXcd tx_focusing_jacobian(const em::OperatingPoint& op,
                                      const em::PanelGeometry& panel,
                                      const Target& target) {
  const int n = panel.count();
  const double k = op.wavenumber_rad_m;
  const double r_center = target.position_m.norm();
  if (r_center <= 0.0) {
    throw SingularityError("target collocated with the panel center");
  }
  const double amp = -k * k * op.impedance_ohm /
                     (2.0 * std::numbers::pi * r_center);
  const Eigen::Vector3d center_dir = target.position_m / r_center;
  Eigen::MatrixXcd jac(n, 3);
  for (int i = 0; i < n; ++i) {
    const double dx = target.position_m.x() - panel.elements(0, i);
    const double dy = target.position_m.y() - panel.elements(1, i);
    const double dz = target.position_m.z();
    const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (r <= 0.0) {
      throw SingularityError("target collocated with element " +
                             std::to_string(i));
    }
    const double g = dy / r;
    const Complex phase = std::exp(kJ * k * r);
    const Eigen::Vector3d dr_dc(dx / r, dy / r, dz / r);
    const Eigen::Vector3d dg_dc(-dy * dx / (r * r * r),
                                1.0 / r - dy * dy / (r * r * r),
                                -dy * dz / (r * r * r));
    for (int c = 0; c < 3; ++c) {
      const Complex damp = -amp * center_dir[c] / r_center;
      jac(i, c) =
          phase * (damp * g + amp * dg_dc[c] + amp * g * kJ * k * dr_dc[c]);
    }
  }
  return jac;
}

FocusingVector rx_focusing_vector(const em::OperatingPoint& op,
                                  const RxArray& rx, const Target& target) {
  const int m = rx.count();
  const double k = op.wavenumber_rad_m;
  const double b_center = (target.position_m - rx.center_m).norm();
  if (b_center <= 0.0) {
    throw SingularityError("target collocated with the RX center");
  }
  FocusingVector fv;
  fv.values.resize(m);
  fv.center_distance_m = b_center;
  fv.distances_m.resize(m);
  fv.elevation_rad.resize(m);
  fv.azimuth_rad.resize(m);
  for (int a = 0; a < m; ++a) {
    const Eigen::Vector3d d = target.position_m - rx.antenna_positions_m.col(a);
    const double b = d.norm();
    if (b <= 0.0) {
      throw SingularityError("target collocated with RX antenna " +
                             std::to_string(a));
    }
    fv.values[a] = std::exp(kJ * k * b) / b_center;
    fv.distances_m[a] = b;
    fv.elevation_rad[a] = std::acos(std::clamp(d.z() / b, -1.0, 1.0));
    fv.azimuth_rad[a] = std::atan2(d.y(), d.x());
  }
  return fv;
}

Eigen::MatrixXcd rx_focusing_jacobian(const em::OperatingPoint& op,
                                      const RxArray& rx, const Target& target) {
  const int m = rx.count();
  const double k = op.wavenumber_rad_m;
  const double b_center = (target.position_m - rx.center_m).norm();
  if (b_center <= 0.0) {
    throw SingularityError("target collocated with the RX center");
  }
  const Eigen::Vector3d center_dir = (target.position_m - rx.center_m) / b_center;
  Eigen::MatrixXcd jac(m, 3);
  for (int a = 0; a < m; ++a) {
    const Eigen::Vector3d d = target.position_m - rx.antenna_positions_m.col(a);
    const double b = d.norm();
    if (b <= 0.0) {
      throw SingularityError("target collocated with RX antenna " +
                             std::to_string(a));
    }
    const Complex value = std::exp(kJ * k * b) / b_center;
    for (int c = 0; c < 3; ++c) {
      jac(a, c) = value * (kJ * k * d[c] / b - center_dir[c] / b_center);
    }
  }
  return jac;
}

Eigen::MatrixXcd round_trip_channel(const std::vector<FocusingVector>& tx,
                                    const std::vector<FocusingVector>& rx,
                                    const Eigen::VectorXcd& betas) {
  if (tx.size() != rx.size() ||
      betas.size() != static_cast<Eigen::Index>(tx.size())) {
    throw DomainError("round_trip_channel: one focusing pair per target");
  }
  if (tx.empty()) throw DomainError("round_trip_channel: no targets");
  const auto m = rx.front().values.size();
  const auto n = tx.front().values.size();
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(m, n);
  for (std::size_t u = 0; u < tx.size(); ++u) {
    if (rx[u].values.size() != m || tx[u].values.size() != n) {
      throw DomainError("round_trip_channel: inconsistent vector lengths");
    }
    h.noalias() += betas[static_cast<Eigen::Index>(u)] * rx[u].values *
                   tx[u].values.adjoint();
  }
  return h;
}

Eigen::MatrixXcd round_trip_channel(const Scenario& scenario) {
  std::vector<FocusingVector> tx, rx;
  Eigen::VectorXcd betas(scenario.num_targets());
  for (int u = 0; u < scenario.num_targets(); ++u) {
    tx.push_back(tx_focusing_vector(scenario.op, scenario.panel,
                                    scenario.targets[u]));
    rx.push_back(rx_focusing_vector(scenario.op, scenario.rx,
                                    scenario.targets[u]));
    betas[u] = scenario.targets[u].beta;
  }
  return round_trip_channel(tx, rx, betas);
}

Eigen::VectorXcd mean_response(const Eigen::MatrixXcd& combiner,
                               const Eigen::MatrixXcd& round_trip,
                               const Eigen::VectorXcd& moments) {
  if (combiner.rows() != round_trip.rows() ||
      round_trip.cols() != moments.size()) {
    throw DomainError("mean_response: dimension mismatch");
  }
  return combiner.adjoint() * (round_trip * moments);
}

Eigen::MatrixXcd simulate_received(const Scenario& scenario,
                                   const Eigen::VectorXcd& moments,
                                   std::uint64_t seed) {
  const Eigen::MatrixXcd h = round_trip_channel(scenario);
  const Eigen::VectorXcd mu = mean_response(scenario.rx.combiner, h, moments);
  const int m = scenario.num_rx();
  const int t = scenario.num_pilots;
  // Constant-modulus pilots [i]_t = sqrt(P_TX).
  const double pilot = std::sqrt(scenario.tx_power_w);
  Eigen::MatrixXcd y(m, t);
  rng::CounterRng gen(rng::derive_key({seed, 0x6e6f697365ULL}));
  for (int col = 0; col < t; ++col) {
    for (int row = 0; row < m; ++row) {
      y(row, col) =
          mu[row] * pilot + gen.complex_normal(scenario.noise_variance_w);
    }
  }
  return y;
}

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watt_to_dbm(double watt) {
  if (!(watt > 0.0)) throw DomainError("watt_to_dbm requires positive power");
  return 10.0 * std::log10(watt) + 30.0;
}

}  // namespace msense::channel
