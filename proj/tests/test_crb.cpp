#include "msense/crb.hpp"

#include <cmath>

#include "common_fixtures.hpp"
#include "doctest.h"
#include "msense/errors.hpp"

using namespace msense;
using channel::Scenario;
using crb::FimBlocks;
using em::Complex;
using test_fixtures::make_scenario;
using test_fixtures::scenario_moments;

namespace {

constexpr Complex kJ{0.0, 1.0};

double rel_fro(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  return (got - want).norm() / want.norm();
}

/// Central finite differences of mu over the location parameters.
Eigen::MatrixXcd fd_gradient(const Scenario& s,
                             const Eigen::VectorXcd& moments) {
  const int uc = s.num_targets();
  const double h_coord = 1e-4 * s.op.wavelength_m;
  const double h_beta = 1e-4;
  auto mu_of = [&](const Scenario& sc) {
    return channel::mean_response(sc.rx.combiner,
                                  channel::round_trip_channel(sc), moments);
  };
  Eigen::MatrixXcd grad(s.num_rx(), 5 * uc);
  for (int u = 0; u < uc; ++u) {
    for (int c = 0; c < 3; ++c) {
      Scenario plus = s, minus = s;
      plus.targets[u].position_m[c] += h_coord;
      minus.targets[u].position_m[c] -= h_coord;
      grad.col(3 * u + c) = (mu_of(plus) - mu_of(minus)) / (2.0 * h_coord);
    }
    Scenario plus = s, minus = s;
    plus.targets[u].beta += h_beta;
    minus.targets[u].beta -= h_beta;
    grad.col(3 * uc + u) = (mu_of(plus) - mu_of(minus)) / (2.0 * h_beta);
    plus = s;
    minus = s;
    plus.targets[u].beta += kJ * h_beta;
    minus.targets[u].beta -= kJ * h_beta;
    grad.col(3 * uc + uc + u) = (mu_of(plus) - mu_of(minus)) / (2.0 * h_beta);
  }
  return grad;
}

FimBlocks fd_fim(const Scenario& s, const Eigen::VectorXcd& moments) {
  const int uc = s.num_targets();
  const Eigen::MatrixXcd grad = fd_gradient(s, moments);
  const double scale = 2.0 * s.num_pilots * s.tx_power_w / s.noise_variance_w;
  const Eigen::MatrixXd full = scale * (grad.adjoint() * grad).real();
  FimBlocks b;
  b.pp = full.topLeftCorner(3 * uc, 3 * uc);
  b.pbeta = full.topRightCorner(3 * uc, 2 * uc);
  b.betabeta = full.bottomRightCorner(2 * uc, 2 * uc);
  return b;
}

Eigen::MatrixXd stack_real_grad(const Eigen::MatrixXcd& grad) {
  Eigen::MatrixXd stacked(2 * grad.rows(), grad.cols());
  stacked.topRows(grad.rows()) = grad.real();
  stacked.bottomRows(grad.rows()) = grad.imag();
  return stacked;
}

}  // namespace

TEST_CASE("channel parameter vector length") {
  CHECK(crb::channel_param_length(4, 4, 1) == 26);  // U (3N + 3M + 2)
  CHECK(crb::channel_param_length(3, 3, 1) == 20);
  CHECK(crb::channel_param_length(4, 4, 2) == 52);
}

TEST_CASE("analytic mean-response gradient matches finite differences") {
  for (int u = 1; u <= 2; ++u) {
    const auto s = make_scenario(4, 4, u, 100u + u);
    const auto moments = scenario_moments(s);
    const Eigen::MatrixXcd analytic = crb::mean_response_gradient(s, moments);

    const double h_coord = 1e-4 * s.op.wavelength_m;
    auto mu_of = [&](const Scenario& sc) {
      return channel::mean_response(sc.rx.combiner,
                                    channel::round_trip_channel(sc), moments);
    };
    for (int t = 0; t < u; ++t) {
      for (int c = 0; c < 3; ++c) {
        Scenario plus = s, minus = s;
        plus.targets[t].position_m[c] += h_coord;
        minus.targets[t].position_m[c] -= h_coord;
        const Eigen::VectorXcd fd =
            (mu_of(plus) - mu_of(minus)) / (2.0 * h_coord);
        CAPTURE(t);
        CAPTURE(c);
        CHECK((analytic.col(3 * t + c) - fd).norm() <= 1e-4 * fd.norm());
      }
    }
  }
}

TEST_CASE("fim scaling laws are exact") {
  const auto s = make_scenario(4, 4, 1, 11u);
  const auto moments = scenario_moments(s);
  const auto base = crb::location_fim(s, moments);

  auto s4t = s;
  s4t.num_pilots *= 4;
  const auto quad_t = crb::location_fim(s4t, moments);
  CHECK(rel_fro(quad_t.full(), (4.0 * base.full()).eval()) < 1e-14);

  auto s4n = s;
  s4n.noise_variance_w *= 4.0;
  const auto quad_n = crb::location_fim(s4n, moments);
  CHECK(rel_fro(quad_n.full(), (0.25 * base.full()).eval()) < 1e-14);
}

TEST_CASE("location fim equals the chain-rule oracle") {
  for (int n : {2, 4}) {
    for (int m : {2, 4}) {
      for (int u = 1; u <= std::min(n, m) && u <= 2; ++u) {
        const auto s = make_scenario(n, m, u, 7000u + 10u * n + m);
        const auto moments = scenario_moments(s);
        const auto direct = crb::location_fim(s, moments);
        const auto oracle = crb::chain_rule_fim_oracle(s, moments);
        CAPTURE(n);
        CAPTURE(m);
        CAPTURE(u);
        CHECK(rel_fro(direct.full(), oracle.full()) < 1e-8);
      }
    }
  }
}

TEST_CASE("location fim and oracle match finite differences") {
  for (int u = 1; u <= 2; ++u) {
    const auto s = make_scenario(4, 4, u, 31u + u);
    const auto moments = scenario_moments(s);
    const auto fd = fd_fim(s, moments);
    const auto direct = crb::location_fim(s, moments);
    const auto oracle = crb::chain_rule_fim_oracle(s, moments);
    CAPTURE(u);
    CHECK(rel_fro(direct.full(), fd.full()) < 1e-3);
    CHECK(rel_fro(oracle.full(), fd.full()) < 1e-3);
  }
}

TEST_CASE("oracle size guard") {
  // L = U (3N + 3M + 2) = 5550 exceeds the desk-scale cap.
  CHECK(crb::channel_param_length(600, 16, 3) > 5000);
  const auto big = make_scenario(600, 16, 3, 77u);
  const Eigen::VectorXcd moments = Eigen::VectorXcd::Zero(600);
  CHECK_THROWS_AS(crb::chain_rule_fim_oracle(big, moments), DomainError);
}

TEST_CASE("fim is positive semidefinite with nuisance loss") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto s = make_scenario(6, 5, 2, seed);
    const auto moments = scenario_moments(s);
    const auto blocks = crb::location_fim(s, moments);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(blocks.full());
    const double max_eig = eig.eigenvalues().maxCoeff();
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9 * max_eig);

    // Schur complement is dominated by the position block.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_bb(blocks.betabeta);
    const Eigen::MatrixXd bb_inv =
        eig_bb.eigenvectors() *
        eig_bb.eigenvalues().cwiseInverse().asDiagonal() *
        eig_bb.eigenvectors().transpose();
    const Eigen::MatrixXd schur =
        blocks.pp - blocks.pbeta * bb_inv * blocks.pbeta.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> diff(
        (blocks.pp - schur).eval());
    CHECK(diff.eigenvalues().minCoeff() >= -1e-9 * max_eig);
  }
}

TEST_CASE("fim linear in the moment covariance") {
  const auto s = make_scenario(5, 4, 2, 17u);
  const auto moments = scenario_moments(s);

  SUBCASE("rank-one covariance reproduces the moment fim") {
    const Eigen::MatrixXcd cov = moments * moments.adjoint();
    const auto via_cov = crb::fim_linear_in_covariance(s, cov);
    const auto direct = crb::location_fim(s, moments);
    CHECK(rel_fro(via_cov.full(), direct.full()) < 1e-10);
  }

  SUBCASE("zero covariance gives the zero fim") {
    const Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(5, 5);
    CHECK(crb::fim_linear_in_covariance(s, zero).full().norm() == 0.0);
  }

  SUBCASE("additivity") {
    rng::CounterRng gen(rng::derive_key({55u}));
    Eigen::MatrixXcd a(5, 5), b(5, 5);
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 5; ++c) {
        a(r, c) = Complex(gen.normal(), gen.normal());
        b(r, c) = Complex(gen.normal(), gen.normal());
      }
    }
    const Eigen::MatrixXcd m1 = (a * a.adjoint()).eval();
    const Eigen::MatrixXcd m2 = (b * b.adjoint()).eval();
    const auto j1 = crb::fim_linear_in_covariance(s, m1);
    const auto j2 = crb::fim_linear_in_covariance(s, m2);
    const auto j12 = crb::fim_linear_in_covariance(s, (m1 + m2).eval());
    CHECK(rel_fro(j12.full(), (j1.full() + j2.full()).eval()) < 1e-12);
  }

  SUBCASE("non-hermitian covariance is rejected") {
    Eigen::MatrixXcd bad = Eigen::MatrixXcd::Identity(5, 5);
    bad(0, 1) = Complex(1.0, 0.0);
    CHECK_THROWS_AS(crb::fim_linear_in_covariance(s, bad), DomainError);
  }
}

TEST_CASE("peb behavior") {
  const auto s = make_scenario(8, 16, 2, 40u);
  const auto moments = scenario_moments(s);
  const auto base = crb::peb_of_moments(s, moments);
  CHECK(base.valid);
  CHECK(base.peb_m > 0.0);

  SUBCASE("pilot and noise scalings") {
    auto s2t = s;
    s2t.num_pilots *= 2;
    const auto p2t = crb::peb_of_moments(s2t, moments);
    CHECK(p2t.peb_m ==
          doctest::Approx(base.peb_m / std::sqrt(2.0)).epsilon(1e-10));

    auto s4n = s;
    s4n.noise_variance_w *= 4.0;
    const auto p4n = crb::peb_of_moments(s4n, moments);
    CHECK(p4n.peb_m == doctest::Approx(2.0 * base.peb_m).epsilon(1e-10));
  }

  SUBCASE("finite-difference cross-check at U=1") {
    const auto s1 = make_scenario(4, 16, 1, 41u);
    const auto m1 = scenario_moments(s1);
    const auto direct = crb::peb_of_moments(s1, m1);
    const double scale =
        2.0 * s1.num_pilots * s1.tx_power_w / s1.noise_variance_w;
    const auto fd = crb::peb_from_gradients(
        stack_real_grad(fd_gradient(s1, m1)), scale, 1);
    CHECK(direct.peb_m == doctest::Approx(fd.peb_m).epsilon(1e-3));
  }

  SUBCASE("invariant under unitary recombination") {
    rng::CounterRng gen(rng::derive_key({91u}));
    const int m = s.num_rx();
    Eigen::MatrixXcd r(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) r(i, j) = Complex(gen.normal(), gen.normal());
    }
    const Eigen::MatrixXcd q = Eigen::HouseholderQR<Eigen::MatrixXcd>(r)
                                   .householderQ();
    auto sq = s;
    sq.rx.combiner = (s.rx.combiner * q).eval();
    const auto pq = crb::peb_of_moments(sq, moments);
    CHECK(pq.peb_m == doctest::Approx(base.peb_m).epsilon(1e-9));
  }

  SUBCASE("singular effective fim is reported as unobservable") {
    FimBlocks degenerate;
    degenerate.pp = Eigen::MatrixXd::Zero(3, 3);
    degenerate.pbeta = Eigen::MatrixXd::Zero(3, 2);
    degenerate.betabeta = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(crb::peb(degenerate), SolveError);

    FimBlocks bad_beta;
    bad_beta.pp = Eigen::MatrixXd::Identity(3, 3);
    bad_beta.pbeta = Eigen::MatrixXd::Zero(3, 2);
    bad_beta.betabeta = Eigen::MatrixXd::Zero(2, 2);
    CHECK_THROWS_AS(crb::peb(bad_beta), SolveError);
  }

  SUBCASE("line RX leaves the rotation circle unobservable") {
    // With unknown beta, a collinear RX carries no information about the
    // rotation of a target about the array axis.
    auto line = make_scenario(8, 16, 1, 44u);
    line.rx = channel::RxArray::uniform_line(line.rx.center_m, 16,
                                             {1.0, 0.0, 0.0}, line.op);
    line.rx.combiner = channel::make_dft_combiner(16, 44u);
    const auto m_line = scenario_moments(line);
    CHECK_THROWS_AS(crb::peb_of_moments(line, m_line), SolveError);
  }

  SUBCASE("blocks-based evaluation agrees at moderate conditioning") {
    const auto blocks = crb::location_fim(s, moments);
    const auto via_blocks = crb::peb(blocks);
    CHECK(via_blocks.peb_m == doctest::Approx(base.peb_m).epsilon(1e-4));
  }
}
