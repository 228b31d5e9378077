#include "msense/boxqp.hpp"

#include "doctest.h"
#include "msense/rng.hpp"

using namespace msense;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("unconstrained minimum inside the box") {
  MatrixXd h(2, 2);
  h << 2, 0, 0, 4;
  VectorXd g(2), lower(2), x0(2);
  g << -2, -8;  // minimum at (1, 2)
  lower << 0, 0;
  x0 << 0, 0;
  const auto res = boxqp::solve_lower_bounded(h, g, lower, x0);
  CHECK(res.converged);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(res.x[1] == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("active bounds land exactly on the bound") {
  MatrixXd h(2, 2);
  h << 2, 0, 0, 2;
  VectorXd g(2), lower(2), x0(2);
  g << 2, 2;  // unconstrained minimum (-1, -1) violates both bounds
  lower << 0.25, -0.5;
  x0 << 1, 1;
  const auto res = boxqp::solve_lower_bounded(h, g, lower, x0);
  CHECK(res.converged);
  CHECK(res.x[0] == 0.25);   // exact clamp
  CHECK(res.x[1] == -0.5);
}

TEST_CASE("matches the frozen least-squares reference") {
  // min ||A x - b||^2, x >= l, frozen from scipy lsq_linear (tol 1e-14).
  MatrixXd a(7, 4);
  a << -0.006826779865523, 1.046143292304902, 0.741588421288483,
      0.723956541649991, 1.618776223334076, -1.205558142646329,
      -0.626955471076373, -1.320663211605125, -0.10775250794803,
      0.998763655317023, -0.02194788627038, 0.495880066464222,
      -1.910768664176647, 0.147064165878328, -0.906943251259296,
      1.775389387246141, 0.886849076458792, 0.949349483258034,
      -0.057854962500969, 0.612862274280094, 0.6578901620545,
      -0.344402666420563, -0.497372035495855, -0.11477278340687,
      -0.605452009350435, -0.594339417504854, -0.283375375603958,
      -0.728417727183453;
  VectorXd b(7);
  b << 1.532655571890801, -3.192172667590868, 1.647124257231384,
      -1.251132940516902, -1.091879911388222, -2.70169428373158,
      -0.28848423769794;
  VectorXd lower(4);
  lower << 0.5, -1.0, 0.2, 1.5;

  const MatrixXd h = 2.0 * a.transpose() * a;
  const VectorXd g = -2.0 * a.transpose() * b;
  const auto res = boxqp::solve_lower_bounded(h, g, lower, lower);
  CHECK(res.converged);
  CHECK(res.x[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(res.x[1] == doctest::Approx(-0.8120482922014403).epsilon(1e-7));
  CHECK(res.x[2] == doctest::Approx(3.2722150866982838).epsilon(1e-7));
  CHECK(res.x[3] == doctest::Approx(1.5).epsilon(1e-9));
  // 0.5 ||Ax-b||^2 at the solution
  const double cost = 0.5 * (a * res.x - b).squaredNorm();
  CHECK(cost == doctest::Approx(6.246677544982245).epsilon(1e-10));
}

TEST_CASE("semidefinite hessian with a dead coordinate stays at its start") {
  MatrixXd h = MatrixXd::Zero(3, 3);
  h(0, 0) = 2.0;
  h(1, 1) = 2.0;  // coordinate 2 never enters the objective
  VectorXd g(3), lower(3);
  g << -2, 4, 0;
  lower << 0, 0, 1;
  const auto res = boxqp::solve_lower_bounded(h, g, lower, lower);
  CHECK(res.converged);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.x[1] == 0.0);
  CHECK(res.x[2] == 1.0);
}

TEST_CASE("random strongly convex problems satisfy kkt") {
  rng::CounterRng gen(rng::derive_key({4242u}));
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 8;
    MatrixXd a(n + 3, n);
    for (int r = 0; r < a.rows(); ++r) {
      for (int c = 0; c < n; ++c) a(r, c) = gen.normal();
    }
    const MatrixXd h = a.transpose() * a + 0.01 * MatrixXd::Identity(n, n);
    VectorXd g(n), lower(n);
    for (int i = 0; i < n; ++i) {
      g[i] = 3.0 * gen.normal();
      lower[i] = gen.normal();
    }
    const auto res = boxqp::solve_lower_bounded(h, g, lower, lower);
    CHECK(res.converged);
    CHECK(res.kkt_residual <= 1e-8);
    for (int i = 0; i < n; ++i) CHECK(res.x[i] >= lower[i]);
  }
}
