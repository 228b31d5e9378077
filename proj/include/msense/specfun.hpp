#pragma once

#include <complex>

namespace msense::specfun {

/// Cylinder-function order. The response model only ever evaluates orders
/// 0, 1 and 2; other orders are unrepresentable by construction.
enum class CylinderOrder : int { zero = 0, one = 1, two = 2 };

/// Validating conversion from a plain integer order.
CylinderOrder cylinder_order(int nu);

/// Series/asymptotic crossover: ascending series in compensated
/// double-double arithmetic below, Hankel asymptotic expansion above.
/// Both regimes overlap accurately around this point (covered by tests
/// straddling it).
inline constexpr double kSeriesAsymptoticCrossover = 20.0;

/// Bessel function of the first kind J_nu(x), x >= 0.
double bessel_j(CylinderOrder nu, double x);

/// Bessel function of the second kind Y_nu(x), x > 0.
double bessel_y(CylinderOrder nu, double x);

/// Hankel function of the second kind, H2_nu(x) = J_nu(x) - i Y_nu(x).
std::complex<double> hankel2(CylinderOrder nu, double x);

}  // namespace msense::specfun
