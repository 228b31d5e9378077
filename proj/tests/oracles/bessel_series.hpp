#pragma once

namespace msense::test_oracle {

// Independent high-precision ascending-series evaluation of the cylinder
// functions, used only by tests. Runs on MPFR with the working precision
// sized to the series' cancellation (max term ~ e^x), so it stays accurate
// over the whole tested range without sharing any code or algorithm choice
// with the production implementation.
double bessel_j_ref(int nu, double x);
double bessel_y_ref(int nu, double x);

// MPFR's own implementations, used once to cross-check the series oracle.
double mpfr_builtin_j(int nu, double x);
double mpfr_builtin_y(int nu, double x);

}  // namespace msense::test_oracle
