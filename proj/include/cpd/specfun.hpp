#pragma once

#include <span>

namespace cpd {

// log(1 + e^u) without overflow for large |u|.
double log1pexp(double u);

// 1 / (1 + e^{-u})
double sigmoid(double u);

double log_sum_exp(std::span<const double> vals);

// Exponential integral E1(z) = int_z^inf e^-t / t dt, z > 0.
// Series for z <= 1, continued fraction otherwise; absolute tolerance 1e-12.
double expint_e1(double z);

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
double gamma_q(double a, double x);

// Survival function of a chi-square with k degrees of freedom.
double chi_square_sf(double x, double k);

}  // namespace cpd
