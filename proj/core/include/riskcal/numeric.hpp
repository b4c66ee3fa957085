#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace riskcal {

// log(sum(exp(x))) without overflow; -inf entries are ignored and an empty
// or all -inf input yields -inf.
double log_sum_exp(std::span<const double> x);

double log_beta(double a, double b);
double log_binomial(int n, int k);

// x * log2(x) with the 0 * log 0 = 0 convention.
double xlog2x(double x);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
QuadratureRule gauss_legendre(int n);

// Bell numbers B_0..B_n as doubles (exact through n = 25).
std::vector<double> bell_numbers(int n);

// Stirling numbers of the second kind S(n, k) for k = 0..n.
std::vector<double> stirling2_row(int n);

}  // namespace riskcal
