#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace endonav::eval {

// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);
// Student t CDF with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);
double two_tailed_p(double t, double dof);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double dof = 0.0;
  std::size_t n = 0;
  double mean_diff = 0.0;
  bool degenerate = false;  // fewer than two pairs or zero difference variance
  bool significant = false; // p < 0.05
  std::string note;
};

// Two-tailed paired test on d = x - y. Throws ArgumentError when the lengths
// differ; degenerate inputs are flagged, not thrown.
TTestResult paired_t_test(std::span<const double> x, std::span<const double> y);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1), 0 for n < 2
  std::size_t n = 0;
};

MeanStd mean_std(std::span<const double> values);

// "*" p < 0.05, "**" p < 0.01, "***" p < 0.001, else "".
std::string_view stars(double p);

}  // namespace endonav::eval
