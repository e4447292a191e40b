#pragma once

#include <span>
#include <vector>

#include "evoagent/trajectory.hpp"

namespace evoagent {

/// successes / total. Throws Errc::empty_list.
double success_rate(const std::vector<TrajectoryStatus>& outcomes);

/// I_x(a, b) by continued fraction. Throws Errc::invalid_argument outside a, b > 0, x in [0, 1].
double regularized_incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);

struct TTestResult {
  double mean_diff = 0.0;
  double t = 0.0;
  double df = 0.0;
  double one_tailed_p = 0.0;  // H1: mean(a - b) < 0
};

/// Throws Errc::length_mismatch, Errc::invalid_argument (fewer than two pairs), or
/// Errc::zero_variance when every difference is the same.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace evoagent
