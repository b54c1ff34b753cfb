#pragma once

#include <cstddef>
#include <span>

namespace cvrank {

/// Size, mean and unbiased variance of a sample. The two-pass computation is
/// shared by every caller so that identical inputs give identical bits.
struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;
};

Summary summarize(std::span<const double> values);

struct TTestResult {
  double t = 0.0;
  /// Welch-Satterthwaite degrees of freedom (real valued).
  double df = 0.0;
  /// Two-tailed probability.
  double p = 1.0;
  bool significant = false;

  /// Integer df as printed in reports, e.g. "t(38)".
  long reporting_df() const noexcept;
};

/// Stand-in for an infinite statistic when both samples have zero variance
/// but different means.
inline constexpr double kDegenerateT = 1.0e300;

/// Welch's two-tailed two-sample t-test assuming unequal variances.
/// Throws Error{SampleTooSmall} for fewer than two values on either side and
/// Error{InvalidArgument} unless 0 < alpha < 1.
TTestResult welch_ttest(std::span<const double> a, std::span<const double> b, double alpha);
TTestResult welch_ttest(const Summary& a, const Summary& b, double alpha);

/// 2 * (1 - CDF_t(|t|; df)). Throws Error{InvalidDf} for df <= 0 or NaN.
double two_tailed_p(double t, double df);

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
double regularized_incomplete_beta(double a, double b, double x);

struct Descriptive {
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
};

/// Throws Error{EmptySample}.
Descriptive descriptive(std::span<const double> values);

}  // namespace cvrank
