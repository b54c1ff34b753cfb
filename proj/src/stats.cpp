#include "cvrank/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "cvrank/error.hpp"

namespace cvrank {

namespace {

double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);  // std::lgamma writes the global signgam
#else
  return std::lgamma(x);
#endif
}

double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

// Continued fraction for I_x(a, b) (modified Lentz). Converges quickly when
// x < (a + 1) / (a + b + 2); callers use the symmetry relation otherwise.
double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  constexpr int kMaxIter = 100000;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

// I_x(a, b) given both x and y = 1 - x, so callers can pass an accurately
// computed complement.
double incomplete_beta(double a, double b, double x, double y) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  const double log_front = a * std::log(x) + b * std::log(y) - log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, y) / b;
}

}  // namespace

Summary summarize(std::span<const double> values) {
  Summary s;
  s.n = values.size();
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n < 2) return s;
  double ss = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    ss += d * d;
  }
  s.variance = ss / static_cast<double>(s.n - 1);
  return s;
}

long TTestResult::reporting_df() const noexcept { return static_cast<long>(std::floor(df)); }

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
    throw Error(Errc::InvalidArgument, fmt::format("incomplete beta domain a={} b={} x={}", a, b, x));
  }
  return incomplete_beta(a, b, x, 1.0 - x);
}

double two_tailed_p(double t, double df) {
  if (!(df > 0.0)) throw Error(Errc::InvalidDf, fmt::format("df = {}", df));
  if (std::isnan(t)) throw Error(Errc::InvalidArgument, "t is NaN");
  const double t2 = t * t;
  if (t2 == 0.0) return 1.0;
  if (std::isinf(t2)) return 0.0;
  // p = I_{df/(df+t^2)}(df/2, 1/2)
  const double denom = df + t2;
  const double p = incomplete_beta(0.5 * df, 0.5, df / denom, t2 / denom);
  return std::clamp(p, 0.0, 1.0);
}

TTestResult welch_ttest(const Summary& a, const Summary& b, double alpha) {
  if (a.n < 2 || b.n < 2) {
    throw Error(Errc::SampleTooSmall, fmt::format("sizes {} and {}, need at least 2 each", a.n, b.n));
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::InvalidArgument, fmt::format("alpha = {}", alpha));

  const double na = static_cast<double>(a.n);
  const double nb = static_cast<double>(b.n);
  const double va = a.variance / na;
  const double vb = b.variance / nb;
  const double se2 = va + vb;
  const double diff = a.mean - b.mean;

  TTestResult r;
  if (se2 == 0.0) {
    r.df = na + nb - 2.0;
    if (diff == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = diff > 0.0 ? kDegenerateT : -kDegenerateT;
      r.p = 0.0;
    }
  } else {
    r.t = diff / std::sqrt(se2);
    r.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    r.p = two_tailed_p(r.t, r.df);
  }
  r.significant = r.p < alpha;
  return r;
}

TTestResult welch_ttest(std::span<const double> a, std::span<const double> b, double alpha) {
  return welch_ttest(summarize(a), summarize(b), alpha);
}

Descriptive descriptive(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::EmptySample, "descriptive statistics of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  Descriptive d;
  d.mean = summarize(values).mean;
  d.max = sorted.back();
  const std::size_t n = sorted.size();
  d.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return d;
}

}  // namespace cvrank
