#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace spinscale {

struct MomentReport {
  double estimate = 0.0;
  double se = 0.0;   // standard error of the estimate
  double ess = 0.0;  // effective sample size implied by the batch variance
};

inline double sample_mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("empty sample");
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / double(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("need >= 2 samples");
  const double m = sample_mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / double(v.size() - 1);
}

// Standard error of the mean of a correlated series by the batch-means
// method; robust for chains whose autocorrelation time is well below the
// batch length.
inline MomentReport batch_means(const std::vector<double>& series,
                                int n_batches = 32) {
  if (series.empty()) throw std::invalid_argument("empty series");
  MomentReport r;
  r.estimate = sample_mean(series);
  if (series.size() < std::size_t(2 * n_batches)) {
    // Too short to batch; fall back to iid standard error.
    if (series.size() >= 2) {
      r.se = std::sqrt(sample_variance(series) / double(series.size()));
      r.ess = double(series.size());
    }
    return r;
  }
  const std::size_t blen = series.size() / n_batches;
  std::vector<double> bm(n_batches);
  for (int b = 0; b < n_batches; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < blen; ++i) acc += series[b * blen + i];
    bm[b] = acc / double(blen);
  }
  const double var_bm = sample_variance(bm);
  r.se = std::sqrt(var_bm / double(n_batches));
  const double var_all = sample_variance(series);
  r.ess = var_bm > 0.0 ? var_all / (var_bm * double(blen)) * double(series.size())
                       : double(series.size());
  return r;
}

// Integrated autocorrelation time by the initial-positive-sequence rule.
inline double autocorrelation_time(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 8) return 1.0;
  const double m = sample_mean(series);
  const std::size_t max_lag = std::min<std::size_t>(n / 2, 2048);
  std::vector<double> c(max_lag, 0.0);
  for (std::size_t lag = 0; lag < c.size(); ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i)
      acc += (series[i] - m) * (series[i + lag] - m);
    c[lag] = acc / double(n - lag);
  }
  if (c[0] <= 0.0) return 1.0;
  double tau = 1.0;
  for (std::size_t lag = 1; lag < c.size(); ++lag) {
    const double rho = c[lag] / c[0];
    if (rho <= 0.0) break;
    tau += 2.0 * rho;
  }
  return std::max(1.0, tau);
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x,
                        const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit needs >= 2 matching points");
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = double(n) * sxx - sx * sx;
  if (std::abs(det) < 1e-300) throw std::invalid_argument("degenerate abscissae");
  LineFit f;
  f.slope = (double(n) * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / double(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    acc += r * r;
  }
  f.residual_rms = std::sqrt(acc / double(n));
  return f;
}

}  // namespace spinscale
