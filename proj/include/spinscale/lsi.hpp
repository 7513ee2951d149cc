#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace spinscale {

// Log-Sobolev certificate calculators.  Each op evaluates a closed
// criterion over supplied convexity/coupling data and records where the
// constant came from; none of them claims to compute the sharp constant
// of a measure.

enum class Provenance {
  bakry_emery,
  holley_stroock,
  tensorize,
  otto_reznikoff,
  two_scale,
};

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::bakry_emery: return "bakry_emery";
    case Provenance::holley_stroock: return "holley_stroock";
    case Provenance::tensorize: return "tensorize";
    case Provenance::otto_reznikoff: return "otto_reznikoff";
    case Provenance::two_scale: return "two_scale";
  }
  return "unknown";
}

struct LsiConstant {
  double rho = 0.0;  // invariant: > 0
  Provenance provenance = Provenance::bakry_emery;
};

// A product of measures satisfies the worse of the factors' constants.
inline LsiConstant tensorize(double rho1, double rho2) {
  if (!(rho1 > 0.0) || !(rho2 > 0.0))
    throw std::invalid_argument("tensorize needs positive constants");
  return {std::min(rho1, rho2), Provenance::tensorize};
}

// A bounded perturbation of the potential costs a factor exp(-osc).
inline LsiConstant holley_stroock(double rho, double osc) {
  if (!(rho > 0.0))
    throw std::invalid_argument("base constant must be positive");
  if (osc < 0.0) throw std::invalid_argument("oscillation must be >= 0");
  return {rho * std::exp(-osc), Provenance::holley_stroock};
}

// A certified uniform convexity bound is itself an LSI constant; the
// caller supplies it (e.g. quadratic margin minus the bounded part's
// curvature sup).
inline LsiConstant bakry_emery(double hessian_lower_bound) {
  if (!(hessian_lower_bound > 0.0))
    throw std::invalid_argument("convexity bound must be positive");
  return {hessian_lower_bound, Provenance::bakry_emery};
}

namespace detail {

// Cyclic Jacobi sweeps; adequate for the small certificate matrices this
// module sees and independent of any external eigensolver.
inline double min_eigen_symmetric(std::vector<std::vector<double>> a) {
  const int n = int(a.size());
  if (n == 1) return a[0][0];
  double scale = 0.0;
  for (const auto& row : a)
    for (double v : row) scale = std::max(scale, std::abs(v));
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (std::sqrt(off) <= 1e-14 * (1.0 + scale)) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[p][q];
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
        const double t =
            (theta >= 0.0 ? 1.0 : -1.0) /
            (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < n; ++i) {
          const double aip = a[i][p], aiq = a[i][q];
          a[i][p] = c * aip - s * aiq;
          a[i][q] = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a[p][i], aqi = a[q][i];
          a[p][i] = c * api - s * aqi;
          a[q][i] = s * api + c * aqi;
        }
      }
    }
  }
  double lo = a[0][0];
  for (int i = 1; i < n; ++i) lo = std::min(lo, a[i][i]);
  return lo;
}

}  // namespace detail

struct OttoReznikoffResult {
  bool success = false;
  double rho = 0.0;  // smallest eigenvalue, reported even on failure
};

// Interaction criterion: assemble A with the per-coordinate constants on
// the diagonal and minus the coupling strengths off it; the certificate
// holds exactly when A is positive definite, with constant = min eigenvalue.
inline OttoReznikoffResult otto_reznikoff(
    const std::vector<double>& rho_diag,
    const std::vector<std::vector<double>>& kappa) {
  const int n = int(rho_diag.size());
  if (n < 1) throw std::invalid_argument("need at least one coordinate");
  if (int(kappa.size()) != n)
    throw std::invalid_argument("coupling matrix size mismatch");
  double scale = 1.0;
  for (const auto& row : kappa) {
    if (int(row.size()) != n)
      throw std::invalid_argument("coupling matrix size mismatch");
    for (double v : row) scale = std::max(scale, std::abs(v));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(kappa[i][j] - kappa[j][i]) > 1e-12 * scale)
        throw std::invalid_argument("coupling matrix must be symmetric");
      if (kappa[i][j] < 0.0)
        throw std::invalid_argument("couplings must be nonnegative");
    }
  }
  std::vector<std::vector<double>> a(std::size_t(n),
                                     std::vector<double>(std::size_t(n), 0.0));
  for (int i = 0; i < n; ++i) {
    a[std::size_t(i)][std::size_t(i)] = rho_diag[std::size_t(i)];
    for (int j = 0; j < n; ++j)
      if (j != i) a[std::size_t(i)][std::size_t(j)] = -kappa[std::size_t(i)][std::size_t(j)];
  }
  OttoReznikoffResult r;
  r.rho = detail::min_eigen_symmetric(std::move(a));
  r.success = r.rho > 0.0;
  return r;
}

// Combination constant for a measure split into a conditional and a
// marginal scale with cross-coupling kappa.
inline LsiConstant two_scale_combine(double rho1, double rho2, double kappa) {
  if (!(rho1 > 0.0) || !(rho2 > 0.0))
    throw std::invalid_argument("scale constants must be positive");
  if (kappa < 0.0) throw std::invalid_argument("coupling must be >= 0");
  if (kappa == 0.0)
    return {std::min(rho1, rho2), Provenance::two_scale};
  const double b = rho1 + rho2 + kappa * kappa / rho1;
  const double disc = std::max(b * b - 4.0 * rho1 * rho2, 0.0);
  // product form of (b - sqrt(disc)) / 2; avoids cancellation
  const double rho = 2.0 * rho1 * rho2 / (b + std::sqrt(disc));
  return {rho, Provenance::two_scale};
}

struct RateFit {
  double rate = 0.0;       // series ~ exp(-rate * t)
  double log_level = 0.0;  // fitted log value at t = 0
  double rms_residual = 0.0;
};

// Least-squares slope of log(series) against time.
inline RateFit decay_rate_proxy(const std::vector<double>& t,
                                 const std::vector<double>& v) {
  const std::size_t s = t.size();
  if (s < 3 || v.size() != s)
    throw std::invalid_argument("need >= 3 matching samples");
  for (std::size_t i = 0; i < s; ++i) {
    if (!(v[i] > 0.0))
      throw std::invalid_argument("series must stay positive");
    if (i > 0 && !(t[i] > t[i - 1]))
      throw std::invalid_argument("times must increase");
  }
  double tm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    tm += t[i];
    ym += std::log(v[i]);
  }
  tm /= double(s);
  ym /= double(s);
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    stt += (t[i] - tm) * (t[i] - tm);
    sty += (t[i] - tm) * (std::log(v[i]) - ym);
  }
  RateFit f;
  f.rate = -sty / stt;
  f.log_level = ym + f.rate * tm;
  double rss = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    const double r = std::log(v[i]) - (f.log_level - f.rate * t[i]);
    rss += r * r;
  }
  f.rms_residual = std::sqrt(rss / double(s));
  return f;
}

struct RateScaling {
  std::vector<double> scaled;  // rate_i * n_i^2
  double spread = 0.0;         // (max - min) / mean of the scaled rates
  bool stable = false;
};

// The diffusive time change compresses rates by N^2; fitted rates across a
// ladder should collapse once multiplied back.
inline RateScaling check_rate_scaling(const std::vector<double>& rates,
                                      const std::vector<int>& sizes,
                                      double tol) {
  if (rates.size() != sizes.size() || rates.size() < 2)
    throw std::invalid_argument("need matching rates and sizes");
  RateScaling r;
  double lo = 0.0, hi = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const double s = rates[i] * double(sizes[i]) * double(sizes[i]);
    r.scaled.push_back(s);
    mean += s;
    if (i == 0) {
      lo = hi = s;
    } else {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  mean /= double(rates.size());
  if (mean == 0.0) {
    r.spread = hi - lo;
  } else {
    r.spread = (hi - lo) / std::abs(mean);
  }
  r.stable = r.spread <= tol;
  return r;
}

}  // namespace spinscale
