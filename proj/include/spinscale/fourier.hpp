#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace spinscale {

inline bool is_pow2(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 FFT, in place.  inverse = true applies the 1/n factor.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_pow2(n)) throw std::invalid_argument("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double pi = 3.14159265358979323846;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * pi / double(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const auto u = a[i + j];
        const auto v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& v : a) v /= double(n);
}

// Periodic second-difference operator scaled by N^2:
// (A x)_i = N^2 (-x_{i-1} + 2 x_i - x_{i+1}), indices mod N.
// Symmetric, positive semi-definite, kernel = constants, eigenvalue on the
// k-th discrete Fourier mode 2 N^2 (1 - cos(2 pi k / N)).
struct SecondDifference {
  int n = 0;

  explicit SecondDifference(int n_sites) : n(n_sites) {
    if (n < 2) throw std::invalid_argument("operator needs >= 2 sites");
  }

  std::vector<double> apply(const std::vector<double>& x) const {
    if (int(x.size()) != n) throw std::invalid_argument("size mismatch");
    std::vector<double> y(x.size());
    const double scale = double(n) * double(n);
    for (int i = 0; i < n; ++i) {
      const int im = (i + n - 1) % n;
      const int ip = (i + 1) % n;
      y[i] = scale * (-x[im] + 2.0 * x[i] - x[ip]);
    }
    return y;
  }

  double eigenvalue(int k) const {
    const double pi = 3.14159265358979323846;
    return 2.0 * double(n) * double(n) * (1.0 - std::cos(2.0 * pi * k / n));
  }
};

namespace detail {

// Dirichlet solve of tridiag(-1, 2, -1) u = b, size m (Thomas algorithm).
inline std::vector<double> thomas_dirichlet(const std::vector<double>& b) {
  const std::size_t m = b.size();
  std::vector<double> c(m), d(m), u(m);
  double beta = 2.0;
  c[0] = -1.0 / beta;
  d[0] = b[0] / beta;
  for (std::size_t i = 1; i < m; ++i) {
    beta = 2.0 + c[i - 1];
    c[i] = -1.0 / beta;
    d[i] = (b[i] + d[i - 1]) / beta;
  }
  u[m - 1] = d[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) u[i] = d[i] - c[i] * u[i + 1];
  return u;
}

}  // namespace detail

// Mean-zero pseudo-inverse of the UNSCALED periodic Laplacian
// L = tridiag(-1,2,-1) with wraparound: returns the mean-zero u with
// L u = b, requiring mean(b) = 0.
//
// Gauge route: pin u_0 = 0 and solve the interior Dirichlet system; the
// dropped equation holds automatically because both sides sum to zero.
// The Fourier route divides by the modal symbol; both agree to rounding
// and the power-of-two path uses the FFT.
inline std::vector<double> laplacian_pinv(const std::vector<double>& b) {
  const std::size_t n = b.size();
  if (n < 2) throw std::invalid_argument("need >= 2 entries");
  double bm = 0.0, bmax = 0.0;
  for (double v : b) {
    bm += v;
    bmax = std::max(bmax, std::abs(v));
  }
  bm /= double(n);
  if (std::abs(bm) > 1e-8 * (1.0 + bmax))
    throw std::invalid_argument("input must have mean zero");

  std::vector<double> u(n);
  if (is_pow2(n)) {
    std::vector<std::complex<double>> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = b[i] - bm;
    fft_inplace(a, false);
    const double pi = 3.14159265358979323846;
    a[0] = 0.0;
    for (std::size_t k = 1; k < n; ++k)
      a[k] /= 2.0 * (1.0 - std::cos(2.0 * pi * double(k) / double(n)));
    fft_inplace(a, true);
    for (std::size_t i = 0; i < n; ++i) u[i] = a[i].real();
  } else {
    std::vector<double> interior(b.begin() + 1, b.end());
    for (auto& v : interior) v -= bm;
    const auto ui = detail::thomas_dirichlet(interior);
    u[0] = 0.0;
    for (std::size_t i = 0; i < ui.size(); ++i) u[i + 1] = ui[i];
  }
  double um = 0.0;
  for (double v : u) um += v;
  um /= double(n);
  for (auto& v : u) v -= um;
  return u;
}

// Mean-zero pseudo-inverse action of the scaled operator: A^+ b with
// A = N^2 L.
inline std::vector<double> second_difference_pinv(const std::vector<double>& b) {
  auto u = laplacian_pinv(b);
  const double s = double(b.size()) * double(b.size());
  for (auto& v : u) v /= s;
  return u;
}

// (1/N) <x, A^+ x> for mean-zero x: the discrete counterpart of the squared
// dual Sobolev norm of the associated step function.
inline double discrete_dual_form(const std::vector<double>& x) {
  const auto u = second_difference_pinv(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * u[i];
  return acc / double(x.size());
}

}  // namespace spinscale
