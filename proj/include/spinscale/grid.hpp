#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace spinscale {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

// Nodes and weights for integrating smooth, rapidly decaying integrands over
// a symmetric interval [-L, L].
struct QuadRule {
  std::vector<double> x;
  std::vector<double> w;

  std::size_t size() const { return x.size(); }
};

enum class QuadKind { trapezoid, gauss_legendre };

struct QuadratureGrid {
  double half_width = 8.0;  // L; callers must keep tail mass negligible
  int points = 257;         // G
  QuadKind rule = QuadKind::trapezoid;
};

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on the
// Legendre polynomial, Chebyshev starting guesses.  Converges to machine
// precision in < 10 iterations for any practical order.
inline void gauss_legendre_unit(int n, std::vector<double>& x,
                                std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int mid = (n + 1) / 2;
  for (int i = 0; i < mid; ++i) {
    double z = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

inline QuadRule make_rule(const QuadratureGrid& g) {
  if (g.points < 2) throw std::invalid_argument("quadrature needs >= 2 points");
  QuadRule r;
  if (g.rule == QuadKind::trapezoid) {
    r.x.resize(g.points);
    r.w.resize(g.points);
    const double dx = 2.0 * g.half_width / (g.points - 1);
    for (int i = 0; i < g.points; ++i) {
      r.x[i] = -g.half_width + i * dx;
      r.w[i] = (i == 0 || i == g.points - 1) ? dx / 2.0 : dx;
    }
  } else {
    std::vector<double> xu, wu;
    gauss_legendre_unit(g.points, xu, wu);
    r.x.resize(g.points);
    r.w.resize(g.points);
    for (int i = 0; i < g.points; ++i) {
      r.x[i] = g.half_width * xu[i];
      r.w[i] = g.half_width * wu[i];
    }
  }
  return r;
}

}  // namespace spinscale
