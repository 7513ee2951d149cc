#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spinscale {

enum class PotentialKind { zero, cosine, gaussian_bump };

inline std::string to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::zero: return "zero";
    case PotentialKind::cosine: return "cosine";
    case PotentialKind::gaussian_bump: return "gaussian_bump";
  }
  return "?";
}

// Single-site potential psi(z) = z^2/2 + bounded part.
//
// The bounded part and its first two derivatives stay bounded on all of R;
// that is the structural assumption every uniform estimate in the project
// rests on, so only families with this property are representable.
struct SitePotential {
  PotentialKind kind = PotentialKind::zero;
  // cosine: p1 = amplitude, p2 = frequency, bounded part p1*cos(p2*z).
  // gaussian_bump: p1 = depth, p2 = width, bounded part -p1*exp(-z^2/(2*p2^2)).
  double p1 = 0.0;
  double p2 = 1.0;

  double bounded(double z) const {
    switch (kind) {
      case PotentialKind::zero: return 0.0;
      case PotentialKind::cosine: return p1 * std::cos(p2 * z);
      case PotentialKind::gaussian_bump:
        return -p1 * std::exp(-z * z / (2.0 * p2 * p2));
    }
    return 0.0;
  }

  double bounded_d1(double z) const {
    switch (kind) {
      case PotentialKind::zero: return 0.0;
      case PotentialKind::cosine: return -p1 * p2 * std::sin(p2 * z);
      case PotentialKind::gaussian_bump: {
        const double w2 = p2 * p2;
        return p1 * z / w2 * std::exp(-z * z / (2.0 * w2));
      }
    }
    return 0.0;
  }

  double bounded_d2(double z) const {
    switch (kind) {
      case PotentialKind::zero: return 0.0;
      case PotentialKind::cosine: return -p1 * p2 * p2 * std::cos(p2 * z);
      case PotentialKind::gaussian_bump: {
        const double w2 = p2 * p2;
        return p1 / w2 * (1.0 - z * z / w2) * std::exp(-z * z / (2.0 * w2));
      }
    }
    return 0.0;
  }

  double value(double z) const { return 0.5 * z * z + bounded(z); }
  double d1(double z) const { return z + bounded_d1(z); }
  double d2(double z) const { return 1.0 + bounded_d2(z); }

  bool is_even() const { return true; }  // both families are even in z

  struct Bounds {
    double sup_value = 0.0;
    double sup_d1 = 0.0;
    double sup_d2 = 0.0;
  };

  // Numeric scan of the bounded part over a wide grid.  Both families decay
  // or oscillate, so a dense scan over |z| <= 32 sees the suprema.
  Bounds bounded_part_bounds() const {
    Bounds b;
    const int n = 20001;
    for (int i = 0; i < n; ++i) {
      const double z = -32.0 + 64.0 * i / (n - 1);
      b.sup_value = std::max(b.sup_value, std::abs(bounded(z)));
      b.sup_d1 = std::max(b.sup_d1, std::abs(bounded_d1(z)));
      b.sup_d2 = std::max(b.sup_d2, std::abs(bounded_d2(z)));
    }
    return b;
  }
};

}  // namespace spinscale
