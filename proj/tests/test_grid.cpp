#include <catch2/catch_amalgamated.hpp>

#include "spinscale/grid.hpp"

#include <cmath>

using namespace spinscale;

namespace {
double integrate(const QuadRule& r, double (*f)(double)) {
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) acc += r.w[i] * f(r.x[i]);
  return acc;
}
}  // namespace

TEST_CASE("Gauss-Legendre integrates polynomials exactly", "[grid]") {
  // n nodes are exact through degree 2n-1.
  QuadratureGrid g{1.0, 5, QuadKind::gauss_legendre};
  const QuadRule r = make_rule(g);
  CHECK(integrate(r, [](double) { return 1.0; }) == Catch::Approx(2.0).epsilon(1e-14));
  CHECK(integrate(r, [](double x) { return x * x; }) ==
        Catch::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(integrate(r, [](double x) { return std::pow(x, 8); }) ==
        Catch::Approx(2.0 / 9.0).epsilon(1e-13));
  CHECK(std::abs(integrate(r, [](double x) { return std::pow(x, 7); })) < 1e-15);
}

TEST_CASE("both rules integrate the Gaussian density", "[grid]") {
  const double root2pi = std::sqrt(2.0 * 3.14159265358979323846);
  {
    QuadratureGrid g{8.0, 64, QuadKind::gauss_legendre};
    const QuadRule r = make_rule(g);
    CHECK(integrate(r, [](double z) { return std::exp(-z * z / 2.0); }) ==
          Catch::Approx(root2pi).epsilon(1e-12));
  }
  {
    QuadratureGrid g{8.0, 257, QuadKind::trapezoid};
    const QuadRule r = make_rule(g);
    CHECK(integrate(r, [](double z) { return std::exp(-z * z / 2.0); }) ==
          Catch::Approx(root2pi).epsilon(1e-13));
  }
}

TEST_CASE("trapezoid weights sum to the interval length", "[grid]") {
  QuadratureGrid g{6.5, 129, QuadKind::trapezoid};
  const QuadRule r = make_rule(g);
  double acc = 0.0;
  for (double w : r.w) acc += w;
  CHECK(acc == Catch::Approx(13.0).epsilon(1e-14));
  CHECK(r.x.front() == Catch::Approx(-6.5));
  CHECK(r.x.back() == Catch::Approx(6.5));
}
