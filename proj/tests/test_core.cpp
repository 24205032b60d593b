#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pilotwave/matrices.hpp"
#include "pilotwave/wavefunction.hpp"

#include <cmath>

using namespace pilotwave;

TEST_CASE("unit system rejects non-positive constants") {
  UnitSystem u;
  CHECK_NOTHROW(u.validate());
  u.hbar = 0;
  CHECK_THROWS_AS(u.validate(), Error);
  u.hbar = 1;
  u.c = -1;
  CHECK_THROWS_AS(u.validate(), Error);
}

TEST_CASE("grid spacing and budget") {
  const Grid g = Grid::make(1, 1, {-10}, {10}, {2001});
  CHECK(g.spacing(0) == doctest::Approx(0.01));
  CHECK(g.size() == 2001);
  CHECK_THROWS_AS(Grid::make(1, 1, {1}, {0}, {10}), Error);
  CHECK_THROWS_AS(Grid::make(1, 1, {0}, {1}, {1}), Error);
  try {
    Grid::make(1, 3, {0, 0, 0}, {1, 1, 1}, {1000, 1000, 1000}, 1000000);
    FAIL("expected budget rejection");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::validation);
  }
}

TEST_CASE("dkp5 beta0 entries") {
  const MatrixSet m = build_matrix_set(MatrixKind::dkp5);
  int nonzero = 0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (std::abs(m.gen[0](i, j)) > 0) ++nonzero;
  CHECK(nonzero == 2);
  CHECK(m.gen[0](0, 4) == cplx(0, -1));
  CHECK(m.gen[0](4, 0) == cplx(0, 1));
  const CMat b = m.gen[0];
  const CMat lhs = b * b * b + b * b * b;
  CHECK((lhs - 2.0 * b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("algebra identities hold exactly for every matrix set") {
  for (auto k : {MatrixKind::dirac4, MatrixKind::dkp5, MatrixKind::dkp10}) {
    const MatrixSet m = build_matrix_set(k);
    CHECK(algebra_defect(m) == 0.0);
    if (k != MatrixKind::dirac4) {
      CHECK(projector_defect(m) == 0.0);
      const CMat g = m.gamma_proj;
      CHECK((g * g - g).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  CHECK_THROWS_AS(parse_matrix_kind("dkp7"), Error);
  CHECK(parse_matrix_kind("dkp10") == MatrixKind::dkp10);
}

TEST_CASE("plane wave is one at the origin") {
  const WaveFunction psi = WaveFunction::scalar(plane_wave(Vec3(2, 0, 0), 1, 1, 1), {1.0});
  const Spinor v = psi.evaluate({Vec3::Zero()});
  CHECK(v(0).real() == doctest::Approx(1.0));
  CHECK(v(0).imag() == doctest::Approx(0.0));
}

namespace {

WaveFunction gaussian_on(int points, double half = 10) {
  const Grid g = Grid::make(1, 1, {-half}, {half}, {points});
  std::vector<cplx> d(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.coord(0, int(i));
    d[i] = std::exp(-x * x / 2) / std::pow(kPi, 0.25);
  }
  return WaveFunction::on_grid(g, {1.0}, 1, d);
}

double midpoint_error(int points) {
  const WaveFunction w = gaussian_on(points);
  const double h = w.grid().spacing(0);
  double err = 0;
  for (int i = 0; i + 1 < points; ++i) {
    const double x = -10 + (i + 0.5) * h;
    const double exact = std::exp(-x * x / 2) / std::pow(kPi, 0.25);
    err = std::max(err, std::abs(w.evaluate({Vec3(x, 0, 0)})(0) - exact));
  }
  return err;
}

}  // namespace

TEST_CASE("grid gaussian is exact at nodes") {
  const WaveFunction w = gaussian_on(2001);
  CHECK(std::abs(w.evaluate({Vec3::Zero()})(0) - std::pow(kPi, -0.25)) < 1e-8);
  CHECK(std::abs(w.norm() - 1.0) < 1e-9);
  CHECK(std::abs(w.normalized().norm() - 1.0) < 1e-9);
}

TEST_CASE("grid interpolation converges at second order") {
  const double e1 = midpoint_error(201);
  const double e2 = midpoint_error(401);
  CHECK(e1 / e2 >= 3.5);
}

TEST_CASE("evaluation outside the grid is a domain error") {
  const WaveFunction w = gaussian_on(101);
  try {
    w.evaluate({Vec3(11, 0, 0)});
    FAIL("expected domain error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::domain);
    CHECK(e.field() == "axis 0");
  }
}

TEST_CASE("evaluation leaves the state untouched") {
  const WaveFunction w = gaussian_on(401).normalized();
  const double before = w.norm();
  for (int i = 0; i < 100; ++i) w.evaluate({Vec3(-5 + 0.1 * i, 0, 0)});
  CHECK(w.norm() == before);
}

TEST_CASE("decaying pair at coincidence equals its prefactor") {
  const double N = 0.37;
  const FamilyPtr f = decaying_pair(1.0, 1.0, 1.0, 1.0, 3, N);
  const Vec3 x(0.3, -1.2, 0.5);
  const cplx v = f->value({x, x}, 0.0);
  CHECK(v.real() == doctest::Approx(N * std::pow(kPi, 1.5)).epsilon(1e-12));
  CHECK(std::abs(v.imag()) < 1e-14);
}

TEST_CASE("hermite functions are orthonormal") {
  const int n = 6;
  std::vector<double> h(n + 1);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n + 1, n + 1);
  const double dx = 1e-3;
  for (double x = -12; x <= 12; x += dx) {
    hermite_functions(n, x, h.data());
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) gram(i, j) += h[i] * h[j] * dx;
  }
  CHECK((gram - Eigen::MatrixXd::Identity(n + 1, n + 1)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("counter rng is a pure function of seed, stream and counter") {
  CounterRng a(5, 3), b(5, 3), c(5, 4);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
  }
  CounterRng u(1, 0);
  double mean = 0;
  for (int i = 0; i < 100000; ++i) mean += u.uniform();
  CHECK(mean / 100000 == doctest::Approx(0.5).epsilon(0.01));
}
