#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pilotwave/dkp.hpp"

#include <cmath>
#include <random>

using namespace pilotwave;

namespace {

struct Random {
  std::mt19937_64 rng;
  std::normal_distribution<double> n01;
  explicit Random(std::uint64_t seed) : rng(seed) {}
  double operator()() { return n01(rng); }
  Vec3 vec(double s = 1) { return s * Vec3((*this)(), (*this)(), (*this)()); }
  CVec3 cvec() { return CVec3(cplx((*this)(), (*this)()), cplx((*this)(), (*this)()),
                              cplx((*this)(), (*this)())); }
};

DkpState random_state(Random& r, DkpRep rep, int terms, bool massless = false) {
  std::vector<DkpPlaneWave> w;
  for (int k = 0; k < terms; ++k) {
    Vec3 p = r.vec();
    if (massless && p.norm() < 0.1) p = Vec3(0.5, 0, 0);
    w.push_back({cplx(r(), r()), p, r.cvec(), std::nullopt});
  }
  return build_dkp_state(rep, 1.0, massless, w);
}

double minkowski(const Eigen::Vector4d& j) { return j(0) * j(0) - j.tail(3).squaredNorm(); }

}  // namespace

TEST_CASE("spin-0 plane wave has the reduced component pattern") {
  const double m = 1.7;
  const Vec3 p(0.3, -0.4, 1.2);
  const DkpState s = build_dkp_state(DkpRep::spin0, m, false, {{1.0, p, CVec3::Zero(), {}}});
  const double E = std::sqrt(p.squaredNorm() + m * m);
  Spinor expect(5);
  expect << cplx(0, -E), cplx(0, p.x()), cplx(0, p.y()), cplx(0, p.z()), m;
  expect /= std::sqrt(m);
  const Spinor u = s.terms()[0].u;
  CHECK((u - expect).norm() < 1e-14);
  // Independent constraint: (1 - H beta0 / m) u with H = beta_tilde.p + m beta0.
  const MatrixSet ms = build_matrix_set(MatrixKind::dkp5);
  CMat H = m * ms.gen[0];
  for (int i = 0; i < 3; ++i) H += ms.beta_tilde[i] * p(i);
  const CMat C = ms.identity() - H * ms.gen[0] / m;
  CHECK((C * u).norm() < 1e-14);
  CHECK(constraint_residual(ms, s.terms()[0], m, false) < 1e-14);
}

TEST_CASE("generic vectors violate the constraint") {
  Random r(1);
  const MatrixSet ms = build_matrix_set(MatrixKind::dkp5);
  const Vec3 p = r.vec();
  Spinor v(5);
  for (int i = 0; i < 5; ++i) v(i) = cplx(r(), r());
  CHECK((dkp_constraint(ms, p, 1.0) * v).norm() > 1e-3);
}

TEST_CASE("massless spin-1 projector keeps the field components") {
  const DkpState s = build_dkp_state(DkpRep::spin1, 1.0, true,
                                     {{1.0, Vec3(0, 0, 0.8), CVec3(1, cplx(0, 1), 0), {}}});
  const Spinor u = s.terms()[0].u;
  const Spinor gu = s.matrices().gamma_proj * u;
  CHECK((gu.head(6) - u.head(6)).norm() < 1e-14);
  CHECK(gu.tail(4).norm() < 1e-14);
  CHECK(u.head(6).norm() > 0.1);
  CHECK(constraint_residual(s.matrices(), s.terms()[0], 1.0, true) < 1e-12);
}

TEST_CASE("off-shell energy is a physics error naming the term") {
  try {
    build_dkp_state(DkpRep::spin0, 1.0, false, {{1.0, Vec3(1, 0, 0), CVec3::Zero(), 1.0}});
    FAIL("expected physics error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::physics);
    CHECK(e.field().find("terms[0]") != std::string::npos);
  }
}

TEST_CASE("matrix identities of the hamiltonian") {
  Random r(2);
  for (auto kind : {MatrixKind::dkp5, MatrixKind::dkp10}) {
    const MatrixSet ms = build_matrix_set(kind);
    for (int i = 0; i < 100; ++i) {
      const Vec3 p = r.vec(2);
      const double m = 0.5 + std::abs(r());
      const CMat H = dkp_hamiltonian(ms, p, m);
      const CMat C = dkp_constraint(ms, p, m);
      const double scale = std::pow(p.squaredNorm() + m * m, 1.5);
      CHECK((H * H * H - H * (p.squaredNorm() + m * m)).cwiseAbs().maxCoeff() < 1e-12 * scale);
      CHECK((C * H).cwiseAbs().maxCoeff() < 1e-12 * (p.norm() + m));
    }
  }
}

TEST_CASE("valid terms obey the Klein-Gordon dispersion and the constraint") {
  Random r(3);
  for (auto rep : {DkpRep::spin0, DkpRep::spin1}) {
    const DkpState s = random_state(r, rep, 6);
    for (const auto& t : s.terms()) {
      CHECK(t.E * t.E == doctest::Approx(t.p.squaredNorm() + 1.0));
      CHECK(constraint_residual(s.matrices(), t, 1.0, false) < 1e-10);
    }
  }
}

TEST_CASE("single spin-0 wave flows at p / E") {
  const Vec3 p(0.6, 0.2, -0.3);
  const DkpState s = build_dkp_state(DkpRep::spin0, 1.0, false, {{1.0, p, CVec3::Zero(), {}}});
  const EnergyFlow f = energy_momentum_current(s, ObserverVector{}, Vec3(1, 2, 3), 0.4);
  const double E = std::sqrt(p.squaredNorm() + 1);
  // Theta^{i0} / Theta^{00} = 2 E p_i / 2 E^2.
  CHECK((f.v - p / E).norm() < 1e-12);
  const DkpState rest =
      build_dkp_state(DkpRep::spin0, 1.0, false, {{1.0, Vec3::Zero(), CVec3::Zero(), {}}});
  CHECK(energy_momentum_current(rest, ObserverVector{}, Vec3(1, 2, 3), 0.4).v.norm() < 1e-15);
}

TEST_CASE("energy current is future causal at random points") {
  Random r(4);
  long violations = 0;
  for (auto rep : {DkpRep::spin0, DkpRep::spin1})
    for (bool massless : {false, true})
      for (int trial = 0; trial < 2500; ++trial) {
        const DkpState s = random_state(r, rep, 1 + trial % 4, massless);
        Eigen::Vector4d n(1.0 + std::abs(r()), 0.3 * r(), 0.3 * r(), 0.3 * r());
        if (minkowski(n) < 0) n(0) = 1.0 + n.tail(3).norm();
        const Eigen::Matrix4d T = energy_momentum_tensor(s, r.vec(3), r());
        Eigen::Vector4d nl = n;
        nl.tail(3) *= -1;
        const Eigen::Vector4d j = T * nl;
        if (j(0) < -1e-12 || minkowski(j) < -1e-10 * j(0) * j(0)) ++violations;
        if (j(0) > 1e-12 && j.tail(3).norm() / j(0) > 1 + 1e-9) ++violations;
      }
  CHECK(violations == 0);
}

TEST_CASE("energy density equals m psi^dagger psi in the rest frame") {
  Random r(5);
  for (auto rep : {DkpRep::spin0, DkpRep::spin1}) {
    const DkpState s = random_state(r, rep, 3);
    const Vec3 x = r.vec();
    const Eigen::Matrix4d T = energy_momentum_tensor(s, x, 0.3);
    CHECK(T(0, 0) == doctest::Approx(s.mass() * s.evaluate(x, 0.3).squaredNorm()).epsilon(1e-12));
    CHECK(T(0, 0) >= 0);
  }
}

TEST_CASE("observer vectors must be future causal") {
  CHECK_THROWS_AS(ObserverVector::make(Eigen::Vector4d(-1, 0, 0, 0)), Error);
  CHECK_THROWS_AS(ObserverVector::make(Eigen::Vector4d(1, 2, 0, 0)), Error);
  CHECK_NOTHROW(ObserverVector::make(Eigen::Vector4d(1, 1, 0, 0)));
}

TEST_CASE("total energy-momentum of plane waves") {
  const double L = 10;
  const Vec3 p(2 * kPi / L, 4 * kPi / L, 0);
  const DkpState one = build_dkp_state(DkpRep::spin1, 1.0, false, {{1.0, p, CVec3(0, 0, 1), {}}});
  const TotalMomentum P = total_energy_momentum(one, Vec3::Zero(), Vec3(L, L, L), 16);
  REQUIRE(P.observer.has_value());
  const double E = std::sqrt(p.squaredNorm() + 1);
  CHECK((P.observer->n - Eigen::Vector4d(E, p.x(), p.y(), p.z())).norm() < 1e-12);

  const DkpState rest =
      build_dkp_state(DkpRep::spin0, 1.0, false, {{1.0, Vec3::Zero(), CVec3::Zero(), {}}});
  const TotalMomentum R = total_energy_momentum(rest, Vec3::Zero(), Vec3(L, L, L), 8);
  CHECK((R.observer->n - Eigen::Vector4d(1, 0, 0, 0)).norm() < 1e-14);

  const DkpState pm = build_dkp_state(DkpRep::spin0, 1.0, false,
                                      {{1.0, p, CVec3::Zero(), {}}, {1.0, -p, CVec3::Zero(), {}}});
  const TotalMomentum Q = total_energy_momentum(pm, Vec3::Zero(), Vec3(L, L, L), 16);
  CHECK(Q.P.tail(3).norm() < 1e-8 * Q.P(0));
}

TEST_CASE("non-relativistic limit converges quadratically") {
  for (auto rep : {DkpRep::spin0, DkpRep::spin1}) {
    const auto pts = nonrel_limit_check(rep, {0.2, 0.1, 0.05});
    MESSAGE(std::string(to_string(rep)) << " deviations " << pts[0].deviation << " " << pts[1].deviation << " "
                           << pts[2].deviation);
    CHECK(pts[1].deviation < 1e-2);
    CHECK(pts[1].deviation / pts[0].deviation <= 0.35);
    CHECK(pts[2].deviation / pts[1].deviation <= 0.35);
    CHECK(nonrel_limit_check(rep, {0.0})[0].deviation == 0.0);
  }
}

TEST_CASE("two-particle product states reduce to one-particle flows") {
  Random r(6);
  for (auto rep : {DkpRep::spin0, DkpRep::spin1}) {
    const DkpState a = random_state(r, rep, 2), b = random_state(r, rep, 3);
    DkpPairState pair{{{1.0, a, b}}, false};
    for (int i = 0; i < 20; ++i) {
      const Vec3 x1 = r.vec(), x2 = r.vec();
      const DkpPairFlow f = dkp2_velocity(pair, ObserverVector{}, x1, x2, 0.5);
      const Vec3 va = energy_momentum_current(a, ObserverVector{}, x1, 0.5).v;
      const Vec3 vb = energy_momentum_current(b, ObserverVector{}, x2, 0.5).v;
      CHECK((f.v[0] - va).norm() < 1e-10);
      CHECK((f.v[1] - vb).norm() < 1e-10);
    }
  }
}

TEST_CASE("symmetrized identical states move together at coincidence") {
  Random r(7);
  const DkpState a = random_state(r, DkpRep::spin0, 3);
  const DkpPairState pair{{{1.0, a, a}}, true};
  const Vec3 x = r.vec();
  const DkpPairFlow f = dkp2_velocity(pair, ObserverVector{}, x, x, 0.1);
  CHECK((f.v[0] - f.v[1]).norm() < 1e-12);
}

TEST_CASE("entangled two-particle partial currents are future causal") {
  Random r(8);
  long violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const DkpRep rep = trial % 2 ? DkpRep::spin1 : DkpRep::spin0;
    DkpPairState s{{{cplx(r(), r()), random_state(r, rep, 2), random_state(r, rep, 2)},
                    {cplx(r(), r()), random_state(r, rep, 2), random_state(r, rep, 2)}},
                   trial % 3 == 0};
    try {
      const DkpPairFlow f = dkp2_velocity(s, ObserverVector{}, r.vec(2), r.vec(2), r());
      for (int k = 0; k < 2; ++k)
        if (f.partial[k](0) < 0 || minkowski(f.partial[k]) < -1e-10 * f.partial[k](0) * f.partial[k](0))
          ++violations;
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::node) ++violations;
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("charge density can turn negative") {
  Random r(9);
  double lowest = 1.0;
  for (int trial = 0; trial < 2000 && lowest >= 0; ++trial) {
    const DkpState s = random_state(r, DkpRep::spin0, 3);
    lowest = std::min(lowest, charge_current(s, r.vec(3), r())(0));
  }
  CHECK(lowest < 0);
}
