#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pilotwave/currents.hpp"
#include "pilotwave/guide.hpp"
#include "pilotwave/reldirac.hpp"

#include <cmath>
#include <random>

using namespace pilotwave;

namespace {

// Pauli matrices and the Dirac-Pauli alpha^i = [[0, s], [s, 0]], written out
// independently of the library.
std::array<Eigen::Matrix2cd, 3> pauli() {
  Eigen::Matrix2cd sx, sy, sz;
  sx << 0, 1, 1, 0;
  sy << 0, cplx(0, -1), cplx(0, 1), 0;
  sz << 1, 0, 0, -1;
  return {sx, sy, sz};
}

Vec3 oracle_velocity(const Vec3& p, const Spinor& chi, double m) {
  const auto s = pauli();
  const double E = std::sqrt(p.squaredNorm() + m * m);
  const Eigen::Matrix2cd sp = s[0] * p.x() + s[1] * p.y() + s[2] * p.z();
  Eigen::VectorXcd u(4);
  u.head(2) = std::sqrt(E + m) * chi;
  u.tail(2) = sp * chi / std::sqrt(E + m);
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(4, 4);
    a.block(0, 2, 2, 2) = s[i];
    a.block(2, 0, 2, 2) = s[i];
    v(i) = (u.adjoint() * a * u)(0).real() / u.squaredNorm();
  }
  return v;
}

Spinor two(cplx a, cplx b) {
  Spinor s(2);
  s << a, b;
  return s;
}

struct Random {
  std::mt19937_64 rng;
  std::normal_distribution<double> n01;
  explicit Random(std::uint64_t seed) : rng(seed) {}
  double operator()() { return n01(rng); }
  Vec3 vec(double s = 1) { return s * Vec3((*this)(), (*this)(), (*this)()); }
  Spinor chi() { return two(cplx((*this)(), (*this)()), cplx((*this)(), (*this)())); }
};

}  // namespace

TEST_CASE("spinors solve the free Dirac equation") {
  Random r(1);
  for (int i = 0; i < 50; ++i) {
    const Vec3 p = r.vec(2);
    for (auto sign : {EnergySign::positive, EnergySign::negative}) {
      const Spinor u = dirac_spinor(p, sign, r.chi(), 1.3);
      CHECK(dirac_equation_residual(p, sign, u, 1.3) < 1e-12);
    }
  }
  CHECK(dirac_energy(Vec3(3, 0, 4), EnergySign::negative, 0) == doctest::Approx(-5));
  CHECK_THROWS_AS(spin_label("sideways"), Error);
}

TEST_CASE("rest spinor does not move") {
  const auto s = PlaneWaveSpinorState::one(1.0, {DiracTerm{1.0, Vec3::Zero(), EnergySign::positive,
                                                           spin_label("up")}});
  CHECK(dirac_velocity(s, Vec3(0.3, 1, 2), 0.4).v.norm() < 1e-15);
}

TEST_CASE("single plane wave moves at p / E") {
  Random r(2);
  for (int i = 0; i < 20; ++i) {
    const Vec3 p = r.vec(1.5);
    const Spinor chi = r.chi();
    const double m = 0.8;
    const auto s =
        PlaneWaveSpinorState::one(m, {DiracTerm{cplx(r(), r()), p, EnergySign::positive, chi}});
    const Vec3 v = dirac_velocity(s, r.vec(), r()).v;
    const double E = std::sqrt(p.squaredNorm() + m * m);
    CHECK((v - p / E).norm() < 1e-12);
    CHECK((v - oracle_velocity(p, chi, m)).norm() < 1e-12);
  }
}

TEST_CASE("counter-propagating pair: periodic velocity with zero spatial mean") {
  const double p = 0.8;
  const auto s = PlaneWaveSpinorState::one(
      1.0, {DiracTerm{1.0, Vec3(p, 0, 0), EnergySign::positive, spin_label("up")},
            DiracTerm{1.0, Vec3(-p, 0, 0), EnergySign::positive, spin_label("up")}});
  const double period = kPi / p;
  const Vec3 x(0.2, 0.1, 0.3);
  CHECK((dirac_velocity(s, x, 0.7).v - dirac_velocity(s, x + Vec3(period, 0, 0), 0.7).v).norm() <
        1e-12);
  Vec3 mean = Vec3::Zero();
  const int N = 1000;
  for (int i = 0; i < N; ++i)
    mean += dirac_velocity(s, Vec3(period * (i + 0.5) / N, 0.3, 0), 0.7).v / N;
  CHECK(mean.norm() < 1e-12);
}

TEST_CASE("speed never exceeds c for random superpositions") {
  Random r(3);
  long violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<DiracTerm> terms;
    const int n = 1 + trial % 4;
    for (int k = 0; k < n; ++k)
      terms.push_back({cplx(r(), r()), r.vec(2),
                       (trial + k) % 3 == 0 ? EnergySign::negative : EnergySign::positive,
                       r.chi()});
    const auto s = PlaneWaveSpinorState::one(1.0, terms);
    try {
      const DiracVelocity v = dirac_velocity(s, r.vec(3), 3 * r());
      if (v.v.norm() > 1 + 1e-12) ++violations;
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::node) ++violations;
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("product states reduce to the one-particle law") {
  Random r(4);
  for (int i = 0; i < 20; ++i) {
    const Vec3 p = r.vec(), q = r.vec();
    const Spinor a = r.chi(), b = r.chi();
    const auto pair = PlaneWaveSpinorState::two(
        1.0, {DiracPairTerm{1.0, {p, q}, {EnergySign::positive, EnergySign::positive}, {a, b}}},
        false);
    const auto v = dirac2_velocity(pair, r.vec(), r.vec(), r());
    CHECK((v[0] - p / std::sqrt(p.squaredNorm() + 1)).norm() < 1e-10);
    CHECK((v[1] - q / std::sqrt(q.squaredNorm() + 1)).norm() < 1e-10);
  }
  const auto rest = PlaneWaveSpinorState::two(
      1.0, {DiracPairTerm{1.0, {Vec3::Zero(), Vec3::Zero()},
                          {EnergySign::positive, EnergySign::positive},
                          {spin_label("up"), spin_label("down")}}},
      false);
  const auto v0 = dirac2_velocity(rest, Vec3(1, 2, 3), Vec3(-1, 0, 0), 0.5);
  CHECK(v0[0].norm() < 1e-15);
  CHECK(v0[1].norm() < 1e-15);
}

TEST_CASE("antisymmetrized identical momenta vanish everywhere") {
  const Vec3 p(0.3, 0.2, 0);
  const auto s = PlaneWaveSpinorState::two(
      1.0, {DiracPairTerm{1.0, {p, p}, {EnergySign::positive, EnergySign::positive},
                          {spin_label("up"), spin_label("up")}}},
      true);
  Random r(5);
  for (int i = 0; i < 10; ++i) {
    try {
      dirac2_velocity(s, r.vec(), r.vec(), r());
      FAIL("expected a node");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::node);
    }
  }
}

TEST_CASE("antisymmetric amplitudes change sign under exchange") {
  Random r(6);
  const auto s = PlaneWaveSpinorState::two(
      1.0, {DiracPairTerm{1.0, {r.vec(), r.vec()}, {EnergySign::positive, EnergySign::positive},
                          {r.chi(), r.chi()}}},
      true);
  const Vec3 x1 = r.vec(), x2 = r.vec();
  const Spinor a = s.evaluate({x1, x2}, 0.3);
  const Spinor b = s.evaluate({x2, x1}, 0.3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(std::abs(a(4 * i + j) + b(4 * j + i)) < 1e-12);
}

TEST_CASE("two-particle partial currents are future causal") {
  Random r(7);
  long violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<DiracPairTerm> terms;
    for (int k = 0; k < 2; ++k)
      terms.push_back({cplx(r(), r()), {r.vec(), r.vec()},
                       {EnergySign::positive, k ? EnergySign::negative : EnergySign::positive},
                       {r.chi(), r.chi()}});
    const auto s = PlaneWaveSpinorState::two(1.0, terms, trial % 2 == 0);
    const Vec3 x1 = r.vec(2), x2 = r.vec(2);
    for (int k = 0; k < 2; ++k) {
      const Eigen::Vector4d w = dirac2_partial_current(s, x1, x2, 0.2, k);
      const double norm2 = w(0) * w(0) - w.tail(3).squaredNorm();
      if (w(0) < -1e-12 || norm2 < -1e-12 * w(0) * w(0)) ++violations;
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("slow states follow the Pauli current") {
  Random r(8);
  std::vector<DiracTerm> base;
  for (int k = 0; k < 3; ++k) base.push_back({cplx(r(), r()), r.vec(), EnergySign::positive, r.chi()});
  const Vec3 x0 = r.vec();
  std::vector<double> dev;
  for (double eps : {1e-2, 5e-3}) {
    std::vector<DiracTerm> terms = base;
    for (auto& t : terms) t.p *= eps;
    const auto s = PlaneWaveSpinorState::one(1.0, terms);
    const WaveFunction pauli = pauli_limit(s);
    const Vec3 x = x0 / eps;
    const Vec3 vd = dirac_velocity(s, x, 0.0).v;
    const CurrentSample c = current(pauli, SpinSpec::make(1, 2.0), nullptr, {x});
    const Vec3 vp = c.j[0] / c.rho;
    dev.push_back((vd - vp).norm() / vp.norm());
  }
  MESSAGE("relative deviation " << dev[0] << " " << dev[1]);
  CHECK(dev[0] < 1e-3);
  CHECK(dev[1] / dev[0] < 0.35);
  const auto neg = PlaneWaveSpinorState::one(
      1.0, {DiracTerm{1.0, Vec3::Zero(), EnergySign::negative, spin_label("up")}});
  CHECK_THROWS_AS(pauli_limit(neg), Error);
}

TEST_CASE("plane-wave trajectories are straight lines") {
  const Vec3 p(0.4, -0.3, 0.2);
  const auto s = PlaneWaveSpinorState::one(
      1.0, {DiracTerm{1.0, p, EnergySign::positive, spin_label("down")}});
  const ClosedFormVelocity field(1, [&](const Config& x, double t, Config& v) {
    v = {dirac_velocity(s, x[0], t).v};
    return VelStatus::ok;
  });
  IntegrationControls c;
  c.dt = 0.1;
  const auto rec = integrate_trajectory({{Vec3(1, 2, 3)}, 0.0}, field, 10.0, c);
  const Vec3 v = p / std::sqrt(p.squaredNorm() + 1);
  for (std::size_t i = 0; i < rec.times.size(); ++i)
    CHECK((rec.configs[i][0] - Vec3(1, 2, 3) - v * rec.times[i]).norm() < 1e-12);
}
