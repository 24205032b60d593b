#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pilotwave/fieldmodes.hpp"

#include <cmath>

using namespace pilotwave;

namespace {

std::vector<cplx> superposed() {
  const double r = 1 / std::sqrt(2.0);
  return {r, r};
}

// Independent two-level velocity: psi = (h0 + h1 e^{-i w t}) / sqrt 2 with
// h0 = pi^{-1/4} e^{-q^2/2}, h1 = sqrt 2 q h0.
double oracle_velocity(double q, double t, double w) {
  const double h0 = std::pow(kPi, -0.25) * std::exp(-0.5 * q * q);
  const double h1 = std::sqrt(2.0) * q * h0;
  const double d0 = -q * h0;
  const double d1 = std::sqrt(2.0) * (h0 + q * d0);
  const cplx ph = std::polar(1.0, -w * t);
  const cplx psi = h0 + h1 * ph, dpsi = d0 + d1 * ph;
  return w * (std::conj(psi) * dpsi).imag() / std::norm(psi);
}

double oracle_trajectory(double q, double w, double dt, int steps) {
  double t = 0;
  for (int i = 0; i < steps; ++i) {
    const double k1 = oracle_velocity(q, t, w);
    const double k2 = oracle_velocity(q + 0.5 * dt * k1, t + 0.5 * dt, w);
    const double k3 = oracle_velocity(q + 0.5 * dt * k2, t + 0.5 * dt, w);
    const double k4 = oracle_velocity(q + dt * k3, t + dt, w);
    q += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    t += dt;
  }
  return q;
}

}  // namespace

TEST_CASE("dispersion relations") {
  const ModeState a = ModeState::make({{2.0, {1.0}, 0.0}}, Dispersion::massless);
  CHECK(a.energy(0) == doctest::Approx(2.0));
  const ModeState b = ModeState::make({{2.0, {1.0}, 0.0}}, Dispersion::nonrelativistic, 4.0);
  CHECK(b.energy(0) == doctest::Approx(0.5));
  CHECK(parse_dispersion("massless") == Dispersion::massless);
  CHECK_THROWS_AS(parse_dispersion("tachyonic"), Error);
}

TEST_CASE("construction validates normalization and truncation") {
  CHECK_THROWS_AS(ModeState::make({{1.0, {1.0, 1.0}, 0.0}}, Dispersion::massless), Error);
  CHECK_THROWS_AS(ModeState::make({{1.0, std::vector<cplx>(kFockMax + 2, 0.1), 0.0}},
                                  Dispersion::massless),
                  Error);
  CHECK_THROWS_AS(coherent_fock(cplx(5.0, 0.0)), Error);
  const auto c = coherent_fock(cplx(1.2, -0.5));
  double norm = 0;
  for (cplx v : c) norm += std::norm(v);
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mode wavefunctions are normalized in q") {
  const ModeState s = ModeState::make(
      {{1.0, superposed(), 0.0}, {0.7, coherent_fock(cplx(0.8, 0.3)), 0.0}}, Dispersion::massless);
  for (std::size_t l = 0; l < 2; ++l) {
    double n = 0;
    const double h = 1e-3;
    for (double q = -15; q <= 15; q += h) n += std::norm(s.psi(l, q, 0.37)) * h;
    CHECK(std::abs(n - 1) < 1e-9);
  }
}

TEST_CASE("ground state beable is static") {
  ModeState s = ModeState::make({{1.0, {1.0}, 0.4}}, Dispersion::massless);
  CHECK(mode_velocity(s, 0) == 0.0);
  const ModeTrajectory tr = evolve_modes(s, 0.01, 500);
  for (const auto& q : tr.q) CHECK(q[0] == 0.4);
}

TEST_CASE("two-level mode matches an independent integrator") {
  const double k = 1.3;
  ModeState s = ModeState::make({{k, superposed(), 0.3}}, Dispersion::massless);
  const double w = s.energy(0) / s.hbar();
  const double period = 2 * kPi / w;
  const int steps = 2000;
  const double dt = period / steps;
  const ModeTrajectory tr = evolve_modes(s, dt, steps);
  for (int i : {steps / 4, steps / 2, steps}) {
    const double ref = oracle_trajectory(0.3, w, dt / 4, 4 * i);
    CHECK(std::abs(tr.q[i][0] - ref) < 1e-4);
  }
  CHECK(std::abs(tr.q[steps][0] - 0.3) < 1e-4);
  double lo = 1e9, hi = -1e9;
  for (const auto& q : tr.q) lo = std::min(lo, q[0]), hi = std::max(hi, q[0]);
  CHECK(hi - lo > 0.1);
}

TEST_CASE("coherent-state beable keeps a fixed offset from the classical centre") {
  const cplx z(1.5, 0.4);
  auto q_cl = [&](double w, double t) {
    return std::sqrt(2.0) * (z * std::polar(1.0, -w * t)).real();
  };
  const double start = q_cl(0, 0) + 0.3;
  ModeState s = ModeState::make({{1.0, coherent_fock(z), start}}, Dispersion::massless);
  const double w = s.energy(0) / s.hbar();
  const double offset0 = start - q_cl(w, 0);
  const ModeTrajectory tr = evolve_modes(s, 1e-3, 8000);
  for (std::size_t i = 0; i < tr.times.size(); i += 400) {
    const double off = tr.q[i][0] - q_cl(w, tr.times[i]);
    CHECK(std::abs(off) < 1.0);
    CHECK(std::abs(off - offset0) < 1e-8);
  }
}

TEST_CASE("only the excited mode moves") {
  ModeState s = ModeState::make(
      {{1.0, {1.0}, 0.2}, {2.0, superposed(), 0.5}, {0.5, {1.0}, -0.7}}, Dispersion::massless);
  const ModeTrajectory tr = evolve_modes(s, 1e-3, 2000);
  CHECK(tr.q.back()[0] == 0.2);
  CHECK(tr.q.back()[2] == -0.7);
  CHECK(std::abs(tr.q.back()[1] - 0.5) > 1e-3);
  CHECK(s.t() == doctest::Approx(2.0));
  CHECK(s.beable(1) == tr.q.back()[1]);
}

TEST_CASE("mode energy is constant in time") {
  const ModeState s = ModeState::make(
      {{1.0, superposed(), 0.0}, {0.6, coherent_fock(cplx(0.7, -1.1)), 0.0}}, Dispersion::massless);
  for (std::size_t l = 0; l < 2; ++l) {
    const double e0 = s.energy_expectation(l, 0.0);
    for (double t : {0.3, 1.7, 12.0, 100.0})
      CHECK(std::abs(s.energy_expectation(l, t) - e0) <= 1e-10 * std::max(1.0, e0));
  }
  CHECK(s.energy_expectation(0, 0.0) == doctest::Approx(0.5 * s.energy(0)));
}

TEST_CASE("equilibrium is preserved for a superposed mode") {
  const ModeState s = ModeState::make({{1.0, superposed(), 0.0}}, Dispersion::massless);
  const double period = 2 * kPi * s.hbar() / s.energy(0);
  const EquivarianceReport r = mode_equivariance(s, 0, 10000, {period / 3}, 12, 2e-3);
  MESSAGE("max KS ratio " << r.max_ratio);
  CHECK(r.pass);
}

TEST_CASE("increments of different modes are uncorrelated") {
  const ModeState s = ModeState::make(
      {{1.0, superposed(), 0.0}, {1.7, superposed(), 0.0}}, Dispersion::massless);
  const std::size_t n = 10000;
  const double t1 = 0.8;
  std::vector<double> d[2];
  for (std::size_t l = 0; l < 2; ++l) {
    const std::vector<double> q0 = sample_mode(s, l, n, 0.0, 30 + l);
    const std::vector<double> q1 = advance_mode_samples(s, l, q0, 0.0, t1, 2e-3);
    for (std::size_t i = 0; i < n; ++i) d[l].push_back(q1[i] - q0[i]);
  }
  double m0 = 0, m1 = 0;
  for (std::size_t i = 0; i < n; ++i) m0 += d[0][i] / n, m1 += d[1][i] / n;
  double c = 0, v0 = 0, v1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    c += (d[0][i] - m0) * (d[1][i] - m1);
    v0 += (d[0][i] - m0) * (d[0][i] - m0);
    v1 += (d[1][i] - m1) * (d[1][i] - m1);
  }
  const double r = c / std::sqrt(v0 * v1);
  CHECK(std::abs(r) < 2.576 / std::sqrt(double(n)));
}
