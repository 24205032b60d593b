#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "pilotwave/decay.hpp"

#include <cmath>
#include <limits>

using namespace pilotwave;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TEST_CASE("pair density at t = 0 is a Gaussian in the separation") {
  const DecayPairSpec s{0.8, 1.0, 1.0, 1.0};
  const double p0 = std::norm(pair_wavefunction(s, Vec3(0.2, 0, 0), Vec3(0.2, 0, 0), 0));
  for (double r : {0.3, 1.0, 2.2}) {
    const double p = std::norm(pair_wavefunction(s, Vec3(0.2 + r, 0, 0), Vec3(0.2, 0, 0), 0));
    CHECK(p / p0 == doctest::Approx(std::exp(-r * r / (2 * s.hbar * s.alpha))).epsilon(1e-12));
    CHECK(p <= p0);
  }
}

TEST_CASE("pair envelope widens with the complex width") {
  const DecayPairSpec s{0.5, 1.0, 3.0, 1.0};
  const double mu = s.mu();
  for (double t : {10.0, 100.0, 1000.0}) {
    const double r = 0.3 * t;
    const double ratio = std::norm(pair_wavefunction(s, Vec3(r, 0, 0), Vec3::Zero(), t)) /
                         std::norm(pair_wavefunction(s, Vec3::Zero(), Vec3::Zero(), t));
    // |psi|^2 ~ exp(-r^2 / 2 w^2), w^2 = hbar (alpha^2 + t^2 / 4 mu^2) / alpha.
    const double w2 = s.hbar * (s.alpha * s.alpha + t * t / (4 * mu * mu)) / s.alpha;
    CHECK(-std::log(ratio) == doctest::Approx(r * r / (2 * w2)).epsilon(1e-10));
  }
}

TEST_CASE("pair wave is annihilated by the total momentum") {
  const DecayPairSpec s{1.0, 1.0, 2.0, 1.0};
  const double h = 1e-5;
  for (double t : {0.0, 0.7, 3.0}) {
    const Vec3 x1(0.4, -0.2, 0.1), x2(-0.3, 0.5, 0.2);
    double scale = 0, worst = 0;
    for (int a = 0; a < 3; ++a) {
      Vec3 e = Vec3::Zero();
      e(a) = h;
      const cplx d1 = (pair_wavefunction(s, x1 + e, x2, t) - pair_wavefunction(s, x1 - e, x2, t)) / (2 * h);
      const cplx d2 = (pair_wavefunction(s, x1, x2 + e, t) - pair_wavefunction(s, x1, x2 - e, t)) / (2 * h);
      const cplx both =
          (pair_wavefunction(s, x1 + e, x2 + e, t) - pair_wavefunction(s, x1 - e, x2 - e, t)) / (2 * h);
      scale = std::max(scale, std::abs(d1));
      worst = std::max({worst, std::abs(d1 + d2), std::abs(both)});
    }
    CHECK(worst < 1e-8 * std::max(1.0, scale));
  }
}

TEST_CASE("symmetric start moves the pair apart along the axis") {
  const DecayPairSpec s{1.0, 1.0, 1.0, 1.0};
  const double eps = 0.3, T = 20 * s.mu() * s.alpha;
  const PairTrajectoryResult r = pair_trajectories(s, {Vec3(eps, 0, 0), Vec3(-eps, 0, 0)}, T, T / 400);
  CHECK(r.max_rel_error < 1e-6);
  for (const Config& x : r.numeric.configs) {
    CHECK(std::abs(x[0].x() + x[1].x()) < 1e-10);
    CHECK(x[0].tail(2).norm() == 0.0);
    CHECK(x[0].x() >= eps);
  }
}

TEST_CASE("coincident start stays put") {
  const DecayPairSpec s{1.0, 1.0, 1.0, 1.0};
  const PairTrajectoryResult r = pair_trajectories(s, {Vec3(1, 2, 3), Vec3(1, 2, 3)}, 10, 0.01);
  for (const Config& x : r.numeric.configs) {
    CHECK(x[0] == Vec3(1, 2, 3));
    CHECK(x[1] == Vec3(1, 2, 3));
  }
}

TEST_CASE("numeric pair trajectories follow the closed form") {
  for (const DecayPairSpec s : {DecayPairSpec{1.0, 1.0, 1.0, 1.0}, DecayPairSpec{0.5, 1.0, 4.0, 1.0},
                                DecayPairSpec{2.0, 3.0, 0.5, 0.7}}) {
    const double T = 20 * s.mu() * s.alpha;
    const Config start{Vec3(0.4, -0.3, 0.8), Vec3(-0.5, 0.6, 0.1)};
    const PairTrajectoryResult r = pair_trajectories(s, start, T, s.mu() * s.alpha / 20);
    CHECK(r.numeric.status == TrajStatus::ok);
    CHECK(r.max_rel_error < 1e-6);
    const double scale = (s.m1 * start[0] + s.m2 * start[1]).norm() + s.M() * (start[0] - start[1]).norm();
    CHECK(r.max_centre_drift < 1e-8 * scale);
    CHECK(r.max_direction_drift < 1e-8);
    CHECK(r.max_momentum_balance < 1e-10);
    // Closed form directly: separation grows as s(t) / alpha.
    const PairClosedForm cf = pair_closed_form(s, start);
    const Config end = cf.at(T);
    CHECK((end[0] - end[1]).norm() == doctest::Approx(cf.r0.norm() * std::sqrt(101.0)));
  }
}

TEST_CASE("gaussian centre-of-mass amplitude: variance model") {
  const double sigma = 2.0, m1 = 1.0, m2 = 3.0, hbar = 1.0;
  const VarianceModel v = variance_evolution(
      [&](double P) { return std::exp(-P * P / sigma); }, m1, m2, hbar, 30.0);
  // |f|^2 = exp(-2 P^2 / sigma) has variance sigma / 4; f' = -2P f / sigma.
  CHECK(v.var_P == doctest::Approx(sigma / 4).epsilon(1e-6));
  CHECK(v.var_MX0 == doctest::Approx(16.0 * hbar * hbar / sigma).epsilon(1e-6));
  CHECK(v.at(0.0) == v.var_MX0);
  CHECK(v.var_P * v.var_MX0 == doctest::Approx(0.25 * hbar * hbar * 16.0).epsilon(1e-6));
}

TEST_CASE("variance model agrees with an equilibrium ensemble") {
  const double sigma = 2.0, alpha = 0.5, m1 = 1.0, m2 = 2.0, hbar = 1.0;
  const VarianceModel v = variance_evolution(
      [&](double P) { return std::exp(-P * P / sigma); }, m1, m2, hbar, 30.0);
  for (double t : {0.0, 1.5, 4.0}) {
    const double mc = variance_monte_carlo(sigma, alpha, m1, m2, hbar, t, 10000, 17);
    CHECK(std::abs(mc / v.at(t) - 1) < 0.05);
  }
}

TEST_CASE("uncertainty product is bounded below") {
  const double m1 = 1.0, m2 = 1.5, hbar = 1.0, M = m1 + m2;
  const double bound = 0.25 * hbar * hbar * M * M;
  const std::vector<std::function<double(double)>> shapes = {
      [](double P) { return std::exp(-P * P); },
      [](double P) { return 1.0 / std::cosh(P); },
      [](double P) { return std::exp(-P * P * P * P); },
      [](double P) { return (1 + P * P) * std::exp(-P * P); },
  };
  for (const auto& f : shapes) {
    const VarianceModel v = variance_evolution(f, m1, m2, hbar, 40.0);
    CHECK(v.var_P * v.var_MX0 >= bound * (1 - 1e-6));
  }
  try {
    variance_evolution([](double P) { return std::exp(-(P - 1) * (P - 1)); }, m1, m2, hbar, 20.0);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::unsupported);
  }
}

TEST_CASE("transition distance for a 2 mm source at 351.1 nm") {
  const double R = transition_distance(2e-3, beam_wavenumber(351.1e-9));
  CHECK(R == doctest::Approx(71.58).epsilon(1e-3));
  CHECK(R > 60);
  CHECK(R < 80);
}

TEST_CASE("small- and large-t angles cross at T") {
  const double L0 = 0.3, m = 2.0, c = 5.0, hbar = 0.9, p = 7.0;
  const double kc = compton_wavenumber(m, c, hbar);
  const double T = transition_time(L0, kc, c);
  const double dP = hbar / L0;
  CHECK(angle_small_t(L0, m, p, T) == doctest::Approx(angle_large_t(dP, p)).epsilon(1e-12));
  CHECK(T == doctest::Approx(L0 * L0 * m / hbar).epsilon(1e-12));
}

TEST_CASE("density ridge follows m1 x1 + m2 x2 = 0") {
  // A narrow centre of mass relative to the separation spread: sigma near
  // 2 M hbar / t keeps Var(X) small at late times.
  CHECK(peak_locus_offset_cells(0.004, 1.0, 1.0, 1.0, 1.0, 1000.0, 100.0, 201) <= 1.0);
}

TEST_CASE("thin lens completion and consistency") {
  const LensSpec a = LensSpec::make(10, 20, kNaN);
  CHECK(a.Sp == doctest::Approx(20));
  const LensSpec b = LensSpec::make(kNaN, 30, 15);
  CHECK(b.f == doctest::Approx(10));
  CHECK(1 / b.S + 1 / b.Sp == doctest::Approx(1 / b.f));
  CHECK_THROWS_AS(LensSpec::make(10, kNaN, kNaN), Error);
  CHECK_THROWS_AS(LensSpec::make(10, 20, 25), Error);
  CHECK_THROWS_AS(LensSpec::make(10, 5, kNaN), Error);
}

namespace {

ImagingSpec imaging(double waist, const Vec3& a_perp) {
  ImagingSpec s;
  s.pair.alpha = 0.01;
  s.sigma = 100;
  s.lens = LensSpec::make(10, 20, 20);
  s.waist = waist;
  s.a_perp = a_perp;
  s.dt = 0.05;
  return s;
}

double focus_miss(const ImagingResult& r) {
  return (r.mean_endpoint.tail(2) - r.expected_focus.tail(2)).norm();
}

}  // namespace

TEST_CASE("imaging endpoint approaches the inverted detection point") {
  const Vec3 a(0, 1.0, 0.5);
  const ImagingResult wide = imaging_trajectories(imaging(0.4, a), 40, 5);
  const ImagingResult mid = imaging_trajectories(imaging(0.1, a), 40, 5);
  const ImagingResult narrow = imaging_trajectories(imaging(0.025, a), 40, 5);
  CHECK(wide.expected_focus.tail(2).isApprox(-a.tail(2)));
  CHECK(focus_miss(wide) < 0.4);
  CHECK(focus_miss(mid) < 0.1);
  CHECK(focus_miss(narrow) < 0.025);
  CHECK(focus_miss(mid) < focus_miss(wide));
  CHECK(focus_miss(narrow) < focus_miss(mid));
  CHECK(wide.max_chord_deviation < 1e-6);
  CHECK(wide.exited == 0);
}

TEST_CASE("on-axis detection images onto the axis") {
  const ImagingResult r = imaging_trajectories(imaging(0.2, Vec3::Zero()), 40, 6);
  CHECK(r.mean_endpoint.tail(2).norm() < 3 * r.rms_spread / std::sqrt(40.0) + 1e-12);
}

TEST_CASE("energy shell constants") {
  const EnergyShell e = energy_shell(0.02, 0.02 * 0.999);
  // a lambda_c = 4 pi^2 sqrt(2 (mu/m) E / m c^2) with mu/m = 1/2.
  const double k = 4 * kPi * kPi;
  CHECK(e.a_plus == doctest::Approx(k * std::sqrt(0.02)).epsilon(1e-12));
  CHECK(e.a_minus == doctest::Approx(k * std::sqrt(0.02 * 0.999)).epsilon(1e-12));
  CHECK(std::round(e.a_plus * 1e5) / 1e5 == doctest::Approx(5.58309).epsilon(1e-12));
  CHECK(e.g(0.0) == doctest::Approx(e.g0()).epsilon(1e-9));
  CHECK(e.g0() == doctest::Approx(0.5 * (e.a_plus * e.a_plus - e.a_minus * e.a_minus)));
  CHECK_THROWS_AS(energy_shell(0.02, 0.03), Error);
  CHECK_THROWS_AS(energy_shell(0.02, 0.0), Error);
}

TEST_CASE("energy shell density is peaked at the origin") {
  const EnergyShell e = energy_shell(0.02, 0.02 * 0.999);
  const auto curve = energy_shell_curve(e, 50, 5001);
  const double g0 = curve.front()[1];
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i][1] < g0);
}

TEST_CASE("energy shell weights") {
  const EnergyShell e = energy_shell(0.02, 0.02 * 0.999);
  const ShellWeights w = shell_weights(e, 50, 5);
  // Independent composite Simpson rule on g = a+^2 J1(a+ x)/(a+ x) - a-^2 J1(a- x)/(a- x).
  auto g = [&](double x) {
    if (x == 0) return e.g0();
    auto term = [&](double a) { return a * a * std::cyl_bessel_j(1.0, a * x) / (a * x); };
    return term(e.a_plus) - term(e.a_minus);
  };
  auto simpson = [&](double hi, int power) {
    const int n = 100000;
    const double h = hi / n;
    double s = 0;
    for (int i = 0; i <= n; ++i) {
      const double x = i * h, v = g(x) * g(x) * std::pow(x, power);
      s += v * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
    }
    return s * h / 3;
  };
  const double plain = simpson(5, 0) / simpson(50, 0);
  const double radial = simpson(5, 2) / simpson(50, 2);
  CHECK(w.plain == doctest::Approx(plain).epsilon(1e-6));
  CHECK(w.radial == doctest::Approx(radial).epsilon(1e-6));
  CHECK(w.plain == doctest::Approx(0.720775).epsilon(1e-5));
  CHECK(w.radial == doctest::Approx(0.00974597).epsilon(1e-4));
  CHECK(w.plain > 0.5);
}

TEST_CASE("real standing-wave profile carries no current") {
  const EnergyShell e = energy_shell(0.02, 0.02 * 0.999);
  for (double x : {0.0, 0.5, 3.0}) {
    const cplx psi(e.g(x), 0.0);
    const double h = 1e-6;
    const cplx d((e.g(x + h) - e.g(std::max(0.0, x - h))) / (x > 0 ? 2 * h : h), 0.0);
    CHECK((std::conj(psi) * d).imag() == 0.0);
  }
}
