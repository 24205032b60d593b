#include "pilotwave/decay.hpp"

#include <cmath>
#include <limits>

namespace pilotwave {

void DecayPairSpec::validate() const {
  if (!(alpha > 0) || !std::isfinite(alpha))
    throw Error(ErrorCategory::validation, "alpha", "must be positive");
  if (!(m1 > 0) || !(m2 > 0)) throw Error(ErrorCategory::validation, "mass", "must be positive");
  if (!(hbar > 0)) throw Error(ErrorCategory::validation, "hbar", "must be positive");
}

cplx pair_wavefunction(const DecayPairSpec& s, const Vec3& x1, const Vec3& x2, double t) {
  s.validate();
  static thread_local FamilyPtr fam;
  static thread_local DecayPairSpec cached{-1, 0, 0, 0};
  if (!fam || cached.alpha != s.alpha || cached.m1 != s.m1 || cached.m2 != s.m2 ||
      cached.hbar != s.hbar) {
    fam = decaying_pair(s.alpha, s.m1, s.m2, s.hbar, 3);
    cached = s;
  }
  return fam->value({x1, x2}, t);
}

double PairClosedForm::scale(double t) const {
  const double mu = spec.mu(), a = spec.alpha;
  return std::sqrt(t * t / (4 * mu * mu) + a * a) / a;
}

Config PairClosedForm::at(double t) const {
  const double k = scale(t);
  return {centre + spec.m2 / spec.M() * k * r0, centre - spec.m1 / spec.M() * k * r0};
}

PairClosedForm pair_closed_form(const DecayPairSpec& s, const Config& start) {
  s.validate();
  if (start.size() != 2) throw Error(ErrorCategory::shape, "start", "two positions expected");
  PairClosedForm cf;
  cf.spec = s;
  cf.centre = (s.m1 * start[0] + s.m2 * start[1]) / s.M();
  cf.r0 = start[0] - start[1];
  return cf;
}

PairTrajectoryResult pair_trajectories(const DecayPairSpec& s, const Config& start,
                                       double t_final, double dt) {
  const PairClosedForm cf = pair_closed_form(s, start);
  PairTrajectoryResult out;
  const WaveFunction psi =
      WaveFunction::scalar(decaying_pair(s.alpha, s.m1, s.m2, s.hbar, 3), {s.m1, s.m2});
  if (cf.r0.norm() == 0.0) {
    // Coincident start: the current vanishes and both beables stay put.
    out.numeric.times = {0.0, t_final};
    out.numeric.configs = {start, start};
  } else {
    const double rho0 = psi.evaluate(start).squaredNorm();
    const WaveVelocity field(psi, SpinSpec::make(0, std::nullopt, s.hbar), nullptr, rho0);
    IntegrationControls c;
    c.dt = dt;
    out.numeric = integrate_trajectory({start, 0.0}, field, t_final, c);
  }
  const Vec3 P0 = s.m1 * start[0] + s.m2 * start[1];
  const Vec3 dir0 = cf.r0.norm() > 0 ? Vec3(cf.r0.normalized()) : Vec3::Zero();
  for (std::size_t i = 0; i < out.numeric.times.size(); ++i) {
    const double t = out.numeric.times[i];
    const Config& x = out.numeric.configs[i];
    const Config c = cf.at(t);
    out.closed.push_back(c);
    for (int k = 0; k < 2; ++k) {
      const double den = std::max(c[k].norm(), cf.r0.norm());
      if (den > 0) out.max_rel_error = std::max(out.max_rel_error, (x[k] - c[k]).norm() / den);
    }
    out.max_centre_drift = std::max(out.max_centre_drift, (s.m1 * x[0] + s.m2 * x[1] - P0).norm());
    const Vec3 sep = x[0] - x[1];
    if (sep.norm() > 0 && dir0.norm() > 0)
      out.max_direction_drift = std::max(out.max_direction_drift, (sep.normalized() - dir0).norm());
    if (cf.r0.norm() > 0) {
      Spinor p;
      CMat g;
      psi.evaluate_grad_at(x, t, p, g);
      const CurrentSample cs = current_from(p, g, psi.masses(), SpinSpec::make(0, std::nullopt, s.hbar),
                                            nullptr, x, t);
      const Vec3 bal = (s.m1 * cs.j[0] + s.m2 * cs.j[1]) / cs.rho;
      const double vs = cs.j[0].norm() / cs.rho;
      out.max_momentum_balance = std::max(out.max_momentum_balance, bal.norm() / std::max(vs, 1e-300) * (vs > 0));
    }
  }
  return out;
}

VarianceModel variance_evolution(const std::function<double(double)>& f, double m1, double m2,
                                 double hbar, double P_max, int points) {
  if (!(P_max > 0) || points < 5) throw Error(ErrorCategory::validation, "P_max", "bad quadrature range");
  if (!(m1 > 0) || !(m2 > 0) || !(hbar > 0))
    throw Error(ErrorCategory::validation, "mass", "must be positive");
  const double h = 2 * P_max / (points - 1);
  std::vector<double> P(points), F(points);
  double fmax = 0.0;
  for (int i = 0; i < points; ++i) {
    P[i] = -P_max + i * h;
    F[i] = f(P[i]);
    if (!std::isfinite(F[i])) throw Error(ErrorCategory::validation, "F", "not finite");
    fmax = std::max(fmax, std::abs(F[i]));
  }
  for (int i = 0; i < points; ++i)
    if (std::abs(F[i] - F[points - 1 - i]) > 1e-12 * fmax)
      throw Error(ErrorCategory::unsupported, "F",
                  "not inversion-symmetric; the cross terms of the variance would survive");
  // Trapezoid sums; f' by fourth-order differences of the tabulated amplitude.
  std::vector<cplx> Fc(F.begin(), F.end()), dF(points);
  grid_line_derivative(Fc.data(), 1, points, h, dF.data(), 1);
  double n0 = 0.0, n2 = 0.0, d2 = 0.0;
  for (int i = 0; i < points; ++i) {
    const double w = (i == 0 || i == points - 1) ? 0.5 * h : h;
    n0 += w * F[i] * F[i];
    n2 += w * P[i] * P[i] * F[i] * F[i];
    d2 += w * std::norm(dF[i]);
  }
  if (!(n0 > 0)) throw Error(ErrorCategory::validation, "F", "vanishes on the range");
  VarianceModel vm;
  vm.var_P = n2 / n0;
  const double M = m1 + m2;
  // For real f the conjugate-position wave has Var(X) = hbar^2 <f'^2> / <f^2>.
  vm.var_MX0 = M * M * hbar * hbar * d2 / n0;
  return vm;
}

double variance_monte_carlo(double sigma, double alpha, double m1, double m2, double hbar,
                            double t, std::size_t n, std::uint64_t seed) {
  const WaveFunction psi = WaveFunction::scalar(
      correlated_pair(sigma, alpha, m1, m2, hbar, 1), {m1, m2}, t);
  const Ensemble e = sample_equilibrium(psi, n, seed);
  double s = 0.0, s2 = 0.0;
  for (const auto& m : e.members) {
    const double q = m1 * m.positions[0][0] + m2 * m.positions[1][0];
    s += q;
    s2 += q * q;
  }
  const double mean = s / double(n);
  return s2 / double(n) - mean * mean;
}

double transition_distance(double L0, double k) { return L0 * L0 * k; }
double transition_time(double L0, double k, double c) { return L0 * L0 * k / c; }
double compton_wavenumber(double mass, double c, double hbar) { return mass * c / hbar; }
double beam_wavenumber(double wavelength) {
  if (!(wavelength > 0)) throw Error(ErrorCategory::validation, "wavelength", "must be positive");
  return 2 * kPi / wavelength;
}
double angle_small_t(double L0, double m, double p, double t) { return L0 * m / (p * t); }
double angle_large_t(double dP, double p) { return dP / p; }

double peak_locus_offset_cells(double sigma, double alpha, double m1, double m2, double hbar,
                               double t, double extent, int points) {
  const FamilyPtr fam = correlated_pair(sigma, alpha, m1, m2, hbar, 1);
  const double h = 2 * extent / (points - 1);
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    const double x1 = -extent + i * h;
    if (std::abs(x1) > 0.5 * extent) continue;
    double best = -1.0, bx = 0.0;
    for (int j = 0; j < points; ++j) {
      const double x2 = -extent + j * h;
      const double r = std::norm(fam->value({Vec3(x1, 0, 0), Vec3(x2, 0, 0)}, t));
      if (r > best) best = r, bx = x2;
    }
    worst = std::max(worst, std::abs(m1 * x1 + m2 * bx) / (m2 * h));
  }
  return worst;
}

LensSpec LensSpec::make(double f, double S, double Sp) {
  const int given = !std::isnan(f) + !std::isnan(S) + !std::isnan(Sp);
  if (given < 2) throw Error(ErrorCategory::validation, "lens", "two of f, S, S' are required");
  LensSpec l;
  if (std::isnan(f)) {
    f = 1.0 / (1.0 / S + 1.0 / Sp);
  } else if (std::isnan(S)) {
    S = 1.0 / (1.0 / f - 1.0 / Sp);
  } else if (std::isnan(Sp)) {
    Sp = 1.0 / (1.0 / f - 1.0 / S);
  } else if (std::abs(1.0 / S + 1.0 / Sp - 1.0 / f) > 1e-12 / f) {
    throw Error(ErrorCategory::validation, "lens", "1/S + 1/S' must equal 1/f");
  }
  if (!(f > 0) || !(S > 0) || !(Sp > 0))
    throw Error(ErrorCategory::validation, "lens", "f, S and S' must be positive (real image)");
  l.f = f;
  l.S = S;
  l.Sp = Sp;
  return l;
}

namespace {

void append(TrajectoryRecord& dst, const TrajectoryRecord& src) {
  for (std::size_t i = dst.times.empty() ? 0 : 1; i < src.times.size(); ++i) {
    dst.times.push_back(src.times[i]);
    dst.configs.push_back(src.configs[i]);
  }
  if (src.status != TrajStatus::ok) dst.status = src.status;
}

// Distance of each point from the chord between the first and last point,
// relative to the chord length.
double chord_deviation(const TrajectoryRecord& r) {
  if (r.configs.size() < 2) return 0.0;
  const Vec3 a = r.configs.front()[0], b = r.configs.back()[0];
  const double L = (b - a).norm();
  if (!(L > 0)) return 0.0;
  const Vec3 u = (b - a) / L;
  double worst = 0.0;
  for (const auto& c : r.configs) {
    const Vec3 d = c[0] - a;
    worst = std::max(worst, (d - d.dot(u) * u).norm() / L);
  }
  return worst;
}

// Step no larger than the given time scale; recording keeps roughly the
// density requested for the nominal dt.
IntegrationControls phase_controls(const ImagingSpec& s, double scale) {
  IntegrationControls c;
  c.dt = std::min(s.dt, scale);
  c.record_every = std::max(1, int(std::lround(s.record_every * s.dt / c.dt)));
  return c;
}

}  // namespace

ImagingResult imaging_trajectories(const ImagingSpec& s, std::size_t n, std::uint64_t seed) {
  const DecayPairSpec& P = s.pair;
  P.validate();
  if (!(s.sigma > 0)) throw Error(ErrorCategory::validation, "sigma", "must be positive");
  if (!(s.waist > 0)) throw Error(ErrorCategory::validation, "waist", "must be positive");
  if (!(s.dt > 0)) throw Error(ErrorCategory::validation, "dt", "must be positive");
  const double d = 0.5 * s.lens.S;
  const double xL = -d;
  const Vec3 a(d, s.a_perp[1], s.a_perp[2]);
  const double hb = P.hbar, mu = P.mu(), M = P.M();
  const double sdX = hb / std::sqrt(s.sigma);
  const double sdr = std::sqrt(hb * P.alpha);
  const Vec3 focus(xL - s.lens.Sp, -s.lens.Sp / s.lens.S * a[1], -s.lens.Sp / s.lens.S * a[2]);

  ImagingResult res;
  res.detection_point = a;
  res.expected_focus = focus;
  res.runs.resize(n);
  const SpinSpec spin0 = SpinSpec::make(0, std::nullopt, hb);
  const WaveFunction pair = WaveFunction::scalar(decaying_pair(P.alpha, P.m1, P.m2, hb, 3), {P.m1, P.m2});

  parallel_for(n, [&](std::size_t k) {
    ImagingRun& run = res.runs[k];
    CounterRng rng(seed, k);
    // Decay point weighted by the solid angle of the detector at a.
    const double dmin = std::max(d - 8 * sdX, 1e-3 * d);
    Vec3 X, r0;
    double td = 0.0;
    for (;;) {
      X = Vec3(sdX * rng.normal(), sdX * rng.normal(), sdX * rng.normal());
      const Vec3 to_a = a - X;
      if (to_a[0] <= 0) continue;
      const double w = (to_a[0] / to_a.norm()) / to_a.squaredNorm();
      if (rng.uniform() * (1.0 / (dmin * dmin)) > w) continue;
      double r2 = 0.0;
      for (int i = 0; i < 3; ++i) r2 += std::pow(sdr * rng.normal(), 2);
      r0 = std::sqrt(r2) * to_a.normalized();
      const double sc = to_a.norm() * M / (P.m2 * r0.norm());  // s(t_d) / alpha
      if (sc < 1.0) continue;
      td = 2 * mu * P.alpha * std::sqrt(sc * sc - 1.0);
      break;
    }
    run.decay_point = X;
    run.t_detect = td;
    const Config start{X + P.m2 / M * r0, X - P.m1 / M * r0};

    // Phase 1: both beables guided by the pair wave up to detection (or to
    // the lens plane if beable 2 reaches it first).
    const double lens_scale = (X[0] - xL) * M / (P.m1 * std::abs(r0[0]));
    double t1 = td;
    if (r0[0] > 0 && lens_scale >= 1.0) {
      const double tl = 2 * mu * P.alpha * std::sqrt(lens_scale * lens_scale - 1.0);
      if (tl < td) {
        t1 = tl;
        run.lens_before_detection = true;
      }
    }
    const IntegrationControls c = phase_controls(s, 0.02 * mu * P.alpha);
    const WaveVelocity vpair(pair, spin0, nullptr, pair.evaluate(start).squaredNorm());
    TrajectoryRecord ph1 = integrate_trajectory({start, 0.0}, vpair, t1, c);
    for (std::size_t i = 0; i < ph1.times.size(); ++i) {
      run.beable1.times.push_back(ph1.times[i]);
      run.beable1.configs.push_back({ph1.configs[i][0]});
      run.beable2.times.push_back(ph1.times[i]);
      run.beable2.configs.push_back({ph1.configs[i][1]});
    }
    run.beable1.status = run.beable2.status = ph1.status;
    if (ph1.status != TrajStatus::ok) return;
    Vec3 x2 = ph1.configs.back()[1];
    if (run.lens_before_detection) {
      // Beable 1 continues on its straight line to the detector.
      TrajectoryRecord rest = integrate_trajectory({ph1.configs.back(), t1}, vpair, td, c);
      for (std::size_t i = 1; i < rest.times.size(); ++i) {
        run.beable1.times.push_back(rest.times[i]);
        run.beable1.configs.push_back({rest.configs[i][0]});
      }
    }

    // Phase 2: partner wave centred on a, continuous in width at t_d.
    double tL = t1;
    if (!run.lens_before_detection) {
      const double off = td * (1.0 / (2 * mu) - 1.0 / (2 * P.m2));
      const WaveFunction post = WaveFunction::scalar(
          post_collapse_wave(a, P.alpha, P.m2, hb, 3, off), {P.m2});
      const double Ad = std::abs(cplx(P.alpha, td / (2 * P.m2) + off));
      const double ratio = (xL - a[0]) / (x2[0] - a[0]);
      const double im = std::sqrt(std::max(0.0, ratio * ratio * Ad * Ad - P.alpha * P.alpha));
      tL = 2 * P.m2 * (im - off);
      const WaveVelocity vpost(post, spin0, nullptr, post.evaluate({x2}).squaredNorm());
      TrajectoryRecord ph2 = integrate_trajectory({{x2}, td}, vpost, tL, c);
      append(run.beable2, ph2);
      if (ph2.status != TrajStatus::ok) return;
      x2 = ph2.configs.back()[0];
    }
    run.t_lens = tL;
    run.chord_deviation = chord_deviation(run.beable2);
    if (std::hypot(x2[1], x2[2]) > s.aperture) {
      run.beable2.status = TrajStatus::exited;
      return;
    }

    // Phase 3: converging Gaussian behind the lens with the beable's axial
    // speed; the focus is reached after travelling S'.
    double vx;
    {
      Config v;
      if (run.lens_before_detection) {
        const Config cfg{ph1.configs.back()[0], x2};
        vpair.velocity(cfg, tL, v);
        vx = v[1][0];
      } else {
        const double off = td * (1.0 / (2 * mu) - 1.0 / (2 * P.m2));
        const WaveFunction post = WaveFunction::scalar(
            post_collapse_wave(a, P.alpha, P.m2, hb, 3, off), {P.m2});
        const WaveVelocity vpost(post, spin0, nullptr, post.evaluate({x2}).squaredNorm());
        vpost.velocity({x2}, tL, v);
        vx = v[0][0];
      }
    }
    if (!(vx < 0)) {
      run.beable2.status = TrajStatus::exited;
      return;
    }
    const double tf = tL + s.lens.Sp / std::abs(vx);
    run.t_focus = tf;
    const WaveFunction conv = WaveFunction::scalar(
        focusing_gaussian(focus, tf, s.waist, P.m2 * vx / hb, P.m2, hb), {P.m2});
    const WaveVelocity vconv(conv, spin0, nullptr, conv.evaluate({x2}).squaredNorm());
    TrajectoryRecord ph3 = integrate_trajectory(
        {{x2}, tL}, vconv, tf, phase_controls(s, 0.05 * P.m2 * s.waist * s.waist / hb));
    append(run.beable2, ph3);
  });

  std::size_t ok = 0;
  Vec3 sum = Vec3::Zero();
  for (const auto& r : res.runs) {
    res.max_chord_deviation = std::max(res.max_chord_deviation, r.chord_deviation);
    if (r.beable2.status != TrajStatus::ok) {
      ++res.exited;
      continue;
    }
    sum += r.beable2.configs.back()[0];
    ++ok;
  }
  if (ok == 0) throw Error(ErrorCategory::physics, "aperture", "no beable reached the image plane");
  res.mean_endpoint = sum / double(ok);
  double ss = 0.0;
  for (const auto& r : res.runs)
    if (r.beable2.status == TrajStatus::ok) {
      const Vec3 e = r.beable2.configs.back()[0] - res.mean_endpoint;
      ss += e[1] * e[1] + e[2] * e[2];
    }
  res.rms_spread = std::sqrt(ss / double(ok));
  return res;
}

double EnergyShell::g(double x) const {
  if (x < 0) throw Error(ErrorCategory::validation, "x", "must be >= 0");
  if (x < 1e-8 / a_plus) return g0();
  return (a_plus * std::cyl_bessel_j(1.0, a_plus * x) - a_minus * std::cyl_bessel_j(1.0, a_minus * x)) / x;
}

EnergyShell energy_shell(double eplus, double eminus, double mu_over_m) {
  if (!(eplus > 0) || !(eminus > 0) || !(eminus < eplus))
    throw Error(ErrorCategory::validation, "E_minus", "need 0 < E_minus < E_plus");
  if (!(mu_over_m > 0)) throw Error(ErrorCategory::validation, "mu", "must be positive");
  EnergyShell e;
  // 2 pi sqrt(2 mu E) / hbar * h / (m c) = 4 pi^2 sqrt(2 (mu/m) E / (m c^2))
  e.a_plus = 4 * kPi * kPi * std::sqrt(2 * mu_over_m * eplus);
  e.a_minus = 4 * kPi * kPi * std::sqrt(2 * mu_over_m * eminus);
  return e;
}

std::vector<std::array<double, 2>> energy_shell_curve(const EnergyShell& e, double x_max,
                                                      int points) {
  if (!(x_max > 0) || points < 2)
    throw Error(ErrorCategory::validation, "points", "need x_max > 0 and at least 2 points");
  std::vector<std::array<double, 2>> out(points);
  for (int i = 0; i < points; ++i) {
    const double x = x_max * i / (points - 1);
    const double g = e.g(x);
    out[i] = {x, g * g};
  }
  return out;
}

ShellWeights shell_weights(const EnergyShell& e, double x_max, double x_inner) {
  if (!(x_max > 0) || !(x_inner >= 0))
    throw Error(ErrorCategory::validation, "x_max", "need x_max > 0 and x_inner >= 0");
  const int N = 200001;
  const double h = x_max / (N - 1);
  double in0 = 0, all0 = 0, in2 = 0, all2 = 0, prev0 = 0, prev2 = 0;
  for (int i = 0; i < N; ++i) {
    const double x = i * h, g = e.g(x);
    const double f0 = g * g, f2 = f0 * x * x;
    if (i > 0) {
      const double s0 = 0.5 * h * (prev0 + f0), s2 = 0.5 * h * (prev2 + f2);
      all0 += s0;
      all2 += s2;
      if (x <= x_inner) {
        in0 += s0;
        in2 += s2;
      }
    }
    prev0 = f0;
    prev2 = f2;
  }
  return {in0 / all0, in2 / all2};
}

}  // namespace pilotwave
