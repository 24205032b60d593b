#include "pilotwave/fieldmodes.hpp"

#include <algorithm>
#include <cmath>

namespace pilotwave {

Dispersion parse_dispersion(const std::string& s) {
  if (s == "nonrelativistic") return Dispersion::nonrelativistic;
  if (s == "massless") return Dispersion::massless;
  throw Error(ErrorCategory::config, "dispersion", "expected nonrelativistic or massless, got '" + s + "'");
}

const char* to_string(Dispersion d) {
  return d == Dispersion::nonrelativistic ? "nonrelativistic" : "massless";
}

std::vector<cplx> coherent_fock(cplx z) {
  std::vector<cplx> c(kFockMax + 1);
  const double pre = std::exp(-0.5 * std::norm(z));
  cplx term = pre;
  double kept = 0.0;
  for (int n = 0; n <= kFockMax; ++n) {
    if (n > 0) term *= z / std::sqrt(double(n));
    c[n] = term;
    kept += std::norm(term);
  }
  if (1.0 - kept >= 1e-12)
    throw Error(ErrorCategory::validation, "coherent",
                "Fock tail above n = 32 is " + std::to_string(1.0 - kept) + ", limit 1e-12");
  return c;
}

ModeState ModeState::make(std::vector<ModeSpec> modes, Dispersion d, double mass, double hbar) {
  if (modes.empty()) throw Error(ErrorCategory::validation, "modes", "at least one mode required");
  if (!(hbar > 0)) throw Error(ErrorCategory::validation, "hbar", "must be positive");
  if (d == Dispersion::nonrelativistic && !(mass > 0))
    throw Error(ErrorCategory::validation, "mass", "must be positive");
  ModeState s;
  s.hbar_ = hbar;
  for (std::size_t l = 0; l < modes.size(); ++l) {
    const ModeSpec& m = modes[l];
    const std::string field = "modes[" + std::to_string(l) + "]";
    if (m.fock.empty() || m.fock.size() > std::size_t(kFockMax + 1))
      throw Error(ErrorCategory::validation, field + ".fock", "needs 1 to 33 amplitudes");
    double norm = 0.0, amp = 0.0;
    for (const cplx& c : m.fock) {
      norm += std::norm(c);
      amp += std::abs(c);
    }
    if (std::abs(norm - 1.0) > 1e-9)
      throw Error(ErrorCategory::validation, field + ".fock", "not normalized (sum |c_n|^2 = " +
                                                                  std::to_string(norm) + ")");
    if (!std::isfinite(m.q) || !std::isfinite(m.k))
      throw Error(ErrorCategory::validation, field, "k and q must be finite");
    const double E = d == Dispersion::nonrelativistic ? hbar * hbar * m.k * m.k / (2 * mass)
                                                      : hbar * std::abs(m.k);
    if (!(E > 0)) throw Error(ErrorCategory::validation, field + ".k", "E(k) must be positive");
    s.energy_.push_back(E);
    // |phi_n| <= pi^{-1/4} for all n and q.
    s.bound_.push_back(amp * amp / std::sqrt(kPi));
  }
  s.modes_ = std::move(modes);
  return s;
}

cplx ModeState::psi(std::size_t l, double q, double t, cplx& dpsi) const {
  const auto& c = modes_[l].fock;
  const int N = int(c.size()) - 1;
  double phi[kFockMax + 2];
  hermite_functions(N + 1, q, phi);
  const double w = energy_[l] * t / hbar_;
  cplx v = 0.0;
  dpsi = 0.0;
  for (int n = 0; n <= N; ++n) {
    const cplx a = c[n] * std::polar(1.0, -n * w);
    const double d = (n > 0 ? std::sqrt(n / 2.0) * phi[n - 1] : 0.0) - std::sqrt((n + 1) / 2.0) * phi[n + 1];
    v += a * phi[n];
    dpsi += a * d;
  }
  return v;
}

cplx ModeState::psi(std::size_t l, double q, double t) const {
  cplx d;
  return psi(l, q, t, d);
}

double ModeState::energy_expectation(std::size_t l, double t) const {
  const auto& c = modes_[l].fock;
  const double w = energy_[l] * t / hbar_;
  double e = 0.0;
  for (std::size_t n = 0; n < c.size(); ++n) e += n * std::norm(c[n] * std::polar(1.0, -double(n) * w));
  return e * energy_[l];
}

double ModeState::velocity(std::size_t l, double q, double t) const {
  cplx d;
  const cplx v = psi(l, q, t, d);
  const double rho = std::norm(v);
  if (!(rho > kRhoFloorRel * bound_[l]))
    throw Error(ErrorCategory::node, "modes[" + std::to_string(l) + "].q",
                "density vanishes at the beable");
  return energy_[l] / hbar_ * (std::conj(v) * d).imag() / rho;
}

double mode_velocity(const ModeState& s, std::size_t l) {
  return s.velocity(l, s.beable(l), s.t());
}

namespace {

double rk4(const ModeState& s, std::size_t l, double q, double t, double h) {
  const double k1 = s.velocity(l, q, t);
  const double k2 = s.velocity(l, q + 0.5 * h * k1, t + 0.5 * h);
  const double k3 = s.velocity(l, q + 0.5 * h * k2, t + 0.5 * h);
  const double k4 = s.velocity(l, q + h * k3, t + h);
  return q + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
}

// Support of mode l: every Hermite function up to the highest occupied level
// is below 1e-17 of its peak outside.
double mode_extent(const ModeState& s, std::size_t l) {
  const double N = double(s.mode(l).fock.size() - 1);
  return std::sqrt(2 * N + 1) + 9.0;
}

}  // namespace

ModeTrajectory evolve_modes(ModeState& s, double dt, int steps) {
  if (!(dt > 0) || steps < 0) throw Error(ErrorCategory::validation, "dt", "need dt > 0, steps >= 0");
  ModeTrajectory out;
  const std::size_t L = s.size();
  auto snapshot = [&] {
    out.times.push_back(s.t());
    std::vector<double> q(L);
    for (std::size_t l = 0; l < L; ++l) q[l] = s.beable(l);
    out.q.push_back(std::move(q));
  };
  snapshot();
  for (int k = 0; k < steps; ++k) {
    const double t = s.t();
    for (std::size_t l = 0; l < L; ++l) s.set_beable(l, rk4(s, l, s.beable(l), t, dt));
    s.set_time(t + dt);
    snapshot();
  }
  return out;
}

namespace {

struct Tabulated {
  std::vector<double> q, cdf;
};

Tabulated tabulate_cdf(const ModeState& s, std::size_t l, double t, int points = 8001) {
  const double L = mode_extent(s, l);
  Tabulated tab;
  tab.q.resize(points);
  tab.cdf.resize(points);
  const double h = 2 * L / (points - 1);
  double prev = 0.0, acc = 0.0;
  for (int i = 0; i < points; ++i) {
    tab.q[i] = -L + i * h;
    const double r = std::norm(s.psi(l, tab.q[i], t));
    if (i > 0) acc += 0.5 * h * (prev + r);
    tab.cdf[i] = acc;
    prev = r;
  }
  for (double& c : tab.cdf) c /= acc;
  return tab;
}

}  // namespace

std::vector<double> sample_mode(const ModeState& s, std::size_t l, std::size_t n, double t,
                                std::uint64_t seed) {
  const Tabulated tab = tabulate_cdf(s, l, t);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, i);
    const double u = rng.uniform();
    auto it = std::upper_bound(tab.cdf.begin(), tab.cdf.end(), u);
    const std::size_t j = std::clamp<std::size_t>(it - tab.cdf.begin(), 1, tab.cdf.size() - 1);
    const double c0 = tab.cdf[j - 1], c1 = tab.cdf[j];
    const double w = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
    out[i] = tab.q[j - 1] + w * (tab.q[j] - tab.q[j - 1]);
  }
  return out;
}

std::vector<double> advance_mode_samples(const ModeState& s, std::size_t l,
                                         std::vector<double> q, double t0, double t1, double dt) {
  if (!(dt > 0)) throw Error(ErrorCategory::validation, "dt", "must be positive");
  const int N = std::max(1, int(std::ceil(std::abs(t1 - t0) / dt - 1e-9)));
  const double h = (t1 - t0) / N;
  parallel_for(q.size(), [&](std::size_t i) {
    double x = q[i];
    for (int k = 0; k < N; ++k) x = rk4(s, l, x, t0 + k * h, h);
    q[i] = x;
  });
  return q;
}

EquivarianceReport mode_equivariance(const ModeState& s, std::size_t l, std::size_t n,
                                     const std::vector<double>& t_checks, std::uint64_t seed,
                                     double dt) {
  if (n < 1000) throw Error(ErrorCategory::validation, "n", "at least 1000 members required");
  EquivarianceReport rep;
  std::vector<double> q = sample_mode(s, l, n, s.t(), seed);
  double t = s.t();
  std::vector<double> checks = t_checks;
  std::sort(checks.begin(), checks.end());
  for (double tc : checks) {
    q = advance_mode_samples(s, l, std::move(q), t, tc, dt);
    t = tc;
    const Tabulated tab = tabulate_cdf(s, l, tc);
    KsResult r;
    r.t = tc;
    r.statistic = ks_statistic(q, tab.q, tab.cdf);
    r.critical = ks_critical_1pct(n);
    r.pass = r.statistic <= r.critical;
    rep.max_ratio = std::max(rep.max_ratio, r.statistic / r.critical);
    rep.pass = rep.pass && r.pass;
    rep.tests.push_back(r);
  }
  return rep;
}

}  // namespace pilotwave
