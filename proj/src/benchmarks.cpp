#include "pilotwave/benchmarks.hpp"

#include <cmath>

namespace pilotwave {

ArrivalResult arrival_benchmark(const ArrivalBenchmark& b, double g) {
  if (b.snapshots < 3 || !(b.t_end > 0))
    throw Error(ErrorCategory::validation, "snapshots", "need t_end > 0 and at least 3 snapshots");
  Spinor up(2);
  up << 1.0, 0.0;
  const WaveFunction psi = WaveFunction::parametric(
      {Term{1.0, gaussian_packet(Vec3(-b.x0, 0, 0), Vec3(b.k0, 0, 0), b.sigma0, 1.0, 1.0, 3), up}},
      {1.0}, 2);
  std::vector<WaveFunction> snaps;
  snaps.reserve(b.snapshots);
  for (int i = 0; i < b.snapshots; ++i) snaps.push_back(psi.at_time(b.t_end * i / (b.snapshots - 1)));
  return arrival_time_stats(snaps, {Vec3::Zero()}, SpinSpec::make(1, g));
}

EquivarianceCase parse_equivariance_case(const std::string& s) {
  for (auto c : {EquivarianceCase::spin0_gaussian, EquivarianceCase::pauli_eigenstate,
                 EquivarianceCase::decaying_pair, EquivarianceCase::field_mode})
    if (s == to_string(c)) return c;
  throw Error(ErrorCategory::config, "case", "unknown equivariance case '" + s + "'");
}

const char* to_string(EquivarianceCase c) {
  switch (c) {
    case EquivarianceCase::spin0_gaussian: return "spin0-gaussian";
    case EquivarianceCase::pauli_eigenstate: return "pauli-eigenstate";
    case EquivarianceCase::decaying_pair: return "decaying-pair";
    case EquivarianceCase::field_mode: return "field-mode";
  }
  return "?";
}

std::vector<std::string> equivariance_case_names() {
  return {"spin0-gaussian", "pauli-eigenstate", "decaying-pair", "field-mode"};
}

EquivarianceReport run_equivariance_case(EquivarianceCase c, std::size_t n, std::uint64_t seed,
                                         double g) {
  EquivarianceOptions o;
  o.seed = seed;
  Propagator prop;
  prop.method = Method::analytic;
  switch (c) {
    case EquivarianceCase::spin0_gaussian:
    case EquivarianceCase::pauli_eigenstate: {
      // Spreading time 2 m sigma0^2 / hbar = 2.
      const FamilyPtr packet = gaussian_packet(Vec3::Zero(), Vec3(1, 0, 0), 1.0, 1.0, 1.0, 3);
      o.t_checks = {1.0, 2.0};
      o.box.lo = {-9, -9, -9};
      o.box.hi = {11, 9, 9};
      if (c == EquivarianceCase::spin0_gaussian)
        return equivariance_check(WaveFunction::scalar(packet, {1.0}), prop, n, o);
      Spinor up(2);
      up << 1.0, 0.0;
      prop.spin = SpinSpec::make(1, g);
      return equivariance_check(WaveFunction::parametric({Term{1.0, packet, up}}, {1.0}, 2), prop,
                                n, o);
    }
    case EquivarianceCase::decaying_pair: {
      const FamilyPtr pair = correlated_pair(1.0, 0.5, 1.0, 2.0, 1.0, 1);
      o.t_checks = {1.0, 2.0};
      o.box.lo = {-15, -15};
      o.box.hi = {15, 15};
      return equivariance_check(WaveFunction::scalar(pair, {1.0, 2.0}), prop, n, o);
    }
    case EquivarianceCase::field_mode: {
      const double r = 1.0 / std::sqrt(2.0);
      const ModeState s = ModeState::make({{1.0, {r, r}, 0.0}}, Dispersion::massless);
      const double period = 2 * kPi * s.hbar() / s.energy(0);
      return mode_equivariance(s, 0, n, {period / 3, 2 * period / 3}, seed, 2e-3);
    }
  }
  throw Error(ErrorCategory::config, "case", "unknown equivariance case");
}

BranchingSpec two_channel_measurement(double weight_first) {
  if (!(weight_first >= 0) || !(weight_first <= 1))
    throw Error(ErrorCategory::validation, "weight", "must lie in [0, 1]");
  BranchingSpec b;
  b.coefs = {std::sqrt(weight_first), std::sqrt(1 - weight_first)};
  b.states = {harmonic_state(0, 1.0, 1.0, 1.0), harmonic_state(1, 1.0, 1.0, 1.0)};
  b.eigenvalues = {-1.0, 1.0};
  b.system_potential = [](double x) { return 0.5 * x * x; };
  return b;
}

}  // namespace pilotwave
