#pragma once

#include "pilotwave/currents.hpp"

#include <memory>

namespace pilotwave {

enum class Method { analytic, split_step };

struct Propagator {
  Method method = Method::analytic;
  double dt = 1e-2;
  // Scalar potential energy V(x_1..x_N, t); empty means zero.
  std::function<double(const Config&, double)> V;
  bool V_time_dependent = false;
  std::optional<EmPotential> em;
  SpinSpec spin = SpinSpec::make(0);
  // The spectral kinetic step has no orbital D^2 coupling. With a vector
  // potential present the caller must accept dropping it (only the spin-B
  // term and eV0 are kept).
  bool neglect_orbital_coupling = false;
};

// Advances psi by prop.dt.
WaveFunction step(const WaveFunction& psi, const Propagator& prop);

// Steps to each snapshot time (landing exactly, with a shorter final step
// where needed) and to t_final. Returns the requested snapshots followed by
// the final state unless the last snapshot already is at t_final.
std::vector<WaveFunction> propagate_to(const WaveFunction& psi, const Propagator& prop,
                                       double t_final,
                                       const std::vector<double>& snapshot_times = {});

// Non-fatal remarks about a propagator/state pairing (e.g. grid sizes that
// are not powers of two).
std::vector<std::string> propagator_warnings(const WaveFunction& psi, const Propagator& prop);

// Reusable Strang split-step integrator for one grid.
class SplitStepper {
 public:
  SplitStepper(const WaveFunction& like, const Propagator& prop);
  ~SplitStepper();
  SplitStepper(const SplitStepper&) = delete;
  SplitStepper& operator=(const SplitStepper&) = delete;

  // Advances the amplitude array in place from time t by h.
  void advance(std::vector<cplx>& data, double t, double h);
  WaveFunction step(const WaveFunction& psi, double h);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pilotwave
