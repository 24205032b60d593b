#pragma once

#include "pilotwave/guide.hpp"

namespace pilotwave {

// E(k) = hbar^2 k^2 / 2m or E(k) = hbar |k| (c = 1).
enum class Dispersion { nonrelativistic, massless };
Dispersion parse_dispersion(const std::string& s);
const char* to_string(Dispersion d);

inline constexpr int kFockMax = 32;

struct ModeSpec {
  double k = 1.0;
  std::vector<cplx> fock;  // c_n, n = 0..kFockMax at most
  double q = 0.0;          // beable value
};

// Fock amplitudes of the coherent state |z>; throws if the weight above
// kFockMax is 1e-12 or more.
std::vector<cplx> coherent_fock(cplx z);

// Product of independent oscillator modes. Mode l has
// i hbar d psi/dt = (E/2)(-d^2/dq^2 + q^2) psi with the zero-point term
// dropped, so c_n(t) = c_n e^{-i n E t / hbar}.
class ModeState {
 public:
  static ModeState make(std::vector<ModeSpec> modes, Dispersion d, double mass = 1.0,
                        double hbar = 1.0);

  std::size_t size() const { return modes_.size(); }
  double t() const { return t_; }
  double hbar() const { return hbar_; }
  double energy(std::size_t l) const { return energy_[l]; }
  double beable(std::size_t l) const { return modes_[l].q; }
  const ModeSpec& mode(std::size_t l) const { return modes_[l]; }

  cplx psi(std::size_t l, double q, double t) const;
  cplx psi(std::size_t l, double q, double t, cplx& dpsi) const;
  // <H_l> without the zero-point term.
  double energy_expectation(std::size_t l, double t) const;
  // (E/hbar) Im(psi* dpsi/dq) / |psi|^2 at (q, t); node error below
  // kRhoFloorRel times the density peak bound.
  double velocity(std::size_t l, double q, double t) const;

  void set_beable(std::size_t l, double q) { modes_[l].q = q; }
  void set_time(double t) { t_ = t; }

 private:
  std::vector<ModeSpec> modes_;
  std::vector<double> energy_;
  std::vector<double> bound_;
  double hbar_ = 1.0;
  double t_ = 0.0;
};

// Velocity of mode l's beable at the state's own time.
double mode_velocity(const ModeState& s, std::size_t l);

struct ModeTrajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> q;  // [step][mode]
};

// steps RK4 steps of size dt for every beable; the returned state carries
// the final beables and time.
ModeTrajectory evolve_modes(ModeState& s, double dt, int steps);

// Equilibrium draws of mode l's beable at time t (inverse CDF of |psi|^2).
std::vector<double> sample_mode(const ModeState& s, std::size_t l, std::size_t n, double t,
                                std::uint64_t seed);
// Moves samples of mode l from t0 to t1 with RK4 steps no larger than dt.
std::vector<double> advance_mode_samples(const ModeState& s, std::size_t l,
                                         std::vector<double> q, double t0, double t1, double dt);
// KS test of an equilibrium ensemble of mode l at each check time.
EquivarianceReport mode_equivariance(const ModeState& s, std::size_t l, std::size_t n,
                                     const std::vector<double>& t_checks, std::uint64_t seed,
                                     double dt = 1e-3);

}  // namespace pilotwave
