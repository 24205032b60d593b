#pragma once

#include "pilotwave/wavefunction.hpp"

#include <optional>

namespace pilotwave {

// External electromagnetic potentials for a single charged particle.
struct EmPotential {
  std::function<double(const Vec3&, double)> V0;  // scalar potential
  std::function<Vec3(const Vec3&, double)> V;     // vector potential
  double e = 1.0;
  double c = 1.0;
  double stencil = 1e-5;  // central-difference spacing for B

  Vec3 vector_potential(const Vec3& x, double t) const;
  double scalar_potential(const Vec3& x, double t) const;
  // B = curl V by central differences.
  Vec3 B(const Vec3& x, double t) const;
};

// Spin s = twice_s / 2 with its rotation generators and gyromagnetic factor.
struct SpinSpec {
  int twice_s = 0;
  double g = 0.0;
  double hbar = 1.0;
  std::array<CMat, 3> S;

  // g defaults to 0 for spin 0 and 1/s otherwise.
  static SpinSpec make(int twice_s, std::optional<double> g = std::nullopt,
                       double hbar = 1.0);
  int dim() const { return twice_s + 1; }
  double s() const { return 0.5 * twice_s; }
};

// Largest entrywise deviation of [S_i, S_j] = i hbar eps_ijk S_k.
double commutator_defect(const SpinSpec& spin);

struct CurrentSample {
  double rho = 0.0;
  std::vector<Vec3> j, jc, js;  // one per particle
};

// rho = psi^dagger psi, convective current (hbar/m) Im(psi^dagger D psi) and
// spin current (g/2m) curl(psi^dagger S psi), per particle, at psi.time().
CurrentSample current(const WaveFunction& psi, const SpinSpec& spin,
                      const EmPotential* em, const Config& at);

// Same quantities from an already evaluated amplitude and gradient.
CurrentSample current_from(const Spinor& psi, const CMat& grad,
                           const std::vector<double>& masses, const SpinSpec& spin,
                           const EmPotential* em, const Config& at, double t);

// Current of phi * chi from the scalar part alone, using the constant spin
// vector s = chi^dagger S chi.
CurrentSample spin_eigenstate_current(const WaveFunction& phi, const Spinor& chi,
                                      const SpinSpec& spin, const Config& at);

// rho and j on every node of a grid state. j[3k + a] is component a of
// particle k.
struct NodeCurrents {
  Grid grid;
  double t = 0.0;
  std::vector<double> rho;
  std::vector<std::vector<double>> j;
  double rho_max = 0.0;
};

NodeCurrents node_currents(const WaveFunction& psi, const SpinSpec& spin,
                           const EmPotential* em);

struct ContinuityReport {
  std::vector<double> residual;  // per node
  double max_norm = 0.0;
  double l2_norm = 0.0;
};

// Forward difference of rho between the two snapshots plus the divergence of
// j averaged over both snapshots.
ContinuityReport continuity_residual(const WaveFunction& a, const WaveFunction& b,
                                     const SpinSpec& spin, const EmPotential* em);

// Divergence of a node vector field (layout of NodeCurrents::j) using the
// grid derivative stencil.
std::vector<double> node_divergence(const Grid& g,
                                    const std::vector<std::vector<double>>& field);

// Generator S of one particle acting on the flattened multi-particle spin
// index of `particles` particles.
CMat embed_spin(const CMat& S, int particle, int particles);

}  // namespace pilotwave
