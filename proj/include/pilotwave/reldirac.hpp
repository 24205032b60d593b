#pragma once

#include "pilotwave/matrices.hpp"
#include "pilotwave/wavefunction.hpp"

#include <optional>

namespace pilotwave {

enum class EnergySign { positive, negative };

// Free Dirac spinor for momentum p, energy sign and two-spinor chi,
// normalized so u^dagger u = 2|E| |chi|^2 (Dirac-Pauli representation).
Spinor dirac_spinor(const Vec3& p, EnergySign sign, const Spinor& chi, double mass);
double dirac_energy(const Vec3& p, EnergySign sign, double mass);
// Largest component of (gamma^0 E - gamma.p - m) u.
double dirac_equation_residual(const Vec3& p, EnergySign sign, const Spinor& u, double mass);

// Two-spinor for a spin label along z ("up" / "down").
Spinor spin_label(const std::string& label);

struct DiracTerm {
  cplx coef{1.0, 0.0};
  Vec3 p = Vec3::Zero();
  EnergySign sign = EnergySign::positive;
  Spinor chi;  // two-spinor
};

struct DiracPairTerm {
  cplx coef{1.0, 0.0};
  std::array<Vec3, 2> p{Vec3::Zero(), Vec3::Zero()};
  std::array<EnergySign, 2> sign{EnergySign::positive, EnergySign::positive};
  std::array<Spinor, 2> chi;
};

// Finite superposition of free plane-wave spinors; every term evolves exactly
// by e^{i(p.x - E t)}. Two-particle amplitudes have 16 components, index
// 4a + b for spinor indices a (particle 1) and b (particle 2).
class PlaneWaveSpinorState {
 public:
  static PlaneWaveSpinorState one(double mass, std::vector<DiracTerm> terms);
  static PlaneWaveSpinorState two(double mass, std::vector<DiracPairTerm> terms,
                                  bool antisymmetric);

  int particles() const { return particles_; }
  double mass() const { return mass_; }
  bool antisymmetric() const { return antisym_; }
  std::size_t size() const { return particles_ == 1 ? one_.size() : two_.size(); }
  const std::vector<DiracTerm>& terms() const { return one_; }
  const std::vector<DiracPairTerm>& pair_terms() const { return two_; }

  // 4 or 16 components at configuration x.
  Spinor evaluate(const Config& x, double t) const;
  // Upper bound on psi^dagger psi, used to scale the node floor.
  double density_bound() const { return bound_; }

 private:
  int particles_ = 1;
  double mass_ = 1.0;
  bool antisym_ = false;
  std::vector<DiracTerm> one_;
  std::vector<DiracPairTerm> two_;
  std::vector<Spinor> u1_;
  std::vector<std::array<Spinor, 2>> u2_;
  std::vector<double> e1_, e2_;
  double bound_ = 0.0;
  Spinor unsym(const Config& x, double t) const;
};

struct DiracVelocity {
  Vec3 v = Vec3::Zero();
  std::optional<Eigen::Vector4d> u;  // j^mu / sqrt(j.j) when j is timelike
  Eigen::Vector4d j = Eigen::Vector4d::Zero();
};

// v^i = psi^dagger alpha^i psi / psi^dagger psi. Node error below
// rho_floor_rel * density_bound; numerical error for spacelike j.
DiracVelocity dirac_velocity(const PlaneWaveSpinorState& s, const Vec3& x, double t,
                             double rho_floor_rel = 1e-12);

// Per-particle velocities with alpha acting on the r-th spinor index.
std::array<Vec3, 2> dirac2_velocity(const PlaneWaveSpinorState& s, const Vec3& x1,
                                    const Vec3& x2, double t, double rho_floor_rel = 1e-12);

// Vector w^mu = j^{mu 0} (r = 0) or j^{0 mu} (r = 1) of the two-particle
// tensor current psibar gamma^mu (x) gamma^nu psi.
Eigen::Vector4d dirac2_partial_current(const PlaneWaveSpinorState& s, const Vec3& x1,
                                       const Vec3& x2, double t, int r);

// Leading-order spin-1/2 wave with g = 2 built from the positive-energy
// terms: sum c sqrt(2m) chi e^{i p.x}. Negative-energy terms are rejected.
WaveFunction pauli_limit(const PlaneWaveSpinorState& s);

}  // namespace pilotwave
