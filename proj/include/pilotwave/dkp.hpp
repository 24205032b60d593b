#pragma once

#include "pilotwave/matrices.hpp"
#include "pilotwave/wavefunction.hpp"

#include <optional>

namespace pilotwave {

enum class DkpRep { spin0, spin1 };
DkpRep parse_dkp_rep(const std::string& s);
const char* to_string(DkpRep r);

// One plane wave e^{i(p.x - E t)}. Spin-1 terms carry the spatial
// polarization A; A_0 follows from the Lorenz condition. E is optional and,
// when given, must be on shell.
struct DkpPlaneWave {
  cplx coef{1.0, 0.0};
  Vec3 p = Vec3::Zero();
  CVec3 polarization = CVec3::Zero();
  std::optional<double> E;
};

struct DkpTerm {
  cplx coef;
  Vec3 p;
  double E;
  Spinor u;  // component vector of the unit-amplitude plane wave
};

// Superposition of DKP (massive) or Harish-Chandra (massless) plane waves.
// For massless states `mass` is only the normalization constant.
class DkpState {
 public:
  DkpRep rep() const { return rep_; }
  bool massless() const { return massless_; }
  double mass() const { return mass_; }
  int dim() const { return rep_ == DkpRep::spin0 ? 5 : 10; }
  const MatrixSet& matrices() const;
  const std::vector<DkpTerm>& terms() const { return terms_; }
  Spinor evaluate(const Vec3& x, double t) const;
  double density_bound() const { return bound_; }

 private:
  friend DkpState build_dkp_state(DkpRep, double, bool, const std::vector<DkpPlaneWave>&);
  DkpRep rep_ = DkpRep::spin0;
  bool massless_ = false;
  double mass_ = 1.0;
  std::vector<DkpTerm> terms_;
  double bound_ = 0.0;
};

// Assembles the reduced component vectors
//   spin 0: (-iE, ip, m) / sqrt(m)
//   spin 1: (-E_f, B_f, mA, -mA_0) / sqrt(m), E_f = -ip A_0 + iE A, B_f = ip x A
// and checks the constraint on every term.
DkpState build_dkp_state(DkpRep rep, double mass, bool massless,
                         const std::vector<DkpPlaneWave>& waves);

// H(p) = beta_tilde.p + m beta_0.
CMat dkp_hamiltonian(const MatrixSet& m, const Vec3& p, double mass);
// C(p) = 1 - H(p) beta_0 / m.
CMat dkp_constraint(const MatrixSet& m, const Vec3& p, double mass);
// Massive: |C u|. Massless: the constraint (beta.p) beta_0^2 u + m (1 - beta_0^2) gamma u
// together with E gamma u = beta_tilde.p gamma u.
double constraint_residual(const MatrixSet& m, const DkpTerm& term, double mass, bool massless);

struct ObserverVector {
  Eigen::Vector4d n{1, 0, 0, 0};
  enum class Source { explicit_, total_momentum } source = Source::explicit_;
  // Throws unless n^0 > 0 and n.n >= 0.
  static ObserverVector make(const Eigen::Vector4d& n, Source source = Source::explicit_);
};

// Theta^{mu nu} at (x, t).
Eigen::Matrix4d energy_momentum_tensor(const DkpState& s, const Vec3& x, double t);

struct EnergyFlow {
  Eigen::Vector4d j = Eigen::Vector4d::Zero();
  Vec3 v = Vec3::Zero();
};

// j^mu = Theta^{mu nu} n_nu and the energy-flow velocity j^i / j^0.
EnergyFlow energy_momentum_current(const DkpState& s, const ObserverVector& n, const Vec3& x,
                                   double t, double floor_rel = 1e-12);

// s^mu = e psibar beta^mu psi; not positive definite.
Eigen::Vector4d charge_current(const DkpState& s, const Vec3& x, double t, double e = 1.0);

struct TotalMomentum {
  Eigen::Vector4d P = Eigen::Vector4d::Zero();
  std::optional<ObserverVector> observer;  // P / sqrt(P.P) when timelike
};

// Integral of Theta^{mu 0} over a box by the periodic rectangle rule
// (exact for plane waves periodic on the box).
TotalMomentum total_energy_momentum(const DkpState& s, const Vec3& lo, const Vec3& hi,
                                    int points_per_axis, double t = 0.0);

struct NonrelPoint {
  double eps = 0.0;
  double deviation = 0.0;  // max |v_dkp - v_nr| / max |v_nr|
};

// Self-similar family: momenta eps m d_k with fixed positive weights,
// evaluated at points x_j / eps, so only the order in eps changes. The
// non-relativistic velocity comes from the current module on
// sum w_k e^{i p_k.x} (spin 0) or sum w_k A_k e^{i p_k.x} (spin 1, g = 1).
std::vector<NonrelPoint> nonrel_limit_check(DkpRep rep, const std::vector<double>& eps,
                                            std::uint64_t seed = 7, int terms = 5,
                                            int points = 40, double mass = 1.0);

// Two-particle amplitude sum_k c_k psi_a(x1) (x) psi_b(x2), optionally
// symmetrized under exchange of the two particles.
struct DkpPairState {
  struct Product {
    cplx coef{1.0, 0.0};
    DkpState a, b;
  };
  std::vector<Product> terms;
  bool symmetrized = false;

  Spinor evaluate(const Vec3& x1, const Vec3& x2, double t) const;
};

struct DkpPairFlow {
  std::array<Vec3, 2> v;
  std::array<Eigen::Vector4d, 2> partial;  // j^{mu 0} and j^{0 mu}
  double j00 = 0.0;
};

// Tensor current j^{mu1 mu2} = psi^dagger Gamma_1^{mu1 nu1} Gamma_2^{mu2 nu2} psi a_nu1 a_nu2
// and v_r^i = j^{..i_r..} / j^{00}.
DkpPairFlow dkp2_velocity(const DkpPairState& s, const ObserverVector& a, const Vec3& x1,
                          const Vec3& x2, double t, double floor_rel = 1e-12);

}  // namespace pilotwave
