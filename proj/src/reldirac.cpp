#include "pilotwave/reldirac.hpp"

#include <cmath>

namespace pilotwave {

namespace {

const MatrixSet& dirac() {
  static const MatrixSet m = build_matrix_set(MatrixKind::dirac4);
  return m;
}

std::array<Eigen::Matrix2cd, 3> pauli() {
  std::array<Eigen::Matrix2cd, 3> s;
  s[0] << 0, 1, 1, 0;
  s[1] << 0, -kI, kI, 0;
  s[2] << 1, 0, 0, -1;
  return s;
}

Eigen::Matrix2cd sigma_dot(const Vec3& p) {
  static const auto s = pauli();
  return s[0] * p[0] + s[1] * p[1] + s[2] * p[2];
}

void check_chi(const Spinor& chi, const char* field) {
  if (chi.size() != 2) throw Error(ErrorCategory::shape, field, "two-spinor expected");
  if (!(chi.norm() > 0) || !chi.allFinite())
    throw Error(ErrorCategory::validation, field, "spin part must be nonzero and finite");
}

// A (x) B on the 16-component space.
CMat kron(const CMat& a, const CMat& b) {
  CMat k(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

}  // namespace

double dirac_energy(const Vec3& p, EnergySign sign, double mass) {
  const double e = std::sqrt(p.squaredNorm() + mass * mass);
  return sign == EnergySign::positive ? e : -e;
}

Spinor dirac_spinor(const Vec3& p, EnergySign sign, const Spinor& chi, double mass) {
  check_chi(chi, "chi");
  const double e = std::abs(dirac_energy(p, sign, mass));
  const double f = std::sqrt(e + mass);
  const Eigen::Vector2cd c = chi;
  const Eigen::Vector2cd small = sigma_dot(p) * c / (e + mass);
  Spinor u(4);
  if (sign == EnergySign::positive) {
    u.head<2>() = f * c;
    u.tail<2>() = f * small;
  } else {
    u.head<2>() = -f * small;
    u.tail<2>() = f * c;
  }
  return u;
}

double dirac_equation_residual(const Vec3& p, EnergySign sign, const Spinor& u, double mass) {
  const MatrixSet& m = dirac();
  const double E = dirac_energy(p, sign, mass);
  CMat op = m.gen[0] * E - mass * m.identity();
  for (int i = 0; i < 3; ++i) op -= m.gen[i + 1] * p[i];
  return (op * u).cwiseAbs().maxCoeff();
}

Spinor spin_label(const std::string& label) {
  Spinor c = Spinor::Zero(2);
  if (label == "up")
    c[0] = 1.0;
  else if (label == "down")
    c[1] = 1.0;
  else
    throw Error(ErrorCategory::config, "spin", "expected up or down, got '" + label + "'");
  return c;
}

PlaneWaveSpinorState PlaneWaveSpinorState::one(double mass, std::vector<DiracTerm> terms) {
  if (!(mass > 0)) throw Error(ErrorCategory::validation, "mass", "must be positive");
  if (terms.empty()) throw Error(ErrorCategory::validation, "terms", "at least one term");
  PlaneWaveSpinorState s;
  s.mass_ = mass;
  double amp = 0.0;
  for (const auto& t : terms) {
    Spinor u = dirac_spinor(t.p, t.sign, t.chi, mass);
    if (dirac_equation_residual(t.p, t.sign, u, mass) > 1e-12 * (1 + u.norm() * (t.p.norm() + mass)))
      throw Error(ErrorCategory::numerical, "terms", "spinor misses the free Dirac equation");
    amp += std::abs(t.coef) * u.norm();
    s.u1_.push_back(std::move(u));
    s.e1_.push_back(dirac_energy(t.p, t.sign, mass));
  }
  s.bound_ = amp * amp;
  s.one_ = std::move(terms);
  return s;
}

PlaneWaveSpinorState PlaneWaveSpinorState::two(double mass, std::vector<DiracPairTerm> terms,
                                               bool antisymmetric) {
  if (!(mass > 0)) throw Error(ErrorCategory::validation, "mass", "must be positive");
  if (terms.empty()) throw Error(ErrorCategory::validation, "terms", "at least one term");
  PlaneWaveSpinorState s;
  s.particles_ = 2;
  s.mass_ = mass;
  s.antisym_ = antisymmetric;
  double amp = 0.0;
  for (const auto& t : terms) {
    std::array<Spinor, 2> u{dirac_spinor(t.p[0], t.sign[0], t.chi[0], mass),
                            dirac_spinor(t.p[1], t.sign[1], t.chi[1], mass)};
    amp += std::abs(t.coef) * u[0].norm() * u[1].norm();
    s.u2_.push_back(std::move(u));
    s.e2_.push_back(dirac_energy(t.p[0], t.sign[0], mass) + dirac_energy(t.p[1], t.sign[1], mass));
  }
  if (antisymmetric) amp *= 2.0;
  s.bound_ = amp * amp;
  s.two_ = std::move(terms);
  return s;
}

Spinor PlaneWaveSpinorState::unsym(const Config& x, double t) const {
  Spinor out = Spinor::Zero(16);
  for (std::size_t k = 0; k < two_.size(); ++k) {
    const auto& tm = two_[k];
    const double ph = tm.p[0].dot(x[0]) + tm.p[1].dot(x[1]) - e2_[k] * t;
    const cplx c = tm.coef * std::polar(1.0, ph);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) out[4 * a + b] += c * u2_[k][0][a] * u2_[k][1][b];
  }
  return out;
}

Spinor PlaneWaveSpinorState::evaluate(const Config& x, double t) const {
  if (int(x.size()) != particles_)
    throw Error(ErrorCategory::shape, "x", "one position per particle expected");
  if (particles_ == 1) {
    Spinor out = Spinor::Zero(4);
    for (std::size_t k = 0; k < one_.size(); ++k)
      out += one_[k].coef * std::polar(1.0, one_[k].p.dot(x[0]) - e1_[k] * t) * u1_[k];
    return out;
  }
  Spinor s = unsym(x, t);
  if (!antisym_) return s;
  // A_ab(x1, x2) = S_ab(x1, x2) - S_ba(x2, x1)
  const Spinor r = unsym({x[1], x[0]}, t);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) s[4 * a + b] -= r[4 * b + a];
  return s;
}

DiracVelocity dirac_velocity(const PlaneWaveSpinorState& s, const Vec3& x, double t,
                             double rho_floor_rel) {
  if (s.particles() != 1) throw Error(ErrorCategory::shape, "state", "one-particle state expected");
  const MatrixSet& m = dirac();
  const Spinor psi = s.evaluate({x}, t);
  const double rho = psi.squaredNorm();
  if (!(rho > rho_floor_rel * s.density_bound()))
    throw Error(ErrorCategory::node, "x", "density below the node floor");
  DiracVelocity out;
  out.j[0] = rho;
  for (int i = 0; i < 3; ++i) {
    out.j[i + 1] = psi.dot(m.alpha[i] * psi).real();
    out.v[i] = out.j[i + 1] / rho;
  }
  const double jj = rho * rho - out.j.tail<3>().squaredNorm();
  if (jj < -1e-12 * rho * rho)
    throw Error(ErrorCategory::numerical, "j", "spacelike current");
  if (jj > 0) out.u = out.j / std::sqrt(jj);
  return out;
}

namespace {

struct Pair16 {
  std::array<CMat, 3> alpha1, alpha2;
  std::array<CMat, 4> g0g1, g0g2;  // gamma^0 gamma^mu on one index
};

const Pair16& pair16() {
  static const Pair16 p = [] {
    const MatrixSet& m = dirac();
    const CMat I = m.identity();
    Pair16 q;
    for (int i = 0; i < 3; ++i) {
      q.alpha1[i] = kron(m.alpha[i], I);
      q.alpha2[i] = kron(I, m.alpha[i]);
    }
    for (int mu = 0; mu < 4; ++mu) {
      const CMat g = m.gen[0] * m.gen[mu];
      q.g0g1[mu] = kron(g, I);
      q.g0g2[mu] = kron(I, g);
    }
    return q;
  }();
  return p;
}

}  // namespace

std::array<Vec3, 2> dirac2_velocity(const PlaneWaveSpinorState& s, const Vec3& x1,
                                    const Vec3& x2, double t, double rho_floor_rel) {
  if (s.particles() != 2) throw Error(ErrorCategory::shape, "state", "two-particle state expected");
  const Spinor psi = s.evaluate({x1, x2}, t);
  const double rho = psi.squaredNorm();
  if (!(rho > rho_floor_rel * s.density_bound()))
    throw Error(ErrorCategory::node, "x", "density below the node floor");
  const Pair16& q = pair16();
  std::array<Vec3, 2> v;
  for (int i = 0; i < 3; ++i) {
    v[0][i] = psi.dot(q.alpha1[i] * psi).real() / rho;
    v[1][i] = psi.dot(q.alpha2[i] * psi).real() / rho;
  }
  return v;
}

Eigen::Vector4d dirac2_partial_current(const PlaneWaveSpinorState& s, const Vec3& x1,
                                       const Vec3& x2, double t, int r) {
  if (s.particles() != 2) throw Error(ErrorCategory::shape, "state", "two-particle state expected");
  if (r != 0 && r != 1) throw Error(ErrorCategory::validation, "r", "particle index 0 or 1");
  const Spinor psi = s.evaluate({x1, x2}, t);
  const Pair16& q = pair16();
  Eigen::Vector4d w;
  for (int mu = 0; mu < 4; ++mu)
    w[mu] = psi.dot((r == 0 ? q.g0g1[mu] : q.g0g2[mu]) * psi).real();
  return w;
}

WaveFunction pauli_limit(const PlaneWaveSpinorState& s) {
  if (s.particles() != 1) throw Error(ErrorCategory::shape, "state", "one-particle state expected");
  const double m = s.mass();
  std::vector<Term> terms;
  for (const DiracTerm& t : s.terms()) {
    if (t.sign != EnergySign::positive)
      throw Error(ErrorCategory::unsupported, "terms", "negative-energy terms have no Pauli limit");
    terms.push_back({t.coef * std::sqrt(2 * m), plane_wave(t.p, m, 1.0, 3), t.chi});
  }
  return WaveFunction::parametric(std::move(terms), {m}, 2);
}

}  // namespace pilotwave
