#include "pilotwave/dkp.hpp"

#include "pilotwave/currents.hpp"

#include <cmath>

namespace pilotwave {

DkpRep parse_dkp_rep(const std::string& s) {
  if (s == "spin0") return DkpRep::spin0;
  if (s == "spin1") return DkpRep::spin1;
  throw Error(ErrorCategory::config, "rep", "expected spin0 or spin1, got '" + s + "'");
}

const char* to_string(DkpRep r) { return r == DkpRep::spin0 ? "spin0" : "spin1"; }

namespace {

const MatrixSet& set_for(DkpRep rep) {
  static const MatrixSet m5 = build_matrix_set(MatrixKind::dkp5);
  static const MatrixSet m10 = build_matrix_set(MatrixKind::dkp10);
  return rep == DkpRep::spin0 ? m5 : m10;
}

// eta0 (beta^mu beta^nu + beta^nu beta^mu - g^{mu nu}) for all mu, nu,
// with gamma on both sides for massless states.
struct ThetaOps {
  std::array<std::array<CMat, 4>, 4> op;
};

const ThetaOps& theta_ops(DkpRep rep, bool massless) {
  auto build = [](DkpRep r, bool ml) {
    const MatrixSet& m = set_for(r);
    ThetaOps t;
    const CMat id = m.identity();
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = 0; nu < 4; ++nu) {
        CMat o = m.eta0 * (m.gen[mu] * m.gen[nu] + m.gen[nu] * m.gen[mu] - metric(mu, nu) * id);
        if (ml) o = m.gamma_proj * o * m.gamma_proj;
        t.op[mu][nu] = o;
      }
    return t;
  };
  static const ThetaOps t00 = build(DkpRep::spin0, false), t01 = build(DkpRep::spin0, true),
                        t10 = build(DkpRep::spin1, false), t11 = build(DkpRep::spin1, true);
  if (rep == DkpRep::spin0) return massless ? t01 : t00;
  return massless ? t11 : t10;
}

// Gamma^{mu nu} a_nu, without the mass factor.
CMat contracted(const ThetaOps& t, int mu, const Eigen::Vector4d& a) {
  CMat o = t.op[mu][0] * a[0];
  for (int nu = 1; nu < 4; ++nu) o -= t.op[mu][nu] * a[nu];  // a_nu = g_nu nu a^nu
  return o;
}

CMat kron(const CMat& a, const CMat& b) {
  CMat k(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

// Plain complex cross product (Eigen's cross conjugates complex operands).
CVec3 cross(const CVec3& a, const CVec3& b) {
  return CVec3(a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]);
}

std::string term_field(std::size_t i, const char* leaf) {
  return "terms[" + std::to_string(i) + "]." + leaf;
}

}  // namespace

const MatrixSet& DkpState::matrices() const { return set_for(rep_); }

CMat dkp_hamiltonian(const MatrixSet& m, const Vec3& p, double mass) {
  CMat h = mass * m.gen[0];
  for (int i = 0; i < 3; ++i) h += m.beta_tilde[i] * p[i];
  return h;
}

CMat dkp_constraint(const MatrixSet& m, const Vec3& p, double mass) {
  return m.identity() - dkp_hamiltonian(m, p, mass) * m.gen[0] / mass;
}

double constraint_residual(const MatrixSet& m, const DkpTerm& term, double mass, bool massless) {
  if (!massless) return (dkp_constraint(m, term.p, mass) * term.u).cwiseAbs().maxCoeff();
  const CMat b02 = m.gen[0] * m.gen[0];
  CMat bp = CMat::Zero(m.dim, m.dim);
  CMat bt = CMat::Zero(m.dim, m.dim);
  for (int i = 0; i < 3; ++i) {
    bp += m.gen[i + 1] * term.p[i];
    bt += m.beta_tilde[i] * term.p[i];
  }
  const Spinor gu = m.gamma_proj * term.u;
  const double c = (bp * b02 * term.u + mass * (m.identity() - b02) * gu).cwiseAbs().maxCoeff();
  const double h = (term.E * gu - bt * gu).cwiseAbs().maxCoeff();
  return std::max(c, h);
}

ObserverVector ObserverVector::make(const Eigen::Vector4d& n, Source source) {
  if (!n.allFinite() || !(n[0] > 0))
    throw Error(ErrorCategory::validation, "n", "observer vector needs n^0 > 0");
  const double nn = n[0] * n[0] - n.tail<3>().squaredNorm();
  if (nn < -1e-12 * n[0] * n[0])
    throw Error(ErrorCategory::validation, "n", "observer vector must be future-causal");
  ObserverVector o;
  o.n = n;
  o.source = source;
  return o;
}

DkpState build_dkp_state(DkpRep rep, double mass, bool massless,
                         const std::vector<DkpPlaneWave>& waves) {
  if (!(mass > 0) || !std::isfinite(mass))
    throw Error(ErrorCategory::validation, "mass", "must be positive (normalization constant when massless)");
  if (waves.empty()) throw Error(ErrorCategory::validation, "terms", "at least one term");
  DkpState s;
  s.rep_ = rep;
  s.massless_ = massless;
  s.mass_ = mass;
  const MatrixSet& m = set_for(rep);
  const double sm = std::sqrt(mass);
  double amp = 0.0;
  for (std::size_t i = 0; i < waves.size(); ++i) {
    const DkpPlaneWave& w = waves[i];
    if (!w.p.allFinite()) throw Error(ErrorCategory::validation, term_field(i, "p"), "not finite");
    const double E = massless ? w.p.norm() : std::sqrt(w.p.squaredNorm() + mass * mass);
    if (w.E && std::abs(*w.E - E) > 1e-9 * std::max(1.0, E))
      throw Error(ErrorCategory::physics, term_field(i, "E"),
                  "off shell: E = " + std::to_string(*w.E) + ", expected " + std::to_string(E));
    if (massless && !(E > 0))
      throw Error(ErrorCategory::physics, term_field(i, "p"), "massless waves need p != 0");
    Spinor u(m.dim);
    if (rep == DkpRep::spin0) {
      u << -kI * E, kI * w.p[0], kI * w.p[1], kI * w.p[2], mass;
    } else {
      const CVec3 A = w.polarization;
      if (!(A.norm() > 0)) throw Error(ErrorCategory::validation, term_field(i, "polarization"), "must be nonzero");
      const cplx A0 = w.p.cast<cplx>().dot(A) / E;
      const CVec3 pc = w.p.cast<cplx>();
      const CVec3 Ef = -kI * pc * A0 + kI * E * A;
      const CVec3 Bf = kI * cross(pc, A);
      u << -Ef, Bf, mass * A, -mass * A0;
    }
    u /= sm;
    DkpTerm t{w.coef, w.p, E, u};
    const double scale = u.norm() * (1.0 + w.p.norm() / mass + E / mass);
    if (constraint_residual(m, t, mass, massless) > 1e-10 * std::max(1.0, scale))
      throw Error(ErrorCategory::numerical, term_field(i, "u"), "constraint residual above 1e-10");
    amp += std::abs(w.coef) * u.norm();
    s.terms_.push_back(std::move(t));
  }
  s.bound_ = amp * amp;
  return s;
}

Spinor DkpState::evaluate(const Vec3& x, double t) const {
  Spinor out = Spinor::Zero(dim());
  for (const auto& k : terms_) out += k.coef * std::polar(1.0, k.p.dot(x) - k.E * t) * k.u;
  return out;
}

Eigen::Matrix4d energy_momentum_tensor(const DkpState& s, const Vec3& x, double t) {
  const ThetaOps& ops = theta_ops(s.rep(), s.massless());
  const Spinor psi = s.evaluate(x, t);
  Eigen::Matrix4d th;
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = mu; nu < 4; ++nu)
      th(mu, nu) = th(nu, mu) = s.mass() * psi.dot(ops.op[mu][nu] * psi).real();
  return th;
}

EnergyFlow energy_momentum_current(const DkpState& s, const ObserverVector& n, const Vec3& x,
                                   double t, double floor_rel) {
  const Eigen::Matrix4d th = energy_momentum_tensor(s, x, t);
  const Eigen::Vector4d nl(n.n[0], -n.n[1], -n.n[2], -n.n[3]);
  EnergyFlow f;
  f.j = th * nl;
  const double floor = floor_rel * s.mass() * s.density_bound() * n.n[0];
  if (f.j[0] < -floor)
    throw Error(ErrorCategory::numerical, "j0", "negative energy density");
  if (!(f.j[0] > floor)) throw Error(ErrorCategory::node, "x", "energy density below the floor");
  f.v = f.j.tail<3>() / f.j[0];
  return f;
}

Eigen::Vector4d charge_current(const DkpState& s, const Vec3& x, double t, double e) {
  const MatrixSet& m = s.matrices();
  const Spinor psi = s.evaluate(x, t);
  Eigen::Vector4d out;
  for (int mu = 0; mu < 4; ++mu) out[mu] = e * psi.dot(m.eta0 * m.gen[mu] * psi).real();
  return out;
}

TotalMomentum total_energy_momentum(const DkpState& s, const Vec3& lo, const Vec3& hi,
                                    int points, double t) {
  if (points < 1) throw Error(ErrorCategory::validation, "points", "must be >= 1");
  for (int a = 0; a < 3; ++a)
    if (!(hi[a] > lo[a])) throw Error(ErrorCategory::validation, "box", "max must exceed min");
  const Vec3 h = (hi - lo) / double(points);
  const std::size_t n = std::size_t(points) * points * points;
  std::vector<Eigen::Vector4d> part(n);
  parallel_for(n, [&](std::size_t i) {
    const Vec3 x = lo + Vec3(double(i / (points * points)), double((i / points) % points),
                             double(i % points)).cwiseProduct(h);
    part[i] = energy_momentum_tensor(s, x, t).col(0);
  });
  TotalMomentum out;
  for (const auto& p : part) out.P += p;
  out.P *= h.prod();
  const double PP = out.P[0] * out.P[0] - out.P.tail<3>().squaredNorm();
  const double tol = 1e-10 * out.P[0] * out.P[0];
  if (!(out.P[0] > 0) || PP <= tol)
    throw Error(ErrorCategory::physics, "P", "total energy-momentum is not timelike");
  out.observer = ObserverVector::make(out.P / std::sqrt(PP), ObserverVector::Source::total_momentum);
  return out;
}

std::vector<NonrelPoint> nonrel_limit_check(DkpRep rep, const std::vector<double>& eps,
                                            std::uint64_t seed, int terms, int points,
                                            double mass) {
  if (terms < 1 || points < 1) throw Error(ErrorCategory::validation, "terms", "must be >= 1");
  CounterRng rng(seed, 0);
  std::vector<Vec3> dir(terms);
  std::vector<double> w(terms);
  std::vector<CVec3> pol(terms);
  for (int k = 0; k < terms; ++k) {
    dir[k] = Vec3(1 + 0.3 * rng.normal(), 0.3 * rng.normal(), 0.3 * rng.normal());
    w[k] = std::exp(-(dir[k] - Vec3::UnitX()).squaredNorm() / 0.18);
    for (int a = 0; a < 3; ++a) pol[k][a] = cplx(rng.normal(), rng.normal());
  }
  std::vector<Vec3> x0(points);
  for (auto& x : x0) x = Vec3(rng.uniform() - 0.5, rng.uniform() - 0.5, rng.uniform() - 0.5);

  const SpinSpec spin = SpinSpec::make(rep == DkpRep::spin0 ? 0 : 2);
  const ObserverVector n0 = ObserverVector::make({1, 0, 0, 0});
  std::vector<NonrelPoint> out;
  for (double e : eps) {
    if (!(e >= 0)) throw Error(ErrorCategory::validation, "eps", "must be >= 0");
    std::vector<DkpPlaneWave> waves;
    std::vector<Term> nr;
    for (int k = 0; k < terms; ++k) {
      const Vec3 p = e * mass * dir[k];
      waves.push_back({w[k], p, pol[k], std::nullopt});
      Spinor chi = rep == DkpRep::spin0 ? Spinor::Ones(1) : Spinor(pol[k]);
      nr.push_back({w[k], plane_wave(p, mass, 1.0, 3), chi});
    }
    const DkpState st = build_dkp_state(rep, mass, false, waves);
    const WaveFunction psi = WaveFunction::parametric(nr, {mass}, spin.dim());
    double dev = 0.0, ref = 0.0;
    for (const Vec3& x : x0) {
      const Vec3 xs = e > 0 ? Vec3(x / e) : x;
      const Vec3 v = energy_momentum_current(st, n0, xs, 0.0).v;
      const CurrentSample c = current(psi, spin, nullptr, {xs});
      const Vec3 vnr = c.j[0] / c.rho;
      dev = std::max(dev, (v - vnr).cwiseAbs().maxCoeff());
      ref = std::max(ref, vnr.cwiseAbs().maxCoeff());
    }
    out.push_back({e, ref > 0 ? dev / ref : dev});
  }
  return out;
}

Spinor DkpPairState::evaluate(const Vec3& x1, const Vec3& x2, double t) const {
  if (terms.empty()) throw Error(ErrorCategory::validation, "terms", "at least one product");
  const int d = terms.front().a.dim();
  Spinor out = Spinor::Zero(d * d);
  for (const auto& pr : terms) {
    if (pr.a.dim() != d || pr.b.dim() != d)
      throw Error(ErrorCategory::shape, "terms", "mixed representations");
    const Spinor a1 = pr.a.evaluate(x1, t), b2 = pr.b.evaluate(x2, t);
    for (int r = 0; r < d; ++r) out.segment(r * d, d) += pr.coef * a1[r] * b2;
    if (symmetrized) {
      const Spinor b1 = pr.b.evaluate(x1, t), a2 = pr.a.evaluate(x2, t);
      for (int r = 0; r < d; ++r) out.segment(r * d, d) += pr.coef * b1[r] * a2;
    }
  }
  return out;
}

DkpPairFlow dkp2_velocity(const DkpPairState& s, const ObserverVector& a, const Vec3& x1,
                          const Vec3& x2, double t, double floor_rel) {
  const DkpState& ref = s.terms.front().a;
  const ThetaOps& ops = theta_ops(ref.rep(), ref.massless());
  const double m1 = ref.mass(), m2 = s.terms.front().b.mass();
  std::array<CMat, 4> K;
  for (int mu = 0; mu < 4; ++mu) K[mu] = contracted(ops, mu, a.n);
  const Spinor psi = s.evaluate(x1, x2, t);
  DkpPairFlow f;
  double bound = 0.0;
  for (const auto& pr : s.terms)
    bound += std::abs(pr.coef) * std::sqrt(pr.a.density_bound() * pr.b.density_bound());
  if (s.symmetrized) bound *= 2.0;
  for (int mu = 0; mu < 4; ++mu) {
    f.partial[0][mu] = m1 * m2 * psi.dot(kron(K[mu], K[0]) * psi).real();
    f.partial[1][mu] = m1 * m2 * psi.dot(kron(K[0], K[mu]) * psi).real();
  }
  f.j00 = f.partial[0][0];
  const double floor = floor_rel * m1 * m2 * bound * bound * a.n[0] * a.n[0];
  if (f.j00 < -floor) throw Error(ErrorCategory::numerical, "j00", "negative density");
  if (!(f.j00 > floor)) throw Error(ErrorCategory::node, "x", "density below the floor");
  for (int r = 0; r < 2; ++r) f.v[r] = f.partial[r].tail<3>() / f.j00;
  return f;
}

}  // namespace pilotwave
