#include "pilotwave/currents.hpp"

#include <cmath>

namespace pilotwave {

Vec3 EmPotential::vector_potential(const Vec3& x, double t) const {
  return V ? V(x, t) : Vec3::Zero();
}

double EmPotential::scalar_potential(const Vec3& x, double t) const {
  return V0 ? V0(x, t) : 0.0;
}

Vec3 EmPotential::B(const Vec3& x, double t) const {
  if (!V) return Vec3::Zero();
  const double h = stencil;
  // dA(a, b) = d V_b / d x_a
  Eigen::Matrix3d dA;
  for (int a = 0; a < 3; ++a) {
    Vec3 xp = x, xm = x;
    xp[a] += h;
    xm[a] -= h;
    dA.row(a) = ((V(xp, t) - V(xm, t)) / (2 * h)).transpose();
  }
  return Vec3(dA(1, 2) - dA(2, 1), dA(2, 0) - dA(0, 2), dA(0, 1) - dA(1, 0));
}

SpinSpec SpinSpec::make(int twice_s, std::optional<double> g, double hbar) {
  if (twice_s < 0 || twice_s > 2)
    throw Error(ErrorCategory::validation, "spin", "supported spins are 0, 1/2 and 1");
  if (!(hbar > 0)) throw Error(ErrorCategory::validation, "hbar", "must be positive");
  SpinSpec sp;
  sp.twice_s = twice_s;
  sp.hbar = hbar;
  sp.g = g ? *g : (twice_s == 0 ? 0.0 : 2.0 / twice_s);
  const int d = twice_s + 1;
  for (auto& m : sp.S) m = CMat::Zero(d, d);
  if (twice_s == 1) {
    sp.S[0] << 0, 1, 1, 0;
    sp.S[1] << 0, -kI, kI, 0;
    sp.S[2] << 1, 0, 0, -1;
    for (auto& m : sp.S) m *= 0.5 * hbar;
  } else if (twice_s == 2) {
    // (S_j)_ik = i hbar eps_ijk on Cartesian vector components.
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
          const int e = (i - j) * (j - k) * (k - i) / 2;  // Levi-Civita
          sp.S[j](i, k) = kI * hbar * double(e);
        }
  }
  return sp;
}

double commutator_defect(const SpinSpec& sp) {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CMat rhs = CMat::Zero(sp.dim(), sp.dim());
      for (int k = 0; k < 3; ++k) {
        const int e = (i - j) * (j - k) * (k - i) / 2;
        rhs += kI * sp.hbar * double(e) * sp.S[k];
      }
      const CMat d = sp.S[i] * sp.S[j] - sp.S[j] * sp.S[i] - rhs;
      worst = std::max(worst, d.cwiseAbs().maxCoeff());
    }
  return worst;
}

CMat embed_spin(const CMat& S, int particle, int particles) {
  const int d = int(S.rows());
  CMat out = CMat::Identity(1, 1);
  for (int k = 0; k < particles; ++k) {
    const CMat f = (k == particle) ? S : CMat::Identity(d, d);
    CMat next(out.rows() * d, out.cols() * d);
    for (int r = 0; r < out.rows(); ++r)
      for (int c = 0; c < out.cols(); ++c) next.block(r * d, c * d, d, d) = out(r, c) * f;
    out = std::move(next);
  }
  return out;
}

CurrentSample current_from(const Spinor& psi, const CMat& grad,
                           const std::vector<double>& masses, const SpinSpec& spin,
                           const EmPotential* em, const Config& at, double t) {
  const int np = int(masses.size());
  const int nc = int(psi.size());
  int expect = 1;
  for (int k = 0; k < np; ++k) expect *= spin.dim();
  if (nc != expect)
    throw Error(ErrorCategory::shape, "spin", "component count does not match 2s+1 per particle");
  if (em && np != 1)
    throw Error(ErrorCategory::unsupported, "em", "external fields supported for one particle");

  CurrentSample out;
  out.rho = psi.squaredNorm();
  out.j.assign(np, Vec3::Zero());
  out.jc.assign(np, Vec3::Zero());
  out.js.assign(np, Vec3::Zero());
  const double hbar = spin.hbar;
  for (int k = 0; k < np; ++k) {
    const double m = masses[k];
    Vec3 jc;
    for (int a = 0; a < 3; ++a) jc[a] = hbar / m * psi.dot(grad.col(3 * k + a)).imag();
    if (em) jc -= em->e / (m * em->c) * em->vector_potential(at[0], t) * out.rho;
    Vec3 js = Vec3::Zero();
    if (spin.twice_s > 0 && spin.g != 0.0) {
      // dM(a, b) = d/dx_a (psi^dagger S_b psi) = 2 Re(psi^dagger S_b d_a psi)
      Eigen::Matrix3d dM;
      for (int b = 0; b < 3; ++b) {
        const CMat Sb = np == 1 ? spin.S[b] : embed_spin(spin.S[b], k, np);
        for (int a = 0; a < 3; ++a) dM(a, b) = 2.0 * psi.dot(Sb * grad.col(3 * k + a)).real();
      }
      const Vec3 curl(dM(1, 2) - dM(2, 1), dM(2, 0) - dM(0, 2), dM(0, 1) - dM(1, 0));
      js = spin.g / (2 * m) * curl;
    }
    out.jc[k] = jc;
    out.js[k] = js;
    out.j[k] = jc + js;
  }
  return out;
}

CurrentSample current(const WaveFunction& psi, const SpinSpec& spin, const EmPotential* em,
                      const Config& at) {
  if (psi.spin_dim() != spin.dim())
    throw Error(ErrorCategory::shape, "spin", "wavefunction spin dimension differs from 2s+1");
  Spinor v;
  CMat g;
  psi.evaluate_grad(at, v, g);
  return current_from(v, g, psi.masses(), spin, em, at, psi.time());
}

CurrentSample spin_eigenstate_current(const WaveFunction& phi, const Spinor& chi,
                                      const SpinSpec& spin, const Config& at) {
  if (phi.components() != 1 || phi.particles() != 1)
    throw Error(ErrorCategory::shape, "phi", "scalar one-particle wavefunction required");
  if (chi.size() != spin.dim())
    throw Error(ErrorCategory::shape, "chi", "spinor length differs from 2s+1");
  if (std::abs(chi.norm() - 1.0) > 1e-12)
    throw Error(ErrorCategory::validation, "chi", "spinor must have unit norm");
  Spinor v;
  CMat g;
  phi.evaluate_grad(at, v, g);
  const double m = phi.masses()[0];
  Vec3 s;
  for (int b = 0; b < 3; ++b) s[b] = chi.dot(spin.S[b] * chi).real();
  Vec3 grad_rho;
  for (int a = 0; a < 3; ++a) grad_rho[a] = 2.0 * (std::conj(v[0]) * g(0, a)).real();
  CurrentSample out;
  out.rho = std::norm(v[0]);
  Vec3 jc;
  for (int a = 0; a < 3; ++a) jc[a] = spin.hbar / m * (std::conj(v[0]) * g(0, a)).imag();
  const Vec3 js = spin.g / (2 * m) * grad_rho.cross(s);
  out.jc = {jc};
  out.js = {js};
  out.j = {jc + js};
  return out;
}

NodeCurrents node_currents(const WaveFunction& psi, const SpinSpec& spin,
                           const EmPotential* em) {
  const Grid& g = psi.grid();
  if (psi.spin_dim() != spin.dim())
    throw Error(ErrorCategory::shape, "spin", "wavefunction spin dimension differs from 2s+1");
  const std::size_t n = g.size();
  const int nc = psi.components(), np = psi.particles(), D = g.axes();
  std::vector<const std::vector<cplx>*> d(D);
  for (int a = 0; a < D; ++a) d[a] = &psi.node_derivative(a);
  NodeCurrents out;
  out.grid = g;
  out.t = psi.time();
  out.rho.assign(n, 0.0);
  out.j.assign(3 * np, std::vector<double>(n, 0.0));
  const auto& data = psi.data();
  parallel_for(n, [&](std::size_t i) {
    Spinor v(nc);
    CMat gr = CMat::Zero(nc, 3 * np);
    for (int c = 0; c < nc; ++c) v[c] = data[c * n + i];
    for (int a = 0; a < D; ++a)
      for (int c = 0; c < nc; ++c) gr(c, 3 * (a / g.dims) + a % g.dims) = (*d[a])[c * n + i];
    const Config x = (em ? g.node(i) : Config(np, Vec3::Zero()));
    const CurrentSample s = current_from(v, gr, psi.masses(), spin, em, x, psi.time());
    out.rho[i] = s.rho;
    for (int k = 0; k < np; ++k)
      for (int a = 0; a < 3; ++a) out.j[3 * k + a][i] = s.j[k][a];
  });
  for (double r : out.rho) out.rho_max = std::max(out.rho_max, r);
  return out;
}

std::vector<double> node_divergence(const Grid& g,
                                    const std::vector<std::vector<double>>& field) {
  const std::size_t n = g.size();
  std::vector<double> div(n, 0.0);
  std::vector<cplx> f(n), df(n);
  for (int a = 0; a < g.axes(); ++a) {
    const auto& comp = field[3 * (a / g.dims) + a % g.dims];
    for (std::size_t i = 0; i < n; ++i) f[i] = comp[i];
    const std::size_t st = g.stride(a);
    const int len = g.points[a];
    const std::size_t lines = n / len;
    for (std::size_t l = 0; l < lines; ++l) {
      const std::size_t start = (l / st) * st * len + l % st;
      grid_line_derivative(f.data() + start, st, len, g.spacing(a), df.data() + start, st);
    }
    for (std::size_t i = 0; i < n; ++i) div[i] += df[i].real();
  }
  return div;
}

ContinuityReport continuity_residual(const WaveFunction& a, const WaveFunction& b,
                                     const SpinSpec& spin, const EmPotential* em) {
  if (!a.is_grid() || !b.is_grid() || !a.grid().same_as(b.grid()))
    throw Error(ErrorCategory::shape, "snapshots", "both snapshots must share one grid");
  if (a.spin_dim() != b.spin_dim())
    throw Error(ErrorCategory::shape, "snapshots", "spin dimensions differ");
  const double dt = b.time() - a.time();
  if (!(dt > 0)) throw Error(ErrorCategory::validation, "dt", "second snapshot must be later");
  const NodeCurrents ca = node_currents(a, spin, em), cb = node_currents(b, spin, em);
  const std::vector<double> da = node_divergence(a.grid(), ca.j);
  const std::vector<double> db = node_divergence(b.grid(), cb.j);
  ContinuityReport r;
  const std::size_t n = a.grid().size();
  r.residual.resize(n);
  double sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = (cb.rho[i] - ca.rho[i]) / dt + 0.5 * (da[i] + db[i]);
    r.residual[i] = v;
    r.max_norm = std::max(r.max_norm, std::abs(v));
    sum2 += v * v;
  }
  r.l2_norm = std::sqrt(sum2 * a.grid().cell_volume());
  return r;
}

}  // namespace pilotwave
