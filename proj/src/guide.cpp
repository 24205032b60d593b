#include "pilotwave/guide.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pilotwave {

const char* to_string(TrajStatus s) {
  switch (s) {
    case TrajStatus::ok: return "ok";
    case TrajStatus::node_encounter: return "node_encounter";
    case TrajStatus::exited: return "exited";
  }
  return "?";
}

// ---------------------------------------------------------------- velocity

WaveVelocity::WaveVelocity(WaveFunction psi, SpinSpec spin, const EmPotential* em,
                           double rho_ref, double velocity_scale)
    : psi_(std::move(psi)), spin_(std::move(spin)), em_(em),
      floor_(rho_ref > 0 ? kRhoFloorRel * rho_ref : 1e-300), scale_(velocity_scale) {
  if (psi_.spin_dim() != spin_.dim())
    throw Error(ErrorCategory::shape, "spin", "wavefunction spin dimension differs from 2s+1");
}

VelStatus WaveVelocity::velocity(const Config& x, double t, Config& v) const {
  if (!psi_.in_domain(x)) return VelStatus::exited;
  thread_local Spinor p;
  thread_local CMat g;
  if (psi_.is_grid())
    psi_.evaluate_grad(x, p, g);
  else
    psi_.evaluate_grad_at(x, t, p, g);
  const CurrentSample s = current_from(p, g, psi_.masses(), spin_, em_, x, t);
  if (!(s.rho >= floor_) || !std::isfinite(s.rho)) return VelStatus::node;
  v.resize(s.j.size());
  for (std::size_t k = 0; k < s.j.size(); ++k) {
    v[k] = scale_ * s.j[k] / s.rho;
    if (!v[k].allFinite()) return VelStatus::node;
  }
  return VelStatus::ok;
}

SnapshotVelocity::SnapshotVelocity(std::vector<std::shared_ptr<const NodeCurrents>> snaps,
                                   double velocity_scale)
    : snaps_(std::move(snaps)), scale_(velocity_scale) {
  if (snaps_.empty()) throw Error(ErrorCategory::validation, "snapshots", "none given");
  double rmax = 0.0;
  for (std::size_t i = 0; i < snaps_.size(); ++i) {
    if (i > 0 && !(snaps_[i]->t > snaps_[i - 1]->t))
      throw Error(ErrorCategory::validation, "snapshots", "times must increase");
    if (!snaps_[i]->grid.same_as(snaps_.front()->grid))
      throw Error(ErrorCategory::shape, "snapshots", "grids differ");
    rmax = std::max(rmax, snaps_[i]->rho_max);
  }
  floor_ = kRhoFloorRel * rmax;
}

VelStatus SnapshotVelocity::velocity(const Config& x, double t, Config& v) const {
  const Grid& g = snaps_.front()->grid;
  if (!g.contains(x)) return VelStatus::exited;
  std::size_t idx[64];
  double w[64];
  const int nc = interpolation_stencil(g, x, idx, w);
  // Bracketing snapshots and time weight.
  std::size_t i0 = 0;
  double lam = 0.0;
  if (snaps_.size() > 1) {
    const double span = snaps_.back()->t - snaps_.front()->t;
    const double tc = std::clamp(t, snaps_.front()->t, snaps_.back()->t);
    if (std::abs(tc - t) > 1e-9 * span)
      throw Error(ErrorCategory::domain, "t", "outside the snapshot window");
    auto it = std::upper_bound(snaps_.begin(), snaps_.end(), tc,
                               [](double a, const auto& s) { return a < s->t; });
    i0 = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - snaps_.begin() - 1, 0),
                               snaps_.size() - 2);
    lam = (tc - snaps_[i0]->t) / (snaps_[i0 + 1]->t - snaps_[i0]->t);
  }
  const int np = g.particles;
  auto sample = [&](const NodeCurrents& s, double& rho, double* j) {
    rho = 0.0;
    for (int c = 0; c < nc; ++c) rho += w[c] * s.rho[idx[c]];
    for (int q = 0; q < 3 * np; ++q) {
      double acc = 0.0;
      for (int c = 0; c < nc; ++c) acc += w[c] * s.j[q][idx[c]];
      j[q] = acc;
    }
  };
  double rho, j[12];
  sample(*snaps_[i0], rho, j);
  if (snaps_.size() > 1 && lam > 0.0) {
    double rho_b, jb[12];
    sample(*snaps_[i0 + 1], rho_b, jb);
    rho = (1 - lam) * rho + lam * rho_b;
    for (int q = 0; q < 3 * np; ++q) j[q] = (1 - lam) * j[q] + lam * jb[q];
  }
  if (!(rho >= floor_) || rho <= 0.0) return VelStatus::node;
  v.resize(np);
  for (int k = 0; k < np; ++k) {
    v[k] = scale_ * Vec3(j[3 * k], j[3 * k + 1], j[3 * k + 2]) / rho;
    if (!v[k].allFinite()) return VelStatus::node;
  }
  return VelStatus::ok;
}

// ---------------------------------------------------------------- RK4

namespace {

void axpy(Config& out, const Config& x, double h, const Config& v) {
  out.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] + h * v[k];
}

TrajStatus to_traj(VelStatus s) {
  return s == VelStatus::node ? TrajStatus::node_encounter : TrajStatus::exited;
}

// One RK4 step; returns ok or the status that stopped it.
VelStatus rk4_step(const VelocityField& f, Config& x, double t, double h) {
  thread_local Config k1, k2, k3, k4, tmp;
  VelStatus s;
  if ((s = f.velocity(x, t, k1)) != VelStatus::ok) return s;
  axpy(tmp, x, 0.5 * h, k1);
  if ((s = f.velocity(tmp, t + 0.5 * h, k2)) != VelStatus::ok) return s;
  axpy(tmp, x, 0.5 * h, k2);
  if ((s = f.velocity(tmp, t + 0.5 * h, k3)) != VelStatus::ok) return s;
  axpy(tmp, x, h, k3);
  if ((s = f.velocity(tmp, t + h, k4)) != VelStatus::ok) return s;
  for (std::size_t k = 0; k < x.size(); ++k)
    x[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
  return VelStatus::ok;
}

}  // namespace

TrajectoryRecord integrate_trajectory(const BeableConfig& start, const VelocityField& field,
                                      double t_final, const IntegrationControls& c) {
  if (!(c.dt > 0)) throw Error(ErrorCategory::validation, "dt", "must be positive");
  if (int(start.positions.size()) != field.particles())
    throw Error(ErrorCategory::shape, "start", "particle count differs from the field");
  TrajectoryRecord rec;
  const double t0 = start.t;
  Config x = start.positions;
  rec.times.push_back(t0);
  rec.configs.push_back(x);
  if (!(t_final > t0)) return rec;
  const long N = std::max(1L, long(std::ceil((t_final - t0) / c.dt - 1e-9)));
  const double h = (t_final - t0) / double(N);
  const int every = std::max(1, c.record_every);
  for (long s = 0; s < N; ++s) {
    const double t = t0 + double(s) * h;
    const VelStatus st = rk4_step(field, x, t, h);
    if (st != VelStatus::ok) {
      rec.status = to_traj(st);
      if (rec.times.back() != t) {
        rec.times.push_back(t);
        rec.configs.push_back(x);
      }
      return rec;
    }
    const double tn = (s + 1 == N) ? t_final : t0 + double(s + 1) * h;
    const bool out = c.inside && !c.inside(x);
    if ((s + 1) % every == 0 || s + 1 == N || out) {
      rec.times.push_back(tn);
      rec.configs.push_back(x);
    }
    if (out) {
      rec.status = TrajStatus::exited;
      return rec;
    }
  }
  return rec;
}

std::vector<TrajectoryRecord> integrate_ensemble(const Ensemble& ens, const VelocityField& field,
                                                 double t_final, const IntegrationControls& c) {
  std::vector<TrajectoryRecord> out(ens.members.size());
  parallel_for(out.size(), [&](std::size_t i) {
    out[i] = integrate_trajectory(ens.members[i], field, t_final, c);
  });
  return out;
}

// ---------------------------------------------------------------- sampling

namespace {

Config from_flat(const double* v, int particles, int dims) {
  Config x(particles, Vec3::Zero());
  for (int a = 0; a < particles * dims; ++a) x[a / dims][a % dims] = v[a];
  return x;
}

struct Lattice {
  std::vector<double> lo, h;
  std::vector<int> pts;
  std::vector<double> node_rho;
  std::vector<double> cum;  // cumulative cell bounds
  std::vector<double> bound;
  int D = 0;

  std::size_t cells() const {
    std::size_t c = 1;
    for (int p : pts) c *= std::size_t(p - 1);
    return c;
  }

  void build_cells(double safety) {
    const std::size_t nc = cells();
    bound.assign(nc, 0.0);
    cum.assign(nc, 0.0);
    std::vector<std::size_t> nstride(D, 1), cstride(D, 1);
    for (int a = D - 2; a >= 0; --a) {
      nstride[a] = nstride[a + 1] * pts[a + 1];
      cstride[a] = cstride[a + 1] * (pts[a + 1] - 1);
    }
    double acc = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      std::size_t base = 0, rem = c;
      for (int a = 0; a < D; ++a) {
        base += (rem / cstride[a]) * nstride[a];
        rem %= cstride[a];
      }
      double m = 0.0;
      for (int corner = 0; corner < (1 << D); ++corner) {
        std::size_t off = base;
        for (int a = 0; a < D; ++a)
          if (corner & (1 << a)) off += nstride[a];
        m = std::max(m, node_rho[off]);
      }
      bound[c] = safety * m;
      acc += bound[c];
      cum[c] = acc;
    }
  }

  // Cell lower corner for cell index c.
  void corner(std::size_t c, double* x) const {
    for (int a = D - 1; a >= 0; --a) {
      const std::size_t n = std::size_t(pts[a] - 1);
      x[a] = lo[a] + double(c % n) * h[a];
      c /= n;
    }
  }
};

std::size_t default_lattice(int D, std::size_t budget) {
  std::size_t L = std::size_t(std::floor(std::pow(double(budget), 1.0 / D)));
  return std::clamp<std::size_t>(L, 3, 257);
}

void check_acceptance(std::size_t proposals, std::size_t accepted) {
  if (proposals >= 100000 && double(accepted) < 1e-4 * double(proposals))
    throw Error(ErrorCategory::sampler, "envelope",
                "acceptance rate below 1e-4; retune the sampling box");
}

}  // namespace

Ensemble sample_equilibrium(const WaveFunction& psi, std::size_t n, std::uint64_t seed,
                            const SamplerOptions* opts) {
  if (n < 1) throw Error(ErrorCategory::validation, "n", "must be >= 1");
  const int np = psi.particles(), dims = psi.dims(), D = np * dims;
  Ensemble ens;
  ens.seed = seed;
  ens.members.reserve(n);
  const double t = psi.time();

  auto rho_at = [&](const Config& x) { return psi.evaluate(x).squaredNorm(); };

  // Exactly Gaussian single-term states: widened Gaussian proposal.
  if (!psi.is_grid() && psi.terms().size() == 1) {
    if (auto gm = psi.terms()[0].family->gaussian_density(t)) {
      const double s = 1.25;
      Eigen::LLT<Eigen::MatrixXd> llt(gm->cov);
      const Eigen::MatrixXd L = llt.matrixL();
      const double rho0 = rho_at(from_flat(gm->mean.data(), np, dims));
      CounterRng rng(seed, 0);
      std::size_t proposals = 0;
      Eigen::VectorXd z(D);
      while (ens.members.size() < n) {
        for (int a = 0; a < D; ++a) z[a] = rng.normal();
        const Eigen::VectorXd xv = gm->mean + s * (L * z);
        const Config x = from_flat(xv.data(), np, dims);
        const double ratio = rho_at(x) / rho0 / std::exp(-0.5 * z.squaredNorm());
        if (ratio > 1.0 + 1e-9)
          throw Error(ErrorCategory::sampler, "envelope",
                      "density exceeds its Gaussian envelope; state is not Gaussian");
        ++proposals;
        if (rng.uniform() < ratio) ens.members.push_back({x, t});
        check_acceptance(proposals, ens.members.size());
      }
      return ens;
    }
  }

  Lattice lat;
  lat.D = D;
  std::function<double(const double*)> target;
  std::vector<double> grid_rho;
  if (psi.is_grid()) {
    const Grid& g = psi.grid();
    for (int a = 0; a < D; ++a) {
      lat.lo.push_back(g.lo[a]);
      lat.h.push_back(g.spacing(a));
      lat.pts.push_back(g.points[a]);
    }
    const std::size_t N = g.size();
    lat.node_rho.assign(N, 0.0);
    const auto& d = psi.data();
    for (int c = 0; c < psi.components(); ++c)
      for (std::size_t i = 0; i < N; ++i) lat.node_rho[i] += std::norm(d[c * N + i]);
    target = [&](const double* v) {
      const Config x = from_flat(v, np, dims);
      std::size_t idx[64];
      double w[64];
      const int k = interpolation_stencil(g, x, idx, w);
      double r = 0.0;
      for (int c = 0; c < k; ++c) r += w[c] * lat.node_rho[idx[c]];
      return r;
    };
  } else {
    if (!opts || int(opts->lo.size()) != D || int(opts->hi.size()) != D)
      throw Error(ErrorCategory::validation, "box",
                  "non-Gaussian parametric states need a sampling box per active axis");
    const std::size_t L = opts->lattice > 0 ? std::size_t(opts->lattice)
                                            : default_lattice(D, 2000000);
    for (int a = 0; a < D; ++a) {
      if (!(opts->hi[a] > opts->lo[a]))
        throw Error(ErrorCategory::validation, "box", "max must exceed min");
      lat.lo.push_back(opts->lo[a]);
      lat.h.push_back((opts->hi[a] - opts->lo[a]) / double(L - 1));
      lat.pts.push_back(int(L));
    }
    std::size_t N = 1;
    for (int p : lat.pts) N *= std::size_t(p);
    lat.node_rho.assign(N, 0.0);
    parallel_for(N, [&](std::size_t i) {
      double v[12];
      std::size_t rem = i;
      for (int a = D - 1; a >= 0; --a) {
        v[a] = lat.lo[a] + double(rem % lat.pts[a]) * lat.h[a];
        rem /= lat.pts[a];
      }
      lat.node_rho[i] = rho_at(from_flat(v, np, dims));
    });
    target = [&](const double* v) { return rho_at(from_flat(v, np, dims)); };
  }

  // Grid densities are bounded by their cell corners exactly; closed forms
  // get a safety factor that doubles whenever a draw exceeds its bound.
  double safety = psi.is_grid() ? 1.0 : 1.5;
  for (std::uint64_t attempt = 0;; ++attempt) {
    lat.build_cells(safety);
    const double total = lat.cum.back();
    if (!(total > 0)) throw Error(ErrorCategory::sampler, "psi", "density vanishes on the box");
    CounterRng rng(seed, attempt);
    ens.members.clear();
    std::size_t proposals = 0;
    bool violated = false;
    double v[12];
    while (ens.members.size() < n) {
      const double u = rng.uniform() * total;
      const std::size_t c = std::min<std::size_t>(
          std::upper_bound(lat.cum.begin(), lat.cum.end(), u) - lat.cum.begin(), lat.cum.size() - 1);
      lat.corner(c, v);
      for (int a = 0; a < D; ++a) v[a] += rng.uniform() * lat.h[a];
      const double r = target(v);
      ++proposals;
      if (r > lat.bound[c] * (1.0 + 1e-12)) {
        if (psi.is_grid()) throw Error(ErrorCategory::numerical, "sampler", "cell bound violated");
        violated = true;
        break;
      }
      if (rng.uniform() * lat.bound[c] < r) ens.members.push_back({from_flat(v, np, dims), t});
      check_acceptance(proposals, ens.members.size());
    }
    if (!violated) return ens;
    safety *= 2.0;
    if (attempt > 8) throw Error(ErrorCategory::sampler, "envelope", "envelope keeps failing");
  }
}

// ---------------------------------------------------------------- co-propagation

CoPropagation copropagate(const Ensemble& ens, const WaveFunction& psi0, const Propagator& prop,
                          const std::vector<double>& checkpoints, int snapshot_stride,
                          int substeps, double velocity_scale) {
  if (!psi0.is_grid()) throw Error(ErrorCategory::unsupported, "psi", "grid state required");
  if (snapshot_stride < 1 || substeps < 1)
    throw Error(ErrorCategory::validation, "substeps", "must be >= 1");
  for (std::size_t i = 0; i < checkpoints.size(); ++i)
    if (checkpoints[i] < psi0.time() || (i > 0 && checkpoints[i] <= checkpoints[i - 1]))
      throw Error(ErrorCategory::validation, "checkpoints", "must increase from the start time");

  CoPropagation out;
  const std::size_t n = ens.members.size();
  std::vector<Config> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = ens.members[i].positions;
  out.status.assign(n, TrajStatus::ok);

  SplitStepper st(psi0, prop);
  std::vector<cplx> data = psi0.data();
  double t = psi0.time();
  auto cur = std::make_shared<const NodeCurrents>(node_currents(psi0, prop.spin, nullptr));
  const double interval = prop.dt * snapshot_stride;

  for (double tc : checkpoints) {
    while (t < tc) {
      const double t_next = (tc - t <= interval * (1 + 1e-9)) ? tc : t + interval;
      // Propagate psi to t_next in steps of at most prop.dt.
      double ti = t;
      while (ti < t_next) {
        double h = std::min(prop.dt, t_next - ti);
        if (t_next - (ti + h) < 1e-12 * prop.dt) h = t_next - ti;
        st.advance(data, ti, h);
        ti += h;
        if (std::abs(ti - t_next) < 1e-12 * prop.dt) ti = t_next;
      }
      const WaveFunction snap = psi0.with_data(data, t_next);
      auto nxt = std::make_shared<const NodeCurrents>(node_currents(snap, prop.spin, nullptr));
      const SnapshotVelocity field({cur, nxt}, velocity_scale);
      const double h = (t_next - t) / substeps;
      parallel_for(n, [&](std::size_t i) {
        if (out.status[i] != TrajStatus::ok) return;
        for (int s = 0; s < substeps; ++s) {
          const double ts = (s + 1 == substeps) ? t_next - h : t + s * h;
          const VelStatus vs = rk4_step(field, pos[i], ts, h);
          if (vs != VelStatus::ok) {
            out.status[i] = to_traj(vs);
            return;
          }
        }
      });
      cur = nxt;
      t = t_next;
    }
    out.times.push_back(tc);
    out.positions.push_back(pos);
    out.snapshots.push_back(psi0.with_data(data, tc));
  }
  return out;
}

// ---------------------------------------------------------------- equivariance

double ks_critical_1pct(std::size_t n) { return 1.63 / std::sqrt(double(n)); }

double ks_statistic(std::vector<double> s, const std::vector<double>& nodes,
                    const std::vector<double>& cdf) {
  std::sort(s.begin(), s.end());
  const double n = double(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double F;
    if (s[i] <= nodes.front()) {
      F = 0.0;
    } else if (s[i] >= nodes.back()) {
      F = 1.0;
    } else {
      const std::size_t j = std::upper_bound(nodes.begin(), nodes.end(), s[i]) - nodes.begin();
      const double w = (s[i] - nodes[j - 1]) / (nodes[j] - nodes[j - 1]);
      F = (1 - w) * cdf[j - 1] + w * cdf[j];
    }
    d = std::max({d, std::abs(F - i / n), std::abs((i + 1) / n - F)});
  }
  return d;
}

namespace {

// Marginal CDFs of a node density on a tensor lattice, one per axis,
// normalized to end at 1 (trapezoid rule along the axis).
std::vector<std::vector<double>> marginal_cdfs(const std::vector<double>& rho,
                                               const std::vector<int>& pts) {
  const int D = int(pts.size());
  std::vector<std::vector<double>> out(D);
  std::vector<std::size_t> stride(D, 1);
  for (int a = D - 2; a >= 0; --a) stride[a] = stride[a + 1] * pts[a + 1];
  for (int a = 0; a < D; ++a) {
    std::vector<double> m(pts[a], 0.0);
    for (std::size_t i = 0; i < rho.size(); ++i) m[(i / stride[a]) % pts[a]] += rho[i];
    std::vector<double> c(pts[a], 0.0);
    for (int i = 1; i < pts[a]; ++i) c[i] = c[i - 1] + 0.5 * (m[i] + m[i - 1]);
    const double tot = c.back();
    if (!(tot > 0)) throw Error(ErrorCategory::numerical, "quadrature", "zero marginal mass");
    for (double& v : c) v /= tot;
    out[a] = std::move(c);
  }
  return out;
}

}  // namespace

EquivarianceReport equivariance_check(const WaveFunction& psi0, const Propagator& prop,
                                      std::size_t n, const EquivarianceOptions& o) {
  if (n < 1000) throw Error(ErrorCategory::validation, "n", "must be >= 1000");
  const int np = psi0.particles(), dims = psi0.dims(), D = np * dims;
  const Ensemble ens = sample_equilibrium(psi0, n, o.seed, &o.box);
  std::vector<std::vector<Config>> at(o.t_checks.size());
  std::vector<TrajStatus> status(n, TrajStatus::ok);
  std::vector<WaveFunction> snaps;

  if (psi0.is_grid()) {
    if (prop.method != Method::split_step)
      throw Error(ErrorCategory::unsupported, "method", "grid states need split-step");
    CoPropagation cp = copropagate(ens, psi0, prop, o.t_checks, o.snapshot_stride, o.substeps,
                                   o.velocity_scale);
    for (std::size_t c = 0; c < o.t_checks.size(); ++c) at[c] = std::move(cp.positions[c]);
    status = cp.status;
    snaps = std::move(cp.snapshots);
  } else {
    if (!psi0.exact_in_time())
      throw Error(ErrorCategory::unsupported, "method", "closed form lacks an exact time rule");
    double rho_ref = 0.0;
    for (const auto& m : ens.members) rho_ref = std::max(rho_ref, psi0.evaluate(m.positions).squaredNorm());
    const WaveVelocity field(psi0, prop.spin, o.em, rho_ref, o.velocity_scale);
    IntegrationControls ctl;
    ctl.dt = o.rk_dt;
    ctl.record_every = 1 << 30;
    for (auto& v : at) v.resize(n);
    parallel_for(n, [&](std::size_t i) {
      BeableConfig b = ens.members[i];
      for (std::size_t c = 0; c < o.t_checks.size(); ++c) {
        if (status[i] == TrajStatus::ok) {
          const TrajectoryRecord r = integrate_trajectory(b, field, o.t_checks[c], ctl);
          status[i] = r.status;
          b = {r.configs.back(), o.t_checks[c]};
        }
        at[c][i] = b.positions;
      }
    });
    for (double tc : o.t_checks) snaps.push_back(psi0.at_time(tc));
  }

  EquivarianceReport rep;
  for (auto s : status)
    if (s != TrajStatus::ok) ++rep.lost;

  for (std::size_t c = 0; c < o.t_checks.size(); ++c) {
    std::vector<double> rho;
    std::vector<int> pts;
    std::vector<std::vector<double>> nodes(D);
    const WaveFunction& psi = snaps[c];
    if (psi.is_grid()) {
      const Grid& g = psi.grid();
      const std::size_t N = g.size();
      rho.assign(N, 0.0);
      for (int k = 0; k < psi.components(); ++k)
        for (std::size_t i = 0; i < N; ++i) rho[i] += std::norm(psi.data()[k * N + i]);
      for (int a = 0; a < D; ++a) {
        pts.push_back(g.points[a]);
        for (int i = 0; i < g.points[a]; ++i) nodes[a].push_back(g.coord(a, i));
      }
    } else {
      if (int(o.box.lo.size()) != D)
        throw Error(ErrorCategory::validation, "box", "quadrature box needed per active axis");
      const int Q = o.quad_points > 0 ? o.quad_points
                                       : int(std::clamp<std::size_t>(
                                             std::size_t(std::pow(4.0e6, 1.0 / D)), 3, 2001));
      std::size_t N = 1;
      for (int a = 0; a < D; ++a) {
        pts.push_back(Q);
        N *= std::size_t(Q);
        for (int i = 0; i < Q; ++i)
          nodes[a].push_back(o.box.lo[a] + (o.box.hi[a] - o.box.lo[a]) * i / double(Q - 1));
      }
      rho.assign(N, 0.0);
      parallel_for(N, [&](std::size_t i) {
        Config x(np, Vec3::Zero());
        std::size_t rem = i;
        for (int a = D - 1; a >= 0; --a) {
          x[a / dims][a % dims] = nodes[a][rem % Q];
          rem /= Q;
        }
        rho[i] = psi.evaluate(x).squaredNorm();
      });
    }
    const auto cdfs = marginal_cdfs(rho, pts);
    for (int a = 0; a < D; ++a) {
      std::vector<double> s;
      s.reserve(n);
      for (std::size_t i = 0; i < n; ++i)
        if (status[i] == TrajStatus::ok) s.push_back(at[c][i][a / dims][a % dims]);
      KsResult k;
      k.t = o.t_checks[c];
      k.axis = a;
      k.statistic = ks_statistic(s, nodes[a], cdfs[a]);
      k.critical = ks_critical_1pct(s.size());
      k.pass = k.statistic < k.critical;
      rep.pass = rep.pass && k.pass;
      rep.max_ratio = std::max(rep.max_ratio, k.statistic / k.critical);
      rep.tests.push_back(k);
    }
  }
  return rep;
}

// ---------------------------------------------------------------- arrival time

ArrivalResult arrival_time_stats(const std::vector<WaveFunction>& snaps, const Config& detector,
                                 const SpinSpec& spin) {
  if (snaps.size() < 3)
    throw Error(ErrorCategory::validation, "snapshots", "need at least three snapshot times");
  ArrivalResult r;
  for (const auto& s : snaps) {
    r.times.push_back(s.time());
    r.flux.push_back(current(s, spin, nullptr, detector).j[0].norm());
  }
  for (std::size_t i = 1; i < r.times.size(); ++i)
    if (!(r.times[i] > r.times[i - 1]))
      throw Error(ErrorCategory::validation, "snapshots", "times must increase");
  auto trap = [&](std::size_t stride) {
    double num = 0.0, den = 0.0;
    std::size_t prev = 0;
    for (std::size_t i = stride;; i += stride) {
      if (i >= r.times.size()) i = r.times.size() - 1;
      const double h = r.times[i] - r.times[prev];
      num += 0.5 * h * (r.flux[i] * r.times[i] + r.flux[prev] * r.times[prev]);
      den += 0.5 * h * (r.flux[i] + r.flux[prev]);
      prev = i;
      if (i == r.times.size() - 1) break;
    }
    return std::pair{num, den};
  };
  const auto [num, den] = trap(1);
  r.total = den;
  if (den < 1e-12)
    throw Error(ErrorCategory::physics, "detector", "no flux through the detector point");
  r.mean = num / den;
  const auto [num2, den2] = trap(2);
  r.quad_error = std::abs(num2 / den2 - r.mean);
  return r;
}

// ---------------------------------------------------------------- branching

BranchingResult measurement_branching(const BranchingSpec& sp, std::size_t n,
                                      std::uint64_t seed) {
  const std::size_t K = sp.coefs.size();
  if (K == 0 || sp.states.size() != K || sp.eigenvalues.size() != K)
    throw Error(ErrorCategory::shape, "channels", "coefficients, states and eigenvalues differ in count");
  double wsum = 0.0;
  for (const cplx& c : sp.coefs) wsum += std::norm(c);
  if (std::abs(wsum - 1.0) > 1e-9)
    throw Error(ErrorCategory::validation, "coefs", "squared weights must sum to 1");
  if (!(sp.t_readout > 0)) throw Error(ErrorCategory::validation, "t_readout", "must be positive");

  const Grid g = Grid::make(1, 2, {sp.x_lo, sp.y_lo}, {sp.x_hi, sp.y_hi},
                            {sp.x_points, sp.y_points});
  const std::size_t N = g.size();
  std::vector<std::vector<cplx>> branch(K, std::vector<cplx>(N));
  std::vector<cplx> total(N, 0.0);
  const double s2 = sp.pointer_width * sp.pointer_width;
  for (std::size_t i = 0; i < N; ++i) {
    const Config x = g.node(i);
    const double y = x[0][1];
    const double G = std::pow(2 * kPi * s2, -0.25) * std::exp(-y * y / (4 * s2));
    const Config xs{Vec3(x[0][0], 0, 0)};
    for (std::size_t k = 0; k < K; ++k) {
      const cplx phi = sp.states[k]->value(xs, 0.0);
      branch[k][i] = sp.coefs[k] * phi * G * std::polar(1.0, sp.coupling * sp.eigenvalues[k] * y / sp.hbar);
      total[i] += branch[k][i];
    }
  }
  Propagator prop;
  prop.method = Method::split_step;
  prop.dt = sp.dt;
  prop.spin = SpinSpec::make(0, std::nullopt, sp.hbar);
  if (sp.system_potential) {
    auto V = sp.system_potential;
    prop.V = [V](const Config& x, double) { return V(x[0][0]); };
  }
  const WaveFunction psi0 = WaveFunction::on_grid(g, {sp.mass}, 1, total);
  const Ensemble ens = sample_equilibrium(psi0, n, seed);
  const CoPropagation cp = copropagate(ens, psi0, prop, {sp.t_readout}, 5, 4);

  std::vector<WaveFunction> fin;
  for (std::size_t k = 0; k < K; ++k)
    fin.push_back(propagate_to(WaveFunction::on_grid(g, {sp.mass}, 1, branch[k]), prop,
                               sp.t_readout).back());

  BranchingResult res;
  res.n = n;
  const double dv = g.cell_volume();
  std::vector<double> nrm(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    for (const cplx& v : fin[k].data()) nrm[k] += std::norm(v);
    nrm[k] *= dv;
    res.born.push_back(nrm[k]);
  }
  for (std::size_t a = 0; a < K; ++a)
    for (std::size_t b = a + 1; b < K; ++b) {
      if (nrm[a] <= 0 || nrm[b] <= 0) continue;
      double ov = 0.0;
      for (std::size_t i = 0; i < N; ++i) ov += std::abs(fin[a].data()[i]) * std::abs(fin[b].data()[i]);
      res.overlap = std::max(res.overlap, ov * dv / std::sqrt(nrm[a] * nrm[b]));
    }
  if (res.overlap > sp.max_overlap)
    throw Error(ErrorCategory::physics, "t_readout",
                "pointer channels still overlap (" + std::to_string(res.overlap) + ")");

  res.counts.assign(K, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (cp.status[i] != TrajStatus::ok) {
      ++res.unassigned;
      continue;
    }
    const Config& x = cp.positions[0][i];
    std::size_t best = 0;
    double bv = -1.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double v = fin[k].evaluate(x).squaredNorm();
      if (v > bv) bv = v, best = k;
    }
    ++res.counts[best];
  }
  for (long c : res.counts) res.fractions.push_back(double(c) / double(n));
  return res;
}

}  // namespace pilotwave
