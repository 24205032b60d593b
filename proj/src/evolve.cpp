#include "pilotwave/evolve.hpp"

#include <fftw3.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <mutex>

namespace pilotwave {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

struct SplitStepper::Impl {
  Grid grid;
  Propagator prop;
  std::vector<double> masses;
  int nc = 1;
  std::size_t n = 0;
  std::vector<double> kin;  // sum_a hbar k_a^2 / (2 m_a) per spectral node
  fftw_complex* buf = nullptr;
  fftw_plan fwd = nullptr, bwd = nullptr;
  // Cached potential phases and spin rotations for time-independent fields.
  double cached_h = -1.0;
  std::vector<cplx> vphase;
  std::vector<CMat> spin_rot;
  std::vector<cplx> kin_half;
  double cached_kin_h = -1.0;

  void build_potential(double t, double h) {
    const double hbar = prop.spin.hbar;
    vphase.assign(n, 1.0);
    const bool zeeman = prop.em && prop.em->V && prop.spin.twice_s > 0 && prop.spin.g != 0.0;
    if (zeeman) spin_rot.assign(n, CMat());
    double vmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Config x = grid.node(i);
      double v = prop.V ? prop.V(x, t) : 0.0;
      if (prop.em) v += prop.em->e * prop.em->scalar_potential(x[0], t);
      vmax = std::max(vmax, std::abs(v));
      vphase[i] = std::polar(1.0, -v * h / hbar);
      if (zeeman) {
        const Vec3 B = prop.em->B(x[0], t);
        const double m = masses[0];
        CMat M = prop.spin.S[0] * B[0] + prop.spin.S[1] * B[1] + prop.spin.S[2] * B[2];
        Eigen::SelfAdjointEigenSolver<CMat> es(M);
        const double theta = prop.em->e * prop.spin.g * h / (2 * m * prop.em->c * hbar);
        Eigen::VectorXcd ph(M.rows());
        for (int r = 0; r < M.rows(); ++r) ph[r] = std::polar(1.0, theta * es.eigenvalues()[r]);
        spin_rot[i] = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
      }
    }
    if (std::abs(h) * vmax / hbar >= 0.5)
      throw Error(ErrorCategory::stability, "dt",
                  "dt * max|V| / hbar = " + std::to_string(std::abs(h) * vmax / hbar) +
                      " exceeds 0.5");
    cached_h = h;
  }

  void kinetic(std::vector<cplx>& data, double h) {
    if (h != cached_kin_h) {
      kin_half.resize(n);
      for (std::size_t i = 0; i < n; ++i) kin_half[i] = std::polar(1.0 / double(n), -kin[i] * h / 2);
      cached_kin_h = h;
    }
    for (int c = 0; c < nc; ++c) {
      cplx* d = data.data() + c * n;
      for (std::size_t i = 0; i < n; ++i) {
        buf[i][0] = d[i].real();
        buf[i][1] = d[i].imag();
      }
      fftw_execute(fwd);
      for (std::size_t i = 0; i < n; ++i) {
        const cplx v = cplx(buf[i][0], buf[i][1]) * kin_half[i];
        buf[i][0] = v.real();
        buf[i][1] = v.imag();
      }
      fftw_execute(bwd);
      for (std::size_t i = 0; i < n; ++i) d[i] = cplx(buf[i][0], buf[i][1]);
    }
  }
};

SplitStepper::SplitStepper(const WaveFunction& like, const Propagator& prop)
    : impl_(std::make_unique<Impl>()) {
  Impl& s = *impl_;
  s.grid = like.grid();
  s.prop = prop;
  s.masses = like.masses();
  s.nc = like.components();
  s.n = s.grid.size();
  if (prop.spin.dim() != like.spin_dim())
    throw Error(ErrorCategory::shape, "spin", "propagator spin differs from the wavefunction");
  if (prop.em && like.particles() != 1)
    throw Error(ErrorCategory::unsupported, "em", "external fields supported for one particle");
  if (prop.em && prop.em->V && !prop.neglect_orbital_coupling)
    throw Error(ErrorCategory::unsupported, "em",
                "split-step has no orbital vector-potential coupling; set "
                "neglect_orbital_coupling to keep only the spin-B term");
  // Spectral nodes: periodic box of length N h per axis.
  const int D = s.grid.axes();
  s.kin.assign(s.n, 0.0);
  for (std::size_t i = 0; i < s.n; ++i) {
    std::size_t rem = i;
    double e = 0.0;
    for (int a = D - 1; a >= 0; --a) {
      const int N = s.grid.points[a];
      const int j = int(rem % N);
      rem /= N;
      const int kj = j <= N / 2 ? j : j - N;
      const double k = 2 * kPi * kj / (N * s.grid.spacing(a));
      e += prop.spin.hbar * k * k / (2 * s.masses[a / s.grid.dims]);
    }
    s.kin[i] = e;
  }
  std::vector<int> dims(s.grid.points.begin(), s.grid.points.end());
  std::lock_guard<std::mutex> lk(planner_mutex());
  s.buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * s.n));
  s.fwd = fftw_plan_dft(D, dims.data(), s.buf, s.buf, FFTW_FORWARD, FFTW_ESTIMATE);
  s.bwd = fftw_plan_dft(D, dims.data(), s.buf, s.buf, FFTW_BACKWARD, FFTW_ESTIMATE);
}

SplitStepper::~SplitStepper() {
  std::lock_guard<std::mutex> lk(planner_mutex());
  if (impl_->fwd) fftw_destroy_plan(impl_->fwd);
  if (impl_->bwd) fftw_destroy_plan(impl_->bwd);
  if (impl_->buf) fftw_free(impl_->buf);
}

void SplitStepper::advance(std::vector<cplx>& data, double t, double h) {
  Impl& s = *impl_;
  if (s.prop.V_time_dependent || h != s.cached_h) s.build_potential(t + 0.5 * h, h);
  s.kinetic(data, h);
  for (int c = 0; c < s.nc; ++c)
    for (std::size_t i = 0; i < s.n; ++i) data[c * s.n + i] *= s.vphase[i];
  if (!s.spin_rot.empty()) {
    Spinor v(s.nc);
    for (std::size_t i = 0; i < s.n; ++i) {
      for (int c = 0; c < s.nc; ++c) v[c] = data[c * s.n + i];
      v = s.spin_rot[i] * v;
      for (int c = 0; c < s.nc; ++c) data[c * s.n + i] = v[c];
    }
  }
  s.kinetic(data, h);
}

WaveFunction SplitStepper::step(const WaveFunction& psi, double h) {
  std::vector<cplx> d = psi.data();
  advance(d, psi.time(), h);
  return psi.with_data(std::move(d), psi.time() + h);
}

namespace {

void check_prop(const Propagator& p) {
  if (!(p.dt > 0) || !std::isfinite(p.dt))
    throw Error(ErrorCategory::validation, "dt", "must be positive");
}

WaveFunction analytic_step(const WaveFunction& psi, double h) {
  if (!psi.exact_in_time())
    throw Error(ErrorCategory::unsupported, "method",
                "analytic propagation needs families with an exact time rule");
  return psi.at_time(psi.time() + h);
}

}  // namespace

WaveFunction step(const WaveFunction& psi, const Propagator& prop) {
  check_prop(prop);
  if (prop.method == Method::analytic) return analytic_step(psi, prop.dt);
  if (!psi.is_grid())
    throw Error(ErrorCategory::unsupported, "method", "split-step needs a grid state");
  SplitStepper st(psi, prop);
  return st.step(psi, prop.dt);
}

std::vector<WaveFunction> propagate_to(const WaveFunction& psi, const Propagator& prop,
                                       double t_final,
                                       const std::vector<double>& snapshot_times) {
  check_prop(prop);
  const double t0 = psi.time();
  if (t_final < t0) throw Error(ErrorCategory::validation, "t_final", "before current time");
  for (std::size_t i = 0; i < snapshot_times.size(); ++i) {
    const double ts = snapshot_times[i];
    if (ts < t0 || ts > t_final)
      throw Error(ErrorCategory::validation, "snapshot_times", "outside [t, t_final]");
    if (i > 0 && ts < snapshot_times[i - 1])
      throw Error(ErrorCategory::validation, "snapshot_times", "must be sorted");
  }
  std::vector<double> targets = snapshot_times;
  if (targets.empty() || targets.back() != t_final) targets.push_back(t_final);

  std::vector<WaveFunction> out;
  out.reserve(targets.size());
  if (prop.method == Method::analytic) {
    if (!psi.exact_in_time())
      throw Error(ErrorCategory::unsupported, "method",
                  "analytic propagation needs families with an exact time rule");
    for (double ts : targets) out.push_back(psi.at_time(ts));
    return out;
  }
  if (!psi.is_grid())
    throw Error(ErrorCategory::unsupported, "method", "split-step needs a grid state");
  SplitStepper st(psi, prop);
  std::vector<cplx> d = psi.data();
  double t = t0;
  // Step counting from t0 avoids drift in the landing times.
  long k = 0;
  for (double ts : targets) {
    while (t < ts) {
      const double next = t0 + double(k + 1) * prop.dt;
      if (next <= ts + 1e-12 * prop.dt) {
        st.advance(d, t, next - t);
        t = next;
        ++k;
        if (std::abs(t - ts) <= 1e-12 * prop.dt) t = ts;
      } else {
        st.advance(d, t, ts - t);
        t = ts;
      }
    }
    out.push_back(psi.with_data(d, ts));
  }
  return out;
}

std::vector<std::string> propagator_warnings(const WaveFunction& psi, const Propagator& prop) {
  std::vector<std::string> w;
  if (prop.method == Method::split_step && psi.is_grid())
    for (int a = 0; a < psi.grid().axes(); ++a)
      if (!is_pow2(psi.grid().points[a]))
        w.push_back("axis " + std::to_string(a) + " point count is not a power of two");
  return w;
}

}  // namespace pilotwave
