#include "pilotwave/wavefunction.hpp"

#include <cmath>

namespace pilotwave {

cplx ScalarFamily::value_grad(const Config& x, double t, cplx* grad) const {
  Config y = x;
  for (int k = 0; k < particles(); ++k)
    for (int a = 0; a < dims(); ++a) {
      const double x0 = x[k][a];
      const double h = 1e-3 * (1.0 + std::abs(x0));
      cplx f[4];
      const double off[4] = {-2, -1, 1, 2};
      for (int s = 0; s < 4; ++s) {
        y[k][a] = x0 + off[s] * h;
        f[s] = value(y, t);
      }
      y[k][a] = x0;
      grad[3 * k + a] = (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h);
    }
  return value(x, t);
}

void hermite_functions(int nmax, double x, double* out) {
  out[0] = std::pow(kPi, -0.25) * std::exp(-0.5 * x * x);
  if (nmax >= 1) out[1] = std::sqrt(2.0) * x * out[0];
  for (int n = 1; n < nmax; ++n)
    out[n + 1] = std::sqrt(2.0 / (n + 1)) * x * out[n] -
                 std::sqrt(double(n) / (n + 1)) * out[n - 1];
}

namespace {

void require_positive(double v, const char* field) {
  if (!(v > 0) || !std::isfinite(v))
    throw Error(ErrorCategory::validation, field, "must be positive");
}

void require_dims(int d) {
  if (d < 1 || d > 3) throw Error(ErrorCategory::validation, "dims", "must be 1, 2 or 3");
}

class PlaneWave final : public ScalarFamily {
 public:
  PlaneWave(const Vec3& k, double m, double hbar, int d) : k_(k), m_(m), hbar_(hbar), d_(d) {
    for (int a = d; a < 3; ++a) k_[a] = 0.0;
  }
  std::string id() const override { return "plane_wave"; }
  int particles() const override { return 1; }
  int dims() const override { return d_; }
  cplx value(const Config& x, double t) const override {
    const double phase = k_.dot(mask(x[0])) - hbar_ * k_.squaredNorm() * t / (2 * m_);
    return std::polar(1.0, phase);
  }
  cplx value_grad(const Config& x, double t, cplx* g) const override {
    const cplx v = value(x, t);
    for (int a = 0; a < d_; ++a) g[a] = kI * k_[a] * v;
    return v;
  }

 private:
  Vec3 mask(const Vec3& x) const {
    Vec3 y = x;
    for (int a = d_; a < 3; ++a) y[a] = 0.0;
    return y;
  }
  Vec3 k_;
  double m_, hbar_;
  int d_;
};

class GaussianPacket final : public ScalarFamily {
 public:
  GaussianPacket(const Vec3& x0, const Vec3& k0, double s0, double m, double hbar, int d)
      : x0_(x0), k0_(k0), s0_(s0), m_(m), hbar_(hbar), d_(d) {
    for (int a = d; a < 3; ++a) x0_[a] = k0_[a] = 0.0;
  }
  std::string id() const override { return "gaussian_packet"; }
  int particles() const override { return 1; }
  int dims() const override { return d_; }

  cplx value(const Config& x, double t) const override {
    cplx g[3];
    return eval(x[0], t, g, false);
  }
  cplx value_grad(const Config& x, double t, cplx* g) const override {
    return eval(x[0], t, g, true);
  }
  std::optional<GaussianMoments> gaussian_density(double t) const override {
    const cplx s = width(t);
    const double var = std::norm(s) / (s0_ * s0_);
    GaussianMoments gm;
    gm.mean.resize(d_);
    for (int a = 0; a < d_; ++a) gm.mean[a] = x0_[a] + hbar_ * k0_[a] * t / m_;
    gm.cov = Eigen::MatrixXd::Identity(d_, d_) * var;
    return gm;
  }

 private:
  cplx width(double t) const { return cplx(s0_ * s0_, hbar_ * t / (2 * m_)); }
  cplx eval(const Vec3& x, double t, cplx* g, bool want) const {
    const cplx s = width(t);
    const double omega = hbar_ * k0_.squaredNorm() / (2 * m_);
    cplx expo = -kI * omega * t;
    double xi[3];
    for (int a = 0; a < d_; ++a) {
      xi[a] = x[a] - x0_[a] - hbar_ * k0_[a] * t / m_;
      expo += -xi[a] * xi[a] / (4.0 * s) + kI * k0_[a] * (x[a] - x0_[a]);
    }
    const cplx pref = std::pow(2 * kPi * s0_ * s0_, -0.25 * d_) *
                      std::pow(s0_ * s0_ / s, 0.5 * d_);
    const cplx v = pref * std::exp(expo);
    if (want)
      for (int a = 0; a < d_; ++a) g[a] = v * (-xi[a] / (2.0 * s) + kI * k0_[a]);
    return v;
  }
  Vec3 x0_, k0_;
  double s0_, m_, hbar_;
  int d_;
};

class HarmonicState final : public ScalarFamily {
 public:
  HarmonicState(int n, double w, double m, double hbar) : n_(n), w_(w), m_(m), hbar_(hbar) {}
  std::string id() const override { return "harmonic_state"; }
  int particles() const override { return 1; }
  int dims() const override { return 1; }
  cplx value(const Config& x, double t) const override {
    cplx g[3];
    return eval(x[0][0], t, g, false);
  }
  cplx value_grad(const Config& x, double t, cplx* g) const override {
    return eval(x[0][0], t, g, true);
  }

 private:
  cplx eval(double x, double t, cplx* g, bool want) const {
    const double scale = std::sqrt(m_ * w_ / hbar_);
    std::vector<double> h(n_ + 2);
    hermite_functions(n_ + 1, scale * x, h.data());
    const cplx ph = std::polar(std::sqrt(scale), -(n_ + 0.5) * w_ * t);
    if (want) {
      const double lower = n_ > 0 ? std::sqrt(0.5 * n_) * h[n_ - 1] : 0.0;
      g[0] = ph * scale * (lower - std::sqrt(0.5 * (n_ + 1)) * h[n_ + 1]);
    }
    return ph * h[n_];
  }
  int n_;
  double w_, m_, hbar_;
};

class DecayingPair final : public ScalarFamily {
 public:
  DecayingPair(double alpha, double m1, double m2, double hbar, int d, double pref)
      : alpha_(alpha), mu_(m1 * m2 / (m1 + m2)), hbar_(hbar), d_(d), pref_(pref) {}
  std::string id() const override { return "decaying_pair"; }
  int particles() const override { return 2; }
  int dims() const override { return d_; }
  cplx value(const Config& x, double t) const override {
    cplx g[6];
    return eval(x, t, g, false);
  }
  cplx value_grad(const Config& x, double t, cplx* g) const override {
    return eval(x, t, g, true);
  }

 private:
  cplx eval(const Config& x, double t, cplx* g, bool want) const {
    const cplx A(alpha_, t / (2 * mu_));
    double r2 = 0.0;
    for (int a = 0; a < d_; ++a) r2 += (x[0][a] - x[1][a]) * (x[0][a] - x[1][a]);
    const cplx v = pref_ * std::pow(kPi * hbar_ / A, 0.5 * d_) *
                   std::exp(-r2 / (4.0 * hbar_ * A));
    if (want)
      for (int a = 0; a < d_; ++a) {
        const cplx d1 = -v * (x[0][a] - x[1][a]) / (2.0 * hbar_ * A);
        g[a] = d1;
        g[3 + a] = -d1;
      }
    return v;
  }
  double alpha_, mu_, hbar_;
  int d_;
  double pref_;
};

class PostCollapseWave final : public ScalarFamily {
 public:
  PostCollapseWave(const Vec3& a, double alpha, double m, double hbar, int d, double off)
      : a_(a), alpha_(alpha), m_(m), hbar_(hbar), d_(d), off_(off) {}
  std::string id() const override { return "post_collapse_wave"; }
  int particles() const override { return 1; }
  int dims() const override { return d_; }
  cplx value(const Config& x, double t) const override {
    cplx g[3];
    return eval(x[0], t, g, false);
  }
  cplx value_grad(const Config& x, double t, cplx* g) const override {
    return eval(x[0], t, g, true);
  }

 private:
  cplx eval(const Vec3& x, double t, cplx* g, bool want) const {
    const cplx A(alpha_, t / (2 * m_) + off_);
    double r2 = 0.0;
    for (int a = 0; a < d_; ++a) r2 += (a_[a] - x[a]) * (a_[a] - x[a]);
    const cplx v = std::pow(kPi * hbar_ / A, 0.5 * d_) * std::exp(-r2 / (4.0 * hbar_ * A));
    if (want)
      for (int a = 0; a < d_; ++a) g[a] = v * (a_[a] - x[a]) / (2.0 * hbar_ * A);
    return v;
  }
  Vec3 a_;
  double alpha_, m_, hbar_;
  int d_;
  double off_;
};

// Zero-momentum Gaussian in one coordinate block (centre of mass or relative).
struct Gauss1 {
  double var0, mass, hbar;
  cplx width(double t) const { return cplx(var0, hbar * t / (2 * mass)); }
};

class CorrelatedPair final : public ScalarFamily {
 public:
  CorrelatedPair(double sigma, double alpha, double m1, double m2, double hbar, int d,
                 const Vec3& c)
      : m1_(m1), m2_(m2), M_(m1 + m2), hbar_(hbar), d_(d), c_(c),
        cm_{hbar * hbar / sigma, m1 + m2, hbar},
        rel_{hbar * alpha, m1 * m2 / (m1 + m2), hbar} {}
  std::string id() const override { return "correlated_pair"; }
  int particles() const override { return 2; }
  int dims() const override { return d_; }
  cplx value(const Config& x, double t) const override {
    cplx g[6];
    return eval(x, t, g, false);
  }
  cplx value_grad(const Config& x, double t, cplx* g) const override {
    return eval(x, t, g, true);
  }
  std::optional<GaussianMoments> gaussian_density(double t) const override {
    const double vX = std::norm(cm_.width(t)) / cm_.var0;
    const double vr = std::norm(rel_.width(t)) / rel_.var0;
    // x1 = X + (m2/M) r, x2 = X - (m1/M) r per axis.
    const double a1 = m2_ / M_, a2 = -m1_ / M_;
    GaussianMoments gm;
    gm.mean = Eigen::VectorXd::Zero(2 * d_);
    gm.cov = Eigen::MatrixXd::Zero(2 * d_, 2 * d_);
    for (int a = 0; a < d_; ++a) {
      gm.mean[a] = gm.mean[d_ + a] = c_[a];
      gm.cov(a, a) = vX + a1 * a1 * vr;
      gm.cov(d_ + a, d_ + a) = vX + a2 * a2 * vr;
      gm.cov(a, d_ + a) = gm.cov(d_ + a, a) = vX + a1 * a2 * vr;
    }
    return gm;
  }

 private:
  cplx eval(const Config& x, double t, cplx* g, bool want) const {
    const cplx sX = cm_.width(t), sr = rel_.width(t);
    cplx expo = 0.0;
    cplx dX[3], dr[3];
    for (int a = 0; a < d_; ++a) {
      const double X = (m1_ * x[0][a] + m2_ * x[1][a]) / M_ - c_[a];
      const double r = x[0][a] - x[1][a];
      expo += -X * X / (4.0 * sX) - r * r / (4.0 * sr);
      dX[a] = -X / (2.0 * sX);
      dr[a] = -r / (2.0 * sr);
    }
    const cplx pref = std::pow(2 * kPi * cm_.var0, -0.25 * d_) *
                      std::pow(cm_.var0 / sX, 0.5 * d_) *
                      std::pow(2 * kPi * rel_.var0, -0.25 * d_) *
                      std::pow(rel_.var0 / sr, 0.5 * d_);
    const cplx v = pref * std::exp(expo);
    if (want)
      for (int a = 0; a < d_; ++a) {
        g[a] = v * (m1_ / M_ * dX[a] + dr[a]);
        g[3 + a] = v * (m2_ / M_ * dX[a] - dr[a]);
      }
    return v;
  }
  double m1_, m2_, M_, hbar_;
  int d_;
  Vec3 c_;
  Gauss1 cm_, rel_;
};

class FocusingGaussian final : public ScalarFamily {
 public:
  FocusingGaussian(const Vec3& f, double tf, double w, double kx, double m, double hbar)
      : f_(f), tf_(tf), w_(w), kx_(kx), m_(m), hbar_(hbar) {}
  std::string id() const override { return "focusing_gaussian"; }
  int particles() const override { return 1; }
  int dims() const override { return 3; }
  cplx value(const Config& x, double t) const override {
    cplx g[3];
    return eval(x[0], t, g, false);
  }
  cplx value_grad(const Config& x, double t, cplx* g) const override {
    return eval(x[0], t, g, true);
  }

 private:
  cplx eval(const Vec3& x, double t, cplx* g, bool want) const {
    const cplx s(w_ * w_, hbar_ * (t - tf_) / (2 * m_));
    const double dy = x[1] - f_[1], dz = x[2] - f_[2];
    const cplx expo = kI * (kx_ * x[0] - hbar_ * kx_ * kx_ * t / (2 * m_)) -
                      (dy * dy + dz * dz) / (4.0 * s);
    const cplx v = (w_ * w_ / s) / std::sqrt(2 * kPi * w_ * w_) * std::exp(expo);
    if (want) {
      g[0] = kI * kx_ * v;
      g[1] = -v * dy / (2.0 * s);
      g[2] = -v * dz / (2.0 * s);
    }
    return v;
  }
  Vec3 f_;
  double tf_, w_, kx_, m_, hbar_;
};

class CustomFamily final : public ScalarFamily {
 public:
  CustomFamily(std::string id, int n, int d, std::function<cplx(const Config&, double)> f,
               bool exact)
      : id_(std::move(id)), n_(n), d_(d), f_(std::move(f)), exact_(exact) {}
  std::string id() const override { return id_; }
  int particles() const override { return n_; }
  int dims() const override { return d_; }
  cplx value(const Config& x, double t) const override { return f_(x, t); }
  bool exact_in_time() const override { return exact_; }

 private:
  std::string id_;
  int n_, d_;
  std::function<cplx(const Config&, double)> f_;
  bool exact_;
};

}  // namespace

FamilyPtr plane_wave(const Vec3& k, double mass, double hbar, int dims) {
  require_positive(mass, "mass");
  require_positive(hbar, "hbar");
  require_dims(dims);
  return std::make_shared<PlaneWave>(k, mass, hbar, dims);
}

FamilyPtr gaussian_packet(const Vec3& x0, const Vec3& k0, double sigma0, double mass,
                          double hbar, int dims) {
  require_positive(sigma0, "sigma");
  require_positive(mass, "mass");
  require_positive(hbar, "hbar");
  require_dims(dims);
  return std::make_shared<GaussianPacket>(x0, k0, sigma0, mass, hbar, dims);
}

FamilyPtr harmonic_state(int n, double omega, double mass, double hbar) {
  if (n < 0) throw Error(ErrorCategory::validation, "n", "must be >= 0");
  require_positive(omega, "omega");
  require_positive(mass, "mass");
  require_positive(hbar, "hbar");
  return std::make_shared<HarmonicState>(n, omega, mass, hbar);
}

FamilyPtr decaying_pair(double alpha, double m1, double m2, double hbar, int dims,
                        double prefactor) {
  require_positive(alpha, "alpha");
  require_positive(m1, "m1");
  require_positive(m2, "m2");
  require_positive(hbar, "hbar");
  require_dims(dims);
  return std::make_shared<DecayingPair>(alpha, m1, m2, hbar, dims, prefactor);
}

FamilyPtr post_collapse_wave(const Vec3& a, double alpha, double mass, double hbar,
                             int dims, double offset) {
  require_positive(alpha, "alpha");
  require_positive(mass, "mass");
  require_positive(hbar, "hbar");
  require_dims(dims);
  return std::make_shared<PostCollapseWave>(a, alpha, mass, hbar, dims, offset);
}

FamilyPtr correlated_pair(double sigma, double alpha, double m1, double m2, double hbar,
                          int dims, const Vec3& centre) {
  require_positive(sigma, "sigma");
  require_positive(alpha, "alpha");
  require_positive(m1, "m1");
  require_positive(m2, "m2");
  require_positive(hbar, "hbar");
  require_dims(dims);
  return std::make_shared<CorrelatedPair>(sigma, alpha, m1, m2, hbar, dims, centre);
}

FamilyPtr focusing_gaussian(const Vec3& focus, double t_focus, double waist, double kx,
                            double mass, double hbar) {
  require_positive(waist, "waist");
  require_positive(mass, "mass");
  require_positive(hbar, "hbar");
  return std::make_shared<FocusingGaussian>(focus, t_focus, waist, kx, mass, hbar);
}

FamilyPtr custom_family(std::string id, int particles, int dims,
                        std::function<cplx(const Config&, double)> value,
                        bool exact_in_time) {
  if (particles < 1) throw Error(ErrorCategory::validation, "particles", "must be >= 1");
  require_dims(dims);
  return std::make_shared<CustomFamily>(std::move(id), particles, dims, std::move(value),
                                        exact_in_time);
}

// ---------------------------------------------------------------------------

namespace {

int ipow(int b, int e) {
  int r = 1;
  while (e-- > 0) r *= b;
  return r;
}

void check_masses(const std::vector<double>& m) {
  if (m.empty()) throw Error(ErrorCategory::validation, "masses", "need at least one particle");
  for (double v : m) require_positive(v, "masses");
}

}  // namespace

WaveFunction WaveFunction::parametric(std::vector<Term> terms, std::vector<double> masses,
                                      int spin_dim, double t) {
  check_masses(masses);
  if (terms.empty()) throw Error(ErrorCategory::validation, "terms", "empty superposition");
  if (spin_dim < 1) throw Error(ErrorCategory::validation, "spin_dim", "must be >= 1");
  WaveFunction w;
  if (masses.size() > 4)
    throw Error(ErrorCategory::unsupported, "masses", "at most four particles");
  w.masses_ = std::move(masses);
  w.spin_dim_ = spin_dim;
  w.components_ = ipow(spin_dim, int(w.masses_.size()));
  w.dims_ = terms.front().family->dims();
  for (auto& term : terms) {
    if (!term.family) throw Error(ErrorCategory::validation, "terms", "missing family");
    if (term.family->particles() != int(w.masses_.size()))
      throw Error(ErrorCategory::shape, "terms", "family particle count differs from masses");
    if (term.family->dims() != w.dims_)
      throw Error(ErrorCategory::shape, "terms", "families disagree on spatial dimension");
    if (term.chi.size() == 0) term.chi = Spinor::Ones(1);
    if (term.chi.size() != w.components_)
      throw Error(ErrorCategory::shape, "chi", "spin part length differs from component count");
  }
  w.terms_ = std::move(terms);
  w.t_ = t;
  return w;
}

WaveFunction WaveFunction::scalar(FamilyPtr family, std::vector<double> masses, double t) {
  return parametric({Term{1.0, std::move(family), Spinor::Ones(1)}}, std::move(masses), 1, t);
}

WaveFunction WaveFunction::on_grid(Grid grid, std::vector<double> masses, int spin_dim,
                                   std::vector<cplx> data, double t) {
  check_masses(masses);
  if (int(masses.size()) != grid.particles)
    throw Error(ErrorCategory::shape, "masses", "one mass per grid particle required");
  if (grid.axes() > 6)
    throw Error(ErrorCategory::unsupported, "grid", "at most six configuration axes");
  WaveFunction w;
  w.masses_ = std::move(masses);
  w.spin_dim_ = spin_dim;
  w.components_ = ipow(spin_dim, grid.particles);
  if (data.size() != std::size_t(w.components_) * grid.size())
    throw Error(ErrorCategory::shape, "data", "array length differs from components x points");
  for (const cplx& v : data)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw Error(ErrorCategory::numerical, "data", "non-finite amplitude");
  w.dims_ = grid.dims;
  w.grid_ = std::move(grid);
  w.data_ = std::make_shared<const std::vector<cplx>>(std::move(data));
  w.deriv_ = std::make_shared<DerivCache>();
  w.t_ = t;
  return w;
}

WaveFunction WaveFunction::sample(const WaveFunction& psi, const Grid& grid) {
  if (psi.is_grid()) throw Error(ErrorCategory::unsupported, "psi", "already a grid state");
  if (grid.particles != psi.particles() || grid.dims != psi.dims())
    throw Error(ErrorCategory::shape, "grid", "grid does not match the wavefunction");
  const std::size_t n = grid.size();
  const int nc = psi.components();
  std::vector<cplx> data(n * nc);
  parallel_for(n, [&](std::size_t i) {
    const Spinor v = psi.evaluate(grid.node(i));
    for (int c = 0; c < nc; ++c) data[c * n + i] = v[c];
  });
  return on_grid(grid, psi.masses(), psi.spin_dim(), std::move(data), psi.time());
}

const Grid& WaveFunction::grid() const {
  if (!grid_) throw Error(ErrorCategory::unsupported, "psi", "not a grid state");
  return *grid_;
}

bool WaveFunction::exact_in_time() const {
  if (grid_) return false;
  for (const auto& t : terms_)
    if (!t.family->exact_in_time()) return false;
  return true;
}

WaveFunction WaveFunction::at_time(double t) const {
  if (grid_) throw Error(ErrorCategory::unsupported, "psi", "grid states need a propagator");
  WaveFunction w = *this;
  w.t_ = t;
  return w;
}

WaveFunction WaveFunction::with_data(std::vector<cplx> data, double t) const {
  return on_grid(grid(), masses_, spin_dim_, std::move(data), t);
}

WaveFunction WaveFunction::scaled(cplx f) const {
  if (grid_) {
    std::vector<cplx> d = *data_;
    for (auto& v : d) v *= f;
    return with_data(std::move(d), t_);
  }
  WaveFunction w = *this;
  for (auto& term : w.terms_) term.coef *= f;
  return w;
}

void WaveFunction::check_domain(const Config& x) const {
  if (int(x.size()) != particles())
    throw Error(ErrorCategory::shape, "config", "one position per particle required");
  for (const auto& p : x)
    if (!p.allFinite()) throw Error(ErrorCategory::domain, "config", "non-finite coordinate");
  if (grid_ && !grid_->contains(x)) {
    for (int a = 0; a < grid_->axes(); ++a) {
      const double v = x[a / dims_][a % dims_];
      if (!(v >= grid_->lo[a] && v <= grid_->hi[a]))
        throw Error(ErrorCategory::domain, "axis " + std::to_string(a),
                    "coordinate " + std::to_string(v) + " outside grid");
    }
  }
}

bool WaveFunction::in_domain(const Config& x) const {
  if (int(x.size()) != particles()) return false;
  return !grid_ || grid_->contains(x);
}

int interpolation_stencil(const Grid& g, const Config& x, std::size_t* idx, double* w) {
  const int D = g.axes();
  std::size_t base = 0;
  double frac[12];
  std::size_t strides[12];
  for (int a = 0; a < D; ++a) {
    const double v = x[a / g.dims][a % g.dims];
    if (!(v >= g.lo[a] && v <= g.hi[a]))
      throw Error(ErrorCategory::domain, "axis " + std::to_string(a),
                  "coordinate " + std::to_string(v) + " outside grid");
    const double u = (v - g.lo[a]) / g.spacing(a);
    int i = int(std::floor(u));
    if (i >= g.points[a] - 1) i = g.points[a] - 2;
    if (i < 0) i = 0;
    frac[a] = u - i;
    strides[a] = g.stride(a);
    base += std::size_t(i) * strides[a];
  }
  const int nc = 1 << D;
  for (int c = 0; c < nc; ++c) {
    double wt = 1.0;
    std::size_t off = base;
    for (int a = 0; a < D; ++a) {
      if (c & (1 << a)) {
        wt *= frac[a];
        off += strides[a];
      } else {
        wt *= 1.0 - frac[a];
      }
    }
    idx[c] = off;
    w[c] = wt;
  }
  return nc;
}

Spinor WaveFunction::evaluate(const Config& x) const {
  check_domain(x);
  Spinor out = Spinor::Zero(components_);
  if (grid_) {
    std::size_t idx[64];
    double w[64];
    const int nc = interpolation_stencil(*grid_, x, idx, w);
    const std::size_t n = grid_->size();
    for (int c = 0; c < components_; ++c) {
      cplx s = 0.0;
      for (int k = 0; k < nc; ++k) s += w[k] * (*data_)[c * n + idx[k]];
      out[c] = s;
    }
    return out;
  }
  for (const auto& term : terms_) out += term.coef * term.family->value(x, t_) * term.chi;
  return out;
}

void WaveFunction::evaluate_grad(const Config& x, Spinor& psi, CMat& grad) const {
  check_domain(x);
  const int np = particles();
  psi.setZero(components_);
  grad.setZero(components_, 3 * np);
  if (grid_) {
    std::size_t idx[64];
    double w[64];
    const int nc = interpolation_stencil(*grid_, x, idx, w);
    const std::size_t n = grid_->size();
    for (int c = 0; c < components_; ++c) {
      cplx s = 0.0;
      for (int k = 0; k < nc; ++k) s += w[k] * (*data_)[c * n + idx[k]];
      psi[c] = s;
    }
    for (int a = 0; a < grid_->axes(); ++a) {
      const auto& d = node_derivative(a);
      for (int c = 0; c < components_; ++c) {
        cplx s = 0.0;
        for (int k = 0; k < nc; ++k) s += w[k] * d[c * n + idx[k]];
        grad(c, 3 * (a / dims_) + a % dims_) = s;
      }
    }
    return;
  }
  evaluate_grad_at(x, t_, psi, grad);
}

void WaveFunction::evaluate_grad_at(const Config& x, double t, Spinor& psi, CMat& grad) const {
  if (grid_) throw Error(ErrorCategory::unsupported, "psi", "grid states have a fixed time");
  check_domain(x);
  const int np = particles();
  psi.setZero(components_);
  grad.setZero(components_, 3 * np);
  cplx g[12];
  for (const auto& term : terms_) {
    for (int i = 0; i < 3 * np; ++i) g[i] = 0.0;
    const cplx v = term.family->value_grad(x, t, g);
    psi += term.coef * v * term.chi;
    for (int i = 0; i < 3 * np; ++i)
      if (g[i] != 0.0) grad.col(i) += term.coef * g[i] * term.chi;
  }
}

double WaveFunction::norm() const {
  const Grid& g = grid();
  double s = 0.0;
  for (const cplx& v : *data_) s += std::norm(v);
  return s * g.cell_volume();
}

WaveFunction WaveFunction::normalized() const {
  const double n = norm();
  if (!(n > 0)) throw Error(ErrorCategory::numerical, "psi", "zero norm");
  return scaled(1.0 / std::sqrt(n));
}

void grid_line_derivative(const cplx* f, std::size_t s, int n, double h, cplx* out,
                          std::size_t os) {
  if (n < 5) throw Error(ErrorCategory::shape, "grid", "derivatives need >= 5 points per axis");
  auto F = [&](int i) { return f[std::size_t(i) * s]; };
  const double c2 = 1.0 / (2.0 * h), c4 = 1.0 / (12.0 * h);
  out[0] = (-3.0 * F(0) + 4.0 * F(1) - F(2)) * c2;
  out[os] = (-3.0 * F(1) + 4.0 * F(2) - F(3)) * c2;
  for (int i = 2; i < n - 2; ++i)
    out[std::size_t(i) * os] = (F(i - 2) - 8.0 * F(i - 1) + 8.0 * F(i + 1) - F(i + 2)) * c4;
  out[std::size_t(n - 2) * os] = (3.0 * F(n - 2) - 4.0 * F(n - 3) + F(n - 4)) * c2;
  out[std::size_t(n - 1) * os] = (3.0 * F(n - 1) - 4.0 * F(n - 2) + F(n - 3)) * c2;
}

const std::vector<cplx>& WaveFunction::node_derivative(int axis) const {
  const Grid& g = grid();
  if (axis < 0 || axis >= g.axes()) throw Error(ErrorCategory::shape, "axis", "out of range");
  std::call_once(deriv_->once, [&] {
    const std::size_t n = g.size();
    deriv_->d.assign(g.axes(), std::vector<cplx>(n * components_));
    for (int a = 0; a < g.axes(); ++a) {
      const std::size_t st = g.stride(a);
      const int len = g.points[a];
      const double h = g.spacing(a);
      const std::size_t lines = n / len;
      for (int c = 0; c < components_; ++c) {
        const cplx* src = data_->data() + c * n;
        cplx* dst = deriv_->d[a].data() + c * n;
        parallel_for(lines, [&](std::size_t l) {
          // Start of line l: index with axis-a coordinate zero.
          const std::size_t start = (l / st) * st * len + l % st;
          grid_line_derivative(src + start, st, len, h, dst + start, st);
        });
      }
    }
  });
  return deriv_->d[axis];
}

}  // namespace pilotwave
