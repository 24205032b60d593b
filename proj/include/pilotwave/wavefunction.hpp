#pragma once

#include "pilotwave/core.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace pilotwave {

// Mean and covariance of a Gaussian configuration-space density over the
// active axes (particles * dims, particle-major).
struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Closed-form scalar amplitude psi(x_1..x_N, t). Families that are exact
// solutions of the free (or stated) Schrodinger equation report
// exact_in_time() so the analytic propagator may advance them.
class ScalarFamily {
 public:
  virtual ~ScalarFamily() = default;
  virtual std::string id() const = 0;
  virtual int particles() const = 0;
  virtual int dims() const = 0;
  virtual cplx value(const Config& x, double t) const = 0;
  // Writes d psi / d x_{k,a} to grad[3k + a] for a < dims(); the caller
  // zeroes the buffer. Default: fourth-order central differences.
  virtual cplx value_grad(const Config& x, double t, cplx* grad) const;
  virtual bool exact_in_time() const { return true; }
  virtual std::optional<GaussianMoments> gaussian_density(double) const {
    return std::nullopt;
  }
};

using FamilyPtr = std::shared_ptr<const ScalarFamily>;

// e^{i(k.x - hbar k^2 t / 2m)}
FamilyPtr plane_wave(const Vec3& k, double mass, double hbar, int dims);

// Normalized free Gaussian packet: centre x0, mean wavenumber k0, initial
// position spread sigma0 per axis.
FamilyPtr gaussian_packet(const Vec3& x0, const Vec3& k0, double sigma0,
                          double mass, double hbar, int dims);

// Stationary state n of the 1-D oscillator with frequency omega.
FamilyPtr harmonic_state(int n, double omega, double mass, double hbar);

// N (pi hbar / A)^{d/2} exp(-(x1 - x2)^2 / 4 hbar A), A = alpha + i t / 2 mu.
FamilyPtr decaying_pair(double alpha, double m1, double m2, double hbar,
                        int dims, double prefactor = 1.0);

// Partner wave after particle one is found at a:
// (pi hbar / A)^{d/2} exp(-(a - x)^2 / 4 hbar A), A = alpha + i t / 2 m + i offset.
FamilyPtr post_collapse_wave(const Vec3& a, double alpha, double mass,
                             double hbar, int dims, double offset = 0.0);

// Normalized pair from the momentum amplitude exp(-P^2/sigma - alpha p^2/hbar)
// with P = p1 + p2 and p the relative momentum: a centre-of-mass packet of
// spread hbar/sqrt(sigma) times the relative wave of decaying_pair.
FamilyPtr correlated_pair(double sigma, double alpha, double m1, double m2,
                          double hbar, int dims, const Vec3& centre = Vec3::Zero());

// 3-D wave moving along +x with wavenumber kx (negative for -x) whose
// transverse (y, z) profile is a free Gaussian reaching waist w at t_focus,
// centred on (focus.y, focus.z).
FamilyPtr focusing_gaussian(const Vec3& focus, double t_focus, double waist,
                            double kx, double mass, double hbar);

// User-supplied amplitude. Without an exact time rule the analytic
// propagator refuses it.
FamilyPtr custom_family(std::string id, int particles, int dims,
                        std::function<cplx(const Config&, double)> value,
                        bool exact_in_time = false);

// Normalized Hermite functions h_0..h_nmax at x, written to out[0..nmax].
void hermite_functions(int nmax, double x, double* out);

struct Term {
  cplx coef{1.0, 0.0};
  FamilyPtr family;
  Spinor chi;  // constant spin part, length = components
};

// Multi-component amplitude over the configuration space, either a
// superposition of closed-form terms or samples on a Grid. Immutable.
class WaveFunction {
 public:
  static WaveFunction parametric(std::vector<Term> terms,
                                 std::vector<double> masses, int spin_dim = 1,
                                 double t = 0.0);
  static WaveFunction scalar(FamilyPtr family, std::vector<double> masses,
                             double t = 0.0);
  // data layout: component-major, data[c * grid.size() + point].
  static WaveFunction on_grid(Grid grid, std::vector<double> masses,
                              int spin_dim, std::vector<cplx> data,
                              double t = 0.0);
  // Samples a parametric wavefunction on the nodes of a grid.
  static WaveFunction sample(const WaveFunction& psi, const Grid& grid);

  bool is_grid() const { return grid_.has_value(); }
  int spin_dim() const { return spin_dim_; }
  int components() const { return components_; }
  int particles() const { return int(masses_.size()); }
  int dims() const { return dims_; }
  double time() const { return t_; }
  const std::vector<double>& masses() const { return masses_; }
  const std::vector<Term>& terms() const { return terms_; }
  const Grid& grid() const;
  const std::vector<cplx>& data() const { return *data_; }

  bool exact_in_time() const;
  // Same closed form at another time (parametric only).
  WaveFunction at_time(double t) const;
  WaveFunction with_data(std::vector<cplx> data, double t) const;
  WaveFunction scaled(cplx factor) const;

  Spinor evaluate(const Config& x) const;
  // psi and grad(c, 3k + a) = d psi_c / d x_{k,a}.
  void evaluate_grad(const Config& x, Spinor& psi, CMat& grad) const;
  // Parametric only: the same closed form evaluated at time t.
  void evaluate_grad_at(const Config& x, double t, Spinor& psi, CMat& grad) const;
  bool in_domain(const Config& x) const;

  // Grid only: integral of psi^dagger psi (cell-sum rule) and normalized copy.
  double norm() const;
  WaveFunction normalized() const;
  // Grid only: node derivative of every component along an axis, same
  // layout as data(). Computed once and cached.
  const std::vector<cplx>& node_derivative(int axis) const;

 private:
  WaveFunction() = default;
  void check_domain(const Config& x) const;

  std::vector<Term> terms_;
  std::optional<Grid> grid_;
  std::shared_ptr<const std::vector<cplx>> data_;
  struct DerivCache {
    std::once_flag once;
    std::vector<std::vector<cplx>> d;
  };
  std::shared_ptr<DerivCache> deriv_;
  std::vector<double> masses_;
  int spin_dim_ = 1;
  int components_ = 1;
  int dims_ = 3;
  double t_ = 0.0;
};

// Derivative of one grid line: fourth-order central differences inside,
// second-order one-sided at the two outermost nodes on each end.
void grid_line_derivative(const cplx* f, std::size_t stride, int n, double h,
                          cplx* out, std::size_t out_stride);

// Multilinear interpolation weights for x on grid g: fills corner flat
// indices and weights (2^axes entries). Throws a domain error outside.
int interpolation_stencil(const Grid& g, const Config& x, std::size_t* idx,
                          double* w);

}  // namespace pilotwave
