#pragma once

#include "pilotwave/evolve.hpp"

#include <memory>

namespace pilotwave {

struct BeableConfig {
  Config positions;
  double t = 0.0;
};

struct Ensemble {
  std::vector<BeableConfig> members;
  std::uint64_t seed = 0;
};

enum class TrajStatus { ok, node_encounter, exited };
const char* to_string(TrajStatus s);

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<Config> configs;
  TrajStatus status = TrajStatus::ok;
};

enum class VelStatus { ok, node, exited };

// Beable velocity dx_k/dt for every particle.
class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual int particles() const = 0;
  virtual VelStatus velocity(const Config& x, double t, Config& v) const = 0;
};

// v = j / rho from a wavefunction. Parametric states are evaluated at the
// requested time; grid states only at their own time. Below
// rho_floor_rel * rho_ref the point counts as a node.
class WaveVelocity final : public VelocityField {
 public:
  WaveVelocity(WaveFunction psi, SpinSpec spin, const EmPotential* em = nullptr,
               double rho_ref = 0.0, double velocity_scale = 1.0);
  int particles() const override { return psi_.particles(); }
  VelStatus velocity(const Config& x, double t, Config& v) const override;

 private:
  WaveFunction psi_;
  SpinSpec spin_;
  const EmPotential* em_;
  double floor_;
  double scale_;
};

// Velocity from node currents of a time-ordered list of grid snapshots,
// with rho and j interpolated multilinearly in space and linearly in time.
class SnapshotVelocity final : public VelocityField {
 public:
  explicit SnapshotVelocity(std::vector<std::shared_ptr<const NodeCurrents>> snaps,
                            double velocity_scale = 1.0);
  int particles() const override { return snaps_.front()->grid.particles; }
  VelStatus velocity(const Config& x, double t, Config& v) const override;

 private:
  std::vector<std::shared_ptr<const NodeCurrents>> snaps_;
  double scale_;
  double floor_;
};

class ClosedFormVelocity final : public VelocityField {
 public:
  using Fn = std::function<VelStatus(const Config&, double, Config&)>;
  ClosedFormVelocity(int particles, Fn f) : n_(particles), f_(std::move(f)) {}
  int particles() const override { return n_; }
  VelStatus velocity(const Config& x, double t, Config& v) const override { return f_(x, t, v); }

 private:
  int n_;
  Fn f_;
};

inline constexpr double kRhoFloorRel = 1e-12;

struct IntegrationControls {
  double dt = 1e-2;        // RK4 step (shortened uniformly to land on t_final)
  int record_every = 1;    // store every k-th step (the final point always)
  // Optional extra domain test; false marks the trajectory exited.
  std::function<bool(const Config&)> inside;
};

TrajectoryRecord integrate_trajectory(const BeableConfig& start, const VelocityField& field,
                                      double t_final, const IntegrationControls& controls);

std::vector<TrajectoryRecord> integrate_ensemble(const Ensemble& ens,
                                                 const VelocityField& field, double t_final,
                                                 const IntegrationControls& controls);

// Box over the active axes of the configuration (particles * dims values,
// particle-major). Needed for non-Gaussian parametric states.
struct SamplerOptions {
  std::vector<double> lo, hi;
  int lattice = 0;  // lattice points per axis; 0 picks a default
};

// n draws from |psi|^2 by rejection sampling: a widened Gaussian envelope for
// exactly Gaussian states, a lattice-cell envelope otherwise.
Ensemble sample_equilibrium(const WaveFunction& psi, std::size_t n, std::uint64_t seed,
                            const SamplerOptions* opts = nullptr);

// Ensemble members at each checkpoint of a grid co-propagation, plus the
// wavefunction snapshots taken there.
struct CoPropagation {
  std::vector<double> times;
  std::vector<std::vector<Config>> positions;  // [checkpoint][member]
  std::vector<TrajStatus> status;              // per member
  std::vector<WaveFunction> snapshots;         // per checkpoint
};

// Advances psi with the split-step propagator and the ensemble along the
// resulting node currents, keeping only two snapshots in memory.
// snapshot_stride propagator steps separate velocity snapshots; substeps RK4
// steps are taken per snapshot interval.
CoPropagation copropagate(const Ensemble& ens, const WaveFunction& psi0, const Propagator& prop,
                          const std::vector<double>& checkpoints, int snapshot_stride = 1,
                          int substeps = 4, double velocity_scale = 1.0);

struct KsResult {
  double t = 0.0;
  int axis = 0;
  double statistic = 0.0;
  double critical = 0.0;
  bool pass = false;
};

struct EquivarianceReport {
  std::vector<KsResult> tests;
  double max_ratio = 0.0;  // largest statistic / critical value
  bool pass = true;
  long lost = 0;           // members stopped at nodes or domain exits
};

struct EquivarianceOptions {
  std::vector<double> t_checks;
  std::uint64_t seed = 1;
  SamplerOptions box;        // sampling and quadrature box (parametric states)
  int quad_points = 0;       // quadrature nodes per axis; 0 picks a default
  double rk_dt = 1e-2;       // RK4 step for parametric states
  int snapshot_stride = 1;   // grid states, see copropagate
  int substeps = 4;
  double velocity_scale = 1.0;  // != 1 deliberately corrupts the dynamics
  const EmPotential* em = nullptr;
};

// Kolmogorov-Smirnov 1% critical value for sample size n.
double ks_critical_1pct(std::size_t n);

// Samples |psi0|^2, moves the ensemble with the guidance law while psi is
// propagated, and compares each axis' empirical CDF at every check time with
// the quadrature marginal of |psi(t)|^2.
EquivarianceReport equivariance_check(const WaveFunction& psi0, const Propagator& prop,
                                      std::size_t n, const EquivarianceOptions& opts);

// KS statistic of samples against a CDF tabulated on increasing nodes.
double ks_statistic(std::vector<double> samples, const std::vector<double>& nodes,
                    const std::vector<double>& cdf);

struct ArrivalResult {
  std::vector<double> times;
  std::vector<double> flux;  // |j| at the detector
  double mean = 0.0;
  double quad_error = 0.0;   // |mean - mean using every other snapshot|
  double total = 0.0;        // integral of |j| dt
};

// Flux-weighted mean arrival time at a point, trapezoid rule over the
// snapshot times.
ArrivalResult arrival_time_stats(const std::vector<WaveFunction>& snapshots,
                                 const Config& detector, const SpinSpec& spin);

struct BranchingSpec {
  std::vector<cplx> coefs;             // c_k
  std::vector<FamilyPtr> states;       // orthonormal 1-D system states phi_k
  std::vector<double> eigenvalues;     // a_k of the measured observable
  std::function<double(double)> system_potential;  // keeps phi_k stationary
  double coupling = 3.0;               // pointer momentum kick per unit a
  double pointer_width = 1.0;
  double mass = 1.0;
  double hbar = 1.0;
  double x_lo = -8, x_hi = 8;
  int x_points = 64;
  double y_lo = -32, y_hi = 32;
  int y_points = 256;
  double dt = 1e-2;
  double t_readout = 4.0;
  double max_overlap = 1e-6;
};

struct BranchingResult {
  std::vector<double> fractions;
  std::vector<double> born;  // ||branch_k||^2 at readout
  std::vector<long> counts;
  long unassigned = 0;
  double overlap = 0.0;      // largest normalized inter-branch overlap
  std::size_t n = 0;
};

// Von Neumann measurement: the pointer coordinate y receives a momentum kick
// coupling * a_k in branch k. Beables drawn from the coupled state are
// guided on the (x, y) grid until readout and assigned to the branch with
// the largest |psi_k|^2 at their final position.
BranchingResult measurement_branching(const BranchingSpec& spec, std::size_t n,
                                      std::uint64_t seed);

}  // namespace pilotwave
