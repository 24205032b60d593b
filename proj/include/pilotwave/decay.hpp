#pragma once

#include "pilotwave/guide.hpp"

namespace pilotwave {

struct DecayPairSpec {
  double alpha = 1.0;  // initial relative spread: Var(x1 - x2) = hbar alpha per axis
  double m1 = 1.0, m2 = 1.0;
  double hbar = 1.0;

  double mu() const { return m1 * m2 / (m1 + m2); }
  double M() const { return m1 + m2; }
  void validate() const;
};

// Pair wave with sharp total momentum zero,
// (pi hbar / A)^{3/2} exp(-(x1 - x2)^2 / 4 hbar A), A = alpha + i t / 2 mu.
cplx pair_wavefunction(const DecayPairSpec& s, const Vec3& x1, const Vec3& x2, double t);

// x1(t) = X + (m2/M) r0 s(t)/alpha, x2(t) = X - (m1/M) r0 s(t)/alpha with
// s(t) = sqrt(t^2/4mu^2 + alpha^2), X the mass-weighted centre and r0 the
// initial separation.
struct PairClosedForm {
  Vec3 centre, r0;
  DecayPairSpec spec;
  Config at(double t) const;
  double scale(double t) const;  // s(t) / alpha
};

PairClosedForm pair_closed_form(const DecayPairSpec& s, const Config& start);

struct PairTrajectoryResult {
  TrajectoryRecord numeric;
  std::vector<Config> closed;     // closed form at numeric.times
  double max_rel_error = 0.0;     // max |x_num - x_cf| / max(|x_cf|, |r0|)
  double max_centre_drift = 0.0;  // max |m1 x1 + m2 x2 - const|
  double max_direction_drift = 0.0;
  double max_momentum_balance = 0.0;  // max |m1 v1 + m2 v2| / |v1| at recorded steps
};

PairTrajectoryResult pair_trajectories(const DecayPairSpec& s, const Config& start,
                                       double t_final, double dt);

// Real, inversion-symmetric centre-of-mass momentum amplitude f(P) per axis;
// the relative part of F does not enter Var(m1 x1 + m2 x2).
struct VarianceModel {
  double var_P = 0.0;   // Var(p1 + p2) per axis
  double var_MX0 = 0.0; // Var(m1 x1 + m2 x2) at t = 0 per axis
  double at(double t) const { return var_MX0 + var_P * t * t; }
};

VarianceModel variance_evolution(const std::function<double(double)>& f_cm, double m1,
                                 double m2, double hbar, double P_max, int points = 4001);

// Var(m1 x1 + m2 x2) of an equilibrium sample of the Gaussian pair with
// amplitude exp(-P^2/sigma - alpha p^2/hbar) at time t (one axis).
double variance_monte_carlo(double sigma, double alpha, double m1, double m2, double hbar,
                            double t, std::size_t n, std::uint64_t seed);

// Distance R = L0^2 k and time T = L0^2 k / c where the source-size and
// momentum-spread contributions to the transverse deviation are equal.
double transition_distance(double L0, double k);
double transition_time(double L0, double k, double c);
double compton_wavenumber(double mass, double c, double hbar);
double beam_wavenumber(double wavelength);
// tan(theta) ~ L0 m / (p t) for small t and ~ dP / p for large t.
double angle_small_t(double L0, double m, double p, double t);
double angle_large_t(double dP, double p);

// For each row x1 of a 1-D x1/x2 grid, the x2 maximizing |psi|^2 of the
// Gaussian pair at time t; reports the largest distance of that maximum
// from m1 x1 + m2 x2 = 0 in grid cells (rows with x1 inside +-extent/2).
double peak_locus_offset_cells(double sigma, double alpha, double m1, double m2, double hbar,
                               double t, double extent, int points);

struct LensSpec {
  double f = 1.0, S = 2.0, Sp = 2.0;
  // Any two of f, S, S' (NaN marks the missing one); with all three the
  // thin-lens equation must hold to 1e-12.
  static LensSpec make(double f, double S, double Sp);
};

struct ImagingSpec {
  DecayPairSpec pair;
  double sigma = 1e-2;   // centre-of-mass spread: Var(X) = hbar^2 / sigma per axis
  LensSpec lens;
  double waist = 0.5;    // post-lens waist
  Vec3 a_perp = Vec3::Zero();  // detection point transverse offset (y, z)
  double aperture = std::numeric_limits<double>::infinity();
  double dt = 1e-2;
  int record_every = 10;
};

struct ImagingRun {
  TrajectoryRecord beable1, beable2;
  Vec3 decay_point = Vec3::Zero();
  double t_detect = 0.0, t_lens = 0.0, t_focus = 0.0;
  bool lens_before_detection = false;
  double chord_deviation = 0.0;  // beable 2 before the lens, relative to path length
};

struct ImagingResult {
  std::vector<ImagingRun> runs;
  Vec3 detection_point = Vec3::Zero();
  Vec3 expected_focus = Vec3::Zero();  // -(S'/S) a_perp on the image plane
  Vec3 mean_endpoint = Vec3::Zero();
  double rms_spread = 0.0;
  double max_chord_deviation = 0.0;
  long exited = 0;
};

// Decay midway between the lens plane x = -S/2 and the detector plane
// x = +S/2. Per run: decay point and separation conditioned on particle 1
// reaching a = (S/2, a_perp); phase 1 pair wave until that detection, phase 2
// the partner wave centred on a, phase 3 a Gaussian converging to waist w at
// -(S'/S) a_perp a distance S' behind the lens. Member k uses random stream k,
// so runs with different waists share their draws.
ImagingResult imaging_trajectories(const ImagingSpec& s, std::size_t n, std::uint64_t seed);

struct EnergyShell {
  double a_plus = 0.0, a_minus = 0.0;  // units of 1 / lambda_c
  double g(double x) const;            // x in units of lambda_c
  double g0() const { return 0.5 * (a_plus * a_plus - a_minus * a_minus); }
};

// a = 2 pi sqrt(2 mu E) / hbar in units of 1/lambda_c, lambda_c = h / (m c),
// for E_+ = eplus m c^2 and E_- = eminus m c^2; mu_over_m = mu / m.
EnergyShell energy_shell(double eplus, double eminus, double mu_over_m = 0.5);

// x and g(x)^2 on [0, x_max] (units of lambda_c).
std::vector<std::array<double, 2>> energy_shell_curve(const EnergyShell& e, double x_max,
                                                      int points);

// Share of int_0^x_max g^2 dx (plain) and of int_0^x_max g^2 x^2 dx (radial)
// lying below x_inner, by the trapezoid rule on 200001 points.
struct ShellWeights {
  double plain = 0.0, radial = 0.0;
};
ShellWeights shell_weights(const EnergyShell& e, double x_max, double x_inner);

}  // namespace pilotwave
