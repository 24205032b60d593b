#pragma once

#include "pilotwave/fieldmodes.hpp"
#include "pilotwave/guide.hpp"

namespace pilotwave {

// Spin-1/2 packet moving along +x with spin up along z (perpendicular to the
// motion): centre (-4, 0, 0), k0 = 2, sigma0 = 0.3, m = hbar = 1. The
// detector sits at the origin; snapshots cover t in [0, 8].
struct ArrivalBenchmark {
  double x0 = 4.0, k0 = 2.0, sigma0 = 0.3;
  double t_end = 8.0;
  int snapshots = 801;
};

ArrivalResult arrival_benchmark(const ArrivalBenchmark& b, double g);

enum class EquivarianceCase { spin0_gaussian, pauli_eigenstate, decaying_pair, field_mode };
EquivarianceCase parse_equivariance_case(const std::string& s);
const char* to_string(EquivarianceCase c);
std::vector<std::string> equivariance_case_names();

// Fixed states, boxes and check times per case; g only affects the Pauli case.
EquivarianceReport run_equivariance_case(EquivarianceCase c, std::size_t n, std::uint64_t seed,
                                         double g = 0.5);

// Two oscillator eigenstates (n = 0, 1) of V = x^2 / 2 measured through a
// pointer kick of +-coupling; weight is |c_1|^2.
BranchingSpec two_channel_measurement(double weight_first);

}  // namespace pilotwave
