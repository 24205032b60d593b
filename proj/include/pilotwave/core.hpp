#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pilotwave {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using Spinor = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// One position per particle.
using Config = std::vector<Vec3>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

enum class ErrorCategory {
  config,       // malformed or unknown configuration
  validation,   // parameter outside its allowed range
  domain,       // evaluation point outside a wavefunction's domain
  shape,        // mismatched dimensions
  physics,      // physically inconsistent input (off-shell momentum, ...)
  stability,    // time step too large
  unsupported,  // requested operation not available for this input
  sampler,      // rejection sampler could not reach a usable acceptance rate
  node,         // density vanishes where a velocity is needed
  numerical,    // invariant violated by a computed quantity
  io,
};

const char* to_string(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory cat, std::string field, const std::string& reason);
  ErrorCategory category() const { return cat_; }
  const std::string& field() const { return field_; }
  const std::string& reason() const { return reason_; }

 private:
  ErrorCategory cat_;
  std::string field_;
  std::string reason_;
};

struct UnitSystem {
  double hbar = 1.0;
  double c = 1.0;
  std::string description = "natural units";

  void validate() const;
};

// Uniform tensor-product grid over the configuration space of `particles`
// particles, each occupying `dims` Cartesian axes. Axis a belongs to particle
// a / dims and coordinate a % dims.
struct Grid {
  int particles = 1;
  int dims = 1;
  std::vector<double> lo, hi;
  std::vector<int> points;

  static Grid make(int particles, int dims, std::vector<double> lo,
                   std::vector<double> hi, std::vector<int> points,
                   std::size_t max_points = std::size_t(1) << 27);

  int axes() const { return particles * dims; }
  double spacing(int a) const { return (hi[a] - lo[a]) / (points[a] - 1); }
  double coord(int a, int i) const { return lo[a] + i * spacing(a); }
  std::size_t size() const;
  std::size_t stride(int a) const;
  double cell_volume() const;
  bool same_as(const Grid& o) const;
  bool contains(const Config& x) const;
  Config node(std::size_t flat) const;
};

// Counter-based generator: every draw is a pure function of (seed, stream,
// counter), so ensemble member k gets the same numbers on any thread count.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream) {}
  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double normal();
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_, stream_, counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Number of worker threads: hardware concurrency capped by PILOTWAVE_THREADS.
int thread_count();

// Calls f(i) for i in [0, n); results must be written by index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace pilotwave
