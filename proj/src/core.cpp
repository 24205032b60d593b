#include "pilotwave/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace pilotwave {

const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::physics: return "physics";
    case ErrorCategory::stability: return "stability";
    case ErrorCategory::unsupported: return "unsupported";
    case ErrorCategory::sampler: return "sampler";
    case ErrorCategory::node: return "node";
    case ErrorCategory::numerical: return "numerical";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCategory cat, std::string field, const std::string& reason)
    : std::runtime_error(std::string(to_string(cat)) + ": " +
                         (field.empty() ? "" : field + ": ") + reason),
      cat_(cat),
      field_(std::move(field)),
      reason_(reason) {}

void UnitSystem::validate() const {
  if (!(hbar > 0) || !std::isfinite(hbar))
    throw Error(ErrorCategory::validation, "hbar", "must be positive");
  if (!(c > 0) || !std::isfinite(c))
    throw Error(ErrorCategory::validation, "c", "must be positive");
}

Grid Grid::make(int particles, int dims, std::vector<double> lo,
                std::vector<double> hi, std::vector<int> points,
                std::size_t max_points) {
  if (particles < 1)
    throw Error(ErrorCategory::validation, "particles", "must be >= 1");
  if (dims < 1 || dims > 3)
    throw Error(ErrorCategory::validation, "dims", "must be 1, 2 or 3");
  const std::size_t na = std::size_t(particles) * dims;
  if (lo.size() != na || hi.size() != na || points.size() != na)
    throw Error(ErrorCategory::shape, "grid", "one extent and count per axis required");
  double total = 1.0;
  for (std::size_t a = 0; a < na; ++a) {
    if (points[a] < 2)
      throw Error(ErrorCategory::validation, "points", "need at least 2 points per axis");
    if (!(hi[a] > lo[a]))
      throw Error(ErrorCategory::validation, "extents", "max must exceed min");
    total *= points[a];
  }
  if (total > double(max_points))
    throw Error(ErrorCategory::validation, "points", "grid exceeds the memory budget");
  Grid g;
  g.particles = particles;
  g.dims = dims;
  g.lo = std::move(lo);
  g.hi = std::move(hi);
  g.points = std::move(points);
  return g;
}

std::size_t Grid::size() const {
  std::size_t n = 1;
  for (int p : points) n *= std::size_t(p);
  return n;
}

std::size_t Grid::stride(int a) const {
  std::size_t s = 1;
  for (int b = axes() - 1; b > a; --b) s *= std::size_t(points[b]);
  return s;
}

double Grid::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < axes(); ++a) v *= spacing(a);
  return v;
}

bool Grid::same_as(const Grid& o) const {
  return particles == o.particles && dims == o.dims && lo == o.lo &&
         hi == o.hi && points == o.points;
}

bool Grid::contains(const Config& x) const {
  if (int(x.size()) != particles) return false;
  for (int a = 0; a < axes(); ++a) {
    const double v = x[a / dims][a % dims];
    if (!(v >= lo[a] && v <= hi[a])) return false;
  }
  return true;
}

Config Grid::node(std::size_t flat) const {
  Config x(particles, Vec3::Zero());
  for (int a = axes() - 1; a >= 0; --a) {
    const int i = int(flat % points[a]);
    flat /= points[a];
    x[a / dims][a % dims] = coord(a, i);
  }
  return x;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t CounterRng::next_u64() {
  const std::uint64_t key = splitmix64(seed_ ^ splitmix64(stream_ + 0x632be59bd9b4e019ULL));
  return splitmix64(key + 0x9e3779b97f4a7c15ULL * (++counter_));
}

double CounterRng::uniform() {
  return double(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * kPi * u2);
  have_spare_ = true;
  return r * std::cos(2.0 * kPi * u2);
}

int thread_count() {
  int n = int(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("PILOTWAVE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f) {
  const std::size_t nt = std::min<std::size_t>(thread_count(), n);
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
        next = n;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nt; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace pilotwave
