#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mcflab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

// Error hierarchy. Every failure the library reports derives from Error so the
// CLI can map it onto an exit code in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateMetricError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DegeneratePlaneError : public Error {
 public:
  using Error::Error;
};

class FrameError : public Error {
 public:
  using Error::Error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class NotAreaDecreasingError : public Error {
 public:
  using Error::Error;
};

// Number of workers for data-parallel loops. MCFLAB_WORKERS caps it.
inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MCFLAB_WORKERS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, static_cast<unsigned>(cap));
  }
  return n;
}

// Runs body(i) for i in [0, n). Each index writes only its own output slot, so
// results are identical for any worker count; reductions happen afterwards in
// index order.
template <class Body>
void parallel_for(int n, Body&& body, int serial_below = 512) {
  const unsigned workers = worker_count();
  if (workers <= 1 || n < serial_below) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  const int chunk = (n + static_cast<int>(workers) - 1) / static_cast<int>(workers);
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const int lo = static_cast<int>(w) * chunk;
    const int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (int i = lo; i < hi; ++i) body(i);
    });
  }
}

// Reduces x into [lo, lo + period).
inline double wrap_periodic(double x, double lo, double period) {
  double r = std::fmod(x - lo, period);
  if (r < 0) r += period;
  return lo + r;
}

// Reduces a coordinate difference into (-period/2, period/2].
inline double wrap_difference(double d, double period) {
  double r = std::fmod(d, period);
  if (r > 0.5 * period) r -= period;
  if (r <= -0.5 * period) r += period;
  return r;
}

}  // namespace mcflab
