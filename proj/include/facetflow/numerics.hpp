#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace facetflow {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest exact decimal representation (round-trips through strtod).
std::string format_double(double v);

// Deterministic uniform source. std::uniform_real_distribution is
// implementation-defined, so draws are built from raw engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t index(std::uint64_t n) {
    return std::uint64_t(uniform() * double(n)) % n;
  }

 private:
  std::mt19937_64 engine_;
};

// Solves a cyclic tridiagonal system via Sherman-Morrison.
// Row i reads lower[i]*x[i-1] + diag[i]*x[i] + upper[i]*x[i+1] = rhs[i]
// with indices mod n (lower[0] and upper[n-1] are the corner couplings).
std::vector<double> solve_cyclic_tridiagonal(std::span<const double> lower,
                                             std::span<const double> diag,
                                             std::span<const double> upper,
                                             std::span<const double> rhs);

// Bracketed root solve (Brent). f(lo) and f(hi) must have opposite signs.
double brent_root(const std::function<double(double)>& f, double lo, double hi,
                  double xtol, int max_iter = 200);

struct OdeControl {
  double rtol = 1e-10;
  double atol = 1e-13;
  double max_step = std::numeric_limits<double>::infinity();
};

// Dormand-Prince 5(4) with PI step control. After every accepted step the
// callback sees (t_prev, t_now, y_now); returning false stops the run with
// the state left at the accepted point.
void integrate_adaptive(
    const std::function<void(double, std::span<const double>, std::span<double>)>& rhs,
    double& t, std::vector<double>& y, double t_end, const OdeControl& ctrl,
    const std::function<bool(double, double, const std::vector<double>&)>& on_accept = {});

}  // namespace facetflow
