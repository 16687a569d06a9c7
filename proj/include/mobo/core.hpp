#pragma once

// Core aliases, error types, deterministic RNG, and scalar normal-distribution
// helpers shared by every other header in the library.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mobo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Invalid or inconsistent configuration supplied by the caller.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mismatched sizes between related arguments.
struct dimension_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Structurally valid input whose content defeats the algorithm
/// (all-zero snapshot matrix, constant targets where variation is required,
/// duplicate training rows, ...).
struct degenerate_input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure that survived the built-in safeguards
/// (e.g. a Cholesky factorization that still fails at maximum jitter).
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// SplitMix64 step; used to derive well-separated child seeds from a base
/// seed.  This is the standard finalizer from Vigna's splitmix64.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double normal_ppf(double p);  // forward declaration (defined below)

/// Deterministic random generator.  All stochastic code in the library draws
/// through this wrapper so that a run is reproducible bit-for-bit from its
/// seed on a given build.  `split` derives an independent stream per
/// sub-task (e.g. per LHS dimension) so that adding streams does not perturb
/// existing ones.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(initial_state(seed)) {}

  /// Independent child stream; children with different ids never share a
  /// sequence with each other or with the parent.
  Rng split(std::uint64_t stream_id) const {
    std::uint64_t s = seed_ ^ (0x9E3779B97F4A7C15ull * (stream_id + 1));
    return Rng(s);
  }

  /// Uniform double in [0, 1), built from the top 53 bits of the engine
  /// output (avoids distribution-object implementation differences).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in the open interval (0, 1); safe as a CDF argument.
  double uniform_open() {
    double u = uniform();
    return u > 0.0 ? u : 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n <= 1) {
      if (n == 0) throw config_error("uniform_int: n must be positive");
      return 0;
    }
    // Rejection sampling on the masked low bits keeps the draw exactly
    // uniform.
    std::uint64_t mask = n - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    std::uint64_t v;
    do {
      v = engine_() & mask;
    } while (v >= n);
    return v;
  }

  /// Standard normal draw via the inverse CDF (deterministic, no cached
  /// spare value to keep state simple).
  double normal() { return normal_ppf(uniform_open()); }

  /// In-place Fisher-Yates shuffle (stable across standard libraries,
  /// unlike std::shuffle whose sequence of engine calls is unspecified).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t initial_state(std::uint64_t seed) {
    std::uint64_t s = seed;
    return splitmix64(s);
  }

  std::uint64_t seed_ = 0;
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Normal distribution scalars
// ---------------------------------------------------------------------------

inline double normal_pdf(double z) {
  static const double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z * 0.7071067811865475244008444);
}

/// Inverse standard normal CDF.  Acklam's rational approximation refined by
/// one Halley step, giving ~1e-15 relative accuracy over (0, 1).
inline double normal_ppf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw config_error("normal_ppf: p must lie in [0, 1]");
  }
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement against the accurate erfc-based CDF.
  double e = normal_cdf(x) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

}  // namespace mobo
