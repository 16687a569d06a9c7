#pragma once

// Design space description and Latin hypercube sampling (uniform and
// normal-marginal variants) used to seed optimizers and surrogates.

#include <mobo/core.hpp>

#include <algorithm>
#include <numeric>

namespace mobo {

/// Axis-aligned box of admissible designs.
struct DesignSpace {
  Vector lower;
  Vector upper;

  Index dim() const { return lower.size(); }

  void validate() const {
    if (lower.size() != upper.size())
      throw dimension_error("DesignSpace: lower/upper size mismatch");
    if (lower.size() == 0)
      throw config_error("DesignSpace: dimension must be positive");
    for (Index i = 0; i < lower.size(); ++i) {
      if (!(lower[i] < upper[i]))
        throw config_error("DesignSpace: lower must be strictly below upper "
                           "in every dimension");
    }
  }

  /// Affine map of a unit-box point into this space.
  Vector denormalize(const Vector& u) const {
    return lower.array() + u.array() * (upper - lower).array();
  }

  /// Affine map of a point of this space into the unit box.
  Vector normalize(const Vector& x) const {
    return (x - lower).array() / (upper - lower).array();
  }
};

namespace detail {

/// One LHS column: a random permutation of strata plus intra-stratum jitter,
/// as CDF-space values in (0, 1).  Each dimension draws from its own child
/// stream so adding dimensions never perturbs earlier columns.
inline std::vector<double> lhs_column(Index n, Rng& rng) {
  std::vector<std::uint32_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0u);
  rng.shuffle(perm);
  std::vector<double> p(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < p.size(); ++i) {
    double jitter = rng.uniform_open();
    p[i] = (static_cast<double>(perm[i]) + jitter) / static_cast<double>(n);
  }
  return p;
}

}  // namespace detail

/// Latin hypercube sample with uniform marginals: one point per stratum per
/// dimension, strata permuted independently across dimensions.  Returns an
/// n x d matrix of designs (rows are points).
inline Matrix lhs_uniform(const DesignSpace& space, Index n,
                          std::uint64_t seed) {
  space.validate();
  if (n < 1) throw config_error("lhs_uniform: n must be >= 1");
  const Index d = space.dim();
  Matrix X(n, d);
  Rng base(seed);
  for (Index j = 0; j < d; ++j) {
    Rng col_rng = base.split(static_cast<std::uint64_t>(j));
    std::vector<double> p = detail::lhs_column(n, col_rng);
    for (Index i = 0; i < n; ++i) {
      X(i, j) = space.lower[j] + p[static_cast<std::size_t>(i)] *
                                     (space.upper[j] - space.lower[j]);
    }
  }
  return X;
}

/// Latin hypercube sample with (censored) normal marginals: strata are laid
/// out in CDF space of a normal centred at the box midpoint with
/// sigma = range / 6, i.e. the +-3 sigma points sit on the bounds.  Draws
/// beyond the bounds (|z| > 3, about 0.27% of mass) are clamped.
inline Matrix lhs_normal(const DesignSpace& space, Index n,
                         std::uint64_t seed) {
  space.validate();
  if (n < 1) throw config_error("lhs_normal: n must be >= 1");
  const Index d = space.dim();
  Matrix X(n, d);
  Rng base(seed);
  for (Index j = 0; j < d; ++j) {
    Rng col_rng = base.split(static_cast<std::uint64_t>(j));
    std::vector<double> p = detail::lhs_column(n, col_rng);
    const double mid = 0.5 * (space.lower[j] + space.upper[j]);
    const double sigma = (space.upper[j] - space.lower[j]) / 6.0;
    for (Index i = 0; i < n; ++i) {
      double z = normal_ppf(p[static_cast<std::size_t>(i)]);
      double x = mid + sigma * z;
      X(i, j) = std::clamp(x, space.lower[j], space.upper[j]);
    }
  }
  return X;
}

}  // namespace mobo
