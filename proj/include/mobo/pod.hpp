#pragma once

// Proper orthogonal decomposition of snapshot matrices: truncated SVD basis
// with an energy-based mode count, plus projection/reconstruction helpers.

#include <mobo/core.hpp>

#include <Eigen/SVD>

namespace mobo {

/// Truncated POD basis of a snapshot matrix Y (field size x snapshot count).
struct PodBasis {
  /// Left singular vectors kept, field_size x n_modes, orthonormal columns.
  Matrix modes;
  /// All singular values of Y (not just the kept ones), descending.
  Vector singular_values;
  /// Reduced coordinates of the training snapshots, n_modes x n_snapshots.
  Matrix coefficients;
  /// The energy tolerance eps^2 used to choose the rank.
  double energy_tolerance = 0.0;

  Index n_modes() const { return modes.cols(); }
  Index field_size() const { return modes.rows(); }
};

/// Compute the POD basis of `snapshots` keeping the smallest number of modes
/// m such that sum_{i<=m} sigma_i^2 / sum_i sigma_i^2 > 1 - eps2.
inline PodBasis compute_pod(const Matrix& snapshots, double eps2) {
  if (snapshots.rows() == 0 || snapshots.cols() == 0)
    throw dimension_error("compute_pod: empty snapshot matrix");
  if (!(eps2 > 0.0 && eps2 < 1.0))
    throw config_error("compute_pod: eps2 must lie in (0, 1)");

  Eigen::BDCSVD<Matrix> svd(snapshots, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  const double total_energy = sv.array().square().sum();
  if (!(total_energy > 0.0))
    throw degenerate_input_error("compute_pod: snapshot matrix has zero "
                                 "energy (all entries zero)");

  const double target = (1.0 - eps2) * total_energy;
  Index m = 0;
  double cumulative = 0.0;
  while (m < sv.size()) {
    cumulative += sv[m] * sv[m];
    ++m;
    if (cumulative > target) break;
  }

  PodBasis basis;
  basis.modes = svd.matrixU().leftCols(m);
  basis.singular_values = sv;
  basis.coefficients = basis.modes.transpose() * snapshots;
  basis.energy_tolerance = eps2;
  return basis;
}

/// Reduced coordinates of a full-order field: a = L^T y.
inline Vector project(const PodBasis& basis, const Vector& field) {
  if (field.size() != basis.field_size())
    throw dimension_error("project: field size does not match basis");
  return basis.modes.transpose() * field;
}

/// Full-order reconstruction from reduced coordinates: y = L a.
inline Vector reconstruct(const PodBasis& basis, const Vector& coeffs) {
  if (coeffs.size() != basis.n_modes())
    throw dimension_error("reconstruct: coefficient size does not match "
                          "basis");
  return basis.modes * coeffs;
}

}  // namespace mobo
