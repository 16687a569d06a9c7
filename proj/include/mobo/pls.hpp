#pragma once

// Partial least squares (PLS1, NIPALS with deflation).  Used to build the
// supervised input rotation that the KPLS kernel folds into its distance
// metric, shrinking the number of length-scale hyperparameters from d to h.

#include <mobo/core.hpp>

namespace mobo {

/// Result of a PLS1 fit on centred data.
struct PlsRotation {
  /// Weight vectors W, d x h, unit columns.
  Matrix weights;
  /// X-loadings P, d x h.
  Matrix loadings;
  /// Rotation W* = W (P^T W)^{-1}, d x h; columns map inputs to scores:
  /// T = (X - mean) W*.
  Matrix rotation;
  /// Column means removed from X before fitting.
  Vector x_mean;
  /// Mean removed from y before fitting.
  double y_mean = 0.0;

  Index n_components() const { return rotation.cols(); }
};

/// Fit a PLS1 model with (up to) h components.  X is n x d, y length n.
/// Components whose remaining covariance or score energy vanishes are
/// dropped, so the returned rotation may hold fewer than h columns.
///
/// Sign convention: in each weight column the entry of largest magnitude is
/// made positive (scores and loadings are flipped consistently), so the
/// decomposition is unique and reproducible across runs.
inline PlsRotation fit_pls(const Matrix& X, const Vector& y, Index h) {
  const Index n = X.rows();
  const Index d = X.cols();
  if (y.size() != n)
    throw dimension_error("fit_pls: X rows and y length differ");
  if (n < 2) throw degenerate_input_error("fit_pls: need at least 2 rows");
  if (h < 1 || h > d)
    throw config_error("fit_pls: component count must satisfy 1 <= h <= d");

  PlsRotation out;
  out.x_mean = X.colwise().mean();
  out.y_mean = y.mean();

  Matrix Xk = X.rowwise() - out.x_mean.transpose();
  Vector yk = y.array() - out.y_mean;

  const double y_scale = yk.norm();
  if (!(y_scale > 1e-14 * std::max(1.0, std::abs(out.y_mean))))
    throw degenerate_input_error("fit_pls: y has (near) zero variance");

  Matrix W(d, h), P(d, h);
  Index k = 0;
  for (; k < h; ++k) {
    Vector w = Xk.transpose() * yk;
    const double w_norm = w.norm();
    // Covariance exhausted: stop with the components found so far.
    if (!(w_norm > 1e-12 * y_scale * std::max(1.0, Xk.norm()))) break;
    w /= w_norm;

    // Deterministic sign: largest-magnitude weight entry positive.
    Index max_idx = 0;
    w.cwiseAbs().maxCoeff(&max_idx);
    if (w[max_idx] < 0.0) w = -w;

    Vector t = Xk * w;
    const double tt = t.squaredNorm();
    if (!(tt > 0.0)) break;

    Vector p = Xk.transpose() * t / tt;
    const double c = yk.dot(t) / tt;

    W.col(k) = w;
    P.col(k) = p;
    Xk.noalias() -= t * p.transpose();
    yk -= c * t;
  }
  if (k == 0)
    throw degenerate_input_error("fit_pls: no usable component (X and y "
                                 "uncorrelated or X constant)");

  out.weights = W.leftCols(k);
  out.loadings = P.leftCols(k);

  // W* = W (P^T W)^{-1}.  For PLS1/NIPALS P^T W is unit-diagonal upper
  // triangular, hence invertible; guard the solve anyway.
  Matrix PtW = out.loadings.transpose() * out.weights;
  Eigen::FullPivLU<Matrix> lu(PtW);
  if (!lu.isInvertible())
    throw numerical_error("fit_pls: loadings^T weights is singular; reduce "
                          "the component count h");
  out.rotation = out.weights * lu.inverse();
  return out;
}

}  // namespace mobo
