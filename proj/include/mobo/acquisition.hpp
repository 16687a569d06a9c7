#pragma once

// Acquisition functions for constrained multi-objective Bayesian
// optimization: expected improvement, probability of feasibility, Pareto
// utilities, and exact bi-objective hypervolume / expected hypervolume
// improvement (all in minimization orientation unless stated otherwise).

#include <mobo/core.hpp>

#include <algorithm>
#include <vector>

namespace mobo {

/// A scalar Gaussian prediction.
struct GaussPred {
  double mean = 0.0;
  double std = 0.0;
};

/// Expected improvement over the incumbent best (minimization):
/// EI = (f_best - mu) Phi(z) + sigma phi(z), z = (f_best - mu) / sigma.
/// A vanishing sigma degenerates to the deterministic improvement.
inline double expected_improvement(const GaussPred& pred, double best) {
  if (!(pred.std > 1e-12)) return std::max(best - pred.mean, 0.0);
  const double z = (best - pred.mean) / pred.std;
  return (best - pred.mean) * normal_cdf(z) + pred.std * normal_pdf(z);
}

/// Probability that every constraint prediction lies below its limit,
/// assuming independent Gaussians (stds floored at 1e-9).
inline double probability_of_feasibility(const std::vector<GaussPred>& preds,
                                         const Vector& limits) {
  if (static_cast<Index>(preds.size()) != limits.size())
    throw dimension_error("probability_of_feasibility: one limit per "
                          "prediction required");
  double p = 1.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double s = std::max(preds[i].std, 1e-9);
    p *= normal_cdf((limits[static_cast<Index>(i)] - preds[i].mean) / s);
  }
  return p;
}

/// Constrained EI: expected improvement gated by feasibility probability.
inline double constrained_ei(const GaussPred& pred, double best,
                             double prob_feasible) {
  return expected_improvement(pred, best) * prob_feasible;
}

enum class Sense { minimize, maximize };

/// Pareto dominance of a over b.
inline bool dominates(const Vector& a, const Vector& b, Sense sense) {
  if (a.size() != b.size())
    throw dimension_error("dominates: dimension mismatch");
  bool strict = false;
  for (Index i = 0; i < a.size(); ++i) {
    const double ai = sense == Sense::minimize ? a[i] : -a[i];
    const double bi = sense == Sense::minimize ? b[i] : -b[i];
    if (ai > bi) return false;
    if (ai < bi) strict = true;
  }
  return strict;
}

/// A mutually non-dominated set of objective points with the designs that
/// produced them (matching row order).
struct ParetoSet {
  Matrix points;   // n x n_f
  Matrix designs;  // n x d
  Index size() const { return points.rows(); }
};

/// Extract the non-dominated subset of (points, designs) rows.  Duplicated
/// points are kept once (first occurrence wins).
inline ParetoSet pareto_filter(const Matrix& points, const Matrix& designs,
                               Sense sense) {
  if (points.rows() != designs.rows())
    throw dimension_error("pareto_filter: points/designs row mismatch");
  const Index n = points.rows();
  std::vector<Index> keep;
  for (Index i = 0; i < n; ++i) {
    bool drop = false;
    for (Index j = 0; j < n && !drop; ++j) {
      if (j == i) continue;
      if (dominates(points.row(j).transpose(), points.row(i).transpose(),
                    sense))
        drop = true;
      // Exact duplicates: keep only the first occurrence.
      if (j < i && (points.row(j) - points.row(i)).lpNorm<Eigen::Infinity>() ==
                       0.0)
        drop = true;
    }
    if (!drop) keep.push_back(i);
  }
  ParetoSet out;
  out.points.resize(static_cast<Index>(keep.size()), points.cols());
  out.designs.resize(static_cast<Index>(keep.size()), designs.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.points.row(static_cast<Index>(k)) = points.row(keep[k]);
    out.designs.row(static_cast<Index>(k)) = designs.row(keep[k]);
  }
  return out;
}

namespace detail {

/// Staircase of a bi-objective front: points clamped to the reference box,
/// sorted ascending in f1, filtered to strictly decreasing f2.  Dominated or
/// out-of-reference points drop out naturally.
inline std::vector<std::pair<double, double>> staircase_2d(
    const Matrix& front, const Vector& ref) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(static_cast<std::size_t>(front.rows()));
  for (Index i = 0; i < front.rows(); ++i) {
    const double f1 = front(i, 0), f2 = front(i, 1);
    if (f1 >= ref[0] || f2 >= ref[1]) continue;  // no volume contribution
    pts.emplace_back(f1, f2);
  }
  std::sort(pts.begin(), pts.end());
  std::vector<std::pair<double, double>> stair;
  double best_f2 = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    if (p.second < best_f2) {
      stair.push_back(p);
      best_f2 = p.second;
    }
  }
  return stair;
}

/// psi(u; mu, sigma) = E[(u - Y)^+] for Y ~ N(mu, sigma^2)
///                   = sigma (z Phi(z) + phi(z)), z = (u - mu)/sigma.
/// Equivalently the integral of the CDF: int_{-inf}^{u} Phi((t-mu)/sigma) dt.
inline double psi_integral(double u, double mean, double std) {
  if (!(std > 1e-12)) return std::max(u - mean, 0.0);
  const double z = (u - mean) / std;
  return std * (z * normal_cdf(z) + normal_pdf(z));
}

}  // namespace detail

/// Exact hypervolume dominated by a bi-objective front relative to the
/// reference point (minimization).  Points beyond the reference contribute
/// nothing; dominated input points are tolerated.
inline double hypervolume(const Matrix& front, const Vector& ref) {
  if (ref.size() != 2 || (front.rows() > 0 && front.cols() != 2))
    throw config_error("hypervolume: exact computation implemented for two "
                       "objectives");
  auto stair = detail::staircase_2d(front, ref);
  double hv = 0.0;
  for (std::size_t k = 0; k < stair.size(); ++k) {
    const double next_f1 = (k + 1 < stair.size()) ? stair[k + 1].first : ref[0];
    hv += (next_f1 - stair[k].first) * (ref[1] - stair[k].second);
  }
  return hv;
}

/// Hypervolume improvement of adding `point` to `front` (zero when the
/// point is dominated or beyond the reference).
inline double hypervolume_improvement(const Matrix& front, const Vector& point,
                                      const Vector& ref) {
  if (point.size() != 2)
    throw config_error("hypervolume_improvement: two objectives required");
  Matrix extended(front.rows() + 1, 2);
  if (front.rows() > 0) extended.topRows(front.rows()) = front;
  extended.row(front.rows()) = point.transpose();
  return std::max(hypervolume(extended, ref) - hypervolume(front, ref), 0.0);
}

/// Exact bi-objective expected hypervolume improvement (minimization) of an
/// independent Gaussian prediction against a front and reference point.
///
/// Derivation: EHVI = int over the improvement region of P(Y <= t) dt
/// (Fubini on the indicator that t becomes dominated by Y).  Splitting the
/// t1 axis at the staircase abscissae makes the admissible t2 range constant
/// per stripe, so each stripe factorizes into two 1-D CDF integrals.
inline double ehvi(const GaussPred& pred1, const GaussPred& pred2,
                   const Matrix& front, const Vector& ref) {
  if (ref.size() != 2 || (front.rows() > 0 && front.cols() != 2))
    throw config_error("ehvi: exact computation implemented for two "
                       "objectives");
  auto stair = detail::staircase_2d(front, ref);
  const std::size_t n = stair.size();
  double total = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double hi1 = (k < n) ? stair[k].first : ref[0];
    const double lo1_psi =
        (k == 0) ? 0.0 : detail::psi_integral(stair[k - 1].first, pred1.mean,
                                              pred1.std);
    const double width = detail::psi_integral(hi1, pred1.mean, pred1.std) -
                         lo1_psi;
    if (width <= 0.0) continue;
    const double u2 = (k == 0) ? ref[1] : std::min(stair[k - 1].second, ref[1]);
    total += width * detail::psi_integral(u2, pred2.mean, pred2.std);
  }
  return total;
}

/// Constrained EHVI: EHVI gated by feasibility probability.
inline double constrained_ehvi(const GaussPred& pred1, const GaussPred& pred2,
                               const Matrix& front, const Vector& ref,
                               double prob_feasible) {
  return ehvi(pred1, pred2, front, ref) * prob_feasible;
}

}  // namespace mobo
