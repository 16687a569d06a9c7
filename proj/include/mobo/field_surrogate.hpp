#pragma once

// Reduced-order surrogate of a spatial constraint field: POD compresses the
// snapshot matrix, one GP per retained mode learns the reduced coordinate as
// a function of the design variables, and predictions are lifted back to the
// full field.  Feasibility statistics follow the critical-station rule.

#include <mobo/core.hpp>
#include <mobo/gp.hpp>
#include <mobo/pod.hpp>

#include <utility>
#include <vector>

namespace mobo {

/// Feasibility summary of a predicted constraint field against its limit.
struct FeasibilityStat {
  /// Probability that the critical station respects the limit.
  double prob_feasible = 0.0;
  /// Index of the critical station (largest predicted mean; ties resolve to
  /// the lowest index).
  Index critical_station = 0;
  double critical_mean = 0.0;
  double critical_std = 0.0;
};

/// POD + per-mode GP surrogate of one constraint field.
class FieldSurrogate {
 public:
  /// Predictive mean and variance of the full field at one design.
  /// var_j = sum_i L_ji^2 var(a_i) since the modes are fixed vectors.
  std::pair<Vector, Vector> predict_field(const Vector& x) const {
    const Index m = basis_.n_modes();
    Vector mu(m), var(m);
    for (Index i = 0; i < m; ++i) {
      auto [mi, vi] = models_[static_cast<std::size_t>(i)].predict_one(x);
      mu[i] = mi;
      var[i] = vi;
    }
    Vector mean = basis_.modes * mu;
    Vector field_var =
        (basis_.modes.array().square().matrix() * var).cwiseMax(0.0);
    return {mean, field_var};
  }

  /// Critical-station feasibility statistic at one design: the station with
  /// the largest predicted mean is checked against the limit.
  FeasibilityStat feasibility_stat(const Vector& x) const {
    auto [mean, var] = predict_field(x);
    FeasibilityStat st;
    st.critical_mean = mean.maxCoeff(&st.critical_station);
    st.critical_std = std::max(
        std::sqrt(std::max(var[st.critical_station], 0.0)), 1e-9);
    st.prob_feasible =
        normal_cdf((limit_ - st.critical_mean) / st.critical_std);
    return st;
  }

  /// Batched feasibility statistics for query rows; one column of output
  /// per statistic consumer.  Vectorized across the whole batch: per-mode
  /// GP predictions are batched, then lifted through the basis with two
  /// matrix products.
  std::vector<FeasibilityStat> feasibility_stats(const Matrix& query) const {
    const Index m = basis_.n_modes();
    const Index q = query.rows();
    Matrix mu(m, q), var(m, q);
    for (Index i = 0; i < m; ++i) {
      auto [mi, vi] = models_[static_cast<std::size_t>(i)].predict(query);
      mu.row(i) = mi.transpose();
      var.row(i) = vi.transpose();
    }
    Matrix mean_fields = basis_.modes * mu;                    // N_h x q
    Matrix var_fields =
        basis_.modes.array().square().matrix() * var;          // N_h x q
    std::vector<FeasibilityStat> out(static_cast<std::size_t>(q));
    for (Index j = 0; j < q; ++j) {
      FeasibilityStat st;
      st.critical_mean = mean_fields.col(j).maxCoeff(&st.critical_station);
      st.critical_std = std::max(
          std::sqrt(std::max(var_fields(st.critical_station, j), 0.0)), 1e-9);
      st.prob_feasible =
          normal_cdf((limit_ - st.critical_mean) / st.critical_std);
      out[static_cast<std::size_t>(j)] = st;
    }
    return out;
  }

  const PodBasis& basis() const { return basis_; }
  const std::vector<GpModel>& coefficient_models() const { return models_; }
  double limit() const { return limit_; }
  Index field_size() const { return basis_.field_size(); }

 private:
  friend FieldSurrogate fit_field_surrogate(const DesignSpace&, const Matrix&,
                                            const Matrix&, double, double,
                                            const GpConfig&);
  PodBasis basis_;
  std::vector<GpModel> models_;
  double limit_ = 0.0;
};

/// Fit a field surrogate: `fields` holds one snapshot column per design row
/// of X (field_size x n layout).  `limit` is the feasibility limit shared by
/// all stations of this field.
inline FieldSurrogate fit_field_surrogate(const DesignSpace& space,
                                          const Matrix& X,
                                          const Matrix& fields, double eps2,
                                          double limit,
                                          const GpConfig& gp_config) {
  if (fields.cols() != X.rows())
    throw dimension_error("fit_field_surrogate: one snapshot column per "
                          "design row required");
  FieldSurrogate s;
  s.basis_ = compute_pod(fields, eps2);
  s.limit_ = limit;
  s.models_.reserve(static_cast<std::size_t>(s.basis_.n_modes()));
  for (Index i = 0; i < s.basis_.n_modes(); ++i) {
    Vector target = s.basis_.coefficients.row(i).transpose();
    // Decorrelate the per-mode optimizer seeds; fits stay deterministic.
    GpConfig cfg = gp_config;
    cfg.seed = gp_config.seed + static_cast<std::uint64_t>(i) * 7919u;
    s.models_.push_back(fit_gp(space, X, target, cfg));
  }
  return s;
}

}  // namespace mobo
