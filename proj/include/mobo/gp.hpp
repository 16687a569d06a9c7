#pragma once

// Gaussian process regression with a separable (product-form) Matern 5/2
// kernel, optionally in its KPLS variant where a supervised PLS rotation
// shrinks the number of length-scale hyperparameters from d to h.
// Hyperparameters are fitted by multi-start quasi-Newton maximization of the
// log marginal likelihood with analytic gradients.

#include <mobo/core.hpp>
#include <mobo/pls.hpp>
#include <mobo/sampling.hpp>

#include <Eigen/Cholesky>

#include <optional>
#include <utility>

namespace mobo {

/// Kernel hyperparameters.  `inv_lengthscales` holds theta, one entry per
/// kernel component: d entries for the plain anisotropic kernel, h entries
/// for the KPLS kernel.  Larger theta means shorter correlation length.
struct Hyperparameters {
  double signal_variance = 1.0;
  Vector inv_lengthscales;
  double noise_variance = 1e-10;
};

namespace detail {

inline constexpr double kSqrt5 = 2.23606797749978969640917;

/// One-dimensional Matern 5/2 factor g(r) * exp(-sqrt5 r) with r = theta|dx|.
inline double matern52_factor(double r) {
  return (1.0 + kSqrt5 * r + (5.0 / 3.0) * r * r) * std::exp(-kSqrt5 * r);
}

}  // namespace detail

/// Separable Matern 5/2 kernel: product over input dimensions of 1-D Matern
/// 5/2 correlations, scaled by the signal variance.
inline double kernel_matern52(const Vector& x1, const Vector& x2,
                              const Hyperparameters& hyper) {
  const Index d = x1.size();
  if (x2.size() != d)
    throw dimension_error("kernel_matern52: point dimensions differ");
  if (hyper.inv_lengthscales.size() != d)
    throw dimension_error("kernel_matern52: need one inv_lengthscale per "
                          "input dimension");
  double prod = 1.0;
  for (Index i = 0; i < d; ++i) {
    const double r = hyper.inv_lengthscales[i] * std::abs(x1[i] - x2[i]);
    prod *= detail::matern52_factor(r);
  }
  return hyper.signal_variance * prod;
}

/// KPLS Matern 5/2 kernel: the product runs over (component, dimension)
/// pairs with r = theta_l * |w*_{il} (x1_i - x2_i)|, so only h thetas remain.
/// With the identity rotation (h = d) this reduces exactly to
/// kernel_matern52, since zero-weight factors contribute 1.
inline double kernel_kpls(const Vector& x1, const Vector& x2,
                          const Hyperparameters& hyper,
                          const Matrix& rotation) {
  const Index d = x1.size();
  const Index h = rotation.cols();
  if (x2.size() != d)
    throw dimension_error("kernel_kpls: point dimensions differ");
  if (rotation.rows() != d)
    throw dimension_error("kernel_kpls: rotation rows must match input "
                          "dimension");
  if (hyper.inv_lengthscales.size() != h)
    throw dimension_error("kernel_kpls: need one inv_lengthscale per PLS "
                          "component");
  double prod = 1.0;
  for (Index l = 0; l < h; ++l) {
    const double theta = hyper.inv_lengthscales[l];
    for (Index i = 0; i < d; ++i) {
      const double r = theta * std::abs(rotation(i, l) * (x1[i] - x2[i]));
      prod *= detail::matern52_factor(r);
    }
  }
  return hyper.signal_variance * prod;
}

namespace detail {

/// Which (dimension, weight) pairs each kernel component touches.  The plain
/// kernel is component l -> {(l, 1)}; the KPLS kernel is component
/// l -> {(i, |w*_{il}|) : w*_{il} != 0}.  Sharing this structure lets one
/// engine serve both kernels, and keeps the plain kernel at d factors
/// instead of d*h.
struct KernelStructure {
  std::vector<std::vector<std::pair<Index, double>>> components;
  Index input_dim = 0;

  Index n_components() const {
    return static_cast<Index>(components.size());
  }

  static KernelStructure plain(Index d) {
    KernelStructure s;
    s.input_dim = d;
    s.components.resize(static_cast<std::size_t>(d));
    for (Index i = 0; i < d; ++i)
      s.components[static_cast<std::size_t>(i)] = {{i, 1.0}};
    return s;
  }

  static KernelStructure from_rotation(const Matrix& rotation) {
    KernelStructure s;
    s.input_dim = rotation.rows();
    s.components.resize(static_cast<std::size_t>(rotation.cols()));
    for (Index l = 0; l < rotation.cols(); ++l) {
      auto& comp = s.components[static_cast<std::size_t>(l)];
      for (Index i = 0; i < rotation.rows(); ++i) {
        const double a = std::abs(rotation(i, l));
        if (a > 0.0) comp.emplace_back(i, a);
      }
    }
    return s;
  }
};

/// Batched kernel evaluation on a fixed training set: covariance matrix,
/// log-marginal-likelihood with analytic gradient, and cross-covariance
/// against query points.  Per-dimension |dx| matrices are precomputed once
/// so repeated evaluations during hyperparameter optimization stay cheap.
class KernelEngine {
 public:
  KernelEngine(Matrix x_normalized, KernelStructure structure)
      : X_(std::move(x_normalized)), s_(std::move(structure)) {
    const Index n = X_.rows();
    dim_slot_.assign(static_cast<std::size_t>(s_.input_dim), -1);
    for (const auto& comp : s_.components) {
      for (const auto& [dim, weight] : comp) {
        (void)weight;
        auto& slot = dim_slot_[static_cast<std::size_t>(dim)];
        if (slot < 0) slot = n_used_++;
      }
    }
    // Flattened (slot, weight) pairs per component so the hot loops run over
    // two contiguous arrays instead of nested vectors of pairs.
    comp_begin_.push_back(0);
    for (const auto& comp : s_.components) {
      for (const auto& [dim, weight] : comp) {
        pair_slot_.push_back(dim_slot_[static_cast<std::size_t>(dim)]);
        pair_weight_.push_back(weight);
      }
      comp_begin_.push_back(static_cast<Index>(pair_slot_.size()));
    }
    // Row-major copy of the used columns (slot order), and packed per-entry
    // |dx| rows for the strict lower triangle of the training set, so the
    // covariance and gradient passes read contiguous memory.
    xrow_.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n_used_),
                 0.0);
    for (Index dim = 0; dim < s_.input_dim; ++dim) {
      const Index slot = dim_slot_[static_cast<std::size_t>(dim)];
      if (slot < 0) continue;
      for (Index a = 0; a < n; ++a)
        xrow_[static_cast<std::size_t>(a * n_used_ + slot)] = X_(a, dim);
    }
    tri_.assign(static_cast<std::size_t>(n * (n - 1) / 2) *
                    static_cast<std::size_t>(n_used_),
                0.0);
    std::size_t e = 0;
    for (Index a = 1; a < n; ++a) {
      const double* xa = xrow_.data() + a * n_used_;
      for (Index b = 0; b < a; ++b, ++e) {
        const double* xb = xrow_.data() + b * n_used_;
        double* out = tri_.data() + e * static_cast<std::size_t>(n_used_);
        for (Index s = 0; s < n_used_; ++s) out[s] = std::abs(xa[s] - xb[s]);
      }
    }
  }

  Index n() const { return X_.rows(); }
  const KernelStructure& structure() const { return s_; }

  /// Noise-free covariance matrix K_ff at the given hyperparameters.  The
  /// kernel over one entry is sf2 * prod g(r) * exp(-sqrt5 * sum r) with
  /// g(r) = 1 + sqrt5 r + 5/3 r^2 and r = theta_l * w * |dx|, so each entry
  /// is one pass over the component pairs plus a single exp.  Entries are
  /// processed four at a time: the running product is a serial dependency
  /// chain, so independent per-entry chains are what keep the pipeline full.
  /// Each entry's own operation order is unchanged.
  Matrix covariance(const Hyperparameters& hyper) const {
    const Index n = X_.rows();
    const double sf2 = hyper.signal_variance;
    const std::vector<double> cq = scaled_weights(hyper);
    const std::size_t nq = cq.size();
    const Index* ps = pair_slot_.data();
    const std::size_t u = static_cast<std::size_t>(n_used_);
    Matrix K(n, n);
    const std::size_t total = static_cast<std::size_t>(n * (n - 1) / 2);
    Index a = 1, b = 0;
    auto emit = [&](double k) {
      K(a, b) = k;
      K(b, a) = k;
      if (++b == a) {
        ++a;
        b = 0;
      }
    };
    std::size_t e = 0;
    for (; e + 4 <= total; e += 4) {
      const double* t0 = tri_.data() + (e + 0) * u;
      const double* t1 = tri_.data() + (e + 1) * u;
      const double* t2 = tri_.data() + (e + 2) * u;
      const double* t3 = tri_.data() + (e + 3) * u;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      double p0 = 1.0, p1 = 1.0, p2 = 1.0, p3 = 1.0;
      for (std::size_t q = 0; q < nq; ++q) {
        const double c = cq[q];
        const Index s = ps[q];
        const double r0 = c * t0[s];
        const double r1 = c * t1[s];
        const double r2 = c * t2[s];
        const double r3 = c * t3[s];
        s0 += r0;
        s1 += r1;
        s2 += r2;
        s3 += r3;
        p0 *= 1.0 + kSqrt5 * r0 + (5.0 / 3.0) * (r0 * r0);
        p1 *= 1.0 + kSqrt5 * r1 + (5.0 / 3.0) * (r1 * r1);
        p2 *= 1.0 + kSqrt5 * r2 + (5.0 / 3.0) * (r2 * r2);
        p3 *= 1.0 + kSqrt5 * r3 + (5.0 / 3.0) * (r3 * r3);
      }
      emit(sf2 * p0 * std::exp(-kSqrt5 * s0));
      emit(sf2 * p1 * std::exp(-kSqrt5 * s1));
      emit(sf2 * p2 * std::exp(-kSqrt5 * s2));
      emit(sf2 * p3 * std::exp(-kSqrt5 * s3));
    }
    for (; e < total; ++e) {
      const double* dx = tri_.data() + e * u;
      double sum_r = 0.0, poly = 1.0;
      for (std::size_t q = 0; q < nq; ++q) {
        const double r = cq[q] * dx[ps[q]];
        sum_r += r;
        poly *= 1.0 + kSqrt5 * r + (5.0 / 3.0) * (r * r);
      }
      emit(sf2 * poly * std::exp(-kSqrt5 * sum_r));
    }
    K.diagonal().setConstant(sf2);
    return K;
  }

  /// Cross covariance K(X_train, X_query), m query rows.
  Matrix cross_covariance(const Hyperparameters& hyper,
                          const Matrix& query) const {
    const Index n = X_.rows();
    const Index m = query.rows();
    const double sf2 = hyper.signal_variance;
    const std::vector<double> cq = scaled_weights(hyper);
    const std::size_t nq = cq.size();
    const Index* ps = pair_slot_.data();
    Matrix K(n, m);
    std::vector<double> qs(static_cast<std::size_t>(n_used_), 0.0);
    for (Index j = 0; j < m; ++j) {
      for (Index dim = 0; dim < s_.input_dim; ++dim) {
        const Index slot = dim_slot_[static_cast<std::size_t>(dim)];
        if (slot >= 0) qs[static_cast<std::size_t>(slot)] = query(j, dim);
      }
      Index a = 0;
      for (; a + 4 <= n; a += 4) {
        const double* x0 = xrow_.data() + (a + 0) * n_used_;
        const double* x1 = xrow_.data() + (a + 1) * n_used_;
        const double* x2 = xrow_.data() + (a + 2) * n_used_;
        const double* x3 = xrow_.data() + (a + 3) * n_used_;
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        double p0 = 1.0, p1 = 1.0, p2 = 1.0, p3 = 1.0;
        for (std::size_t q = 0; q < nq; ++q) {
          const double c = cq[q];
          const Index s = ps[q];
          const double qv = qs[static_cast<std::size_t>(s)];
          const double r0 = c * std::abs(x0[s] - qv);
          const double r1 = c * std::abs(x1[s] - qv);
          const double r2 = c * std::abs(x2[s] - qv);
          const double r3 = c * std::abs(x3[s] - qv);
          s0 += r0;
          s1 += r1;
          s2 += r2;
          s3 += r3;
          p0 *= 1.0 + kSqrt5 * r0 + (5.0 / 3.0) * (r0 * r0);
          p1 *= 1.0 + kSqrt5 * r1 + (5.0 / 3.0) * (r1 * r1);
          p2 *= 1.0 + kSqrt5 * r2 + (5.0 / 3.0) * (r2 * r2);
          p3 *= 1.0 + kSqrt5 * r3 + (5.0 / 3.0) * (r3 * r3);
        }
        K(a + 0, j) = sf2 * p0 * std::exp(-kSqrt5 * s0);
        K(a + 1, j) = sf2 * p1 * std::exp(-kSqrt5 * s1);
        K(a + 2, j) = sf2 * p2 * std::exp(-kSqrt5 * s2);
        K(a + 3, j) = sf2 * p3 * std::exp(-kSqrt5 * s3);
      }
      for (; a < n; ++a) {
        const double* xa = xrow_.data() + a * n_used_;
        double sum_r = 0.0, poly = 1.0;
        for (std::size_t q = 0; q < nq; ++q) {
          const Index s = ps[q];
          const double r =
              cq[q] * std::abs(xa[s] - qs[static_cast<std::size_t>(s)]);
          sum_r += r;
          poly *= 1.0 + kSqrt5 * r + (5.0 / 3.0) * (r * r);
        }
        K(a, j) = sf2 * poly * std::exp(-kSqrt5 * sum_r);
      }
    }
    return K;
  }

  struct Factorization {
    Eigen::LLT<Matrix> llt;
    Matrix k_ff;        // noise-free covariance
    double jitter = 0;  // extra diagonal added beyond the noise variance
  };

  /// Cholesky of K_ff + (noise + jitter) I with jitter escalation: starting
  /// from zero extra jitter, failures escalate through 1e-10 .. 1e-6 by
  /// factors of 10 before giving up.
  Factorization factorize(const Hyperparameters& hyper) const {
    Factorization fact;
    fact.k_ff = covariance(hyper);
    double jitter = 0.0;
    for (;;) {
      Matrix K = fact.k_ff;
      K.diagonal().array() += hyper.noise_variance + jitter;
      fact.llt.compute(K);
      if (fact.llt.info() == Eigen::Success) {
        fact.jitter = jitter;
        return fact;
      }
      if (jitter >= 1e-6)
        throw numerical_error("gp: covariance factorization failed even at "
                              "maximum jitter 1e-6");
      jitter = (jitter == 0.0) ? 1e-10 : jitter * 10.0;
    }
  }

  struct Evaluation {
    double lml = 0.0;
    Vector grad;  // w.r.t. [log sf2, log theta_1..h, log sn2]
    double jitter = 0.0;
  };

  /// Log marginal likelihood value only; fills `fact` and `alpha` so a
  /// gradient pass at the same hyperparameters can reuse the factorization.
  double value(const Hyperparameters& hyper, const Vector& y,
               Factorization& fact, Vector& alpha) const {
    fact = factorize(hyper);
    alpha = fact.llt.solve(y);
    const double log_det =
        2.0 * fact.llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * y.dot(alpha) - 0.5 * log_det -
           0.5 * static_cast<double>(X_.rows()) * std::log(2.0 * M_PI);
  }

  /// LML gradient w.r.t. [log sf2, log theta_1..h, log sn2], given the
  /// factorization and alpha produced by `value` at the same
  /// hyperparameters.  dL/dparam = 0.5 tr((alpha alpha^T - K^{-1}) dK/dparam).
  Vector gradient(const Hyperparameters& hyper, const Factorization& fact,
                  const Vector& alpha) const {
    const Index n = X_.rows();
    const Index h = s_.n_components();
    Matrix k_inv = fact.llt.solve(Matrix::Identity(n, n));

    // With WK = (alpha alpha^T - K^{-1}) .* K_ff:
    //   dL/dlog sf2    = 0.5 sum(WK),
    //   dL/dlog th_l   = -(5/6) sum(WK .* S_l),
    //     S_l = sum_i u/g,  u = r^2 (1 + sqrt5 r),  g = 1 + sqrt5 r + 5/3 r^2,
    // because d/dlog th of [log g(r) - sqrt5 r] simplifies to -(5/3) u / g.
    // S_l keeps a running numerator/denominator so each component costs one
    // division; the diagonal has r = 0 and adds nothing to the theta terms.
    // Entries run four at a time (independent recurrence chains), with each
    // entry's own operation order unchanged.
    double sum_wk = 0.0;
    for (Index i = 0; i < n; ++i)
      sum_wk += (alpha[i] * alpha[i] - k_inv(i, i)) * fact.k_ff(i, i);
    Vector acc = Vector::Zero(h);
    const std::vector<double> cq = scaled_weights(hyper);
    const Index* ps = pair_slot_.data();
    const std::size_t su = static_cast<std::size_t>(n_used_);
    const std::size_t total = static_cast<std::size_t>(n * (n - 1) / 2);
    Index a = 1, b = 0;
    auto advance = [&] {
      if (++b == a) {
        ++a;
        b = 0;
      }
    };
    auto wk_at = [&]() {
      return 2.0 * (alpha[a] * alpha[b] - k_inv(a, b)) * fact.k_ff(a, b);
    };
    std::size_t e = 0;
    for (; e + 4 <= total; e += 4) {
      const double w0 = wk_at();
      advance();
      const double w1 = wk_at();
      advance();
      const double w2 = wk_at();
      advance();
      const double w3 = wk_at();
      advance();
      sum_wk += w0;
      sum_wk += w1;
      sum_wk += w2;
      sum_wk += w3;
      const double* t0 = tri_.data() + (e + 0) * su;
      const double* t1 = tri_.data() + (e + 1) * su;
      const double* t2 = tri_.data() + (e + 2) * su;
      const double* t3 = tri_.data() + (e + 3) * su;
      for (Index l = 0; l < h; ++l) {
        double n0 = 0.0, n1 = 0.0, n2 = 0.0, n3 = 0.0;
        double d0 = 1.0, d1 = 1.0, d2 = 1.0, d3 = 1.0;
        for (Index q = comp_begin_[static_cast<std::size_t>(l)];
             q < comp_begin_[static_cast<std::size_t>(l) + 1]; ++q) {
          const double c = cq[static_cast<std::size_t>(q)];
          const Index s = ps[q];
          const double r0 = c * t0[s];
          const double r1 = c * t1[s];
          const double r2 = c * t2[s];
          const double r3 = c * t3[s];
          const double u0 = r0 * r0 * (1.0 + kSqrt5 * r0);
          const double u1 = r1 * r1 * (1.0 + kSqrt5 * r1);
          const double u2 = r2 * r2 * (1.0 + kSqrt5 * r2);
          const double u3 = r3 * r3 * (1.0 + kSqrt5 * r3);
          const double g0 = 1.0 + kSqrt5 * r0 + (5.0 / 3.0) * (r0 * r0);
          const double g1 = 1.0 + kSqrt5 * r1 + (5.0 / 3.0) * (r1 * r1);
          const double g2 = 1.0 + kSqrt5 * r2 + (5.0 / 3.0) * (r2 * r2);
          const double g3 = 1.0 + kSqrt5 * r3 + (5.0 / 3.0) * (r3 * r3);
          n0 = n0 * g0 + u0 * d0;
          d0 *= g0;
          n1 = n1 * g1 + u1 * d1;
          d1 *= g1;
          n2 = n2 * g2 + u2 * d2;
          d2 *= g2;
          n3 = n3 * g3 + u3 * d3;
          d3 *= g3;
        }
        acc[l] += w0 * (n0 / d0);
        acc[l] += w1 * (n1 / d1);
        acc[l] += w2 * (n2 / d2);
        acc[l] += w3 * (n3 / d3);
      }
    }
    for (; e < total; ++e) {
      const double wk2 = wk_at();
      advance();
      sum_wk += wk2;
      const double* dx = tri_.data() + e * su;
      for (Index l = 0; l < h; ++l) {
        double num = 0.0, den = 1.0;
        for (Index q = comp_begin_[static_cast<std::size_t>(l)];
             q < comp_begin_[static_cast<std::size_t>(l) + 1]; ++q) {
          const double r = cq[static_cast<std::size_t>(q)] * dx[ps[q]];
          const double u = r * r * (1.0 + kSqrt5 * r);
          const double g = 1.0 + kSqrt5 * r + (5.0 / 3.0) * (r * r);
          num = num * g + u * den;
          den *= g;
        }
        acc[l] += wk2 * (num / den);
      }
    }
    Vector grad(h + 2);
    grad[0] = 0.5 * sum_wk;
    for (Index l = 0; l < h; ++l) grad[l + 1] = -(5.0 / 6.0) * acc[l];
    grad[h + 1] =
        0.5 * hyper.noise_variance * (alpha.squaredNorm() - k_inv.trace());
    return grad;
  }

  /// Log marginal likelihood (and optionally its gradient in log-parameter
  /// space) of targets y under the given hyperparameters.
  Evaluation evaluate(const Hyperparameters& hyper, const Vector& y,
                      bool want_gradient) const {
    Evaluation ev;
    Factorization fact;
    Vector alpha;
    ev.lml = value(hyper, y, fact, alpha);
    ev.jitter = fact.jitter;
    if (want_gradient) ev.grad = gradient(hyper, fact, alpha);
    return ev;
  }

  const Matrix& training_inputs() const { return X_; }

 private:
  /// Flattened theta_l * w_q for every (component, pair) entry, recomputed
  /// once per kernel evaluation.
  std::vector<double> scaled_weights(const Hyperparameters& hyper) const {
    std::vector<double> cq(pair_weight_.size());
    const double* th = hyper.inv_lengthscales.data();
    for (Index l = 0; l < s_.n_components(); ++l)
      for (Index q = comp_begin_[static_cast<std::size_t>(l)];
           q < comp_begin_[static_cast<std::size_t>(l) + 1]; ++q)
        cq[static_cast<std::size_t>(q)] =
            th[l] * pair_weight_[static_cast<std::size_t>(q)];
    return cq;
  }

  Matrix X_;
  KernelStructure s_;
  Index n_used_ = 0;              // number of distinct dimensions touched
  std::vector<Index> dim_slot_;   // dimension -> slot, -1 if unused
  std::vector<Index> comp_begin_; // h+1 offsets into the flattened pairs
  std::vector<Index> pair_slot_;
  std::vector<double> pair_weight_;
  std::vector<double> xrow_;      // n x n_used row-major, slot order
  std::vector<double> tri_;       // n(n-1)/2 x n_used packed |dx| rows
};

inline KernelEngine make_engine(const Matrix& X, const Matrix* rotation) {
  return KernelEngine(X, rotation ? KernelStructure::from_rotation(*rotation)
                                  : KernelStructure::plain(X.cols()));
}

}  // namespace detail

/// Log marginal likelihood of (X, y) under the plain Matern 5/2 kernel, or
/// the KPLS kernel when a rotation is supplied.  X is used as given (no
/// internal normalization) so the value matches the textbook formula.
inline double log_marginal_likelihood(const Matrix& X, const Vector& y,
                                      const Hyperparameters& hyper,
                                      const Matrix* rotation = nullptr) {
  if (y.size() != X.rows())
    throw dimension_error("log_marginal_likelihood: X rows and y length "
                          "differ");
  detail::KernelEngine engine = detail::make_engine(X, rotation);
  return engine.evaluate(hyper, y, false).lml;
}

struct LmlEvaluation {
  double value = 0.0;
  /// Gradient w.r.t. [log sf2, log theta_1..h, log sn2].
  Vector gradient;
};

inline LmlEvaluation log_marginal_likelihood_with_gradient(
    const Matrix& X, const Vector& y, const Hyperparameters& hyper,
    const Matrix* rotation = nullptr) {
  if (y.size() != X.rows())
    throw dimension_error("log_marginal_likelihood_with_gradient: X rows "
                          "and y length differ");
  detail::KernelEngine engine = detail::make_engine(X, rotation);
  auto ev = engine.evaluate(hyper, y, true);
  return {ev.lml, ev.grad};
}

/// Fit configuration.  Bounds are expressed on the standardized-target /
/// unit-box-input scale the model uses internally.
struct GpConfig {
  /// Number of PLS components; empty for the plain anisotropic kernel.
  std::optional<Index> pls_components{};
  /// Hyperparameter-optimizer restarts; 0 picks a dimension-scaled default
  /// (two per free hyperparameter, clamped to [4, 24]).
  int multistarts = 0;
  int max_opt_iterations = 60;
  double gradient_tolerance = 1e-5;
  std::uint64_t seed = 0;
  double theta_lower = 1e-2, theta_upper = 1e2;
  double signal_lower = 1e-3, signal_upper = 1e3;
  double noise_lower = 1e-10, noise_upper = 1e-2;
};

/// A fitted Gaussian process model.  Inputs are normalized to the unit box
/// of the design space and targets standardized internally; predictions are
/// returned in original units.
class GpModel {
 public:
  /// Predictive means and variances (original units) at query rows.
  std::pair<Vector, Vector> predict(const Matrix& query) const {
    if (query.cols() != space_.dim())
      throw dimension_error("GpModel::predict: query dimension mismatch");
    const Index m = query.rows();
    if (constant_) {
      return {Vector::Constant(m, target_mean_), Vector::Zero(m)};
    }
    Matrix qn(m, space_.dim());
    for (Index i = 0; i < m; ++i)
      qn.row(i) = space_.normalize(query.row(i).transpose()).transpose();
    Matrix k_star = engine_->cross_covariance(hyper_, qn);
    Vector mean_std = k_star.transpose() * alpha_;
    Matrix v = llt_.matrixL().solve(k_star);
    Vector var_std = (hyper_.signal_variance -
                      v.array().square().colwise().sum().transpose())
                         .cwiseMax(0.0)
                         .matrix();
    Vector mean =
        (mean_std.array() * target_std_ + target_mean_).matrix();
    Vector var = var_std * (target_std_ * target_std_);
    return {mean, var};
  }

  std::pair<double, double> predict_one(const Vector& x) const {
    auto [mean, var] = predict(x.transpose());
    return {mean[0], var[0]};
  }

  const Hyperparameters& hyperparameters() const { return hyper_; }
  const std::optional<Matrix>& rotation() const { return rotation_; }
  double log_marginal_likelihood() const { return lml_; }
  double jitter() const { return jitter_; }
  bool is_constant() const { return constant_; }
  double target_mean() const { return target_mean_; }
  double target_std() const { return target_std_; }
  Index data_size() const { return n_; }
  /// "matern52" or "kpls_<h>"; for trace/audit records.
  std::string kernel_label() const {
    if (constant_) return "constant";
    return rotation_ ? "kpls_" + std::to_string(rotation_->cols())
                     : "matern52";
  }

 private:
  friend GpModel fit_gp(const DesignSpace&, const Matrix&, const Vector&,
                        const GpConfig&);

  DesignSpace space_;
  Index n_ = 0;
  bool constant_ = false;
  double target_mean_ = 0.0, target_std_ = 1.0;
  Hyperparameters hyper_;
  std::optional<Matrix> rotation_;
  std::optional<detail::KernelEngine> engine_;
  Eigen::LLT<Matrix> llt_;
  Vector alpha_;
  double lml_ = std::numeric_limits<double>::quiet_NaN();
  double jitter_ = 0.0;
};

namespace detail {

/// Projected BFGS with Armijo backtracking on a box, minimizing f.
/// `eval(x, grad)` returns f and fills `*grad` when grad is non-null; line
/// search trials are value-only and the gradient is requested once per
/// accepted point.  Tracks and returns the best point ever evaluated, so
/// more restarts can never yield a worse result.
template <typename Eval>
std::pair<double, Vector> bfgs_box_minimize(const Eval& eval, Vector x,
                                            const Vector& lo, const Vector& hi,
                                            int max_iters, double grad_tol) {
  const Index p = x.size();
  auto clamp = [&](Vector v) {
    for (Index i = 0; i < p; ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
    return v;
  };
  x = clamp(std::move(x));

  Vector g(p), g_new(p);
  double f = eval(x, &g);
  double best_f = f;
  Vector best_x = x;

  Matrix H = Matrix::Identity(p, p);
  for (int iter = 0; iter < max_iters; ++iter) {
    // Projected-gradient convergence test: ignore gradient components that
    // push against an active bound.
    double pg_norm = 0.0;
    for (Index i = 0; i < p; ++i) {
      double gi = g[i];
      if (x[i] <= lo[i] && gi > 0.0) gi = 0.0;
      if (x[i] >= hi[i] && gi < 0.0) gi = 0.0;
      pg_norm = std::max(pg_norm, std::abs(gi));
    }
    if (pg_norm < grad_tol) break;

    Vector dir = -(H * g);
    if (dir.dot(g) > -1e-12 * dir.norm() * g.norm()) {
      H.setIdentity();
      dir = -g;
    }

    // Armijo backtracking over the clamped step.
    double step = 1.0;
    bool accepted = false;
    Vector x_new;
    double f_new = f;
    for (int ls = 0; ls < 30; ++ls) {
      x_new = clamp(x + step * dir);
      Vector displacement = x_new - x;
      if (displacement.lpNorm<Eigen::Infinity>() < 1e-15) break;
      f_new = eval(x_new, nullptr);
      if (f_new < best_f) {
        best_f = f_new;
        best_x = x_new;
      }
      if (f_new <= f + 1e-4 * g.dot(displacement)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    eval(x_new, &g_new);

    Vector s = x_new - x;
    Vector yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-10 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      Matrix I = Matrix::Identity(p, p);
      H = (I - rho * s * yv.transpose()) * H *
              (I - rho * yv * s.transpose()) +
          rho * s * s.transpose();
    } else {
      H.setIdentity();
    }
    x = std::move(x_new);
    f = f_new;
    g = g_new;
  }
  return {best_f, best_x};
}

}  // namespace detail

/// Fit a GP to (X, y) over the given design space.  Inputs are normalized to
/// the unit box and targets standardized internally.  With
/// cfg.pls_components set, a PLS rotation is fitted first (on the normalized
/// inputs) and the KPLS kernel used.
inline GpModel fit_gp(const DesignSpace& space, const Matrix& X,
                      const Vector& y, const GpConfig& cfg) {
  space.validate();
  const Index n = X.rows();
  const Index d = X.cols();
  if (d != space.dim())
    throw dimension_error("fit_gp: X columns must match design space "
                          "dimension");
  if (y.size() != n) throw dimension_error("fit_gp: X rows and y length differ");
  if (n < 2) throw degenerate_input_error("fit_gp: need at least 2 rows");
  if (cfg.multistarts < 0)
    throw config_error("fit_gp: multistarts must be >= 0 (0 = auto)");

  GpModel model;
  model.space_ = space;
  model.n_ = n;

  Matrix Xn(n, d);
  for (Index i = 0; i < n; ++i)
    Xn.row(i) = space.normalize(X.row(i).transpose()).transpose();

  // Duplicate rows make K_ff singular no matter the hyperparameters.
  for (Index a = 0; a < n; ++a)
    for (Index b = a + 1; b < n; ++b)
      if ((Xn.row(a) - Xn.row(b)).lpNorm<Eigen::Infinity>() < 1e-12)
        throw degenerate_input_error(
            "fit_gp: duplicate training rows " + std::to_string(a) + " and " +
            std::to_string(b) + " (normalized distance < 1e-12)");

  model.target_mean_ = y.mean();
  const double var = (y.array() - model.target_mean_).square().mean();
  model.target_std_ = std::sqrt(var);
  if (model.target_std_ < 1e-12 * std::max(1.0, std::abs(model.target_mean_))) {
    // Constant targets: predict the constant with zero variance.
    model.constant_ = true;
    model.target_std_ = 1.0;
    return model;
  }
  Vector ys = (y.array() - model.target_mean_) / model.target_std_;

  if (cfg.pls_components) {
    Index h = *cfg.pls_components;
    if (h < 1 || h > d)
      throw config_error("fit_gp: pls_components must satisfy 1 <= h <= d");
    PlsRotation pls = fit_pls(Xn, ys, h);
    model.rotation_ = pls.rotation;
  }

  model.engine_.emplace(detail::make_engine(
      Xn, model.rotation_ ? &*model.rotation_ : nullptr));
  const Index h = model.engine_->structure().n_components();
  const Index p = h + 2;  // [log sf2, log thetas, log sn2]

  Vector lo(p), hi(p);
  lo[0] = std::log(cfg.signal_lower);
  hi[0] = std::log(cfg.signal_upper);
  for (Index l = 0; l < h; ++l) {
    lo[l + 1] = std::log(cfg.theta_lower);
    hi[l + 1] = std::log(cfg.theta_upper);
  }
  lo[p - 1] = std::log(cfg.noise_lower);
  hi[p - 1] = std::log(cfg.noise_upper);

  auto unpack = [&](const Vector& rho) {
    Hyperparameters hp;
    hp.signal_variance = std::exp(rho[0]);
    hp.inv_lengthscales = rho.segment(1, h).array().exp().matrix();
    hp.noise_variance = std::exp(rho[p - 1]);
    return hp;
  };

  // Negative LML objective; factorization failures count as +inf so the
  // line search backs away from them.  A one-point cache keeps the value
  // call's factorization around: the line search asks for values only, then
  // the gradient is requested at the accepted point and reuses it.
  struct EvalCache {
    Vector rho;
    detail::KernelEngine::Factorization fact;
    Vector alpha;
    double lml = 0.0;
    bool valid = false;
  };
  EvalCache cache;
  auto objective = [&](const Vector& rho, Vector* grad) -> double {
    try {
      if (!(cache.valid && cache.rho.size() == rho.size() &&
            (cache.rho.array() == rho.array()).all())) {
        cache.lml = model.engine_->value(unpack(rho), ys, cache.fact,
                                         cache.alpha);
        cache.rho = rho;
        cache.valid = true;
      }
      if (grad)
        *grad = -model.engine_->gradient(unpack(rho), cache.fact, cache.alpha);
      return -cache.lml;
    } catch (const numerical_error&) {
      cache.valid = false;
      if (grad) grad->setZero(rho.size());
      return std::numeric_limits<double>::infinity();
    }
  };

  // multistarts == 0 resolves to a dimension-scaled default: the LML surface
  // grows more local optima as hyperparameters are added, so use two starts
  // per free parameter, at least 4 and at most 24.
  const int n_starts =
      cfg.multistarts > 0
          ? cfg.multistarts
          : static_cast<int>(std::clamp<Index>(2 * p, Index{4}, Index{24}));

  // Start 1: centre of the box.  Remaining starts: LHS over the log box.
  std::vector<Vector> starts;
  starts.push_back(0.5 * (lo + hi));
  if (n_starts > 1) {
    DesignSpace log_box{lo, hi};
    Matrix S = lhs_uniform(log_box, n_starts - 1, cfg.seed);
    for (Index i = 0; i < S.rows(); ++i) starts.push_back(S.row(i).transpose());
  }

  double best_f = std::numeric_limits<double>::infinity();
  Vector best_rho = starts.front();
  for (const Vector& s : starts) {
    auto [f, rho] = detail::bfgs_box_minimize(objective, s, lo, hi,
                                              cfg.max_opt_iterations,
                                              cfg.gradient_tolerance);
    if (f < best_f) {
      best_f = f;
      best_rho = rho;
    }
  }
  if (!std::isfinite(best_f))
    throw numerical_error("fit_gp: every hyperparameter start failed to "
                          "factorize");

  model.hyper_ = unpack(best_rho);
  auto fact = model.engine_->factorize(model.hyper_);
  Matrix K = fact.k_ff;
  K.diagonal().array() += model.hyper_.noise_variance + fact.jitter;
  model.llt_.compute(K);
  model.alpha_ = model.llt_.solve(ys);
  model.jitter_ = fact.jitter;
  model.lml_ = -best_f;
  return model;
}

}  // namespace mobo
