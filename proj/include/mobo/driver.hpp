#pragma once

#include <mobo/acquisition.hpp>
#include <mobo/field_surrogate.hpp>
#include <mobo/gp.hpp>
#include <mobo/moga.hpp>
#include <mobo/problems.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mobo {

/// Accumulated observations of a problem: designs, objectives, the raw
/// constraint fields (one snapshot matrix per constraint, columns in design
/// order) and per-design feasibility flags.
struct Dataset {
  Matrix X;                    ///< n x d designs.
  Matrix objectives;           ///< n x n_f objective values.
  std::vector<Matrix> fields;  ///< per constraint: n_stations x n columns.
  std::vector<char> feasible;  ///< 1 if every field respects its limit.

  Dataset() = default;
  Dataset(Index dim, Index n_objectives, const std::vector<Index>& stations)
      : X(0, dim), objectives(0, n_objectives) {
    for (Index s : stations) fields.emplace_back(s, 0);
  }

  Index size() const { return X.rows(); }

  void append(const Vector& x, const ProblemEvaluation& ev) {
    if (x.size() != X.cols())
      throw dimension_error("Dataset::append: design dimension mismatch");
    if (ev.objectives.size() != objectives.cols())
      throw dimension_error("Dataset::append: objective count mismatch");
    if (ev.fields.size() != fields.size())
      throw dimension_error("Dataset::append: constraint count mismatch");
    const Index n = size();
    X.conservativeResize(n + 1, Eigen::NoChange);
    X.row(n) = x.transpose();
    objectives.conservativeResize(n + 1, Eigen::NoChange);
    objectives.row(n) = ev.objectives.transpose();
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (ev.fields[c].size() != fields[c].rows())
        throw dimension_error("Dataset::append: station count mismatch");
      fields[c].conservativeResize(Eigen::NoChange, n + 1);
      fields[c].col(n) = ev.fields[c];
    }
    feasible.push_back(ev.feasible ? 1 : 0);
  }
};

/// The best observed trade-off: row index and its aggregate score.
struct PreferredDesign {
  Index index = -1;
  double aggregate = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

/// Preferred design over the first `prefix` rows under an externally fixed
/// objective normalisation.  Only feasible rows compete; each objective is
/// mapped through (f - lo) / (hi - lo) with a degenerate range contributing
/// zero, and the equal-weight sum is minimised.  Ties resolve to the
/// earliest row.
inline std::optional<PreferredDesign> preferred_under(
    const Matrix& objectives, const std::vector<char>& feasible,
    const Vector& lo, const Vector& hi, Index prefix) {
  std::optional<PreferredDesign> best;
  for (Index i = 0; i < prefix; ++i) {
    if (!feasible[static_cast<std::size_t>(i)]) continue;
    double sum = 0.0;
    for (Index k = 0; k < objectives.cols(); ++k) {
      const double range = hi[k] - lo[k];
      if (range > 0.0) sum += (objectives(i, k) - lo[k]) / range;
    }
    if (!best || sum < best->aggregate) best = PreferredDesign{i, sum};
  }
  return best;
}

}  // namespace detail

/// Preferred trade-off among the observed designs: normalise each objective
/// to [0, 1] over *all* rows (feasible or not), then pick the feasible row
/// minimising the equal-weight sum.  Empty when nothing is feasible.
inline std::optional<PreferredDesign> preferred_design(
    const Matrix& objectives, const std::vector<char>& feasible) {
  if (objectives.rows() == 0) return std::nullopt;
  if (objectives.rows() != static_cast<Index>(feasible.size()))
    throw dimension_error("preferred_design: row/flag count mismatch");
  const Vector lo = objectives.colwise().minCoeff().transpose();
  const Vector hi = objectives.colwise().maxCoeff().transpose();
  return detail::preferred_under(objectives, feasible, lo, hi,
                                 objectives.rows());
}

/// Aggregate of the preferred design after the initial block and after each
/// subsequent observation, all scored under the *final* normalisation so the
/// series is non-increasing wherever it is defined.  Entries with no feasible
/// design yet are NaN.
inline std::vector<double> aggregate_series(const Matrix& objectives,
                                            const std::vector<char>& feasible,
                                            Index n_initial) {
  if (objectives.rows() != static_cast<Index>(feasible.size()))
    throw dimension_error("aggregate_series: row/flag count mismatch");
  if (n_initial < 0 || n_initial > objectives.rows())
    throw config_error("aggregate_series: invalid initial block size");
  const Vector lo = objectives.colwise().minCoeff().transpose();
  const Vector hi = objectives.colwise().maxCoeff().transpose();
  std::vector<double> series;
  for (Index prefix = n_initial; prefix <= objectives.rows(); ++prefix) {
    auto best = detail::preferred_under(objectives, feasible, lo, hi, prefix);
    series.push_back(best ? best->aggregate
                          : std::numeric_limits<double>::quiet_NaN());
  }
  return series;
}

/// Settings for one optimization run.
struct OptimizationConfig {
  std::string strategy = "ptmoo";  ///< "ptmoo" or "cehvi".
  /// PLS components shared by every surrogate; empty selects the plain
  /// anisotropic kernel.
  std::optional<Index> pls_components{};
  Index n_initial = 30;
  Index iterations = 50;
  std::uint64_t seed = 0;
  double eps2 = 0.01;            ///< POD truncation tolerance (squared).
  std::string doe = "uniform";   ///< initial design: "uniform" or "normal".
  /// Restrict the preferred-trade-off pick to the acquisition Pareto front
  /// (the default); otherwise optimise the scalarised score directly.
  bool front_restricted = true;
  GaConfig ga;  ///< inner optimiser settings (seed is overridden per call).
  GpConfig gp;  ///< surrogate settings (seed/pls are overridden per model).

  void validate(const Problem& problem) const {
    if (strategy != "ptmoo" && strategy != "cehvi")
      throw config_error("OptimizationConfig: unknown strategy '" + strategy +
                         "'");
    if (doe != "uniform" && doe != "normal")
      throw config_error("OptimizationConfig: unknown doe '" + doe + "'");
    if (n_initial < 3)
      throw config_error("OptimizationConfig: n_initial must be >= 3");
    if (iterations < 0)
      throw config_error("OptimizationConfig: iterations must be >= 0");
    if (eps2 <= 0.0 || eps2 >= 1.0)
      throw config_error("OptimizationConfig: eps2 must lie in (0, 1)");
    if (pls_components &&
        (*pls_components < 1 || *pls_components > problem.space.dim()))
      throw config_error(
          "OptimizationConfig: pls_components must lie in [1, dim]");
  }
};

/// Hyperparameters of one fitted GP, recorded for the run trace.
struct SurrogateAudit {
  std::string kernel;
  double signal_variance = 0.0;
  double noise_variance = 0.0;
  Vector inv_lengthscales;
  double log_marginal_likelihood = 0.0;
  double jitter = 0.0;
};

inline SurrogateAudit audit_model(const GpModel& model) {
  SurrogateAudit a;
  a.kernel = model.kernel_label();
  a.signal_variance = model.hyperparameters().signal_variance;
  a.noise_variance = model.hyperparameters().noise_variance;
  a.inv_lengthscales = model.hyperparameters().inv_lengthscales;
  a.log_marginal_likelihood = model.log_marginal_likelihood();
  a.jitter = model.jitter();
  return a;
}

struct FieldSurrogateAudit {
  std::string constraint;
  Index n_modes = 0;
  std::vector<SurrogateAudit> modes;
};

/// One adaptive step of the run.
struct IterationRecord {
  Index iteration = 0;  ///< 1-based.
  Vector candidate;
  Vector observed_objectives;
  bool observed_feasible = false;
  double acquisition = 0.0;
  std::vector<SurrogateAudit> objective_models;
  std::vector<FieldSurrogateAudit> constraint_models;
  std::optional<PreferredDesign> preferred;  ///< after this observation.
  Vector preferred_objectives;               ///< size 0 when none feasible.
  double wall_seconds = 0.0;
  std::vector<std::string> notes;
};

/// Full record of one optimization run.
struct RunTrace {
  std::string problem;
  OptimizationConfig config;
  Matrix initial_X;
  Matrix initial_objectives;
  std::vector<char> initial_feasible;
  std::optional<PreferredDesign> initial_preferred;
  Vector initial_preferred_objectives;
  std::vector<IterationRecord> iterations;
  double wall_seconds = 0.0;
};

/// The surrogates refitted at the start of every iteration.
struct SurrogateBundle {
  std::vector<GpModel> objective_models;
  std::vector<FieldSurrogate> constraint_models;
};

inline SurrogateBundle fit_surrogates(const Problem& problem,
                                      const Dataset& data,
                                      const OptimizationConfig& cfg) {
  SurrogateBundle bundle;
  const Index n_f = data.objectives.cols();
  for (Index k = 0; k < n_f; ++k) {
    GpConfig gp = cfg.gp;
    gp.pls_components = cfg.pls_components;
    gp.seed = cfg.seed + 1000003ull * static_cast<std::uint64_t>(k + 1);
    bundle.objective_models.push_back(
        fit_gp(problem.space, data.X, data.objectives.col(k), gp));
  }
  for (std::size_t c = 0; c < problem.constraints.size(); ++c) {
    GpConfig gp = cfg.gp;
    gp.pls_components = cfg.pls_components;
    gp.seed = cfg.seed + 500009ull * static_cast<std::uint64_t>(c + 1);
    bundle.constraint_models.push_back(
        fit_field_surrogate(problem.space, data.X, data.fields[c], cfg.eps2,
                            problem.constraints[c].limit, gp));
  }
  return bundle;
}

namespace detail {

/// Joint probability of feasibility of query rows under every constraint
/// surrogate.
inline Vector joint_feasibility(
    const std::vector<FieldSurrogate>& models, const Matrix& query) {
  Vector pf = Vector::Ones(query.rows());
  for (const FieldSurrogate& m : models) {
    const std::vector<FeasibilityStat> stats = m.feasibility_stats(query);
    for (Index i = 0; i < query.rows(); ++i)
      pf[i] *= stats[static_cast<std::size_t>(i)].prob_feasible;
  }
  return pf;
}

/// Per-objective Gaussian predictions for query rows.
inline std::vector<std::pair<Vector, Vector>> objective_predictions(
    const std::vector<GpModel>& models, const Matrix& query) {
  std::vector<std::pair<Vector, Vector>> out;
  out.reserve(models.size());
  for (const GpModel& m : models) out.push_back(m.predict(query));
  return out;
}

}  // namespace detail

/// A proposed next design with its acquisition value and any advisory notes.
struct CandidateSelection {
  Vector x;
  double acquisition = 0.0;
  std::vector<std::string> notes;
};

/// Fallback used by both strategies while no feasible design exists: chase
/// the design most likely to satisfy every constraint.
inline CandidateSelection select_next_feasibility(
    const Problem& problem, const SurrogateBundle& surrogates,
    const OptimizationConfig& cfg, std::uint64_t ga_seed) {
  auto evaluate = [&](const Matrix& Q) -> Matrix {
    return detail::joint_feasibility(surrogates.constraint_models, Q);
  };
  GaConfig ga = cfg.ga;
  ga.seed = ga_seed;
  GaResult res = nsga2(evaluate, problem.space, Sense::maximize, ga);
  Index best = 0;
  res.front_values.col(0).maxCoeff(&best);
  return {res.front_designs.row(best).transpose(),
          res.front_values(best, 0),
          {"no feasible design yet: maximised joint feasibility"}};
}

/// Preferred-trade-off selection: maximise the vector of per-objective
/// constrained expected improvements with the genetic optimiser, then pick
/// the front member with the largest incumbent-scaled score
/// sum_k (EIc_k / |f*_k|)^2.  With front_restricted off the scalar score is
/// optimised directly.
inline CandidateSelection select_next_ptmoo(const Problem& problem,
                                            const Dataset& data,
                                            const SurrogateBundle& surrogates,
                                            const OptimizationConfig& cfg,
                                            std::uint64_t ga_seed) {
  auto best = preferred_design(data.objectives, data.feasible);
  if (!best)
    return select_next_feasibility(problem, surrogates, cfg, ga_seed);
  const Vector f_star = data.objectives.row(best->index).transpose();
  const Index n_f = f_star.size();
  Vector scale(n_f);
  for (Index k = 0; k < n_f; ++k)
    scale[k] = std::max(std::abs(f_star[k]), 1e-12);

  auto eic_matrix = [&](const Matrix& Q) -> Matrix {
    const auto preds =
        detail::objective_predictions(surrogates.objective_models, Q);
    const Vector pf =
        detail::joint_feasibility(surrogates.constraint_models, Q);
    Matrix A(Q.rows(), n_f);
    for (Index k = 0; k < n_f; ++k) {
      const auto& [mean, var] = preds[static_cast<std::size_t>(k)];
      for (Index i = 0; i < Q.rows(); ++i) {
        const GaussPred p{mean[i], std::sqrt(std::max(var[i], 0.0))};
        A(i, k) = expected_improvement(p, f_star[k]) * pf[i];
      }
    }
    return A;
  };
  auto scored = [&](const Matrix& A) -> Vector {
    Vector s = Vector::Zero(A.rows());
    for (Index k = 0; k < A.cols(); ++k)
      s += (A.col(k) / scale[k]).array().square().matrix();
    return s;
  };

  GaConfig ga = cfg.ga;
  ga.seed = ga_seed;
  if (cfg.front_restricted) {
    GaResult res = nsga2(eic_matrix, problem.space, Sense::maximize, ga);
    const Vector s = scored(res.front_values);
    Index pick = 0;
    s.maxCoeff(&pick);
    return {res.front_designs.row(pick).transpose(), s[pick], {}};
  }
  auto scalar = [&](const Matrix& Q) -> Matrix { return scored(eic_matrix(Q)); };
  GaResult res = nsga2(scalar, problem.space, Sense::maximize, ga);
  Index pick = 0;
  res.front_values.col(0).maxCoeff(&pick);
  return {res.front_designs.row(pick).transpose(), res.front_values(pick, 0),
          {}};
}

/// Constrained expected hypervolume improvement selection.  Objectives are
/// normalised to [0, 1] over all observed rows, the feasible non-dominated
/// set forms the front, and the reference point is the all-ones vector.
inline CandidateSelection select_next_cehvi(const Problem& problem,
                                            const Dataset& data,
                                            const SurrogateBundle& surrogates,
                                            const OptimizationConfig& cfg,
                                            std::uint64_t ga_seed) {
  const Index n_f = data.objectives.cols();
  if (n_f != 2)
    throw config_error("select_next_cehvi: exactly two objectives required");
  bool any_feasible = false;
  for (char f : data.feasible) any_feasible = any_feasible || f != 0;
  if (!any_feasible)
    return select_next_feasibility(problem, surrogates, cfg, ga_seed);

  const Vector lo = data.objectives.colwise().minCoeff().transpose();
  Vector range = (data.objectives.colwise().maxCoeff().transpose() - lo)
                     .cwiseMax(1e-12);
  Index n_feasible = 0;
  for (char f : data.feasible) n_feasible += f != 0;
  Matrix feasible_norm(n_feasible, n_f);
  Index r = 0;
  for (Index i = 0; i < data.objectives.rows(); ++i) {
    if (!data.feasible[static_cast<std::size_t>(i)]) continue;
    feasible_norm.row(r++) =
        ((data.objectives.row(i).transpose() - lo).array() / range.array())
            .transpose();
  }
  const ParetoSet front = pareto_filter(
      feasible_norm, Matrix::Zero(n_feasible, 1), Sense::minimize);
  const Vector ref = Vector::Ones(n_f);

  auto evaluate = [&](const Matrix& Q) -> Matrix {
    const auto preds =
        detail::objective_predictions(surrogates.objective_models, Q);
    const Vector pf =
        detail::joint_feasibility(surrogates.constraint_models, Q);
    Matrix A(Q.rows(), 1);
    for (Index i = 0; i < Q.rows(); ++i) {
      GaussPred p1{(preds[0].first[i] - lo[0]) / range[0],
                   std::sqrt(std::max(preds[0].second[i], 0.0)) / range[0]};
      GaussPred p2{(preds[1].first[i] - lo[1]) / range[1],
                   std::sqrt(std::max(preds[1].second[i], 0.0)) / range[1]};
      A(i, 0) = pf[i] * ehvi(p1, p2, front.points, ref);
    }
    return A;
  };
  GaConfig ga = cfg.ga;
  ga.seed = ga_seed;
  GaResult res = nsga2(evaluate, problem.space, Sense::maximize, ga);
  Index pick = 0;
  res.front_values.col(0).maxCoeff(&pick);
  return {res.front_designs.row(pick).transpose(), res.front_values(pick, 0),
          {}};
}

namespace detail {

/// Smallest normalized Chebyshev distance from x to the observed designs.
inline double min_normalized_distance(const DesignSpace& space,
                                      const Matrix& X, const Vector& x) {
  const Vector xn = space.normalize(x);
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < X.rows(); ++i) {
    const Vector rn = space.normalize(X.row(i).transpose());
    best = std::min(best, (rn - xn).lpNorm<Eigen::Infinity>());
  }
  return best;
}

}  // namespace detail

/// The result of a complete run: the accumulated data and its trace.
struct RunResult {
  Dataset data;
  RunTrace trace;
};

/// Run the full surrogate-assisted loop: space-filling initial design, then
/// `iterations` adaptive observations chosen by the configured strategy.
inline RunResult run_optimization(const Problem& problem,
                                  const OptimizationConfig& cfg) {
  cfg.validate(problem);
  const auto t_run0 = std::chrono::steady_clock::now();
  std::vector<Index> stations;
  for (const FieldConstraint& c : problem.constraints)
    stations.push_back(c.stations);

  RunResult out;
  out.data = Dataset(problem.space.dim(),
                     static_cast<Index>(problem.n_objectives), stations);
  out.trace.problem = problem.name;
  out.trace.config = cfg;

  const Matrix X0 = cfg.doe == "uniform"
                        ? lhs_uniform(problem.space, cfg.n_initial, cfg.seed)
                        : lhs_normal(problem.space, cfg.n_initial, cfg.seed);
  for (Index i = 0; i < X0.rows(); ++i)
    out.data.append(X0.row(i).transpose(),
                    evaluate_problem(problem, X0.row(i).transpose()));
  out.trace.initial_X = out.data.X;
  out.trace.initial_objectives = out.data.objectives;
  out.trace.initial_feasible = out.data.feasible;
  out.trace.initial_preferred =
      preferred_design(out.data.objectives, out.data.feasible);
  if (out.trace.initial_preferred)
    out.trace.initial_preferred_objectives =
        out.data.objectives.row(out.trace.initial_preferred->index)
            .transpose();

  Rng nudge_rng = Rng(cfg.seed).split(0x6475706Cull);  // candidate nudges
  for (Index it = 1; it <= cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    IterationRecord rec;
    rec.iteration = it;
    const std::uint64_t ga_seed =
        cfg.seed + 104729ull * static_cast<std::uint64_t>(it);

    CandidateSelection sel;
    bool surrogates_ok = true;
    try {
      const SurrogateBundle surrogates =
          fit_surrogates(problem, out.data, cfg);
      for (const GpModel& m : surrogates.objective_models)
        rec.objective_models.push_back(audit_model(m));
      for (std::size_t c = 0; c < surrogates.constraint_models.size(); ++c) {
        const FieldSurrogate& fs = surrogates.constraint_models[c];
        FieldSurrogateAudit fa;
        fa.constraint = problem.constraints[c].name;
        fa.n_modes = fs.basis().n_modes();
        for (const GpModel& m : fs.coefficient_models())
          fa.modes.push_back(audit_model(m));
        rec.constraint_models.push_back(std::move(fa));
      }
      sel = cfg.strategy == "ptmoo"
                ? select_next_ptmoo(problem, out.data, surrogates, cfg,
                                    ga_seed)
                : select_next_cehvi(problem, out.data, surrogates, cfg,
                                    ga_seed);
    } catch (const std::runtime_error& err) {
      surrogates_ok = false;
      rec.notes.push_back(std::string("surrogate failure: ") + err.what());
    }
    if (!surrogates_ok) {
      // Degraded iteration: fall back to a fresh space-filling draw so the
      // run still makes progress.
      const Matrix R = lhs_uniform(problem.space, 1, ga_seed ^ 0xF5A5ull);
      sel.x = R.row(0).transpose();
      sel.acquisition = std::numeric_limits<double>::quiet_NaN();
    }
    rec.notes.insert(rec.notes.end(), sel.notes.begin(), sel.notes.end());

    // Refitting an already-observed design teaches the surrogate nothing
    // (and is rejected by the GP); nudge such candidates inside the box.
    const Vector span = problem.space.upper - problem.space.lower;
    int tries = 0;
    while (detail::min_normalized_distance(problem.space, out.data.X, sel.x) <
               1e-12 &&
           tries < 100) {
      for (Index j = 0; j < sel.x.size(); ++j) {
        const double step =
            (2.0 * nudge_rng.uniform() - 1.0) * 1e-6 * span[j];
        sel.x[j] = std::min(std::max(sel.x[j] + step, problem.space.lower[j]),
                            problem.space.upper[j]);
      }
      ++tries;
    }
    if (tries > 0)
      rec.notes.push_back("duplicate candidate nudged (" +
                          std::to_string(tries) + " tries)");

    const ProblemEvaluation ev = evaluate_problem(problem, sel.x);
    out.data.append(sel.x, ev);
    rec.candidate = sel.x;
    rec.observed_objectives = ev.objectives;
    rec.observed_feasible = ev.feasible;
    rec.acquisition = sel.acquisition;
    rec.preferred = preferred_design(out.data.objectives, out.data.feasible);
    if (rec.preferred)
      rec.preferred_objectives =
          out.data.objectives.row(rec.preferred->index).transpose();
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    out.trace.iterations.push_back(std::move(rec));
  }
  out.trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_run0)
          .count();
  return out;
}

}  // namespace mobo
