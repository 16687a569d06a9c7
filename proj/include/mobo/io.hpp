#pragma once

#include <mobo/driver.hpp>

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace mobo {

/// Short label of the surrogate family selected by a config.
inline std::string surrogate_label(const OptimizationConfig& cfg) {
  return cfg.pls_components ? "kpls_" + std::to_string(*cfg.pls_components)
                            : "gpr";
}

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double number_or_nan(const nlohmann::json& j) {
  return j.is_number() ? j.get<double>()
                       : std::numeric_limits<double>::quiet_NaN();
}

inline nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Vector vector_from_json(const nlohmann::json& j) {
  Vector v(static_cast<Index>(j.size()));
  Index i = 0;
  for (const auto& e : j) v[i++] = number_or_nan(e);
  return v;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i)
    out.push_back(vector_to_json(m.row(i).transpose()));
  return out;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const Index rows = static_cast<Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  const Index cols = static_cast<Index>(j.front().size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    m.row(i) = vector_from_json(j[static_cast<std::size_t>(i)]).transpose();
  return m;
}

inline nlohmann::json audit_to_json(const SurrogateAudit& a) {
  return {{"kernel", a.kernel},
          {"signal_variance", a.signal_variance},
          {"noise_variance", a.noise_variance},
          {"inv_lengthscales", vector_to_json(a.inv_lengthscales)},
          {"log_marginal_likelihood", a.log_marginal_likelihood},
          {"jitter", a.jitter}};
}

inline nlohmann::json preferred_to_json(
    const std::optional<PreferredDesign>& p, const Vector& objectives) {
  if (!p) return nullptr;
  return {{"index", p->index},
          {"aggregate", p->aggregate},
          {"objectives", vector_to_json(objectives)}};
}

}  // namespace detail

inline nlohmann::json config_to_json(const OptimizationConfig& cfg) {
  nlohmann::json j{{"strategy", cfg.strategy},
                   {"surrogate", surrogate_label(cfg)},
                   {"n_initial", cfg.n_initial},
                   {"iterations", cfg.iterations},
                   {"seed", cfg.seed},
                   {"eps2", cfg.eps2},
                   {"doe", cfg.doe},
                   {"front_restricted", cfg.front_restricted},
                   {"ga",
                    {{"population", cfg.ga.population},
                     {"generations", cfg.ga.generations},
                     {"crossover_probability", cfg.ga.crossover_probability},
                     {"crossover_eta", cfg.ga.crossover_eta},
                     {"mutation_probability", cfg.ga.mutation_probability},
                     {"mutation_eta", cfg.ga.mutation_eta}}},
                   {"gp",
                    {{"multistarts", cfg.gp.multistarts},
                     {"max_opt_iterations", cfg.gp.max_opt_iterations},
                     {"gradient_tolerance", cfg.gp.gradient_tolerance}}}};
  if (cfg.pls_components)
    j["pls_components"] = *cfg.pls_components;
  else
    j["pls_components"] = nullptr;
  return j;
}

inline nlohmann::json trace_to_json(const RunTrace& trace) {
  nlohmann::json j;
  j["problem"] = trace.problem;
  j["config"] = config_to_json(trace.config);
  j["initial"] = {
      {"X", detail::matrix_to_json(trace.initial_X)},
      {"objectives", detail::matrix_to_json(trace.initial_objectives)},
      {"feasible", nlohmann::json::array()},
      {"preferred",
       detail::preferred_to_json(trace.initial_preferred,
                                 trace.initial_preferred_objectives)}};
  for (char f : trace.initial_feasible)
    j["initial"]["feasible"].push_back(f != 0);
  j["iterations"] = nlohmann::json::array();
  for (const IterationRecord& rec : trace.iterations) {
    nlohmann::json r{{"iteration", rec.iteration},
                     {"candidate", detail::vector_to_json(rec.candidate)},
                     {"objectives",
                      detail::vector_to_json(rec.observed_objectives)},
                     {"feasible", rec.observed_feasible},
                     {"acquisition", rec.acquisition},
                     {"preferred",
                      detail::preferred_to_json(rec.preferred,
                                                rec.preferred_objectives)},
                     {"wall_seconds", rec.wall_seconds},
                     {"notes", rec.notes}};
    r["objective_models"] = nlohmann::json::array();
    for (const SurrogateAudit& a : rec.objective_models)
      r["objective_models"].push_back(detail::audit_to_json(a));
    r["constraint_models"] = nlohmann::json::array();
    for (const FieldSurrogateAudit& fa : rec.constraint_models) {
      nlohmann::json f{{"constraint", fa.constraint},
                       {"n_modes", fa.n_modes},
                       {"modes", nlohmann::json::array()}};
      for (const SurrogateAudit& a : fa.modes)
        f["modes"].push_back(detail::audit_to_json(a));
      r["constraint_models"].push_back(std::move(f));
    }
    j["iterations"].push_back(std::move(r));
  }
  j["wall_seconds"] = trace.wall_seconds;
  return j;
}

/// Per-iteration CSV of a run.  Initial designs appear as iteration-0 rows;
/// every row repeats the preferred design known at that point (its aggregate
/// is scored under the normalisation of the rows observed so far).
inline std::string run_csv(const RunTrace& trace) {
  std::ostringstream out;
  out << "iteration,f1,f2,feasible,pref_f1,pref_f2,aggregate\n";
  auto pref_cells = [](const std::optional<PreferredDesign>& p,
                       const Vector& obj) {
    std::string cells;
    if (p) {
      cells = "," + detail::format_double(obj[0]) + "," +
              detail::format_double(obj[1]) + "," +
              detail::format_double(p->aggregate);
    } else {
      cells = ",nan,nan,nan";
    }
    return cells;
  };
  for (Index i = 0; i < trace.initial_objectives.rows(); ++i) {
    out << "0," << detail::format_double(trace.initial_objectives(i, 0)) << ","
        << detail::format_double(trace.initial_objectives(i, 1)) << ","
        << (trace.initial_feasible[static_cast<std::size_t>(i)] ? 1 : 0)
        << pref_cells(trace.initial_preferred,
                      trace.initial_preferred_objectives)
        << "\n";
  }
  for (const IterationRecord& rec : trace.iterations) {
    out << rec.iteration << ","
        << detail::format_double(rec.observed_objectives[0]) << ","
        << detail::format_double(rec.observed_objectives[1]) << ","
        << (rec.observed_feasible ? 1 : 0)
        << pref_cells(rec.preferred, rec.preferred_objectives) << "\n";
  }
  return out.str();
}

/// Write a file atomically: stage to `<path>.tmp`, then rename over.
inline void write_text_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw config_error("write_text_atomic: cannot open " + tmp.string());
    out << content;
    if (!out)
      throw config_error("write_text_atomic: write failed for " +
                         tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// The strategy-comparison view of one completed run: everything needed to
/// rescore the preferred-design series under a pooled normalisation.
struct RunSummary {
  std::string problem;
  std::string strategy;
  std::string surrogate;
  Index n_initial = 0;
  std::uint64_t seed = 0;
  Matrix objectives;           ///< all observed rows, in order.
  std::vector<char> feasible;  ///< matching flags.
};

inline RunSummary summarize_trace_json(const nlohmann::json& j) {
  RunSummary s;
  s.problem = j.at("problem").get<std::string>();
  s.strategy = j.at("config").at("strategy").get<std::string>();
  s.surrogate = j.at("config").at("surrogate").get<std::string>();
  s.n_initial = j.at("config").at("n_initial").get<Index>();
  s.seed = j.at("config").at("seed").get<std::uint64_t>();
  const Matrix initial =
      detail::matrix_from_json(j.at("initial").at("objectives"));
  const auto& iters = j.at("iterations");
  s.objectives.resize(initial.rows() + static_cast<Index>(iters.size()),
                      initial.cols());
  s.objectives.topRows(initial.rows()) = initial;
  for (const auto& f : j.at("initial").at("feasible"))
    s.feasible.push_back(f.get<bool>() ? 1 : 0);
  Index r = initial.rows();
  for (const auto& rec : iters) {
    s.objectives.row(r++) =
        detail::vector_from_json(rec.at("objectives")).transpose();
    s.feasible.push_back(rec.at("feasible").get<bool>() ? 1 : 0);
  }
  return s;
}

inline RunSummary load_run_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open trace " + path.string());
  nlohmann::json j;
  in >> j;
  return summarize_trace_json(j);
}

/// One line of the tidy comparison table.
struct CompareRow {
  std::string strategy;  ///< group label: `<strategy>-<surrogate>`.
  Index iteration = 0;   ///< 0 = after the initial design.
  std::string objective;  ///< "f1", "f2" or "aggregate".
  double median = 0.0, q25 = 0.0, q75 = 0.0;
};

namespace detail {

/// Nearest-rank percentile of an unsorted sample (NaNs removed).
inline double nearest_rank(std::vector<double> v, double pct) {
  v.erase(std::remove_if(v.begin(), v.end(),
                         [](double x) { return std::isnan(x); }),
          v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

}  // namespace detail

/// Build the tidy comparison table.  All runs must target one problem; runs
/// are grouped by strategy and surrogate, and the preferred-design series of
/// every run is rescored under min/max bounds pooled over *all* runs so the
/// aggregates are mutually comparable.
inline std::vector<CompareRow> compare_table(
    const std::vector<RunSummary>& runs) {
  if (runs.empty()) throw config_error("compare_table: no runs");
  const Index n_f = runs.front().objectives.cols();
  for (const RunSummary& r : runs) {
    if (r.problem != runs.front().problem)
      throw config_error("compare_table: runs mix problems '" +
                         runs.front().problem + "' and '" + r.problem + "'");
    if (r.objectives.cols() != n_f)
      throw dimension_error("compare_table: objective count mismatch");
  }
  Vector lo = Vector::Constant(n_f, std::numeric_limits<double>::infinity());
  Vector hi = Vector::Constant(n_f, -std::numeric_limits<double>::infinity());
  for (const RunSummary& r : runs) {
    lo = lo.cwiseMin(r.objectives.colwise().minCoeff().transpose());
    hi = hi.cwiseMax(r.objectives.colwise().maxCoeff().transpose());
  }

  std::map<std::string, std::vector<const RunSummary*>> groups;
  for (const RunSummary& r : runs)
    groups[r.strategy + "-" + r.surrogate].push_back(&r);

  std::vector<CompareRow> rows;
  for (const auto& [label, members] : groups) {
    Index iterations = std::numeric_limits<Index>::max();
    for (const RunSummary* r : members)
      iterations = std::min(iterations, r->objectives.rows() - r->n_initial);
    for (Index j = 0; j <= iterations; ++j) {
      std::vector<double> f1, f2, agg;
      for (const RunSummary* r : members) {
        auto best = detail::preferred_under(r->objectives, r->feasible, lo,
                                            hi, r->n_initial + j);
        f1.push_back(best ? r->objectives(best->index, 0)
                          : std::numeric_limits<double>::quiet_NaN());
        f2.push_back(best ? r->objectives(best->index, 1)
                          : std::numeric_limits<double>::quiet_NaN());
        agg.push_back(best ? best->aggregate
                           : std::numeric_limits<double>::quiet_NaN());
      }
      const std::vector<std::pair<std::string, std::vector<double>*>> cols{
          {"f1", &f1}, {"f2", &f2}, {"aggregate", &agg}};
      for (const auto& [name, sample] : cols)
        rows.push_back({label, j, name, detail::nearest_rank(*sample, 50.0),
                        detail::nearest_rank(*sample, 25.0),
                        detail::nearest_rank(*sample, 75.0)});
    }
  }
  return rows;
}

inline std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::ostringstream out;
  out << "strategy,iteration,objective,median,q25,q75\n";
  for (const CompareRow& r : rows)
    out << r.strategy << "," << r.iteration << "," << r.objective << ","
        << detail::format_double(r.median) << ","
        << detail::format_double(r.q25) << ","
        << detail::format_double(r.q75) << "\n";
  return out.str();
}

}  // namespace mobo
