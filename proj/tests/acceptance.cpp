// Acceptance gate: twelve numbered criteria, each printing one PASS/FAIL
// line with the measured quantities before any assertion fires.
//
//   [fast]        c01-c08: self-contained math and protocol checks (minutes).
//   [bnh_batch]   c09-c11: four 20-seed optimization batches, loaded from the
//   [beam_batch]  c10/c12: on-disk cache and (re)run in process when a cached
//                 trace is missing or does not match the pinned settings.
//
// Criterion 12 is directional by design: a violated direction is reported
// and documented, not asserted, so the suite stays honest about what that
// check can and cannot reject.

#include <mobo/acquisition.hpp>
#include <mobo/driver.hpp>
#include <mobo/gp.hpp>
#include <mobo/io.hpp>
#include <mobo/moga.hpp>
#include <mobo/pod.hpp>
#include <mobo/problems.hpp>
#include <mobo/sampling.hpp>

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef MOBO_ACCEPTANCE_CACHE
#error "MOBO_ACCEPTANCE_CACHE must point at the batch cache directory"
#endif

using namespace mobo;
namespace fs = std::filesystem;

namespace {

double wall_of(const std::function<void()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  body();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

/// The one-line verdict every criterion prints before asserting.
void report(const std::string& id, bool ok, const std::string& detail) {
  std::cout << id << (ok ? " PASS — " : " FAIL — ") << detail << std::endl;
}

double median_sorted(std::vector<double> v) {
  // Nearest-rank p50: smallest k with k/n >= 1/2.
  REQUIRE(!v.empty());
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

// ---------------------------------------------------------------------------
// Batch plumbing: pinned 20-seed optimization runs shared by c09-c12.

struct BatchSpec {
  std::string name;  // cache subdirectory and CLI config stem
  std::string problem;
  std::string strategy;
  std::optional<Index> pls;
  std::uint64_t seed0 = 0;
  int n_seeds = 20;
};

const BatchSpec kBnhPtmoo{"bnh_ptmoo", "bnh", "ptmoo", std::nullopt, 1000};
const BatchSpec kBnhCehvi{"bnh_cehvi", "bnh", "cehvi", std::nullopt, 1000};
const BatchSpec kBeamKpls{"beam_kpls3", "beam", "ptmoo", Index{3}, 3000};
const BatchSpec kBeamGpr{"beam_gpr", "beam", "ptmoo", std::nullopt, 3000};

OptimizationConfig batch_config(const BatchSpec& spec, std::uint64_t seed) {
  OptimizationConfig cfg;
  cfg.strategy = spec.strategy;
  cfg.pls_components = spec.pls;
  cfg.n_initial = 30;
  cfg.iterations = 50;
  cfg.seed = seed;
  cfg.eps2 = 0.01;
  cfg.doe = "uniform";
  cfg.front_restricted = true;
  cfg.ga.population = 200;
  cfg.ga.generations = 100;
  cfg.gp.multistarts = 4;
  cfg.gp.max_opt_iterations = 50;
  return cfg;
}

/// Everything the batch criteria need from one stored run.
struct ParsedTrace {
  std::uint64_t seed = 0;
  Matrix initial_X;
  Matrix objectives;  // initial block then one row per iteration
  std::vector<char> feasible;
  std::vector<Index> preferred_index;      // entry 0 = after initial block
  std::vector<double> preferred_aggregate;  // NaN while nothing is feasible
  double wall_seconds = 0.0;
};

// matrix_from_json lives in a detail namespace; a thin alias keeps the
// parser below readable.
Matrix io_detail_matrix(const nlohmann::json& j) {
  return detail::matrix_from_json(j);
}

ParsedTrace parse_trace(const nlohmann::json& j, const BatchSpec& spec,
                        std::uint64_t seed) {
  const auto& cfg = j.at("config");
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond) throw config_error("cached trace mismatch: " + what);
  };
  const std::string surrogate =
      spec.pls ? "kpls_" + std::to_string(*spec.pls) : "gpr";
  expect(j.at("problem").get<std::string>() == spec.problem, "problem");
  expect(cfg.at("strategy").get<std::string>() == spec.strategy, "strategy");
  expect(cfg.at("surrogate").get<std::string>() == surrogate, "surrogate");
  expect(cfg.at("n_initial").get<Index>() == 30, "n_initial");
  expect(cfg.at("iterations").get<Index>() == 50, "iterations");
  expect(cfg.at("seed").get<std::uint64_t>() == seed, "seed");
  expect(cfg.at("eps2").get<double>() == 0.01, "eps2");
  expect(cfg.at("doe").get<std::string>() == "uniform", "doe");
  expect(cfg.at("front_restricted").get<bool>(), "front_restricted");
  expect(cfg.at("ga").at("population").get<Index>() == 200, "ga.population");
  expect(cfg.at("ga").at("generations").get<Index>() == 100,
         "ga.generations");
  expect(cfg.at("gp").at("multistarts").get<int>() == 4, "gp.multistarts");
  expect(cfg.at("gp").at("max_opt_iterations").get<int>() == 50,
         "gp.max_opt_iterations");

  ParsedTrace t;
  t.seed = seed;
  t.initial_X = io_detail_matrix(j.at("initial").at("X"));
  const Matrix init_f = io_detail_matrix(j.at("initial").at("objectives"));
  const auto& iters = j.at("iterations");
  expect(static_cast<Index>(iters.size()) == 50, "iteration count");
  t.objectives.resize(init_f.rows() + static_cast<Index>(iters.size()), 2);
  t.objectives.topRows(init_f.rows()) = init_f;
  for (const auto& f : j.at("initial").at("feasible"))
    t.feasible.push_back(f.get<bool>() ? 1 : 0);
  auto push_preferred = [&](const nlohmann::json& p) {
    if (p.is_null()) {
      t.preferred_index.push_back(-1);
      t.preferred_aggregate.push_back(
          std::numeric_limits<double>::quiet_NaN());
    } else {
      t.preferred_index.push_back(p.at("index").get<Index>());
      t.preferred_aggregate.push_back(p.at("aggregate").get<double>());
    }
  };
  push_preferred(j.at("initial").at("preferred"));
  Index row = init_f.rows();
  for (const auto& rec : iters) {
    const auto& f = rec.at("objectives");
    expect(f.size() == 2, "objective row width");
    t.objectives(row, 0) = f[0].get<double>();
    t.objectives(row, 1) = f[1].get<double>();
    ++row;
    t.feasible.push_back(rec.at("feasible").get<bool>() ? 1 : 0);
    push_preferred(rec.at("preferred"));
  }
  t.wall_seconds = j.at("wall_seconds").get<double>();
  expect(t.initial_X.rows() == 30, "initial design rows");
  expect(t.objectives.rows() == 80, "total observation rows");
  return t;
}

/// Load the batch from the cache, running any missing or stale seed in
/// process and re-caching it.  Deterministic: a cached run and a fresh run
/// of the same seed are the same run.
std::vector<ParsedTrace> ensure_batch(const BatchSpec& spec) {
  const fs::path dir = fs::path(MOBO_ACCEPTANCE_CACHE) / spec.name;
  fs::create_directories(dir);
  std::vector<ParsedTrace> runs;
  for (int r = 0; r < spec.n_seeds; ++r) {
    const std::uint64_t seed = spec.seed0 + static_cast<std::uint64_t>(r);
    const fs::path path = dir / ("trace_seed" + std::to_string(seed) +
                                 ".json");
    if (fs::exists(path)) {
      try {
        std::ifstream in(path);
        nlohmann::json j = nlohmann::json::parse(in);
        runs.push_back(parse_trace(j, spec, seed));
        continue;
      } catch (const std::exception& e) {
        std::cout << "[acceptance] re-running " << spec.name << " seed "
                  << seed << " (" << e.what() << ")" << std::endl;
      }
    } else {
      std::cout << "[acceptance] running " << spec.name << " seed " << seed
                << " (cache miss)" << std::endl;
    }
    Problem problem = make_problem(spec.problem);
    RunResult result = run_optimization(problem, batch_config(spec, seed));
    write_text_atomic(path, trace_to_json(result.trace).dump(2));
    std::ifstream in(path);
    runs.push_back(parse_trace(nlohmann::json::parse(in), spec, seed));
  }
  return runs;
}

/// Iterations until the final-bounds aggregate series is within 5% of its
/// final value; censored one past the horizon when nothing is feasible.
int iterations_to_within(const std::vector<double>& series, double factor) {
  const double target = series.back();
  if (!std::isfinite(target)) return static_cast<int>(series.size());
  for (std::size_t j = 0; j < series.size(); ++j)
    if (series[j] <= factor * target + 1e-15) return static_cast<int>(j);
  return static_cast<int>(series.size());
}

/// Plain-loop preferred-design scan: sum of min-max-normalised objectives
/// over the first m rows, feasible rows only, earliest index wins ties.
Index exhaustive_preferred(const Matrix& F, const std::vector<char>& feas,
                           Index m) {
  Vector lo = F.topRows(m).colwise().minCoeff().transpose();
  Vector hi = F.topRows(m).colwise().maxCoeff().transpose();
  Index best = -1;
  double best_sum = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < m; ++i) {
    if (!feas[static_cast<std::size_t>(i)]) continue;
    double sum = 0.0;
    for (Index k = 0; k < F.cols(); ++k) {
      const double span = hi[k] - lo[k];
      if (span > 0.0) sum += (F(i, k) - lo[k]) / span;
    }
    if (sum < best_sum) {
      best_sum = sum;
      best = i;
    }
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("c01 pod truncation rule", "[acceptance][fast][c01]") {
  Rng rng(20260101);
  auto gaussian = [&](Index r, Index c) {
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
  };
  // Rank-5 snapshots: orthonormal spatial and temporal factors with mode
  // energies all above the truncation threshold, plus 1e-6 noise.
  Eigen::HouseholderQR<Matrix> qu(gaussian(121, 5));
  Eigen::HouseholderQR<Matrix> qv(gaussian(30, 5));
  const Matrix U = qu.householderQ() * Matrix::Identity(121, 5);
  const Matrix V = qv.householderQ() * Matrix::Identity(30, 5);
  Vector sigma(5);
  sigma << 1.0, 0.8, 0.6, 0.4, 0.25;
  const Matrix snapshots =
      U * sigma.asDiagonal() * V.transpose() + 1e-6 * gaussian(121, 30);

  PodBasis basis;
  const double wall =
      wall_of([&] { basis = compute_pod(snapshots, 0.01); });
  const Matrix recon = basis.modes * basis.coefficients;
  const double rel_err = (snapshots - recon).norm() / snapshots.norm();

  const bool ok = basis.n_modes() == 5 && rel_err <= 0.1 && wall < 1.0;
  report("C01", ok,
         "n_pod=" + std::to_string(basis.n_modes()) + " (want 5), recon rel err " +
             fmt(rel_err, 3) + " (<= 0.1), wall " + fmt(wall, 3) +
             " s (< 1 s)");
  CHECK(basis.n_modes() == 5);
  CHECK(rel_err <= 0.1);
  CHECK(wall < 1.0);
}

TEST_CASE("c02 gp interpolation", "[acceptance][fast][c02]") {
  const Index n = 12;
  Vector lo(1), hi(1);
  lo << 0.0;
  hi << 1.0;
  const DesignSpace space{lo, hi};
  Matrix X(n, 1);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    X(i, 0) = static_cast<double>(i) / static_cast<double>(n - 1);
    y[i] = std::sin(2.0 * std::numbers::pi * X(i, 0)) + 0.25 * X(i, 0);
  }
  const double scale = std::sqrt((y.array() - y.mean()).square().mean());

  GpConfig cfg;
  cfg.seed = 20260202;
  GpModel model;
  const double wall = wall_of([&] { model = fit_gp(space, X, y, cfg); });
  const auto [mean, var] = model.predict(X);
  const double max_err = (mean - y).cwiseAbs().maxCoeff();
  const double max_std = var.cwiseMax(0.0).cwiseSqrt().maxCoeff();

  const bool ok = max_err <= 1e-4 && max_std <= 1e-3 * scale && wall < 5.0;
  report("C02", ok,
         "max |pred - y| " + fmt(max_err, 3) + " (<= 1e-4), max std " +
             fmt(max_std, 3) + " (<= " + fmt(1e-3 * scale, 3) + "), wall " +
             fmt(wall, 3) + " s (< 5 s)");
  CHECK(max_err <= 1e-4);
  CHECK(max_std <= 1e-3 * scale);
  CHECK(wall < 5.0);
}

TEST_CASE("c03 likelihood gradient", "[acceptance][fast][c03]") {
  Rng rng(20260303);
  const Index n = 10, d = 2;
  Matrix X(n, d);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    X(i, 0) = rng.uniform();
    X(i, 1) = rng.uniform();
    y[i] = std::sin(3.0 * X(i, 0)) + X(i, 1) * X(i, 1) +
           0.5 * X(i, 0) * X(i, 1);
  }

  auto value_at = [&](const Vector& rho) {
    Hyperparameters h;
    h.signal_variance = std::exp(rho[0]);
    h.inv_lengthscales = rho.segment(1, d).array().exp().matrix();
    h.noise_variance = std::exp(rho[d + 1]);
    return log_marginal_likelihood_with_gradient(X, y, h).value;
  };

  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    Vector rho(d + 2);
    rho[0] = std::log(0.3) + rng.uniform() * std::log(3.0 / 0.3);
    for (Index k = 0; k < d; ++k)
      rho[1 + k] = std::log(0.2) + rng.uniform() * std::log(5.0 / 0.2);
    rho[d + 1] = std::log(1e-6) + rng.uniform() * std::log(1e-2 / 1e-6);

    Hyperparameters h;
    h.signal_variance = std::exp(rho[0]);
    h.inv_lengthscales = rho.segment(1, d).array().exp().matrix();
    h.noise_variance = std::exp(rho[d + 1]);
    const Vector analytic =
        log_marginal_likelihood_with_gradient(X, y, h).gradient;

    Vector fd(d + 2);
    const double step = 1e-5;
    for (Index k = 0; k < d + 2; ++k) {
      Vector hi_rho = rho, lo_rho = rho;
      hi_rho[k] += step;
      lo_rho[k] -= step;
      fd[k] = (value_at(hi_rho) - value_at(lo_rho)) / (2.0 * step);
    }
    const double rel =
        (fd - analytic).norm() / std::max(analytic.norm(), 1e-12);
    worst = std::max(worst, rel);
  }

  const bool ok = worst <= 1e-4;
  report("C03", ok,
         "worst finite-difference vs analytic relative error " + fmt(worst, 3) +
             " over 10 hyperparameter points (<= 1e-4)");
  CHECK(worst <= 1e-4);
}

TEST_CASE("c04 kpls reduction", "[acceptance][fast][c04]") {
  // (a) Identity rotation with h = d must reproduce the plain kernel.
  Rng rng(20260404);
  const Index d = 7, n_pairs = 100;
  Matrix A(n_pairs, d), B(n_pairs, d);
  for (Index i = 0; i < n_pairs; ++i)
    for (Index j = 0; j < d; ++j) {
      A(i, j) = rng.uniform();
      B(i, j) = rng.uniform();
    }
  Hyperparameters h;
  h.signal_variance = 1.3;
  h.inv_lengthscales = Vector(d);
  for (Index j = 0; j < d; ++j)
    h.inv_lengthscales[j] = std::exp(std::log(0.2) +
                                     rng.uniform() * std::log(10.0 / 0.2));
  h.noise_variance = 1e-8;

  const Matrix eye = Matrix::Identity(d, d);
  detail::KernelEngine plain = detail::make_engine(A, nullptr);
  detail::KernelEngine rotated = detail::make_engine(A, &eye);
  const Matrix k_plain = plain.cross_covariance(h, B);
  const Matrix k_rot = rotated.cross_covariance(h, B);
  double max_pair_err = 0.0;
  for (Index i = 0; i < n_pairs; ++i)
    max_pair_err =
        std::max(max_pair_err, std::abs(k_plain(i, i) - k_rot(i, i)));

  // (b) Fit wall-time on the pinned 30x15 beam dataset (first reduced field
  // coordinate), library defaults, median of five alternating fits.
  Problem beam = beam_field(121);
  const Matrix Xb = lhs_uniform(beam.space, 30, 42);
  Matrix snaps(121, 30);
  for (Index i = 0; i < 30; ++i)
    snaps.col(i) = beam.constraints[0].evaluate(Xb.row(i).transpose());
  const PodBasis basis = compute_pod(snaps, 0.01);
  const Vector yb = basis.coefficients.row(0).transpose();

  std::vector<double> w_gpr, w_kpls;
  for (int rep = 0; rep < 5; ++rep) {
    GpConfig cfg;
    cfg.seed = 9;
    w_gpr.push_back(wall_of([&] { fit_gp(beam.space, Xb, yb, cfg); }));
    cfg.pls_components = 3;
    w_kpls.push_back(wall_of([&] { fit_gp(beam.space, Xb, yb, cfg); }));
  }
  const double med_gpr = median_sorted(w_gpr);
  const double med_kpls = median_sorted(w_kpls);

  const bool ok_identity = max_pair_err <= 1e-12;
  const bool ok_wall = med_kpls < med_gpr;
  report("C04", ok_identity && ok_wall,
         "identity-rotation max |k_kpls - k_plain| " + fmt(max_pair_err, 3) +
             " over 100 pairs (<= 1e-12); fit wall median-of-5 kpls_3 " +
             fmt(1e3 * med_kpls, 4) + " ms vs gpr " + fmt(1e3 * med_gpr, 4) +
             " ms (want kpls_3 < gpr; at n=30 the analytic-gradient "
             "optimizer needs few evaluations either way, see README "
             "acceptance notes)");
  CHECK(max_pair_err <= 1e-12);
  CHECK(med_kpls < med_gpr);
}

TEST_CASE("c05 expected improvement oracle", "[acceptance][fast][c05]") {
  Rng rng(20260505);
  double worst_sigmas = 0.0;
  bool ok = true;
  const double wall = wall_of([&] {
    for (int t = 0; t < 20; ++t) {
      const double mean = -1.0 + 2.0 * rng.uniform();
      const double std = 0.1 + 0.9 * rng.uniform();
      const double best = mean + std * (-2.0 + 4.0 * rng.uniform());
      const double exact = expected_improvement({mean, std}, best);
      const auto [mc, se] = oracle::mc_expected_improvement(
          mean, std, best, 1000000, 505000 + static_cast<std::uint64_t>(t));
      REQUIRE(se > 0.0);
      const double sigmas = std::abs(exact - mc) / se;
      worst_sigmas = std::max(worst_sigmas, sigmas);
      ok = ok && sigmas <= 3.0;
    }
  });
  ok = ok && wall < 30.0;
  report("C05", ok,
         "worst |closed form - MC| " + fmt(worst_sigmas, 3) +
             " standard errors over 20 triples x 1e6 samples (<= 3), wall " +
             fmt(wall, 3) + " s (< 30 s)");
  CHECK(worst_sigmas <= 3.0);
  CHECK(wall < 30.0);
}

TEST_CASE("c06 ehvi oracle", "[acceptance][fast][c06]") {
  Rng rng(20260606);
  Vector ref(2);
  ref << 1.1, 1.1;
  double worst_sigmas = 0.0;
  bool ok = true;
  const double wall = wall_of([&] {
    for (int t = 0; t < 10; ++t) {
      const Index k = 1 + static_cast<Index>(rng.uniform() * 5.0);
      Matrix front(std::min<Index>(k, 5), 2);
      for (Index i = 0; i < front.rows(); ++i) {
        front(i, 0) = 0.1 + 0.9 * rng.uniform();
        front(i, 1) = 0.1 + 0.9 * rng.uniform();
      }
      const GaussPred p1{0.2 + 0.8 * rng.uniform(), 0.1 + 0.2 * rng.uniform()};
      const GaussPred p2{0.2 + 0.8 * rng.uniform(), 0.1 + 0.2 * rng.uniform()};
      const double exact = ehvi(p1, p2, front, ref);
      const auto [mc, se] = oracle::mc_ehvi(
          p1, p2, front, ref, 1000000, 606000 + static_cast<std::uint64_t>(t));
      REQUIRE(se > 0.0);
      const double sigmas = std::abs(exact - mc) / se;
      worst_sigmas = std::max(worst_sigmas, sigmas);
      ok = ok && sigmas <= 3.0;
    }
  });
  ok = ok && wall < 60.0;
  report("C06", ok,
         "worst |exact - MC| " + fmt(worst_sigmas, 3) +
             " standard errors over 10 fronts x 1e6 samples (<= 3), wall " +
             fmt(wall, 3) + " s (< 60 s)");
  CHECK(worst_sigmas <= 3.0);
  CHECK(wall < 60.0);
}

TEST_CASE("c07 hypervolume", "[acceptance][fast][c07]") {
  // Worked example first: two staircase boxes overlapping in one corner.
  Matrix example(2, 2);
  example << 0.25, 0.75, 0.75, 0.25;
  Vector unit_ref(2);
  unit_ref << 1.0, 1.0;
  const double example_hv = hypervolume(example, unit_ref);
  const double example_err = std::abs(example_hv - 0.3125);

  Rng rng(20260707);
  Vector floor(2);
  floor << 0.0, 0.0;
  double worst_abs = 0.0;
  const double wall = wall_of([&] {
    for (int t = 0; t < 10; ++t) {
      const Index k = 1 + static_cast<Index>(rng.uniform() * 10.0);
      Matrix front(std::min<Index>(k, 10), 2);
      for (Index i = 0; i < front.rows(); ++i) {
        front(i, 0) = rng.uniform();
        front(i, 1) = rng.uniform();
      }
      const double exact = hypervolume(front, unit_ref);
      const double mc = oracle::mc_hypervolume(
          front, unit_ref, floor, 10000000,
          707000 + static_cast<std::uint64_t>(t));
      worst_abs = std::max(worst_abs, std::abs(exact - mc));
    }
  });

  const bool ok = example_err <= 1e-12 && worst_abs <= 0.005;
  report("C07", ok,
         "worked example |hv - 0.3125| " + fmt(example_err, 3) +
             " (<= 1e-12); worst |exact - MC| " + fmt(worst_abs, 3) +
             " over 10 fronts x 1e7 points (<= 0.005 of the unit box), wall " +
             fmt(wall, 3) + " s");
  CHECK(example_err <= 1e-12);
  CHECK(worst_abs <= 0.005);
}

TEST_CASE("c08 nsga-ii sanity", "[acceptance][fast][c08]") {
  // (a) One-variable benchmark f1 = t^2, f2 = (t-2)^2 on [-1000, 1000];
  // the exact front is traced by t in [0, 2].
  Vector lo(1), hi(1);
  lo << -1000.0;
  hi << 1000.0;
  const DesignSpace space{lo, hi};
  auto evaluate = [](const Matrix& designs) {
    Matrix f(designs.rows(), 2);
    for (Index i = 0; i < designs.rows(); ++i) {
      const double t = designs(i, 0);
      f(i, 0) = t * t;
      f(i, 1) = (t - 2.0) * (t - 2.0);
    }
    return f;
  };
  GaConfig ga;
  ga.population = 100;
  ga.generations = 100;
  ga.seed = 20260808;
  const GaResult res = nsga2(evaluate, space, Sense::minimize, ga);

  Vector ref(2);
  ref << 4.5, 4.5;
  const double hv_ga = hypervolume(res.front_values, ref);
  const Index grid_n = 200001;
  Matrix grid_front(grid_n, 2);
  for (Index i = 0; i < grid_n; ++i) {
    const double t = 2.0 * static_cast<double>(i) /
                     static_cast<double>(grid_n - 1);
    grid_front(i, 0) = t * t;
    grid_front(i, 1) = (t - 2.0) * (t - 2.0);
  }
  const double hv_oracle = hypervolume(grid_front, ref);
  const bool ok_hv = hv_ga >= 0.98 * hv_oracle;

  // (b) Fast sort against the O(n^2) peeling oracle.
  Rng rng(20260809);
  int mismatches = 0;
  for (int s = 0; s < 200; ++s) {
    const Index n = 1 + static_cast<Index>(rng.uniform() * 50.0);
    const Index m = 2 + (s % 2);
    Matrix F(n, m);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j) F(i, j) = rng.normal();
    if (s % 7 == 0 && n >= 2) F.row(1) = F.row(0);  // exercise exact ties
    const auto fronts = non_dominated_sort(F, Sense::minimize);
    std::vector<Index> ranks(static_cast<std::size_t>(n), -1);
    for (std::size_t level = 0; level < fronts.size(); ++level)
      for (Index i : fronts[level])
        ranks[static_cast<std::size_t>(i)] = static_cast<Index>(level);
    if (ranks != oracle::brute_front_ranks(F, Sense::minimize)) ++mismatches;
  }

  const bool ok = ok_hv && mismatches == 0;
  report("C08", ok,
         "final-front hv " + fmt(hv_ga, 6) + " vs grid oracle " +
             fmt(hv_oracle, 6) + " (ratio " + fmt(hv_ga / hv_oracle, 4) +
             ", >= 0.98); sort mismatches " + std::to_string(mismatches) +
             "/200 random sets");
  CHECK(hv_ga >= 0.98 * hv_oracle);
  CHECK(mismatches == 0);
}

// ---------------------------------------------------------------------------
// Batch-backed criteria.

TEST_CASE("c09 preferred design rule over a full run",
          "[acceptance][bnh_batch][c09]") {
  const std::vector<ParsedTrace> runs = ensure_batch(kBnhPtmoo);
  const ParsedTrace& t = runs.front();
  int mismatches = 0;
  for (Index m = 30; m <= 80; ++m) {
    const Index oracle_idx = exhaustive_preferred(t.objectives, t.feasible, m);
    const Index recorded = t.preferred_index[static_cast<std::size_t>(m - 30)];
    std::vector<char> feas(t.feasible.begin(),
                           t.feasible.begin() + static_cast<std::size_t>(m));
    const auto direct = preferred_design(t.objectives.topRows(m), feas);
    const Index direct_idx = direct ? direct->index : -1;
    if (oracle_idx != recorded || oracle_idx != direct_idx) ++mismatches;
  }
  const bool ok = mismatches == 0;
  report("C09", ok,
         "exhaustive scan vs recorded and recomputed preferred index: " +
             std::to_string(mismatches) +
             " mismatches over 51 prefixes of a full bnh run (seed 1000)");
  CHECK(mismatches == 0);
}

namespace {

/// Shared body of the two protocol-shape checks (criterion 10).
void check_protocol_shape(const std::string& id, const BatchSpec& arm_a,
                          const BatchSpec& arm_b) {
  const std::vector<ParsedTrace> a = ensure_batch(arm_a);
  const std::vector<ParsedTrace> b = ensure_batch(arm_b);
  bool ok = a.size() == 20 && b.size() == 20;
  std::string reason;
  double wall_a = 0.0, wall_b = 0.0;
  for (int r = 0; r < 20 && ok; ++r) {
    for (const ParsedTrace* t : {&a[static_cast<std::size_t>(r)],
                                 &b[static_cast<std::size_t>(r)]}) {
      if (t->objectives.rows() != 80 ||
          static_cast<Index>(t->feasible.size()) != 80 ||
          t->preferred_index.size() != 51) {
        ok = false;
        reason = "row bookkeeping broken at seed " + std::to_string(t->seed);
        break;
      }
      const auto series = aggregate_series(t->objectives, t->feasible, 30);
      bool defined = std::isfinite(series[0]);
      for (std::size_t k = 1; k < series.size() && ok; ++k) {
        const bool now = std::isfinite(series[k]);
        if (defined && !now) {
          ok = false;
          reason = "aggregate became undefined at seed " +
                   std::to_string(t->seed);
        } else if (defined && now && series[k] > series[k - 1]) {
          ok = false;
          reason = "final-bounds aggregate increased at seed " +
                   std::to_string(t->seed);
        }
        defined = defined || now;
      }
    }
    const double init_diff =
        (a[static_cast<std::size_t>(r)].initial_X -
         b[static_cast<std::size_t>(r)].initial_X)
            .cwiseAbs()
            .maxCoeff();
    if (ok && init_diff != 0.0) {
      ok = false;
      reason = "initial designs differ between arms at seed " +
               std::to_string(a[static_cast<std::size_t>(r)].seed);
    }
    wall_a += a[static_cast<std::size_t>(r)].wall_seconds;
    wall_b += b[static_cast<std::size_t>(r)].wall_seconds;
  }
  std::string detail =
      "both arms: 20 runs, 30+50 observations each (one per iteration), "
      "shared initial designs, final-bounds aggregate non-increasing; "
      "batch walls " +
      fmt(wall_a / 60.0, 3) + " and " + fmt(wall_b / 60.0, 3) +
      " min per 20 seeds (30 min is a desktop target; runs here are "
      "sequential on one core)";
  if (!ok) detail = reason;
  report(id, ok, detail);
  CHECK(ok);
}

}  // namespace

TEST_CASE("c10 protocol shape on bnh", "[acceptance][bnh_batch][c10]") {
  check_protocol_shape("C10-BNH", kBnhPtmoo, kBnhCehvi);
}

TEST_CASE("c10 protocol shape on the beam problem",
          "[acceptance][beam_batch][c10]") {
  check_protocol_shape("C10-BEAM", kBeamKpls, kBeamGpr);
}

TEST_CASE("c11 strategy ordering on bnh", "[acceptance][bnh_batch][c11]") {
  const std::vector<ParsedTrace> pt = ensure_batch(kBnhPtmoo);
  const std::vector<ParsedTrace> ce = ensure_batch(kBnhCehvi);

  // Pooled normalisation: one set of objective bounds across every run of
  // both arms, so the medians are comparable.
  Vector lo = Vector::Constant(2, std::numeric_limits<double>::infinity());
  Vector hi = -lo;
  for (const auto* batch : {&pt, &ce})
    for (const ParsedTrace& t : *batch) {
      lo = lo.cwiseMin(t.objectives.colwise().minCoeff().transpose());
      hi = hi.cwiseMax(t.objectives.colwise().maxCoeff().transpose());
    }
  auto final_aggregate = [&](const ParsedTrace& t) {
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < t.objectives.rows(); ++i) {
      if (!t.feasible[static_cast<std::size_t>(i)]) continue;
      double sum = 0.0;
      for (Index k = 0; k < 2; ++k)
        sum += (t.objectives(i, k) - lo[k]) / (hi[k] - lo[k]);
      best = std::min(best, sum);
    }
    return best;
  };
  std::vector<double> agg_pt, agg_ce;
  for (const ParsedTrace& t : pt) agg_pt.push_back(final_aggregate(t));
  for (const ParsedTrace& t : ce) agg_ce.push_back(final_aggregate(t));
  const double med_pt = median_sorted(agg_pt);
  const double med_ce = median_sorted(agg_ce);

  const bool ok = med_pt <= med_ce;
  report("C11", ok,
         "median pooled aggregate at iteration 50: ptmoo " + fmt(med_pt, 5) +
             " vs cehvi " + fmt(med_ce, 5) + " over 20 shared seeds (want "
             "ptmoo <= cehvi" +
             (ok ? ")" : "; known selection-rule degeneracy on this "
                         "benchmark, see README acceptance notes)"));
  CHECK(med_pt <= med_ce);
}

TEST_CASE("c12 kpls convergence direction on the beam problem",
          "[acceptance][beam_batch][c12]") {
  const std::vector<ParsedTrace> kpls = ensure_batch(kBeamKpls);
  const std::vector<ParsedTrace> gpr = ensure_batch(kBeamGpr);

  auto iters_of = [](const std::vector<ParsedTrace>& batch) {
    std::vector<double> out;
    for (const ParsedTrace& t : batch) {
      const auto series = aggregate_series(t.objectives, t.feasible, 30);
      out.push_back(iterations_to_within(series, 1.05));
    }
    return out;
  };
  const std::vector<double> it_kpls = iters_of(kpls);
  const std::vector<double> it_gpr = iters_of(gpr);
  const double med_kpls = median_sorted(it_kpls);
  const double med_gpr = median_sorted(it_gpr);

  const bool direction = med_kpls <= med_gpr;
  report("C12", direction,
         "median iterations to within 5% of the run's final aggregate: "
         "kpls_3 " +
             fmt(med_kpls, 4) + " vs gpr " + fmt(med_gpr, 4) +
             " over 20 shared seeds (directional check: a violation calls "
             "for investigation, not rejection)");
  if (!direction) {
    std::ostringstream per_seed;
    per_seed << "kpls_3:";
    for (double v : it_kpls) per_seed << " " << v;
    per_seed << "  gpr:";
    for (double v : it_gpr) per_seed << " " << v;
    WARN("c12 direction violated; per-seed iteration counts — "
         << per_seed.str());
  }
  // The direction is reported above; only well-formedness is load-bearing,
  // matching the stated investigate-don't-reject semantics of this check.
  CHECK(std::isfinite(med_kpls));
  CHECK(std::isfinite(med_gpr));
}
