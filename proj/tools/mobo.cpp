// Command-line front end: execute optimization runs described by a JSON
// config (`mobo run`) and summarize finished run directories into a tidy CSV
// (`mobo compare`).

#include <mobo/io.hpp>

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct RunSpec {
  mobo::Problem problem;
  mobo::OptimizationConfig config;  // seed field holds the base seed
  int repetitions = 1;
  bool share_initial = true;
  fs::path output_dir = "runs";
};

std::optional<mobo::Index> parse_surrogate(const std::string& label) {
  if (label == "gpr") return std::nullopt;
  const std::string prefix = "kpls_";
  if (label.rfind(prefix, 0) == 0) {
    try {
      const int h = std::stoi(label.substr(prefix.size()));
      return static_cast<mobo::Index>(h);
    } catch (const std::exception&) {
      // fall through to the error below
    }
  }
  throw mobo::config_error("unknown surrogate '" + label +
                           "' (expected 'gpr' or 'kpls_<h>')");
}

void reject_unknown_keys(const nlohmann::json& j,
                         const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw mobo::config_error("unknown key '" + item.key() + "' in " + where);
  }
}

RunSpec parse_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw mobo::config_error("cannot open config " + path.string());
  nlohmann::json j;
  in >> j;
  reject_unknown_keys(
      j,
      {"problem", "strategy", "surrogate", "n_initial", "iterations",
       "repetitions", "seed", "eps2", "doe", "share_initial",
       "front_restricted", "ga", "gp", "output_dir"},
      "config");
  if (!j.contains("problem"))
    throw mobo::config_error("config requires a 'problem' name");

  RunSpec spec;
  spec.problem = mobo::make_problem(j.at("problem").get<std::string>());
  auto& cfg = spec.config;
  cfg.strategy = j.value("strategy", cfg.strategy);
  cfg.pls_components = parse_surrogate(j.value("surrogate", "gpr"));
  cfg.n_initial = j.value("n_initial", cfg.n_initial);
  cfg.iterations = j.value("iterations", cfg.iterations);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.eps2 = j.value("eps2", cfg.eps2);
  cfg.doe = j.value("doe", cfg.doe);
  cfg.front_restricted = j.value("front_restricted", cfg.front_restricted);
  if (j.contains("ga")) {
    const auto& g = j.at("ga");
    reject_unknown_keys(g,
                        {"population", "generations", "crossover_probability",
                         "crossover_eta", "mutation_probability",
                         "mutation_eta"},
                        "config.ga");
    cfg.ga.population = g.value("population", cfg.ga.population);
    cfg.ga.generations = g.value("generations", cfg.ga.generations);
    cfg.ga.crossover_probability =
        g.value("crossover_probability", cfg.ga.crossover_probability);
    cfg.ga.crossover_eta = g.value("crossover_eta", cfg.ga.crossover_eta);
    cfg.ga.mutation_probability =
        g.value("mutation_probability", cfg.ga.mutation_probability);
    cfg.ga.mutation_eta = g.value("mutation_eta", cfg.ga.mutation_eta);
  }
  if (j.contains("gp")) {
    const auto& g = j.at("gp");
    reject_unknown_keys(
        g, {"multistarts", "max_opt_iterations", "gradient_tolerance"},
        "config.gp");
    cfg.gp.multistarts = g.value("multistarts", cfg.gp.multistarts);
    cfg.gp.max_opt_iterations =
        g.value("max_opt_iterations", cfg.gp.max_opt_iterations);
    cfg.gp.gradient_tolerance =
        g.value("gradient_tolerance", cfg.gp.gradient_tolerance);
  }
  spec.repetitions = j.value("repetitions", 1);
  if (spec.repetitions < 1)
    throw mobo::config_error("repetitions must be >= 1");
  spec.share_initial = j.value("share_initial", true);
  spec.output_dir = j.value("output_dir", std::string("runs"));
  cfg.validate(spec.problem);
  return spec;
}

/// Seed of repetition r.  Shared-initial runs use base + r verbatim, so any
/// config launched with the same base sees the same initial design; otherwise
/// the seed is salted with the strategy/surrogate label for fully independent
/// streams.
std::uint64_t repetition_seed(const RunSpec& spec, int r) {
  const std::uint64_t logical = spec.config.seed + static_cast<std::uint64_t>(r);
  if (spec.share_initial) return logical;
  const std::string label =
      spec.config.strategy + "-" + mobo::surrogate_label(spec.config);
  std::uint64_t state = 0xA0761D6478BD642Full;
  for (char c : label) {
    state ^= static_cast<unsigned char>(c);
    mobo::splitmix64(state);
  }
  state ^= logical;
  return mobo::splitmix64(state);
}

int do_run(const fs::path& config_path, int workers,
           const std::string& output_override,
           const std::optional<std::uint64_t>& seed_override) {
  RunSpec spec = parse_run_config(config_path);
  if (!output_override.empty()) spec.output_dir = output_override;
  if (seed_override) spec.config.seed = *seed_override;
  fs::create_directories(spec.output_dir);

  std::atomic<int> next{0};
  std::mutex io_mutex;
  std::vector<std::string> failures;
  auto worker = [&]() {
    for (int r = next.fetch_add(1); r < spec.repetitions;
         r = next.fetch_add(1)) {
      const std::uint64_t logical_seed =
          spec.config.seed + static_cast<std::uint64_t>(r);
      try {
        mobo::OptimizationConfig cfg = spec.config;
        cfg.seed = repetition_seed(spec, r);
        const mobo::RunResult res = mobo::run_optimization(spec.problem, cfg);
        const std::string tag = std::to_string(logical_seed);
        mobo::write_text_atomic(
            spec.output_dir / ("trace_seed" + tag + ".json"),
            mobo::trace_to_json(res.trace).dump(2) + "\n");
        mobo::write_text_atomic(spec.output_dir / ("run_seed" + tag + ".csv"),
                                mobo::run_csv(res.trace));
        int n_feasible = 0;
        for (char f : res.data.feasible) n_feasible += f != 0;
        std::lock_guard lock(io_mutex);
        std::cout << "seed " << logical_seed << ": " << res.data.size()
                  << " evaluations, " << n_feasible << " feasible, "
                  << res.trace.wall_seconds << " s\n";
      } catch (const std::exception& err) {
        std::lock_guard lock(io_mutex);
        failures.push_back("seed " + std::to_string(logical_seed) + ": " +
                           err.what());
      }
    }
  };

  const int n_threads = std::min(workers, spec.repetitions);
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  if (!failures.empty()) {
    for (const std::string& f : failures) std::cerr << "failed: " << f << "\n";
    return 2;
  }
  std::cout << spec.repetitions << " run(s) written to "
            << spec.output_dir.string() << "\n";
  return 0;
}

int do_compare(const std::vector<std::string>& dirs,
               const std::string& out_csv) {
  std::vector<mobo::RunSummary> runs;
  for (const std::string& dir : dirs) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("trace_seed", 0) == 0 &&
          entry.path().extension() == ".json")
        runs.push_back(mobo::load_run_summary(entry.path()));
    }
  }
  if (runs.empty())
    throw mobo::config_error("no trace_seed*.json files found");
  const auto rows = mobo::compare_table(runs);
  mobo::write_text_atomic(out_csv, mobo::compare_csv(rows));
  std::cout << runs.size() << " run(s) summarized into " << out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained multi-objective Bayesian optimization toolkit"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Execute runs from a JSON config");
  std::string config_path;
  int workers = 1;
  std::string output_override;
  run->add_option("config", config_path, "JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--workers", workers, "Repetitions executed in parallel")
      ->check(CLI::PositiveNumber);
  run->add_option("--output-dir", output_override,
                  "Override the configured output directory");
  std::uint64_t seed_value = 0;
  auto* seed_opt =
      run->add_option("--seed", seed_value, "Override the configured seed");

  auto* compare =
      app.add_subcommand("compare", "Summarize run directories into a CSV");
  std::vector<std::string> dirs;
  std::string out_csv;
  compare->add_option("dirs", dirs, "Directories holding trace_seed*.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  compare->add_option("--out", out_csv, "Output CSV path")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) {
      std::optional<std::uint64_t> seed_override;
      if (seed_opt->count() > 0) seed_override = seed_value;
      return do_run(config_path, workers, output_override, seed_override);
    }
    return do_compare(dirs, out_csv);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}
