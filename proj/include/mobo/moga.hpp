#pragma once

// NSGA-II: elitist non-dominated sorting genetic algorithm with simulated
// binary crossover and polynomial mutation, used both as a baseline
// multi-objective optimizer and as the inner maximizer of acquisition
// functions.

#include <mobo/acquisition.hpp>
#include <mobo/core.hpp>
#include <mobo/sampling.hpp>

#include <functional>
#include <numeric>

namespace mobo {

/// Fast non-dominated sort (Deb): partitions row indices of the objective
/// matrix into fronts; front 0 is non-dominated, front k+1 is non-dominated
/// once fronts 0..k are removed.
inline std::vector<std::vector<Index>> non_dominated_sort(const Matrix& F,
                                                          Sense sense) {
  const Index n = F.rows();
  std::vector<std::vector<Index>> dominated_by(static_cast<std::size_t>(n));
  std::vector<int> domination_count(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<Index>> fronts(1);
  for (Index p = 0; p < n; ++p) {
    for (Index q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates(F.row(p).transpose(), F.row(q).transpose(), sense))
        dominated_by[static_cast<std::size_t>(p)].push_back(q);
      else if (dominates(F.row(q).transpose(), F.row(p).transpose(), sense))
        domination_count[static_cast<std::size_t>(p)]++;
    }
    if (domination_count[static_cast<std::size_t>(p)] == 0)
      fronts[0].push_back(p);
  }
  std::size_t k = 0;
  while (!fronts[k].empty()) {
    std::vector<Index> next;
    for (Index p : fronts[k]) {
      for (Index q : dominated_by[static_cast<std::size_t>(p)]) {
        if (--domination_count[static_cast<std::size_t>(q)] == 0)
          next.push_back(q);
      }
    }
    fronts.push_back(std::move(next));
    ++k;
  }
  fronts.pop_back();  // the loop always leaves one empty trailing front
  return fronts;
}

/// Crowding distance of the rows of a single front's objective matrix.
/// Boundary points get +infinity; an objective with zero range contributes
/// nothing (so exact duplicates of interior points end up at 0).
inline Vector crowding_distance(const Matrix& F) {
  const Index n = F.rows();
  Vector dist = Vector::Zero(n);
  if (n == 0) return dist;
  const double inf = std::numeric_limits<double>::infinity();
  if (n <= 2) return Vector::Constant(n, inf);
  for (Index m = 0; m < F.cols(); ++m) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return F(a, m) < F(b, m); });
    dist[order.front()] = inf;
    dist[order.back()] = inf;
    const double range = F(order.back(), m) - F(order.front(), m);
    if (!(range > 0.0)) continue;
    for (Index i = 1; i + 1 < n; ++i) {
      dist[order[static_cast<std::size_t>(i)]] +=
          (F(order[static_cast<std::size_t>(i + 1)], m) -
           F(order[static_cast<std::size_t>(i - 1)], m)) /
          range;
    }
  }
  return dist;
}

struct GaConfig {
  Index population = 100;   // even, >= 4
  Index generations = 100;  // offspring rounds after the initial population
  double crossover_probability = 0.9;
  double crossover_eta = 15.0;
  /// Per-variable mutation probability; any value <= 0 selects 1/d.
  double mutation_probability = -1.0;
  double mutation_eta = 20.0;
  std::uint64_t seed = 0;
  /// Optional observer invoked after each survival step with the current
  /// population (designs, objective values); used by tests.
  std::function<void(Index, const Matrix&, const Matrix&)> on_generation{};
};

struct GaResult {
  /// Non-dominated front of the final population.
  Matrix front_designs;
  Matrix front_values;
  /// The full final population.
  Matrix population_designs;
  Matrix population_values;
};

namespace detail {

/// Bounded simulated binary crossover (Deb & Agrawal) on one variable pair.
inline void sbx_variable(double& c1, double& c2, double lo, double hi,
                         double eta, Rng& rng) {
  if (std::abs(c1 - c2) < 1e-14) return;
  double y1 = std::min(c1, c2), y2 = std::max(c1, c2);
  const double u = rng.uniform_open();
  auto spread = [&](double beta) {
    const double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
    if (u <= 1.0 / alpha) return std::pow(u * alpha, 1.0 / (eta + 1.0));
    return std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
  };
  double beta_lo = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
  double child1 = 0.5 * ((y1 + y2) - spread(beta_lo) * (y2 - y1));
  double beta_hi = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
  double child2 = 0.5 * ((y1 + y2) + spread(beta_hi) * (y2 - y1));
  child1 = std::clamp(child1, lo, hi);
  child2 = std::clamp(child2, lo, hi);
  if (rng.uniform() < 0.5) std::swap(child1, child2);
  c1 = child1;
  c2 = child2;
}

/// Bounded polynomial mutation (Deb & Goyal) on one variable.
inline double polynomial_mutation(double y, double lo, double hi, double eta,
                                  Rng& rng) {
  const double range = hi - lo;
  const double u = rng.uniform_open();
  const double mut_pow = 1.0 / (eta + 1.0);
  double delta_q;
  if (u < 0.5) {
    const double xy = 1.0 - (y - lo) / range;
    const double val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(xy, eta + 1.0);
    delta_q = std::pow(val, mut_pow) - 1.0;
  } else {
    const double xy = 1.0 - (hi - y) / range;
    const double val =
        2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(xy, eta + 1.0);
    delta_q = 1.0 - std::pow(val, mut_pow);
  }
  return std::clamp(y + delta_q * range, lo, hi);
}

}  // namespace detail

/// Run NSGA-II on a batched evaluator: `evaluate` maps a population matrix
/// (rows are designs) to an objective matrix (rows are objective vectors).
inline GaResult nsga2(const std::function<Matrix(const Matrix&)>& evaluate,
                      const DesignSpace& space, Sense sense,
                      const GaConfig& cfg) {
  space.validate();
  if (cfg.population < 4 || cfg.population % 2 != 0)
    throw config_error("nsga2: population must be even and >= 4");
  if (cfg.generations < 1)
    throw config_error("nsga2: generations must be >= 1");
  const Index d = space.dim();
  const Index pop_n = cfg.population;
  const double p_mut = cfg.mutation_probability > 0.0
                           ? cfg.mutation_probability
                           : 1.0 / static_cast<double>(d);

  Matrix pop = lhs_uniform(space, pop_n, cfg.seed);
  Matrix vals = evaluate(pop);
  if (vals.rows() != pop_n)
    throw dimension_error("nsga2: evaluator returned wrong row count");

  Rng rng = Rng(cfg.seed).split(0x6E736761ull);  // operator stream

  // Rank and crowding of the current population (recomputed after survival).
  std::vector<Index> rank(static_cast<std::size_t>(pop_n));
  Vector crowd(pop_n);
  auto recompute_rank_crowd = [&]() {
    auto fronts = non_dominated_sort(vals, sense);
    for (std::size_t f = 0; f < fronts.size(); ++f) {
      Matrix front_vals(static_cast<Index>(fronts[f].size()), vals.cols());
      for (std::size_t i = 0; i < fronts[f].size(); ++i)
        front_vals.row(static_cast<Index>(i)) = vals.row(fronts[f][i]);
      Vector cd = crowding_distance(front_vals);
      for (std::size_t i = 0; i < fronts[f].size(); ++i) {
        rank[static_cast<std::size_t>(fronts[f][i])] = static_cast<Index>(f);
        crowd[fronts[f][i]] = cd[static_cast<Index>(i)];
      }
    }
  };
  recompute_rank_crowd();

  auto tournament = [&]() -> Index {
    Index a = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(pop_n)));
    Index b = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(pop_n)));
    const auto ra = rank[static_cast<std::size_t>(a)];
    const auto rb = rank[static_cast<std::size_t>(b)];
    if (ra != rb) return ra < rb ? a : b;
    if (crowd[a] != crowd[b]) return crowd[a] > crowd[b] ? a : b;
    return a;
  };

  for (Index gen = 0; gen < cfg.generations; ++gen) {
    // Variation: tournament selection, SBX, polynomial mutation.
    Matrix offspring(pop_n, d);
    for (Index i = 0; i < pop_n; i += 2) {
      Vector p1 = pop.row(tournament()).transpose();
      Vector p2 = pop.row(tournament()).transpose();
      if (rng.uniform() < cfg.crossover_probability) {
        for (Index j = 0; j < d; ++j) {
          if (rng.uniform() < 0.5)
            detail::sbx_variable(p1[j], p2[j], space.lower[j], space.upper[j],
                                 cfg.crossover_eta, rng);
        }
      }
      for (Index j = 0; j < d; ++j) {
        if (rng.uniform() < p_mut)
          p1[j] = detail::polynomial_mutation(p1[j], space.lower[j],
                                              space.upper[j], cfg.mutation_eta,
                                              rng);
        if (rng.uniform() < p_mut)
          p2[j] = detail::polynomial_mutation(p2[j], space.lower[j],
                                              space.upper[j], cfg.mutation_eta,
                                              rng);
      }
      offspring.row(i) = p1.transpose();
      offspring.row(i + 1) = p2.transpose();
    }
    Matrix off_vals = evaluate(offspring);
    if (off_vals.rows() != pop_n)
      throw dimension_error("nsga2: evaluator returned wrong row count");

    // (mu + lambda) survival on the combined population.
    Matrix all_pop(2 * pop_n, d), all_vals(2 * pop_n, vals.cols());
    all_pop << pop, offspring;
    all_vals << vals, off_vals;
    auto fronts = non_dominated_sort(all_vals, sense);

    Index filled = 0;
    for (const auto& front : fronts) {
      Matrix front_vals(static_cast<Index>(front.size()), all_vals.cols());
      for (std::size_t i = 0; i < front.size(); ++i)
        front_vals.row(static_cast<Index>(i)) = all_vals.row(front[i]);
      if (filled + static_cast<Index>(front.size()) <= pop_n) {
        for (std::size_t i = 0; i < front.size(); ++i) {
          pop.row(filled) = all_pop.row(front[i]);
          vals.row(filled) = front_vals.row(static_cast<Index>(i));
          ++filled;
        }
      } else {
        // Partial front: take the most crowded-out first.
        Vector cd = crowding_distance(front_vals);
        std::vector<Index> order(front.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
          return cd[a] > cd[b];
        });
        for (Index i = 0; filled < pop_n; ++i) {
          pop.row(filled) = all_pop.row(front[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
          vals.row(filled) = front_vals.row(order[static_cast<std::size_t>(i)]);
          ++filled;
        }
      }
      if (filled == pop_n) break;
    }
    recompute_rank_crowd();
    if (cfg.on_generation) cfg.on_generation(gen + 1, pop, vals);
  }

  GaResult result;
  result.population_designs = pop;
  result.population_values = vals;
  std::vector<Index> first;
  for (Index i = 0; i < pop_n; ++i)
    if (rank[static_cast<std::size_t>(i)] == 0) first.push_back(i);
  result.front_designs.resize(static_cast<Index>(first.size()), d);
  result.front_values.resize(static_cast<Index>(first.size()), vals.cols());
  for (std::size_t i = 0; i < first.size(); ++i) {
    result.front_designs.row(static_cast<Index>(i)) = pop.row(first[i]);
    result.front_values.row(static_cast<Index>(i)) = vals.row(first[i]);
  }
  return result;
}

}  // namespace mobo
