#pragma once

#include <algorithm>
#include <chrono>
#include <numeric>
#include <string>
#include <vector>

#include "eigopt/config.hpp"
#include "eigopt/estimator.hpp"
#include "eigopt/mesh.hpp"
#include "eigopt/optimizer.hpp"

namespace eigopt {

// Greedy bulk chasing: the minimal prefix of elements in descending indicator
// order whose squared mass reaches theta^2 of the total. Ties break toward the
// lower element index; an all-zero indicator marks nothing.
inline std::vector<int> dorfler_mark(const IndicatorField& ind, double theta) {
  if (!(theta > 0.0 && theta <= 1.0))
    throw std::invalid_argument("dorfler_mark: theta must lie in (0,1]");
  const int n = static_cast<int>(ind.per_element.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (ind.per_element[a] != ind.per_element[b])
      return ind.per_element[a] > ind.per_element[b];
    return a < b;
  });
  double total = 0.0;
  for (int t : order) total += ind.per_element[t] * ind.per_element[t];
  if (total == 0.0) return {};
  const double target = theta * theta * total;
  std::vector<int> marked;
  double acc = 0.0;
  for (int t : order) {
    if (ind.per_element[t] == 0.0) break;
    marked.push_back(t);
    acc += ind.per_element[t] * ind.per_element[t];
    if (acc >= target) break;
  }
  std::sort(marked.begin(), marked.end());
  return marked;
}

// Larger admissible realization of the same marking assumption: the sorted
// prefix is extended until it also holds theta of the plain (unsquared)
// indicator sum. The result is a superset of the greedy minimal set, so it
// still contains the argmax and satisfies the bulk inequality.
inline std::vector<int> dorfler_mark_bulk(const IndicatorField& ind, double theta) {
  std::vector<int> minimal = dorfler_mark(ind, theta);
  if (minimal.empty()) return minimal;
  const int n = static_cast<int>(ind.per_element.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (ind.per_element[a] != ind.per_element[b])
      return ind.per_element[a] > ind.per_element[b];
    return a < b;
  });
  double total = 0.0;
  for (int t : order) total += ind.per_element[t];
  const double target = theta * total;
  std::vector<int> marked;
  double acc = 0.0;
  for (int t : order) {
    if (ind.per_element[t] == 0.0) break;
    marked.push_back(t);
    acc += ind.per_element[t];
    if (acc >= target && marked.size() >= minimal.size()) break;
  }
  std::sort(marked.begin(), marked.end());
  return marked;
}

enum class MarkingStrategy { minimal, bulk };

struct MarkedSet {
  std::vector<std::vector<int>> per_estimator;
  std::vector<int> union_set;
  std::vector<double> thetas;
};

inline MarkedSet mark_union(const std::vector<IndicatorField>& fields,
                            const std::vector<double>& thetas,
                            MarkingStrategy strategy = MarkingStrategy::minimal) {
  if (fields.empty() || fields.size() != thetas.size())
    throw std::invalid_argument("mark_union: need one theta per indicator field");
  for (const auto& f : fields)
    if (f.per_element.size() != fields.front().per_element.size())
      throw std::invalid_argument("mark_union: indicator fields live on different meshes");
  MarkedSet ms;
  ms.thetas = thetas;
  std::vector<char> in_union(fields.front().per_element.size(), 0);
  for (size_t j = 0; j < fields.size(); ++j) {
    ms.per_estimator.push_back(strategy == MarkingStrategy::minimal
                                   ? dorfler_mark(fields[j], thetas[j])
                                   : dorfler_mark_bulk(fields[j], thetas[j]));
    for (int t : ms.per_estimator.back()) in_union[t] = 1;
  }
  for (int t = 0; t < static_cast<int>(in_union.size()); ++t)
    if (in_union[t]) ms.union_set.push_back(t);
  return ms;
}

inline Eigen::VectorXd initial_phi(const Mesh& m, const InitSpec& init) {
  Eigen::VectorXd phi(m.num_vertices());
  switch (init.kind) {
    case InitSpec::Kind::constant:
      phi.setConstant(init.value);
      break;
    case InitSpec::Kind::random: {
      std::uint64_t state = init.seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull;
      for (int i = 0; i < phi.size(); ++i) phi[i] = detail::unit_uniform(state) + 0.5;
      break;
    }
    case InitSpec::Kind::cosine:
      for (int i = 0; i < phi.size(); ++i) {
        double x = m.vertices[i].x, y = m.vertices[i].y;
        phi[i] = 0.5 * std::cos(1.0 - std::cos(2.0 * M_PI * x) * std::cos(2.0 * M_PI * y));
      }
      phi = project_box(phi);
      break;
  }
  return phi;
}

struct MeshLevel {
  Mesh mesh;
  Eigen::VectorXd phi;             // final design on this mesh
  EigenSet eig;                    // eigenpairs of the final design
  Eigen::VectorXd lambda_unweighted;
  std::vector<IndicatorField> indicators;
  MarkedSet marks;                 // empty in uniform mode
  double mu_in = 0, beta_in = 0;
  double t_solve = 0, t_estimate = 0, t_mark = 0, t_refine = 0;
  int sandwich_violations = 0;
};

struct AdaptiveRun {
  std::vector<MeshLevel> levels;
  std::vector<HistoryRow> history;
  AfemParams::Mode mode = AfemParams::Mode::adaptive;
  std::vector<std::string> log;
};

namespace detail {

inline int count_edges(const Mesh& m) {
  return static_cast<int>(build_edge_table(m).edges.size());
}

inline AdaptiveRun run_loop(const RunConfig& cfg, AfemParams::Mode mode) {
  AdaptiveRun run;
  run.mode = mode;

  Mesh mesh = generate_domain(cfg.domain);
  OptimizerState state;
  state.phi = initial_phi(mesh, cfg.init);
  state.mu = cfg.inner.mu0;
  state.beta = cfg.inner.beta0;
  std::vector<Eigen::VectorXd> warm, warm_unweighted;

  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
  };

  for (int k = 0; k < cfg.afem.K; ++k) {
    validate_mesh(mesh);
    MeshLevel level;
    level.mu_in = state.mu;
    level.beta_in = state.beta;

    FemContext ctx = FemContext::build(mesh, cfg.objective.volume_fraction);

    // unweighted reference spectrum for the eigenvalue bracket diagnostics
    int m_pairs = std::min(static_cast<int>(ctx.dmap.free.size()), cfg.objective.max_index() + 1);
    {
      SpMat W0(mesh.num_vertices(), mesh.num_vertices());
      EigenSet plain = solve_eigenpairs(ctx.K, W0, ctx.M, ctx.dmap, 0.0, m_pairs, cfg.eig,
                                        warm_unweighted.empty() ? nullptr : &warm_unweighted);
      warm_unweighted = plain.vectors;
      level.lambda_unweighted = plain.lambdas;
    }

    SolveMonitor monitor;
    monitor.lambda_unweighted = &level.lambda_unweighted;
    monitor.warn_degenerate = true;
    monitor.log = &run.log;

    auto t0 = clock::now();
    run_fixed_mesh(ctx, cfg.objective, cfg.inner, cfg.eig, state, k, &warm, &monitor);
    EigenSet final_eig = eigensolve_for(ctx, cfg.objective, state.phi, cfg.eig,
                                        warm.empty() ? nullptr : &warm);
    warm = final_eig.vectors;
    {
      // bracket check for the final solve as well
      const Eigen::VectorXd& lt = level.lambda_unweighted;
      for (int j = 0; j < final_eig.lambdas.size() && j < lt.size(); ++j) {
        double slack = 10.0 * cfg.eig.tol * std::max(1.0, final_eig.lambdas[j]);
        if (final_eig.lambdas[j] < lt[j] - slack ||
            final_eig.lambdas[j] > lt[j] + cfg.objective.alpha + slack)
          ++monitor.sandwich_violations;
      }
    }
    auto t1 = clock::now();
    level.t_solve = seconds(t0, t1);
    level.sandwich_violations = monitor.sandwich_violations;

    double volume_shift = cfg.afem.lagrangian_estimator
                              ? state.mu + ctx.volume_error(state.phi) / state.beta
                              : 0.0;
    level.indicators =
        compute_indicators(mesh, state.phi, cfg.objective, final_eig, volume_shift);
    auto t2 = clock::now();
    level.t_estimate = seconds(t1, t2);

    if (mode == AfemParams::Mode::adaptive)
      level.marks = mark_union(level.indicators, cfg.afem.thetas,
                               cfg.afem.marking == AfemParams::Marking::minimal
                                   ? MarkingStrategy::minimal
                                   : MarkingStrategy::bulk);
    auto t3 = clock::now();
    level.t_mark = seconds(t2, t3);

    level.mesh = mesh;
    level.phi = state.phi;
    level.eig = std::move(final_eig);

    bool last = (k == cfg.afem.K - 1);
    bool stop = false;
    if (cfg.afem.estimator_tol > 0.0) {
      double total = 0.0;
      for (const auto& f : level.indicators) total += f.global * f.global;
      if (total <= cfg.afem.estimator_tol) {
        run.log.push_back("estimator tolerance reached on mesh " + std::to_string(k));
        stop = true;
      }
    }
    if (cfg.afem.vertex_budget > 0) {
      long next = (mode == AfemParams::Mode::adaptive)
                      ? mesh.num_vertices()
                      : mesh.num_vertices() + count_edges(mesh);
      if (next > cfg.afem.vertex_budget) {
        run.log.push_back("vertex budget reached on mesh " + std::to_string(k));
        stop = true;
      }
    }

    if (!last && !stop) {
      Mesh next = (mode == AfemParams::Mode::adaptive) ? bisect(mesh, level.marks.union_set)
                                                       : uniform_refine(mesh);
      if (cfg.afem.cold_restart) {
        state.phi = initial_phi(next, cfg.init);
        state.mu = cfg.inner.mu0;
        state.beta = cfg.inner.beta0;
        warm.clear();
        warm_unweighted.clear();
      } else {
        state.phi = prolongate(mesh, next, state.phi);
        for (auto& w : warm) w = prolongate(mesh, next, w);
        for (auto& w : warm_unweighted) w = prolongate(mesh, next, w);
        // The multiplier is part of the warm start. The penalty restarts at
        // the depth the first mesh reached (floored for fast schedules), so
        // later meshes keep multiplier tracking fast without driving beta
        // towards zero; full continuation is available as an option.
        if (!cfg.afem.carry_penalty)
          state.beta = cfg.inner.beta0 *
                       std::max(std::pow(cfg.inner.xi, cfg.inner.n_outer), 0.05);
      }
      mesh = std::move(next);
    }
    auto t4 = clock::now();
    level.t_refine = seconds(t3, t4);
    run.levels.push_back(std::move(level));
    if (stop) break;
  }
  run.history = state.history;
  return run;
}

}  // namespace detail

// Algorithm loop SOLVE -> ESTIMATE -> MARK -> REFINE with warm-started
// optimizer state across meshes.
inline AdaptiveRun adaptive_loop(const RunConfig& cfg) {
  return detail::run_loop(cfg, AfemParams::Mode::adaptive);
}

// Baseline: identical driver with uniform refinement and no marking.
inline AdaptiveRun uniform_loop(const RunConfig& cfg) {
  return detail::run_loop(cfg, AfemParams::Mode::uniform);
}

inline AdaptiveRun run_config(const RunConfig& cfg) {
  return cfg.afem.mode == AfemParams::Mode::uniform ? uniform_loop(cfg) : adaptive_loop(cfg);
}

}  // namespace eigopt
