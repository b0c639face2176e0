#pragma once

#include <Eigen/SparseCholesky>
#include <memory>
#include <stdexcept>
#include <vector>

#include "eigopt/eigensolver.hpp"
#include "eigopt/fem.hpp"
#include "eigopt/mesh.hpp"
#include "eigopt/quadrature.hpp"

namespace eigopt {

enum class PotentialKind { double_well, double_obstacle };

inline double potential_value(PotentialKind k, double p) {
  if (k == PotentialKind::double_well) return 0.25 * p * p * (1.0 - p) * (1.0 - p);
  return 0.5 * p * (1.0 - p);
}

inline double potential_deriv(PotentialKind k, double p) {
  if (k == PotentialKind::double_well) return 0.5 * p * (1.0 - p) * (1.0 - 2.0 * p);
  return 0.5 - p;
}

// Objective Psi(lambda) = sum_j weights[j] * lambda_{indices[j]} plus the
// Ginzburg-Landau regularization; maximization is encoded by negated weights.
struct ObjectiveSpec {
  std::vector<int> indices;     // 1-based eigenvalue indices, strictly increasing
  std::vector<double> weights;  // minimization weights
  double gamma = 0.0;
  double epsilon = 0.0;
  double alpha = 0.0;
  double volume_fraction = 0.0;
  PotentialKind potential = PotentialKind::double_well;

  int max_index() const {
    int mi = 0;
    for (int i : indices) mi = std::max(mi, i);
    return mi;
  }
  void validate() const {
    if (indices.empty() || indices.size() > 3)
      throw std::invalid_argument("objective: need 1..3 eigenvalue indices");
    if (indices.size() != weights.size())
      throw std::invalid_argument("objective: indices and weights length mismatch");
    for (size_t j = 0; j < indices.size(); ++j) {
      if (indices[j] < 1) throw std::invalid_argument("objective: indices are 1-based");
      if (j > 0 && indices[j] <= indices[j - 1])
        throw std::invalid_argument("objective: indices must be strictly increasing");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("objective: epsilon must be > 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("objective: gamma must be > 0");
    if (!(alpha > 0.0)) throw std::invalid_argument("objective: alpha must be > 0");
    if (!(volume_fraction > 0.0 && volume_fraction < 1.0))
      throw std::invalid_argument("objective: volume fraction must be in (0,1)");
  }
};

// Per-mesh assembled state shared by the optimizer and the adaptive driver.
struct FemContext {
  const Mesh* mesh = nullptr;
  SpMat K, M;
  Eigen::VectorXd lumped;
  DirichletMap dmap;
  double area = 0.0;
  double max_h = 0.0;
  double volume_target = 0.0;
  std::shared_ptr<Eigen::SimplicialLLT<SpMat>> mass_llt;
  std::shared_ptr<Eigen::SimplicialLLT<SpMat>> flow_llt;  // pattern reused across steps
  std::shared_ptr<bool> flow_pattern_ready;

  static FemContext build(const Mesh& m, double volume_fraction) {
    FemContext c;
    c.mesh = &m;
    c.K = assemble_stiffness(m);
    c.M = assemble_mass(m);
    c.lumped = lumped_mass(m);
    c.dmap = make_dirichlet_map(m);
    c.area = m.total_area();
    c.max_h = max_mesh_size(m);
    c.volume_target = volume_fraction * c.area;
    c.mass_llt = std::make_shared<Eigen::SimplicialLLT<SpMat>>();
    c.mass_llt->compute(c.M);
    if (c.mass_llt->info() != Eigen::Success)
      throw std::runtime_error("fem context: mass factorization failed");
    c.flow_llt = std::make_shared<Eigen::SimplicialLLT<SpMat>>();
    c.flow_pattern_ready = std::make_shared<bool>(false);
    return c;
  }

  double volume_error(const Eigen::VectorXd& phi) const {
    return lumped.dot(phi) - volume_target;
  }
};

inline double ginzburg_landau(const FemContext& ctx, const ObjectiveSpec& spec,
                              const Eigen::VectorXd& phi) {
  double grad2 = phi.dot(ctx.K * phi);
  double fint = 0.0;
  const auto rule = tri_quad_degree4();
  const Mesh& m = *ctx.mesh;
  for (int t = 0; t < m.num_elements(); ++t) {
    const auto& e = m.elements[t];
    double a = m.element_area(t);
    for (const auto& qp : rule) {
      double p = qp.l0 * phi[e[0]] + qp.l1 * phi[e[1]] + qp.l2 * phi[e[2]];
      fint += a * qp.w * potential_value(spec.potential, p);
    }
  }
  return 0.5 * spec.epsilon * grad2 + fint / spec.epsilon;
}

struct ObjectiveValue {
  double J = 0.0;   // Psi + gamma * GL energy
  double L = 0.0;   // J + mu G + G^2 / (2 beta)
  double Psi = 0.0;
  double GL = 0.0;  // gamma * GL energy
  double G = 0.0;
};

inline ObjectiveValue evaluate_objective(const FemContext& ctx, const ObjectiveSpec& spec,
                                         const Eigen::VectorXd& phi,
                                         const Eigen::VectorXd& lambdas, double mu, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("evaluate_objective: beta must be > 0");
  ObjectiveValue v;
  for (size_t j = 0; j < spec.indices.size(); ++j) {
    int idx = spec.indices[j] - 1;
    if (idx >= lambdas.size())
      throw std::invalid_argument("evaluate_objective: eigenvalue index beyond solve");
    v.Psi += spec.weights[j] * lambdas[idx];
  }
  v.GL = spec.gamma * ginzburg_landau(ctx, spec, phi);
  v.J = v.Psi + v.GL;
  v.G = ctx.volume_error(phi);
  v.L = v.J + mu * v.G + v.G * v.G / (2.0 * beta);
  return v;
}

// L2 Riesz representative of L'(phi): solve M g = b with
// b = gamma (eps K phi + (1/eps) <f'(phi), .>) + alpha sum_j c_j <w_j^2, .>
//     + (mu + G/beta) <1, .>.
struct GradientField {
  Eigen::VectorXd values;
  double l2_norm = 0.0;
  double linf = 0.0;
};

inline GradientField lagrangian_gradient(const FemContext& ctx, const ObjectiveSpec& spec,
                                         const Eigen::VectorXd& phi, const EigenSet& es,
                                         double mu, double beta) {
  const Mesh& m = *ctx.mesh;
  const auto rule = tri_quad_degree4();
  Eigen::VectorXd b = spec.gamma * spec.epsilon * (ctx.K * phi);

  Eigen::VectorXd load = Eigen::VectorXd::Zero(m.num_vertices());
  for (int t = 0; t < m.num_elements(); ++t) {
    const auto& e = m.elements[t];
    double a = m.element_area(t);
    for (const auto& qp : rule) {
      double p = qp.l0 * phi[e[0]] + qp.l1 * phi[e[1]] + qp.l2 * phi[e[2]];
      double c = spec.gamma / spec.epsilon * potential_deriv(spec.potential, p);
      for (size_t j = 0; j < spec.indices.size(); ++j) {
        const Eigen::VectorXd& w = es.vectors[spec.indices[j] - 1];
        double wq = qp.l0 * w[e[0]] + qp.l1 * w[e[1]] + qp.l2 * w[e[2]];
        c += spec.alpha * spec.weights[j] * wq * wq;
      }
      double lam[3] = {qp.l0, qp.l1, qp.l2};
      for (int i = 0; i < 3; ++i) load[e[i]] += a * qp.w * c * lam[i];
    }
  }
  b += load;
  b += (mu + ctx.volume_error(phi) / beta) * ctx.lumped;

  GradientField g;
  g.values = ctx.mass_llt->solve(b);
  g.l2_norm = std::sqrt(std::max(0.0, g.values.dot(b)));
  g.linf = g.values.size() ? g.values.cwiseAbs().maxCoeff() : 0.0;
  return g;
}

// Reaction r(phi) = phi - 1/2 - 30 gtilde (g0/|g0|_L2) (1-phi) phi, nodally.
inline Eigen::VectorXd reaction_values(const Eigen::VectorXd& phi, const GradientField& g0,
                                       double gamma_tilde) {
  Eigen::VectorXd r(phi.size());
  double scale = g0.l2_norm > 0.0 ? 30.0 * gamma_tilde / g0.l2_norm : 0.0;
  for (int i = 0; i < phi.size(); ++i)
    r[i] = phi[i] - 0.5 - scale * g0.values[i] * (1.0 - phi[i]) * phi[i];
  return r;
}

// One semi-implicit step of the gradient flow. The reaction term is lumped
// per node and split by the sign of r so that the system stays SPD:
//   r <= 0: -(1-phi^m) r phi^{m+1} moves to the left-hand side,
//   r  > 0:  phi^m r phi^{m+1} moves left and phi^m r stays right.
inline Eigen::VectorXd gradient_flow_step(const FemContext& ctx, const Eigen::VectorXd& phi,
                                          const GradientField& g0, double gamma_tilde,
                                          double tau, double kappa) {
  if (!(tau > 0.0)) throw std::invalid_argument("gradient_flow_step: tau must be > 0");
  Eigen::VectorXd r = reaction_values(phi, g0, gamma_tilde);
  const int n = phi.size();
  Eigen::VectorXd diag(n), rhs_extra = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (r[i] <= 0.0) {
      diag[i] = -ctx.lumped[i] * (1.0 - phi[i]) * r[i];
    } else {
      diag[i] = ctx.lumped[i] * phi[i] * r[i];
      rhs_extra[i] = ctx.lumped[i] * phi[i] * r[i];
    }
  }
  SpMat A = SpMat((1.0 / tau) * ctx.M) + kappa * ctx.K;
  for (int i = 0; i < n; ++i) A.coeffRef(i, i) += diag[i];
  Eigen::VectorXd rhs = (1.0 / tau) * (ctx.M * phi) + rhs_extra;

  auto& llt = *ctx.flow_llt;
  if (!*ctx.flow_pattern_ready) {
    llt.analyzePattern(A);
    *ctx.flow_pattern_ready = true;
  }
  llt.factorize(A);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("gradient_flow_step: system matrix is not SPD");
  return llt.solve(rhs);
}

inline Eigen::VectorXd project_box(Eigen::VectorXd phi) {
  for (int i = 0; i < phi.size(); ++i) phi[i] = std::min(1.0, std::max(0.0, phi[i]));
  return phi;
}

inline double update_multiplier(double mu, double beta_next, double G) {
  if (!(beta_next > 0.0)) throw std::invalid_argument("update_multiplier: beta must be > 0");
  return mu + G / beta_next;
}

inline double update_penalty(double beta, double xi) {
  if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("update_penalty: xi must be in (0,1)");
  return xi * beta;
}

// tau = zeta * max_T h_T / max |L'(phi)|; falls back to zeta * max_T h_T for a
// vanishing gradient.
inline double compute_timestep(const FemContext& ctx, const GradientField& g0, double zeta) {
  if (!(zeta > 0.0)) throw std::invalid_argument("compute_timestep: zeta must be > 0");
  if (g0.linf > 0.0) return zeta * ctx.max_h / g0.linf;
  return zeta * ctx.max_h;
}

struct InnerParams {
  int n_outer = 20;      // N
  int m_inner = 10;      // M
  double mu0 = 0.0;
  double beta0 = 100.0;
  double gamma_tilde = 20.0;
  double xi = 0.9;
  double zeta = 0.1;
};

struct HistoryRow {
  int mesh_k = 0;
  int outer = 0;
  double J = 0, Psi = 0, GL = 0, absG = 0, mu = 0, beta = 0, tau = 0;
  std::vector<double> lambdas;  // the objective's eigenvalues at this iterate
};

struct OptimizerState {
  Eigen::VectorXd phi;
  double mu = 0.0;
  double beta = 0.0;
  int outer_count = 0;
  std::vector<HistoryRow> history;
};

// Extra bookkeeping threaded through the fixed-mesh solve.
struct SolveMonitor {
  const Eigen::VectorXd* lambda_unweighted = nullptr;  // per-mesh Laplacian eigenvalues
  int sandwich_violations = 0;
  bool warn_degenerate = false;
  std::vector<std::string>* log = nullptr;
};

inline EigenSet eigensolve_for(const FemContext& ctx, const ObjectiveSpec& spec,
                               const Eigen::VectorXd& phi, const EigenOpts& opts,
                               const std::vector<Eigen::VectorXd>* warm = nullptr) {
  SpMat W = assemble_weighted_mass(*ctx.mesh, phi);
  int m = std::min(static_cast<int>(ctx.dmap.free.size()), spec.max_index() + 1);
  if (m < spec.max_index())
    throw std::invalid_argument("eigensolve: mesh too coarse for the requested indices");
  return solve_eigenpairs(ctx.K, W, ctx.M, ctx.dmap, spec.alpha, m, opts, warm);
}

// Algorithm: N outer iterations on a fixed mesh. Each solves the eigenproblem,
// freezes the gradient, runs M semi-implicit steps with projection, then
// updates phi, beta, mu.
inline void run_fixed_mesh(const FemContext& ctx, const ObjectiveSpec& spec,
                           const InnerParams& inner, const EigenOpts& eig_opts,
                           OptimizerState& state, int mesh_k,
                           std::vector<Eigen::VectorXd>* warm = nullptr,
                           SolveMonitor* monitor = nullptr) {
  spec.validate();
  const double kappa = spec.gamma * spec.epsilon;
  for (int n = 0; n < inner.n_outer; ++n) {
    EigenSet es = eigensolve_for(ctx, spec, state.phi, eig_opts,
                                 (warm && !warm->empty()) ? warm : nullptr);
    if (warm) *warm = es.vectors;
    if (monitor && monitor->lambda_unweighted) {
      const Eigen::VectorXd& lt = *monitor->lambda_unweighted;
      for (int j = 0; j < es.lambdas.size() && j < lt.size(); ++j) {
        double slack = 10.0 * eig_opts.tol * std::max(1.0, es.lambdas[j]);
        if (es.lambdas[j] < lt[j] - slack || es.lambdas[j] > lt[j] + spec.alpha + slack)
          ++monitor->sandwich_violations;
      }
    }
    if (monitor && monitor->warn_degenerate && monitor->log) {
      auto rep = multiplicity_gap_report(es, spec.indices);
      for (size_t j = 0; j < rep.degenerate.size(); ++j)
        if (rep.degenerate[j])
          monitor->log->push_back("near-degenerate eigenvalue at objective index " +
                                  std::to_string(spec.indices[j]));
    }

    ObjectiveValue obj = evaluate_objective(ctx, spec, state.phi, es.lambdas, state.mu, state.beta);
    GradientField g0 = lagrangian_gradient(ctx, spec, state.phi, es, state.mu, state.beta);
    double tau = compute_timestep(ctx, g0, inner.zeta);

    HistoryRow row;
    row.mesh_k = mesh_k;
    row.outer = state.outer_count;
    row.J = obj.J;
    row.Psi = obj.Psi;
    row.GL = obj.GL;
    row.absG = std::abs(obj.G);
    row.mu = state.mu;
    row.beta = state.beta;
    row.tau = tau;
    for (int idx : spec.indices) row.lambdas.push_back(es.lambdas[idx - 1]);
    state.history.push_back(std::move(row));

    Eigen::VectorXd phi = state.phi;
    for (int mstep = 0; mstep < inner.m_inner; ++mstep)
      phi = project_box(gradient_flow_step(ctx, phi, g0, inner.gamma_tilde, tau, kappa));
    state.phi = std::move(phi);
    state.beta = update_penalty(state.beta, inner.xi);
    state.mu = update_multiplier(state.mu, state.beta, ctx.volume_error(state.phi));
    ++state.outer_count;
  }
}

}  // namespace eigopt
