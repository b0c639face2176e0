#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "eigopt/fem.hpp"
#include "eigopt/mesh.hpp"
#include "eigopt/optimizer.hpp"
#include "eigopt/quadrature.hpp"

namespace eigopt {

// Per-element values of one residual estimator together with its global
// aggregate sqrt(sum of squares).
struct IndicatorField {
  int which = 0;  // 0 = design residual, j >= 1 = eigenpair residual
  Eigen::VectorXd per_element;
  double global = 0.0;
};

namespace detail {

// Second derivatives of the P1 interpolant vanish elementwise; this is the
// general-order hook for the strong Laplacian term in the residuals.
inline double p1_elementwise_laplacian(const Mesh&, int, const Eigen::VectorXd&) { return 0.0; }

inline IndicatorField finalize_indicator(int which, Eigen::VectorXd eta2) {
  IndicatorField f;
  f.which = which;
  f.global = std::sqrt(eta2.sum());
  f.per_element = eta2.cwiseSqrt();
  return f;
}

struct FaceGeometry {
  Vec2 normal;    // unit, outward for the element that owns the face
  double length;
};

inline FaceGeometry face_geometry(const Mesh& m, int t, int f) {
  const auto& e = m.elements[t];
  Vec2 a = m.vertices[e[f]], b = m.vertices[e[(f + 1) % 3]];
  Vec2 d = b - a;
  double len = norm(d);
  return {{d.y / len, -d.x / len}, len};  // right of the CCW edge = outward
}

}  // namespace detail

// Design-residual indicator:
//   eta_0(T)^2 = h_T^2 |R_0|_T^2 + h_T sum_{F in dT} |J_0|_F^2 with
//   R_0 = alpha sum_j dPsi_j w_j^2 - gamma eps (Delta phi) + gamma/eps f'(phi),
//   J_0 = gamma eps [grad phi . n] on interior faces, gamma eps grad phi . n on
//   the boundary.
inline IndicatorField indicators_eta0(const Mesh& m, const Eigen::VectorXd& phi,
                                      const std::vector<Eigen::VectorXd>& w,
                                      const std::vector<double>& dpsi, double gamma,
                                      double epsilon, PotentialKind potential,
                                      bool general_order = false, double volume_shift = 0.0) {
  if (phi.size() != m.num_vertices())
    throw std::invalid_argument("indicators_eta0: field size mismatch");
  if (w.size() != dpsi.size())
    throw std::invalid_argument("indicators_eta0: weights and eigenvectors mismatch");
  auto tab = detail::build_edge_table(m);
  const auto rule = tri_quad_degree4();

  std::vector<Vec2> grad_phi(m.num_elements());
  for (int t = 0; t < m.num_elements(); ++t) {
    auto g = detail::element_geometry(m, t);
    const auto& e = m.elements[t];
    grad_phi[t] = phi[e[0]] * g.grad[0] + phi[e[1]] * g.grad[1] + phi[e[2]] * g.grad[2];
  }

  Eigen::VectorXd eta2 = Eigen::VectorXd::Zero(m.num_elements());
  for (int t = 0; t < m.num_elements(); ++t) {
    const auto& e = m.elements[t];
    double area = m.element_area(t);
    double h2 = area;  // h_T^2 = |T|

    double r2 = 0.0;
    for (const auto& qp : rule) {
      double p = qp.l0 * phi[e[0]] + qp.l1 * phi[e[1]] + qp.l2 * phi[e[2]];
      double r = gamma / epsilon * potential_deriv(potential, p) + volume_shift;
      for (size_t j = 0; j < w.size(); ++j) {
        double wq = qp.l0 * w[j][e[0]] + qp.l1 * w[j][e[1]] + qp.l2 * w[j][e[2]];
        r += dpsi[j] * wq * wq;  // callers pass alpha * dPsi/dlambda_j
      }
      if (general_order) r -= gamma * epsilon * detail::p1_elementwise_laplacian(m, t, phi);
      r2 += area * qp.w * r * r;
    }

    double jumps = 0.0;
    for (int f = 0; f < 3; ++f) {
      auto fg = detail::face_geometry(m, t, f);
      const auto& ed = tab.edges[tab.elem_edge[t][f]];
      double jn;
      if (ed.tri[1] < 0) {
        jn = gamma * epsilon * dot(grad_phi[t], fg.normal);
      } else {
        int other = (ed.tri[0] == t) ? ed.tri[1] : ed.tri[0];
        jn = gamma * epsilon * dot(grad_phi[t] - grad_phi[other], fg.normal);
      }
      jumps += jn * jn * fg.length;
    }
    eta2[t] = h2 * r2 + std::sqrt(area) * jumps;
  }
  return detail::finalize_indicator(0, std::move(eta2));
}

// Eigenpair-residual indicator:
//   eta_j(T)^2 = h_T^2 |(alpha phi - lambda) w|_T^2
//              + h_T sum_{F in dT, F interior} |[grad w . n]|_F^2.
inline IndicatorField indicators_etaj(const Mesh& m, const Eigen::VectorXd& phi, double lambda,
                                      const Eigen::VectorXd& w, double alpha, int which,
                                      bool general_order = false) {
  if (phi.size() != m.num_vertices() || w.size() != m.num_vertices())
    throw std::invalid_argument("indicators_etaj: field size mismatch");
  auto tab = detail::build_edge_table(m);
  const auto rule = tri_quad_degree4();

  std::vector<Vec2> grad_w(m.num_elements());
  for (int t = 0; t < m.num_elements(); ++t) {
    auto g = detail::element_geometry(m, t);
    const auto& e = m.elements[t];
    grad_w[t] = w[e[0]] * g.grad[0] + w[e[1]] * g.grad[1] + w[e[2]] * g.grad[2];
  }

  Eigen::VectorXd eta2 = Eigen::VectorXd::Zero(m.num_elements());
  for (int t = 0; t < m.num_elements(); ++t) {
    const auto& e = m.elements[t];
    double area = m.element_area(t);

    double r2 = 0.0;
    for (const auto& qp : rule) {
      double p = qp.l0 * phi[e[0]] + qp.l1 * phi[e[1]] + qp.l2 * phi[e[2]];
      double wq = qp.l0 * w[e[0]] + qp.l1 * w[e[1]] + qp.l2 * w[e[2]];
      double r = (alpha * p - lambda) * wq;
      if (general_order) r -= detail::p1_elementwise_laplacian(m, t, w);
      r2 += area * qp.w * r * r;
    }

    double jumps = 0.0;
    for (int f = 0; f < 3; ++f) {
      const auto& ed = tab.edges[tab.elem_edge[t][f]];
      if (ed.tri[1] < 0) continue;  // Dirichlet data: no boundary flux term
      auto fg = detail::face_geometry(m, t, f);
      int other = (ed.tri[0] == t) ? ed.tri[1] : ed.tri[0];
      double jn = dot(grad_w[t] - grad_w[other], fg.normal);
      jumps += jn * jn * fg.length;
    }
    eta2[t] = area * r2 + std::sqrt(area) * jumps;
  }
  return detail::finalize_indicator(which, std::move(eta2));
}

// Convenience wrapper producing all l+1 indicators for a solved state. The
// optional volume shift carries the augmented-Lagrangian constant mu + G/beta
// into the design residual; constants are invisible to the optimality residual
// over mean-preserving directions, so this only redistributes the indicator.
inline std::vector<IndicatorField> compute_indicators(const Mesh& m, const Eigen::VectorXd& phi,
                                                      const ObjectiveSpec& spec,
                                                      const EigenSet& es,
                                                      double volume_shift = 0.0) {
  std::vector<Eigen::VectorXd> w;
  std::vector<double> dpsi;
  for (size_t j = 0; j < spec.indices.size(); ++j) {
    w.push_back(es.vectors[spec.indices[j] - 1]);
    dpsi.push_back(spec.alpha * spec.weights[j]);
  }
  std::vector<IndicatorField> out;
  out.push_back(indicators_eta0(m, phi, w, dpsi, spec.gamma, spec.epsilon, spec.potential, false,
                                volume_shift));
  for (size_t j = 0; j < spec.indices.size(); ++j)
    out.push_back(indicators_etaj(m, phi, es.lambdas[spec.indices[j] - 1],
                                  es.vectors[spec.indices[j] - 1], spec.alpha,
                                  static_cast<int>(j + 1)));
  return out;
}

struct DecayReport {
  std::vector<double> final_over_initial;            // one ratio per estimator
  std::vector<std::vector<double>> sequences;        // per estimator, per iteration
};

// Ratio of final to initial global estimator values over an adaptive history.
inline DecayReport estimator_trace(const std::vector<std::vector<double>>& globals_per_iter) {
  if (globals_per_iter.size() < 2)
    throw std::invalid_argument("estimator_trace: need at least two adaptive iterations");
  size_t l1 = globals_per_iter.front().size();
  for (const auto& row : globals_per_iter)
    if (row.size() != l1) throw std::invalid_argument("estimator_trace: ragged history");
  DecayReport rep;
  rep.sequences.resize(l1);
  for (size_t j = 0; j < l1; ++j) {
    for (const auto& row : globals_per_iter) rep.sequences[j].push_back(row[j]);
    double first = rep.sequences[j].front();
    rep.final_over_initial.push_back(first > 0.0 ? rep.sequences[j].back() / first : 1.0);
  }
  return rep;
}

}  // namespace eigopt
