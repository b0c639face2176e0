#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "eigopt/adapt.hpp"
#include "eigopt/config.hpp"

namespace eigopt {

// Smoothed Heaviside: 1/2 (1 + psi/tau1 + sin(pi psi/tau1)/pi) inside the
// transition band, clamped to {0,1} outside.
inline double smoothed_heaviside(double psi, double tau1) {
  if (!(tau1 > 0.0)) throw std::invalid_argument("smoothed_heaviside: tau1 must be > 0");
  if (psi > tau1) return 1.0;
  if (psi < -tau1) return 0.0;
  return 0.5 * (1.0 + psi / tau1 + std::sin(M_PI * psi / tau1) / M_PI);
}

inline double smoothed_heaviside_deriv(double psi, double tau1) {
  if (psi > tau1 || psi < -tau1) return 0.0;
  return 0.5 / tau1 * (1.0 + std::cos(M_PI * psi / tau1));
}

// Reference design for the unit-circle benchmark: the optimal shape is the
// annulus R < |x| < 1 with R = 1/sqrt(2), written as H(psi) with
// psi = |x| - 1/sqrt(2).
struct ReferenceSolution {
  std::function<double(double, double)> psi;
  double tau1 = 0.02;

  double phi(double x, double y) const { return smoothed_heaviside(psi(x, y), tau1); }
};

inline ReferenceSolution circle_annulus_reference(double tau1 = 0.02) {
  ReferenceSolution ref;
  ref.tau1 = tau1;
  ref.psi = [](double x, double y) { return std::sqrt(x * x + y * y) - 1.0 / std::sqrt(2.0); };
  return ref;
}

inline Vec2 reference_phi_gradient(const ReferenceSolution& ref, double x, double y) {
  double r = std::sqrt(x * x + y * y);
  if (r <= 0.0) return {0.0, 0.0};
  double d = smoothed_heaviside_deriv(r - 1.0 / std::sqrt(2.0), ref.tau1);
  return {d * x / r, d * y / r};
}

// Reference first eigenvalue: interpolate H(psi) on a uniformly refined circle
// mesh with at least `min_free_dofs` interior vertices and solve once.
inline double compute_reference_lambda(const DomainSpec& domain, double alpha,
                                       const ReferenceSolution& ref, int min_free_dofs,
                                       const EigenOpts& opts = {}) {
  if (domain.kind != DomainSpec::Kind::circle)
    throw std::invalid_argument("reference lambda: expected a circle domain");
  Mesh mesh = generate_domain(domain);
  DirichletMap d = make_dirichlet_map(mesh);
  int guard = 0;
  while (static_cast<int>(d.free.size()) < min_free_dofs) {
    mesh = uniform_refine(mesh);
    d = make_dirichlet_map(mesh);
    if (++guard > 12) throw std::runtime_error("reference lambda: refinement runaway");
  }
  Eigen::VectorXd phi(mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i)
    phi[i] = ref.phi(mesh.vertices[i].x, mesh.vertices[i].y);
  SpMat K = assemble_stiffness(mesh);
  SpMat M = assemble_mass(mesh);
  SpMat W = assemble_weighted_mass(mesh, phi);
  EigenSet es = solve_eigenpairs(K, W, M, d, alpha, 1, opts);
  return es.lambdas[0];
}

struct ErrorRow {
  int dofs = 0;
  double lambda_error = 0.0;
  double l1 = 0.0, l2 = 0.0, h1 = 0.0;
};

// Per-mesh errors of the computed designs against the smoothed reference.
inline std::vector<ErrorRow> example2_errors(const AdaptiveRun& run, const RunConfig& cfg,
                                             const ReferenceSolution& ref, double lambda_ref) {
  if (cfg.domain.kind != DomainSpec::Kind::circle)
    throw std::invalid_argument("example2_errors: run is not on the circle domain");
  auto f = [&](double x, double y) { return ref.phi(x, y); };
  auto gf = [&](double x, double y) { return reference_phi_gradient(ref, x, y); };
  std::vector<ErrorRow> rows;
  for (const auto& lv : run.levels) {
    ErrorRow row;
    for (int tag : lv.mesh.vertex_tag) row.dofs += (tag == 0);
    row.lambda_error = std::abs(lv.eig.lambdas[0] - lambda_ref);
    row.l1 = error_norm(lv.mesh, lv.phi, f, gf, Norm::L1);
    row.l2 = error_norm(lv.mesh, lv.phi, f, gf, Norm::L2);
    row.h1 = error_norm(lv.mesh, lv.phi, f, gf, Norm::H1);
    rows.push_back(row);
  }
  return rows;
}

inline std::string errors_csv(const std::vector<ErrorRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "dofs,lambda_error,L1,L2,H1\n";
  for (const auto& r : rows)
    os << r.dofs << "," << r.lambda_error << "," << r.l1 << "," << r.l2 << "," << r.h1 << "\n";
  return os.str();
}

// Mean distance from the origin of the phi = level crossings along mesh edges.
inline double mean_interface_radius(const Mesh& m, const Eigen::VectorXd& phi,
                                    double level = 0.5) {
  auto tab = detail::build_edge_table(m);
  double sum = 0.0;
  int count = 0;
  for (const auto& ed : tab.edges) {
    double a = phi[ed.a] - level, b = phi[ed.b] - level;
    if (a * b >= 0.0) continue;
    double t = a / (a - b);
    Vec2 p = m.vertices[ed.a] + t * (m.vertices[ed.b] - m.vertices[ed.a]);
    sum += norm(p);
    ++count;
  }
  if (count == 0) throw std::runtime_error("mean_interface_radius: no level crossings");
  return sum / count;
}

}  // namespace eigopt
