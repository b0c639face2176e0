#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "eigopt/optimizer.hpp"

using namespace eigopt;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Mesh unit_square(int res) {
  DomainSpec s;
  s.kind = DomainSpec::Kind::unit_square;
  s.resolution = res;
  return generate_domain(s);
}

ObjectiveSpec min_lambda1(double alpha = 1.0, double C = 0.5) {
  ObjectiveSpec s;
  s.indices = {1};
  s.weights = {1.0};
  s.gamma = 5e-3;
  s.epsilon = 5e-2;
  s.alpha = alpha;
  s.volume_fraction = C;
  return s;
}

VectorXd random_field(int n, unsigned seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937 rng(seed);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * ((rng() >> 11) * (1.0 / (1ull << 53)));
  return v;
}

}  // namespace

TEST_CASE("objective at the uniform admissible density") {
  Mesh m = unit_square(8);
  ObjectiveSpec spec = min_lambda1(10.21, 0.5);
  FemContext ctx = FemContext::build(m, spec.volume_fraction);
  VectorXd phi = VectorXd::Constant(m.num_vertices(), 0.5);
  VectorXd lam(2);
  lam << 22.0, 51.0;

  ObjectiveValue v = evaluate_objective(ctx, spec, phi, lam, -5.0, 100.0);
  CHECK(v.G == Catch::Approx(0.0).margin(1e-14));
  CHECK(v.L == Catch::Approx(v.J).margin(1e-14));
  CHECK(v.Psi == Catch::Approx(22.0));
  // gradient term vanishes for a constant, leaving gamma/eps * |D| * f(1/2)
  CHECK(v.GL == Catch::Approx(1.5625e-3).epsilon(1e-12));
}

TEST_CASE("gap objectives are weighted eigenvalue differences") {
  Mesh m = unit_square(4);
  ObjectiveSpec spec = min_lambda1();
  spec.indices = {1, 2};
  spec.weights = {-1.0, 1.0};
  FemContext ctx = FemContext::build(m, spec.volume_fraction);
  VectorXd lam(2);
  lam << 11.0, 30.0;
  ObjectiveValue v =
      evaluate_objective(ctx, spec, VectorXd::Constant(m.num_vertices(), 0.5), lam, 0.0, 1.0);
  CHECK(v.Psi == Catch::Approx(30.0 - 11.0));
}

TEST_CASE("gradient of the volume term alone is the constant multiplier") {
  Mesh m = unit_square(6);
  ObjectiveSpec spec = min_lambda1();
  spec.gamma = 0.0;  // disable the GL part for this probe
  spec.weights = {0.0};
  FemContext ctx = FemContext::build(m, spec.volume_fraction);
  VectorXd phi = random_field(m.num_vertices(), 2);
  EigenSet es = eigensolve_for(ctx, min_lambda1(), phi, EigenOpts{});
  GradientField g = lagrangian_gradient(ctx, spec, phi, es, 0.3, 1e300);
  CHECK((g.values.array() - 0.3).abs().maxCoeff() < 1e-10);
}

TEST_CASE("eigenvalue part of the gradient approximates alpha w^2") {
  Mesh m = unit_square(32);
  ObjectiveSpec spec = min_lambda1(10.21, 0.5);
  spec.gamma = 0.0;
  FemContext ctx = FemContext::build(m, spec.volume_fraction);
  VectorXd phi = VectorXd::Constant(m.num_vertices(), 0.5);
  EigenSet es = eigensolve_for(ctx, min_lambda1(10.21, 0.5), phi, EigenOpts{});
  GradientField g = lagrangian_gradient(ctx, spec, phi, es, 0.0, 1e300);

  VectorXd direct(m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i)
    direct[i] = spec.alpha * es.vectors[0][i] * es.vectors[0][i];
  double rel = field_norm(m, VectorXd(g.values - direct), Norm::L2) /
               field_norm(m, direct, Norm::L2);
  CHECK(rel <= 0.02);
}

TEST_CASE("gradient of the potential term at a constant state") {
  Mesh m = unit_square(5);
  ObjectiveSpec spec = min_lambda1();
  spec.potential = PotentialKind::double_obstacle;
  spec.weights = {0.0};
  FemContext ctx = FemContext::build(m, spec.volume_fraction);
  double c = 0.3;
  VectorXd phi = VectorXd::Constant(m.num_vertices(), c);
  EigenSet es = eigensolve_for(ctx, min_lambda1(), phi, EigenOpts{});
  GradientField g = lagrangian_gradient(ctx, spec, phi, es, 0.0, 1e300);
  double expect = spec.gamma / spec.epsilon * (0.5 - c);
  CHECK((g.values.array() - expect).abs().maxCoeff() < 1e-10);
}

TEST_CASE("gradient flow preserves constants when the reaction vanishes") {
  Mesh m = unit_square(5);
  FemContext ctx = FemContext::build(m, 0.5);
  VectorXd phi = VectorXd::Constant(m.num_vertices(), 0.5);
  GradientField g0;
  g0.values = VectorXd::Ones(m.num_vertices());
  g0.l2_norm = 1.0;
  g0.linf = 1.0;
  VectorXd next = gradient_flow_step(ctx, phi, g0, 0.0, 0.05, 2.5e-4);
  CHECK((next.array() - 0.5).abs().maxCoeff() < 1e-12);
}

TEST_CASE("diffusion-free steps follow the scalar update formula on both branches") {
  Mesh m = unit_square(4);
  FemContext ctx = FemContext::build(m, 0.5);
  double tau = 0.07, gtilde = 0.02;

  // negative reaction branch
  {
    double c = 0.3;
    VectorXd phi = VectorXd::Constant(m.num_vertices(), c);
    GradientField g0{VectorXd::Ones(m.num_vertices()), 1.0, 1.0};
    double r = c - 0.5 - 30.0 * gtilde * (1.0 - c) * c;
    REQUIRE(r < 0.0);
    double expect = c / (1.0 - tau * (1.0 - c) * r);
    VectorXd next = gradient_flow_step(ctx, phi, g0, gtilde, tau, 0.0);
    CHECK((next.array() - expect).abs().maxCoeff() < 1e-12);
  }
  // positive reaction branch
  {
    double c = 0.8;
    VectorXd phi = VectorXd::Constant(m.num_vertices(), c);
    GradientField g0{VectorXd::Constant(m.num_vertices(), -1.0), 1.0, 1.0};
    double r = c - 0.5 + 30.0 * gtilde * (1.0 - c) * c;
    REQUIRE(r > 0.0);
    double expect = (c / tau + c * r) / (1.0 / tau + c * r);
    VectorXd next = gradient_flow_step(ctx, phi, g0, gtilde, tau, 0.0);
    CHECK((next.array() - expect).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("flow system matrix is positive definite on both reaction branches") {
  Mesh m = unit_square(2);  // 9 vertices
  FemContext ctx = FemContext::build(m, 0.5);
  double tau = 0.1, kappa = 2.5e-4, gtilde = 20.0;
  for (double sign : {1.0, -1.0}) {
    VectorXd phi = random_field(m.num_vertices(), 19);
    GradientField g0{VectorXd::Constant(m.num_vertices(), sign), 1.0, 1.0};
    VectorXd r = reaction_values(phi, g0, gtilde);
    MatrixXd A = MatrixXd(SpMat((1.0 / tau) * ctx.M)) + kappa * MatrixXd(ctx.K);
    for (int i = 0; i < m.num_vertices(); ++i)
      A(i, i) += (r[i] <= 0.0) ? -ctx.lumped[i] * (1.0 - phi[i]) * r[i]
                               : ctx.lumped[i] * phi[i] * r[i];
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    CHECK_NOTHROW(gradient_flow_step(ctx, phi, g0, gtilde, tau, kappa));
  }
}

TEST_CASE("box projection clamps, is idempotent and non-expansive") {
  VectorXd v(3);
  v << -0.1, 0.5, 1.3;
  VectorXd p = project_box(v);
  CHECK(p[0] == 0.0);
  CHECK(p[1] == 0.5);
  CHECK(p[2] == 1.0);
  CHECK((project_box(p) - p).cwiseAbs().maxCoeff() == 0.0);

  std::mt19937 rng(6);
  for (int t = 0; t < 50; ++t) {
    VectorXd a = random_field(10, rng(), -2, 3), b = random_field(10, rng(), -2, 3);
    double before = (a - b).cwiseAbs().maxCoeff();
    double after = (project_box(a) - project_box(b)).cwiseAbs().maxCoeff();
    CHECK(after <= before + 1e-15);
  }
}

TEST_CASE("multiplier and penalty updates") {
  CHECK(update_multiplier(0.0, 90.0, 0.09) == Catch::Approx(0.001));
  CHECK(update_multiplier(1.7, 42.0, 0.0) == 1.7);
  CHECK(update_multiplier(-5.0, 100.0, -1.0) == Catch::Approx(-5.01));

  CHECK(update_penalty(100.0, 0.9) == Catch::Approx(90.0));
  CHECK(update_penalty(100.0, 0.7) == Catch::Approx(70.0));
  double beta = 100.0;
  for (int n = 1; n <= 8; ++n) {
    beta = update_penalty(beta, 0.9);
    CHECK(beta == Catch::Approx(100.0 * std::pow(0.9, n)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(update_penalty(100.0, 1.2), std::invalid_argument);
  CHECK_THROWS_AS(update_penalty(100.0, 1.0), std::invalid_argument);
}

TEST_CASE("timestep selection") {
  Mesh m = unit_square(2);
  FemContext ctx = FemContext::build(m, 0.5);
  ctx.max_h = 0.05;
  GradientField g;
  g.values = VectorXd::Zero(m.num_vertices());
  g.linf = 4.0;
  CHECK(compute_timestep(ctx, g, 2.0) == Catch::Approx(0.025));
  CHECK(compute_timestep(ctx, g, 4.0) == Catch::Approx(0.05));
  g.linf = 0.0;
  CHECK(compute_timestep(ctx, g, 2.0) == Catch::Approx(2.0 * 0.05));
}

TEST_CASE("zero outer iterations leave the state untouched") {
  Mesh m = unit_square(4);
  ObjectiveSpec spec = min_lambda1();
  FemContext ctx = FemContext::build(m, spec.volume_fraction);
  OptimizerState st;
  st.phi = random_field(m.num_vertices(), 21);
  st.mu = -5.0;
  st.beta = 100.0;
  VectorXd before = st.phi;
  InnerParams inner;
  inner.n_outer = 0;
  run_fixed_mesh(ctx, spec, inner, EigenOpts{}, st, 0);
  CHECK((st.phi - before).cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.history.empty());
}

TEST_CASE("fixed-mesh run keeps iterates admissible and replays its schedules") {
  Mesh m = unit_square(10);
  ObjectiveSpec spec = min_lambda1(10.21, 0.5);
  FemContext ctx = FemContext::build(m, spec.volume_fraction);
  OptimizerState st;
  st.phi = random_field(m.num_vertices(), 77);
  st.mu = -5.0;
  st.beta = 100.0;
  InnerParams inner;
  inner.n_outer = 6;
  inner.m_inner = 5;
  inner.mu0 = -5.0;
  inner.beta0 = 100.0;
  inner.gamma_tilde = 20.0;
  inner.xi = 0.9;
  inner.zeta = 2.0;
  run_fixed_mesh(ctx, spec, inner, EigenOpts{}, st, 0);

  CHECK(st.phi.minCoeff() >= 0.0);
  CHECK(st.phi.maxCoeff() <= 1.0);
  REQUIRE(st.history.size() == 6);
  for (size_t n = 0; n < st.history.size(); ++n) {
    CHECK(std::isfinite(st.history[n].J));
    CHECK(st.history[n].beta == Catch::Approx(100.0 * std::pow(0.9, n)).epsilon(1e-12));
  }
  // mu moves by exactly |G|/beta between consecutive iterates
  for (size_t n = 1; n < st.history.size(); ++n) {
    double dmu = std::abs(st.history[n].mu - st.history[n - 1].mu);
    CHECK(dmu == Catch::Approx(st.history[n].absG / st.history[n].beta).margin(1e-12));
  }
  CHECK(st.beta == Catch::Approx(100.0 * std::pow(0.9, 6)).epsilon(1e-12));
}

TEST_CASE("finite differences confirm the smooth part of the gradient") {
  Mesh m = unit_square(6);  // ~50 dofs
  ObjectiveSpec spec = min_lambda1(1.0, 0.5);
  spec.weights = {0.0};  // freeze out the eigenvalue term
  FemContext ctx = FemContext::build(m, spec.volume_fraction);
  VectorXd phi = random_field(m.num_vertices(), 4, 0.2, 0.8);
  EigenSet es = eigensolve_for(ctx, min_lambda1(), phi, EigenOpts{});
  double mu = 0.4, beta = 25.0;
  GradientField g = lagrangian_gradient(ctx, spec, phi, es, mu, beta);

  VectorXd delta = random_field(m.num_vertices(), 9, -1.0, 1.0);
  double t = 1e-5;
  auto smooth = [&](const VectorXd& p) {
    VectorXd lam = VectorXd::Zero(1);
    return evaluate_objective(ctx, spec, p, lam, mu, beta).L;
  };
  double fd = (smooth(phi + t * delta) - smooth(phi - t * delta)) / (2.0 * t);
  double inner = g.values.dot(ctx.M * delta);
  CHECK(std::abs(fd - inner) / std::abs(inner) < 1e-4);
}

TEST_CASE("eigenvalue perturbations follow the squared eigenfunction") {
  Mesh m = unit_square(6);
  ObjectiveSpec spec = min_lambda1(2.0, 0.5);
  FemContext ctx = FemContext::build(m, spec.volume_fraction);
  VectorXd phi = random_field(m.num_vertices(), 14, 0.2, 0.8);
  EigenOpts opts;
  opts.tol = 1e-12;
  EigenSet es = eigensolve_for(ctx, spec, phi, opts);

  VectorXd delta = random_field(m.num_vertices(), 15, -1.0, 1.0);
  double t = 1e-5;
  EigenSet plus = eigensolve_for(ctx, spec, VectorXd(phi + t * delta), opts);
  double fd = (plus.lambdas[0] - es.lambdas[0]) / t;

  // alpha * int w^2 delta by quadrature
  double hf = 0.0;
  const auto rule = tri_quad_degree4();
  for (int tt = 0; tt < m.num_elements(); ++tt) {
    const auto& e = m.elements[tt];
    for (const auto& qp : rule) {
      double w = qp.l0 * es.vectors[0][e[0]] + qp.l1 * es.vectors[0][e[1]] +
                 qp.l2 * es.vectors[0][e[2]];
      double d = qp.l0 * delta[e[0]] + qp.l1 * delta[e[1]] + qp.l2 * delta[e[2]];
      hf += m.element_area(tt) * qp.w * w * w * d;
    }
  }
  hf *= spec.alpha;
  CHECK(std::abs(fd - hf) / std::abs(hf) <= 1e-3);
}

TEST_CASE("optimizing the first eigenvalue beats the uniform density") {
  Mesh m = unit_square(40);
  ObjectiveSpec spec = min_lambda1(10.21, 0.5);
  FemContext ctx = FemContext::build(m, spec.volume_fraction);
  OptimizerState st;
  st.phi = random_field(m.num_vertices(), 1);
  InnerParams inner;
  inner.n_outer = 20;
  inner.m_inner = 10;
  inner.mu0 = -5.0;
  inner.beta0 = 100.0;
  inner.gamma_tilde = 20.0;
  inner.xi = 0.9;
  inner.zeta = 2.0;
  st.mu = inner.mu0;
  st.beta = inner.beta0;
  std::vector<VectorXd> warm;
  run_fixed_mesh(ctx, spec, inner, EigenOpts{}, st, 0, &warm);

  EigenSet final_es = eigensolve_for(ctx, spec, st.phi, EigenOpts{}, &warm);
  double uniform_value = 2.0 * M_PI * M_PI + spec.alpha / 2.0;  // ~24.84
  CHECK(final_es.lambdas[0] < uniform_value);
}
