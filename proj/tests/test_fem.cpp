#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>

#include "eigopt/fem.hpp"
#include "eigopt/mesh.hpp"

using namespace eigopt;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Mesh one_triangle(Vec2 a, Vec2 b, Vec2 c) {
  Mesh m;
  m.vertices = {a, b, c};
  m.elements = {{0, 1, 2}};
  detail::derive_boundary_from_edges(m);
  detail::finalize_fresh_mesh(m);
  return m;
}

Mesh unit_square(int res) {
  DomainSpec s;
  s.kind = DomainSpec::Kind::unit_square;
  s.resolution = res;
  return generate_domain(s);
}

// Independent oracle: integrate phi * u_i * u_j over a triangle with the
// 4-point degree-3 rule, all barycentric.
MatrixXd weighted_mass_local_oracle(double area, const Eigen::Vector3d& phi) {
  const double pts[4][3] = {{1.0 / 3, 1.0 / 3, 1.0 / 3},
                            {0.6, 0.2, 0.2},
                            {0.2, 0.6, 0.2},
                            {0.2, 0.2, 0.6}};
  const double w[4] = {-27.0 / 48, 25.0 / 48, 25.0 / 48, 25.0 / 48};
  MatrixXd W = MatrixXd::Zero(3, 3);
  for (int q = 0; q < 4; ++q) {
    double p = pts[q][0] * phi[0] + pts[q][1] * phi[1] + pts[q][2] * phi[2];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) W(i, j) += area * w[q] * p * pts[q][i] * pts[q][j];
  }
  return W;
}

}  // namespace

TEST_CASE("local stiffness matrix on the reference triangle") {
  Mesh m = one_triangle({0, 0}, {1, 0}, {0, 1});
  MatrixXd K = MatrixXd(assemble_stiffness(m));
  MatrixXd expect(3, 3);
  expect << 2, -1, -1, -1, 1, 0, -1, 0, 1;
  expect *= 0.5;
  CHECK((K - expect).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("stiffness kernel contains constants and is positive semidefinite") {
  Mesh m = unit_square(5);
  SpMat K = assemble_stiffness(m);
  VectorXd ones = VectorXd::Ones(m.num_vertices());
  CHECK((K * ones).cwiseAbs().maxCoeff() < 1e-12);
  std::mt19937 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd v(m.num_vertices());
    for (int i = 0; i < v.size(); ++i) v[i] = (rng() >> 11) * (1.0 / (1ull << 53)) - 0.5;
    CHECK(v.dot(K * v) >= -1e-12);
  }
}

TEST_CASE("local mass matrix matches the exact formula") {
  Mesh m = one_triangle({0.2, -0.1}, {1.4, 0.3}, {0.5, 1.1});
  double a = m.element_area(0);
  MatrixXd M = MatrixXd(assemble_mass(m));
  MatrixXd expect(3, 3);
  expect << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  expect *= a / 12.0;
  CHECK((M - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("mass matrix integrates constants and is positive definite") {
  Mesh m = unit_square(2);  // 9 vertices
  SpMat M = assemble_mass(m);
  VectorXd ones = VectorXd::Ones(m.num_vertices());
  CHECK(ones.dot(M * ones) == Catch::Approx(1.0).epsilon(1e-12));
  MatrixXd Md = MatrixXd(M);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Md);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("weighted mass with unit and zero weights") {
  Mesh m = unit_square(3);
  VectorXd one = VectorXd::Ones(m.num_vertices());
  SpMat W1 = assemble_weighted_mass(m, one);
  SpMat M = assemble_mass(m);
  CHECK((MatrixXd(W1) - MatrixXd(M)).cwiseAbs().maxCoeff() < 1e-14);
  SpMat W0 = assemble_weighted_mass(m, VectorXd::Zero(m.num_vertices()));
  CHECK(MatrixXd(W0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("weighted mass equals the quadrature oracle for a hat weight") {
  Mesh m = one_triangle({0, 0}, {1, 0}, {0, 1});
  Eigen::Vector3d phi(1.0, 0.0, 0.0);
  VectorXd phiv = phi;
  MatrixXd W = MatrixXd(assemble_weighted_mass(m, phiv));
  MatrixXd Wq = weighted_mass_local_oracle(m.element_area(0), phi);
  CHECK((W - Wq).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("weighted mass is linear in the weight") {
  Mesh m = unit_square(3);
  std::mt19937 rng(11);
  VectorXd p1(m.num_vertices()), p2(m.num_vertices());
  for (int i = 0; i < p1.size(); ++i) {
    p1[i] = (rng() >> 11) * (1.0 / (1ull << 53));
    p2[i] = (rng() >> 11) * (1.0 / (1ull << 53));
  }
  MatrixXd sum = MatrixXd(assemble_weighted_mass(m, p1)) + MatrixXd(assemble_weighted_mass(m, p2));
  MatrixXd both = MatrixXd(assemble_weighted_mass(m, p1 + p2));
  CHECK((sum - both).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("global assembly equals the sum of hand-assembled local matrices") {
  Mesh m = unit_square(1);  // two elements
  REQUIRE(m.num_elements() == 2);
  MatrixXd K = MatrixXd(assemble_stiffness(m));
  MatrixXd M = MatrixXd(assemble_mass(m));
  MatrixXd Kh = MatrixXd::Zero(4, 4), Mh = MatrixXd::Zero(4, 4);
  for (int t = 0; t < 2; ++t) {
    const auto& e = m.elements[t];
    auto g = detail::element_geometry(m, t);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        Kh(e[i], e[j]) += g.area * dot(g.grad[i], g.grad[j]);
        Mh(e[i], e[j]) += g.area / 12.0 * (i == j ? 2.0 : 1.0);
      }
  }
  CHECK((K - Kh).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((M - Mh).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("quasi-interpolation preserves constants, integrals and bounds") {
  Mesh m = unit_square(8);
  auto c = quasi_interpolate(m, [](double, double) { return 0.37; });
  CHECK((c.array() - 0.37).abs().maxCoeff() < 1e-14);

  auto f = [](double x, double y) { return x * x * y; };
  VectorXd pi = quasi_interpolate(m, f);
  SpMat M = assemble_mass(m);
  double int_pi = VectorXd::Ones(m.num_vertices()).dot(M * pi);
  CHECK(int_pi == Catch::Approx(1.0 / 6.0).margin(1e-10));

  auto clampfn = [](double x, double y) {
    double v = 0.5 + std::sin(7 * x) * std::cos(5 * y);
    return std::min(1.0, std::max(0.0, v));
  };
  VectorXd pc = quasi_interpolate(m, clampfn);
  CHECK(pc.minCoeff() >= 0.0);
  CHECK(pc.maxCoeff() <= 1.0);
}

TEST_CASE("quasi-interpolation integral identity holds for generic inputs") {
  DomainSpec l;
  l.kind = DomainSpec::Kind::l_shape;
  l.resolution = 3;
  Mesh m = generate_domain(l);
  SpMat M = assemble_mass(m);
  VectorXd ones = VectorXd::Ones(m.num_vertices());
  const auto rule = tri_quad_degree4();
  auto f = [](double x, double y) { return std::exp(-x) * (1 + y * y); };
  double direct = 0.0;
  for (int t = 0; t < m.num_elements(); ++t) {
    const auto& e = m.elements[t];
    for (const auto& qp : rule) {
      Vec2 x = qp.l0 * m.vertices[e[0]] + qp.l1 * m.vertices[e[1]] + qp.l2 * m.vertices[e[2]];
      direct += m.element_area(t) * qp.w * f(x.x, x.y);
    }
  }
  VectorXd pi = quasi_interpolate(m, f);
  CHECK(ones.dot(M * pi) == Catch::Approx(direct).epsilon(1e-12));
}

TEST_CASE("prolongation is exact on nested P1 spaces") {
  Mesh m = unit_square(3);
  std::mt19937 rng(5);
  VectorXd phi(m.num_vertices());
  for (int i = 0; i < phi.size(); ++i) phi[i] = (rng() >> 11) * (1.0 / (1ull << 53));

  Mesh fine = bisect(m, {0, 2, 5});
  VectorXd up = prolongate(m, fine, phi);

  VectorXd cc = VectorXd::Constant(m.num_vertices(), 0.8);
  CHECK((prolongate(m, fine, cc).array() - 0.8).abs().maxCoeff() == 0.0);

  SpMat Mc = assemble_mass(m), Mf = assemble_mass(fine);
  double ic = VectorXd::Ones(m.num_vertices()).dot(Mc * phi);
  double iff = VectorXd::Ones(fine.num_vertices()).dot(Mf * up);
  CHECK(iff == Catch::Approx(ic).epsilon(1e-14));

  CHECK(up.minCoeff() >= phi.minCoeff() - 1e-15);
  CHECK(up.maxCoeff() <= phi.maxCoeff() + 1e-15);

  Mesh other = unit_square(4);
  CHECK_THROWS_AS(prolongate(other, fine, VectorXd::Zero(other.num_vertices())),
                  std::invalid_argument);
}

TEST_CASE("norms of simple fields") {
  Mesh m = unit_square(32);
  VectorXd one = VectorXd::Ones(m.num_vertices());
  CHECK(field_norm(m, one, Norm::L2) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(field_norm(m, one, Norm::H1Semi) == Catch::Approx(0.0).margin(1e-12));
  CHECK(field_norm(m, one, Norm::L1) == Catch::Approx(1.0).epsilon(1e-12));

  VectorXd xf(m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i) xf[i] = m.vertices[i].x;
  double l2 = field_norm(m, xf, Norm::L2);
  CHECK(l2 * l2 == Catch::Approx(1.0 / 3.0).margin(1e-3));
  CHECK(field_norm(m, xf, Norm::H1Semi) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(field_norm(m, xf, Norm::LinfNodal) == Catch::Approx(1.0));
}

TEST_CASE("p1 solution reproduces a linear manufactured solution") {
  Mesh m = unit_square(6);
  auto exact = [](Vec2 p) { return 1.0 + 2.0 * p.x + 3.0 * p.y; };
  SpMat K = assemble_stiffness(m);
  DirichletMap d = make_dirichlet_map(m);

  VectorXd lift = VectorXd::Zero(m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i)
    if (m.vertex_tag[i] != 0) lift[i] = exact(m.vertices[i]);
  VectorXd rhs = gather(-(K * lift), d.free);
  SpMat Kff = restrict_matrix(K, d);
  Eigen::SimplicialLLT<SpMat> llt(Kff);
  REQUIRE(llt.info() == Eigen::Success);
  VectorXd uf = llt.solve(rhs);
  VectorXd u = lift + scatter_zero(uf, d, m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i)
    CHECK(u[i] == Catch::Approx(exact(m.vertices[i])).margin(1e-10));
}

TEST_CASE("error norms vanish when comparing a field with itself") {
  Mesh m = unit_square(4);
  VectorXd xf(m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i) xf[i] = m.vertices[i].x;
  auto f = [](double x, double) { return x; };
  auto gf = [](double, double) { return Vec2{1.0, 0.0}; };
  CHECK(error_norm(m, xf, f, gf, Norm::L1) < 1e-14);
  CHECK(error_norm(m, xf, f, gf, Norm::L2) < 1e-14);
  CHECK(error_norm(m, xf, f, gf, Norm::H1) < 1e-14);
}
