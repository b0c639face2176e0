#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <stdexcept>
#include <vector>

#include "eigopt/mesh.hpp"
#include "eigopt/quadrature.hpp"

namespace eigopt {

using SpMat = Eigen::SparseMatrix<double>;

// Free (interior) vertices of the homogeneous Dirichlet space.
struct DirichletMap {
  std::vector<int> free;        // global indices of free vertices
  std::vector<int> free_index;  // global -> position in `free`, or -1
};

inline DirichletMap make_dirichlet_map(const Mesh& m) {
  DirichletMap d;
  d.free_index.assign(m.num_vertices(), -1);
  for (int i = 0; i < m.num_vertices(); ++i)
    if (m.vertex_tag[i] == 0) {
      d.free_index[i] = static_cast<int>(d.free.size());
      d.free.push_back(i);
    }
  return d;
}

namespace detail {

struct ElementGeometry {
  double area;
  Vec2 grad[3];  // gradients of the barycentric basis
};

inline ElementGeometry element_geometry(const Mesh& m, int t) {
  const auto& e = m.elements[t];
  Vec2 p0 = m.vertices[e[0]], p1 = m.vertices[e[1]], p2 = m.vertices[e[2]];
  double det = cross(p1 - p0, p2 - p0);  // = 2*area, positive for CCW
  ElementGeometry g;
  g.area = 0.5 * det;
  g.grad[0] = {(p1.y - p2.y) / det, (p2.x - p1.x) / det};
  g.grad[1] = {(p2.y - p0.y) / det, (p0.x - p2.x) / det};
  g.grad[2] = {(p0.y - p1.y) / det, (p1.x - p0.x) / det};
  return g;
}

}  // namespace detail

inline SpMat assemble_stiffness(const Mesh& m) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * m.num_elements());
  for (int t = 0; t < m.num_elements(); ++t) {
    auto g = detail::element_geometry(m, t);
    const auto& e = m.elements[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(e[i], e[j], g.area * dot(g.grad[i], g.grad[j]));
  }
  SpMat K(m.num_vertices(), m.num_vertices());
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

inline SpMat assemble_mass(const Mesh& m) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * m.num_elements());
  for (int t = 0; t < m.num_elements(); ++t) {
    double a = m.element_area(t);
    const auto& e = m.elements[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(e[i], e[j], a / 12.0 * (i == j ? 2.0 : 1.0));
  }
  SpMat M(m.num_vertices(), m.num_vertices());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

// Mass matrix weighted by a P1 density phi: entries int_T phi u_i u_j, using
// the exact cubic formula int_T l_a l_b l_c = |T| * {1/10, 1/30, 1/60}.
inline SpMat assemble_weighted_mass(const Mesh& m, const Eigen::VectorXd& phi) {
  if (phi.size() != m.num_vertices())
    throw std::invalid_argument("assemble_weighted_mass: field size mismatch");
  auto c3 = [](int i, int j, int k) {
    if (i == j && j == k) return 1.0 / 10.0;
    if (i == j || j == k || i == k) return 1.0 / 30.0;
    return 1.0 / 60.0;
  };
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * m.num_elements());
  for (int t = 0; t < m.num_elements(); ++t) {
    double a = m.element_area(t);
    const auto& e = m.elements[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double w = 0.0;
        for (int k = 0; k < 3; ++k) w += phi[e[k]] * c3(i, j, k);
        trip.emplace_back(e[i], e[j], a * w);
      }
  }
  SpMat W(m.num_vertices(), m.num_vertices());
  W.setFromTriplets(trip.begin(), trip.end());
  return W;
}

// Row sums of the mass matrix; entry i equals int_D basis_i dx.
inline Eigen::VectorXd lumped_mass(const Mesh& m) {
  Eigen::VectorXd l = Eigen::VectorXd::Zero(m.num_vertices());
  for (int t = 0; t < m.num_elements(); ++t) {
    double a = m.element_area(t) / 3.0;
    for (int v : m.elements[t]) l[v] += a;
  }
  return l;
}

inline double domain_area(const Mesh& m) { return m.total_area(); }

// Clement-type quasi-interpolation: nodal value = average of v over the
// vertex patch. Preserves the integral and the box [0,1].
inline Eigen::VectorXd quasi_interpolate(const Mesh& m,
                                         const std::function<double(double, double)>& v) {
  Eigen::VectorXd patch_int = Eigen::VectorXd::Zero(m.num_vertices());
  Eigen::VectorXd patch_area = Eigen::VectorXd::Zero(m.num_vertices());
  const auto rule = tri_quad_degree4();
  for (int t = 0; t < m.num_elements(); ++t) {
    const auto& e = m.elements[t];
    Vec2 p0 = m.vertices[e[0]], p1 = m.vertices[e[1]], p2 = m.vertices[e[2]];
    double a = m.element_area(t);
    double q = 0.0;
    for (const auto& qp : rule) {
      Vec2 x = qp.l0 * p0 + qp.l1 * p1 + qp.l2 * p2;
      q += qp.w * v(x.x, x.y);
    }
    q *= a;
    for (int i = 0; i < 3; ++i) {
      patch_int[e[i]] += q;
      patch_area[e[i]] += a;
    }
  }
  return patch_int.cwiseQuotient(patch_area);
}

// P1 interpolation of a coarse nodal field onto a direct bisection refinement:
// carried vertices keep their value, each midpoint averages its parent edge.
inline Eigen::VectorXd prolongate(const Mesh& coarse, const Mesh& fine,
                                  const Eigen::VectorXd& values) {
  if (values.size() != coarse.num_vertices())
    throw std::invalid_argument("prolongate: field size mismatch");
  if (fine.num_vertices() < coarse.num_vertices())
    throw std::invalid_argument("prolongate: fine mesh is not a refinement");
  for (int i = 0; i < coarse.num_vertices(); ++i) {
    const auto& pp = fine.vertex_parents[i];
    Vec2 d = fine.vertices[i] - coarse.vertices[i];
    if (pp[0] != i || pp[1] != i || std::abs(d.x) + std::abs(d.y) > 1e-12)
      throw std::invalid_argument("prolongate: fine mesh is not a refinement of the coarse mesh");
  }
  Eigen::VectorXd out(fine.num_vertices());
  out.head(coarse.num_vertices()) = values;
  for (int i = coarse.num_vertices(); i < fine.num_vertices(); ++i) {
    const auto& pp = fine.vertex_parents[i];
    if (pp[0] < 0 || pp[0] >= i || pp[1] < 0 || pp[1] >= i)
      throw std::invalid_argument("prolongate: invalid refinement lineage");
    out[i] = 0.5 * (out[pp[0]] + out[pp[1]]);
  }
  return out;
}

enum class Norm { L1, L2, H1Semi, H1, LinfNodal };

inline double field_norm(const Mesh& m, const Eigen::VectorXd& v, Norm kind) {
  if (v.size() != m.num_vertices()) throw std::invalid_argument("norm: field size mismatch");
  switch (kind) {
    case Norm::LinfNodal:
      return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
    case Norm::L1: {
      double s = 0.0;
      const auto rule = tri_quad_degree2();
      for (int t = 0; t < m.num_elements(); ++t) {
        const auto& e = m.elements[t];
        double a = m.element_area(t);
        for (const auto& qp : rule)
          s += a * qp.w * std::abs(qp.l0 * v[e[0]] + qp.l1 * v[e[1]] + qp.l2 * v[e[2]]);
      }
      return s;
    }
    case Norm::L2: {
      double s = 0.0;
      for (int t = 0; t < m.num_elements(); ++t) {
        const auto& e = m.elements[t];
        double a = m.element_area(t);
        double vi = v[e[0]], vj = v[e[1]], vk = v[e[2]];
        s += a / 6.0 * (vi * vi + vj * vj + vk * vk + vi * vj + vj * vk + vi * vk);
      }
      return std::sqrt(s);
    }
    case Norm::H1Semi: {
      double s = 0.0;
      for (int t = 0; t < m.num_elements(); ++t) {
        auto g = detail::element_geometry(m, t);
        const auto& e = m.elements[t];
        Vec2 grad = v[e[0]] * g.grad[0] + v[e[1]] * g.grad[1] + v[e[2]] * g.grad[2];
        s += g.area * dot(grad, grad);
      }
      return std::sqrt(s);
    }
    case Norm::H1: {
      double l2 = field_norm(m, v, Norm::L2);
      double h1 = field_norm(m, v, Norm::H1Semi);
      return std::sqrt(l2 * l2 + h1 * h1);
    }
  }
  return 0.0;
}

// Norm of (v - f) for an analytic f, by degree-4 quadrature per element.
inline double error_norm(const Mesh& m, const Eigen::VectorXd& v,
                         const std::function<double(double, double)>& f,
                         const std::function<Vec2(double, double)>& grad_f, Norm kind) {
  if (kind == Norm::H1) {
    double l2 = error_norm(m, v, f, grad_f, Norm::L2);
    double h1 = error_norm(m, v, f, grad_f, Norm::H1Semi);
    return std::sqrt(l2 * l2 + h1 * h1);
  }
  const auto rule = tri_quad_degree4();
  double s = 0.0;
  for (int t = 0; t < m.num_elements(); ++t) {
    auto g = detail::element_geometry(m, t);
    const auto& e = m.elements[t];
    Vec2 p0 = m.vertices[e[0]], p1 = m.vertices[e[1]], p2 = m.vertices[e[2]];
    Vec2 gradv = v[e[0]] * g.grad[0] + v[e[1]] * g.grad[1] + v[e[2]] * g.grad[2];
    for (const auto& qp : rule) {
      Vec2 x = qp.l0 * p0 + qp.l1 * p1 + qp.l2 * p2;
      switch (kind) {
        case Norm::L1:
          s += g.area * qp.w * std::abs(qp.l0 * v[e[0]] + qp.l1 * v[e[1]] + qp.l2 * v[e[2]] -
                                        f(x.x, x.y));
          break;
        case Norm::L2: {
          double d = qp.l0 * v[e[0]] + qp.l1 * v[e[1]] + qp.l2 * v[e[2]] - f(x.x, x.y);
          s += g.area * qp.w * d * d;
          break;
        }
        case Norm::H1Semi: {
          Vec2 d = gradv - grad_f(x.x, x.y);
          s += g.area * qp.w * dot(d, d);
          break;
        }
        default:
          throw std::invalid_argument("error_norm: unsupported kind");
      }
    }
  }
  return kind == Norm::L1 ? s : std::sqrt(s);
}

inline Eigen::VectorXd gather(const Eigen::VectorXd& full, const std::vector<int>& idx) {
  Eigen::VectorXd out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[i] = full[idx[i]];
  return out;
}

inline Eigen::VectorXd scatter_zero(const Eigen::VectorXd& vals, const DirichletMap& d, int n) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (size_t i = 0; i < d.free.size(); ++i) out[d.free[i]] = vals[i];
  return out;
}

inline SpMat restrict_matrix(const SpMat& A, const DirichletMap& d) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(A.nonZeros());
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) {
      int r = d.free_index[it.row()], c = d.free_index[it.col()];
      if (r >= 0 && c >= 0) trip.emplace_back(r, c, it.value());
    }
  SpMat out(d.free.size(), d.free.size());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

}  // namespace eigopt
