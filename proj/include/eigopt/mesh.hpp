#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace eigopt {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

// Analytic boundary description used when refined boundary midpoints are
// snapped back onto a curved domain boundary.
struct BoundaryCurve {
  enum class Kind { none, circle, annulus, dumbbell };
  Kind kind = Kind::none;
  double r1 = 0.0;  // circle radius / annulus inner radius / dumbbell half-width
  double r2 = 0.0;  // annulus outer radius
};

// Conforming triangulation. Elements are CCW vertex triples; the refinement
// edge of element (v0,v1,v2) is always the edge (v1,v2), i.e. local face 1,
// and v0 is the peak (newest vertex after a bisection). Local face f of an
// element is the edge (v[f], v[(f+1)%3]).
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> elements;
  std::vector<int> vertex_tag;                      // 0 interior, >0 boundary piece
  std::vector<std::array<int, 3>> boundary_edges;   // {a, b, tag} with a < b
  std::vector<int> generation;                      // per-element bisection depth
  std::vector<int> parent_element;                  // index in the predecessor mesh, -1 if fresh
  std::vector<std::array<int, 2>> vertex_parents;   // endpoints of the split edge, {i,i} if fresh
  BoundaryCurve curve;
  bool snap_on_refine = false;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_elements() const { return static_cast<int>(elements.size()); }

  double signed_area(int t) const {
    const auto& e = elements[t];
    return 0.5 * cross(vertices[e[1]] - vertices[e[0]], vertices[e[2]] - vertices[e[0]]);
  }
  double element_area(int t) const { return std::abs(signed_area(t)); }
  double total_area() const {
    double a = 0.0;
    for (int t = 0; t < num_elements(); ++t) a += element_area(t);
    return a;
  }
};

struct DomainSpec {
  enum class Kind { unit_square, rectangle, l_shape, polygon, circle, annulus, dumbbell };
  Kind kind = Kind::unit_square;
  int resolution = 1;
  bool snap_boundary = false;
  // rectangle
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  // polygon (CCW, simple)
  std::vector<Vec2> polygon;
  // circle
  double radius = 1.0;
  int segments = 16;
  // annulus
  double r_inner = 1.0, r_outer = 2.0;
  // dumbbell
  double handle_halfwidth = 0.3;
};

namespace detail {

// Edge table of a mesh: edges are keyed by their sorted vertex pair, in
// lexicographic order so all downstream loops are deterministic.
struct EdgeTable {
  struct Edge {
    int a = -1, b = -1;          // a < b
    int tri[2] = {-1, -1};       // adjacent elements
    int local[2] = {-1, -1};     // local face in each adjacent element
  };
  std::vector<Edge> edges;
  std::vector<std::array<int, 3>> elem_edge;  // per element, edge index of each local face
};

inline EdgeTable build_edge_table(const Mesh& m) {
  EdgeTable tab;
  tab.elem_edge.assign(m.num_elements(), {-1, -1, -1});
  std::map<std::pair<int, int>, int> index;
  for (int t = 0; t < m.num_elements(); ++t) {
    const auto& e = m.elements[t];
    for (int f = 0; f < 3; ++f) {
      int u = e[f], v = e[(f + 1) % 3];
      auto key = std::minmax(u, v);
      auto it = index.find(key);
      if (it == index.end()) {
        it = index.emplace(key, static_cast<int>(tab.edges.size())).first;
        EdgeTable::Edge ed;
        ed.a = key.first;
        ed.b = key.second;
        tab.edges.push_back(ed);
      }
      auto& ed = tab.edges[it->second];
      if (ed.tri[0] < 0) {
        ed.tri[0] = t;
        ed.local[0] = f;
      } else if (ed.tri[1] < 0) {
        ed.tri[1] = t;
        ed.local[1] = f;
      } else {
        throw std::runtime_error("mesh: edge shared by more than two elements");
      }
      tab.elem_edge[t][f] = it->second;
    }
  }
  return tab;
}

inline Vec2 project_to_boundary(const BoundaryCurve& c, int tag, Vec2 p) {
  switch (c.kind) {
    case BoundaryCurve::Kind::circle: {
      double r = norm(p);
      if (r <= 0.0) return p;
      return (c.r1 / r) * p;
    }
    case BoundaryCurve::Kind::annulus: {
      double r = norm(p);
      if (r <= 0.0) return p;
      double target = (tag == 1) ? c.r1 : c.r2;
      return (target / r) * p;
    }
    case BoundaryCurve::Kind::dumbbell: {
      // Union of unit disks at (+-1, 0) and the handle |y| <= H, |x| <= 1.
      // Candidates: radial projection onto either circle, clamped projection
      // onto either handle wall; keep those on the union boundary, pick the
      // nearest.
      const double H = c.r1;
      const double xc = std::sqrt(std::max(0.0, 1.0 - H * H));
      Vec2 best = p;
      double best_d2 = 1e300;
      auto consider = [&](Vec2 q, bool valid) {
        if (!valid) return;
        double d2 = dot(q - p, q - p);
        if (d2 < best_d2) {
          best_d2 = d2;
          best = q;
        }
      };
      for (double cx : {-1.0, 1.0}) {
        Vec2 d = p - Vec2{cx, 0.0};
        double r = norm(d);
        if (r > 0.0) {
          Vec2 q = Vec2{cx, 0.0} + (1.0 / r) * d;
          bool on_handle_side = (cx > 0.0) ? (q.x < 1.0) : (q.x > -1.0);
          consider(q, !(on_handle_side && std::abs(q.y) < H));
        }
      }
      for (double sy : {-1.0, 1.0}) {
        double x = std::clamp(p.x, -1.0 + xc, 1.0 - xc);
        consider(Vec2{x, sy * H}, true);
      }
      return best;
    }
    case BoundaryCurve::Kind::none:
      return p;
  }
  return p;
}

// Rotate each element so its longest edge (ties broken by vertex indices)
// becomes local face 1, the refinement edge.
inline void assign_longest_refinement_edges(Mesh& m) {
  for (auto& e : m.elements) {
    int best = 0;
    std::tuple<double, int, int> best_key{-1.0, 0, 0};
    for (int f = 0; f < 3; ++f) {
      int u = e[f], v = e[(f + 1) % 3];
      Vec2 d = m.vertices[v] - m.vertices[u];
      std::tuple<double, int, int> key{dot(d, d), std::min(u, v), std::max(u, v)};
      if (key > best_key) {
        best_key = key;
        best = f;
      }
    }
    // face 1 is (v1,v2); face best is (v[best], v[best+1]) -> peak is v[best+2]
    int peak = (best + 2) % 3;
    std::array<int, 3> r{e[peak], e[(peak + 1) % 3], e[(peak + 2) % 3]};
    e = r;
  }
}

inline void finalize_fresh_mesh(Mesh& m) {
  m.generation.assign(m.num_elements(), 0);
  m.parent_element.assign(m.num_elements(), -1);
  m.vertex_parents.resize(m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i) m.vertex_parents[i] = {i, i};
}

inline void derive_boundary_from_edges(Mesh& m) {
  auto tab = build_edge_table(m);
  m.boundary_edges.clear();
  m.vertex_tag.assign(m.num_vertices(), 0);
  for (const auto& ed : tab.edges) {
    if (ed.tri[1] < 0) {
      m.boundary_edges.push_back({ed.a, ed.b, 1});
      m.vertex_tag[ed.a] = 1;
      m.vertex_tag[ed.b] = 1;
    }
  }
  std::sort(m.boundary_edges.begin(), m.boundary_edges.end());
}

}  // namespace detail

inline void validate_mesh(const Mesh& m) {
  if (m.vertices.empty() || m.elements.empty())
    throw std::runtime_error("mesh: empty");
  if (static_cast<int>(m.vertex_tag.size()) != m.num_vertices())
    throw std::runtime_error("mesh: vertex_tag size mismatch");
  for (int t = 0; t < m.num_elements(); ++t) {
    const auto& e = m.elements[t];
    for (int v : e)
      if (v < 0 || v >= m.num_vertices()) throw std::runtime_error("mesh: vertex index out of range");
    if (m.signed_area(t) <= 0.0)
      throw std::runtime_error("mesh: element " + std::to_string(t) + " not positively oriented");
  }
  auto tab = detail::build_edge_table(m);
  std::map<std::pair<int, int>, int> stored;
  for (const auto& be : m.boundary_edges) stored[{be[0], be[1]}] = be[2];
  for (const auto& ed : tab.edges) {
    bool is_boundary = ed.tri[1] < 0;
    bool listed = stored.count({ed.a, ed.b}) > 0;
    if (is_boundary != listed)
      throw std::runtime_error("mesh: boundary edge bookkeeping inconsistent (conformity violation)");
  }
  if (stored.size() != static_cast<size_t>(std::count_if(
          tab.edges.begin(), tab.edges.end(), [](const auto& e) { return e.tri[1] < 0; })))
    throw std::runtime_error("mesh: stale boundary edges");
}

inline double min_angle(const Mesh& m) {
  double amin = 4.0;
  for (int t = 0; t < m.num_elements(); ++t) {
    const auto& e = m.elements[t];
    for (int i = 0; i < 3; ++i) {
      Vec2 a = m.vertices[e[(i + 1) % 3]] - m.vertices[e[i]];
      Vec2 b = m.vertices[e[(i + 2) % 3]] - m.vertices[e[i]];
      double ang = std::atan2(std::abs(cross(a, b)), dot(a, b));
      amin = std::min(amin, ang);
    }
  }
  return amin;
}

// Per-element mesh size h_T = |T|^{1/2}.
inline std::vector<double> mesh_size(const Mesh& m) {
  std::vector<double> h(m.num_elements());
  for (int t = 0; t < m.num_elements(); ++t) h[t] = std::sqrt(m.element_area(t));
  return h;
}

inline double max_mesh_size(const Mesh& m) {
  double hmax = 0.0;
  for (int t = 0; t < m.num_elements(); ++t) hmax = std::max(hmax, std::sqrt(m.element_area(t)));
  return hmax;
}

namespace detail {

// Bisect all elements whose edges appear in `edge_marked`, inserting one
// midpoint per marked edge. Assumes closure already holds: any element with a
// marked edge has its refinement edge marked.
inline Mesh refine_marked_edges(const Mesh& m, const EdgeTable& tab, std::vector<char> edge_marked) {
  Mesh out;
  out.vertices = m.vertices;
  out.vertex_tag = m.vertex_tag;
  out.curve = m.curve;
  out.snap_on_refine = m.snap_on_refine;
  out.vertex_parents.resize(m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i) out.vertex_parents[i] = {i, i};

  std::map<std::pair<int, int>, int> boundary_tag;
  for (const auto& be : m.boundary_edges) boundary_tag[{be[0], be[1]}] = be[2];

  // Midpoints, in deterministic edge order.
  std::vector<int> midpoint(tab.edges.size(), -1);
  for (size_t e = 0; e < tab.edges.size(); ++e) {
    if (!edge_marked[e]) continue;
    const auto& ed = tab.edges[e];
    Vec2 p = 0.5 * (m.vertices[ed.a] + m.vertices[ed.b]);
    int tag = 0;
    auto it = boundary_tag.find({ed.a, ed.b});
    if (it != boundary_tag.end()) {
      tag = it->second;
      if (m.snap_on_refine && m.curve.kind != BoundaryCurve::Kind::none)
        p = project_to_boundary(m.curve, tag, p);
    }
    midpoint[e] = out.num_vertices();
    out.vertices.push_back(p);
    out.vertex_tag.push_back(tag);
    out.vertex_parents.push_back({ed.a, ed.b});
  }

  // Children. A bisection of (v0,v1,v2) at the midpoint m1 of the refinement
  // edge (v1,v2) yields (m1,v0,v1) and (m1,v2,v0); their refinement edges are
  // the remaining parent edges, so a second bisection handles them when marked.
  auto emit = [&](std::array<int, 3> tri, int gen, int parent) {
    out.elements.push_back(tri);
    out.generation.push_back(gen);
    out.parent_element.push_back(parent);
  };
  for (int t = 0; t < m.num_elements(); ++t) {
    const auto& e = m.elements[t];
    const auto& ee = tab.elem_edge[t];
    bool m0 = edge_marked[ee[0]], m1 = edge_marked[ee[1]], m2 = edge_marked[ee[2]];
    int gen = m.generation.empty() ? 0 : m.generation[t];
    if (!m1) {
      if (m0 || m2) throw std::logic_error("mesh: refinement closure violated");
      emit(e, gen, t);
      continue;
    }
    int mid1 = midpoint[ee[1]];
    // child adjacent to v1, refinement edge (v0,v1) = parent face 0
    if (m0) {
      int mid0 = midpoint[ee[0]];
      emit({mid0, mid1, e[0]}, gen + 2, t);
      emit({mid0, e[1], mid1}, gen + 2, t);
    } else {
      emit({mid1, e[0], e[1]}, gen + 1, t);
    }
    // child adjacent to v2, refinement edge (v2,v0) = parent face 2
    if (m2) {
      int mid2 = midpoint[ee[2]];
      emit({mid2, mid1, e[2]}, gen + 2, t);
      emit({mid2, e[0], mid1}, gen + 2, t);
    } else {
      emit({mid1, e[2], e[0]}, gen + 1, t);
    }
  }

  // Boundary edges: split where marked.
  std::map<std::pair<int, int>, int> edge_index;
  for (size_t i = 0; i < tab.edges.size(); ++i)
    edge_index[{tab.edges[i].a, tab.edges[i].b}] = static_cast<int>(i);
  out.boundary_edges.clear();
  for (const auto& be : m.boundary_edges) {
    auto it = edge_index.find({be[0], be[1]});
    int e = (it == edge_index.end()) ? -1 : it->second;
    if (e >= 0 && edge_marked[e]) {
      int mid = midpoint[e];
      out.boundary_edges.push_back({std::min(be[0], mid), std::max(be[0], mid), be[2]});
      out.boundary_edges.push_back({std::min(be[1], mid), std::max(be[1], mid), be[2]});
    } else {
      out.boundary_edges.push_back(be);
    }
  }
  std::sort(out.boundary_edges.begin(), out.boundary_edges.end());
  return out;
}

}  // namespace detail

// Newest-vertex bisection of all marked elements, with conformity closure.
inline Mesh bisect(const Mesh& m, const std::vector<int>& marked) {
  auto tab = detail::build_edge_table(m);
  std::vector<char> edge_marked(tab.edges.size(), 0);
  for (int t : marked) {
    if (t < 0 || t >= m.num_elements())
      throw std::invalid_argument("bisect: marked element index out of range");
    edge_marked[tab.elem_edge[t][1]] = 1;
  }
  // Closure: an element with any marked edge must have its refinement edge marked.
  bool changed = true;
  while (changed) {
    changed = false;
    for (int t = 0; t < m.num_elements(); ++t) {
      const auto& ee = tab.elem_edge[t];
      if ((edge_marked[ee[0]] || edge_marked[ee[2]]) && !edge_marked[ee[1]]) {
        edge_marked[ee[1]] = 1;
        changed = true;
      }
    }
  }
  return detail::refine_marked_edges(m, tab, std::move(edge_marked));
}

// Uniform refinement: every edge is bisected, so each element is subdivided
// into 4 children.
inline Mesh uniform_refine(const Mesh& m) {
  auto tab = detail::build_edge_table(m);
  std::vector<char> edge_marked(tab.edges.size(), 1);
  return detail::refine_marked_edges(m, tab, std::move(edge_marked));
}

namespace detail {

inline Mesh grid_mesh(double x0, double x1, double y0, double y1, int nx, int ny) {
  Mesh m;
  auto idx = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.vertices.push_back({x0 + (x1 - x0) * i / nx, y0 + (y1 - y0) * j / ny});
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int v00 = idx(i, j), v10 = idx(i + 1, j), v01 = idx(i, j + 1), v11 = idx(i + 1, j + 1);
      m.elements.push_back({v00, v10, v11});
      m.elements.push_back({v00, v11, v01});
    }
  derive_boundary_from_edges(m);
  return m;
}

inline Mesh l_shape_mesh(int n) {
  // (0,2)^2 \ [1,2]^2, n cells per unit length
  Mesh m;
  std::map<std::pair<int, int>, int> id;
  auto get = [&](int i, int j) {
    auto it = id.find({i, j});
    if (it != id.end()) return it->second;
    int k = m.num_vertices();
    m.vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    id[{i, j}] = k;
    return k;
  };
  for (int j = 0; j < 2 * n; ++j)
    for (int i = 0; i < 2 * n; ++i) {
      if (i >= n && j >= n) continue;
      int v00 = get(i, j), v10 = get(i + 1, j), v01 = get(i, j + 1), v11 = get(i + 1, j + 1);
      m.elements.push_back({v00, v10, v11});
      m.elements.push_back({v00, v11, v01});
    }
  derive_boundary_from_edges(m);
  return m;
}

inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  auto sgn = [](double v) { return (v > 0) - (v < 0); };
  double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  return sgn(d1) * sgn(d2) < 0 && sgn(d3) * sgn(d4) < 0;
}

inline bool point_in_triangle(Vec2 p, Vec2 a, Vec2 b, Vec2 c) {
  double d1 = cross(b - a, p - a), d2 = cross(c - b, p - b), d3 = cross(a - c, p - c);
  return d1 >= 0 && d2 >= 0 && d3 >= 0;
}

inline void validate_polygon(const std::vector<Vec2>& poly) {
  int n = static_cast<int>(poly.size());
  if (n < 3) throw std::invalid_argument("polygon: fewer than 3 vertices");
  double area2 = 0.0;
  for (int i = 0; i < n; ++i) area2 += cross(poly[i], poly[(i + 1) % n]);
  if (area2 <= 0.0) throw std::invalid_argument("polygon: vertices must be counter-clockwise");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]))
        throw std::invalid_argument("polygon: self-intersecting");
    }
}

inline Mesh ear_clip(const std::vector<Vec2>& poly) {
  Mesh m;
  m.vertices = poly;
  std::vector<int> ring(poly.size());
  for (size_t i = 0; i < poly.size(); ++i) ring[i] = static_cast<int>(i);
  int guard = 0;
  while (ring.size() > 3) {
    bool clipped = false;
    for (size_t k = 0; k < ring.size(); ++k) {
      int ia = ring[(k + ring.size() - 1) % ring.size()];
      int ib = ring[k];
      int ic = ring[(k + 1) % ring.size()];
      Vec2 a = poly[ia], b = poly[ib], c = poly[ic];
      if (cross(b - a, c - a) <= 1e-14) continue;  // reflex or degenerate
      bool ear = true;
      for (int iv : ring) {
        if (iv == ia || iv == ib || iv == ic) continue;
        if (point_in_triangle(poly[iv], a, b, c)) {
          ear = false;
          break;
        }
      }
      if (!ear) continue;
      m.elements.push_back({ia, ib, ic});
      ring.erase(ring.begin() + k);
      clipped = true;
      break;
    }
    if (!clipped || ++guard > 100000)
      throw std::runtime_error("polygon: ear clipping failed (is the polygon simple?)");
  }
  m.elements.push_back({ring[0], ring[1], ring[2]});
  derive_boundary_from_edges(m);
  return m;
}

// A few Laplacian smoothing sweeps over interior vertices, reverting any move
// that would invert an incident element. Construction-time only.
inline void smooth_interior(Mesh& m, int sweeps) {
  for (int s = 0; s < sweeps; ++s) {
    std::vector<Vec2> acc(m.num_vertices(), Vec2{0, 0});
    std::vector<int> cnt(m.num_vertices(), 0);
    for (const auto& e : m.elements)
      for (int i = 0; i < 3; ++i) {
        acc[e[i]] = acc[e[i]] + m.vertices[e[(i + 1) % 3]] + m.vertices[e[(i + 2) % 3]];
        cnt[e[i]] += 2;
      }
    std::vector<std::vector<int>> star(m.num_vertices());
    for (int t = 0; t < m.num_elements(); ++t)
      for (int v : m.elements[t]) star[v].push_back(t);
    for (int v = 0; v < m.num_vertices(); ++v) {
      if (m.vertex_tag[v] != 0 || cnt[v] == 0) continue;
      Vec2 old = m.vertices[v];
      m.vertices[v] = (1.0 / cnt[v]) * acc[v];
      for (int t : star[v])
        if (m.signed_area(t) <= 0.0) {
          m.vertices[v] = old;
          break;
        }
    }
  }
}

inline Mesh refine_construction(Mesh m, int rounds, bool snap) {
  bool saved = m.snap_on_refine;
  m.snap_on_refine = snap;
  for (int r = 0; r < rounds; ++r) m = uniform_refine(m);
  m.snap_on_refine = saved;
  return m;
}

}  // namespace detail

inline Mesh generate_domain(const DomainSpec& spec) {
  if (spec.resolution < 1) throw std::invalid_argument("domain: resolution must be >= 1");
  Mesh m;
  switch (spec.kind) {
    case DomainSpec::Kind::unit_square:
      m = detail::grid_mesh(0, 1, 0, 1, spec.resolution, spec.resolution);
      break;
    case DomainSpec::Kind::rectangle: {
      if (!(spec.x1 > spec.x0) || !(spec.y1 > spec.y0))
        throw std::invalid_argument("domain: rectangle ranges must be increasing");
      double lx = spec.x1 - spec.x0, ly = spec.y1 - spec.y0;
      int nx = spec.resolution;
      int ny = std::max(1, static_cast<int>(std::lround(nx * ly / lx)));
      m = detail::grid_mesh(spec.x0, spec.x1, spec.y0, spec.y1, nx, ny);
      break;
    }
    case DomainSpec::Kind::l_shape:
      m = detail::l_shape_mesh(spec.resolution);
      break;
    case DomainSpec::Kind::polygon: {
      detail::validate_polygon(spec.polygon);
      m = detail::ear_clip(spec.polygon);
      for (int r = 1; r < spec.resolution; ++r) {
        m = uniform_refine(m);
        detail::smooth_interior(m, 4);
      }
      break;
    }
    case DomainSpec::Kind::circle: {
      if (spec.radius <= 0.0 || spec.segments < 3)
        throw std::invalid_argument("domain: circle needs radius > 0 and >= 3 segments");
      m.vertices.push_back({0, 0});
      int s = spec.segments;
      for (int i = 0; i < s; ++i) {
        double th = 2.0 * M_PI * i / s;
        m.vertices.push_back({spec.radius * std::cos(th), spec.radius * std::sin(th)});
      }
      for (int i = 0; i < s; ++i) m.elements.push_back({0, 1 + i, 1 + (i + 1) % s});
      detail::derive_boundary_from_edges(m);
      m.curve = {BoundaryCurve::Kind::circle, spec.radius, 0.0};
      m = detail::refine_construction(std::move(m), spec.resolution - 1, true);
      break;
    }
    case DomainSpec::Kind::annulus: {
      if (!(0.0 < spec.r_inner && spec.r_inner < spec.r_outer))
        throw std::invalid_argument("domain: annulus needs 0 < r1 < r2");
      if (spec.segments < 3) throw std::invalid_argument("domain: annulus needs >= 3 segments");
      int s = spec.segments;
      double rmid = 0.5 * (spec.r_inner + spec.r_outer);
      int nr = std::max(1, static_cast<int>(std::lround(
                                s * (spec.r_outer - spec.r_inner) / (2.0 * M_PI * rmid))));
      auto idx = [&](int i, int j) { return j * s + (i % s); };
      for (int j = 0; j <= nr; ++j) {
        double r = spec.r_inner + (spec.r_outer - spec.r_inner) * j / nr;
        for (int i = 0; i < s; ++i) {
          double th = 2.0 * M_PI * i / s;
          m.vertices.push_back({r * std::cos(th), r * std::sin(th)});
        }
      }
      // (theta, r) is orientation-reversing, so the quad split is mirrored
      for (int j = 0; j < nr; ++j)
        for (int i = 0; i < s; ++i) {
          int v00 = idx(i, j), v10 = idx(i + 1, j), v01 = idx(i, j + 1), v11 = idx(i + 1, j + 1);
          m.elements.push_back({v00, v11, v10});
          m.elements.push_back({v00, v01, v11});
        }
      detail::derive_boundary_from_edges(m);
      for (int i = 0; i < m.num_vertices(); ++i)
        if (m.vertex_tag[i] != 0) m.vertex_tag[i] = (norm(m.vertices[i]) < rmid) ? 1 : 2;
      for (auto& be : m.boundary_edges) be[2] = m.vertex_tag[be[0]];
      m.curve = {BoundaryCurve::Kind::annulus, spec.r_inner, spec.r_outer};
      m = detail::refine_construction(std::move(m), spec.resolution - 1, true);
      break;
    }
    case DomainSpec::Kind::dumbbell: {
      const double H = spec.handle_halfwidth;
      if (!(H > 0.0 && H < 1.0))
        throw std::invalid_argument("domain: dumbbell needs 0 < half-width < 1");
      // CCW outline: right circle arc, upper wall, left circle arc, lower wall.
      const double beta = std::asin(H);
      const double xc = std::sqrt(1.0 - H * H);
      int arc = std::max(8, spec.segments);
      std::vector<Vec2> poly;
      for (int i = 0; i <= arc; ++i) {
        double th = -(M_PI - beta) + (2.0 * (M_PI - beta)) * i / arc;  // up through 0
        poly.push_back({1.0 + std::cos(th), std::sin(th)});
      }
      int wall = std::max(2, static_cast<int>(std::lround(arc * (1.0 - xc) / (M_PI - beta))));
      for (int i = 1; i < 2 * wall; ++i) {
        double x = (1.0 - xc) - (2.0 * (1.0 - xc)) * i / (2 * wall);
        poly.push_back({x, H});
      }
      for (int i = 0; i <= arc; ++i) {
        double th = beta + (2.0 * (M_PI - beta)) * i / arc;  // up over the top
        poly.push_back({-1.0 + std::cos(th), std::sin(th)});
      }
      for (int i = 1; i < 2 * wall; ++i) {
        double x = -(1.0 - xc) + (2.0 * (1.0 - xc)) * i / (2 * wall);
        poly.push_back({x, -H});
      }
      detail::validate_polygon(poly);
      m = detail::ear_clip(poly);
      m.curve = {BoundaryCurve::Kind::dumbbell, H, 0.0};
      for (int r = 1; r < spec.resolution; ++r) {
        bool saved = m.snap_on_refine;
        m.snap_on_refine = true;
        m = uniform_refine(m);
        m.snap_on_refine = saved;
        detail::smooth_interior(m, 4);
      }
      break;
    }
  }
  detail::assign_longest_refinement_edges(m);
  detail::finalize_fresh_mesh(m);
  m.snap_on_refine = spec.snap_boundary;
  validate_mesh(m);
  return m;
}

// ---- ASCII mesh format -------------------------------------------------
// header `vertices N elements M`, then N lines `x y boundary_tag`,
// then M lines `v0 v1 v2 refedge` where refedge f designates the edge
// (v_f, v_{(f+1)%3}).

inline void write_mesh_ascii(const Mesh& m, std::ostream& os) {
  os.precision(17);
  os << "vertices " << m.num_vertices() << " elements " << m.num_elements() << "\n";
  for (int i = 0; i < m.num_vertices(); ++i)
    os << m.vertices[i].x << " " << m.vertices[i].y << " " << m.vertex_tag[i] << "\n";
  for (const auto& e : m.elements) os << e[0] << " " << e[1] << " " << e[2] << " 1\n";
}

inline Mesh read_mesh_ascii(std::istream& is) {
  std::string kw1, kw2;
  int nv = 0, ne = 0;
  is >> kw1 >> nv >> kw2 >> ne;
  if (kw1 != "vertices" || kw2 != "elements" || nv <= 0 || ne <= 0)
    throw std::runtime_error("mesh: bad ASCII header");
  Mesh m;
  m.vertices.resize(nv);
  m.vertex_tag.resize(nv);
  for (int i = 0; i < nv; ++i) is >> m.vertices[i].x >> m.vertices[i].y >> m.vertex_tag[i];
  m.elements.resize(ne);
  for (int t = 0; t < ne; ++t) {
    std::array<int, 3> e;
    int ref = 0;
    is >> e[0] >> e[1] >> e[2] >> ref;
    if (ref < 0 || ref > 2) throw std::runtime_error("mesh: bad refinement edge index");
    int peak = (ref + 2) % 3;
    m.elements[t] = {e[peak], e[(peak + 1) % 3], e[(peak + 2) % 3]};
  }
  if (!is) throw std::runtime_error("mesh: truncated ASCII mesh");
  // Boundary edges are the ones with a single adjacent element; their tag
  // comes from the file's vertex tags.
  auto tab = detail::build_edge_table(m);
  for (const auto& ed : tab.edges) {
    if (ed.tri[1] >= 0) continue;
    int tag = std::max({1, m.vertex_tag[ed.a], m.vertex_tag[ed.b]});
    m.boundary_edges.push_back({ed.a, ed.b, tag});
    if (m.vertex_tag[ed.a] == 0) m.vertex_tag[ed.a] = tag;
    if (m.vertex_tag[ed.b] == 0) m.vertex_tag[ed.b] = tag;
  }
  std::sort(m.boundary_edges.begin(), m.boundary_edges.end());
  detail::finalize_fresh_mesh(m);
  validate_mesh(m);
  return m;
}

}  // namespace eigopt
