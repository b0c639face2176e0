#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eigopt/mesh.hpp"

namespace eigopt {

using NamedField = std::pair<std::string, Eigen::VectorXd>;

// Legacy ASCII unstructured-grid file with named point and cell scalars.
inline void write_vtk(const std::string& path, const Mesh& m,
                      const std::vector<NamedField>& point_fields,
                      const std::vector<NamedField>& cell_fields) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("vtk: cannot open " + path);
  os.precision(17);
  os << "# vtk DataFile Version 3.0\n";
  os << "eigopt snapshot\n";
  os << "ASCII\n";
  os << "DATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << m.num_vertices() << " double\n";
  for (const auto& p : m.vertices) os << p.x << " " << p.y << " 0\n";
  os << "CELLS " << m.num_elements() << " " << 4 * m.num_elements() << "\n";
  for (const auto& e : m.elements) os << "3 " << e[0] << " " << e[1] << " " << e[2] << "\n";
  os << "CELL_TYPES " << m.num_elements() << "\n";
  for (int t = 0; t < m.num_elements(); ++t) os << "5\n";

  if (!point_fields.empty()) {
    os << "POINT_DATA " << m.num_vertices() << "\n";
    for (const auto& [name, values] : point_fields) {
      if (values.size() != m.num_vertices())
        throw std::invalid_argument("vtk: point field '" + name + "' has wrong size");
      os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (int i = 0; i < values.size(); ++i) os << values[i] << "\n";
    }
  }
  if (!cell_fields.empty()) {
    os << "CELL_DATA " << m.num_elements() << "\n";
    for (const auto& [name, values] : cell_fields) {
      if (values.size() != m.num_elements())
        throw std::invalid_argument("vtk: cell field '" + name + "' has wrong size");
      os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (int i = 0; i < values.size(); ++i) os << values[i] << "\n";
    }
  }
  if (!os) throw std::runtime_error("vtk: write failed for " + path);
}

struct VtkSnapshot {
  Mesh mesh;
  std::vector<NamedField> point_fields;
  std::vector<NamedField> cell_fields;

  const Eigen::VectorXd* point_field(const std::string& name) const {
    for (const auto& [n, v] : point_fields)
      if (n == name) return &v;
    return nullptr;
  }
  const Eigen::VectorXd* cell_field(const std::string& name) const {
    for (const auto& [n, v] : cell_fields)
      if (n == name) return &v;
    return nullptr;
  }
};

inline VtkSnapshot read_vtk(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("vtk: cannot open " + path);
  VtkSnapshot snap;
  std::string line, word;
  int npoints = 0, ncells = 0;
  enum class Block { none, point, cell } block = Block::none;

  while (std::getline(is, line)) {
    std::istringstream ls(line);
    if (!(ls >> word)) continue;
    if (word == "POINTS") {
      ls >> npoints;
      snap.mesh.vertices.resize(npoints);
      for (int i = 0; i < npoints; ++i) {
        double z;
        is >> snap.mesh.vertices[i].x >> snap.mesh.vertices[i].y >> z;
      }
    } else if (word == "CELLS") {
      ls >> ncells;
      snap.mesh.elements.resize(ncells);
      for (int t = 0; t < ncells; ++t) {
        int n;
        is >> n;
        if (n != 3) throw std::runtime_error("vtk: only triangle cells are supported");
        is >> snap.mesh.elements[t][0] >> snap.mesh.elements[t][1] >> snap.mesh.elements[t][2];
      }
    } else if (word == "POINT_DATA") {
      block = Block::point;
    } else if (word == "CELL_DATA") {
      block = Block::cell;
    } else if (word == "SCALARS") {
      std::string name;
      ls >> name;
      std::getline(is, line);  // LOOKUP_TABLE line
      int count = (block == Block::point) ? npoints : ncells;
      Eigen::VectorXd values(count);
      for (int i = 0; i < count; ++i) is >> values[i];
      if (block == Block::point)
        snap.point_fields.emplace_back(name, std::move(values));
      else if (block == Block::cell)
        snap.cell_fields.emplace_back(name, std::move(values));
      else
        throw std::runtime_error("vtk: SCALARS outside a data block");
    }
  }
  if (npoints == 0 || ncells == 0) throw std::runtime_error("vtk: no grid in " + path);
  detail::derive_boundary_from_edges(snap.mesh);
  detail::assign_longest_refinement_edges(snap.mesh);
  detail::finalize_fresh_mesh(snap.mesh);
  validate_mesh(snap.mesh);
  return snap;
}

}  // namespace eigopt
