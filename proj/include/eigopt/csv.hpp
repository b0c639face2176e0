#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "eigopt/adapt.hpp"

namespace eigopt {

// One row per outer iteration across all meshes.
inline std::string convergence_csv(const AdaptiveRun& run, const RunConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "mesh,outer,J,Psi,GL,volume_error,";
  for (size_t j = 0; j < cfg.objective.indices.size(); ++j)
    os << "lambda_" << cfg.objective.indices[j] << ",";
  os << "mu,beta,tau\n";
  for (const auto& row : run.history) {
    os << row.mesh_k << "," << row.outer << "," << row.J << "," << row.Psi << "," << row.GL << ","
       << row.absG << ",";
    for (double l : row.lambdas) os << l << ",";
    os << row.mu << "," << row.beta << "," << row.tau << "\n";
  }
  return os.str();
}

// One row per mesh level: sizes, final spectrum, estimator totals, timings.
inline std::string summary_csv(const AdaptiveRun& run, const RunConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "mesh,vertices,elements,free_dofs,marked,";
  size_t l1 = run.levels.empty() ? 1 : run.levels.front().indicators.size();
  for (size_t j = 0; j < l1; ++j) os << "eta_" << j << ",";
  os << "objective,sandwich_violations,t_solve,t_estimate,t_mark,t_refine\n";
  for (size_t k = 0; k < run.levels.size(); ++k) {
    const auto& lv = run.levels[k];
    int free_dofs = 0;
    for (int tag : lv.mesh.vertex_tag) free_dofs += (tag == 0);
    os << k << "," << lv.mesh.num_vertices() << "," << lv.mesh.num_elements() << "," << free_dofs
       << "," << lv.marks.union_set.size() << ",";
    for (const auto& f : lv.indicators) os << f.global << ",";
    double psi = 0.0;
    for (size_t j = 0; j < cfg.objective.indices.size(); ++j)
      psi += cfg.objective.weights[j] * lv.eig.lambdas[cfg.objective.indices[j] - 1];
    os << cfg.reported_objective(psi) << "," << lv.sandwich_violations << "," << lv.t_solve << ","
       << lv.t_estimate << "," << lv.t_mark << "," << lv.t_refine << "\n";
  }
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace eigopt
