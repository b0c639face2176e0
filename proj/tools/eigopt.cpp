#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "eigopt/adapt.hpp"
#include "eigopt/config.hpp"
#include "eigopt/csv.hpp"
#include "eigopt/reference.hpp"
#include "eigopt/render.hpp"
#include "eigopt/vtk.hpp"

namespace fs = std::filesystem;
using namespace eigopt;

namespace {

void export_level(const RunConfig& cfg, const AdaptiveRun& run, size_t k, const fs::path& dir) {
  const MeshLevel& lv = run.levels[k];
  std::vector<NamedField> points = {{"phi", lv.phi}};
  for (size_t j = 0; j < cfg.objective.indices.size(); ++j)
    points.emplace_back("w_" + std::to_string(cfg.objective.indices[j]),
                        lv.eig.vectors[cfg.objective.indices[j] - 1]);
  std::vector<NamedField> cells;
  for (size_t j = 0; j < lv.indicators.size(); ++j)
    cells.emplace_back("eta_" + std::to_string(j), lv.indicators[j].per_element);
  auto h = mesh_size(lv.mesh);
  cells.emplace_back("h", Eigen::Map<const Eigen::VectorXd>(h.data(), h.size()));
  write_vtk((dir / ("mesh_" + std::to_string(k) + ".vtk")).string(), lv.mesh, points, cells);
  if (cfg.out.png) {
    render_png(lv.mesh, lv.phi, (dir / ("phi_" + std::to_string(k) + ".png")).string());
    for (size_t j = 0; j < lv.indicators.size(); ++j)
      render_cell_png(lv.mesh, lv.indicators[j].per_element,
                      (dir / ("eta" + std::to_string(j) + "_" + std::to_string(k) + ".png"))
                          .string());
  }
}

int run_command(const std::string& config_path, const std::string& mode,
                long seed, const std::string& out_dir) {
  RunConfig cfg = load_config_file(config_path);
  if (mode == "adaptive") cfg.afem.mode = AfemParams::Mode::adaptive;
  else if (mode == "uniform") cfg.afem.mode = AfemParams::Mode::uniform;
  else if (!mode.empty()) throw ConfigError("mode must be adaptive or uniform");
  if (seed >= 0) cfg.init.seed = static_cast<std::uint64_t>(seed);
  if (const char* env = std::getenv("EIGOPT_OUT"); env && *env) cfg.out.directory = env;
  if (!out_dir.empty()) cfg.out.directory = out_dir;

  fs::path dir(cfg.out.directory);
  fs::create_directories(dir);
  write_text_file((dir / "config.resolved.toml").string(), serialize_config(cfg));

  std::cout << "running " << config_path << " ("
            << (cfg.afem.mode == AfemParams::Mode::adaptive ? "adaptive" : "uniform")
            << ", seed " << cfg.init.seed << ") -> " << dir.string() << "\n";

  AdaptiveRun run = run_config(cfg);

  if (cfg.out.csv) {
    write_text_file((dir / "convergence.csv").string(), convergence_csv(run, cfg));
    write_text_file((dir / "summary.csv").string(), summary_csv(run, cfg));
  }
  for (size_t k = 0; k < run.levels.size(); ++k)
    if (cfg.out.vtk_every > 0 &&
        (k % cfg.out.vtk_every == 0 || k + 1 == run.levels.size()))
      export_level(cfg, run, k, dir);

  for (const auto& msg : run.log) std::cout << "note: " << msg << "\n";
  std::cout << "mesh  vertices  objective      eta_0";
  for (size_t j = 1; j < run.levels.front().indicators.size(); ++j) std::cout << "        eta_" << j;
  std::cout << "\n";
  std::cout.precision(6);
  for (size_t k = 0; k < run.levels.size(); ++k) {
    const auto& lv = run.levels[k];
    double psi = 0.0;
    for (size_t j = 0; j < cfg.objective.indices.size(); ++j)
      psi += cfg.objective.weights[j] * lv.eig.lambdas[cfg.objective.indices[j] - 1];
    std::cout << k << "     " << lv.mesh.num_vertices() << "      "
              << cfg.reported_objective(psi);
    for (const auto& f : lv.indicators) std::cout << "   " << f.global;
    std::cout << "\n";
  }
  double total = 0.0;
  for (const auto& lv : run.levels) total += lv.t_solve + lv.t_estimate + lv.t_mark + lv.t_refine;
  std::cout << "total wall time: " << total << " s\n";
  return 0;
}

int validate_command(const std::string& config_path) {
  RunConfig cfg = load_config_file(config_path);
  Mesh mesh = generate_domain(cfg.domain);
  std::cout << "ok: " << config_path << " (" << mesh.num_vertices() << " vertices, "
            << mesh.num_elements() << " elements on the initial mesh)\n";
  return 0;
}

int errors_example2_command(const std::string& run_dir) {
  fs::path dir(run_dir);
  RunConfig cfg = load_config_file((dir / "config.resolved.toml").string());
  if (cfg.domain.kind != DomainSpec::Kind::circle)
    throw ConfigError("errors-example2: run directory is not a circle-domain run");

  // reload the per-mesh snapshots
  AdaptiveRun run;
  for (size_t k = 0;; ++k) {
    fs::path vtk = dir / ("mesh_" + std::to_string(k) + ".vtk");
    if (!fs::exists(vtk)) break;
    VtkSnapshot snap = read_vtk(vtk.string());
    MeshLevel lv;
    lv.mesh = std::move(snap.mesh);
    const Eigen::VectorXd* phi = snap.point_field("phi");
    if (!phi) throw std::runtime_error("errors-example2: snapshot lacks a phi field");
    lv.phi = *phi;
    FemContext ctx = FemContext::build(lv.mesh, cfg.objective.volume_fraction);
    lv.eig = eigensolve_for(ctx, cfg.objective, lv.phi, cfg.eig);
    run.levels.push_back(std::move(lv));
  }
  if (run.levels.empty())
    throw std::runtime_error("errors-example2: no mesh_k.vtk snapshots in " + run_dir);

  ReferenceSolution ref = circle_annulus_reference();
  double lambda_ref = 0.0;
  fs::path cache = dir / "lambda_ref.txt";
  if (fs::exists(cache)) {
    std::ifstream in(cache);
    in >> lambda_ref;
  }
  if (!(lambda_ref > 0.0)) {
    std::cout << "computing reference eigenvalue on a fine mesh (>= 50k dofs)...\n";
    lambda_ref = compute_reference_lambda(cfg.domain, cfg.objective.alpha, ref, 50000, cfg.eig);
    std::ostringstream os;
    os.precision(17);
    os << lambda_ref << "\n";
    write_text_file(cache.string(), os.str());
  }

  auto rows = example2_errors(run, cfg, ref, lambda_ref);
  write_text_file((dir / "errors.csv").string(), errors_csv(rows));
  std::cout << "lambda_ref = " << lambda_ref << "\n";
  std::cout << "dofs    |lambda-ref|   L1          L2          H1\n";
  std::cout.precision(6);
  for (const auto& r : rows)
    std::cout << r.dofs << "   " << r.lambda_error << "   " << r.l1 << "   " << r.l2 << "   "
              << r.h1 << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive phase-field eigenvalue topology optimization"};
  app.require_subcommand(1);

  std::string config_path, mode, out_dir, run_dir;
  long seed = -1;

  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "config file (TOML-style)")->required();
  run->add_option("--mode", mode, "override refinement mode: adaptive|uniform");
  run->add_option("--seed", seed, "override the random-init seed");
  run->add_option("--out", out_dir, "override the output directory");

  auto* validate = app.add_subcommand("validate", "parse and validate a config");
  validate->add_option("config", config_path, "config file")->required();

  auto* errs = app.add_subcommand("errors-example2",
                                  "error table against the circle benchmark reference");
  errs->add_option("run-dir", run_dir, "directory produced by `run`")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(config_path, mode, seed, out_dir);
    if (validate->parsed()) return validate_command(config_path);
    if (errs->parsed()) return errors_example2_command(run_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
