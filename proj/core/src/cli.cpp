#include "pbdw/cli.hpp"

#include "pbdw/experiments.hpp"
#include "pbdw/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace pbdw {

namespace {

namespace fs = std::filesystem;

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed_override;

  ExperimentConfig load() const {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{}
                                               : parse_config_file(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed_override.has_value()) {
      cfg.sensor_seed = *seed_override;
      cfg.model_seed = *seed_override;
      cfg.dataset_seed = *seed_override;
      cfg.seeds = {*seed_override};
    }
    cfg.validate();
    return cfg;
  }
};

void add_global_flags(CLI::App* app, GlobalArgs& args) {
  app->add_option("--config", args.config_path, "configuration file (key=value sections)");
  app->add_option("--out", args.out_dir, "output directory (overrides [output] directory)");
  app->add_option("--seed", args.seed_override, "override every configured seed");
}

void cmd_mesh(const GlobalArgs& args, int nx, int ny) {
  const ExperimentConfig cfg = args.load();
  const Mesh mesh = build_mesh(nx > 0 ? nx : cfg.nx, ny > 0 ? ny : cfg.ny);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_field(dir / "mesh.txt", mesh, zero_field(mesh));
  std::cout << "mesh: " << mesh.nx << "x" << mesh.ny << " nodes, "
            << mesh.elements.size() << " triangles, " << mesh.boundary_nodes.size()
            << " boundary nodes -> " << (dir / "mesh.txt").string() << "\n";
}

void cmd_snapshots(const GlobalArgs& args) {
  const ExperimentConfig cfg = args.load();
  const Mesh mesh = build_mesh(cfg.nx, cfg.ny);
  const SnapshotSet set =
      generate_snapshots(mesh, cfg.training_grid(), cfg.bk_config(), cfg.threads);
  const fs::path dir = fs::path(cfg.output_dir) / "snapshots";
  fs::create_directories(dir);
  CsvWriter manifest(dir / "manifest.csv", cfg.hash(), {"index", "mu", "file"});
  for (std::size_t k = 0; k < set.snapshots.size(); ++k) {
    const std::string name = "snapshot_" + std::to_string(k) + ".txt";
    write_field(dir / name, mesh, set.snapshots[k]);
    manifest.row({csv_cell(static_cast<int>(k)), csv_cell(set.parameters[k]), name});
  }
  std::cout << "snapshots: " << set.snapshots.size() << " solves -> " << dir.string()
            << "\n";
}

void cmd_pod(const GlobalArgs& args) {
  const ExperimentConfig cfg = args.load();
  const Mesh mesh = build_mesh(cfg.nx, cfg.ny);
  const InnerProduct h1 = assemble_inner_product(mesh, InnerProductKind::H1);
  const SnapshotSet set =
      generate_snapshots(mesh, cfg.training_grid(), cfg.bk_config(), cfg.threads);
  const int n_max = std::min<int>(
      cfg.train_count,
      std::max(cfg.n_eval, *std::max_element(cfg.n_list.begin(), cfg.n_list.end())));
  std::vector<std::string> warnings;
  const BackgroundBasis basis = pod(set, h1, n_max, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  save_basis(dir / "basis.txt", basis, InnerProductKind::H1);
  CsvWriter spectrum(dir / "spectrum.csv", cfg.hash(),
                     {"index", "singular_value", "energy_residual"});
  for (Eigen::Index j = 0; j < basis.spectrum.size(); ++j) {
    spectrum.row({csv_cell(static_cast<int>(j + 1)), csv_cell(basis.spectrum[j]),
                  csv_cell(manifold_energy_residual(basis, static_cast<int>(j + 1)))});
  }
  std::cout << "pod: " << basis.size() << " modes retained; energy residual at N=2: "
            << manifold_energy_residual(basis, 2) << " -> " << (dir / "basis.txt").string()
            << "\n";
}

void cmd_sensors_place(const GlobalArgs& args) {
  ExperimentConfig cfg = args.load();
  cfg.strategy = SensorStrategy::SGreedy;
  const Workspace ws = make_workspace(cfg);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_sensor_csv(dir / "sensors.csv", ws.sensors.sensors, cfg.hash());
  CsvWriter betas(dir / "betas.csv", cfg.hash(), {"M", "N", "beta"});
  for (std::size_t i = 0; i < ws.placement->betas.size(); ++i) {
    betas.row({csv_cell(static_cast<int>(i + 1)), csv_cell(ws.placement->step_n[i]),
               csv_cell(ws.placement->betas[i])});
  }
  std::cout << "sensors place: " << ws.sensors.size() << " sensors, final beta "
            << ws.placement->betas.back() << " -> " << (dir / "sensors.csv").string()
            << "\n";
}

void cmd_sensors_random(const GlobalArgs& args, int m) {
  const ExperimentConfig cfg = args.load();
  const int count = m > 0 ? m : cfg.primary_sensor_count();
  const auto sensors = random_placement(count, cfg.width, -1.0, cfg.sensor_seed);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_sensor_csv(dir / "sensors.csv", sensors, cfg.hash());
  std::cout << "sensors random: " << count << " sensors -> "
            << (dir / "sensors.csv").string() << "\n";
}

void cmd_assimilate(const GlobalArgs& args) {
  const ExperimentConfig cfg = args.load();
  const Workspace ws = make_workspace(cfg);
  const BackgroundBasis basis = ws.basis_at(cfg.n_eval);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  CsvWriter csv(dir / "results.csv", cfg.hash(),
                {"N", "M", "xi", "delta", "seed", "e_exact", "e_estim", "eta_norm",
                 "e_svd", "beta", "orth_residual"});
  const double beta = inf_sup(basis.B, ws.sensors.A).beta;
  bool first = true;
  for (double delta : cfg.delta_list) {
    for (std::uint64_t seed : cfg.seeds) {
      const Measurement meas = observe(ws.sensors, ws.u_true, delta, seed);
      double xi = 0.0;
      if (cfg.xi_mode == XiMode::Fixed) xi = cfg.xi_fixed;
      if (cfg.xi_mode == XiMode::Gcv) {
        xi = gcv_select(ws.sensors.A, basis.B, meas.y, cfg.effective_gcv_grid());
      }
      const PbdwSolution solution = solve_pbdw(basis, ws.sensors, meas, xi);
      const Metrics metrics =
          compute_metrics(solution, ws.u_true, basis, *ws.h1, *ws.l2);
      csv.row({csv_cell(basis.size()), csv_cell(ws.sensors.size()), csv_cell(xi),
               csv_cell(delta), csv_cell(seed), csv_cell(metrics.e_exact),
               csv_cell(metrics.e_estim), csv_cell(metrics.eta_norm),
               csv_cell(metrics.e_svd), csv_cell(beta),
               csv_cell(solution.coefficients.orthogonality_residual)});
      if (first) {
        write_field(dir / "reconstructed.txt", ws.mesh, solution.reconstructed);
        write_measurement_csv(dir / "measurement.csv", meas, cfg.hash());
        first = false;
      }
    }
  }
  std::cout << "assimilate: " << cfg.delta_list.size() * cfg.seeds.size()
            << " solves -> " << (dir / "results.csv").string() << "\n";
}

void cmd_dataset(const GlobalArgs& args) {
  const ExperimentConfig cfg = args.load();
  const Workspace ws = make_workspace(cfg);
  const ModelMode mode =
      cfg.model_mode == ModelMode::None ? ModelMode::Strong : cfg.model_mode;
  const BackgroundBasis basis = ws.basis_at(cfg.n_eval);
  const TrainingSet dataset = generate_training_set(
      ws.mesh, cfg.truth_config(), ForcingFamily{}, ws.sensors, basis,
      cfg.effective_pairs(mode), cfg.dataset_seed);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  save_training_set(dir / "dataset.txt", dataset);
  std::cout << "dataset: " << dataset.pair_count() << " pairs -> "
            << (dir / "dataset.txt").string() << "\n";
}

void cmd_train(const GlobalArgs& args, const std::string& mode_flag) {
  ExperimentConfig cfg = args.load();
  if (!mode_flag.empty()) {
    if (mode_flag == "weak") cfg.model_mode = ModelMode::Weak;
    else if (mode_flag == "strong") cfg.model_mode = ModelMode::Strong;
    else throw ConfigError("train: --mode expects weak|strong");
  }
  if (cfg.model_mode == ModelMode::None) {
    throw ConfigError("train: model.mode is none; pass --mode weak|strong");
  }
  const Workspace ws = make_workspace(cfg);
  const OperatorModel model = train_model(ws, cfg.model_mode, cfg.output_dir);
  std::cout << "train: " << (cfg.model_mode == ModelMode::Weak ? "weak" : "strong")
            << " model, final train loss " << model.history.back().train_loss
            << " -> " << model_checkpoint_path(cfg.output_dir, cfg.model_mode).string()
            << "\n";
}

void cmd_study(const GlobalArgs& args, const std::string& which) {
  const ExperimentConfig cfg = args.load();
  const Workspace ws = make_workspace(cfg);
  const fs::path dir(cfg.output_dir);
  if (which == "modes") run_mode_sweep(ws, dir);
  else if (which == "bias") run_bias_study(ws, dir);
  else if (which == "noise") run_noise_sweep(ws, dir);
  else if (which == "sensors") run_sensor_study(ws, dir);
  else if (which == "cost") run_cost_report(ws, dir);
  else throw ConfigError("study: unknown study '" + which + "'");
  std::cout << "study " << which << ": written to " << dir.string() << "\n";
}

void cmd_report(const GlobalArgs& args) {
  const ExperimentConfig cfg = args.load();
  const fs::path dir(cfg.output_dir);
  std::cout << "run artifacts in " << dir.string() << ":\n";
  if (!fs::exists(dir)) {
    throw ConfigError("report: output directory " + dir.string() + " does not exist");
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::cout << "  " << entry.path().filename().string() << " (" << entry.file_size()
              << " bytes)\n";
  }
  std::cout << "config hash " << hex_hash(cfg.hash()) << "\n";
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Reduced-order state estimation with measurement-driven updates"};
  app.require_subcommand(1);

  GlobalArgs args;
  int mesh_nx = 0, mesh_ny = 0;
  int random_m = 0;
  std::string train_mode;
  std::string study_name;

  auto* mesh_cmd = app.add_subcommand("mesh", "build and dump the structured mesh");
  add_global_flags(mesh_cmd, args);
  mesh_cmd->add_option("--nx", mesh_nx, "nodes along x1");
  mesh_cmd->add_option("--ny", mesh_ny, "nodes along x2");

  auto* snapshots_cmd =
      app.add_subcommand("snapshots", "solve the best-knowledge model over the grid");
  add_global_flags(snapshots_cmd, args);

  auto* pod_cmd = app.add_subcommand("pod", "compress the snapshot set into a basis");
  add_global_flags(pod_cmd, args);

  auto* sensors_cmd = app.add_subcommand("sensors", "sensor placement");
  sensors_cmd->require_subcommand(1);
  auto* place_cmd =
      sensors_cmd->add_subcommand("place", "greedy stability-maximizing placement");
  add_global_flags(place_cmd, args);
  auto* random_cmd = sensors_cmd->add_subcommand("random", "uniform random placement");
  add_global_flags(random_cmd, args);
  random_cmd->add_option("--m", random_m, "sensor count");

  auto* assimilate_cmd =
      app.add_subcommand("assimilate", "reconstruct the state from observations");
  add_global_flags(assimilate_cmd, args);

  auto* dataset_cmd =
      app.add_subcommand("dataset", "generate operator training pairs");
  add_global_flags(dataset_cmd, args);

  auto* train_cmd = app.add_subcommand("train", "train the update operator");
  add_global_flags(train_cmd, args);
  train_cmd->add_option("--mode", train_mode, "weak|strong (overrides config)");

  auto* study_cmd = app.add_subcommand("study", "run a full experiment");
  add_global_flags(study_cmd, args);
  study_cmd->add_option("name", study_name, "modes|bias|noise|sensors|cost")
      ->required();

  auto* report_cmd = app.add_subcommand("report", "summarize an output directory");
  add_global_flags(report_cmd, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (mesh_cmd->parsed()) cmd_mesh(args, mesh_nx, mesh_ny);
    else if (snapshots_cmd->parsed()) cmd_snapshots(args);
    else if (pod_cmd->parsed()) cmd_pod(args);
    else if (sensors_cmd->parsed() && place_cmd->parsed()) cmd_sensors_place(args);
    else if (sensors_cmd->parsed() && random_cmd->parsed()) cmd_sensors_random(args, random_m);
    else if (assimilate_cmd->parsed()) cmd_assimilate(args);
    else if (dataset_cmd->parsed()) cmd_dataset(args);
    else if (train_cmd->parsed()) cmd_train(args, train_mode);
    else if (study_cmd->parsed()) cmd_study(args, study_name);
    else if (report_cmd->parsed()) cmd_report(args);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace pbdw
