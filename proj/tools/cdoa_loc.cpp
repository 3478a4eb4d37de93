// cdoa-loc: simulation, dataset replay, particle ablation, coverage queries
// and report regeneration.

#include "cdoa/config.hpp"
#include "cdoa/coverage.hpp"
#include "cdoa/dataset.hpp"
#include "cdoa/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// A --set key that is not in the schema is a usage error, not a runtime one.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonFlags {
  std::string preset = "default";
  std::string config;
  std::vector<std::string> methods;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<double> noise;
  std::optional<int> particles;
  std::string out = "out";
  int jobs = 1;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, CommonFlags& f, bool experiment_flags) {
  app->add_option("--preset", f.preset, "Built-in base config")
      ->check(CLI::IsMember({"default", "hardware"}))
      ->capture_default_str();
  app->add_option("--config", f.config, "JSON experiment config");
  app->add_option("--method", f.methods, "Method name or 'all' (repeatable, comma-separated)")
      ->delimiter(',');
  app->add_option("--seed", f.seed, "Base seed (falls back to CDOA_LOC_SEED)");
  if (experiment_flags) {
    app->add_option("--trials", f.trials, "Trials per trajectory and noise level")
        ->check(CLI::PositiveNumber);
    app->add_option("--noise-dbm", f.noise, "Single RSSI noise std in dBm")
        ->check(CLI::NonNegativeNumber);
  }
  app->add_option("--particles", f.particles, "CDOA-PF particle count")->check(CLI::PositiveNumber);
  app->add_option("--out", f.out, "Output directory")->capture_default_str();
  app->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--set", f.sets, "Override a config key, e.g. hyperparams.window=20");
}

// Built-in preset, then the config file, then flags.
cdoa::ExperimentConfig effective_config(const CommonFlags& f) {
  const auto preset = cdoa::preset_config(f.preset);
  json j = cdoa::to_json(preset);
  bool file_has_seed = false;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw std::runtime_error("cannot open config file '" + f.config + "': file not found or unreadable");
    json user;
    try {
      in >> user;
    } catch (const json::exception& e) {
      throw std::runtime_error("config '" + f.config + "' is not valid JSON: " + e.what());
    }
    file_has_seed = user.is_object() && user.contains("seed");
    j = cdoa::to_json(cdoa::config_from_json(user, preset));
  }
  if (!f.seed && !file_has_seed) {
    if (const char* env = std::getenv("CDOA_LOC_SEED")) {
      try {
        j["seed"] = std::stoull(env);
      } catch (const std::exception&) {
        throw std::runtime_error(std::string("CDOA_LOC_SEED is not an integer: '") + env + "'");
      }
    }
  }
  try {
    cdoa::apply_overrides(j, f.sets);
  } catch (const cdoa::InvalidArgument& e) {
    throw UsageError(e.what());
  }
  if (!f.methods.empty()) j["method"] = f.methods;
  if (f.seed) j["seed"] = *f.seed;
  if (f.trials) j["trials"] = *f.trials;
  if (f.noise) {
    j["channel"]["noise_std"] = *f.noise;
    j["channel"]["noise_levels"] = json::array({*f.noise});
  }
  if (f.particles) j["hyperparams"]["particles"] = *f.particles;
  return cdoa::config_from_json(j);
}

void announce(const cdoa::ExperimentConfig& cfg, const fs::path& out) {
  std::cout << "precedence: flags > config file > built-in defaults (seed falls back to "
               "CDOA_LOC_SEED when neither flag nor file sets it)\n";
  const std::string text = cdoa::to_json(cfg).dump(2);
  std::cout << "effective config:\n" << text << '\n';
  fs::create_directories(out);
  std::ofstream(out / "effective_config.json") << text << '\n';
}

// `layout` is known for simulate and dataset runs; it adds boundary.csv.
void write_reports(const std::vector<cdoa::TrialResult>& results, const fs::path& out,
                   const std::optional<cdoa::NodeLayout>& layout) {
  if (layout) {
    std::ofstream csv(out / "results.csv");
    cdoa::write_results_csv(csv, results);
    std::ofstream bc(out / "boundary.csv");
    cdoa::write_boundary_csv(bc, cdoa::boundary_breakdown(results, *layout));
  }
  const auto rows = cdoa::compute_metrics(results);
  const std::string md = cdoa::summary_markdown(rows);
  std::ofstream(out / "summary.md") << md;
  std::ofstream sc(out / "summary.csv");
  cdoa::write_summary_csv(sc, rows);
  std::cout << md;
}

int run_simulate(const CommonFlags& f, const std::string& export_path) {
  const auto cfg = effective_config(f);
  const fs::path out(f.out);
  announce(cfg, out);
  const auto results = cdoa::run_experiment(cfg, f.jobs);
  write_reports(results, out, cfg.layout());
  if (!export_path.empty()) {
    // The stream of the first (trajectory, noise, trial) cell.
    const auto layout = cfg.layout();
    auto model = cfg.channel;
    model.noise_std = cfg.effective_noise_levels().front();
    const auto stream = cdoa::simulate_observations(layout, model, cfg.build_trajectories().front(),
                                                    cfg.hyper, cdoa::derive_seed(cfg.seed, 0, 0, 0));
    std::ofstream csv(export_path);
    if (!csv) throw std::runtime_error("cannot write '" + export_path + "'");
    cdoa::export_dataset(csv, layout, cdoa::to_dataset(stream));
    std::cout << "dataset written to " << export_path << '\n';
  }
  return 0;
}

int run_dataset_cmd(const CommonFlags& f, const std::string& data) {
  const auto cfg = effective_config(f);
  const fs::path out(f.out);
  announce(cfg, out);
  const auto layout = cfg.layout();
  const auto ingest = cdoa::ingest_dataset(data, layout);
  std::ofstream diag(out / "diagnostics.txt");
  for (const auto& d : ingest.diagnostics) {
    std::cerr << "diagnostic: " << d << '\n';
    diag << d << '\n';
  }
  std::cout << "rows: " << ingest.total_rows << " total, " << ingest.used_rows << " used, "
            << ingest.diagnosed_rows << " diagnosed; " << ingest.snapshots.size() << " snapshots\n";
  if (ingest.snapshots.empty()) throw std::runtime_error("dataset has no complete snapshot");
  std::vector<cdoa::TrialResult> results;
  for (const auto& m : cdoa::MethodRegistry::instance().resolve(cfg.methods)) {
    cdoa::MethodContext ctx{layout, cfg.channel, cfg.workspace, cfg.hyper, cdoa::derive_seed(cfg.seed, 0x9f)};
    auto r = cdoa::run_dataset(m, ctx, ingest.snapshots);
    r.seed = cfg.seed;
    r.noise_dbm = cfg.channel.noise_std;
    results.push_back(std::move(r));
  }
  write_reports(results, out, layout);
  return 0;
}

int run_ablate(const CommonFlags& f, const std::vector<int>& counts) {
  const auto cfg = effective_config(f);
  const fs::path out(f.out);
  announce(cfg, out);
  const auto points = cdoa::ablate_particles(cfg, counts, f.jobs);
  std::ofstream csv(out / "ablation.csv");
  cdoa::write_ablation_csv(csv, points);
  cdoa::write_ablation_csv(std::cout, points);
  return 0;
}

int run_coverage(double range, std::optional<double> ratio, long long units) {
  std::printf("square coverage: %.1f m², min nodes for %lld unit%s: %lld\n",
              cdoa::square_coverage_area(range), units, units == 1 ? "" : "s",
              cdoa::nodes_required(units));
  if (ratio) std::printf("rectangle coverage (k=%g): %.4f m²\n", *ratio, cdoa::rect_coverage_area(range, *ratio));
  return 0;
}

int run_report(const std::string& results_path, const std::string& out_dir) {
  std::ifstream in(results_path);
  if (!in) throw std::runtime_error("cannot open results file '" + results_path + "'");
  const auto results = cdoa::read_results_csv(in);
  if (results.empty()) throw std::runtime_error("results file '" + results_path + "' has no rows");
  const fs::path out(out_dir);
  fs::create_directories(out);
  write_reports(results, out, std::nullopt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CDOA localization simulator and evaluation harness", "cdoa-loc"};
  app.require_subcommand(1);

  CommonFlags sim_flags, data_flags, ablate_flags;
  std::string export_path, data_path, results_path, report_out = "out";
  std::vector<int> counts{50, 100, 200, 500};
  double range = 0.0;
  std::optional<double> ratio;
  long long units = 1;

  auto* sim = app.add_subcommand("simulate", "Run the simulation study");
  add_common(sim, sim_flags, true);
  sim->add_option("--export-dataset", export_path, "Also write the first trial's snapshots as a CSV dataset");

  auto* data = app.add_subcommand("dataset", "Replay a CSV dataset through the localizers");
  add_common(data, data_flags, false);
  data->add_option("--data", data_path, "Dataset CSV (timestamp,node_id,rssi_dbm,gt_x,gt_y)")->required();

  auto* abl = app.add_subcommand("ablate", "CDOA-PF particle-count ablation, odometry on and off");
  add_common(abl, ablate_flags, true);
  abl->add_option("--counts", counts, "Ascending particle counts")->delimiter(',')->capture_default_str();

  auto* cov = app.add_subcommand("coverage", "Coverage and node-count formulas");
  cov->add_option("--range", range, "Sensing range r in meters")->required()->check(CLI::PositiveNumber);
  cov->add_option("--ratio", ratio, "Rectangle side ratio k")->check(CLI::PositiveNumber);
  cov->add_option("--units", units, "Replicated unit areas n")->check(CLI::PositiveNumber)->capture_default_str();

  auto* rep = app.add_subcommand("report", "Rebuild summary tables from a results CSV");
  rep->add_option("--results", results_path, "results.csv from a previous run")->required();
  rep->add_option("--out", report_out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*sim) return run_simulate(sim_flags, export_path);
    if (*data) return run_dataset_cmd(data_flags, data_path);
    if (*abl) return run_ablate(ablate_flags, counts);
    if (*cov) return run_coverage(range, ratio, units);
    if (*rep) return run_report(results_path, report_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
