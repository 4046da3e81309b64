// chaosrom: data generation, training, forecasting and evaluation driver.
//
// Exit codes: 0 success, 1 usage or IO error, 2 numerical divergence.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chaosrom/chaosrom.hpp"

namespace {

using namespace chaosrom;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDivergence = 2;

double days_to_units(double days) { return days * kUnitsPerDay; }
double hours_to_units(double hours) { return hours / 24.0 * kUnitsPerDay; }

// Flags shared by gen-data and evaluate: where the reference solution is sampled.
struct ProtocolFlags {
  int n_points = 1000;
  int rollout = 1;
  double days_gap = 30.0;
  double spacing_hours = 6.0;
  double ref_tol = 1e-6;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--n-points", n_points, "Total snapshots N");
    cmd->add_option("--rollout", rollout, "Rollout length K (N must be divisible by K+1)");
    cmd->add_option("--days-gap", days_gap, "Days between trajectory starts");
    cmd->add_option("--spacing-hours", spacing_hours, "Hours between snapshots");
    cmd->add_option("--ref-tol", ref_tol, "Reference solver tolerance (abs and rel)");
    cmd->add_option("--seed", seed, "Random seed");
  }

  DatasetConfig dataset() const {
    DatasetConfig cfg;
    cfg.n_points = n_points;
    cfg.rollout = rollout;
    cfg.trajectory_gap = days_to_units(days_gap);
    cfg.spacing = hours_to_units(spacing_hours);
    cfg.seed = seed;
    return cfg;
  }

  SolverConfig solver() const {
    SolverConfig cfg = reference_solver_config();
    cfg.abs_tol = cfg.rel_tol = ref_tol;
    cfg.validate();
    return cfg;
  }
};

struct GenDataFlags {
  ProtocolFlags protocol;
  std::string out;
};

struct TrainFlags {
  std::string method;
  std::string data;
  long r = 28;
  long hidden = 2000;
  int epochs = 1000;
  double lambda = kLargestLyapunovExponent;
  double omega = 100.0;
  double upsilon = 1.0;
  int rollout_substeps = 5;
  double base_lr = 1e-4;
  double max_lr = 1e-2;
  int cycle_len = 100;
  std::uint64_t seed = 0;
  std::string out;
  std::string loss_log;
};

struct ForecastFlags {
  std::string model;
  std::string kind;
  std::string data;
  std::string init;
  double days = 60.0;
  double ref_tol = 1e-6;
  std::string out;
};

struct EvaluateFlags {
  ProtocolFlags protocol;
  std::vector<std::string> models;
  int days = 10;
  int samples = 10000;
  std::string out;
};

// Flat `key = value` file with `#` comments; keys are long flag names.
std::vector<std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  std::vector<std::string> args;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    line = line.substr(0, line.find('#'));
    const auto eq = line.find('=');
    std::istringstream key_stream(line.substr(0, eq));
    std::string key, extra;
    if (!(key_stream >> key)) continue;
    if (eq == std::string::npos || (key_stream >> extra)) {
      throw ParseError("expected `key = value` in " + path, line_no);
    }
    args.push_back("--" + key);
    std::istringstream values(line.substr(eq + 1));
    bool any = false;
    for (std::string v; values >> v; any = true) args.push_back(v);
    if (!any) throw ParseError("missing value for `" + key + "` in " + path, line_no);
  }
  return args;
}

std::string flag_name(const std::string& token) { return token.substr(0, token.find('=')); }

// Splices config-file arguments in front of the command line ones; a flag
// given on the command line drops every file entry for the same flag.
std::vector<std::string> merge_config(const std::vector<std::string>& argv) {
  if (argv.size() < 2) return argv;
  std::string config;
  std::set<std::string> given;
  for (std::size_t i = 2; i < argv.size(); ++i) {
    if (argv[i].rfind("--", 0) != 0) continue;
    given.insert(flag_name(argv[i]));
    if (argv[i] == "--config" && i + 1 < argv.size()) config = argv[i + 1];
    if (argv[i].rfind("--config=", 0) == 0) config = argv[i].substr(9);
  }
  if (config.empty()) return argv;

  std::vector<std::string> merged(argv.begin(), argv.begin() + 2);
  const auto file_args = read_config(config);
  bool keep = false;
  for (const auto& token : file_args) {
    if (token.rfind("--", 0) == 0) keep = !given.count(token);
    if (keep) merged.push_back(token);
  }
  merged.insert(merged.end(), argv.begin() + 2, argv.end());
  return merged;
}

// ---------------------------------------------------------------------------

int run_gen_data(const GenDataFlags& f) {
  const DatasetConfig cfg = f.protocol.dataset();
  cfg.validate();
  const auto trajectories = generate_dataset(cfg, f.protocol.solver());
  save_trajectories(f.out, trajectories);
  std::cout << "trajectories " << trajectories.size() << '\n'
            << "points " << trajectories.size() * static_cast<std::size_t>(cfg.points_per_trajectory())
            << '\n';
  return kExitOk;
}

double uniform_spacing(const std::vector<Trajectory>& data) {
  const double dt = data.front().times.at(1) - data.front().times.at(0);
  for (const auto& traj : data) {
    for (std::size_t k = 1; k < traj.size(); ++k) {
      if (std::abs(traj.times[k] - traj.times[k - 1] - dt) > 1e-9 * std::max(1.0, dt)) {
        throw ConfigError("snapshots must be evenly spaced");
      }
    }
  }
  return dt;
}

int run_train(const TrainFlags& f) {
  const auto data = load_trajectories(f.data);
  if (data.empty()) throw ConfigError("no trajectories in " + f.data);
  for (const auto& traj : data) {
    if (traj.size() < 2) throw ConfigError("every trajectory needs at least two snapshots");
  }
  if (f.r < 1) throw ConfigError("--r must be >= 1");

  if (f.method == "dmd") {
    save_model(f.out, fit_dmd(snapshot_pairs(data), f.r, uniform_spacing(data)));
  } else if (f.method == "quad") {
    save_model(f.out, fit_quadratic_rom(data, f.r));
  } else {
    NeuralHyper hyper;
    hyper.r = f.r;
    hyper.hidden = f.hidden;
    hyper.constrained = f.method == "syco";
    hyper.lambda = f.lambda;
    hyper.omega = f.omega;
    hyper.upsilon = f.upsilon;
    TrainConfig cfg;
    cfg.epochs = f.epochs;
    cfg.rollout = static_cast<int>(data.front().size()) - 1;
    cfg.substeps_per_interval = f.rollout_substeps;
    cfg.schedule = {f.base_lr, f.max_lr, f.cycle_len};
    cfg.seed = f.seed;
    const auto result = train(data, cfg, hyper, [&](const EpochLog& e) {
      if (e.epoch == 1 || e.epoch % 50 == 0 || e.epoch == cfg.epochs) {
        std::cerr << "epoch " << e.epoch << " loss " << e.loss.total() << '\n';
      }
    });
    save_model(f.out, result.model);
    const std::string log_path = f.loss_log.empty() ? f.out + ".loss.csv" : f.loss_log;
    write_file_atomically(log_path, [&](std::ostream& os) {
      os << "epoch,lr,loss_total,loss_ae,loss_rinv,loss_full,loss_latent\n";
      for (const auto& e : result.log) {
        os << e.epoch << ',' << format_real(e.lr) << ',' << format_real(e.loss.total()) << ','
           << format_real(e.loss.autoencoder) << ',' << format_real(e.loss.right_inverse) << ','
           << format_real(e.loss.full_dynamics) << ',' << format_real(e.loss.latent_dynamics) << '\n';
      }
    });
  }
  std::cout << "wrote " << f.method << " model to " << f.out << '\n';
  return kExitOk;
}

Lorenz96Truth truth_model(double ref_tol) {
  Lorenz96Truth truth;
  truth.solver.abs_tol = truth.solver.rel_tol = ref_tol;
  truth.solver.validate();
  return truth;
}

StateVector initial_state(const ForecastFlags& f) {
  if (!f.data.empty()) {
    std::size_t pos = 0;
    long row = -1;
    try {
      row = std::stol(f.init, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != f.init.size() || row < 0) throw ConfigError("--init must be a row index when --data is given");
    long seen = 0;
    for (const auto& traj : load_trajectories(f.data)) {
      for (const auto& x : traj.states) {
        if (seen++ == row) return x;
      }
    }
    throw ConfigError("--init row " + f.init + " is past the end of " + f.data);
  }
  std::vector<double> values;
  std::stringstream ss(f.init);
  for (std::string field; std::getline(ss, field, ',');) {
    double v = 0;
    if (!parse_real(field, v)) throw ConfigError("bad number `" + field + "` in --init");
    values.push_back(v);
  }
  if (values.empty()) throw ConfigError("--init is empty");
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

int run_forecast(const ForecastFlags& f) {
  RomModel model = f.model == "truth" ? RomModel{truth_model(f.ref_tol)}
                    : f.kind.empty()    ? load_model(f.model)
                                        : load_model(f.model, f.kind);
  if (f.model == "truth" && !f.kind.empty() && f.kind != "truth") {
    throw KindMismatchError("expected a " + f.kind + " model, got truth");
  }
  const StateVector x0 = initial_state(f);
  ForecastPath path;
  write_file_atomically(f.out, [&](std::ostream& os) { path = flow_export(os, model, x0, f.days); });
  std::cout << "rows " << path.states.size();
  if (path.diverged_at) std::cout << " (diverged at day " << *path.diverged_at / kUnitsPerDay << ")";
  std::cout << '\n';
  return kExitOk;
}

int run_evaluate(const EvaluateFlags& f) {
  if (f.days < 1) throw ConfigError("--days must be >= 1");
  if (f.samples < 1) throw ConfigError("--samples must be >= 1");
  const Lorenz96Truth truth = truth_model(f.protocol.ref_tol);
  std::vector<NamedModel> models;
  for (const auto& entry : f.models) {
    const auto eq = entry.find('=');
    const std::string path = eq == std::string::npos ? entry : entry.substr(eq + 1);
    try {
      RomModel model = path == "truth" ? RomModel{truth} : load_model(path);
      models.push_back({eq == std::string::npos ? kind_name(model) : entry.substr(0, eq), std::move(model)});
    } catch (const Error& e) {
      std::cerr << "skipping " << entry << ": " << e.what() << '\n';
    }
  }
  if (models.empty()) throw ConfigError("no model could be loaded");

  std::vector<int> days;
  for (int d = 1; d <= f.days; ++d) days.push_back(d);
  const DatasetConfig cfg = f.protocol.dataset();
  const auto ensemble = generate_forecast_ensemble(f.samples, cfg, truth.solver);
  const auto reports = kl_experiment(ensemble, models, days, ForecastOptions{}, truth);
  write_file_atomically(f.out, [&](std::ostream& os) { write_kl_reports(os, reports); });
  for (const auto& r : reports) {
    if (!r.ok()) std::cerr << r.method << " day " << r.day << ": " << r.error << '\n';
  }
  std::cout << "evaluated " << models.size() << " model(s), " << reports.size() << " rows\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced order models of Lorenz '96: data, training, forecasts, evaluation"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_help_all_flag("--help-all", "Help for every command");

  std::string config;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "Flat `key = value` file; flags given here override it");
  };

  GenDataFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Sample training trajectories from the reference solution");
  add_config(gen_cmd);
  gen.protocol.attach(gen_cmd);
  gen_cmd->add_option("--out", gen.out, "Output trajectory CSV")->required();

  TrainFlags tr;
  auto* train_cmd = app.add_subcommand("train", "Fit a reduced order model to trajectory data");
  add_config(train_cmd);
  train_cmd->add_option("--method", tr.method, "Model kind")
      ->required()
      ->check(CLI::IsMember({"dmd", "quad", "ae", "syco"}));
  train_cmd->add_option("--data", tr.data, "Trajectory CSV from gen-data")->required();
  train_cmd->add_option("--r", tr.r, "Latent dimension");
  train_cmd->add_option("--hidden", tr.hidden, "Hidden width H of every network");
  train_cmd->add_option("--epochs", tr.epochs, "Training epochs");
  train_cmd->add_option("--lambda", tr.lambda, "Exponential rollout weight");
  train_cmd->add_option("--omega", tr.omega, "Right-inverse weight");
  train_cmd->add_option("--upsilon", tr.upsilon, "Latent dynamics weight");
  train_cmd->add_option("--rollout-substeps", tr.rollout_substeps, "Integrator steps per snapshot interval");
  train_cmd->add_option("--base-lr", tr.base_lr, "Cyclic schedule lower learning rate");
  train_cmd->add_option("--max-lr", tr.max_lr, "Cyclic schedule upper learning rate");
  train_cmd->add_option("--cycle-len", tr.cycle_len, "Epochs from base to max learning rate");
  train_cmd->add_option("--seed", tr.seed, "Initialization seed");
  train_cmd->add_option("--out", tr.out, "Output model file")->required();
  train_cmd->add_option("--loss-log", tr.loss_log, "Per-epoch loss CSV (default <out>.loss.csv)");

  ForecastFlags fc;
  auto* forecast_cmd = app.add_subcommand("forecast", "Forecast on the six-hour grid from one initial state");
  add_config(forecast_cmd);
  forecast_cmd->add_option("--model", fc.model, "Model file, or `truth`")->required();
  forecast_cmd->add_option("--kind", fc.kind, "Expected model kind");
  forecast_cmd->add_option("--data", fc.data, "Trajectory CSV that --init indexes into");
  forecast_cmd->add_option("--init", fc.init, "Row index into --data, or comma-separated state")->required();
  forecast_cmd->add_option("--days", fc.days, "Forecast horizon in days");
  forecast_cmd->add_option("--ref-tol", fc.ref_tol, "Reference solver tolerance for `truth`");
  forecast_cmd->add_option("--out", fc.out, "Output CSV")->required();

  EvaluateFlags ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "KL divergence of forecast ensembles from the truth");
  add_config(evaluate_cmd);
  evaluate_cmd->add_option("--models", ev.models, "Entries `name=path`, `path`, or `truth`")->required();
  evaluate_cmd->add_option("--days", ev.days, "Evaluate days 1..D");
  evaluate_cmd->add_option("--samples", ev.samples, "Ensemble size M");
  ev.protocol.attach(evaluate_cmd);
  evaluate_cmd->add_option("--out", ev.out, "Output KL CSV")->required();

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = merge_config(args);
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(tr);
    if (*forecast_cmd) return run_forecast(fc);
    return run_evaluate(ev);
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
