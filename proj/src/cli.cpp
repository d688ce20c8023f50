#include "finn/cli.hpp"

#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "finn/apps.hpp"
#include "finn/checkpoint.hpp"
#include "finn/config.hpp"
#include "finn/errors.hpp"
#include "finn/verify.hpp"
#include "io.hpp"

namespace finn {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::string out_dir = "out";
  std::vector<double> epsilon;
  std::uint64_t seed = 0;
  int steps = 0;
  int count = 0;
  bool has_seed = false;
  bool has_steps = false;
  bool has_count = false;
};

// Resolved settings: defaults, then the config file, then flags. Every value
// read is echoed into run_config.json.
class Settings {
 public:
  Settings(std::string command, const Flags& flags) : out_dir_(flags.out_dir) {
    if (!flags.config.empty()) config_ = Config::load(flags.config);
    if (flags.has_seed) config_.set("seed", std::to_string(flags.seed));
    if (flags.has_steps) config_.set("steps", std::to_string(flags.steps));
    if (flags.has_count) config_.set("count", std::to_string(flags.count));
    if (!flags.epsilon.empty()) {
      std::string joined;
      for (double e : flags.epsilon) joined += (joined.empty() ? "" : ",") + io::shortest(e);
      config_.set("epsilon", joined);
    }
    echo_["command"] = std::move(command);
    echo_["out_dir"] = out_dir_;
    if (!flags.config.empty()) echo_["config_file"] = flags.config;
  }

  int integer(const std::string& key, int fallback) { return record(key, config_.get_int(key, fallback)); }
  double real(const std::string& key, double fallback) { return record(key, config_.get_double(key, fallback)); }
  std::string text(const std::string& key, const std::string& fallback) {
    return record(key, config_.get_string(key, fallback));
  }
  std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) {
    return record(key, config_.get_doubles(key, fallback));
  }
  std::vector<int> ints(const std::string& key, const std::vector<int>& fallback) {
    return record(key, config_.get_ints(key, fallback));
  }
  std::uint64_t seed(std::uint64_t fallback) {
    const auto v = config_.has("seed") ? std::stoull(config_.get_string("seed", "")) : fallback;
    echo_["seed"] = v;
    return v;
  }

  TrainConfig train(int steps, double lr, int batch, int log_every) {
    TrainConfig cfg;
    cfg.steps = integer("steps", steps);
    cfg.learning_rate = real("lr", lr);
    cfg.batch_size = integer("batch_size", batch);
    cfg.log_every = integer("log_every", log_every);
    cfg.probe_points = integer("probe_points", cfg.probe_points);
    const std::string opt = text("optimizer", "adam");
    if (opt == "adam")
      cfg.optimizer = OptimizerKind::adam;
    else if (opt == "sgd")
      cfg.optimizer = OptimizerKind::sgd;
    else
      throw std::invalid_argument("unknown optimizer: " + opt);
    cfg.seed = seed(1);
    cfg.validate();
    return cfg;
  }

  fs::path dir() const { return out_dir_; }
  void write_echo(const fs::path& dir) const {
    io::write_atomic((dir / "run_config.json").string(), echo_.dump(2) + "\n");
  }

 private:
  template <class T>
  T record(const std::string& key, T value) {
    echo_[key] = value;
    return value;
  }

  Config config_;
  std::string out_dir_;
  json echo_;
};

fs::path prepare(const fs::path& dir) {
  fs::create_directories(dir);
  return dir;
}

Box box_from(Settings& s, const Box& fallback) {
  const std::vector<double> lo =
      s.reals("lower", std::vector<double>(fallback.lower.data(), fallback.lower.data() + fallback.dim()));
  const std::vector<double> hi =
      s.reals("upper", std::vector<double>(fallback.upper.data(), fallback.upper.data() + fallback.dim()));
  if (lo.size() != hi.size()) throw std::invalid_argument("lower and upper bounds differ in length");
  return Box(Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size())),
             Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size())));
}

double single_epsilon(Settings& s, double fallback) {
  const std::vector<double> eps = s.reals("epsilon", {fallback});
  if (eps.size() != 1) throw std::invalid_argument("this command takes a single epsilon");
  return eps.front();
}

Eigen::Vector3d vec3(Settings& s, const std::string& key, const Eigen::Vector3d& fallback) {
  const std::vector<double> v = s.reals(key, {fallback[0], fallback[1], fallback[2]});
  if (v.size() != 3) throw std::invalid_argument(key + " needs three values");
  return {v[0], v[1], v[2]};
}

GmmSpec mixture_spec(Settings& s, const std::string& name) {
  if (name == "1d") {
    GmmSpec spec = GmmSpec::two_mode_1d();
    spec.box = box_from(s, spec.box);
    return spec.with_volume(1.0);
  }
  if (name == "2d") {
    GmmSpec spec = GmmSpec::two_mode_2d();
    spec.box = box_from(s, spec.box);
    return spec.with_volume(2.0);
  }
  throw std::invalid_argument("unknown mixture: " + name + " (expected 1d or 2d)");
}

Checkpoint make_checkpoint(const std::string& app, const TrainConfig& cfg, const std::vector<HistoryRow>& history) {
  Checkpoint c;
  c.app = app;
  c.seed = cfg.seed;
  c.steps = cfg.steps;
  c.final_loss = history.empty() ? 0.0 : history.back().loss;
  return c;
}

std::string eps_dir(double eps) { return "eps_" + io::shortest(eps); }

int run_fit_density(Settings& s, std::ostream& out) {
  const std::string mixture = s.text("mixture", "1d");
  const GmmSpec spec = mixture_spec(s, mixture);
  const bool one_d = spec.dim() == 1;
  const double eps = single_epsilon(s, 1.0);
  const std::vector<int> hidden = s.ints("architecture", one_d ? std::vector<int>{16} : std::vector<int>{32, 32});
  const int grid = s.integer("grid", one_d ? 201 : 41);
  const TrainConfig cfg = s.train(one_d ? 2000 : 3000, one_d ? 1e-2 : 3e-3, 128, 100);
  const Dataset data = Dataset::generator([&spec](const Eigen::VectorXd& x) { return spec.pdf(x); }, spec.box);
  const TrainResult r = fit_density(data, spec.box, hidden, eps, cfg);

  const fs::path dir = prepare(s.dir());
  s.write_echo(dir);
  write_history_csv((dir / "history.csv").string(), r.history);
  const auto rows = surface_grid(ModelEvaluator(r.model), spec, grid);
  write_surface_csv((dir / "surface.csv").string(), rows);
  Checkpoint c = make_checkpoint("fit-density", cfg, r.history);
  c.models.push_back({"density", r.model});
  checkpoint_save(c, (dir / "checkpoint.json").string());
  out << "fit-density: grid mse " << grid_mse(rows) << ", constraint residual " << constraint_residual(r.model)
      << ", outputs in " << dir.string() << "\n";
  return kExitOk;
}

int run_sample(Settings& s, const std::string& checkpoint_path, std::ostream& out) {
  const Checkpoint c = checkpoint_load(checkpoint_path);
  if (c.models.empty()) throw FormatError("checkpoint holds no models");
  const int count = s.integer("count", 1000);
  const std::uint64_t seed = s.seed(1);
  const auto points = sample_density(c.models.front().model, count, seed);
  const fs::path dir = prepare(s.dir());
  s.write_echo(dir);
  write_points_csv((dir / "samples.csv").string(), points);
  out << "sample: " << points.size() << " points written to " << (dir / "samples.csv").string() << "\n";
  return kExitOk;
}

int run_gmm_volume(Settings& s, std::ostream& out) {
  const GmmSpec spec = mixture_spec(s, "2d");
  const std::vector<double> eps_list = s.reals("epsilon", {1.0, 2.0, 3.0});
  GmmExperimentOptions opt;
  opt.hidden = s.ints("architecture", opt.hidden);
  opt.grid_points = s.integer("grid", opt.grid_points);
  const TrainConfig cfg = s.train(3000, 3e-3, 128, 100);
  const auto runs = gmm_volume_experiment(spec, eps_list, cfg, opt);

  const fs::path top = prepare(s.dir());
  s.write_echo(top);
  std::ostringstream summary;
  summary << "epsilon,grid_mse,constraint_residual,min_f\n";
  for (const GmmRun& r : runs) {
    const fs::path dir = runs.size() == 1 ? top : prepare(top / eps_dir(r.epsilon));
    write_history_csv((dir / "history.csv").string(), r.result.history);
    write_surface_csv((dir / "surface.csv").string(), r.surface);
    Checkpoint c = make_checkpoint("gmm-volume", cfg, r.result.history);
    c.models.push_back({"density", r.result.model});
    checkpoint_save(c, (dir / "checkpoint.json").string());
    summary << io::shortest(r.epsilon) << ',' << io::shortest(r.grid_mse) << ',' << io::shortest(r.residual) << ','
            << io::shortest(r.min_f) << '\n';
    out << "gmm-volume: epsilon " << r.epsilon << " grid mse " << r.grid_mse << " residual " << r.residual
        << " min f " << r.min_f << "\n";
  }
  io::write_atomic((top / "summary.csv").string(), summary.str());
  return kExitOk;
}

int run_metric(Settings& s, std::ostream& out) {
  MetricProblem p;
  p.domain = box_from(s, Box::cube(2, 0.0, 1.0));
  p.epsilon = single_epsilon(s, 0.5);
  p.hidden = s.ints("architecture", p.hidden);
  const std::vector<double> d = s.reals("direction", {0.6, 0.8});
  if (d.size() != 2) throw std::invalid_argument("direction needs two values");
  const Eigen::Vector2d nu(d[0], d[1]);
  p.phi = [](const Eigen::VectorXd& x) { return Eigen::Vector2d(std::sin(x[0]), std::cos(x.sum())).eval(); };
  p.nu = [nu](const Eigen::VectorXd&) { return Eigen::VectorXd(nu); };
  const Eigen::Vector2d unit = nu.norm() > 0.0 ? (nu / nu.norm()).eval() : nu;
  p.target = [phi = p.phi, unit](const Eigen::VectorXd& x) {
    return (phi(x) + (1.0 + 0.25 * std::sin(3.0 * x[0])) * unit).eval();
  };
  const int grid = s.integer("grid", 41);
  const TrainConfig cfg = s.train(1000, 1e-2, 64, 100);
  const MetricReport r = metric_bound(p, cfg);

  const fs::path dir = prepare(s.dir());
  s.write_echo(dir);
  write_history_csv((dir / "history.csv").string(), r.history);
  const ModelEvaluator eval(r.model.f);
  std::ostringstream csv;
  csv << "x,y,f,psi1,psi2\n";
  const int n = p.domain.dim();
  const int ny = n >= 2 ? grid : 1;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < ny; ++j) {
      Eigen::VectorXd x = 0.5 * (p.domain.lower + p.domain.upper);
      x[0] = p.domain.lower[0] + (p.domain.upper[0] - p.domain.lower[0]) * i / std::max(1, grid - 1);
      if (n >= 2) x[1] = p.domain.lower[1] + (p.domain.upper[1] - p.domain.lower[1]) * j / std::max(1, grid - 1);
      const Eigen::VectorXd psi = r.model.psi(eval, x);
      csv << io::shortest(x[0]) << ',' << io::shortest(n >= 2 ? x[1] : 0.0) << ',' << io::shortest(eval.f(x)) << ','
          << io::shortest(psi[0]) << ',' << io::shortest(psi[1]) << '\n';
    }
  io::write_atomic((dir / "psi.csv").string(), csv.str());
  const json report = {{"epsilon", p.epsilon},       {"integral_f", r.integral_f},
                       {"j_quadrature", r.j_quadrature}, {"j_std_error", r.j_std_error},
                       {"bound_holds", r.bound_holds},   {"max_pointwise_gap", r.max_pointwise_gap}};
  io::write_atomic((dir / "report.json").string(), report.dump(2) + "\n");
  Checkpoint c = make_checkpoint("metric", cfg, r.history);
  c.models.push_back({"f", r.model.f});
  checkpoint_save(c, (dir / "checkpoint.json").string());
  out << "metric: J " << r.j_quadrature << " <= " << p.epsilon << " (1 + 1e-3): " << (r.bound_holds ? "yes" : "no")
      << "\n";
  return kExitOk;
}

int run_trajectory(Settings& s, std::ostream& out) {
  TrajectoryProblem p;
  p.x0 = vec3(s, "x0", p.x0);
  p.xT = vec3(s, "xT", p.xT);
  p.t0 = s.real("t0", p.t0);
  p.T = s.real("T", p.T);
  p.hidden = s.ints("architecture", p.hidden);
  p.objective = trajectory_objective_from_string(s.text("objective", "energy"));
  p.grid = s.integer("grid", p.grid);
  const TrainConfig cfg = s.train(2000, 1e-2, 1, 100);
  const TrajectoryReport r = trajectory_fit(p, cfg);

  const fs::path dir = prepare(s.dir());
  s.write_echo(dir);
  write_history_csv((dir / "history.csv").string(), r.history);
  write_trajectory_csv((dir / "trajectory.csv").string(), r.trajectory, p, 201);
  Checkpoint c = make_checkpoint("trajectory", cfg, r.history);
  for (int i = 0; i < 3; ++i)
    c.models.push_back({"x" + std::to_string(i + 1), r.trajectory.axes()[static_cast<std::size_t>(i)]});
  checkpoint_save(c, (dir / "checkpoint.json").string());
  out << "trajectory: final " << to_string(p.objective) << " " << r.history.back().loss
      << ", max endpoint residual " << r.max_endpoint_residual << "\n";
  return kExitOk;
}

int run_soft_bellman(Settings& s, std::ostream& out) {
  SoftBellmanProblem p;
  p.beta = s.real("beta", p.beta);
  p.target_hidden = s.ints("architecture", p.target_hidden);
  p.conditioner_hidden = s.ints("conditioner", p.conditioner_hidden);
  p.eval_states = s.integer("eval_states", p.eval_states);
  p.q_grid = s.integer("q_grid", p.q_grid);
  const TrainConfig cfg = s.train(5000, 3e-3, 64, 100);
  const SoftBellmanReport r = soft_bellman_demo(p, cfg);

  const fs::path dir = prepare(s.dir());
  s.write_echo(dir);
  write_history_csv((dir / "history.csv").string(), r.history);
  write_values_csv((dir / "values.csv").string(), p.beta, r.values);
  Checkpoint c = make_checkpoint("soft-bellman", cfg, r.history);
  c.hypernetworks.push_back({"q", r.hypernet});
  checkpoint_save(c, (dir / "checkpoint.json").string());
  for (const ValueRow& v : r.values)
    out << "soft-bellman: s " << v.s << " V " << v.value << " quadrature " << v.value_quadrature << " max Q "
        << v.max_grid_q << "\n";
  return kExitOk;
}

int run_verify(bool full, std::ostream& out) {
  const auto ids = full ? verify::all_ids() : verify::quick_ids();
  bool all = true;
  for (int id : ids) {
    const verify::CheckResult r = verify::run_check(id);
    out << verify::format_result(r) << std::endl;
    all = all && r.passed;
  }
  return all ? kExitOk : kExitCheckFailed;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key = value settings file");
  cmd->add_option("--out-dir", f.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--steps", f.steps, "optimiser steps")->check(CLI::PositiveNumber);
  cmd->add_option("--epsilon", f.epsilon, "integral constraint value(s)");
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fixed-integral neural networks: experiments and checks", "finn"};
  app.require_subcommand(1, 1);
  Flags flags;
  std::string checkpoint;
  bool full = false;

  std::vector<std::pair<CLI::App*, std::string>> commands;
  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, flags);
    commands.emplace_back(cmd, name);
    return cmd;
  };
  add("fit-density", "fit a density model to a Gaussian mixture");
  CLI::App* sample = add("sample", "draw samples from a density checkpoint");
  sample->add_option("--checkpoint", checkpoint, "checkpoint.json from fit-density")->required();
  sample->add_option("--count", flags.count, "number of samples")->check(CLI::NonNegativeNumber);
  add("gmm-volume", "fit the two-mode mixture under several volume constraints");
  add("metric", "bounded-deviation model around a base function");
  add("trajectory", "endpoint-constrained trajectory");
  add("soft-bellman", "soft Bellman values on a one-step toy problem");
  add("verify", "run the verification checks")->add_flag("--full", full, "include the training experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }
  std::string name;
  for (const auto& [cmd, n] : commands)
    if (cmd->parsed()) {
      name = n;
      flags.has_seed = cmd->count("--seed") > 0;
      flags.has_steps = cmd->count("--steps") > 0;
      flags.has_count = n == "sample" && cmd->count("--count") > 0;
    }

  try {
    if (name == "verify") return run_verify(full, out);
    Settings s(name, flags);
    if (name == "fit-density") return run_fit_density(s, out);
    if (name == "sample") return run_sample(s, checkpoint, out);
    if (name == "gmm-volume") return run_gmm_volume(s, out);
    if (name == "metric") return run_metric(s, out);
    if (name == "trajectory") return run_trajectory(s, out);
    if (name == "soft-bellman") return run_soft_bellman(s, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  err << "error: no subcommand\n";
  return kExitUsage;
}

}  // namespace finn
