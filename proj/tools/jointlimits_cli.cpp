#include "jointlimits/constraint.hpp"
#include "jointlimits/dynamics.hpp"
#include "jointlimits/experiments.hpp"
#include "jointlimits/ik.hpp"
#include "jointlimits/kinematics.hpp"
#include "jointlimits/mlp.hpp"
#include "jointlimits/oracle.hpp"
#include "jointlimits/sampler.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace jointlimits;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kParse = 2, kStarved = 3, kSolver = 4, kDivergence = 5 };

constexpr int kConfigVersion = 1;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), e.byte > 0 ? e.byte - 1 : 0);
  }
}

/// Values in the config file replace the matching flags of `sub`.
void apply_config(CLI::App& sub, const std::string& path) {
  const json cfg = read_json(path);
  if (!cfg.is_object()) throw ParseError(path + ": config must be a JSON object", 0);
  if (cfg.value("version", kConfigVersion) != kConfigVersion) {
    throw UnsupportedVersion(path + ": unsupported config version");
  }
  for (const auto& [key, value] : cfg.items()) {
    if (key == "version" || key == "config") continue;
    CLI::Option* opt = nullptr;
    try {
      opt = sub.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw ParseError(path + ": unknown key '" + key + "' for '" + sub.get_name() + "'", 0);
    }
    opt->clear();
    const auto as_text = [](const json& v) {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
      return v.dump();
    };
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(as_text(v));
    } else {
      opt->add_result(as_text(value));
    }
    opt->run_callback();
  }
}

VecX to_vec(const std::vector<double>& v) { return Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size())); }

VecX per_dof(const std::vector<double>& v, int n, double fallback, const std::string& what) {
  if (v.empty()) return VecX::Constant(n, fallback);
  if (v.size() == 1) return VecX::Constant(n, v.front());
  if (static_cast<int>(v.size()) != n) {
    throw ContractViolation(what + " needs 1 or " + std::to_string(n) + " values, got " + std::to_string(v.size()));
  }
  return to_vec(v);
}

JointConfig config_from_degrees(const std::vector<double>& deg, int n) {
  if (deg.empty()) return JointConfig::Zero(n);
  if (static_cast<int>(deg.size()) != n) {
    throw ContractViolation("configuration needs " + std::to_string(n) + " values, got " + std::to_string(deg.size()));
  }
  JointConfig q(n);
  for (int i = 0; i < n; ++i) q[i] = deg2rad(deg[i]);
  return q;
}

json degrees(const VecX& q) {
  json out = json::array();
  for (Eigen::Index i = 0; i < q.size(); ++i) out.push_back(rad2deg(q[i]));
  return out;
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::string limb = "arm";
  int K = 25000;
  std::uint64_t seed = 7;
  int workers = 1;
  std::uint64_t max_draws = 100'000'000;
  std::string oracle;
  std::string out = "dataset.csv";
};

int cmd_gen_data(const GenDataArgs& a) {
  const LimbModel model = limb_model(a.limb);
  const ValidityModel vm = a.oracle.empty() ? default_validity(a.limb) : validity_model_from_json(read_json(a.oracle));
  GenerateOptions opt;
  opt.K = a.K;
  opt.seed = a.seed;
  opt.workers = a.workers;
  opt.max_draws = a.max_draws;
  GenerateStats stats;
  const Dataset d = generate(model, vm, opt, &stats);
  save_dataset(d, a.out);
  for (std::size_t b = 0; b < d.buffers.size(); ++b) {
    std::cout << "buffer D" << b << ": " << d.buffers[b].size() << "/" << d.K << " (raw hits "
              << stats.category_hits[b] << ")\n";
  }
  std::cout << "draws: " << stats.draws << "\n";
  std::cout << "raw valid fraction: " << stats.valid_fraction() << "\n";
  std::cout << "wrote " << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------- train / eval

struct TrainArgs {
  std::string data;
  std::string out = "weights.json";
  std::string curve = "curve.csv";
  std::string limits;
  int epochs = 30;
  int batch = 128;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  double test_fraction = 0.1;
  std::uint64_t split_seed = 1;
  int hidden = 128;
  int depth = 3;
};

int cmd_train(const TrainArgs& a) {
  const Dataset d = load_dataset(a.data);
  const auto [train_set, test_set] = split(d, a.test_fraction, a.split_seed);
  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.learning_rate = a.lr;
  cfg.seed = a.seed;
  cfg.hidden = a.hidden;
  cfg.depth = a.depth;
  const TrainResult r = train(train_set, cfg, &test_set);
  save_weights(r.params, a.out);

  auto curve = open_out(a.curve);
  curve.precision(17);
  curve << "epoch,train_loss,test_accuracy\n";
  for (const auto& e : r.curve) curve << e.epoch << ',' << e.train_loss << ',' << e.test_accuracy << '\n';

  if (!a.limits.empty()) {
    LimitSet ls;
    ls.net = r.params;
    ls.boxes = limb_model(d.limb).boxes();
    const fs::path bundle_dir = fs::absolute(a.limits).parent_path();
    save_limit_set(ls, a.limits, fs::relative(fs::absolute(a.out), bundle_dir).generic_string());
  }
  const auto& last = r.curve.back();
  std::cout << "epoch " << last.epoch << ": train loss " << last.train_loss << ", test accuracy "
            << last.test_accuracy << "\n";
  return kOk;
}

struct EvalArgs {
  std::string data;
  std::string weights;
  std::string out = "confusion.json";
  double test_fraction = 0.1;
  std::uint64_t split_seed = 1;
  bool all = false;
};

int cmd_eval(const EvalArgs& a) {
  const Dataset d = load_dataset(a.data);
  const MlpParams net = load_weights(a.weights);
  require(net.input_size() == 2 * d.n_dofs(), "network input size does not match the dataset");
  const Dataset test = a.all ? d : split(d, a.test_fraction, a.split_seed).second;
  const ConfusionMatrix cm = evaluate(net, test);
  json j = to_json(cm);
  j["limb"] = d.limb;
  j["samples"] = test.size();
  open_out(a.out) << j.dump(2) << "\n";
  std::cout << "accuracy " << cm.accuracy() << ", fp rate " << cm.false_positive_rate() << ", fn rate "
            << cm.false_negative_rate() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string limb = "arm";
  std::string limits;
  std::string mode = "random";
  double duration = 60.0;
  double dt = 1e-3;
  double baumgarte = 0.2;
  double activation = 0.02;
  std::vector<double> torque;
  std::vector<double> torque_limit;
  double resample = 0.1;
  std::vector<double> damping;
  std::vector<int> lock_dofs;
  std::vector<double> q0_deg;
  std::vector<double> gravity{0.0, 0.0, 0.0};
  bool no_constraints = false;
  bool no_boxes = false;
  std::uint64_t seed = 1;
  int record_every = 1;
  std::string traj;
  std::string hist;
  std::string summary;
};

int cmd_simulate(const SimulateArgs& a) {
  const LimbModel model = limb_model(a.limb);
  const LimitSet ls = load_limit_set(a.limits);
  require(ls.n_dofs() == model.n_dofs(), "limit set does not match the limb");
  const int n = model.n_dofs();
  const BodyParams bodies = default_bodies(model);

  SimConfig cfg;
  cfg.dt = a.dt;
  cfg.baumgarte = a.baumgarte;
  cfg.activation_tolerance = a.activation;
  cfg.learned_constraint = !a.no_constraints;
  cfg.box_constraints = !a.no_constraints && !a.no_boxes;
  require(a.gravity.size() == 3, "gravity needs 3 values");
  cfg.gravity = Vec3(a.gravity[0], a.gravity[1], a.gravity[2]);
  cfg.damping = per_dof(a.damping, n, 0.0, "damping");
  cfg.locked_dofs = a.lock_dofs;

  const JointConfig q0 = config_from_degrees(a.q0_deg, n);
  const bool keep = !a.traj.empty();
  RunSummary run;
  if (a.mode == "random") {
    RandomTorqueOptions opt;
    opt.duration = a.duration;
    opt.resample_period = a.resample;
    opt.torque_limit = per_dof(a.torque_limit, n, 1.0, "torque-limit");
    opt.seed = a.seed;
    opt.q0 = q0;
    opt.record_every = a.record_every;
    opt.keep_trajectory = keep;
    run = run_random_torque(ls, model, bodies, cfg, opt);
  } else if (a.mode == "constant") {
    ConstantTorqueOptions opt;
    opt.duration = a.duration;
    opt.torque = per_dof(a.torque, n, 0.0, "torque");
    opt.q0 = q0;
    opt.record_every = a.record_every;
    opt.keep_trajectory = true;
    run = run_constant_torque(ls, model, bodies, cfg, opt);
  } else {
    throw ContractViolation("unknown simulate mode '" + a.mode + "' (expected random or constant)");
  }

  if (keep) {
    auto out = open_out(a.traj);
    write_trajectory_csv(out, run.trajectory);
  }
  const Histogram h = make_histogram(run.c_values, -0.5, 0.5, 50);
  if (!a.hist.empty()) {
    auto out = open_out(a.hist);
    write_histogram_csv(out, h);
  }
  long below_zero = 0, below_tol = 0;
  double c_min = std::numeric_limits<double>::infinity();
  for (double c : run.c_values) {
    below_zero += c < 0.0;
    below_tol += c < -0.02;
    c_min = std::min(c_min, c);
  }
  const double states = static_cast<double>(run.c_values.size());
  json s = {{"states", run.c_values.size()},
            {"fraction_below_zero", states > 0 ? below_zero / states : 0.0},
            {"fraction_below_tolerance", states > 0 ? below_tol / states : 0.0},
            {"c_min", c_min},
            {"dropped_surface_rows", run.dropped_surface_rows}};
  if (!run.trajectory.records.empty()) {
    const auto& last = run.trajectory.records.back();
    s["final_q_deg"] = degrees(last.q);
    s["max_displacement_deg"] = [&] {
      VecX disp = VecX::Zero(n);
      for (const auto& r : run.trajectory.records) disp = disp.cwiseMax((r.q - q0).cwiseAbs());
      return degrees(disp);
    }();
  }
  if (!a.summary.empty()) open_out(a.summary) << s.dump(2) << "\n";
  std::cout << s.dump(2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- ik

struct IkArgs {
  std::string limb = "arm";
  std::string limits;
  std::string batch;
  int count = 200;
  std::uint64_t seed = 1;
  std::string penalty = "shifted";
  double weight = 0.2;
  double step = 0.1;
  double max_step = 0.1;
  int max_iterations = 500;
  double tolerance = 1e-6;
  int restarts = 0;
  bool cold_start = false;
  std::vector<double> q0_deg;
  std::vector<double> unreachable;
  std::string out = "ik.csv";
  std::string hist;
};

int cmd_ik(const IkArgs& a) {
  const LimbModel model = limb_model(a.limb);
  const LimitSet ls = load_limit_set(a.limits);
  require(ls.n_dofs() == model.n_dofs(), "limit set does not match the limb");

  IkProblem p;
  p.model = &model;
  p.ls = &ls;
  p.penalty = penalty_form_from_string(a.penalty);
  p.weight = a.weight;
  p.step_size = a.step;
  p.max_step = a.max_step;
  p.max_iterations = a.max_iterations;
  p.tolerance = a.tolerance;
  p.q0 = config_from_degrees(a.q0_deg, model.n_dofs());
  IkBatchOptions opt;
  opt.warm_start = !a.cold_start;
  opt.max_restarts = a.restarts;
  opt.seed = a.seed;

  std::vector<Vec3> targets;
  if (!a.batch.empty()) {
    const json spec = read_json(a.batch);
    if (spec.value("version", 1) != 1) throw UnsupportedVersion(a.batch + ": unsupported batch version");
    for (const auto& t : spec.at("targets")) targets.emplace_back(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
    if (spec.contains("q0_deg")) p.q0 = config_from_degrees(spec["q0_deg"].get<std::vector<double>>(), model.n_dofs());
    opt.seed = spec.value("seed", opt.seed);
    opt.max_restarts = spec.value("restarts", opt.max_restarts);
    opt.warm_start = spec.value("warm_start", opt.warm_start);
    if (spec.contains("penalty")) p.penalty = penalty_form_from_string(spec["penalty"].get<std::string>());
  } else {
    targets = sample_reachable_targets(model, ls, a.count, ls.ik_margin, a.seed);
  }
  if (!a.unreachable.empty()) {
    require(a.unreachable.size() == 3, "--unreachable needs 3 coordinates");
    targets.emplace_back(a.unreachable[0], a.unreachable[1], a.unreachable[2]);
  }

  const std::vector<IkResult> results = solve_batch(p, targets, opt);
  {
    auto out = open_out(a.out);
    write_ik_csv(out, model, targets, results);
  }
  std::vector<double> cs;
  int converged = 0, violating = 0;
  for (const auto& r : results) {
    cs.push_back(r.c);
    converged += r.converged;
    violating += r.c < 0.0;
  }
  if (!a.hist.empty()) {
    auto out = open_out(a.hist);
    write_histogram_csv(out, make_histogram(cs, -0.5, 0.5, 50));
  }
  std::cout << "targets " << results.size() << ", converged " << converged << ", C < 0: " << violating << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned pose-dependent joint limits: data, training, simulation and IK"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a category-balanced dataset");
  g->add_option("--limb", gen.limb)->check(CLI::IsMember({"arm", "leg"}));
  g->add_option("--K", gen.K, "samples per buffer");
  g->add_option("--seed", gen.seed);
  g->add_option("--workers", gen.workers);
  g->add_option("--max-draws", gen.max_draws);
  g->add_option("--oracle", gen.oracle, "validity model JSON (default: built-in)");
  g->add_option("--out", gen.out);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the constraint network");
  t->add_option("--data", tr.data)->required();
  t->add_option("--out", tr.out, "weights JSON");
  t->add_option("--curve", tr.curve, "learning-curve CSV");
  t->add_option("--limits", tr.limits, "also write a limit-set bundle");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch", tr.batch);
  t->add_option("--lr", tr.lr);
  t->add_option("--seed", tr.seed);
  t->add_option("--test-fraction", tr.test_fraction);
  t->add_option("--split-seed", tr.split_seed);
  t->add_option("--hidden", tr.hidden);
  t->add_option("--depth", tr.depth);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Confusion matrix on the held-out split");
  e->add_option("--data", ev.data)->required();
  e->add_option("--weights", ev.weights)->required();
  e->add_option("--out", ev.out);
  e->add_option("--test-fraction", ev.test_fraction);
  e->add_option("--split-seed", ev.split_seed);
  e->add_flag("--all", ev.all, "evaluate every sample instead of the held-out split");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Simulate one limb with the learned limits");
  s->add_option("--limb", sim.limb)->check(CLI::IsMember({"arm", "leg"}));
  s->add_option("--limits", sim.limits)->required();
  s->add_option("--mode", sim.mode, "random | constant");
  s->add_option("--duration", sim.duration);
  s->add_option("--dt", sim.dt);
  s->add_option("--baumgarte", sim.baumgarte);
  s->add_option("--activation", sim.activation);
  s->add_option("--torque", sim.torque, "constant torque per DOF (N m)");
  s->add_option("--torque-limit", sim.torque_limit, "random torque bound per DOF (N m)");
  s->add_option("--resample", sim.resample, "random torque period (s)");
  s->add_option("--damping", sim.damping, "joint damping per DOF (N m s)");
  s->add_option("--lock-dofs", sim.lock_dofs);
  s->add_option("--q0", sim.q0_deg, "initial configuration (degrees)");
  s->add_option("--gravity", sim.gravity)->expected(3);
  s->add_flag("--no-constraints", sim.no_constraints);
  s->add_flag("--no-boxes", sim.no_boxes);
  s->add_option("--seed", sim.seed);
  s->add_option("--record-every", sim.record_every);
  s->add_option("--traj", sim.traj, "trajectory CSV");
  s->add_option("--hist", sim.hist, "C(q) histogram CSV");
  s->add_option("--summary", sim.summary, "summary JSON");

  IkArgs ik;
  auto* k = app.add_subcommand("ik", "Batch inverse kinematics");
  k->add_option("--limb", ik.limb)->check(CLI::IsMember({"arm", "leg"}));
  k->add_option("--limits", ik.limits)->required();
  k->add_option("--batch", ik.batch, "batch spec JSON with targets");
  k->add_option("--count", ik.count, "random reachable targets when no batch is given");
  k->add_option("--seed", ik.seed);
  k->add_option("--penalty", ik.penalty)->check(CLI::IsMember({"shifted", "switch-only", "none"}));
  k->add_option("--weight", ik.weight);
  k->add_option("--step", ik.step);
  k->add_option("--max-step", ik.max_step, "joint-space step cap per iteration (rad)");
  k->add_option("--max-iterations", ik.max_iterations);
  k->add_option("--tolerance", ik.tolerance);
  k->add_option("--restarts", ik.restarts);
  k->add_flag("--cold-start", ik.cold_start);
  k->add_option("--q0", ik.q0_deg, "initial configuration (degrees)");
  k->add_option("--unreachable", ik.unreachable, "append this target (m)")->expected(3);
  k->add_option("--out", ik.out);
  k->add_option("--hist", ik.hist);

  std::string config;
  for (auto* sub : {g, t, e, s, k}) sub->add_option("--config", config, "JSON file overriding flags");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kParse;
  }

  try {
    for (auto* sub : {g, t, e, s, k}) {
      if (sub->parsed() && !config.empty()) apply_config(*sub, config);
    }
    if (g->parsed()) return cmd_gen_data(gen);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_eval(ev);
    if (s->parsed()) return cmd_simulate(sim);
    if (k->parsed()) return cmd_ik(ik);
  } catch (const StarvedBufferError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kStarved;
  } catch (const LcpError& err) {
    std::cerr << "error: " << err.what() << " (worst residual " << err.residuals().worst() << ")\n";
    return kSolver;
  } catch (const DivergenceError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kDivergence;
  } catch (const ParseError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kParse;
  } catch (const UnsupportedVersion& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kParse;
  } catch (const CLI::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kParse;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
