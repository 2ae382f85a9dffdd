#include "jointlimits/constraint.hpp"
#include "jointlimits/dynamics.hpp"
#include "jointlimits/experiments.hpp"
#include "jointlimits/ik.hpp"
#include "jointlimits/kinematics.hpp"
#include "jointlimits/lcp.hpp"
#include "jointlimits/mlp.hpp"
#include "jointlimits/oracle.hpp"
#include "jointlimits/sampler.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace jointlimits;

namespace {

Eigen::MatrixXd points_matrix(const PosePositions& p) {
  Eigen::MatrixXd m(p.size(), 3);
  for (std::size_t i = 0; i < p.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = p[i].transpose();
  return m;
}

PosePositions points_from_matrix(const Eigen::MatrixXd& m) {
  require(m.cols() == 3, "positions must be an (n, 3) array");
  PosePositions p;
  for (Eigen::Index i = 0; i < m.rows(); ++i) p.push_back(m.row(i).transpose());
  return p;
}

py::dict confusion_dict(const ConfusionMatrix& cm) {
  py::dict d;
  d["tp"] = cm.tp;
  d["tn"] = cm.tn;
  d["fp"] = cm.fp;
  d["fn"] = cm.fn;
  d["accuracy"] = cm.accuracy();
  d["false_positive_rate"] = cm.false_positive_rate();
  d["false_negative_rate"] = cm.false_negative_rate();
  return d;
}

}  // namespace

PYBIND11_MODULE(_jointlimits, m) {
  m.doc() = "Learned pose-dependent joint limits";

  static py::exception<ParseError> parse_error(m, "ParseError", PyExc_ValueError);
  static py::exception<UnsupportedVersion> version_error(m, "UnsupportedVersion", PyExc_ValueError);
  static py::exception<StarvedBufferError> starved_error(m, "StarvedBufferError", PyExc_RuntimeError);
  static py::exception<LcpError> lcp_error(m, "LcpError", PyExc_RuntimeError);
  static py::exception<DivergenceError> divergence_error(m, "DivergenceError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      py::set_error(parse_error, e.what());
    } catch (const UnsupportedVersion& e) {
      py::set_error(version_error, e.what());
    } catch (const StarvedBufferError& e) {
      py::set_error(starved_error, e.what());
    } catch (const LcpError& e) {
      py::set_error(lcp_error, e.what());
    } catch (const DivergenceError& e) {
      py::set_error(divergence_error, e.what());
    } catch (const ContractViolation& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<Interval>(m, "Interval")
      .def(py::init<double, double>(), py::arg("lo"), py::arg("hi"))
      .def_readwrite("lo", &Interval::lo)
      .def_readwrite("hi", &Interval::hi)
      .def("__repr__", [](const Interval& i) { return "Interval(" + std::to_string(i.lo) + ", " + std::to_string(i.hi) + ")"; });

  py::class_<LimbModel>(m, "LimbModel")
      .def_readonly("name", &LimbModel::name)
      .def_readonly("bone_lengths", &LimbModel::bone_lengths)
      .def_property_readonly("n_dofs", &LimbModel::n_dofs)
      .def_property_readonly("n_bones", &LimbModel::n_bones)
      .def_property_readonly("dof_names", &LimbModel::dof_names)
      .def_property_readonly("boxes", &LimbModel::boxes);
  m.def("arm_model", &arm_model);
  m.def("leg_model", &leg_model);
  m.def("limb_model", &limb_model, py::arg("limb"));
  m.def("forward_kinematics", [](const LimbModel& model, const JointConfig& q) {
    return points_matrix(forward_kinematics(model, q));
  }, py::arg("model"), py::arg("q"), "Chain points as an (n_bones + 1, 3) array.");
  m.def("position_jacobian", [](const LimbModel& model, const JointConfig& q, int point) {
    return Eigen::MatrixXd(position_jacobian(model, q, point));
  }, py::arg("model"), py::arg("q"), py::arg("point_index"));
  m.def("featurize", &featurize, py::arg("q"));

  py::class_<ValidityModel>(m, "ValidityModel")
      .def_readonly("limb", &ValidityModel::limb)
      .def_property_readonly("n_bones", &ValidityModel::n_bones)
      .def("to_json", [](const ValidityModel& vm) { return to_json(vm).dump(); })
      .def_static("from_json", [](const std::string& s) { return validity_model_from_json(nlohmann::json::parse(s)); });
  m.def("default_validity", &default_validity, py::arg("limb"));
  m.def("is_valid", [](const ValidityModel& vm, const Eigen::MatrixXd& points) {
    return is_valid(vm, points_from_matrix(points));
  }, py::arg("vm"), py::arg("points"));
  m.def("category", &category, py::arg("bits"));
  m.def("analytic_child_range", [](const ValidityModel& vm, const Vec3& parent_dir, int bone) {
    const Interval r = analytic_child_range(vm, parent_dir, bone);
    return py::make_tuple(r.lo, r.hi);
  }, py::arg("vm"), py::arg("parent_dir"), py::arg("bone_index"));

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("limb", &Dataset::limb)
      .def_readonly("K", &Dataset::K)
      .def_readonly("seed", &Dataset::seed)
      .def("__len__", &Dataset::size)
      .def_property_readonly("buffer_sizes", [](const Dataset& d) {
        std::vector<std::size_t> s;
        for (const auto& b : d.buffers) s.push_back(b.size());
        return s;
      })
      .def("arrays", [](const Dataset& d) {
        const auto samples = d.samples();
        const auto n = static_cast<Eigen::Index>(samples.size());
        Eigen::MatrixXd q(n, d.n_dofs()), x(n, 2 * d.n_dofs());
        Eigen::VectorXi label(n), cat(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          q.row(i) = samples[i]->q_raw.transpose();
          x.row(i) = samples[i]->features.transpose();
          label[i] = samples[i]->label;
          cat[i] = samples[i]->category;
        }
        return py::make_tuple(q, x, label, cat);
      }, "(q, features, labels, categories) as arrays.");
  m.def("generate", [](const std::string& limb, int K, std::uint64_t seed, int workers, std::uint64_t max_draws) {
    GenerateOptions opt;
    opt.K = K;
    opt.seed = seed;
    opt.workers = workers;
    opt.max_draws = max_draws;
    GenerateStats stats;
    Dataset d;
    {
      py::gil_scoped_release release;
      d = generate(limb_model(limb), default_validity(limb), opt, &stats);
    }
    return py::make_tuple(d, stats.draws, stats.valid_fraction());
  }, py::arg("limb"), py::arg("K"), py::arg("seed") = 7, py::arg("workers") = 1,
     py::arg("max_draws") = 100'000'000, "Returns (dataset, draws, raw valid fraction).");
  m.def("split", &split, py::arg("dataset"), py::arg("test_fraction"), py::arg("seed"));
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("load_dataset", &load_dataset, py::arg("path"));

  py::class_<MlpParams>(m, "MlpParams")
      .def_property_readonly("layer_sizes", &MlpParams::layer_sizes)
      .def("__call__", [](const MlpParams& p, const VecX& features) { return forward(p, features); });
  m.def("glorot_network", &glorot_network, py::arg("sizes"), py::arg("seed"));
  m.def("limit_network_sizes", &limit_network_sizes, py::arg("n_dofs"), py::arg("hidden") = 128, py::arg("depth") = 3);
  m.def("forward", &forward, py::arg("params"), py::arg("features"));
  m.def("config_gradient", &config_gradient, py::arg("params"), py::arg("q"));
  m.def("save_weights", &save_weights, py::arg("params"), py::arg("path"));
  m.def("load_weights", [](const std::filesystem::path& p) { return load_weights(p); }, py::arg("path"));
  m.def("train", [](const Dataset& train_set, const Dataset* held_out, int epochs, int batch_size, double lr,
                    std::uint64_t seed, int hidden, int depth) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    cfg.hidden = hidden;
    cfg.depth = depth;
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = train(train_set, cfg, held_out);
    }
    py::list curve;
    for (const auto& e : r.curve) curve.append(py::make_tuple(e.epoch, e.train_loss, e.test_accuracy));
    return py::make_tuple(r.params, curve);
  }, py::arg("train"), py::arg("held_out") = nullptr, py::arg("epochs") = 30, py::arg("batch_size") = 128,
     py::arg("learning_rate") = 1e-3, py::arg("seed") = 1, py::arg("hidden") = 128, py::arg("depth") = 3,
     "Returns (params, [(epoch, train_loss, test_accuracy), ...]).");
  m.def("evaluate", [](const MlpParams& p, const Dataset& d) { return confusion_dict(evaluate(p, d)); },
        py::arg("params"), py::arg("dataset"));

  py::class_<LimitSet>(m, "LimitSet")
      .def(py::init([](const MlpParams& net, const BoxLimits& boxes, double margin) {
             LimitSet ls{net, boxes, margin};
             ls.validate();
             return ls;
           }), py::arg("net"), py::arg("boxes"), py::arg("ik_margin") = 0.02)
      .def_readonly("net", &LimitSet::net)
      .def_readonly("boxes", &LimitSet::boxes)
      .def_readwrite("ik_margin", &LimitSet::ik_margin)
      .def_property_readonly("n_dofs", &LimitSet::n_dofs);
  m.def("load_limit_set", &load_limit_set, py::arg("path"));
  m.def("save_limit_set", &save_limit_set, py::arg("limit_set"), py::arg("path"), py::arg("weights_file"));
  m.def("c_value", &c_value, py::arg("limit_set"), py::arg("q"));
  m.def("c_gradient", &c_gradient, py::arg("limit_set"), py::arg("q"));
  m.def("is_config_valid", &is_config_valid, py::arg("limit_set"), py::arg("q"));

  m.def("solve_lcp", [](const MatX& A, const VecX& b) {
    const LcpSolution s = solve_lcp(A, b);
    return py::make_tuple(s.f, s.v);
  }, py::arg("A"), py::arg("b"), "Returns (f, v) with f, v >= 0, v = A f + b, f.v = 0.");

  py::class_<BodyParams>(m, "BodyParams");
  m.def("default_bodies", &default_bodies, py::arg("model"));
  m.def("mass_matrix", &mass_matrix, py::arg("model"), py::arg("bodies"), py::arg("q"));
  m.def("bias_forces", &bias_forces, py::arg("model"), py::arg("bodies"), py::arg("q"), py::arg("qd"),
        py::arg("gravity"));
  m.def("forward_dynamics", &forward_dynamics, py::arg("model"), py::arg("bodies"), py::arg("q"), py::arg("qd"),
        py::arg("tau"), py::arg("gravity"));

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("dt", &SimConfig::dt)
      .def_readwrite("baumgarte", &SimConfig::baumgarte)
      .def_readwrite("activation_tolerance", &SimConfig::activation_tolerance)
      .def_readwrite("predictive_activation", &SimConfig::predictive_activation)
      .def_readwrite("box_activation", &SimConfig::box_activation)
      .def_readwrite("learned_constraint", &SimConfig::learned_constraint)
      .def_readwrite("box_constraints", &SimConfig::box_constraints)
      .def_readwrite("gravity", &SimConfig::gravity)
      .def_readwrite("damping", &SimConfig::damping)
      .def_readwrite("locked_dofs", &SimConfig::locked_dofs);
  m.def("simulate_random_torque", [](const LimitSet& ls, const LimbModel& model, const SimConfig& cfg,
                                     const VecX& torque_limit, double duration, std::uint64_t seed,
                                     const JointConfig& q0) {
    RandomTorqueOptions opt;
    opt.duration = duration;
    opt.torque_limit = torque_limit;
    opt.seed = seed;
    opt.q0 = q0;
    opt.keep_trajectory = false;
    RunSummary r;
    {
      py::gil_scoped_release release;
      r = run_random_torque(ls, model, default_bodies(model), cfg, opt);
    }
    return VecX(Eigen::Map<const VecX>(r.c_values.data(), static_cast<Eigen::Index>(r.c_values.size())));
  }, py::arg("limit_set"), py::arg("model"), py::arg("config"), py::arg("torque_limit"), py::arg("duration"),
     py::arg("seed") = 1, py::arg("q0") = JointConfig(), "C(q) of every simulated state.");
  m.def("simulate_constant_torque", [](const LimitSet& ls, const LimbModel& model, const SimConfig& cfg,
                                       const VecX& torque, double duration, const JointConfig& q0) {
    ConstantTorqueOptions opt;
    opt.duration = duration;
    opt.torque = torque;
    opt.q0 = q0;
    RunSummary r;
    {
      py::gil_scoped_release release;
      r = run_constant_torque(ls, model, default_bodies(model), cfg, opt);
    }
    Eigen::MatrixXd qs(r.trajectory.records.size(), model.n_dofs());
    for (std::size_t i = 0; i < r.trajectory.records.size(); ++i) {
      qs.row(static_cast<Eigen::Index>(i)) = r.trajectory.records[i].q.transpose();
    }
    return qs;
  }, py::arg("limit_set"), py::arg("model"), py::arg("config"), py::arg("torque"), py::arg("duration"),
     py::arg("q0"), "Joint configurations of every simulated state.");

  m.def("solve_ik", [](const LimitSet& ls, const LimbModel& model, const Vec3& target, const JointConfig& q0,
                       const std::string& penalty, double weight, int max_iterations) {
    IkProblem p;
    p.model = &model;
    p.ls = &ls;
    p.target = target;
    p.q0 = q0.size() ? q0 : JointConfig::Zero(model.n_dofs());
    p.penalty = penalty_form_from_string(penalty);
    p.weight = weight;
    p.max_iterations = max_iterations;
    const IkResult r = solve(p);
    py::dict d;
    d["q"] = r.q;
    d["residual"] = r.residual;
    d["c"] = r.c;
    d["iterations"] = r.iterations;
    d["converged"] = r.converged;
    d["within_boxes"] = r.within_boxes;
    return d;
  }, py::arg("limit_set"), py::arg("model"), py::arg("target"), py::arg("q0") = JointConfig(),
     py::arg("penalty") = "shifted", py::arg("weight") = 0.2, py::arg("max_iterations") = 500);
}
