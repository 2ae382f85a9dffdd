#include "jointlimits/kinematics.hpp"

#include <cmath>

namespace jointlimits {

namespace {

nlohmann::json box_to_json(const std::optional<Interval>& box) {
  if (!box) return nullptr;
  return nlohmann::json::array({rad2deg(box->lo), rad2deg(box->hi)});
}

std::optional<Interval> box_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return Interval{deg2rad(j.at(0).get<double>()), deg2rad(j.at(1).get<double>())};
}

Vec3 vec3_from_json(const nlohmann::json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

}  // namespace

std::string to_string(JointKind kind) {
  switch (kind) {
    case JointKind::kRevolute: return "revolute";
    case JointKind::kEulerBall: return "euler-ball";
    case JointKind::kUniversal: return "universal";
  }
  return "?";
}

JointKind joint_kind_from_string(const std::string& s) {
  if (s == "revolute") return JointKind::kRevolute;
  if (s == "euler-ball") return JointKind::kEulerBall;
  if (s == "universal") return JointKind::kUniversal;
  throw ContractViolation("unknown joint kind '" + s + "'");
}

int dofs_of(JointKind kind) {
  switch (kind) {
    case JointKind::kRevolute: return 1;
    case JointKind::kEulerBall: return 3;
    case JointKind::kUniversal: return 2;
  }
  return 0;
}

int LimbModel::n_dofs() const {
  int n = 0;
  for (const auto& j : joints) n += j.dofs();
  return n;
}

BoxLimits LimbModel::boxes() const {
  BoxLimits out;
  for (const auto& j : joints) out.insert(out.end(), j.box_limits.begin(), j.box_limits.end());
  return out;
}

std::vector<int> LimbModel::bone_of_dof() const {
  std::vector<int> out;
  for (int b = 0; b < static_cast<int>(joints.size()); ++b) out.insert(out.end(), joints[b].dofs(), b);
  return out;
}

std::vector<std::string> LimbModel::dof_names() const {
  static const char* kBall[] = {"flexion", "abduction", "twist"};
  std::vector<std::string> out;
  for (const auto& j : joints) {
    for (int k = 0; k < j.dofs(); ++k) {
      if (j.kind == JointKind::kRevolute) {
        out.push_back(j.name);
      } else if (j.kind == JointKind::kEulerBall) {
        out.push_back(j.name + "_" + kBall[k]);
      } else {
        out.push_back(j.name + "_" + std::to_string(k));
      }
    }
  }
  return out;
}

void LimbModel::validate() const {
  require(!joints.empty(), "limb model has no joints");
  require(joints.size() == bone_lengths.size(), "one joint per bone is required");
  require(rest_directions.size() == bone_lengths.size(), "one rest direction per bone is required");
  for (const double len : bone_lengths) require(len > 0.0 && std::isfinite(len), "bone lengths must be positive");
  for (const auto& d : rest_directions) require(std::abs(d.norm() - 1.0) < 1e-9, "rest directions must be unit length");
  for (const auto& j : joints) {
    require(static_cast<int>(j.axes.size()) == j.dofs(), "joint '" + j.name + "' has the wrong number of axes");
    require(static_cast<int>(j.box_limits.size()) == j.dofs(), "joint '" + j.name + "' needs one box entry per DOF");
    for (const auto& a : j.axes) require(std::abs(a.norm() - 1.0) < 1e-9, "joint axes must be unit length");
    if (j.kind == JointKind::kEulerBall) {
      Mat3 m;
      m << j.axes[0], j.axes[1], j.axes[2];
      require(std::abs(m.determinant()) > 1e-6, "euler-ball axes must be linearly independent");
    }
    for (const auto& box : j.box_limits) {
      if (box) require(box->lo < box->hi, "box limits need lo < hi");
    }
  }
}

LimbModel arm_model() {
  LimbModel m;
  m.name = "arm";
  // Limb frame: x lateral, y anterior, z up.
  m.joints.push_back({"shoulder", JointKind::kEulerBall,
                      {Vec3::UnitX(), -Vec3::UnitY(), Vec3::UnitZ()},
                      {std::nullopt, std::nullopt, Interval{deg2rad(-60.0), deg2rad(120.0)}}});
  m.joints.push_back({"elbow", JointKind::kRevolute, {Vec3::UnitX()}, {Interval{0.0, kPi}}});
  m.bone_lengths = {0.30, 0.25};
  m.rest_directions = {-Vec3::UnitZ(), -Vec3::UnitZ()};
  return m;
}

LimbModel leg_model() {
  LimbModel m;
  m.name = "leg";
  m.joints.push_back({"hip", JointKind::kEulerBall,
                      {Vec3::UnitX(), -Vec3::UnitY(), Vec3::UnitZ()},
                      {std::nullopt, std::nullopt, std::nullopt}});
  // Knee flexion swings the shank backwards.
  m.joints.push_back({"knee", JointKind::kRevolute, {-Vec3::UnitX()}, {Interval{0.0, kPi}}});
  m.joints.push_back({"ankle", JointKind::kUniversal, {Vec3::UnitX(), Vec3::UnitZ()},
                      {std::nullopt, std::nullopt}});
  m.bone_lengths = {0.40, 0.38, 0.15};
  m.rest_directions = {-Vec3::UnitZ(), -Vec3::UnitZ(), Vec3::UnitY()};
  return m;
}

LimbModel limb_model(const std::string& limb) {
  if (limb == "arm") return arm_model();
  if (limb == "leg") return leg_model();
  throw ContractViolation("unknown limb '" + limb + "' (expected arm or leg)");
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

ChainFrames chain_frames(const LimbModel& model, const JointConfig& q) {
  const int n = model.n_dofs();
  if (q.size() != n) {
    throw ContractViolation("configuration has " + std::to_string(q.size()) + " entries, model '" +
                            model.name + "' has " + std::to_string(n) + " DOFs");
  }
  ChainFrames fr;
  fr.points.reserve(model.n_bones() + 1);
  fr.points.push_back(Vec3::Zero());
  Mat3 rot = Mat3::Identity();
  int k = 0;
  for (int b = 0; b < model.n_bones(); ++b) {
    const auto& joint = model.joints[b];
    const Vec3& origin = fr.points.back();
    for (const auto& axis : joint.axes) {
      const Vec3 world_axis = rot * axis;
      fr.dof_axis.push_back(world_axis);
      fr.dof_origin.push_back(origin);
      fr.dof_bone.push_back(b);
      rot = rot * axis_angle(axis, q[k]);
      ++k;
    }
    fr.bone_rotation.push_back(rot);
    fr.points.push_back(origin + model.bone_lengths[b] * (rot * model.rest_directions[b]));
  }
  return fr;
}

PosePositions forward_kinematics(const LimbModel& model, const JointConfig& q) {
  return chain_frames(model, q).points;
}

Eigen::Matrix<double, 3, Eigen::Dynamic> position_jacobian(const LimbModel& model,
                                                           const JointConfig& q,
                                                           int point_index) {
  if (point_index < 0 || point_index > model.n_bones()) {
    throw ContractViolation("point index " + std::to_string(point_index) + " out of range [0, " +
                            std::to_string(model.n_bones()) + "]");
  }
  const ChainFrames fr = chain_frames(model, q);
  const int n = model.n_dofs();
  Eigen::Matrix<double, 3, Eigen::Dynamic> jac = Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, n);
  const Vec3& p = fr.points[point_index];
  for (int k = 0; k < n; ++k) {
    // A DOF of joint b moves points b+1 and beyond.
    if (fr.dof_bone[k] < point_index) jac.col(k) = fr.dof_axis[k].cross(p - fr.dof_origin[k]);
  }
  return jac;
}

VecX featurize(const JointConfig& q) {
  const auto n = q.size();
  VecX x(2 * n);
  x.head(n) = q.array().sin();
  x.tail(n) = q.array().cos();
  return x;
}

MatX feature_jacobian(const JointConfig& q) {
  const auto n = q.size();
  MatX jac = MatX::Zero(2 * n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    jac(i, i) = std::cos(q[i]);
    jac(n + i, i) = -std::sin(q[i]);
  }
  return jac;
}

nlohmann::json to_json(const LimbModel& model) {
  nlohmann::json joints = nlohmann::json::array();
  for (const auto& j : model.joints) {
    nlohmann::json axes = nlohmann::json::array();
    for (const auto& a : j.axes) axes.push_back({a.x(), a.y(), a.z()});
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& b : j.box_limits) boxes.push_back(box_to_json(b));
    joints.push_back({{"name", j.name}, {"kind", to_string(j.kind)}, {"axes", axes}, {"box_limits_deg", boxes}});
  }
  nlohmann::json rest = nlohmann::json::array();
  for (const auto& d : model.rest_directions) rest.push_back({d.x(), d.y(), d.z()});
  return {{"version", 1},
          {"name", model.name},
          {"joints", joints},
          {"bone_lengths", model.bone_lengths},
          {"rest_directions", rest}};
}

LimbModel limb_model_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) throw UnsupportedVersion("limb model: unsupported version");
  LimbModel m;
  m.name = j.at("name").get<std::string>();
  for (const auto& jj : j.at("joints")) {
    JointSpec spec;
    spec.name = jj.at("name").get<std::string>();
    spec.kind = joint_kind_from_string(jj.at("kind").get<std::string>());
    for (const auto& a : jj.at("axes")) spec.axes.push_back(vec3_from_json(a));
    for (const auto& b : jj.at("box_limits_deg")) spec.box_limits.push_back(box_from_json(b));
    m.joints.push_back(std::move(spec));
  }
  m.bone_lengths = j.at("bone_lengths").get<std::vector<double>>();
  for (const auto& d : j.at("rest_directions")) m.rest_directions.push_back(vec3_from_json(d));
  m.validate();
  return m;
}

}  // namespace jointlimits
