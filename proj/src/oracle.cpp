#include "jointlimits/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace jointlimits {

namespace {

double angle_between(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(a.dot(b), -1.0, 1.0));
}

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

DirectionGrid sample_grid(const std::function<double(const Vec3&)>& field_deg) {
  DirectionGrid g;
  g.values.resize(static_cast<std::size_t>(g.n_azimuth) * g.n_elevation);
  for (int j = 0; j < g.n_elevation; ++j) {
    for (int i = 0; i < g.n_azimuth; ++i) {
      g.values[static_cast<std::size_t>(j) * g.n_azimuth + i] = deg2rad(field_deg(g.node_direction(j, i)));
    }
  }
  return g;
}

DirectionGrid constant_grid(double value) {
  DirectionGrid g;
  g.values.assign(static_cast<std::size_t>(g.n_azimuth) * g.n_elevation, value);
  return g;
}

SphericalCap cap(Vec3 axis, double half_angle_deg) {
  return {axis.normalized(), deg2rad(half_angle_deg)};
}

nlohmann::json grid_to_json(const DirectionGrid& g) {
  std::vector<double> deg(g.values.size());
  std::transform(g.values.begin(), g.values.end(), deg.begin(), rad2deg);
  return {{"ordering", "elevation-major"},
          {"n_azimuth", g.n_azimuth},
          {"n_elevation", g.n_elevation},
          {"azimuth0_deg", rad2deg(g.azimuth0)},
          {"azimuth_step_deg", rad2deg(g.azimuth_step)},
          {"elevation0_deg", rad2deg(g.elevation0)},
          {"elevation_step_deg", rad2deg(g.elevation_step)},
          {"values_deg", deg}};
}

DirectionGrid grid_from_json(const nlohmann::json& j) {
  if (j.value("ordering", "elevation-major") != "elevation-major") {
    throw ContractViolation("direction grid: only elevation-major ordering is supported");
  }
  DirectionGrid g;
  g.n_azimuth = j.at("n_azimuth").get<int>();
  g.n_elevation = j.at("n_elevation").get<int>();
  g.azimuth0 = deg2rad(j.at("azimuth0_deg").get<double>());
  g.azimuth_step = deg2rad(j.at("azimuth_step_deg").get<double>());
  g.elevation0 = deg2rad(j.at("elevation0_deg").get<double>());
  g.elevation_step = deg2rad(j.at("elevation_step_deg").get<double>());
  g.values = j.at("values_deg").get<std::vector<double>>();
  std::transform(g.values.begin(), g.values.end(), g.values.begin(), deg2rad);
  return g;
}

Vec3 vec3(const nlohmann::json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }

}  // namespace

Vec3 DirectionGrid::node_direction(int elevation_index, int azimuth_index) const {
  const double az = azimuth0 + azimuth_index * azimuth_step;
  const double el = elevation0 + elevation_index * elevation_step;
  return Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
}

double DirectionGrid::at(const Vec3& direction) const {
  const Vec3 u = direction.normalized();
  double az = std::atan2(u.y(), u.x()) - azimuth0;
  az -= 2.0 * kPi * std::floor(az / (2.0 * kPi));
  const double el = std::asin(std::clamp(u.z(), -1.0, 1.0));

  const double x = az / azimuth_step;
  const int i0 = static_cast<int>(std::floor(x)) % n_azimuth;
  const int i1 = (i0 + 1) % n_azimuth;
  const double t = x - std::floor(x);

  const double el_max = elevation0 + (n_elevation - 1) * elevation_step;
  const double y = (std::clamp(el, elevation0, el_max) - elevation0) / elevation_step;
  const int j0 = std::min(static_cast<int>(std::floor(y)), n_elevation - 2);
  const int j1 = j0 + 1;
  const double s = y - j0;

  return (1 - t) * (1 - s) * node(j0, i0) + t * (1 - s) * node(j0, i1) +
         (1 - t) * s * node(j1, i0) + t * s * node(j1, i1);
}

void ValidityModel::validate() const {
  require(!bones.empty(), "validity model has no bones");
  require(std::holds_alternative<CapUnion>(bones.front()), "the root bone must use a cap union");
  for (std::size_t b = 0; b < bones.size(); ++b) {
    if (const auto* cu = std::get_if<CapUnion>(&bones[b])) {
      require(b == 0, "cap unions are only supported on the root bone");
      require(!cu->caps.empty(), "cap union is empty");
      for (const auto& c : cu->caps) {
        require(std::abs(c.axis.norm() - 1.0) < 1e-9, "cap axes must be unit length");
        require(c.half_angle > 0.0 && c.half_angle < kPi, "cap half-angles must lie in (0, pi)");
      }
    } else if (const auto* fb = std::get_if<FlexionBounds>(&bones[b])) {
      for (const DirectionGrid* g : {&fb->lo, &fb->hi}) {
        require(g->n_azimuth >= 2 && g->n_elevation >= 2, "grids need at least 2x2 nodes");
        require(g->values.size() == static_cast<std::size_t>(g->n_azimuth) * g->n_elevation,
                "grid value count does not match its dimensions");
        require(std::abs(g->n_azimuth * g->azimuth_step - 2.0 * kPi) < 1e-9, "grid azimuths must wrap the full circle");
        require(g->elevation0 <= -kPi / 2 + g->elevation_step &&
                    g->elevation0 + (g->n_elevation - 1) * g->elevation_step >= kPi / 2 - g->elevation_step,
                "grid elevations must cover the sphere");
      }
      require(fb->lo.n_azimuth == fb->hi.n_azimuth && fb->lo.n_elevation == fb->hi.n_elevation,
              "lo and hi grids must share a layout");
      for (std::size_t k = 0; k < fb->lo.values.size(); ++k) {
        require(fb->lo.values[k] < fb->hi.values[k], "every grid node needs lo < hi");
      }
    } else {
      const auto& nc = std::get<NeutralCone>(bones[b]);
      require(b > 0, "neutral cones need a parent bone");
      require(std::abs(nc.reference_axis.norm() - 1.0) < 1e-9, "cone reference axis must be unit length");
      require(nc.half_angle > 0.0 && nc.half_angle < kPi, "cone half-angle must lie in (0, pi)");
    }
  }
}

ValidityModel default_arm_validity() {
  ValidityModel vm;
  vm.limb = "arm";
  vm.bones.push_back(CapUnion{{cap({0.3, 0.25, -0.92}, 67.5),    // hanging, forward and out
                               cap({0.7, 0.6, 0.38}, 55.8),      // raised forward-lateral
                               cap({0.1, -0.55, -0.83}, 36.0)}}); // extended behind the torso
  // Elbow: full range with the upper arm hanging, 35 deg once it is behind
  // the torso, and a narrow range over most of the remaining directions.
  auto elbow_hi = [](const Vec3& u) {
    const double score = -u.z() + 0.4 * std::max(u.y(), 0.0) + 0.7 * std::min(u.y(), 0.0);
    return 35.0 + 145.0 * smoothstep((score - 0.4) / (1.0 - 0.4));
  };
  vm.bones.push_back(FlexionBounds{constant_grid(0.0), sample_grid(elbow_hi)});
  return vm;
}

ValidityModel default_leg_validity() {
  ValidityModel vm;
  vm.limb = "leg";
  vm.bones.push_back(CapUnion{{cap({0.15, 0.35, -0.92}, 55.0),  // standing through moderate flexion
                               cap({0.2, 0.85, -0.5}, 45.0)}});  // deep hip flexion
  // Knee: wider when the hip flexes, narrower when it abducts.
  auto knee_hi = [](const Vec3& u) {
    return 140.0 + 30.0 * std::tanh(1.5 * u.y()) - 25.0 * u.x() * u.x();
  };
  vm.bones.push_back(FlexionBounds{constant_grid(0.0), sample_grid(knee_hi)});
  vm.bones.push_back(NeutralCone{Vec3::UnitX(), deg2rad(45.0)});
  return vm;
}

ValidityModel default_validity(const std::string& limb) {
  if (limb == "arm") return default_arm_validity();
  if (limb == "leg") return default_leg_validity();
  throw ContractViolation("unknown limb '" + limb + "' (expected arm or leg)");
}

ValidityVector is_valid(const ValidityModel& vm, const PosePositions& p) {
  require(static_cast<int>(p.size()) == vm.n_bones() + 1, "pose has the wrong number of points for this oracle");
  std::vector<Vec3> dirs;
  dirs.reserve(vm.bones.size());
  for (int b = 0; b < vm.n_bones(); ++b) {
    const Vec3 seg = p[b + 1] - p[b];
    const double len = seg.norm();
    require(len > 1e-12, "degenerate bone " + std::to_string(b + 1) + " (zero length)");
    dirs.push_back(seg / len);
  }

  ValidityVector bits(vm.bones.size(), 0);
  for (int b = 0; b < vm.n_bones(); ++b) {
    const Vec3& d = dirs[b];
    bool ok = false;
    if (const auto* cu = std::get_if<CapUnion>(&vm.bones[b])) {
      ok = std::any_of(cu->caps.begin(), cu->caps.end(),
                       [&](const SphericalCap& c) { return d.dot(c.axis) >= std::cos(c.half_angle); });
    } else if (const auto* fb = std::get_if<FlexionBounds>(&vm.bones[b])) {
      const Vec3& u = dirs[b - 1];
      const double flex = angle_between(u, d);
      ok = flex >= fb->lo.at(u) && flex <= fb->hi.at(u);
    } else {
      const auto& nc = std::get<NeutralCone>(vm.bones[b]);
      Vec3 neutral = nc.reference_axis.cross(dirs[b - 1]);
      // Parent along the reference axis: fall back to the axis orthogonal to both.
      if (neutral.norm() < 1e-9) neutral = nc.reference_axis.unitOrthogonal();
      ok = angle_between(neutral.normalized(), d) <= nc.half_angle;
    }
    bits[b] = ok ? 1 : 0;
    if (!ok) break;  // offspring of an invalid bone stay invalid
  }
  return bits;
}

int category(const ValidityVector& b) {
  const int n = static_cast<int>(b.size());
  int first_invalid = n;
  for (int i = 0; i < n; ++i) {
    require(b[i] == 0 || b[i] == 1, "validity bits must be 0 or 1");
    if (b[i] == 0 && first_invalid == n) first_invalid = i;
    if (b[i] == 1 && first_invalid < n) {
      throw ContractViolation("validity vector violates offspring invalidation");
    }
  }
  return first_invalid == n ? 0 : n - first_invalid;
}

Interval analytic_child_range(const ValidityModel& vm, const Vec3& parent_dir, int bone_index) {
  if (bone_index < 2 || bone_index > vm.n_bones()) {
    throw ContractViolation("bone index " + std::to_string(bone_index) + " out of range [2, " +
                            std::to_string(vm.n_bones()) + "]");
  }
  const auto* fb = std::get_if<FlexionBounds>(&vm.bones[bone_index - 1]);
  if (!fb) throw ContractViolation("bone " + std::to_string(bone_index) + " has no flexion bounds");
  return {fb->lo.at(parent_dir), fb->hi.at(parent_dir)};
}

nlohmann::json to_json(const ValidityModel& vm) {
  nlohmann::json bones = nlohmann::json::array();
  for (const auto& region : vm.bones) {
    if (const auto* cu = std::get_if<CapUnion>(&region)) {
      nlohmann::json caps = nlohmann::json::array();
      for (const auto& c : cu->caps) {
        caps.push_back({{"axis", {c.axis.x(), c.axis.y(), c.axis.z()}}, {"half_angle_deg", rad2deg(c.half_angle)}});
      }
      bones.push_back({{"type", "cap-union"}, {"caps", caps}});
    } else if (const auto* fb = std::get_if<FlexionBounds>(&region)) {
      bones.push_back({{"type", "flexion-bounds"}, {"lo", grid_to_json(fb->lo)}, {"hi", grid_to_json(fb->hi)}});
    } else {
      const auto& nc = std::get<NeutralCone>(region);
      bones.push_back({{"type", "neutral-cone"},
                       {"reference_axis", {nc.reference_axis.x(), nc.reference_axis.y(), nc.reference_axis.z()}},
                       {"half_angle_deg", rad2deg(nc.half_angle)}});
    }
  }
  return {{"version", 1}, {"limb", vm.limb}, {"bones", bones}};
}

ValidityModel validity_model_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) throw UnsupportedVersion("validity model: unsupported version");
  ValidityModel vm;
  vm.limb = j.at("limb").get<std::string>();
  for (const auto& b : j.at("bones")) {
    const auto type = b.at("type").get<std::string>();
    if (type == "cap-union") {
      CapUnion cu;
      for (const auto& c : b.at("caps")) {
        cu.caps.push_back({vec3(c.at("axis")).normalized(), deg2rad(c.at("half_angle_deg").get<double>())});
      }
      vm.bones.emplace_back(std::move(cu));
    } else if (type == "flexion-bounds") {
      vm.bones.emplace_back(FlexionBounds{grid_from_json(b.at("lo")), grid_from_json(b.at("hi"))});
    } else if (type == "neutral-cone") {
      vm.bones.emplace_back(NeutralCone{vec3(b.at("reference_axis")).normalized(),
                                        deg2rad(b.at("half_angle_deg").get<double>())});
    } else {
      throw ContractViolation("unknown bone region type '" + type + "'");
    }
  }
  vm.validate();
  return vm;
}

}  // namespace jointlimits
