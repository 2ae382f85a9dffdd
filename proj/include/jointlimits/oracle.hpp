#pragma once

#include "jointlimits/kinematics.hpp"
#include "jointlimits/types.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <variant>
#include <vector>

namespace jointlimits {

/// Cone of unit directions within `half_angle` (radians) of `axis`.
struct SphericalCap {
  Vec3 axis;
  double half_angle = 0.0;
};

/// Root bone: valid when its direction lies in at least one cap.
struct CapUnion {
  std::vector<SphericalCap> caps;
};

/// Scalar field over the unit sphere sampled on an azimuth x elevation grid
/// and bilinearly interpolated. Azimuth is measured in the xy-plane from +x
/// towards +y, elevation from the xy-plane towards +z. Nodes sit at
/// azimuth_i = azimuth0 + i * azimuth_step (periodic) and
/// elevation_j = elevation0 + j * elevation_step; directions beyond the
/// outermost elevation rows use the nearest row. Values are row-major with
/// one row per elevation.
struct DirectionGrid {
  int n_azimuth = 24;
  int n_elevation = 12;
  double azimuth0 = 0.0;                 // radians
  double azimuth_step = deg2rad(15.0);   // radians
  double elevation0 = deg2rad(-82.5);    // radians
  double elevation_step = deg2rad(15.0); // radians
  std::vector<double> values;

  double node(int elevation_index, int azimuth_index) const {
    return values[static_cast<std::size_t>(elevation_index) * n_azimuth + azimuth_index];
  }
  Vec3 node_direction(int elevation_index, int azimuth_index) const;
  double at(const Vec3& direction) const;
};

/// Child bone: the angle between parent and child directions must lie in
/// [lo(u), hi(u)], u being the parent direction.
struct FlexionBounds {
  DirectionGrid lo;
  DirectionGrid hi;
};

/// Leaf bone: valid within `half_angle` of the neutral axis
/// normalize(reference_axis x parent_direction).
struct NeutralCone {
  Vec3 reference_axis = Vec3::UnitX();
  double half_angle = 0.0;
};

using BoneRegion = std::variant<CapUnion, FlexionBounds, NeutralCone>;

/// Synthetic ground-truth validity procedure. Bone 1 must be a CapUnion;
/// later bones condition only on their parent's direction.
struct ValidityModel {
  std::string limb;
  std::vector<BoneRegion> bones;

  int n_bones() const { return static_cast<int>(bones.size()); }
  void validate() const;
};

/// Default arm oracle: about 18% of box-uniform configurations valid;
/// elbow bound 180 deg with the arm hanging, 35 deg with it behind the torso.
ValidityModel default_arm_validity();
/// Default leg oracle: knee bound ~125 deg abducted, ~165 deg flexed.
ValidityModel default_leg_validity();
ValidityModel default_validity(const std::string& limb);

/// Per-bone validity bits ordered root to leaf (1 = valid).
using ValidityVector = std::vector<int>;

ValidityVector is_valid(const ValidityModel& vm, const PosePositions& p);

/// 0 when every bone is valid, otherwise n_bones - (index of first invalid
/// bone), so an invalid root maps to n_bones and an invalid leaf to 1.
int category(const ValidityVector& b);

/// Interpolated [lo, hi] flexion range (radians) of 1-based `bone_index`
/// (>= 2) given its parent's direction.
Interval analytic_child_range(const ValidityModel& vm, const Vec3& parent_dir, int bone_index);

// JSON: angles in degrees, grids row-major by elevation.
nlohmann::json to_json(const ValidityModel& vm);
ValidityModel validity_model_from_json(const nlohmann::json& j);

}  // namespace jointlimits
