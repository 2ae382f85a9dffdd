#pragma once

#include "jointlimits/types.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace jointlimits {

enum class JointKind {
  kRevolute,   // 1 axis
  kEulerBall,  // 3 successive intrinsic axes: flexion, abduction, twist
  kUniversal,  // 2 successive intrinsic axes
};

std::string to_string(JointKind kind);
JointKind joint_kind_from_string(const std::string& s);
int dofs_of(JointKind kind);

struct JointSpec {
  std::string name;
  JointKind kind = JointKind::kRevolute;
  /// Unit rotation axes, each expressed in the frame produced by the
  /// preceding rotations of the same joint (intrinsic composition).
  std::vector<Vec3> axes;
  BoxLimits box_limits;

  int dofs() const { return dofs_of(kind); }
};

/// Serial chain. Joint i sits at the proximal end of bone i and drives it.
struct LimbModel {
  std::string name;
  std::vector<JointSpec> joints;
  std::vector<double> bone_lengths;   // meters
  std::vector<Vec3> rest_directions;  // bone direction at q = 0, parent frame

  int n_dofs() const;
  int n_bones() const { return static_cast<int>(bone_lengths.size()); }
  /// Flattened per-DOF box limits, root to leaf.
  BoxLimits boxes() const;
  /// Index of the bone driven by each DOF.
  std::vector<int> bone_of_dof() const;
  std::vector<std::string> dof_names() const;

  /// Throws ContractViolation when an invariant does not hold.
  void validate() const;
};

/// 4-DOF arm: euler-ball shoulder + revolute elbow. Hangs along -Z at q = 0.
LimbModel arm_model();
/// 6-DOF leg: euler-ball hip, revolute knee, universal ankle.
LimbModel leg_model();
LimbModel limb_model(const std::string& limb);

/// Chain root plus one point per bone end (n_bones + 1 points).
using PosePositions = std::vector<Vec3>;

/// Everything the dynamics and Jacobian code needs about a configured chain.
struct ChainFrames {
  PosePositions points;
  std::vector<Mat3> bone_rotation;  // world orientation of each bone frame
  std::vector<Vec3> dof_axis;       // world axis of each DOF
  std::vector<Vec3> dof_origin;     // world point each DOF rotates about
  std::vector<int> dof_bone;        // bone driven by each DOF
};

ChainFrames chain_frames(const LimbModel& model, const JointConfig& q);

PosePositions forward_kinematics(const LimbModel& model, const JointConfig& q);

/// 3 x n_dofs matrix J with d(points[point_index])/dt = J qdot.
Eigen::Matrix<double, 3, Eigen::Dynamic> position_jacobian(const LimbModel& model,
                                                           const JointConfig& q,
                                                           int point_index);

/// [sin q, cos q]
VecX featurize(const JointConfig& q);
/// d featurize / dq, a 2n x n matrix: diag(cos q) over diag(-sin q).
MatX feature_jacobian(const JointConfig& q);

/// Rotation of `angle` radians about unit `axis`.
Mat3 axis_angle(const Vec3& axis, double angle);

// JSON: axes as 3-arrays, lengths in meters, box limits in degrees.
nlohmann::json to_json(const LimbModel& model);
LimbModel limb_model_from_json(const nlohmann::json& j);

}  // namespace jointlimits
