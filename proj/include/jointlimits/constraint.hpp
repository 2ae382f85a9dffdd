#pragma once

#include "jointlimits/mlp.hpp"
#include "jointlimits/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace jointlimits {

/// The learned surface C(q) together with the per-DOF box limits. A
/// configuration is valid only when it satisfies both.
struct LimitSet {
  MlpParams net;
  BoxLimits boxes;
  /// Margin used by inverse kinematics: solutions should satisfy C(q) > ik_margin.
  double ik_margin = 0.02;

  int n_dofs() const { return static_cast<int>(boxes.size()); }
  void validate() const;
};

double c_value(const LimitSet& ls, const JointConfig& q);
VecX c_gradient(const LimitSet& ls, const JointConfig& q);
bool within_boxes(const LimitSet& ls, const JointConfig& q);
/// c_value(q) > 0 and q inside every box.
bool is_config_valid(const LimitSet& ls, const JointConfig& q);

// JSON bundle referencing a weights file (resolved relative to the bundle).
nlohmann::json limit_set_to_json(const LimitSet& ls, const std::string& weights_file);
LimitSet limit_set_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
void save_limit_set(const LimitSet& ls, const std::filesystem::path& path, const std::string& weights_file);
LimitSet load_limit_set(const std::filesystem::path& path);

}  // namespace jointlimits
