#include "jointlimits/constraint.hpp"

#include <fstream>
#include <sstream>

namespace jointlimits {

void LimitSet::validate() const {
  net.validate();
  require(net.input_size() == 2 * n_dofs(), "network input does not match the number of box entries");
  for (const auto& b : boxes) {
    if (b) require(b->lo < b->hi, "box limits need lo < hi");
  }
  require(ik_margin >= 0.0, "IK margin must be non-negative");
}

double c_value(const LimitSet& ls, const JointConfig& q) { return forward(ls.net, featurize(q)); }

VecX c_gradient(const LimitSet& ls, const JointConfig& q) { return config_gradient(ls.net, q); }

bool within_boxes(const LimitSet& ls, const JointConfig& q) {
  require(q.size() == ls.n_dofs(), "configuration size does not match the limit set");
  for (int i = 0; i < ls.n_dofs(); ++i) {
    if (ls.boxes[i] && !ls.boxes[i]->contains(q[i])) return false;
  }
  return true;
}

bool is_config_valid(const LimitSet& ls, const JointConfig& q) {
  return c_value(ls, q) > 0.0 && within_boxes(ls, q);
}

nlohmann::json limit_set_to_json(const LimitSet& ls, const std::string& weights_file) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : ls.boxes) {
    boxes.push_back(b ? nlohmann::json::array({rad2deg(b->lo), rad2deg(b->hi)}) : nlohmann::json(nullptr));
  }
  return {{"version", 1}, {"weights", weights_file}, {"boxes_deg", boxes}, {"ik_margin", ls.ik_margin}};
}

LimitSet limit_set_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (j.value("version", 0) != 1) throw UnsupportedVersion("limit set: unsupported version");
  LimitSet ls;
  for (const auto& b : j.at("boxes_deg")) {
    if (b.is_null()) {
      ls.boxes.emplace_back(std::nullopt);
    } else {
      ls.boxes.emplace_back(Interval{deg2rad(b.at(0).get<double>()), deg2rad(b.at(1).get<double>())});
    }
  }
  ls.ik_margin = j.value("ik_margin", 0.02);
  std::filesystem::path weights = j.at("weights").get<std::string>();
  if (weights.is_relative()) weights = base_dir / weights;
  ls.net = load_weights(weights);
  ls.validate();
  return ls;
}

void save_limit_set(const LimitSet& ls, const std::filesystem::path& path, const std::string& weights_file) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << limit_set_to_json(ls, weights_file).dump(2) << "\n";
}

LimitSet load_limit_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("limit set: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
  }
  return limit_set_from_json(j, path.parent_path());
}

}  // namespace jointlimits
