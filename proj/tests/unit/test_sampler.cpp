#include "jointlimits/sampler.hpp"

#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace jltest;

namespace {

Dataset small(const std::string& limb, int K, std::uint64_t seed, int workers = 1) {
  GenerateOptions opt;
  opt.K = K;
  opt.seed = seed;
  opt.workers = workers;
  return generate(limb_model(limb), default_validity(limb), opt);
}

bool same(const Dataset& a, const Dataset& b) {
  if (a.limb != b.limb || a.K != b.K || a.seed != b.seed || a.buffers.size() != b.buffers.size()) return false;
  for (std::size_t i = 0; i < a.box.size(); ++i) {
    if (!(a.box[i] == b.box[i])) return false;
  }
  for (std::size_t i = 0; i < a.buffers.size(); ++i) {
    if (a.buffers[i].size() != b.buffers[i].size()) return false;
    for (std::size_t k = 0; k < a.buffers[i].size(); ++k) {
      const Sample &x = a.buffers[i][k], &y = b.buffers[i][k];
      if (x.label != y.label || x.category != y.category || x.q_raw != y.q_raw || x.features != y.features) return false;
    }
  }
  return true;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("jointlimits_test_" + name);
}

}  // namespace

TEST_CASE("buffers are balanced by category") {
  const Dataset arm = small("arm", 10, 3);
  REQUIRE(arm.buffers.size() == 3);
  for (const auto& b : arm.buffers) CHECK(b.size() == 10);
  CHECK(arm.size() == 30);
  const Dataset leg = small("leg", 10, 3);
  REQUIRE(leg.buffers.size() == 4);
  for (const auto& b : leg.buffers) CHECK(b.size() == 10);
}

TEST_CASE("every stored label re-verifies against the oracle") {
  for (const auto& limb : {std::string("arm"), std::string("leg")}) {
    const Dataset d = small(limb, 200, 5);
    const LimbModel model = limb_model(limb);
    const ValidityModel vm = default_validity(limb);
    for (std::size_t b = 0; b < d.buffers.size(); ++b) {
      for (const Sample& s : d.buffers[b]) {
        CHECK(s.category == static_cast<int>(b));
        CHECK(s.label == (b == 0 ? 1 : 0));
        CHECK(category(is_valid(vm, forward_kinematics(model, s.q_raw))) == s.category);
        CHECK((s.features - featurize(s.q_raw)).norm() == 0.0);
        for (int k = 0; k < model.n_dofs(); ++k) CHECK(d.box[k].contains(s.q_raw[k]));
      }
    }
  }
}

TEST_CASE("generation is deterministic per seed and worker count") {
  CHECK(same(small("arm", 50, 11), small("arm", 50, 11)));
  CHECK(same(small("arm", 50, 11, 3), small("arm", 50, 11, 3)));
  CHECK_FALSE(same(small("arm", 50, 11), small("arm", 50, 12)));
}

TEST_CASE("sampling box honours declared box limits") {
  const auto box = default_sampling_box(arm_model());
  REQUIRE(box.size() == 4);
  CHECK(box[0] == Interval{-kPi, kPi});
  CHECK(box[2] == Interval{deg2rad(-60.0), deg2rad(120.0)});
  CHECK(box[3] == Interval{0.0, kPi});
}

TEST_CASE("starved buffers raise with the buffer index") {
  GenerateOptions opt;
  opt.K = 1000;
  opt.max_draws = 500;
  try {
    generate(leg_model(), default_leg_validity(), opt);
    FAIL("expected StarvedBufferError");
  } catch (const StarvedBufferError& e) {
    CHECK(e.buffer() >= 0);
    CHECK(e.buffer() < 4);
  }
  opt.K = 0;
  CHECK_THROWS_AS(generate(arm_model(), default_arm_validity(), opt), ContractViolation);
}

TEST_CASE("stratified split") {
  const Dataset d = small("arm", 10, 4);
  const auto [train, test] = split(d, 0.2, 9);
  for (std::size_t b = 0; b < d.buffers.size(); ++b) {
    CHECK(train.buffers[b].size() == 8);
    CHECK(test.buffers[b].size() == 2);
    std::vector<JointConfig> all;
    for (const auto& s : train.buffers[b]) all.push_back(s.q_raw);
    for (const auto& s : test.buffers[b]) all.push_back(s.q_raw);
    for (const auto& s : d.buffers[b]) {
      CHECK(std::count_if(all.begin(), all.end(), [&](const JointConfig& q) { return q == s.q_raw; }) == 1);
    }
  }
  const auto again = split(d, 0.2, 9);
  CHECK(same(again.first, train));
  CHECK(same(again.second, test));
  CHECK_THROWS_AS(split(small("arm", 1, 4), 0.5, 1), ContractViolation);
  CHECK_THROWS_AS(split(d, 0.0, 1), ContractViolation);
  CHECK_THROWS_AS(split(d, 1.0, 1), ContractViolation);
}

TEST_CASE("dataset files round trip bit for bit") {
  const Dataset d = small("leg", 25, 8);
  const auto path = temp_file("roundtrip.csv");
  save_dataset(d, path);
  const Dataset back = load_dataset(path);
  CHECK(same(d, back));
  CHECK(dataset_to_string(back) == dataset_to_string(d));
  std::filesystem::remove(path);
}

TEST_CASE("malformed dataset files") {
  const std::string text = dataset_to_string(small("arm", 5, 2));
  CHECK_THROWS_AS(dataset_from_string(text.substr(0, text.size() - 40)), ParseError);
  CHECK_THROWS_AS(dataset_from_string(""), ParseError);
  CHECK_THROWS_AS(dataset_from_string("{not json\n"), ParseError);
  CHECK_THROWS_AS(dataset_from_string(text + "0,1,0.5\n"), ParseError);

  std::string bumped = text;
  const auto pos = bumped.find("\"version\":");
  REQUIRE(pos != std::string::npos);
  const auto end = bumped.find_first_of(",}", pos);
  bumped.replace(pos, end - pos, "\"version\":999");
  CHECK_THROWS_AS(dataset_from_string(bumped), UnsupportedVersion);

  std::string flipped = text;
  const auto row = flipped.find('\n') + 1;
  flipped[row + 2] = flipped[row + 2] == '1' ? '0' : '1';
  CHECK_THROWS_AS(dataset_from_string(flipped), ParseError);

  try {
    dataset_from_string(text.substr(0, text.find('\n') + 10));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() > 0);
  }
}

TEST_CASE("raw valid fraction of the default arm oracle") {
  Rng rng(99);
  const LimbModel arm = arm_model();
  const ValidityModel vm = default_arm_validity();
  const auto box = default_sampling_box(arm);
  long valid = 0;
  const long draws = 1'000'000;
  for (long k = 0; k < draws; ++k) {
    JointConfig q(4);
    for (int i = 0; i < 4; ++i) q[i] = rng.uniform(box[i].lo, box[i].hi);
    valid += make_sample(arm, vm, q).label;
  }
  const double fraction = static_cast<double>(valid) / draws;
  CHECK(fraction == doctest::Approx(0.18).epsilon(0.02 / 0.18));
}
