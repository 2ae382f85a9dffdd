#include "jointlimits/sampler.hpp"

#include "jointlimits/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace jointlimits {

namespace {

constexpr int kDatasetVersion = 1;
constexpr const char* kDatasetFormat = "jointlimits-dataset";

struct Draw {
  JointConfig q;
  int category;
};

std::vector<Draw> draw_chunk(const LimbModel& model, const ValidityModel& vm, const std::vector<Interval>& box,
                             Rng& rng, int count) {
  std::vector<Draw> out;
  out.reserve(count);
  JointConfig q(box.size());
  for (int i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < box.size(); ++k) q[k] = rng.uniform(box[k].lo, box[k].hi);
    out.push_back({q, category(is_valid(vm, forward_kinematics(model, q)))});
  }
  return out;
}

void append_double(std::string& s, double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  s.append(buf, res.ptr);
}

class RowReader {
 public:
  RowReader(const std::string& text, std::size_t pos) : text_(text), pos_(pos) {}

  bool at_end() const { return pos_ >= text_.size(); }
  std::size_t pos() const { return pos_; }

  double number() {
    double x = 0.0;
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    const auto res = std::from_chars(begin, end, x);
    if (res.ec != std::errc()) throw ParseError("dataset: expected a number", pos_);
    pos_ += static_cast<std::size_t>(res.ptr - begin);
    return x;
  }

  int integer() {
    const double x = number();
    if (x != std::floor(x)) throw ParseError("dataset: expected an integer", pos_);
    return static_cast<int>(x);
  }

  void expect(char c) {
    if (pos_ >= text_.size() || text_[pos_] != c) {
      throw ParseError(std::string("dataset: expected '") + (c == '\n' ? std::string("\\n") : std::string(1, c)) + "'",
                       pos_);
    }
    ++pos_;
  }

 private:
  const std::string& text_;
  std::size_t pos_;
};

}  // namespace

std::size_t Dataset::size() const {
  std::size_t n = 0;
  for (const auto& b : buffers) n += b.size();
  return n;
}

std::vector<const Sample*> Dataset::samples() const {
  std::vector<const Sample*> out;
  out.reserve(size());
  for (const auto& b : buffers) {
    for (const auto& s : b) out.push_back(&s);
  }
  return out;
}

double GenerateStats::valid_fraction() const {
  if (draws == 0 || category_hits.empty()) return 0.0;
  return static_cast<double>(category_hits[0]) / static_cast<double>(draws);
}

std::vector<Interval> default_sampling_box(const LimbModel& model) {
  std::vector<Interval> box;
  for (const auto& limit : model.boxes()) box.push_back(limit.value_or(Interval{-kPi, kPi}));
  return box;
}

Sample make_sample(const LimbModel& model, const ValidityModel& vm, const JointConfig& q) {
  const int cat = category(is_valid(vm, forward_kinematics(model, q)));
  return {featurize(q), cat == 0 ? 1 : 0, cat, q};
}

Dataset generate(const LimbModel& model, const ValidityModel& vm, const GenerateOptions& options,
                 GenerateStats* stats) {
  model.validate();
  vm.validate();
  require(options.K >= 1, "K must be at least 1");
  require(options.workers >= 1, "at least one worker is required");
  require(options.chunk >= 1, "chunk size must be positive");
  require(vm.n_bones() == model.n_bones(), "oracle and limb model disagree on the bone count");
  const std::vector<Interval> box = options.box.empty() ? default_sampling_box(model) : options.box;
  require(static_cast<int>(box.size()) == model.n_dofs(), "sampling box needs one range per DOF");
  for (const auto& r : box) require(r.lo < r.hi, "sampling box ranges must be nonempty");

  const int n_buffers = model.n_bones() + 1;
  Dataset d;
  d.limb = model.name;
  d.K = options.K;
  d.seed = options.seed;
  d.box = box;
  d.buffers.resize(n_buffers);

  std::vector<Rng> rngs;
  for (int w = 0; w < options.workers; ++w) {
    rngs.emplace_back(options.workers == 1 ? options.seed : derive_seed(options.seed, w));
  }

  GenerateStats local;
  local.category_hits.assign(n_buffers, 0);
  const auto K = static_cast<std::size_t>(options.K);
  auto min_fill = [&] {
    std::size_t m = K;
    for (const auto& b : d.buffers) m = std::min(m, b.size());
    return m;
  };

  std::vector<std::vector<Draw>> chunks(options.workers);
  while (min_fill() < K) {
    if (local.draws >= options.max_draws) {
      const auto starved = std::min_element(d.buffers.begin(), d.buffers.end(),
                                            [](const auto& a, const auto& b) { return a.size() < b.size(); });
      throw StarvedBufferError(static_cast<int>(starved - d.buffers.begin()), local.draws, starved->size(), options.K);
    }
    const int per_worker = static_cast<int>(
        std::min<std::uint64_t>(options.chunk, (options.max_draws - local.draws + options.workers - 1) / options.workers));
    if (options.workers == 1) {
      chunks[0] = draw_chunk(model, vm, box, rngs[0], per_worker);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < options.workers; ++w) {
        pool.emplace_back([&, w] { chunks[w] = draw_chunk(model, vm, box, rngs[w], per_worker); });
      }
      for (auto& t : pool) t.join();
    }
    // Merge in worker order; stop at the draw that completes the last buffer.
    bool done = false;
    for (const auto& chunk : chunks) {
      for (const auto& draw : chunk) {
        ++local.draws;
        ++local.category_hits[draw.category];
        auto& buf = d.buffers[draw.category];
        if (buf.size() < K) buf.push_back({featurize(draw.q), draw.category == 0 ? 1 : 0, draw.category, draw.q});
        if (buf.size() == K && min_fill() == K) {
          done = true;
          break;
        }
      }
      if (done) break;
    }
  }
  if (stats) *stats = local;
  return d;
}

std::pair<Dataset, Dataset> split(const Dataset& d, double test_fraction, std::uint64_t seed) {
  require(test_fraction > 0.0 && test_fraction < 1.0, "test fraction must lie in (0, 1)");
  Dataset train = d;
  Dataset test = d;
  Rng rng(seed);
  for (std::size_t b = 0; b < d.buffers.size(); ++b) {
    const auto n = d.buffers[b].size();
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    if (n_test == 0 || n_test >= n) {
      throw ContractViolation("buffer D" + std::to_string(b) + " with " + std::to_string(n) +
                              " samples is too small to split at fraction " + std::to_string(test_fraction));
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    shuffle(idx, rng);
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    test.buffers[b].clear();
    train.buffers[b].clear();
    for (std::size_t i = 0; i < n; ++i) (i < n_test ? test : train).buffers[b].push_back(d.buffers[b][idx[i]]);
  }
  train.K = static_cast<int>(train.buffers.front().size());
  test.K = static_cast<int>(test.buffers.front().size());
  return {std::move(train), std::move(test)};
}

std::string dataset_to_string(const Dataset& d) {
  nlohmann::json box = nlohmann::json::array();
  for (const auto& r : d.box) box.push_back({r.lo, r.hi});
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& b : d.buffers) counts.push_back(b.size());
  const nlohmann::json header = {{"format", kDatasetFormat},
                                 {"version", kDatasetVersion},
                                 {"limb", d.limb},
                                 {"K", d.K},
                                 {"seed", d.seed},
                                 {"n_dofs", d.n_dofs()},
                                 {"box", box},
                                 {"buffer_sizes", counts}};
  std::string out = header.dump() + "\n";
  for (const auto& b : d.buffers) {
    for (const auto& s : b) {
      out += std::to_string(s.category);
      out += ',';
      out += std::to_string(s.label);
      for (Eigen::Index k = 0; k < s.q_raw.size(); ++k) {
        out += ',';
        append_double(out, s.q_raw[k]);
      }
      for (Eigen::Index k = 0; k < s.features.size(); ++k) {
        out += ',';
        append_double(out, s.features[k]);
      }
      out += '\n';
    }
  }
  return out;
}

Dataset dataset_from_string(const std::string& text) {
  const auto eol = text.find('\n');
  if (eol == std::string::npos) throw ParseError("dataset: missing header line", text.size());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text.substr(0, eol));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("dataset: malformed header: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
  }
  if (header.value("format", "") != kDatasetFormat) throw ParseError("dataset: not a dataset file", 0);
  const int version = header.value("version", -1);
  if (version != kDatasetVersion) {
    throw UnsupportedVersion("dataset: unsupported version " + std::to_string(version) + " (expected " +
                             std::to_string(kDatasetVersion) + ")");
  }

  Dataset d;
  try {
    d.limb = header.at("limb").get<std::string>();
    d.K = header.at("K").get<int>();
    d.seed = header.at("seed").get<std::uint64_t>();
    for (const auto& r : header.at("box")) d.box.push_back({r.at(0).get<double>(), r.at(1).get<double>()});
    const auto sizes = header.at("buffer_sizes").get<std::vector<std::size_t>>();
    d.buffers.resize(sizes.size());
    for (std::size_t b = 0; b < sizes.size(); ++b) d.buffers[b].reserve(sizes[b]);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("dataset: bad header field: ") + e.what(), 0);
  }
  const auto sizes = header.at("buffer_sizes").get<std::vector<std::size_t>>();
  const int n = d.n_dofs();
  RowReader in(text, eol + 1);
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    for (std::size_t i = 0; i < sizes[b]; ++i) {
      if (in.at_end()) throw ParseError("dataset: truncated, expected more rows", in.pos());
      const std::size_t row_start = in.pos();
      Sample s;
      s.category = in.integer();
      in.expect(',');
      s.label = in.integer();
      s.q_raw.resize(n);
      s.features.resize(2 * n);
      for (int k = 0; k < n; ++k) {
        in.expect(',');
        s.q_raw[k] = in.number();
      }
      for (int k = 0; k < 2 * n; ++k) {
        in.expect(',');
        s.features[k] = in.number();
      }
      in.expect('\n');
      if (s.category != static_cast<int>(b) || s.label != (s.category == 0 ? 1 : 0)) {
        throw ParseError("dataset: row label/category inconsistent with its buffer", row_start);
      }
      d.buffers[b].push_back(std::move(s));
    }
  }
  if (!in.at_end()) throw ParseError("dataset: trailing data after the declared rows", in.pos());
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << dataset_to_string(d);
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return dataset_from_string(ss.str());
}

}  // namespace jointlimits
