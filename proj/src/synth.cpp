#include "lstm_cctc/synth.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "lstm_cctc/errors.hpp"

namespace lstm_cctc {
namespace {

constexpr std::uint64_t kTestIndexOffset = std::uint64_t{1} << 40;

bool separated(const Box& a, const Box& b, int gap) {
  return a.x1 + gap < b.x0 || b.x1 + gap < a.x0 || a.y1 + gap < b.y0 || b.y1 + gap < a.y0;
}

std::string format_id(std::uint64_t index) {
  if (index >= kTestIndexOffset) {
    return "test-" + std::to_string(index - kTestIndexOffset);
  }
  return "train-" + std::to_string(index);
}

}  // namespace

void SceneSpec::validate() const {
  if (n < 2) throw ValidationError("n", "grid side must be at least 2");
  if (k < 1) throw ValidationError("k", "channel count must be at least 1");
  if (min_count < 0 || max_count < min_count) {
    throw ValidationError("objectCountRange", "expected 0 <= min <= max");
  }
  if (2 * max_count - 1 > n * n) {
    throw ValidationError("objectCountRange", "count exceeds sequence capacity");
  }
  if (min_side < 1 || max_side < min_side || max_side > n) {
    throw ValidationError("objectSideRange", "expected 1 <= min <= max <= n");
  }
  if (signal_channels.empty()) throw ValidationError("signalChannels", "must not be empty");
  std::set<int> unique;
  for (int ch : signal_channels) {
    if (ch < 0 || ch >= k) throw ValidationError("signalChannels", "channel out of range");
    if (!unique.insert(ch).second) throw ValidationError("signalChannels", "duplicate channel");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ValidationError("noiseSigma", "must be finite and non-negative");
  }
  if (min_gap < 0) throw ValidationError("minGap", "must be non-negative");
  if (train_size < 0) throw ValidationError("trainSize", "must be non-negative");
  if (test_size < 0) throw ValidationError("testSize", "must be non-negative");
}

void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = {{"n", s.n},
       {"k", s.k},
       {"objectCountRange", {s.min_count, s.max_count}},
       {"objectSideRange", {s.min_side, s.max_side}},
       {"signalChannels", s.signal_channels},
       {"noiseSigma", s.noise_sigma},
       {"minGap", s.min_gap},
       {"seed", s.seed},
       {"trainSize", s.train_size},
       {"testSize", s.test_size}};
}

void from_json(const nlohmann::json& j, SceneSpec& s) {
  auto field = [&](const char* name, auto& out) {
    if (!j.contains(name)) return;
    try {
      j.at(name).get_to(out);
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(name, "wrong type");
    }
  };
  auto range = [&](const char* name, int& lo, int& hi) {
    std::array<int, 2> r{lo, hi};
    field(name, r);
    lo = r[0];
    hi = r[1];
  };
  field("n", s.n);
  field("k", s.k);
  range("objectCountRange", s.min_count, s.max_count);
  range("objectSideRange", s.min_side, s.max_side);
  field("signalChannels", s.signal_channels);
  field("noiseSigma", s.noise_sigma);
  field("minGap", s.min_gap);
  field("seed", s.seed);
  field("trainSize", s.train_size);
  field("testSize", s.test_size);
}

Scene generate_scene(const SceneSpec& spec, std::uint64_t index) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<int> count_dist(spec.min_count, spec.max_count);
  std::uniform_int_distribution<int> side_dist(spec.min_side, spec.max_side);
  std::normal_distribution<double> noise(0.0, 1.0);

  Scene scene;
  scene.id = format_id(index);
  scene.count = count_dist(rng);
  for (int attempt = 0; static_cast<int>(scene.gt_boxes.size()) < scene.count; ++attempt) {
    if (attempt >= kMaxPlacementAttempts) {
      throw PlacementFailure("could not place " + std::to_string(scene.count) +
                             " objects in scene " + scene.id);
    }
    const int width = side_dist(rng);
    const int height = side_dist(rng);
    const int x0 = std::uniform_int_distribution<int>(0, spec.n - width)(rng);
    const int y0 = std::uniform_int_distribution<int>(0, spec.n - height)(rng);
    const Box box = make_box(x0, y0, x0 + width - 1, y0 + height - 1);
    const bool clear = std::all_of(scene.gt_boxes.begin(), scene.gt_boxes.end(),
                                   [&](const Box& other) { return separated(box, other, spec.min_gap); });
    if (clear) scene.gt_boxes.push_back(box);
  }

  scene.grid = FeatureGrid::zeros(spec.n, spec.k);
  for (int r = 0; r < spec.n; ++r) {
    for (int c = 0; c < spec.n; ++c) {
      for (int ch = 0; ch < spec.k; ++ch) {
        scene.grid.at(r, c, ch) = spec.noise_sigma > 0.0 ? spec.noise_sigma * noise(rng) : 0.0;
      }
    }
  }
  for (const Box& box : scene.gt_boxes) {
    for (int r = box.y0; r <= box.y1; ++r) {
      for (int c = box.x0; c <= box.x1; ++c) {
        for (int ch : spec.signal_channels) scene.grid.at(r, c, ch) += 1.0;
      }
    }
  }
  return scene;
}

std::uint64_t scene_index(Split split, int i) {
  return split == Split::Train ? static_cast<std::uint64_t>(i)
                               : kTestIndexOffset + static_cast<std::uint64_t>(i);
}

std::vector<Scene> generate_dataset(const SceneSpec& spec, int size, Split split) {
  spec.validate();
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(std::max(size, 0)));
  for (int i = 0; i < size; ++i) scenes.push_back(generate_scene(spec, scene_index(split, i)));
  return scenes;
}

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const Box& b : scene.gt_boxes) boxes.push_back({b.x0, b.y0, b.x1, b.y1});
  return {{"id", scene.id}, {"grid", scene.grid}, {"boxes", boxes}, {"count", scene.count}};
}

Scene scene_from_json(const nlohmann::json& j, std::size_t line) {
  Scene scene;
  try {
    scene.id = j.contains("id") ? j.at("id").get<std::string>() : std::to_string(line);
    scene.grid = j.at("grid").get<FeatureGrid>();
    for (const auto& b : j.at("boxes")) {
      const auto c = b.get<std::array<int, 4>>();
      const Box box = make_box(c[0], c[1], c[2], c[3]);
      if (box.x0 > box.x1 || box.y0 > box.y1 || !box.inside_grid(scene.grid.n())) {
        throw ValidationError("boxes", "box outside grid on line " + std::to_string(line + 1));
      }
      scene.gt_boxes.push_back(box);
    }
    scene.count = j.at("count").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("dataset", "line " + std::to_string(line + 1) + ": " + e.what());
  }
  if (scene.count != static_cast<int>(scene.gt_boxes.size())) {
    throw ValidationError("count", "line " + std::to_string(line + 1) +
                                       ": count does not match number of boxes");
  }
  return scene;
}

void write_dataset(const std::filesystem::path& path, const std::vector<Scene>& scenes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const Scene& s : scenes) out << scene_to_json(s).dump() << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<Scene> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Scene> scenes;
  std::string line;
  for (std::size_t i = 0; std::getline(in, line); ++i) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("dataset", "line " + std::to_string(i + 1) + ": " + e.what());
    }
    scenes.push_back(scene_from_json(j, i));
  }
  return scenes;
}

}  // namespace lstm_cctc
