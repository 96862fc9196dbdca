#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "lstm_cctc/errors.hpp"
#include "lstm_cctc/eval.hpp"
#include "lstm_cctc/synth.hpp"

using namespace lstm_cctc;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("lstm_cctc_synth_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Synth, NoiselessSceneIsIndicator) {
  SceneSpec spec;
  spec.noise_sigma = 0.0;
  spec.min_count = spec.max_count = 1;
  const Scene s = generate_scene(spec, 3);
  ASSERT_EQ(s.gt_boxes.size(), 1u);
  const Box& b = s.gt_boxes[0];
  for (int r = 0; r < spec.n; ++r) {
    for (int c = 0; c < spec.n; ++c) {
      const bool inside = b.contains(Cell{r, c});
      for (int ch = 0; ch < spec.k; ++ch) {
        const bool signal = ch < 4;
        EXPECT_EQ(s.grid.at(r, c, ch), inside && signal ? 1.0 : 0.0);
      }
    }
  }
}

TEST(Synth, Deterministic) {
  SceneSpec spec;
  spec.seed = 3;
  const Scene a = generate_scene(spec, 12);
  const Scene b = generate_scene(spec, 12);
  EXPECT_EQ(a.grid, b.grid);
  EXPECT_EQ(scene_to_json(a), scene_to_json(b));
  EXPECT_NE(generate_scene(spec, 13).grid, a.grid);
}

TEST(Synth, EmptyCountRange) {
  SceneSpec spec;
  spec.min_count = spec.max_count = 0;
  const Scene s = generate_scene(spec, 0);
  EXPECT_EQ(s.count, 0);
  EXPECT_TRUE(s.gt_boxes.empty());
}

TEST(Synth, CountsMatchBoxesAndNeverOverlap) {
  SceneSpec spec;
  for (const Scene& s : generate_dataset(spec, 200, Split::Train)) {
    ASSERT_EQ(s.count, static_cast<int>(s.gt_boxes.size()));
    ASSERT_GE(s.count, spec.min_count);
    ASSERT_LE(s.count, spec.max_count);
    for (std::size_t i = 0; i < s.gt_boxes.size(); ++i) {
      const Box& a = s.gt_boxes[i];
      ASSERT_TRUE(a.inside_grid(spec.n));
      ASSERT_GE(a.x1 - a.x0 + 1, spec.min_side);
      ASSERT_LE(a.y1 - a.y0 + 1, spec.max_side);
      for (std::size_t j = i + 1; j < s.gt_boxes.size(); ++j) {
        ASSERT_EQ(iou(a, s.gt_boxes[j]), 0.0);
      }
    }
  }
}

TEST(Synth, PlacementFailureReported) {
  SceneSpec spec;
  spec.n = 4;
  spec.min_side = spec.max_side = 4;
  spec.min_count = spec.max_count = 2;
  EXPECT_THROW(generate_scene(spec, 0), PlacementFailure);
}

TEST(Synth, ValidationNamesField) {
  SceneSpec spec;
  spec.min_count = 5;
  spec.max_count = 3;
  try {
    spec.validate();
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "objectCountRange");
  }
  spec = SceneSpec{};
  spec.signal_channels = {9};
  EXPECT_THROW(spec.validate(), ValidationError);
  spec = SceneSpec{};
  spec.max_side = 17;
  EXPECT_THROW(spec.validate(), ValidationError);
}

TEST(Synth, SpecJsonRoundTrip) {
  SceneSpec spec;
  spec.n = 12;
  spec.noise_sigma = 0.25;
  spec.signal_channels = {1, 5};
  const SceneSpec back = nlohmann::json(spec).get<SceneSpec>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(spec));
  EXPECT_THROW((nlohmann::json{{"n", "big"}}.get<SceneSpec>()), ValidationError);
}

TEST(Synth, TrainAndTestDisjoint) {
  const SceneSpec spec;
  const auto train = generate_dataset(spec, 100, Split::Train);
  const auto test = generate_dataset(spec, 100, Split::Test);
  std::set<std::string> seen;
  for (const Scene& s : train) seen.insert(scene_to_json(s).dump());
  for (const Scene& s : test) EXPECT_EQ(seen.count(scene_to_json(s).dump()), 0u);
  EXPECT_EQ(train[0].id, "train-0");
  EXPECT_EQ(test[0].id, "test-0");
}

TEST(Synth, DatasetFileRoundTripAndDeterminism) {
  SceneSpec spec;
  const auto scenes = generate_dataset(spec, 25, Split::Train);
  const auto a = temp_path("a.jsonl");
  const auto b = temp_path("b.jsonl");
  write_dataset(a, scenes);
  write_dataset(b, generate_dataset(spec, 25, Split::Train));
  EXPECT_EQ(slurp(a), slurp(b));

  const auto back = read_dataset(a);
  ASSERT_EQ(back.size(), 25u);
  std::size_t lines = 0;
  std::ifstream in(a);
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 25u);
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].grid, scenes[i].grid);
    EXPECT_EQ(back[i].count, scenes[i].count);
    EXPECT_EQ(back[i].id, scenes[i].id);
  }
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST(Synth, MalformedLinesRejected) {
  const auto p = temp_path("bad.jsonl");
  {
    std::ofstream out(p);
    out << R"({"grid": {"n": 2, "k": 1, "values": [0,0,0,0]}, "boxes": [[0,0,1,1]], "count": 2})" << '\n';
  }
  EXPECT_THROW(read_dataset(p), ValidationError);
  {
    std::ofstream out(p);
    out << "{not json\n";
  }
  EXPECT_THROW(read_dataset(p), ValidationError);
  std::filesystem::remove(p);
  EXPECT_THROW(read_dataset(p), Error);
}
