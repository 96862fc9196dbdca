#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lstm_cctc/box.hpp"
#include "lstm_cctc/grid.hpp"

namespace lstm_cctc {

// Scene generator settings. Objects are rectangles whose sides are drawn
// independently from [min_side, max_side]; signal channels read 1 + noise
// inside an object and noise elsewhere. Objects keep at least `min_gap`
// background cells between each other.
struct SceneSpec {
  int n = 16;
  int k = 8;
  int min_count = 1;
  int max_count = 3;
  int min_side = 2;
  int max_side = 4;
  std::vector<int> signal_channels = {0, 1, 2, 3};
  double noise_sigma = 0.1;
  int min_gap = 1;
  std::uint64_t seed = 42;
  int train_size = 500;
  int test_size = 100;

  // Throws ValidationError naming the first offending field.
  void validate() const;
};

void to_json(nlohmann::json& j, const SceneSpec& spec);
void from_json(const nlohmann::json& j, SceneSpec& spec);

struct Scene {
  std::string id;
  FeatureGrid grid;
  std::vector<Box> gt_boxes;
  int count = 0;
  int class_id = 0;
};

enum class Split { Train, Test };

inline constexpr int kMaxPlacementAttempts = 1000;

// Deterministic in (spec.seed, index).
Scene generate_scene(const SceneSpec& spec, std::uint64_t index);

// Train scenes use indices [0, size); test scenes a disjoint range.
std::uint64_t scene_index(Split split, int i);
std::vector<Scene> generate_dataset(const SceneSpec& spec, int size, Split split);

// JSON-lines: {"id": str, "grid": {...}, "boxes": [[x0,y0,x1,y1],...], "count": int}
nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j, std::size_t line);
void write_dataset(const std::filesystem::path& path, const std::vector<Scene>& scenes);
std::vector<Scene> read_dataset(const std::filesystem::path& path);

}  // namespace lstm_cctc
