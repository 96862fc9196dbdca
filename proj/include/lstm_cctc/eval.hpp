#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lstm_cctc/box.hpp"

namespace lstm_cctc {

struct RecallPoint {
  double threshold = 0.0;
  double recall = 0.0;
};

// Fraction of ground-truth boxes covered by at least one proposal with
// IoU >= threshold, per threshold. Proposals may cover several boxes.
// Images are aligned by index. Returns nullopt when there is no ground truth.
std::optional<std::vector<RecallPoint>> recall_curve(
    std::span<const std::vector<Box>> proposals, std::span<const std::vector<Box>> ground_truth,
    std::span<const double> thresholds);

// One positive (image, class) pair: the top candidate, if any, and the
// ground-truth boxes of that class in that image.
struct CorLocItem {
  std::optional<Box> candidate;
  std::vector<Box> ground_truth;
};

inline constexpr double kCorLocThreshold = 0.5;

double corloc(std::span<const CorLocItem> items);

struct Detection {
  std::size_t image = 0;
  Box box;
};

enum class ApMode { AllPoint, Voc11Point };

std::string_view to_string(ApMode mode);
ApMode parse_ap_mode(std::string_view name);

struct ApResult {
  double ap = 0.0;
  bool has_ground_truth = true;
};

// VOC-style AP for one class. Detections are ranked by descending score with
// ties kept in input order; each is a true positive if its best-overlapping
// unmatched ground-truth box reaches iou_threshold.
ApResult average_precision(std::span<const Detection> detections,
                           std::span<const std::vector<Box>> ground_truth,
                           double iou_threshold = 0.5, ApMode mode = ApMode::AllPoint);

// Per-image boxes tagged with a class id.
struct LabeledBoxes {
  std::vector<Box> boxes;
  std::vector<int> classes;
};

struct EvalReport {
  std::vector<RecallPoint> recall;
  bool recall_defined = false;
  double corloc = 0.0;
  std::map<int, double> ap_per_class;
  std::vector<int> classes_without_ground_truth;
  double map = 0.0;
  double mean_proposals = 0.0;
  ApMode ap_mode = ApMode::AllPoint;
};

inline const std::vector<double> kDefaultRecallThresholds = {0.5, 0.6, 0.7, 0.8, 0.9};

// Scores proposals against ground truth, image by image. Proposals carry
// class ids; CorLoc uses each image's top-scoring proposal of the class.
EvalReport evaluate(std::span<const LabeledBoxes> proposals,
                    std::span<const LabeledBoxes> ground_truth,
                    std::span<const double> thresholds = kDefaultRecallThresholds,
                    ApMode mode = ApMode::AllPoint);

nlohmann::json report_to_json(const EvalReport& report);
std::string recall_csv(const EvalReport& report);

}  // namespace lstm_cctc
