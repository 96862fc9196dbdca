#include "lstm_cctc/eval.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "lstm_cctc/errors.hpp"

namespace lstm_cctc {

double iou(const Box& a, const Box& b) {
  const int ix0 = std::max(a.x0, b.x0);
  const int iy0 = std::max(a.y0, b.y0);
  const int ix1 = std::min(a.x1, b.x1);
  const int iy1 = std::min(a.y1, b.y1);
  if (ix1 < ix0 || iy1 < iy0) return 0.0;
  const double inter = static_cast<double>(ix1 - ix0 + 1) * (iy1 - iy0 + 1);
  return inter / (static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter);
}

std::optional<std::vector<RecallPoint>> recall_curve(
    std::span<const std::vector<Box>> proposals, std::span<const std::vector<Box>> ground_truth,
    std::span<const double> thresholds) {
  if (proposals.size() != ground_truth.size()) {
    throw DimensionMismatch("proposal and ground-truth image counts differ");
  }
  std::vector<double> best_overlap;
  for (std::size_t img = 0; img < ground_truth.size(); ++img) {
    for (const Box& gt : ground_truth[img]) {
      double best = 0.0;
      for (const Box& p : proposals[img]) best = std::max(best, iou(p, gt));
      best_overlap.push_back(best);
    }
  }
  if (best_overlap.empty()) return std::nullopt;
  std::vector<RecallPoint> curve;
  for (double tau : thresholds) {
    if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("thresholds", "must lie in (0, 1]");
    const auto hits = std::count_if(best_overlap.begin(), best_overlap.end(),
                                    [tau](double o) { return o >= tau; });
    curve.push_back({tau, static_cast<double>(hits) / static_cast<double>(best_overlap.size())});
  }
  return curve;
}

double corloc(std::span<const CorLocItem> items) {
  if (items.empty()) return 0.0;
  std::size_t hits = 0;
  for (const CorLocItem& item : items) {
    if (!item.candidate) continue;
    const bool hit = std::any_of(item.ground_truth.begin(), item.ground_truth.end(),
                                 [&](const Box& gt) { return iou(*item.candidate, gt) >= kCorLocThreshold; });
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(items.size());
}

std::string_view to_string(ApMode mode) {
  return mode == ApMode::AllPoint ? "all_point" : "voc11";
}

ApMode parse_ap_mode(std::string_view name) {
  if (name == "all_point") return ApMode::AllPoint;
  if (name == "voc11") return ApMode::Voc11Point;
  throw ValidationError("ap_mode", "expected all_point or voc11");
}

ApResult average_precision(std::span<const Detection> detections,
                           std::span<const std::vector<Box>> ground_truth, double iou_threshold,
                           ApMode mode) {
  std::size_t total_gt = 0;
  std::vector<std::vector<bool>> matched(ground_truth.size());
  for (std::size_t img = 0; img < ground_truth.size(); ++img) {
    total_gt += ground_truth[img].size();
    matched[img].assign(ground_truth[img].size(), false);
  }
  if (total_gt == 0) return {0.0, false};

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].box.score > detections[b].box.score;
  });

  std::vector<double> recall;
  std::vector<double> precision;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t idx : order) {
    const Detection& det = detections[idx];
    if (det.image >= ground_truth.size()) throw DimensionMismatch("detection image out of range");
    const auto& gts = ground_truth[det.image];
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const double o = iou(det.box, gts[j]);
      if (o > best) {
        best = o;
        best_j = j;
      }
    }
    if (best >= iou_threshold && !matched[det.image][best_j]) {
      matched[det.image][best_j] = true;
      ++tp;
    } else {
      ++fp;
    }
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }

  if (mode == ApMode::Voc11Point) {
    double ap = 0.0;
    for (int i = 0; i <= 10; ++i) {
      const double t = i / 10.0;
      double p = 0.0;
      for (std::size_t k = 0; k < recall.size(); ++k) {
        if (recall[k] >= t) p = std::max(p, precision[k]);
      }
      ap += p / 11.0;
    }
    return {ap, true};
  }

  std::vector<double> mrec{0.0};
  std::vector<double> mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  return {ap, true};
}

EvalReport evaluate(std::span<const LabeledBoxes> proposals,
                    std::span<const LabeledBoxes> ground_truth, std::span<const double> thresholds,
                    ApMode mode) {
  if (proposals.size() != ground_truth.size()) {
    throw DimensionMismatch("proposal and ground-truth image counts differ");
  }
  EvalReport report;
  report.ap_mode = mode;
  const std::size_t images = ground_truth.size();

  std::vector<std::vector<Box>> prop_boxes;
  std::vector<std::vector<Box>> gt_boxes;
  std::size_t total_props = 0;
  for (std::size_t i = 0; i < images; ++i) {
    prop_boxes.push_back(proposals[i].boxes);
    gt_boxes.push_back(ground_truth[i].boxes);
    total_props += proposals[i].boxes.size();
  }
  report.mean_proposals = images ? static_cast<double>(total_props) / images : 0.0;
  if (auto curve = recall_curve(prop_boxes, gt_boxes, thresholds)) {
    report.recall = std::move(*curve);
    report.recall_defined = true;
  }

  std::set<int> classes;
  for (const auto& img : ground_truth) classes.insert(img.classes.begin(), img.classes.end());
  for (const auto& img : proposals) classes.insert(img.classes.begin(), img.classes.end());

  std::vector<CorLocItem> corloc_items;
  for (int cls : classes) {
    std::vector<std::vector<Box>> gt_of_class(images);
    std::vector<Detection> dets;
    for (std::size_t i = 0; i < images; ++i) {
      const auto& gt = ground_truth[i];
      for (std::size_t j = 0; j < gt.boxes.size(); ++j) {
        if (gt.classes.at(j) == cls) gt_of_class[i].push_back(gt.boxes[j]);
      }
      std::optional<Box> top;
      const auto& pr = proposals[i];
      for (std::size_t j = 0; j < pr.boxes.size(); ++j) {
        if (pr.classes.at(j) != cls) continue;
        dets.push_back({i, pr.boxes[j]});
        if (!top || pr.boxes[j].score > top->score) top = pr.boxes[j];
      }
      if (!gt_of_class[i].empty()) corloc_items.push_back({top, gt_of_class[i]});
    }
    const ApResult ap = average_precision(dets, gt_of_class, 0.5, mode);
    report.ap_per_class[cls] = ap.ap;
    if (!ap.has_ground_truth) report.classes_without_ground_truth.push_back(cls);
  }
  report.corloc = corloc(corloc_items);
  if (!report.ap_per_class.empty()) {
    double sum = 0.0;
    for (const auto& [cls, ap] : report.ap_per_class) sum += ap;
    report.map = sum / static_cast<double>(report.ap_per_class.size());
  }
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json recall = nlohmann::json::array();
  for (const auto& p : report.recall) recall.push_back({{"iou", p.threshold}, {"recall", p.recall}});
  nlohmann::json ap = nlohmann::json::object();
  for (const auto& [cls, value] : report.ap_per_class) ap[std::to_string(cls)] = value;
  return {{"recall", report.recall_defined ? recall : nlohmann::json(nullptr)},
          {"corloc", report.corloc},
          {"ap_per_class", ap},
          {"classes_without_ground_truth", report.classes_without_ground_truth},
          {"map", report.map},
          {"mean_proposals", report.mean_proposals},
          {"ap_mode", std::string(to_string(report.ap_mode))}};
}

std::string recall_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "iou,recall\n";
  for (const auto& p : report.recall) out << p.threshold << ',' << p.recall << '\n';
  return out.str();
}

}  // namespace lstm_cctc
