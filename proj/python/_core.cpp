#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "lstm_cctc/cctc.hpp"
#include "lstm_cctc/errors.hpp"
#include "lstm_cctc/eval.hpp"
#include "lstm_cctc/grid.hpp"
#include "lstm_cctc/pipeline.hpp"
#include "lstm_cctc/proposals.hpp"
#include "lstm_cctc/synth.hpp"
#include "lstm_cctc/train.hpp"

namespace py = pybind11;
using namespace lstm_cctc;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using BoxTuple = std::tuple<int, int, int, int>;

namespace {

FrameLogProbs to_log_probs(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw DimensionMismatch("log_probs must have shape (T, 2)");
  FrameLogProbs lp;
  auto r = a.unchecked<2>();
  for (py::ssize_t t = 0; t < r.shape(0); ++t) lp.rows.push_back({r(t, 0), r(t, 1)});
  return lp;
}

Array matrix(const std::vector<double>& data, py::ssize_t rows, py::ssize_t cols) {
  Array out({rows, cols});
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

std::vector<std::tuple<int, int>> runs_of(const Alignment& a) {
  std::vector<std::tuple<int, int>> out;
  for (const Run& r : a.runs) out.emplace_back(r.start, r.end);
  return out;
}

Box to_box(const BoxTuple& b) {
  return make_box(std::get<0>(b), std::get<1>(b), std::get<2>(b), std::get<3>(b));
}

std::vector<Box> to_boxes(const std::vector<BoxTuple>& boxes) {
  std::vector<Box> out;
  for (const auto& b : boxes) out.push_back(to_box(b));
  return out;
}

FeatureGrid to_grid(const Array& a) {
  if (a.ndim() != 3 || a.shape(0) != a.shape(1)) {
    throw DimensionMismatch("grid must have shape (n, n, k)");
  }
  return FeatureGrid(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(2)),
                     std::vector<double>(a.data(), a.data() + a.size()));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "LSTM-CCTC count-based region proposals";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  m.def(
      "serialize",
      [](const Array& grid, const std::string& order, int count) {
        const SequenceSample s = serialize(to_grid(grid), parse_scan_order(order), count);
        return matrix(s.frames, s.steps, s.dims);
      },
      py::arg("grid"), py::arg("order"), py::arg("count") = 0,
      "Flatten an (n, n, k) grid into (n*n, k) frames in the given scan order.");

  m.def(
      "deserialize",
      [](const Array& frames, int n, const std::string& order) {
        if (frames.ndim() != 2) throw DimensionMismatch("frames must have shape (T, k)");
        SequenceSample s;
        s.steps = static_cast<int>(frames.shape(0));
        s.dims = static_cast<int>(frames.shape(1));
        s.frames.assign(frames.data(), frames.data() + frames.size());
        s.order = parse_scan_order(order);
        const FeatureGrid g = deserialize(s, n);
        Array out({n, n, g.k()});
        std::copy(g.values().begin(), g.values().end(), out.mutable_data());
        return out;
      },
      py::arg("frames"), py::arg("n"), py::arg("order"));

  m.def(
      "index_to_coord",
      [](const std::string& order, int t, int n) {
        const Cell c = index_to_coord(parse_scan_order(order), t, n);
        return std::make_tuple(c.row, c.col);
      },
      py::arg("order"), py::arg("t"), py::arg("n"));

  m.def(
      "coord_to_index",
      [](const std::string& order, int row, int col, int n) {
        return coord_to_index(parse_scan_order(order), Cell{row, col}, n);
      },
      py::arg("order"), py::arg("row"), py::arg("col"), py::arg("n"));

  m.def(
      "cctc_loss",
      [](const Array& log_probs, int count) {
        const LossResult r = cctc_loss(to_log_probs(log_probs), count);
        std::vector<double> flat;
        for (const auto& row : r.d_logits) flat.insert(flat.end(), row.begin(), row.end());
        return std::make_tuple(r.loss, matrix(flat, static_cast<py::ssize_t>(r.d_logits.size()), 2));
      },
      py::arg("log_probs"), py::arg("count"),
      "Negative log-likelihood of the count and its gradient with respect to the logits.");

  m.def(
      "brute_force_log_likelihood",
      [](const Array& log_probs, int count) {
        return brute_force_log_likelihood(to_log_probs(log_probs), count);
      },
      py::arg("log_probs"), py::arg("count"));

  m.def(
      "decode_best_path",
      [](const Array& log_probs) {
        const BestPath b = decode_best_path(to_log_probs(log_probs));
        return std::make_tuple(b.count, runs_of(b.alignment));
      },
      py::arg("log_probs"), "Returns (count, [(start, end), ...]).");

  m.def(
      "decode_constrained",
      [](const Array& log_probs, int count) {
        return runs_of(decode_constrained(to_log_probs(log_probs), count));
      },
      py::arg("log_probs"), py::arg("count"));

  m.def(
      "generate_proposals",
      [](int row, int col, int n) {
        std::vector<BoxTuple> out;
        for (const Box& b : generate_proposals(CriticalPoint{row, col, ScanOrder::RowMajorForward, 0.0}, n)) {
          out.emplace_back(b.x0, b.y0, b.x1, b.y1);
        }
        return out;
      },
      py::arg("row"), py::arg("col"), py::arg("n"), "Boxes (x0, y0, x1, y1) grown around a cell.");

  m.def(
      "iou", [](const BoxTuple& a, const BoxTuple& b) { return iou(to_box(a), to_box(b)); },
      py::arg("a"), py::arg("b"));

  m.def(
      "recall_curve",
      [](const std::vector<std::vector<BoxTuple>>& proposals,
         const std::vector<std::vector<BoxTuple>>& ground_truth, const std::vector<double>& thresholds) {
        std::vector<std::vector<Box>> p;
        std::vector<std::vector<Box>> g;
        for (const auto& img : proposals) p.push_back(to_boxes(img));
        for (const auto& img : ground_truth) g.push_back(to_boxes(img));
        std::optional<std::vector<std::tuple<double, double>>> out;
        if (auto curve = recall_curve(p, g, thresholds)) {
          out.emplace();
          for (const auto& pt : *curve) out->emplace_back(pt.threshold, pt.recall);
        }
        return out;
      },
      py::arg("proposals"), py::arg("ground_truth"), py::arg("thresholds") = kDefaultRecallThresholds);

  m.def(
      "generate_scene",
      [](const std::string& spec_json, std::uint64_t index) {
        const SceneSpec spec = nlohmann::json::parse(spec_json).get<SceneSpec>();
        return scene_to_json(generate_scene(spec, index)).dump();
      },
      py::arg("spec_json"), py::arg("index"));

  m.def(
      "train",
      [](const std::string& dataset, const std::string& config_json, const std::string& checkpoint) {
        const TrainConfig cfg = nlohmann::json::parse(config_json).get<TrainConfig>();
        cfg.validate();
        int dropped = 0;
        const auto scenes = filter_feasible(read_dataset(dataset), dropped);
        if (scenes.empty()) throw ValidationError("data", "training set is empty");
        TrainState state = init_state(scenes.front().grid.k(), cfg);
        TrainLog log;
        {
          py::gil_scoped_release release;
          log = train_loop(state, scenes, cfg);
        }
        save_checkpoint(checkpoint, state, cfg);
        return train_log_csv(log);
      },
      py::arg("dataset"), py::arg("config_json"), py::arg("checkpoint"),
      "Train on a JSON-lines dataset, write the checkpoint, return the CSV log.");

  m.def(
      "propose",
      [](const std::string& checkpoint, const std::string& scene_json, const std::string& decode) {
        const TrainState state = load_checkpoint(checkpoint);
        const Scene scene = scene_from_json(nlohmann::json::parse(scene_json), 0);
        return proposals_to_json(propose(state.model, scene, kAllScanOrders, parse_decode_mode(decode))).dump();
      },
      py::arg("checkpoint"), py::arg("scene_json"), py::arg("decode") = "best_path");
}
