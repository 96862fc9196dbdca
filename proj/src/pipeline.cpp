#include "lstm_cctc/pipeline.hpp"

#include "lstm_cctc/errors.hpp"

namespace lstm_cctc {

std::string_view to_string(DecodeMode mode) {
  return mode == DecodeMode::BestPath ? "best_path" : "constrained";
}

DecodeMode parse_decode_mode(std::string_view name) {
  if (name == "best_path") return DecodeMode::BestPath;
  if (name == "constrained") return DecodeMode::Constrained;
  throw ValidationError("decode", "expected best_path or constrained");
}

ImageProposals propose(const Model& model, const Scene& scene, std::span<const ScanOrder> orders,
                       DecodeMode mode) {
  if (scene.grid.k() != model.input_size()) {
    throw DimensionMismatch("scene " + scene.id + " has " + std::to_string(scene.grid.k()) +
                            " channels, model expects " + std::to_string(model.input_size()));
  }
  ImageProposals out;
  out.image = scene.id;
  out.predicted_counts.fill(-1);
  const int n = scene.grid.n();
  for (ScanOrder order : orders) {
    const SequenceSample sample = serialize(scene.grid, order, scene.count, scene.id);
    DecodedOrder d;
    d.order = order;
    d.log_probs = forward(model.stack(order), model.head, sample).log_probs;
    if (mode == DecodeMode::BestPath) {
      BestPath best = decode_best_path(d.log_probs);
      out.predicted_counts[index_of(order)] = best.count;
      d.alignment = std::move(best.alignment);
    } else {
      d.alignment = decode_constrained(d.log_probs, scene.count);
      out.predicted_counts[index_of(order)] = static_cast<int>(d.alignment.runs.size());
    }
    out.decoded.push_back(std::move(d));
  }
  out.points = to_critical_points(out.decoded, n);
  out.boxes = generate_proposals(out.points, n);
  return out;
}

nlohmann::json proposals_to_json(const ImageProposals& p, double scale) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const Box& b : p.boxes) boxes.push_back({b.x0, b.y0, b.x1, b.y1, b.score});
  return {{"image", p.image}, {"scale", scale}, {"boxes", std::move(boxes)}};
}

nlohmann::json alignment_to_json(ScanOrder order, const Alignment& alignment) {
  nlohmann::json runs = nlohmann::json::array();
  for (const Run& r : alignment.runs) runs.push_back({r.start, r.end});
  return {{"order", std::string(to_string(order))},
          {"runs", std::move(runs)},
          {"count", alignment.runs.size()}};
}

ProposalRecord proposal_record_from_json(const nlohmann::json& j) {
  ProposalRecord rec;
  try {
    rec.image = j.at("image").get<std::string>();
    for (const auto& b : j.at("boxes")) {
      if (!b.is_array() || b.size() < 4 || b.size() > 5) {
        throw ValidationError("boxes", "expected [x0,y0,x1,y1(,score)]");
      }
      const double score = b.size() == 5 ? b[4].get<double>() : 0.0;
      rec.boxes.push_back(make_box(b[0].get<int>(), b[1].get<int>(), b[2].get<int>(),
                                   b[3].get<int>(), score));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("proposals", e.what());
  }
  return rec;
}

}  // namespace lstm_cctc
