#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lstm_cctc/net.hpp"
#include "lstm_cctc/proposals.hpp"
#include "lstm_cctc/synth.hpp"

namespace lstm_cctc {

enum class DecodeMode {
  BestPath,     // count read off the frame-wise argmax
  Constrained,  // count taken from the scene label
};

std::string_view to_string(DecodeMode mode);
DecodeMode parse_decode_mode(std::string_view name);

struct ImageProposals {
  std::string image;
  std::vector<DecodedOrder> decoded;
  std::array<int, 4> predicted_counts{};  // per scan order; -1 when not decoded
  std::vector<CriticalPoint> points;
  std::vector<Box> boxes;
};

// Runs the selected scan orders through the model, decodes each, merges the
// critical points and grows proposals around them.
ImageProposals propose(const Model& model, const Scene& scene, std::span<const ScanOrder> orders,
                       DecodeMode mode = DecodeMode::BestPath);

// {"image": id, "scale": s, "boxes": [[x0,y0,x1,y1,score],...]}
nlohmann::json proposals_to_json(const ImageProposals& p, double scale = 1.0);

// {"order": str, "runs": [[s,e],...], "count": int}
nlohmann::json alignment_to_json(ScanOrder order, const Alignment& alignment);

struct ProposalRecord {
  std::string image;
  std::vector<Box> boxes;
};
ProposalRecord proposal_record_from_json(const nlohmann::json& j);

}  // namespace lstm_cctc
