#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lstm_cctc/errors.hpp"
#include "lstm_cctc/eval.hpp"
#include "lstm_cctc/pipeline.hpp"
#include "lstm_cctc/synth.hpp"
#include "lstm_cctc/train.hpp"

#ifndef LSTM_CCTC_VERSION
#define LSTM_CCTC_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lstm_cctc;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = "out";
};

// Config files may be a bare object or a run manifest with a "config" section.
std::optional<json> load_config(const std::string& path) {
  if (path.empty()) return std::nullopt;
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config", e.what());
  }
  if (!j.is_object()) throw ValidationError("config", "expected a JSON object");
  if (j.contains("command") && j.contains("config")) return j.at("config");
  return j;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

void write_lines(const fs::path& path, const std::vector<json>& rows) {
  std::string text;
  for (const auto& r : rows) text += r.dump() + '\n';
  write_text(path, text);
}

class Run {
 public:
  Run(std::string command, const Globals& g) : command_(std::move(command)), out_(g.out) {
    fs::create_directories(out_);
  }

  fs::path out(const std::string& name) {
    fs::path p = out_ / name;
    outputs_.push_back(p.string());
    return p;
  }
  void input(const std::string& key, const std::string& path) { inputs_[key] = path; }

  void finish(const json& config, std::uint64_t seed, json extra = json::object()) {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m = {{"command", command_},   {"config", config},   {"seed", seed},
              {"inputs", inputs_},     {"outputs", outputs_}, {"version", LSTM_CCTC_VERSION},
              {"duration_seconds", seconds}};
    m.update(extra);
    write_text(out_ / "manifest.json", m.dump(2) + '\n');
  }

 private:
  std::string command_;
  fs::path out_;
  json inputs_ = json::object();
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path dataset_file(const std::string& path, const char* default_name) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= default_name;
  return p;
}

std::vector<ScanOrder> parse_orders(const std::vector<std::string>& names) {
  if (names.empty()) return {kAllScanOrders.begin(), kAllScanOrders.end()};
  std::vector<ScanOrder> orders;
  for (const auto& n : names) orders.push_back(parse_scan_order(n));
  return orders;
}

void check_dims(const Model& model, const std::vector<Scene>& scenes) {
  for (const Scene& s : scenes) {
    if (s.grid.k() != model.input_size()) {
      throw DimensionMismatch("scene " + s.id + " has " + std::to_string(s.grid.k()) +
                              " channels, checkpoint expects " + std::to_string(model.input_size()));
    }
  }
}

// gen-data ---------------------------------------------------------------

struct GenDataArgs {
  std::string spec;
};

void gen_data(const Globals& g, const GenDataArgs& a) {
  SceneSpec spec;
  json spec_json = json::object();
  if (auto j = load_config(a.spec)) spec_json.update(*j);
  if (g.seed) spec_json["seed"] = *g.seed;
  if (auto j = load_config(g.config)) spec_json.update(*j);
  spec = spec_json.get<SceneSpec>();
  spec.validate();

  Run run("gen-data", g);
  if (!a.spec.empty()) run.input("spec", a.spec);
  const auto train = generate_dataset(spec, spec.train_size, Split::Train);
  const auto test = generate_dataset(spec, spec.test_size, Split::Test);
  write_dataset(run.out("train.jsonl"), train);
  write_dataset(run.out("test.jsonl"), test);
  const json canonical = spec;
  run.finish(canonical, spec.seed, {{"spec_hash", hex(fnv1a(canonical.dump()))}});
  std::cout << "wrote " << train.size() << " train and " << test.size() << " test scenes to "
            << g.out << '\n';
}

// train ------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string resume;
  bool export_proposals = false;
  std::string decode = "best_path";
  TrainConfig cfg;
};

std::vector<json> proposal_rows(const Model& model, const std::vector<Scene>& scenes, DecodeMode mode) {
  std::vector<json> rows;
  for (const Scene& s : scenes) {
    rows.push_back(proposals_to_json(propose(model, s, kAllScanOrders, mode)));
  }
  return rows;
}

void train(const Globals& g, TrainArgs& a) {
  json cfg_json = a.cfg;
  if (g.seed) cfg_json["seed"] = *g.seed;
  if (auto j = load_config(g.config)) cfg_json.update(*j);
  const TrainConfig cfg = cfg_json.get<TrainConfig>();
  cfg.validate();
  const DecodeMode mode = parse_decode_mode(a.decode);

  const fs::path data_path = dataset_file(a.data, "train.jsonl");
  int dropped = 0;
  const auto scenes = filter_feasible(read_dataset(data_path), dropped);
  if (dropped > 0) std::cerr << "warning: dropped " << dropped << " infeasible scenes\n";
  if (scenes.empty()) throw ValidationError("data", "training set is empty");

  Run run("train", g);
  run.input("data", data_path.string());
  TrainState state;
  if (!a.resume.empty()) {
    run.input("resume", a.resume);
    state = load_checkpoint(a.resume);
    if (state.model.hidden_size() != cfg.hidden_size) {
      throw DimensionMismatch("checkpoint hidden size " + std::to_string(state.model.hidden_size()) +
                              " differs from hidden_size " + std::to_string(cfg.hidden_size));
    }
  } else {
    state = init_state(scenes.front().grid.k(), cfg);
  }
  check_dims(state.model, scenes);

  const fs::path ckpt = run.out("checkpoint.json");
  const fs::path log_path = run.out("train_log.csv");
  if (cfg.checkpoint_every > 0) fs::create_directories(g.out + "/checkpoints");
  if (a.export_proposals) fs::create_directories(g.out + "/proposals");

  char name[64];
  const TrainLog log = train_loop(state, scenes, cfg, [&](const TrainState& s, const EpochRecord& r) {
    std::cout << "epoch " << r.epoch + 1 << " loss " << r.mean_loss << " lr " << r.learning_rate
              << '\n';
    if (cfg.checkpoint_every > 0 && s.epoch % cfg.checkpoint_every == 0) {
      std::snprintf(name, sizeof name, "checkpoints/epoch_%04d.json", s.epoch);
      save_checkpoint(run.out(name), s, cfg);
    }
    if (a.export_proposals && s.epoch >= cfg.pretrain_epochs) {
      std::snprintf(name, sizeof name, "proposals/epoch_%04d.jsonl", s.epoch);
      write_lines(run.out(name), proposal_rows(s.model, scenes, mode));
    }
  });
  save_checkpoint(ckpt, state, cfg);
  write_text(log_path, train_log_csv(log));
  json manifest_cfg = cfg;
  manifest_cfg["decode"] = a.decode;
  manifest_cfg["export_proposals"] = a.export_proposals;
  run.finish(manifest_cfg, cfg.seed, {{"dropped_infeasible", dropped}, {"final_epoch", state.epoch}});
}

// propose ----------------------------------------------------------------

struct ProposeArgs {
  std::string checkpoint;
  std::string data;
  std::string decode = "best_path";
  std::vector<std::string> orders;
  double scale = 1.0;
  bool alignments = false;
};

void propose_cmd(const Globals& g, ProposeArgs& a) {
  json opts = {{"decode", a.decode}, {"orders", a.orders}, {"scale", a.scale}, {"alignments", a.alignments}};
  if (auto j = load_config(g.config)) {
    for (const char* key : {"decode", "orders", "scale", "alignments"}) {
      if (j->contains(key)) opts[key] = j->at(key);
    }
  }
  try {
    a.decode = opts.at("decode").get<std::string>();
    a.orders = opts.at("orders").get<std::vector<std::string>>();
    a.scale = opts.at("scale").get<double>();
    a.alignments = opts.at("alignments").get<bool>();
  } catch (const json::exception& e) {
    throw ValidationError("config", e.what());
  }
  const DecodeMode mode = parse_decode_mode(a.decode);
  const auto orders = parse_orders(a.orders);
  if (!(a.scale > 0.0)) throw ValidationError("scale", "must be positive");

  const TrainState state = load_checkpoint(a.checkpoint);
  const fs::path data_path = dataset_file(a.data, "test.jsonl");
  const auto scenes = read_dataset(data_path);
  check_dims(state.model, scenes);

  Run run("propose", g);
  run.input("checkpoint", a.checkpoint);
  run.input("data", data_path.string());
  std::vector<json> rows;
  std::vector<json> aligns;
  for (const Scene& s : scenes) {
    const ImageProposals p = propose(state.model, s, orders, mode);
    rows.push_back(proposals_to_json(p, a.scale));
    if (a.alignments) {
      json per_order = json::array();
      for (const auto& d : p.decoded) per_order.push_back(alignment_to_json(d.order, d.alignment));
      aligns.push_back({{"image", s.id}, {"alignments", per_order}});
    }
  }
  write_lines(run.out("proposals.jsonl"), rows);
  if (a.alignments) write_lines(run.out("alignments.jsonl"), aligns);
  run.finish(opts, state.model.seed);
  std::cout << "wrote proposals for " << rows.size() << " images\n";
}

// eval -------------------------------------------------------------------

struct EvalArgs {
  std::string proposals;
  std::string data;
  std::string ap_mode = "all_point";
};

void eval_cmd(const Globals& g, EvalArgs& a) {
  if (auto j = load_config(g.config); j && j->contains("ap_mode")) {
    if (!j->at("ap_mode").is_string()) throw ValidationError("ap_mode", "expected a string");
    a.ap_mode = j->at("ap_mode").get<std::string>();
  }
  const ApMode mode = parse_ap_mode(a.ap_mode);
  const json opts = {{"ap_mode", a.ap_mode}};

  const fs::path data_path = dataset_file(a.data, "test.jsonl");
  const auto scenes = read_dataset(data_path);
  std::ifstream in(a.proposals);
  if (!in) throw Error("cannot open " + a.proposals);
  std::map<std::string, ProposalRecord> records;
  std::string line;
  for (std::size_t i = 0; std::getline(in, line); ++i) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("proposals", "line " + std::to_string(i + 1) + ": " + e.what());
    }
    ProposalRecord rec = proposal_record_from_json(j);
    const std::string id = rec.image;
    if (!records.emplace(id, std::move(rec)).second) {
      throw ValidationError("proposals", "duplicate image id " + id);
    }
  }

  std::vector<std::string> missing;
  std::set<std::string> scene_ids;
  for (const Scene& s : scenes) {
    scene_ids.insert(s.id);
    if (!records.count(s.id)) missing.push_back(s.id + " (no proposals)");
  }
  for (const auto& [id, rec] : records) {
    if (!scene_ids.count(id)) missing.push_back(id + " (not in dataset)");
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ValidationError("ids", "image ids do not align: " + list);
  }

  std::vector<LabeledBoxes> props;
  std::vector<LabeledBoxes> gts;
  for (const Scene& s : scenes) {
    const auto& rec = records.at(s.id);
    props.push_back({rec.boxes, std::vector<int>(rec.boxes.size(), s.class_id)});
    gts.push_back({s.gt_boxes, std::vector<int>(s.gt_boxes.size(), s.class_id)});
  }
  const EvalReport report = evaluate(props, gts, kDefaultRecallThresholds, mode);

  Run run("eval", g);
  run.input("proposals", a.proposals);
  run.input("data", data_path.string());
  write_text(run.out("report.json"), report_to_json(report).dump(2) + '\n');
  write_text(run.out("recall.csv"), recall_csv(report));
  run.finish(opts, g.seed.value_or(0));
  std::cout << "corloc " << report.corloc << " map " << report.map << " mean_proposals "
            << report.mean_proposals << '\n';
}

template <class T>
void flag(CLI::App* app, const std::string& name, T& field, const std::string& help) {
  app->add_option("--" + name, field, help)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSTM-CCTC count-based region proposals"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--config", g.config, "JSON file whose keys override flags (a run manifest works too)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.fallthrough();

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic train/test dataset");
  gen_cmd->add_option("--spec", gen.spec, "dataset spec JSON");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train the four scan-order LSTMs with the CCTC loss");
  train_cmd->add_option("--data", tr.data, "train.jsonl or a directory holding it")->required();
  train_cmd->add_option("--resume", tr.resume, "checkpoint to continue from");
  train_cmd->add_flag("--export_proposals", tr.export_proposals,
                      "write training-set proposals after every epoch past pretrain_epochs");
  train_cmd->add_option("--decode", tr.decode, "best_path or constrained")->capture_default_str();
  flag(train_cmd, "learning_rate", tr.cfg.learning_rate, "initial learning rate");
  flag(train_cmd, "lr_drop_epoch", tr.cfg.lr_drop_epoch, "epoch at which the rate drops");
  flag(train_cmd, "dropped_rate", tr.cfg.dropped_rate, "learning rate after the drop");
  flag(train_cmd, "momentum", tr.cfg.momentum, "SGD momentum");
  flag(train_cmd, "weight_decay", tr.cfg.weight_decay, "L2 weight decay");
  flag(train_cmd, "batch_size", tr.cfg.batch_size, "scenes per step");
  flag(train_cmd, "epochs", tr.cfg.epochs, "total epochs");
  flag(train_cmd, "pretrain_epochs", tr.cfg.pretrain_epochs, "epochs before proposals are exported");
  flag(train_cmd, "hidden_size", tr.cfg.hidden_size, "LSTM hidden size");
  flag(train_cmd, "init_stddev", tr.cfg.init_stddev, "weight init standard deviation");
  flag(train_cmd, "clip_norm", tr.cfg.clip_norm, "global gradient norm clip, 0 disables");
  flag(train_cmd, "checkpoint_every", tr.cfg.checkpoint_every, "save a checkpoint every N epochs");

  ProposeArgs pr;
  auto* propose_sub = app.add_subcommand("propose", "decode scenes and emit proposal boxes");
  propose_sub->add_option("--checkpoint", pr.checkpoint, "trained checkpoint")->required();
  propose_sub->add_option("--data", pr.data, "scenes JSON-lines file or directory")->required();
  propose_sub->add_option("--decode", pr.decode, "best_path or constrained")->capture_default_str();
  propose_sub->add_option("--orders", pr.orders, "scan orders to decode (default: all four)");
  propose_sub->add_option("--scale", pr.scale, "feature-map to image scale factor")->capture_default_str();
  propose_sub->add_flag("--alignments", pr.alignments, "also write decoded alignments");

  EvalArgs ev;
  auto* eval_sub = app.add_subcommand("eval", "score proposals against ground truth");
  eval_sub->add_option("--proposals", ev.proposals, "proposals JSON-lines file")->required();
  eval_sub->add_option("--data", ev.data, "scenes JSON-lines file or directory")->required();
  eval_sub->add_option("--ap_mode", ev.ap_mode, "all_point or voc11")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*gen_cmd) gen_data(g, gen);
    if (*train_cmd) train(g, tr);
    if (*propose_sub) propose_cmd(g, pr);
    if (*eval_sub) eval_cmd(g, ev);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DimensionMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
