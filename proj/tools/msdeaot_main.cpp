// msdeaot: synthetic-sequence generation, mask propagation, TTA, ensembling,
// and J&F evaluation from the command line.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "msdeaot/ensemble.hpp"
#include "msdeaot/errors.hpp"
#include "msdeaot/harness/config.hpp"
#include "msdeaot/harness/image_io.hpp"
#include "msdeaot/harness/logits_io.hpp"
#include "msdeaot/harness/synth.hpp"
#include "msdeaot/metrics.hpp"
#include "msdeaot/model.hpp"

namespace fs = std::filesystem;
using namespace msd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDimension = 3;

SyntheticSceneConfig scene_from_config(const KeyValueConfig& kv) {
  SyntheticSceneConfig cfg;
  cfg.h = kv.get_int("height", cfg.h);
  cfg.w = kv.get_int("width", cfg.w);
  cfg.frames = kv.get_int("frames", cfg.frames);
  cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  cfg.max_objects = kv.get_int("max_objects", cfg.max_objects);
  cfg.background = {static_cast<std::uint8_t>(kv.get_int("background_r", 51)),
                    static_cast<std::uint8_t>(kv.get_int("background_g", 51)),
                    static_cast<std::uint8_t>(kv.get_int("background_b", 51))};
  const int count = kv.get_int("shape_count", 1);
  bool explicit_shapes = false;
  for (int i = 0; i < count; ++i) {
    const std::string p = "shape" + std::to_string(i) + "_";
    if (!kv.has(p + "x")) continue;
    explicit_shapes = true;
    ShapeSpec s;
    s.kind = kv.get_string(p + "kind", "rectangle") == "disk"
                 ? ShapeSpec::Kind::kDisk
                 : ShapeSpec::Kind::kRectangle;
    s.x = kv.get_double(p + "x", 0);
    s.y = kv.get_double(p + "y", 0);
    s.width = kv.get_int(p + "width", 16);
    s.height = kv.get_int(p + "height", s.width);
    s.vx = kv.get_double(p + "vx", 0);
    s.vy = kv.get_double(p + "vy", 0);
    s.color = {static_cast<std::uint8_t>(kv.get_int(p + "r", 255)),
               static_cast<std::uint8_t>(kv.get_int(p + "g", 255)),
               static_cast<std::uint8_t>(kv.get_int(p + "b", 255))};
    cfg.shapes.push_back(s);
  }
  if (!explicit_shapes) randomize_shapes(cfg, count);
  return cfg;
}

ModelConfig model_config(const std::string& config_path, bool template_mode,
                         std::uint64_t seed) {
  ModelConfig cfg;
  if (!config_path.empty()) {
    const KeyValueConfig kv = KeyValueConfig::from_file(config_path);
    cfg.c16 = kv.get_int("c16", cfg.c16);
    cfg.c8 = kv.get_int("c8", cfg.c8);
    cfg.gpm_layers_16 = kv.get_int("gpm_layers_16", cfg.gpm_layers_16);
    cfg.gpm_layers_8 = kv.get_int("gpm_layers_8", cfg.gpm_layers_8);
    cfg.max_objects = kv.get_int("max_objects", cfg.max_objects);
    cfg.mem_interval = kv.get_int("mem_interval", cfg.mem_interval);
    cfg.template_mode = kv.get_bool("template_mode", cfg.template_mode);
    cfg.short_term_16 = kv.get_bool("short_term_16", cfg.short_term_16);
    cfg.short_term_8 = kv.get_bool("short_term_8", cfg.short_term_8);
    cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  }
  if (template_mode) cfg.template_mode = true;
  if (seed != 0) cfg.seed = seed;
  return cfg;
}

std::vector<double> parse_weights(const std::string& csv, std::size_t count) {
  if (csv.empty()) return std::vector<double>(count, 1.0);
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::logic_error&) {
      throw ArgumentError("bad ensemble weight: '" + tok + "'");
    }
  }
  if (out.size() != count)
    throw ArgumentError("expected " + std::to_string(count) + " ensemble weights, got " +
                        std::to_string(out.size()));
  return out;
}

std::vector<std::string> split_paths(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (out.empty()) throw ArgumentError("no input directories given");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os << text;
}

int run(int argc, char** argv) {
  CLI::App app{"MSDeAOT-style video object segmentation pipeline"};
  app.require_subcommand(1);

  std::string config_path, weights_path, out_dir, seq_dir, pred_dir, gt_dir;
  std::string inputs_csv, weights_csv, logits_out, csv_out;
  std::uint64_t seed = 0;
  bool template_mode = false, identity_variant = false;
  double tolerance = -1.0;

  auto* gen = app.add_subcommand("generate", "write a synthetic sequence");
  gen->add_option("--out", out_dir)->required();
  gen->add_option("--config", config_path);
  gen->add_option("--seed", seed);

  auto* seg = app.add_subcommand("segment", "propagate the reference mask");
  seg->add_option("--sequence", seq_dir)->required();
  seg->add_option("--out", out_dir)->required();
  seg->add_option("--config", config_path);
  seg->add_option("--weights", weights_path);
  seg->add_option("--seed", seed);
  seg->add_option("--save-logits", logits_out);
  seg->add_flag("--template-mode", template_mode);

  auto* eva = app.add_subcommand("evaluate", "score predictions against ground truth");
  eva->add_option("--pred", pred_dir)->required();
  eva->add_option("--gt", gt_dir)->required();
  eva->add_option("--out", csv_out);
  eva->add_option("--tolerance", tolerance);

  auto* ens_l = app.add_subcommand("ensemble-logits", "fuse logits directories");
  ens_l->add_option("--inputs", inputs_csv)->required();
  ens_l->add_option("--out", out_dir)->required();
  ens_l->add_option("--ensemble-weights", weights_csv);

  auto* ens_v = app.add_subcommand("ensemble-vote", "fuse mask directories by voting");
  ens_v->add_option("--inputs", inputs_csv)->required();
  ens_v->add_option("--out", out_dir)->required();
  ens_v->add_option("--ensemble-weights", weights_csv);

  auto* tta = app.add_subcommand("tta-segment", "segment under the 6 TTA variants and fuse");
  tta->add_option("--sequence", seq_dir)->required();
  tta->add_option("--out", out_dir)->required();
  tta->add_option("--config", config_path);
  tta->add_option("--weights", weights_path);
  tta->add_option("--seed", seed);
  tta->add_flag("--template-mode", template_mode);
  tta->add_flag("--identity-variant", identity_variant);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (gen->parsed()) {
    KeyValueConfig kv = config_path.empty() ? KeyValueConfig::from_string("")
                                            : KeyValueConfig::from_file(config_path);
    SyntheticSceneConfig cfg = scene_from_config(kv);
    if (seed != 0) {
      cfg.seed = seed;
      if (!kv.has("shape0_x")) randomize_shapes(cfg, kv.get_int("shape_count", 1));
    }
    generate_sequence(cfg, out_dir);
    return kExitOk;
  }

  if (seg->parsed() || tta->parsed()) {
    const ModelConfig cfg = model_config(config_path, template_mode, seed);
    Model model = weights_path.empty() ? Model::initialize(cfg)
                                       : Model::load_weights(weights_path);
    const SequenceFrames seq = load_sequence(seq_dir, cfg.max_objects);
    if (tta->parsed()) {
      const auto masks =
          tta_segment(model, seq.frames, seq.masks[0], tta_variants(identity_variant));
      save_masks(masks, out_dir);
    } else {
      const auto results = model.propagate_sequence(seq.frames, seq.masks[0]);
      std::vector<LabelMask> masks;
      std::vector<MaskLogits> logits;
      for (const auto& [m, l] : results) {
        masks.push_back(m);
        logits.push_back(l);
      }
      save_masks(masks, out_dir);
      if (!logits_out.empty()) save_logits_dir(logits, logits_out);
    }
    return kExitOk;
  }

  if (eva->parsed()) {
    const std::vector<LabelMask> preds = load_masks(pred_dir);
    const std::vector<LabelMask> gts = load_masks(gt_dir);
    const EvalReport rep = evaluate_sequence(preds, gts, tolerance);
    const std::string csv = report_to_csv(rep, fs::path(pred_dir).filename().string());
    if (csv_out.empty())
      std::cout << csv;
    else
      write_text(csv_out, csv);
    return kExitOk;
  }

  if (ens_l->parsed()) {
    const auto dirs = split_paths(inputs_csv);
    const auto weights = parse_weights(weights_csv, dirs.size());
    std::vector<std::vector<MaskLogits>> all;
    for (const auto& d : dirs) all.push_back(load_logits_dir(d));
    for (const auto& l : all)
      if (l.size() != all[0].size())
        throw DimensionError("logits directories disagree on frame count");
    std::vector<LabelMask> fused;
    for (std::size_t t = 0; t < all[0].size(); ++t) {
      std::vector<WeightedLogits> preds;
      for (std::size_t m = 0; m < all.size(); ++m)
        preds.push_back({all[m][t], weights[m], dirs[m]});
      fused.push_back(average_logits(preds));
    }
    save_masks(fused, out_dir);
    return kExitOk;
  }

  if (ens_v->parsed()) {
    const auto dirs = split_paths(inputs_csv);
    const auto weights = parse_weights(weights_csv, dirs.size());
    std::vector<std::vector<LabelMask>> all;
    for (const auto& d : dirs) all.push_back(load_masks(d));
    for (const auto& m : all)
      if (m.size() != all[0].size())
        throw DimensionError("mask directories disagree on frame count");
    std::vector<LabelMask> fused;
    for (std::size_t t = 0; t < all[0].size(); ++t) {
      std::vector<WeightedMask> preds;
      for (std::size_t m = 0; m < all.size(); ++m)
        preds.push_back({all[m][t], weights[m], dirs[m]});
      fused.push_back(vote_masks(preds));
    }
    save_masks(fused, out_dir);
    return kExitOk;
  }

  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const LabelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDimension;
  }
}
