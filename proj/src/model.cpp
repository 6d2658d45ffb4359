#include "msdeaot/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "msdeaot/errors.hpp"

namespace msd {

double poly_lr(int step, int total_steps, double lr0, double lr_end, double power) {
  if (total_steps < 1) throw RangeError("poly_lr needs total_steps >= 1");
  if (step < 0 || step > total_steps)
    throw RangeError("poly_lr step " + std::to_string(step) + " outside [0, " +
                     std::to_string(total_steps) + "]");
  if (!(lr0 > lr_end) || !(lr_end > 0.0))
    throw RangeError("poly_lr requires lr0 > lr_end > 0");
  const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_end + (lr0 - lr_end) * std::pow(frac, power);
}

Model::Model(ModelConfig cfg)
    : cfg_(cfg),
      bank_width_(cfg.template_mode ? cfg.max_objects + 1 : cfg.c16),
      bank_(cfg.template_mode
                ? IdentityBank::one_hot(cfg.max_objects)
                : IdentityBank::seeded(cfg.max_objects, cfg.c16, cfg.seed + 17)) {}

Model Model::initialize(const ModelConfig& cfg_in) {
  ModelConfig cfg = cfg_in;
  if (cfg.max_objects < 1) throw ConfigError("max_objects must be >= 1");
  if (cfg.mem_interval < 1) throw ConfigError("mem_interval must be >= 1");
  if (cfg.gpm_layers_16 < 1 || cfg.gpm_layers_8 < 1)
    throw ConfigError("each GPM stage needs at least one layer");
  if (cfg.template_mode) {
    // Template mode carries raw pooled pixels and one-hot labels through the
    // network, so both stage widths collapse to the label-channel count.
    if (cfg.max_objects + 1 < 3)
      throw ConfigError("template mode needs max_objects >= 2");
    cfg.c16 = cfg.max_objects + 1;
    cfg.c8 = cfg.max_objects + 1;
  }
  Model m(cfg);
  const int c16 = cfg.c16, c8 = cfg.c8, mp1 = cfg.max_objects + 1;
  if (cfg.template_mode) {
    m.enc1_ = Tensor::zeros({3, 3, 3, 16});
    m.enc2_ = Tensor::zeros({3, 3, 16, 32});
    m.enc3_ = Tensor::zeros({3, 3, 32, c8});
    m.enc4_ = Tensor::zeros({3, 3, c8, c16});
    m.pyr8_ = Tensor::identity(c8);
    m.pyr16_ = {Tensor::identity(c16), Tensor::identity(c16), Tensor::identity(c16)};
    for (int i = 0; i < cfg.gpm_layers_16; ++i)
      m.stage16_.push_back(GpmLayerParams::template_mode(c16, m.bank_width_));
    for (int i = 0; i < cfg.gpm_layers_8; ++i) {
      GpmLayerParams l = GpmLayerParams::template_mode(c8, c8);
      // The coarse stage contributes four label votes per cell (two layers,
      // two memory routes). Weighting each fine-stage route by 3 lets two
      // agreeing fine votes (6) override the coarse stage, while the coarse
      // votes still break a fine-stage disagreement (3 vs 3).
      l.out_id = scale(l.out_id, 3.0f);
      m.stage8_.push_back(std::move(l));
    }
    m.dec_conv_ = Tensor::zeros({3, 3, c16, c8});
    m.dec_id_proj_ = Tensor::identity(c8);
    m.mem_id_proj8_ = Tensor::identity(c8);
    m.head_vis_ = Tensor::zeros({c8, mp1});
    m.head_id_ = Tensor::identity(mp1);
  } else {
    Rng rng(cfg.seed);
    auto kinit = [&](int kh, int kw, int ci, int co) {
      return Tensor::gaussian({kh, kw, ci, co},
                              rng, 1.0f / std::sqrt(static_cast<float>(kh * kw * ci)));
    };
    m.enc1_ = kinit(3, 3, 3, 16);
    m.enc2_ = kinit(3, 3, 16, 32);
    m.enc3_ = kinit(3, 3, 32, c8);
    m.enc4_ = kinit(3, 3, c8, c16);
    const float s8 = 1.0f / std::sqrt(static_cast<float>(c8));
    const float s16 = 1.0f / std::sqrt(static_cast<float>(c16));
    m.pyr8_ = Tensor::gaussian({c8, c8}, rng, s8);
    m.pyr16_ = {Tensor::gaussian({c16, c16}, rng, s16),
                Tensor::gaussian({c16, c16}, rng, s16),
                Tensor::gaussian({c16, c16}, rng, s16)};
    for (int i = 0; i < cfg.gpm_layers_16; ++i)
      m.stage16_.push_back(GpmLayerParams::seeded(c16, m.bank_width_, rng));
    for (int i = 0; i < cfg.gpm_layers_8; ++i)
      m.stage8_.push_back(GpmLayerParams::seeded(c8, c8, rng));
    m.dec_conv_ = kinit(3, 3, c16, c8);
    m.dec_id_proj_ = Tensor::gaussian({m.bank_width_, c8}, rng, s16);
    m.mem_id_proj8_ = Tensor::gaussian({m.bank_width_, c8}, rng, s16);
    m.head_vis_ = Tensor::gaussian({c8, mp1}, rng, s8);
    m.head_id_ = Tensor::gaussian({c8, mp1}, rng, s8);
  }
  return m;
}

namespace {

// Channels-last image -> token matrix (hw x c); row-major layouts coincide.
Tensor to_tokens(const Tensor& spatial) {
  return spatial.reshape({spatial.dim(0) * spatial.dim(1), spatial.dim(2)});
}

Tensor to_spatial(const Tensor& tokens, int h, int w) {
  return tokens.reshape({h, w, tokens.dim(1)});
}

// Expands a 3-channel pooled image into `width` channels (zeros beyond RGB);
// cosine similarity over the widened vectors equals cosine over RGB.
Tensor expand_channels(const Tensor& rgb, int width) {
  Tensor out({rgb.dim(0), rgb.dim(1), width});
  for (int y = 0; y < rgb.dim(0); ++y)
    for (int x = 0; x < rgb.dim(1); ++x)
      for (int c = 0; c < 3 && c < width; ++c) out.at(y, x, c) = rgb.at(y, x, c);
  return out;
}

}  // namespace

FrameFeatures Model::encode_frame(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(2) != 3)
    throw DimensionError("encode_frame expects h x w x 3, got " + image.shape_string());
  const Tensor padded = pad_to_multiple(image, 16);
  FrameFeatures out;
  if (cfg_.template_mode) {
    out.f4 = expand_channels(avg_pool(padded, 4), cfg_.c8);
    out.f8 = expand_channels(avg_pool(padded, 8), cfg_.c8);
    out.f16 = expand_channels(avg_pool(padded, 16), cfg_.c16);
  } else {
    const Tensor h2 = relu(conv2d(padded, enc1_, 2, 1));
    out.f4 = relu(conv2d(h2, enc2_, 2, 1));
    out.f8 = relu(conv2d(out.f4, enc3_, 2, 1));
    out.f16 = relu(conv2d(out.f8, enc4_, 2, 1));
  }
  return out;
}

FeaturePyramid Model::build_feature_pyramid(const FrameFeatures& feats) const {
  FeaturePyramid pyr;
  const int g8h = feats.f8.dim(0), g8w = feats.f8.dim(1);
  const int g16h = feats.f16.dim(0), g16w = feats.f16.dim(1);
  pyr.levels[0] = to_spatial(matmul(to_tokens(feats.f8), pyr8_), g8h, g8w);
  const Tensor t16 = to_tokens(feats.f16);
  for (int i = 0; i < 3; ++i)
    pyr.levels[static_cast<std::size_t>(i) + 1] =
        to_spatial(matmul(t16, pyr16_[static_cast<std::size_t>(i)]), g16h, g16w);
  return pyr;
}

GpmConfig Model::stage_config(bool short_term_enabled) const {
  GpmConfig cfg;
  cfg.short_term = short_term_enabled;
  if (cfg_.template_mode) {
    cfg.self_propagation = false;
    cfg.pre_norm = false;
    cfg.cosine_scores = true;
    // Large enough that any float-distinguishable cosine gap saturates the
    // softmax: attention degenerates to an argmax with exact-tie sharing.
    cfg.attn_scale = 1e8f;
  }
  return cfg;
}

Tensor Model::decode_to_stride8(const Tensor& x16_tokens, int g16h, int g16w,
                                const Tensor& l8_tokens, int g8h, int g8w) const {
  const Tensor conv = conv2d(to_spatial(x16_tokens, g16h, g16w), dec_conv_, 1, 1);
  const Tensor up = resize_bilinear(conv, g8h, g8w);
  return add(to_tokens(up), l8_tokens);
}

Model::StageInputs Model::stage_inputs(const Tensor& frame) const {
  const FrameFeatures feats = encode_frame(frame);
  const FeaturePyramid pyr = build_feature_pyramid(feats);
  StageInputs si;
  si.g16h = feats.f16.dim(0);
  si.g16w = feats.f16.dim(1);
  si.g8h = feats.f8.dim(0);
  si.g8w = feats.f8.dim(1);
  si.padded_h = si.g16h * 16;
  si.padded_w = si.g16w * 16;
  // The two duplicated 16x levels fold into the stage input additively.
  si.x16 = add(add(to_tokens(pyr.levels[1]), to_tokens(pyr.levels[2])),
               to_tokens(pyr.levels[3]));
  si.x8 = decode_to_stride8(si.x16, si.g16h, si.g16w, to_tokens(pyr.levels[0]),
                            si.g8h, si.g8w);
  return si;
}

MaskLogits Model::segment_frame(const Tensor& frame, const MemoryBank& memory) const {
  if (memory.s16.long_term.empty() || memory.s8.long_term.empty())
    throw EmptyMemoryError("segment_frame requires long-term memory at both stages");
  const int orig_h = frame.dim(0), orig_w = frame.dim(1);
  const FrameFeatures feats = encode_frame(frame);
  const FeaturePyramid pyr = build_feature_pyramid(feats);
  const int g16h = feats.f16.dim(0), g16w = feats.f16.dim(1);
  const int g8h = feats.f8.dim(0), g8w = feats.f8.dim(1);
  if (memory.s16.long_term.front().grid_h != g16h ||
      memory.s16.long_term.front().grid_w != g16w)
    throw DimensionError("frame size does not match memory entries");

  Tensor x16 = add(add(to_tokens(pyr.levels[1]), to_tokens(pyr.levels[2])),
                   to_tokens(pyr.levels[3]));
  Tensor id16 = Tensor::zeros({g16h * g16w, bank_width_});
  const GpmConfig cfg16 = stage_config(cfg_.short_term_16);
  const PropagationMemoryEntry* short16 =
      memory.s16.short_term ? &*memory.s16.short_term : nullptr;
  for (const auto& layer : stage16_) {
    std::tie(x16, id16) =
        gpm_layer(x16, id16, g16h, g16w, memory.s16.long_term, short16, layer, cfg16);
    ++gpm_stats().layer_passes_stride16;
  }

  Tensor x8 = decode_to_stride8(x16, g16h, g16w, to_tokens(pyr.levels[0]), g8h, g8w);
  Tensor id8 = matmul(
      to_tokens(resize_bilinear(to_spatial(id16, g16h, g16w), g8h, g8w)), dec_id_proj_);
  const GpmConfig cfg8 = stage_config(cfg_.short_term_8);
  const PropagationMemoryEntry* short8 =
      memory.s8.short_term ? &*memory.s8.short_term : nullptr;
  for (const auto& layer : stage8_) {
    std::tie(x8, id8) =
        gpm_layer(x8, id8, g8h, g8w, memory.s8.long_term, short8, layer, cfg8);
    ++gpm_stats().layer_passes_stride8;
  }

  const Tensor logits8 = add(matmul(x8, head_vis_), matmul(id8, head_id_));
  Tensor full = resize_bilinear(to_spatial(logits8, g8h, g8w),
                                g16h * 16, g16w * 16);
  if (full.dim(0) == orig_h && full.dim(1) == orig_w) return full;
  Tensor cropped({orig_h, orig_w, full.dim(2)});
  for (int y = 0; y < orig_h; ++y)
    for (int x = 0; x < orig_w; ++x)
      for (int c = 0; c < full.dim(2); ++c) cropped.at(y, x, c) = full.at(y, x, c);
  return cropped;
}

void Model::update_memory(MemoryBank& memory, int frame_index, const Tensor& frame,
                          const MaskLogits& logits) const {
  const StageInputs si = stage_inputs(frame);
  const LabelMask mask = decode_labels(logits);
  const Tensor id16 =
      to_tokens(encode_id_embedding(mask, bank_, si.g16h, si.g16w));
  const Tensor id8 = matmul(
      to_tokens(encode_id_embedding(mask, bank_, si.g8h, si.g8w)), mem_id_proj8_);
  PropagationMemoryEntry e16 = build_memory_entry(si.x16, id16, stage16_.front(),
                                                  frame_index, 16, si.g16h, si.g16w);
  PropagationMemoryEntry e8 = build_memory_entry(si.x8, id8, stage8_.front(),
                                                 frame_index, 8, si.g8h, si.g8w);
  if (frame_index % memory.update_interval == 0) {
    memory.s16.long_term.push_back(e16);
    memory.s8.long_term.push_back(e8);
  }
  memory.s16.short_term = std::move(e16);
  memory.s8.short_term = std::move(e8);
}

std::vector<std::pair<LabelMask, MaskLogits>> Model::propagate_sequence(
    const std::vector<Tensor>& frames, const LabelMask& reference_mask) const {
  if (frames.empty()) throw ArgumentError("propagate_sequence needs at least one frame");
  if (reference_mask.h != frames[0].dim(0) || reference_mask.w != frames[0].dim(1))
    throw DimensionError("reference mask size does not match frame 0");

  const SlotAssignment slots = reference_assignment(reference_mask, cfg_.max_objects);

  LabelMask ref_slots(reference_mask.h, reference_mask.w);
  for (std::size_t i = 0; i < reference_mask.labels.size(); ++i) {
    const int v = reference_mask.labels[i];
    ref_slots.labels[i] = v == 0 ? 0 : slots.slot_of(v);
  }

  const int mp1 = cfg_.max_objects + 1;
  MaskLogits logits0({reference_mask.h, reference_mask.w, mp1});
  for (int y = 0; y < reference_mask.h; ++y)
    for (int x = 0; x < reference_mask.w; ++x)
      logits0.at(y, x, ref_slots.at(y, x)) = 1.0f;

  MemoryBank bank;
  bank.update_interval = cfg_.mem_interval;
  update_memory(bank, 0, frames[0], logits0);

  std::vector<std::pair<LabelMask, MaskLogits>> out;
  out.emplace_back(reference_mask, logits0);
  for (std::size_t t = 1; t < frames.size(); ++t) {
    MaskLogits logits = segment_frame(frames[t], bank);
    LabelMask mask_slots = decode_labels(logits);
    update_memory(bank, static_cast<int>(t), frames[t], logits);
    LabelMask mask(mask_slots.h, mask_slots.w);
    const int assigned = static_cast<int>(slots.size());
    for (std::size_t i = 0; i < mask.labels.size(); ++i) {
      // An untrained model can emit slots no object occupies; those read as
      // background rather than aborting the sequence.
      const int s = mask_slots.labels[i];
      mask.labels[i] = s > assigned ? 0 : slots.external_of(s);
    }
    out.emplace_back(std::move(mask), std::move(logits));
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Model::named_tensors_mut() {
  std::vector<std::pair<std::string, Tensor*>> out = {
      {"encoder.conv1", &enc1_}, {"encoder.conv2", &enc2_},
      {"encoder.conv3", &enc3_}, {"encoder.conv4", &enc4_},
      {"pyramid.p8", &pyr8_},    {"pyramid.p16.0", &pyr16_[0]},
      {"pyramid.p16.1", &pyr16_[1]}, {"pyramid.p16.2", &pyr16_[2]},
      {"decoder.conv", &dec_conv_}, {"decoder.id_proj", &dec_id_proj_},
      {"decoder.mem_id_proj8", &mem_id_proj8_},
      {"head.vis", &head_vis_},  {"head.id", &head_id_},
  };
  auto add_stage = [&](const std::string& prefix, std::vector<GpmLayerParams>& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      GpmLayerParams& l = layers[i];
      const std::string p = prefix + "." + std::to_string(i) + ".";
      out.emplace_back(p + "wq", &l.wq);
      out.emplace_back(p + "wk", &l.wk);
      out.emplace_back(p + "wv", &l.wv);
      out.emplace_back(p + "wu", &l.wu);
      out.emplace_back(p + "gate_vis", &l.gate_vis);
      out.emplace_back(p + "gate_id", &l.gate_id);
      out.emplace_back(p + "gate_bias_vis", &l.gate_bias_vis);
      out.emplace_back(p + "gate_bias_id", &l.gate_bias_id);
      out.emplace_back(p + "out_vis", &l.out_vis);
      out.emplace_back(p + "out_id", &l.out_id);
    }
  };
  add_stage("stage16", stage16_);
  add_stage("stage8", stage8_);
  out.emplace_back("bank.vectors", &bank_.vectors_mut());
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> Model::named_tensors() const {
  auto mut = const_cast<Model*>(this)->named_tensors_mut();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

namespace {

constexpr char kWeightsMagic[4] = {'M', 'S', 'D', 'W'};
constexpr std::uint32_t kWeightsVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("truncated weights file: " + path);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void Model::save_weights(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open weights file for writing: " + path);
  os.write(kWeightsMagic, 4);
  write_u32(os, kWeightsVersion);
  write_u32(os, static_cast<std::uint32_t>(cfg_.c16));
  write_u32(os, static_cast<std::uint32_t>(cfg_.c8));
  write_u32(os, static_cast<std::uint32_t>(cfg_.max_objects));
  write_u32(os, static_cast<std::uint32_t>(cfg_.gpm_layers_16));
  write_u32(os, static_cast<std::uint32_t>(cfg_.gpm_layers_8));
  for (const auto& [name, t] : named_tensors()) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(t->rank()));
    for (int d : t->shape()) write_u32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t->data().data()),
             static_cast<std::streamsize>(t->size() * sizeof(float)));
  }
  if (!os) throw FormatError("failed writing weights file: " + path);
}

Model Model::load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open weights file: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kWeightsMagic, 4) != 0)
    throw FormatError("bad magic in weights file: " + path);
  if (read_u32(is, path) != kWeightsVersion)
    throw FormatError("unsupported weights version in " + path);
  ModelConfig cfg;
  cfg.c16 = static_cast<int>(read_u32(is, path));
  cfg.c8 = static_cast<int>(read_u32(is, path));
  cfg.max_objects = static_cast<int>(read_u32(is, path));
  cfg.gpm_layers_16 = static_cast<int>(read_u32(is, path));
  cfg.gpm_layers_8 = static_cast<int>(read_u32(is, path));
  Model m = Model::initialize(cfg);
  std::map<std::string, Tensor*> by_name;
  for (auto& [name, t] : m.named_tensors_mut()) by_name[name] = t;
  while (true) {
    is.peek();
    if (is.eof()) break;
    const std::uint32_t name_len = read_u32(is, path);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len))
      throw FormatError("truncated tensor name in " + path);
    const std::uint32_t rank = read_u32(is, path);
    std::vector<int> dims(rank);
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      dims[i] = static_cast<int>(read_u32(is, path));
      count *= static_cast<std::size_t>(dims[i]);
    }
    std::vector<float> payload(count);
    if (!is.read(reinterpret_cast<char*>(payload.data()),
                 static_cast<std::streamsize>(count * sizeof(float))))
      throw FormatError("truncated tensor payload for '" + name + "' in " + path);
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw FormatError("unknown tensor '" + name + "' in " + path);
    *it->second = Tensor(std::move(dims), std::move(payload));
  }
  return m;
}

}  // namespace msd
