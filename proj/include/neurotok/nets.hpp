#pragma once

#include "neurotok/autodiff.hpp"
#include "neurotok/patching.hpp"
#include "neurotok/rng.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace neurotok {

// Desk-scale defaults. The reference configuration (12 layers, d=200,
// K=8192) trains for hours; every invariant here is scale-free, so tests run
// a shrunken model with the same structure.
struct ModelConfig {
  int embed_dim = 64;
  int encoder_layers = 2;
  int heads = 4;
  int ffn_dim = 256;
  int decoder_layers = 1;
  int patch_len = 200;
  int rvq_layers = 3;
  int codebook_size = 64;
  int code_dim = 16;
  double mask_ratio = 0.5;
  uint64_t seed = 7;

  void validate() const;
};

// Named dense parameters plus Adam moment state.
struct ParamSet {
  struct Entry {
    std::string name;
    Mat value;
    Mat adam_m;
    Mat adam_v;
  };
  std::vector<Entry> entries;
  std::unordered_map<std::string, int> by_name;

  int add(const std::string& name, Mat init);
  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  int index_of(const std::string& name) const;
  int size() const { return static_cast<int>(entries.size()); }
};

// Per-step view: every parameter inserted into a tape as a leaf, aligned
// with ParamSet order.
struct BoundParams {
  std::vector<Var> vars;
  Var operator[](int idx) const { return vars.at(idx); }
};
BoundParams bind(Tape& tape, const ParamSet& params);

struct LinearP {
  int w = -1, b = -1;
};
struct LayerNormP {
  int g = -1, b = -1;
};
struct BlockP {  // pre-LN transformer block
  LayerNormP ln1;
  LinearP q, k, v, o;
  LayerNormP ln2;
  LinearP ff1, ff2;
};
struct TransformerP {
  std::vector<BlockP> blocks;
  LayerNormP final_ln;
};
struct ConvP {
  int w = -1, b = -1;
  Conv1dSpec spec;
};
// 3 temporal conv stages then a linear projection to the embed dim
struct PatchEncoderP {
  ConvP c1, c2, c3;
  LinearP proj;
};

Var linear(const BoundParams& pv, LinearP p, Var x);
Var transformer(const BoundParams& pv, const TransformerP& p, Var x, int heads);
Var patch_encode(const BoundParams& pv, const PatchEncoderP& p, Var patches);

// --- tokenizer model ---

struct TokenizerModel {
  ModelConfig cfg;
  int max_positions = 0;
  ParamSet params;

  PatchEncoderP embed;
  int pos_table = -1;  // max_positions × d
  TransformerP encoder;
  LinearP in_time, in_freq;    // d -> code_dim
  LinearP out_time, out_freq;  // code_dim -> d
  TransformerP dec_time_trunk;
  LinearP dec_time_head;  // d -> P
  TransformerP dec_freq_trunk;
  LinearP dec_freq_amp;    // d -> P
  LinearP dec_freq_phase;  // d -> P, tanh * pi
};

TokenizerModel make_tokenizer_model(const ModelConfig& cfg, int max_positions, Rng& rng);

// on-tape forward pieces (used by the trainer and the no-grad wrappers)
Var encoder_forward(const BoundParams& pv, const TokenizerModel& m, Tape& tape,
                    const Matd& patch_rows, const std::vector<int>& positions);
Var decode_time_forward(const BoundParams& pv, const TokenizerModel& m, Var hq);
std::pair<Var, Var> decode_freq_forward(const BoundParams& pv, const TokenizerModel& m, Var hq);

// spec-level operations (no-grad convenience wrappers)
Matd encode(const TokenizerModel& m, const PatchGrid& grid);
Matd decode_time(const TokenizerModel& m, const Matd& hq);
std::pair<Matd, Matd> decode_freq(const TokenizerModel& m, const Matd& hq);

// --- pre-training model ---

struct PredictionHeads {
  std::vector<LayerNormP> ln;      // per rvq layer
  std::vector<LinearP> head;       // per rvq layer, d -> K
  std::vector<int> code_embed;     // per preceding layer (L-1 tables), K×d
};

struct PretrainModel {
  ModelConfig cfg;
  int max_positions = 0;
  ParamSet params;

  PatchEncoderP embed;
  int pos_table = -1;
  int mask_token = -1;  // 1×d
  TransformerP encoder;
  PredictionHeads time_heads;
  PredictionHeads freq_heads;
};

PretrainModel make_pretrain_model(const ModelConfig& cfg, int max_positions, Rng& rng);

// pre-transformer input: patch embeddings with masked rows replaced by the
// learned mask token, then the position table added
Var embed_with_mask(const BoundParams& pv, const PretrainModel& m, Tape& tape,
                    const Matd& patch_rows, const std::vector<int>& positions,
                    const std::vector<int>& masked);
Var encode_masked_forward(const BoundParams& pv, const PretrainModel& m, Tape& tape,
                          const Matd& patch_rows, const std::vector<int>& positions,
                          const std::vector<int>& masked);
Matd encode_masked(const PretrainModel& m, const PatchGrid& grid, const std::vector<int>& masked);

}  // namespace neurotok
