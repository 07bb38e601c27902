#pragma once

#include "neurotok/nets.hpp"
#include "neurotok/rvq.hpp"
#include "neurotok/spectral.hpp"

#include <vector>

namespace neurotok {

struct TrainConfig {
  int epochs = 250;
  int batch_size = 8;
  double lr = 1e-3;
  double weight_decay = 0.05;
  int warmup_epochs = 25;
  double min_lr = 1e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 7;
  double commitment_beta = 1.0;
  // Eq-literal L2 on wrapped phase by default; 1-cos(dphi) surrogate behind
  // the flag (documents the known wrapping artifact of the literal form).
  bool phase_cosine_loss = false;
  // accepted for config compatibility; the reference work lists it without
  // ever defining it, so it deliberately has no effect
  bool symmetric_loss = true;

  void validate() const;
};

// linear warmup 0 -> lr over the warmup steps, then cosine decay reaching
// min_lr exactly at total_steps
double lr_at(int64_t step, int64_t total_steps, int64_t warmup_steps, double lr, double min_lr);
double lr_at(int64_t step, const TrainConfig& cfg, int steps_per_epoch);

struct AdamSettings {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};
// decoupled weight decay; t counts completed steps starting at 1
void adamw_step(ParamSet& params, const std::vector<Mat>& grads, const AdamSettings& s, int64_t t);

struct LossReport {
  double l_time = 0.0;
  double l_freq_amp = 0.0;
  double l_freq_phase = 0.0;
  double l_commit = 0.0;
  double l_total = 0.0;
};

struct TokenizerEpochRecord {
  int epoch = 0;
  LossReport losses;
  double lr = 0.0;
  std::vector<int> unused_time;  // per rvq layer
  std::vector<int> unused_freq;
};

// Per-corpus caches: frequency-branch targets never change, so they are
// transformed once. Amplitude targets are log(1+A); phase targets are
// wrapped to (-pi, pi].
struct TokenizerCorpus {
  std::vector<PatchGrid> grids;
  std::vector<Matd> amp_targets;
  std::vector<Matd> phase_targets;
  double sample_rate_hz = 0.0;
};
TokenizerCorpus prepare_corpus(std::vector<PatchGrid> grids, double sample_rate_hz);

struct TokenizerTrainer {
  TokenizerModel model;
  RvqStack time_stack;
  RvqStack freq_stack;
  TrainConfig cfg;
  int steps_per_epoch = 0;
  int64_t total_steps = 0;
  int64_t step_count = 0;
  bool stacks_seeded = false;
  // The embedding cloud contracts during the early optimization transient;
  // codes seeded from the first batch on the wide cloud starve permanently
  // (no revival by design). One k-means++ re-seed after the transient pins
  // every code inside the settled cloud.
  int64_t reseed_step = 0;
  bool reseeded = false;
  Rng data_rng{0};
  // Quantizer dropout: each step decodes from a random depth prefix, so the
  // first layer must carry coarse content on its own and deeper layers
  // quantize residuals that still mean something.
  Rng dropout_rng{0};

  const TokenizerCorpus* corpus = nullptr;  // not owned
};

TokenizerTrainer make_tokenizer_trainer(const TokenizerCorpus& corpus, const ModelConfig& mcfg,
                                        const TrainConfig& tcfg);

// One dual-branch step over the given corpus samples: forward both domains,
// joint loss, backprop through the straight-through bottleneck, one AdamW
// step, then EMA updates from this batch's assignments.
LossReport tokenizer_step(TokenizerTrainer& tr, const std::vector<int>& sample_indices,
                          std::vector<std::vector<int64_t>>* usage_time = nullptr,
                          std::vector<std::vector<int64_t>>* usage_freq = nullptr);

struct TokenizerTrainResult {
  TokenizerModel model;
  RvqStack time_stack;
  RvqStack freq_stack;
  std::vector<TokenizerEpochRecord> history;
};

TokenizerTrainResult train_tokenizer(const TokenizerCorpus& corpus, const ModelConfig& mcfg,
                                     const TrainConfig& tcfg);

// Frozen-tokenizer pass: encoder, projection, normalization, quantization.
TokenGrid tokenize_grid(const TokenizerModel& model, const RvqStack& time_stack,
                        const RvqStack& freq_stack, const PatchGrid& grid);

}  // namespace neurotok
