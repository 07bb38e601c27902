#pragma once

#include "neurotok/nets.hpp"
#include "neurotok/rvq.hpp"

#include <string>

namespace neurotok {

// Checkpoint container: 8-byte magic "NTKP0001", u64 manifest length, JSON
// manifest (config, stage tag, tensor index), then all tensors as raw
// little-endian f32 in manifest order.
struct TokenizerCheckpoint {
  ModelConfig cfg;
  int max_positions = 0;
  ParamSet params;
  RvqStack time_stack;
  RvqStack freq_stack;
};

struct PretrainCheckpoint {
  ModelConfig cfg;
  int max_positions = 0;
  ParamSet params;
};

void save_tokenizer_checkpoint(const std::string& path, const TokenizerModel& model,
                               const RvqStack& time_stack, const RvqStack& freq_stack);
TokenizerCheckpoint load_tokenizer_checkpoint(const std::string& path);

void save_pretrain_checkpoint(const std::string& path, const PretrainModel& model);
PretrainCheckpoint load_pretrain_checkpoint(const std::string& path);

// rebuilds the structural index (layer/head layout) over loaded parameters
TokenizerModel tokenizer_from_checkpoint(const TokenizerCheckpoint& ckpt);
PretrainModel pretrain_from_checkpoint(const PretrainCheckpoint& ckpt);

}  // namespace neurotok
