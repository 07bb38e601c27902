#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "neurotok/checkpoint.hpp"
#include "neurotok/rng.hpp"

#include <filesystem>
#include <fstream>

using namespace neurotok;
namespace fs = std::filesystem;

namespace {
ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.embed_dim = 16;
  cfg.encoder_layers = 1;
  cfg.heads = 2;
  cfg.ffn_dim = 32;
  cfg.decoder_layers = 1;
  cfg.patch_len = 24;
  cfg.rvq_layers = 2;
  cfg.codebook_size = 8;
  cfg.code_dim = 6;
  cfg.seed = 7;
  return cfg;
}

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / ("neurotok_ckpt_" + name)).string();
}
}  // namespace

TEST_CASE("tokenizer checkpoint round-trips config, params and stacks") {
  Rng rng(1);
  ModelConfig cfg = tiny_config();
  TokenizerModel m = make_tokenizer_model(cfg, 12, rng);
  Rng stack_rng(2);
  RvqStack ts = make_rvq_stack(cfg.rvq_layers, cfg.codebook_size, cfg.code_dim, Domain::time,
                               stack_rng);
  RvqStack fsk = make_rvq_stack(cfg.rvq_layers, cfg.codebook_size, cfg.code_dim, Domain::freq,
                                stack_rng);
  ts.layers[0].scale[3] = 0.75;
  ts.layers[1].ema_count[2] = 17.5;

  std::string path = temp_path("tok.ckpt");
  save_tokenizer_checkpoint(path, m, ts, fsk);
  TokenizerCheckpoint back = load_tokenizer_checkpoint(path);

  CHECK(back.cfg.embed_dim == cfg.embed_dim);
  CHECK(back.cfg.rvq_layers == cfg.rvq_layers);
  CHECK(back.max_positions == 12);
  REQUIRE(back.params.entries.size() == m.params.entries.size());
  for (size_t i = 0; i < m.params.entries.size(); ++i) {
    CHECK(back.params.entries[i].name == m.params.entries[i].name);
    // payload is f32; loaded values are the f32 rounding of the originals
    Mat expect = m.params.entries[i].value.cast<float>().cast<double>();
    CHECK((back.params.entries[i].value - expect).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(back.time_stack.depth() == 2);
  CHECK(std::abs(back.time_stack.layers[0].scale[3] - 0.75) < 1e-7);
  CHECK(std::abs(back.time_stack.layers[1].ema_count[2] - 17.5) < 1e-4);

  TokenizerModel rebuilt = tokenizer_from_checkpoint(back);
  CHECK(rebuilt.params.entries.size() == m.params.entries.size());
}

TEST_CASE("pretrain checkpoint round-trips") {
  Rng rng(3);
  ModelConfig cfg = tiny_config();
  PretrainModel m = make_pretrain_model(cfg, 10, rng);
  std::string path = temp_path("pre.ckpt");
  save_pretrain_checkpoint(path, m);
  PretrainCheckpoint back = load_pretrain_checkpoint(path);
  CHECK(back.max_positions == 10);
  PretrainModel rebuilt = pretrain_from_checkpoint(back);
  CHECK(rebuilt.params.entries.size() == m.params.entries.size());
}

TEST_CASE("stage tags are enforced") {
  Rng rng(4);
  ModelConfig cfg = tiny_config();
  PretrainModel m = make_pretrain_model(cfg, 10, rng);
  std::string path = temp_path("stage.ckpt");
  save_pretrain_checkpoint(path, m);
  CHECK_THROWS_AS((void)load_tokenizer_checkpoint(path), Error);
}

TEST_CASE("garbage files are rejected") {
  std::string path = temp_path("garbage.ckpt");
  std::ofstream(path, std::ios::binary) << "not a checkpoint at all, not even close";
  try {
    (void)load_tokenizer_checkpoint(path);
    FAIL("expected MalformedHeader");
  } catch (const Error& e) {
    CHECK(e.code() == Err::MalformedHeader);
  }
}

TEST_CASE("identical saves are byte identical") {
  Rng rng(5);
  ModelConfig cfg = tiny_config();
  TokenizerModel m = make_tokenizer_model(cfg, 12, rng);
  Rng stack_rng(6);
  RvqStack ts = make_rvq_stack(2, 8, 6, Domain::time, stack_rng);
  RvqStack fsk = make_rvq_stack(2, 8, 6, Domain::freq, stack_rng);
  std::string p1 = temp_path("a.ckpt"), p2 = temp_path("b.ckpt");
  save_tokenizer_checkpoint(p1, m, ts, fsk);
  save_tokenizer_checkpoint(p2, m, ts, fsk);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}
