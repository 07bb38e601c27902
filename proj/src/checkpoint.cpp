#include "neurotok/checkpoint.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>

namespace neurotok {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'N', 'T', 'K', 'P', '0', '0', '0', '1'};

json config_to_json(const ModelConfig& cfg, int max_positions) {
  return json{{"embed_dim", cfg.embed_dim},
              {"encoder_layers", cfg.encoder_layers},
              {"heads", cfg.heads},
              {"ffn_dim", cfg.ffn_dim},
              {"decoder_layers", cfg.decoder_layers},
              {"patch_len", cfg.patch_len},
              {"rvq_layers", cfg.rvq_layers},
              {"codebook_size", cfg.codebook_size},
              {"code_dim", cfg.code_dim},
              {"mask_ratio", cfg.mask_ratio},
              {"seed", cfg.seed},
              {"max_positions", max_positions}};
}

void config_from_json(const json& j, ModelConfig& cfg, int& max_positions) {
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.encoder_layers = j.at("encoder_layers").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.ffn_dim = j.at("ffn_dim").get<int>();
  cfg.decoder_layers = j.at("decoder_layers").get<int>();
  cfg.patch_len = j.at("patch_len").get<int>();
  cfg.rvq_layers = j.at("rvq_layers").get<int>();
  cfg.codebook_size = j.at("codebook_size").get<int>();
  cfg.code_dim = j.at("code_dim").get<int>();
  cfg.mask_ratio = j.at("mask_ratio").get<double>();
  cfg.seed = j.at("seed").get<uint64_t>();
  max_positions = j.at("max_positions").get<int>();
}

struct TensorRef {
  std::string name;
  const Mat* mat;
};

void write_container(const std::string& path, const json& manifest_base,
                     const std::vector<TensorRef>& tensors) {
  json manifest = manifest_base;
  json index = json::array();
  uint64_t offset = 0;
  for (const TensorRef& t : tensors) {
    index.push_back(json{{"name", t.name},
                         {"rows", t.mat->rows()},
                         {"cols", t.mat->cols()},
                         {"offset", offset}});
    offset += static_cast<uint64_t>(t.mat->size()) * 4;
  }
  manifest["tensors"] = index;
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Err::IoFailure, "cannot open " + path + " for writing");
  out.write(kMagic, 8);
  const uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const TensorRef& t : tensors) {
    std::vector<float> payload(t.mat->size());
    for (Eigen::Index i = 0; i < t.mat->size(); ++i)
      payload[static_cast<size_t>(i)] = static_cast<float>((*t.mat)(i));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * 4));
  }
  if (!out) raise(Err::IoFailure, "short write to " + path);
}

struct Container {
  json manifest;
  std::unordered_map<std::string, Mat> tensors;
};

Container read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Err::IoFailure, "cannot open " + path);
  char magic[8];
  uint64_t len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&len), 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    raise(Err::MalformedHeader, "not a checkpoint: " + path);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) raise(Err::MalformedHeader, "truncated manifest in " + path);

  Container c;
  try {
    c.manifest = json::parse(text);
  } catch (const json::exception& e) {
    raise(Err::MalformedHeader, std::string("manifest parse failure: ") + e.what());
  }
  const std::streampos payload_start = in.tellg();
  for (const json& t : c.manifest.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const auto offset = t.at("offset").get<uint64_t>();
    std::vector<float> payload(static_cast<size_t>(rows * cols));
    in.seekg(payload_start + static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * 4));
    if (!in) raise(Err::MalformedHeader, "truncated tensor payload in " + path);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = static_cast<double>(payload[i]);
    c.tensors.emplace(t.at("name").get<std::string>(), std::move(m));
  }
  return c;
}

void append_stack_tensors(std::vector<TensorRef>& refs, const RvqStack& stack,
                          std::vector<Mat>& scratch) {
  const std::string tag = domain_name(stack.domain);
  for (int l = 0; l < stack.depth(); ++l) {
    const Codebook& book = stack.layers[l];
    const std::string base = "rvq/" + tag + "/" + std::to_string(l);
    refs.push_back({base + "/codes", &book.code_vectors});
    scratch.push_back(book.scale.transpose());
    refs.push_back({base + "/scale", &scratch.back()});
    scratch.push_back(book.ema_count.transpose());
    refs.push_back({base + "/ema_count", &scratch.back()});
    refs.push_back({base + "/ema_sum", &book.ema_sum});
  }
}

RvqStack stack_from_container(const Container& c, Domain domain, int layers) {
  RvqStack stack;
  stack.domain = domain;
  const std::string tag = domain_name(domain);
  for (int l = 0; l < layers; ++l) {
    const std::string base = "rvq/" + tag + "/" + std::to_string(l);
    Codebook book;
    book.code_vectors = c.tensors.at(base + "/codes");
    book.scale = c.tensors.at(base + "/scale").row(0).transpose();
    book.ema_sum = c.tensors.at(base + "/ema_sum");
    book.ema_count = c.tensors.at(base + "/ema_count").row(0).transpose();
    stack.layers.push_back(std::move(book));
  }
  return stack;
}

ParamSet params_from_container(const Container& c, const ParamSet& layout) {
  ParamSet ps;
  for (const auto& e : layout.entries) {
    auto it = c.tensors.find(e.name);
    if (it == c.tensors.end()) raise(Err::MalformedHeader, "missing tensor " + e.name);
    if (it->second.rows() != e.value.rows() || it->second.cols() != e.value.cols())
      raise(Err::MalformedHeader, "tensor shape mismatch for " + e.name);
    ps.add(e.name, it->second);
  }
  return ps;
}

}  // namespace

void save_tokenizer_checkpoint(const std::string& path, const TokenizerModel& model,
                               const RvqStack& time_stack, const RvqStack& freq_stack) {
  json manifest;
  manifest["stage"] = "tokenizer";
  manifest["config"] = config_to_json(model.cfg, model.max_positions);

  std::vector<TensorRef> refs;
  std::vector<Mat> scratch;
  scratch.reserve(2 * static_cast<size_t>(time_stack.depth() + freq_stack.depth()));
  for (const auto& e : model.params.entries) refs.push_back({e.name, &e.value});
  append_stack_tensors(refs, time_stack, scratch);
  append_stack_tensors(refs, freq_stack, scratch);
  write_container(path, manifest, refs);
}

TokenizerCheckpoint load_tokenizer_checkpoint(const std::string& path) {
  Container c = read_container(path);
  if (c.manifest.value("stage", "") != "tokenizer")
    raise(Err::MalformedHeader, path + " is not a tokenizer checkpoint");
  TokenizerCheckpoint ckpt;
  config_from_json(c.manifest.at("config"), ckpt.cfg, ckpt.max_positions);

  Rng throwaway(0);
  TokenizerModel layout = make_tokenizer_model(ckpt.cfg, ckpt.max_positions, throwaway);
  ckpt.params = params_from_container(c, layout.params);
  ckpt.time_stack = stack_from_container(c, Domain::time, ckpt.cfg.rvq_layers);
  ckpt.freq_stack = stack_from_container(c, Domain::freq, ckpt.cfg.rvq_layers);
  return ckpt;
}

void save_pretrain_checkpoint(const std::string& path, const PretrainModel& model) {
  json manifest;
  manifest["stage"] = "pretrain";
  manifest["config"] = config_to_json(model.cfg, model.max_positions);
  std::vector<TensorRef> refs;
  for (const auto& e : model.params.entries) refs.push_back({e.name, &e.value});
  write_container(path, manifest, refs);
}

PretrainCheckpoint load_pretrain_checkpoint(const std::string& path) {
  Container c = read_container(path);
  if (c.manifest.value("stage", "") != "pretrain")
    raise(Err::MalformedHeader, path + " is not a pretrain checkpoint");
  PretrainCheckpoint ckpt;
  config_from_json(c.manifest.at("config"), ckpt.cfg, ckpt.max_positions);
  Rng throwaway(0);
  PretrainModel layout = make_pretrain_model(ckpt.cfg, ckpt.max_positions, throwaway);
  ckpt.params = params_from_container(c, layout.params);
  return ckpt;
}

TokenizerModel tokenizer_from_checkpoint(const TokenizerCheckpoint& ckpt) {
  Rng throwaway(0);
  TokenizerModel m = make_tokenizer_model(ckpt.cfg, ckpt.max_positions, throwaway);
  for (size_t i = 0; i < m.params.entries.size(); ++i)
    m.params.entries[i].value = ckpt.params.entries[i].value;
  return m;
}

PretrainModel pretrain_from_checkpoint(const PretrainCheckpoint& ckpt) {
  Rng throwaway(0);
  PretrainModel m = make_pretrain_model(ckpt.cfg, ckpt.max_positions, throwaway);
  for (size_t i = 0; i < m.params.entries.size(); ++i)
    m.params.entries[i].value = ckpt.params.entries[i].value;
  return m;
}

}  // namespace neurotok
