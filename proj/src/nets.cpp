#include "neurotok/nets.hpp"

#include <cmath>

namespace neurotok {

namespace {
constexpr double kPi = 3.141592653589793238462643383280;

Mat rand_matrix(Rng& rng, int rows, int cols, double stddev) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = stddev * rng.normal();
  return m;
}

LinearP add_linear(ParamSet& ps, const std::string& name, int in_dim, int out_dim, Rng& rng) {
  LinearP p;
  p.w = ps.add(name + "/w", rand_matrix(rng, in_dim, out_dim, std::sqrt(2.0 / (in_dim + out_dim))));
  p.b = ps.add(name + "/b", Mat::Zero(1, out_dim));
  return p;
}

LayerNormP add_layer_norm(ParamSet& ps, const std::string& name, int dim) {
  LayerNormP p;
  p.g = ps.add(name + "/g", Mat::Ones(1, dim));
  p.b = ps.add(name + "/b", Mat::Zero(1, dim));
  return p;
}

BlockP add_block(ParamSet& ps, const std::string& name, int d, int ffn, Rng& rng) {
  BlockP blk;
  blk.ln1 = add_layer_norm(ps, name + "/ln1", d);
  blk.q = add_linear(ps, name + "/q", d, d, rng);
  blk.k = add_linear(ps, name + "/k", d, d, rng);
  blk.v = add_linear(ps, name + "/v", d, d, rng);
  blk.o = add_linear(ps, name + "/o", d, d, rng);
  blk.ln2 = add_layer_norm(ps, name + "/ln2", d);
  blk.ff1 = add_linear(ps, name + "/ff1", d, ffn, rng);
  blk.ff2 = add_linear(ps, name + "/ff2", ffn, d, rng);
  return blk;
}

TransformerP add_transformer(ParamSet& ps, const std::string& name, int layers, int d, int ffn,
                             Rng& rng) {
  TransformerP t;
  for (int l = 0; l < layers; ++l)
    t.blocks.push_back(add_block(ps, name + "/blk" + std::to_string(l), d, ffn, rng));
  t.final_ln = add_layer_norm(ps, name + "/ln_out", d);
  return t;
}

ConvP add_conv(ParamSet& ps, const std::string& name, const Conv1dSpec& spec, Rng& rng) {
  ConvP p;
  p.spec = spec;
  const double fan_in = static_cast<double>(spec.in_channels) * spec.kernel;
  p.w = ps.add(name + "/w",
               rand_matrix(rng, spec.out_channels, spec.in_channels * spec.kernel,
                           std::sqrt(1.0 / fan_in)));
  p.b = ps.add(name + "/b", Mat::Zero(1, spec.out_channels));
  return p;
}

// stage parameters fixed by the architecture table: kernels (1,15),(1,3),(1,3);
// strides (1,8),(1,1),(1,1); paddings (0,7),(0,1),(0,1); channels 1->8->8->8
PatchEncoderP add_patch_encoder(ParamSet& ps, const std::string& name, int patch_len, int d,
                                Rng& rng) {
  PatchEncoderP pe;
  Conv1dSpec s1{1, 8, 15, 8, 7, patch_len};
  pe.c1 = add_conv(ps, name + "/c1", s1, rng);
  Conv1dSpec s2{8, 8, 3, 1, 1, s1.out_len()};
  pe.c2 = add_conv(ps, name + "/c2", s2, rng);
  Conv1dSpec s3{8, 8, 3, 1, 1, s2.out_len()};
  pe.c3 = add_conv(ps, name + "/c3", s3, rng);
  pe.proj = add_linear(ps, name + "/proj", 8 * s3.out_len(), d, rng);
  return pe;
}

Var attention(const BoundParams& pv, const BlockP& blk, Var x, int heads) {
  Tape& t = *x.tape;
  const int d = static_cast<int>(t.value(x).cols());
  const int dh = d / heads;
  Var q = linear(pv, blk.q, x);
  Var k = linear(pv, blk.k, x);
  Var v = linear(pv, blk.v, x);
  std::vector<Var> outs;
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
    Var att = softmax_rows(scores);
    outs.push_back(matmul(att, vh));
  }
  Var merged = concat_cols(outs);
  return linear(pv, blk.o, merged);
}

}  // namespace

void ModelConfig::validate() const {
  if (embed_dim % heads != 0) raise(Err::ShapeMismatch, "embed_dim must be divisible by heads");
  if (rvq_layers < 1) raise(Err::ShapeMismatch, "rvq_layers must be >= 1");
  if (codebook_size < 2) raise(Err::ShapeMismatch, "codebook_size must be >= 2");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0))
    raise(Err::ShapeMismatch, "mask_ratio must lie in (0, 1)");
  if (patch_len < 1) raise(Err::ShapeMismatch, "patch_len must be positive");
}

int ParamSet::add(const std::string& name, Mat init) {
  if (by_name.count(name)) raise(Err::ShapeMismatch, "duplicate parameter " + name);
  Entry e;
  e.name = name;
  e.adam_m = Mat::Zero(init.rows(), init.cols());
  e.adam_v = Mat::Zero(init.rows(), init.cols());
  e.value = std::move(init);
  entries.push_back(std::move(e));
  by_name[name] = static_cast<int>(entries.size()) - 1;
  return static_cast<int>(entries.size()) - 1;
}

Mat& ParamSet::at(const std::string& name) { return entries[index_of(name)].value; }
const Mat& ParamSet::at(const std::string& name) const { return entries[index_of(name)].value; }

int ParamSet::index_of(const std::string& name) const {
  auto it = by_name.find(name);
  if (it == by_name.end()) raise(Err::IndexOutOfRange, "unknown parameter " + name);
  return it->second;
}

BoundParams bind(Tape& tape, const ParamSet& params) {
  BoundParams bp;
  bp.vars.reserve(params.entries.size());
  for (const auto& e : params.entries) bp.vars.push_back(tape.leaf(e.value));
  return bp;
}

Var linear(const BoundParams& pv, LinearP p, Var x) {
  return add_rowvec(matmul(x, pv[p.w]), pv[p.b]);
}

Var transformer(const BoundParams& pv, const TransformerP& p, Var x, int heads) {
  for (const BlockP& blk : p.blocks) {
    Var normed = layer_norm(x, pv[blk.ln1.g], pv[blk.ln1.b]);
    x = add(x, attention(pv, blk, normed, heads));
    Var normed2 = layer_norm(x, pv[blk.ln2.g], pv[blk.ln2.b]);
    Var ff = linear(pv, blk.ff2, gelu(linear(pv, blk.ff1, normed2)));
    x = add(x, ff);
  }
  return layer_norm(x, pv[p.final_ln.g], pv[p.final_ln.b]);
}

Var patch_encode(const BoundParams& pv, const PatchEncoderP& p, Var patches) {
  Var h = gelu(conv1d(patches, pv[p.c1.w], pv[p.c1.b], p.c1.spec));
  h = gelu(conv1d(h, pv[p.c2.w], pv[p.c2.b], p.c2.spec));
  h = gelu(conv1d(h, pv[p.c3.w], pv[p.c3.b], p.c3.spec));
  return linear(pv, p.proj, h);
}

TokenizerModel make_tokenizer_model(const ModelConfig& cfg, int max_positions, Rng& rng) {
  cfg.validate();
  TokenizerModel m;
  m.cfg = cfg;
  m.max_positions = max_positions;
  Rng init = rng.stream("init/tokenizer");
  m.embed = add_patch_encoder(m.params, "embed", cfg.patch_len, cfg.embed_dim, init);
  m.pos_table = m.params.add("pos_table", rand_matrix(init, max_positions, cfg.embed_dim, 0.02));
  m.encoder = add_transformer(m.params, "enc", cfg.encoder_layers, cfg.embed_dim, cfg.ffn_dim, init);
  m.in_time = add_linear(m.params, "in_time", cfg.embed_dim, cfg.code_dim, init);
  m.in_freq = add_linear(m.params, "in_freq", cfg.embed_dim, cfg.code_dim, init);
  m.out_time = add_linear(m.params, "out_time", cfg.code_dim, cfg.embed_dim, init);
  m.out_freq = add_linear(m.params, "out_freq", cfg.code_dim, cfg.embed_dim, init);
  m.dec_time_trunk =
      add_transformer(m.params, "dec_t", cfg.decoder_layers, cfg.embed_dim, cfg.ffn_dim, init);
  m.dec_time_head = add_linear(m.params, "dec_t/head", cfg.embed_dim, cfg.patch_len, init);
  m.dec_freq_trunk =
      add_transformer(m.params, "dec_f", cfg.decoder_layers, cfg.embed_dim, cfg.ffn_dim, init);
  m.dec_freq_amp = add_linear(m.params, "dec_f/amp", cfg.embed_dim, cfg.patch_len, init);
  m.dec_freq_phase = add_linear(m.params, "dec_f/phase", cfg.embed_dim, cfg.patch_len, init);
  return m;
}

Var encoder_forward(const BoundParams& pv, const TokenizerModel& m, Tape& tape,
                    const Matd& patch_rows, const std::vector<int>& positions) {
  if (patch_rows.cols() != m.cfg.patch_len)
    raise(Err::ShapeMismatch, "patch length does not match model config");
  if (static_cast<Eigen::Index>(positions.size()) != patch_rows.rows())
    raise(Err::ShapeMismatch, "one position per patch required");
  for (int p : positions)
    if (p < 0 || p >= m.max_positions) raise(Err::IndexOutOfRange, "position out of table range");
  Var x = tape.constant(patch_rows);
  Var emb = patch_encode(pv, m.embed, x);
  Var pos = embedding_lookup(pv[m.pos_table], positions);
  Var with_pos = add(emb, pos);
  return transformer(pv, m.encoder, with_pos, m.cfg.heads);
}

Var decode_time_forward(const BoundParams& pv, const TokenizerModel& m, Var hq) {
  Var h = transformer(pv, m.dec_time_trunk, hq, m.cfg.heads);
  return linear(pv, m.dec_time_head, h);
}

std::pair<Var, Var> decode_freq_forward(const BoundParams& pv, const TokenizerModel& m, Var hq) {
  Var h = transformer(pv, m.dec_freq_trunk, hq, m.cfg.heads);
  Var amp = linear(pv, m.dec_freq_amp, h);
  Var phase = scale(tanh_op(linear(pv, m.dec_freq_phase, h)), kPi);
  return {amp, phase};
}

Matd encode(const TokenizerModel& m, const PatchGrid& grid) {
  Tape tape;
  BoundParams pv = bind(tape, m.params);
  std::vector<int> positions(grid.sequence_length());
  for (size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
  Var h = encoder_forward(pv, m, tape, grid.data, positions);
  return tape.value(h);
}

Matd decode_time(const TokenizerModel& m, const Matd& hq) {
  Tape tape;
  BoundParams pv = bind(tape, m.params);
  Var h = decode_time_forward(pv, m, tape.constant(hq));
  return tape.value(h);
}

std::pair<Matd, Matd> decode_freq(const TokenizerModel& m, const Matd& hq) {
  Tape tape;
  BoundParams pv = bind(tape, m.params);
  auto [amp, phase] = decode_freq_forward(pv, m, tape.constant(hq));
  return {tape.value(amp), tape.value(phase)};
}

PretrainModel make_pretrain_model(const ModelConfig& cfg, int max_positions, Rng& rng) {
  cfg.validate();
  PretrainModel m;
  m.cfg = cfg;
  m.max_positions = max_positions;
  Rng init = rng.stream("init/pretrain");
  m.embed = add_patch_encoder(m.params, "embed", cfg.patch_len, cfg.embed_dim, init);
  m.pos_table = m.params.add("pos_table", rand_matrix(init, max_positions, cfg.embed_dim, 0.02));
  m.mask_token = m.params.add("mask_token", rand_matrix(init, 1, cfg.embed_dim, 0.02));
  m.encoder = add_transformer(m.params, "enc", cfg.encoder_layers, cfg.embed_dim, cfg.ffn_dim, init);
  for (int domain = 0; domain < 2; ++domain) {
    PredictionHeads& heads = domain == 0 ? m.time_heads : m.freq_heads;
    const std::string tag = domain == 0 ? "time" : "freq";
    for (int l = 0; l < cfg.rvq_layers; ++l) {
      heads.ln.push_back(
          add_layer_norm(m.params, "head_" + tag + "/ln" + std::to_string(l), cfg.embed_dim));
      heads.head.push_back(add_linear(m.params, "head_" + tag + "/h" + std::to_string(l),
                                      cfg.embed_dim, cfg.codebook_size, init));
    }
    for (int l = 0; l + 1 < cfg.rvq_layers; ++l) {
      // zero start: conditioning signal grows only as the heads earn it
      heads.code_embed.push_back(m.params.add("head_" + tag + "/embed" + std::to_string(l),
                                              Mat::Zero(cfg.codebook_size, cfg.embed_dim)));
    }
  }
  return m;
}

Var embed_with_mask(const BoundParams& pv, const PretrainModel& m, Tape& tape,
                    const Matd& patch_rows, const std::vector<int>& positions,
                    const std::vector<int>& masked) {
  if (patch_rows.cols() != m.cfg.patch_len)
    raise(Err::ShapeMismatch, "patch length does not match model config");
  const int n = static_cast<int>(patch_rows.rows());
  if (static_cast<int>(positions.size()) != n)
    raise(Err::ShapeMismatch, "one position per patch required");
  for (int i : masked)
    if (i < 0 || i >= n) raise(Err::IndexOutOfRange, "mask index " + std::to_string(i));
  for (int p : positions)
    if (p < 0 || p >= m.max_positions) raise(Err::IndexOutOfRange, "position out of table range");

  Var emb = patch_encode(pv, m.embed, tape.constant(patch_rows));

  // rebuild rows: masked rows take the learned token, visible rows keep the
  // patch embedding; a 0/1 selector keeps everything on-tape
  Mat keep = Mat::Ones(n, 1);
  for (int i : masked) keep(i, 0) = 0.0;
  Mat keep_full = keep.replicate(1, m.cfg.embed_dim);
  Mat take_full = Mat::Ones(n, m.cfg.embed_dim) - keep_full;

  std::vector<int> zeros(n, 0);
  Var token_rows = embedding_lookup(pv[m.mask_token], zeros);  // n copies of the mask token
  Var kept = mul(emb, tape.constant(keep_full));
  Var injected = mul(token_rows, tape.constant(take_full));
  Var mixed = add(kept, injected);

  Var pos = embedding_lookup(pv[m.pos_table], positions);
  return add(mixed, pos);
}

Var encode_masked_forward(const BoundParams& pv, const PretrainModel& m, Tape& tape,
                          const Matd& patch_rows, const std::vector<int>& positions,
                          const std::vector<int>& masked) {
  Var x = embed_with_mask(pv, m, tape, patch_rows, positions, masked);
  return transformer(pv, m.encoder, x, m.cfg.heads);
}

Matd encode_masked(const PretrainModel& m, const PatchGrid& grid, const std::vector<int>& masked) {
  Tape tape;
  BoundParams pv = bind(tape, m.params);
  std::vector<int> positions(grid.sequence_length());
  for (size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
  Var h = encode_masked_forward(pv, m, tape, grid.data, positions, masked);
  return tape.value(h);
}

}  // namespace neurotok
