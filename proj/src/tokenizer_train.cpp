#include "neurotok/tokenizer_train.hpp"

#include <algorithm>
#include <cmath>

namespace neurotok {

namespace {
constexpr double kPi = 3.141592653589793238462643383280;

// Sum over layers of per-row squared distance between sg[r^(l-1)] and the
// selected code, mean over rows. The residual is detached and the codes are
// EMA-owned constants, so the term contributes its value to the total loss
// but no gradient: the l2-normalization onto the unit sphere is what bounds
// the embeddings. (An encoder-side variant that routes this pull into the
// encoder collapses every embedding into one Voronoi cell at this scale:
// with deeper layers able to carry the information, the cheapest commitment
// is a single shared layer-1 code.)
Var commitment_term(Tape& tape, Var normalized, const RvqStack& stack,
                    const BatchQuantizeResult& bq) {
  const Eigen::Index n = tape.value(normalized).rows();
  Var acc{};
  Var residual = stop_gradient(normalized);
  for (int l = 0; l < stack.depth(); ++l) {
    Matd code_rows(n, stack.dim());
    for (Eigen::Index i = 0; i < n; ++i)
      code_rows.row(i) = stack.layers[l].scaled_code(bq.codes(i, l)).transpose();
    Var codes_const = tape.constant(code_rows);
    Var diff = sub(residual, codes_const);
    Var term = scale(sum(mul(diff, diff)), 1.0 / static_cast<double>(n));
    acc = acc.valid() ? add(acc, term) : term;
    residual = diff;  // r^(l) = r^(l-1) - v, same constants the quantizer chose
  }
  return acc;
}

bool should_reseed(const TokenizerTrainer& tr) {
  return !tr.reseeded && tr.reseed_step > 0 && tr.step_count == tr.reseed_step;
}

void seed_stack_from_rows(RvqStack& stack, const Matd& normalized_rows, Rng& rng) {
  Matd residual = normalized_rows;
  for (int l = 0; l < stack.depth(); ++l) {
    kmeanspp_seed(stack.layers[l], residual, rng);
    const Codebook& book = stack.layers[l];
    for (Eigen::Index i = 0; i < residual.rows(); ++i) {
      int best = 0;
      double best_d = (residual.row(i).transpose() - book.code_vectors.row(0).transpose()).squaredNorm();
      for (int k = 1; k < book.size(); ++k) {
        double d = (residual.row(i).transpose() - book.code_vectors.row(k).transpose()).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      residual.row(i) -= book.scaled_code(best).transpose();
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) raise(Err::MalformedConfig, "lr must be positive");
  if (epochs < 1) raise(Err::MalformedConfig, "epochs must be >= 1");
  if (batch_size < 1) raise(Err::MalformedConfig, "batch_size must be >= 1");
  if (warmup_epochs > epochs) raise(Err::MalformedConfig, "warmup_epochs must be <= epochs");
}

double lr_at(int64_t step, int64_t total_steps, int64_t warmup_steps, double lr, double min_lr) {
  if (step < 0) step = 0;
  if (warmup_steps > 0 && step < warmup_steps)
    return lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (step >= total_steps) return min_lr;
  if (total_steps <= warmup_steps) return lr;
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  return min_lr + 0.5 * (lr - min_lr) * (1.0 + std::cos(kPi * progress));
}

double lr_at(int64_t step, const TrainConfig& cfg, int steps_per_epoch) {
  const int64_t total = static_cast<int64_t>(cfg.epochs) * steps_per_epoch;
  const int64_t warmup = static_cast<int64_t>(cfg.warmup_epochs) * steps_per_epoch;
  return lr_at(step, total, warmup, cfg.lr, cfg.min_lr);
}

void adamw_step(ParamSet& params, const std::vector<Mat>& grads, const AdamSettings& s,
                int64_t t) {
  if (grads.size() != params.entries.size())
    raise(Err::ShapeMismatch, "one gradient per parameter required");
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(t));
  for (size_t i = 0; i < params.entries.size(); ++i) {
    auto& e = params.entries[i];
    const Mat& g = grads[i];
    e.adam_m = s.beta1 * e.adam_m + (1.0 - s.beta1) * g;
    e.adam_v = s.beta2 * e.adam_v + (1.0 - s.beta2) * g.cwiseProduct(g);
    Mat m_hat = e.adam_m / bc1;
    Mat v_hat = e.adam_v / bc2;
    e.value -=
        s.lr * (m_hat.array() / (v_hat.array().sqrt() + s.eps) + s.weight_decay * e.value.array())
            .matrix();
  }
}

TokenizerCorpus prepare_corpus(std::vector<PatchGrid> grids, double sample_rate_hz) {
  if (grids.empty()) raise(Err::TooFewPatches, "corpus is empty");
  TokenizerCorpus corpus;
  corpus.sample_rate_hz = sample_rate_hz;
  DftBasis basis(grids.front().patch_len);
  for (PatchGrid& g : grids) {
    if (g.patch_len != basis.patch_len())
      raise(Err::ShapeMismatch, "corpus mixes patch lengths");
    Matd amp, phase;
    basis.amplitude_phase_rows(g.data, amp, phase);
    corpus.amp_targets.push_back((amp.array() + 1.0).log().matrix());
    corpus.phase_targets.push_back(std::move(phase));
    corpus.grids.push_back(std::move(g));
  }
  return corpus;
}

TokenizerTrainer make_tokenizer_trainer(const TokenizerCorpus& corpus, const ModelConfig& mcfg,
                                        const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  if (corpus.grids.empty()) raise(Err::TooFewPatches, "corpus is empty");

  int max_positions = 0;
  for (const PatchGrid& g : corpus.grids)
    max_positions = std::max(max_positions, g.sequence_length());

  TokenizerTrainer tr;
  Rng root(mcfg.seed);
  tr.model = make_tokenizer_model(mcfg, max_positions, root);
  Rng stack_rng = root.stream("init/rvq");
  tr.time_stack =
      make_rvq_stack(mcfg.rvq_layers, mcfg.codebook_size, mcfg.code_dim, Domain::time, stack_rng);
  tr.freq_stack =
      make_rvq_stack(mcfg.rvq_layers, mcfg.codebook_size, mcfg.code_dim, Domain::freq, stack_rng);
  tr.cfg = tcfg;
  tr.steps_per_epoch =
      static_cast<int>((corpus.grids.size() + tcfg.batch_size - 1) / tcfg.batch_size);
  tr.total_steps = static_cast<int64_t>(tcfg.epochs) * tr.steps_per_epoch;
  tr.reseed_step = std::max<int64_t>(static_cast<int64_t>(tcfg.warmup_epochs) * tr.steps_per_epoch,
                                     tr.total_steps / 3);
  tr.data_rng = Rng(tcfg.seed).stream("data");
  tr.dropout_rng = Rng(tcfg.seed).stream("quantizer-dropout");
  tr.corpus = &corpus;
  return tr;
}

LossReport tokenizer_step(TokenizerTrainer& tr, const std::vector<int>& sample_indices,
                          std::vector<std::vector<int64_t>>* usage_time,
                          std::vector<std::vector<int64_t>>* usage_freq) {
  if (sample_indices.empty()) raise(Err::TooFewPatches, "empty batch");
  const TokenizerCorpus& corpus = *tr.corpus;
  const ModelConfig& mcfg = tr.model.cfg;

  // residual-aware k-means++ seeding: once from the first batch, once more
  // after the early transient so no code is stranded outside the settled
  // embedding cloud
  const bool seed_now = !tr.stacks_seeded;
  const bool reseed_now = should_reseed(tr);
  if (seed_now || reseed_now) {
    std::vector<Matd> en_t_rows, en_f_rows;
    Eigen::Index total = 0;
    for (int idx : sample_indices) {
      Tape tape;
      BoundParams pv = bind(tape, tr.model.params);
      const PatchGrid& grid = corpus.grids[idx];
      std::vector<int> positions(grid.sequence_length());
      for (size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
      Var h = encoder_forward(pv, tr.model, tape, grid.data, positions);
      Matd et = tape.value(linear(pv, tr.model.in_time, h));
      Matd ef = tape.value(linear(pv, tr.model.in_freq, h));
      en_t_rows.push_back(l2_normalize_rows_plain(et));
      en_f_rows.push_back(l2_normalize_rows_plain(ef));
      total += et.rows();
    }
    Matd all_t(total, mcfg.code_dim), all_f(total, mcfg.code_dim);
    Eigen::Index at = 0;
    for (size_t s = 0; s < en_t_rows.size(); ++s) {
      all_t.middleRows(at, en_t_rows[s].rows()) = en_t_rows[s];
      all_f.middleRows(at, en_f_rows[s].rows()) = en_f_rows[s];
      at += en_t_rows[s].rows();
    }
    Rng seed_rng = Rng(mcfg.seed).stream(seed_now ? "init/kmeanspp" : "init/kmeanspp2");
    seed_stack_from_rows(tr.time_stack, all_t, seed_rng);
    seed_stack_from_rows(tr.freq_stack, all_f, seed_rng);
    tr.stacks_seeded = true;
    if (reseed_now) tr.reseeded = true;
  }

  std::vector<Mat> grad_accum;
  grad_accum.reserve(tr.model.params.entries.size());
  for (const auto& e : tr.model.params.entries)
    grad_accum.push_back(Mat::Zero(e.value.rows(), e.value.cols()));

  std::vector<std::vector<std::pair<int, Vecd>>> assign_t(tr.time_stack.depth());
  std::vector<std::vector<std::pair<int, Vecd>>> assign_f(tr.freq_stack.depth());

  // one random decode depth per step, shared by both domains
  const int active_depth = 1 + tr.dropout_rng.uniform_int(mcfg.rvq_layers);

  LossReport report;
  for (int idx : sample_indices) {
    const PatchGrid& grid = corpus.grids[idx];
    const Eigen::Index n = grid.data.rows();
    Tape tape;
    BoundParams pv = bind(tape, tr.model.params);
    std::vector<int> positions(grid.sequence_length());
    for (size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);

    Var h = encoder_forward(pv, tr.model, tape, grid.data, positions);
    Var en_t = l2_normalize_rows(linear(pv, tr.model.in_time, h));
    Var en_f = l2_normalize_rows(linear(pv, tr.model.in_freq, h));

    BatchQuantizeResult bq_t = quantize_rows(tr.time_stack, tape.value(en_t));
    BatchQuantizeResult bq_f = quantize_rows(tr.freq_stack, tape.value(en_f));
    Matd q_t = prefix_quantized(tr.time_stack, bq_t.codes, active_depth);
    Matd q_f = prefix_quantized(tr.freq_stack, bq_f.codes, active_depth);

    Var hq_t = linear(pv, tr.model.out_time, straight_through(en_t, q_t));
    Var hq_f = linear(pv, tr.model.out_freq, straight_through(en_f, q_f));

    Var y_time = decode_time_forward(pv, tr.model, hq_t);
    auto [y_amp, y_phase] = decode_freq_forward(pv, tr.model, hq_f);

    Var l_time = mse(y_time, grid.data);
    Var l_amp = mse(y_amp, corpus.amp_targets[idx]);
    Var l_phase{};
    if (tr.cfg.phase_cosine_loss) {
      Var diff = sub(y_phase, tape.constant(corpus.phase_targets[idx]));
      Var ones = tape.constant(Mat::Ones(n, mcfg.patch_len));
      l_phase = mean(sub(ones, cos_op(diff)));
    } else {
      l_phase = mse(y_phase, corpus.phase_targets[idx]);
    }

    Var commit = add(commitment_term(tape, en_t, tr.time_stack, bq_t),
                     commitment_term(tape, en_f, tr.freq_stack, bq_f));
    Var l_total =
        add(add(add(l_time, l_amp), l_phase), scale(commit, tr.cfg.commitment_beta));

    const double total_val = tape.value(l_total)(0, 0);
    if (!std::isfinite(total_val))
      raise(Err::NonFiniteLoss, "loss diverged at step " + std::to_string(tr.step_count) +
                                    " (sample " + std::to_string(idx) + ")");

    tape.backward(l_total);
    for (size_t i = 0; i < grad_accum.size(); ++i) grad_accum[i] += tape.grad(pv.vars[i]);

    report.l_time += tape.value(l_time)(0, 0);
    report.l_freq_amp += tape.value(l_amp)(0, 0);
    report.l_freq_phase += tape.value(l_phase)(0, 0);
    report.l_commit += tr.cfg.commitment_beta * tape.value(commit)(0, 0);
    report.l_total += total_val;

    for (int l = 0; l < tr.time_stack.depth(); ++l) {
      for (Eigen::Index i = 0; i < n; ++i) {
        assign_t[l].emplace_back(bq_t.codes(i, l), bq_t.residual_in[l].row(i).transpose());
        assign_f[l].emplace_back(bq_f.codes(i, l), bq_f.residual_in[l].row(i).transpose());
        if (usage_time) (*usage_time)[l][bq_t.codes(i, l)] += 1;
        if (usage_freq) (*usage_freq)[l][bq_f.codes(i, l)] += 1;
      }
    }
  }

  const double inv_batch = 1.0 / static_cast<double>(sample_indices.size());
  for (Mat& g : grad_accum) g *= inv_batch;
  report.l_time *= inv_batch;
  report.l_freq_amp *= inv_batch;
  report.l_freq_phase *= inv_batch;
  report.l_commit *= inv_batch;
  report.l_total *= inv_batch;

  AdamSettings adam;
  adam.lr = lr_at(tr.step_count, tr.cfg, tr.steps_per_epoch);
  adam.beta1 = tr.cfg.adam_beta1;
  adam.beta2 = tr.cfg.adam_beta2;
  adam.eps = tr.cfg.adam_eps;
  adam.weight_decay = tr.cfg.weight_decay;
  adamw_step(tr.model.params, grad_accum, adam, tr.step_count + 1);

  for (int l = 0; l < tr.time_stack.depth(); ++l) {
    ema_update(tr.time_stack.layers[l], assign_t[l]);
    ema_update(tr.freq_stack.layers[l], assign_f[l]);
  }
  tr.step_count += 1;
  return report;
}

TokenizerTrainResult train_tokenizer(const TokenizerCorpus& corpus, const ModelConfig& mcfg,
                                     const TrainConfig& tcfg) {
  TokenizerTrainer tr = make_tokenizer_trainer(corpus, mcfg, tcfg);
  const int n_samples = static_cast<int>(corpus.grids.size());

  std::vector<TokenizerEpochRecord> history;
  std::vector<int> order(n_samples);
  for (int i = 0; i < n_samples; ++i) order[i] = i;

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    // Fisher-Yates with the dedicated data stream
    for (int i = n_samples - 1; i > 0; --i) {
      int j = tr.data_rng.uniform_int(i + 1);
      std::swap(order[i], order[j]);
    }

    std::vector<std::vector<int64_t>> usage_t(
        tr.time_stack.depth(), std::vector<int64_t>(mcfg.codebook_size, 0));
    std::vector<std::vector<int64_t>> usage_f(
        tr.freq_stack.depth(), std::vector<int64_t>(mcfg.codebook_size, 0));

    TokenizerEpochRecord rec;
    rec.epoch = epoch;
    int steps = 0;
    double last_lr = 0.0;
    for (int start = 0; start < n_samples; start += tcfg.batch_size) {
      const int count = std::min(tcfg.batch_size, n_samples - start);
      std::vector<int> batch(order.begin() + start, order.begin() + start + count);
      last_lr = lr_at(tr.step_count, tcfg, tr.steps_per_epoch);
      LossReport lr_rep = tokenizer_step(tr, batch, &usage_t, &usage_f);
      rec.losses.l_time += lr_rep.l_time;
      rec.losses.l_freq_amp += lr_rep.l_freq_amp;
      rec.losses.l_freq_phase += lr_rep.l_freq_phase;
      rec.losses.l_commit += lr_rep.l_commit;
      rec.losses.l_total += lr_rep.l_total;
      ++steps;
    }
    const double inv = 1.0 / std::max(1, steps);
    rec.losses.l_time *= inv;
    rec.losses.l_freq_amp *= inv;
    rec.losses.l_freq_phase *= inv;
    rec.losses.l_commit *= inv;
    rec.losses.l_total *= inv;
    rec.lr = last_lr;
    for (int l = 0; l < tr.time_stack.depth(); ++l) {
      rec.unused_time.push_back(static_cast<int>(
          std::count(usage_t[l].begin(), usage_t[l].end(), 0)));
      rec.unused_freq.push_back(static_cast<int>(
          std::count(usage_f[l].begin(), usage_f[l].end(), 0)));
    }
    history.push_back(std::move(rec));
  }

  TokenizerTrainResult result;
  result.model = std::move(tr.model);
  result.time_stack = std::move(tr.time_stack);
  result.freq_stack = std::move(tr.freq_stack);
  result.history = std::move(history);
  return result;
}

TokenGrid tokenize_grid(const TokenizerModel& model, const RvqStack& time_stack,
                        const RvqStack& freq_stack, const PatchGrid& grid) {
  Tape tape;
  BoundParams pv = bind(tape, model.params);
  std::vector<int> positions(grid.sequence_length());
  for (size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
  Var h = encoder_forward(pv, model, tape, grid.data, positions);
  Matd en_t = l2_normalize_rows_plain(tape.value(linear(pv, model.in_time, h)));
  Matd en_f = l2_normalize_rows_plain(tape.value(linear(pv, model.in_freq, h)));
  TokenGrid tokens;
  tokens.time_codes = quantize_rows(time_stack, en_t).codes;
  tokens.freq_codes = quantize_rows(freq_stack, en_f).codes;
  return tokens;
}

}  // namespace neurotok
