#include "neurotok/har_pretrain.hpp"

#include <algorithm>
#include <cmath>

namespace neurotok {

namespace {

std::vector<int> column_of(const Mati& codes, int col) {
  std::vector<int> out(codes.rows());
  for (Eigen::Index i = 0; i < codes.rows(); ++i) out[i] = codes(i, col);
  return out;
}

double top1_accuracy(const Matd& logits, const std::vector<int>& targets) {
  int hits = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    int best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = static_cast<int>(c);
    if (best == targets[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(std::max<Eigen::Index>(logits.rows(), 1));
}

const PredictionHeads& heads_of(const PretrainModel& m, Domain d) {
  return d == Domain::time ? m.time_heads : m.freq_heads;
}

}  // namespace

Var predict_layer_vars(Tape& tape, const BoundParams& pv, const PredictionHeads& heads,
                       Var h_rows, const Mati& gt_codes, int layer) {
  (void)tape;  // ops resolve the tape through the handles
  const int depth = static_cast<int>(heads.head.size());
  if (layer < 0 || layer >= depth) raise(Err::IndexOutOfRange, "prediction layer out of range");
  if (gt_codes.cols() < layer)
    raise(Err::ShapeMismatch, "need ground-truth codes for all preceding layers");

  Var cond = h_rows;
  for (int k = 0; k < layer; ++k) {
    std::vector<int> idx = column_of(gt_codes, k);
    cond = add(cond, embedding_lookup(pv[heads.code_embed[k]], idx));
  }
  Var normed = layer_norm(cond, pv[heads.ln[layer].g], pv[heads.ln[layer].b]);
  return linear(pv, heads.head[layer], normed);
}

Matd predict_layer(const PretrainModel& m, Domain domain, const Matd& h_rows,
                   const Mati& gt_codes, int layer) {
  Tape tape;
  BoundParams pv = bind(tape, m.params);
  Var logits = predict_layer_vars(tape, pv, heads_of(m, domain), tape.constant(h_rows),
                                  gt_codes, layer);
  return tape.value(logits);
}

HarLossVars har_loss_vars(Tape& tape, const BoundParams& pv, const PretrainModel& m,
                          Var h_masked, const Mati& time_codes, const Mati& freq_codes) {
  const Eigen::Index n = tape.value(h_masked).rows();
  if (n == 0) raise(Err::EmptyMask, "har loss needs at least one masked position");
  if (time_codes.rows() != n || freq_codes.rows() != n)
    raise(Err::ShapeMismatch, "token grid does not cover the masked positions");
  const int depth = m.cfg.rvq_layers;

  HarLossVars out;
  for (int domain = 0; domain < 2; ++domain) {
    const Mati& codes = domain == 0 ? time_codes : freq_codes;
    const PredictionHeads& heads = domain == 0 ? m.time_heads : m.freq_heads;
    for (int l = 0; l < depth; ++l) {
      Var logits = predict_layer_vars(tape, pv, heads, h_masked, codes, l);
      std::vector<int> targets = column_of(codes, l);
      Var ce = cross_entropy_with_logits(logits, targets);
      Var weighted = scale(ce, har_layer_weight(l));
      out.total = out.total.valid() ? add(out.total, weighted) : weighted;

      const double ce_val = tape.value(ce)(0, 0);
      const double acc = top1_accuracy(tape.value(logits), targets);
      if (domain == 0) {
        out.report.ce_time.push_back(ce_val);
        out.report.acc_time.push_back(acc);
      } else {
        out.report.ce_freq.push_back(ce_val);
        out.report.acc_freq.push_back(acc);
      }
    }
  }
  out.report.total = tape.value(out.total)(0, 0);
  return out;
}

HarLossReport har_loss(const PretrainModel& m, const Matd& h_masked, const Mati& time_codes,
                       const Mati& freq_codes) {
  Tape tape;
  BoundParams pv = bind(tape, m.params);
  return har_loss_vars(tape, pv, m, tape.constant(h_masked), time_codes, freq_codes).report;
}

IndependentLossVars independent_loss_vars(Tape& tape, const BoundParams& pv,
                                          const PretrainModel& m, Var h_masked,
                                          const Mati& time_codes, const Mati& freq_codes) {
  const Eigen::Index n = tape.value(h_masked).rows();
  if (n == 0) raise(Err::EmptyMask, "independent loss needs at least one masked position");
  const int depth = m.cfg.rvq_layers;
  const Mati no_conditioning(n, 0);

  IndependentLossVars out;
  for (int domain = 0; domain < 2; ++domain) {
    const Mati& codes = domain == 0 ? time_codes : freq_codes;
    const PredictionHeads& heads = domain == 0 ? m.time_heads : m.freq_heads;
    for (int l = 0; l < depth; ++l) {
      // heads see h alone: conditioning is skipped at every layer
      Var cond = layer_norm(h_masked, pv[heads.ln[l].g], pv[heads.ln[l].b]);
      Var logits = linear(pv, heads.head[l], cond);
      std::vector<int> targets = column_of(codes, l);
      Var ce = cross_entropy_with_logits(logits, targets);
      out.total = out.total.valid() ? add(out.total, ce) : ce;
      const double ce_val = tape.value(ce)(0, 0);
      const double acc = top1_accuracy(tape.value(logits), targets);
      if (domain == 0) {
        out.report.ce_time.push_back(ce_val);
        out.report.acc_time.push_back(acc);
      } else {
        out.report.ce_freq.push_back(ce_val);
        out.report.acc_freq.push_back(acc);
      }
    }
  }
  out.report.total = tape.value(out.total)(0, 0);
  return out;
}

double independent_loss(const PretrainModel& m, const Matd& h_masked, const Mati& time_codes,
                        const Mati& freq_codes) {
  Tape tape;
  BoundParams pv = bind(tape, m.params);
  return independent_loss_vars(tape, pv, m, tape.constant(h_masked), time_codes, freq_codes)
      .report.total;
}

TokenGrid autoregressive_infer(const PretrainModel& m, const Matd& h_rows) {
  const Eigen::Index n = h_rows.rows();
  const int depth = m.cfg.rvq_layers;
  TokenGrid out;
  out.time_codes.resize(n, depth);
  out.freq_codes.resize(n, depth);

  Tape tape;
  BoundParams pv = bind(tape, m.params);
  Var h = tape.constant(h_rows);
  for (int domain = 0; domain < 2; ++domain) {
    const PredictionHeads& heads = domain == 0 ? m.time_heads : m.freq_heads;
    Mati& codes = domain == 0 ? out.time_codes : out.freq_codes;
    Mati predicted(n, 0);
    for (int l = 0; l < depth; ++l) {
      Var logits = predict_layer_vars(tape, pv, heads, h, predicted, l);
      const Matd& lv = tape.value(logits);
      Mati next(n, l + 1);
      if (l > 0) next.leftCols(l) = predicted;
      for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        for (Eigen::Index c = 1; c < lv.cols(); ++c)
          if (lv(i, c) > lv(i, best)) best = static_cast<int>(c);
        codes(i, l) = best;
        next(i, l) = best;
      }
      predicted = next;
    }
  }
  return out;
}

double infer_disagreement(const PretrainModel& m, const Matd& h_rows, const TokenGrid& teacher) {
  TokenGrid infer = autoregressive_infer(m, h_rows);

  Tape tape;
  BoundParams pv = bind(tape, m.params);
  Var h = tape.constant(h_rows);
  int64_t diff = 0, total = 0;
  for (int domain = 0; domain < 2; ++domain) {
    const PredictionHeads& heads = domain == 0 ? m.time_heads : m.freq_heads;
    const Mati& gt = domain == 0 ? teacher.time_codes : teacher.freq_codes;
    const Mati& pred = domain == 0 ? infer.time_codes : infer.freq_codes;
    for (int l = 0; l < m.cfg.rvq_layers; ++l) {
      Var logits = predict_layer_vars(tape, pv, heads, h, gt, l);
      const Matd& lv = tape.value(logits);
      for (Eigen::Index i = 0; i < lv.rows(); ++i) {
        int best = 0;
        for (Eigen::Index c = 1; c < lv.cols(); ++c)
          if (lv(i, c) > lv(i, best)) best = static_cast<int>(c);
        diff += best != pred(i, l) ? 1 : 0;
        ++total;
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(diff) / static_cast<double>(total);
}

PretrainResult pretrain(const TokenizerCorpus& corpus, const TokenizerModel& tokenizer,
                        const RvqStack& time_stack, const RvqStack& freq_stack,
                        const TrainConfig& tcfg) {
  tcfg.validate();
  if (corpus.grids.empty()) raise(Err::TooFewPatches, "corpus is empty");
  const ModelConfig mcfg = tokenizer.cfg;
  const int n_samples = static_cast<int>(corpus.grids.size());

  // frozen tokenizer: targets and importance maps are fixed, compute once
  std::vector<TokenGrid> targets;
  std::vector<ImportanceMap> scores;
  targets.reserve(n_samples);
  scores.reserve(n_samples);
  int max_positions = 0;
  for (const PatchGrid& grid : corpus.grids) {
    targets.push_back(tokenize_grid(tokenizer, time_stack, freq_stack, grid));
    scores.push_back(score_grid(grid, corpus.sample_rate_hz));
    max_positions = std::max(max_positions, grid.sequence_length());
  }

  Rng root(mcfg.seed);
  PretrainModel model = make_pretrain_model(mcfg, max_positions, root);
  Rng data_rng = Rng(tcfg.seed).stream("data/pretrain");
  Rng mask_rng = Rng(tcfg.seed).stream("masking");

  const int steps_per_epoch = (n_samples + tcfg.batch_size - 1) / tcfg.batch_size;
  const int64_t total_steps = static_cast<int64_t>(tcfg.epochs) * steps_per_epoch;
  int64_t step = 0;

  std::vector<int> order(n_samples);
  for (int i = 0; i < n_samples; ++i) order[i] = i;

  std::vector<HarEpochRecord> history;
  const int depth = mcfg.rvq_layers;

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    for (int i = n_samples - 1; i > 0; --i) {
      int j = data_rng.uniform_int(i + 1);
      std::swap(order[i], order[j]);
    }

    HarEpochRecord rec;
    rec.epoch = epoch;
    rec.ce_time.assign(depth, 0.0);
    rec.ce_freq.assign(depth, 0.0);
    rec.acc_time.assign(depth, 0.0);
    rec.acc_freq.assign(depth, 0.0);
    int sample_evals = 0;

    for (int start = 0; start < n_samples; start += tcfg.batch_size) {
      const int count = std::min(tcfg.batch_size, n_samples - start);
      const double w = curriculum_weight(step, total_steps);
      rec.w = w;
      rec.lr = lr_at(step, tcfg, steps_per_epoch);

      std::vector<Mat> grad_accum;
      grad_accum.reserve(model.params.entries.size());
      for (const auto& e : model.params.entries)
        grad_accum.push_back(Mat::Zero(e.value.rows(), e.value.cols()));

      for (int bi = 0; bi < count; ++bi) {
        const int idx = order[start + bi];
        const PatchGrid& grid = corpus.grids[idx];
        MaskPlan plan = sample_mask(scores[idx], mcfg.mask_ratio, w, 0.8, mask_rng);
        if (plan.mask.empty()) raise(Err::EmptyMask, "mask plan selected no positions");

        Tape tape;
        BoundParams pv = bind(tape, model.params);
        std::vector<int> positions(grid.sequence_length());
        for (size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
        Var h = encode_masked_forward(pv, model, tape, grid.data, positions, plan.mask);
        Var h_masked = gather_rows(h, plan.mask);

        Mati t_codes(static_cast<Eigen::Index>(plan.mask.size()), depth);
        Mati f_codes(static_cast<Eigen::Index>(plan.mask.size()), depth);
        for (size_t r = 0; r < plan.mask.size(); ++r) {
          t_codes.row(r) = targets[idx].time_codes.row(plan.mask[r]);
          f_codes.row(r) = targets[idx].freq_codes.row(plan.mask[r]);
        }

        HarLossVars loss = har_loss_vars(tape, pv, model, h_masked, t_codes, f_codes);
        if (!std::isfinite(loss.report.total))
          raise(Err::NonFiniteLoss, "har loss diverged at step " + std::to_string(step));
        tape.backward(loss.total);
        for (size_t i = 0; i < grad_accum.size(); ++i) grad_accum[i] += tape.grad(pv.vars[i]);

        rec.l_har += loss.report.total;
        for (int l = 0; l < depth; ++l) {
          rec.ce_time[l] += loss.report.ce_time[l];
          rec.ce_freq[l] += loss.report.ce_freq[l];
          rec.acc_time[l] += loss.report.acc_time[l];
          rec.acc_freq[l] += loss.report.acc_freq[l];
        }
        ++sample_evals;
      }

      const double inv = 1.0 / static_cast<double>(count);
      for (Mat& g : grad_accum) g *= inv;
      AdamSettings adam;
      adam.lr = lr_at(step, tcfg, steps_per_epoch);
      adam.beta1 = tcfg.adam_beta1;
      adam.beta2 = tcfg.adam_beta2;
      adam.eps = tcfg.adam_eps;
      adam.weight_decay = tcfg.weight_decay;
      adamw_step(model.params, grad_accum, adam, step + 1);
      ++step;
    }

    const double inv_evals = 1.0 / std::max(1, sample_evals);
    rec.l_har *= inv_evals;
    for (int l = 0; l < depth; ++l) {
      rec.ce_time[l] *= inv_evals;
      rec.ce_freq[l] *= inv_evals;
      rec.acc_time[l] *= inv_evals;
      rec.acc_freq[l] *= inv_evals;
    }
    history.push_back(std::move(rec));
  }

  PretrainResult result;
  result.model = std::move(model);
  result.history = std::move(history);
  return result;
}

}  // namespace neurotok
