#include "neurotok/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace neurotok {

namespace {
constexpr double kSnrCapDb = 120.0;

double pearson(const Vecd& x, const Vecd& y) {
  const double mx = x.mean(), my = y.mean();
  Vecd dx = x.array() - mx;
  Vecd dy = y.array() - my;
  const double sx = dx.norm(), sy = dy.norm();
  if (sx < 1e-300) raise(Err::ConstantSignal, "pearson undefined for constant original");
  if (sy < 1e-300) return 0.0;  // constant reconstruction carries no correlation
  return std::clamp(dx.dot(dy) / (sx * sy), -1.0, 1.0);
}

void accumulate(ReconTriple& acc, const ReconTriple& item) {
  acc.mse += item.mse;
  acc.pearson_r += item.pearson_r;
  acc.snr_db += item.snr_db;
}

ReconTriple averaged(ReconTriple acc, int n) {
  const double inv = 1.0 / std::max(1, n);
  acc.mse *= inv;
  acc.pearson_r *= inv;
  acc.snr_db *= inv;
  return acc;
}
}  // namespace

CodebookStats codebook_stats(const std::vector<int64_t>& counts, int k_codes) {
  if (k_codes < 2) raise(Err::TooFewPatches, "codebook stats need K >= 2");
  if (static_cast<int>(counts.size()) != k_codes)
    raise(Err::ShapeMismatch, "histogram length must equal K");

  CodebookStats stats;
  stats.histogram = counts;
  int64_t total = 0;
  for (int64_t c : counts) {
    if (c < 0) raise(Err::ShapeMismatch, "negative count");
    total += c;
    if (c == 0) ++stats.unused_count;
  }
  if (total == 0) return stats;

  std::vector<double> p(counts.size());
  for (size_t k = 0; k < counts.size(); ++k)
    p[k] = static_cast<double>(counts[k]) / static_cast<double>(total);

  double entropy = 0.0;
  for (double q : p)
    if (q > 0.0) entropy -= q * std::log(q);
  stats.normalized_entropy = entropy / std::log(static_cast<double>(k_codes));

  // standard sorted-cumulative estimator, zero-count codes included
  std::vector<double> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  double gini = 0.0;
  for (size_t i = 0; i < sorted.size(); ++i)
    gini += (2.0 * (static_cast<double>(i) + 1.0) - k_codes - 1.0) * sorted[i];
  stats.gini = gini / static_cast<double>(k_codes);

  const int top = (k_codes + 9) / 10;  // ceil(K/10)
  std::vector<double> desc = p;
  std::sort(desc.begin(), desc.end(), std::greater<>());
  double share = 0.0;
  for (int i = 0; i < top; ++i) share += desc[i];
  stats.top10_contribution = share;
  return stats;
}

ReconTriple recon_metrics(const Vecd& original, const Vecd& reconstructed) {
  if (original.size() != reconstructed.size())
    raise(Err::ShapeMismatch, "recon metrics need equal lengths");
  if (original.size() < 2) raise(Err::TooFewPatches, "recon metrics need length >= 2");

  ReconTriple out;
  Vecd err = original - reconstructed;
  out.mse = err.squaredNorm() / static_cast<double>(original.size());
  out.pearson_r = pearson(original, reconstructed);
  const double sig = original.squaredNorm();
  const double noise = err.squaredNorm();
  if (noise <= 0.0 || 10.0 * std::log10(sig / noise) > kSnrCapDb) {
    out.snr_db = kSnrCapDb;
  } else {
    out.snr_db = 10.0 * std::log10(sig / noise);
  }
  return out;
}

MaskReport mask_report(const ImportanceMap& scores, const MaskPlan& plan) {
  const int n = scores.size();
  std::vector<bool> masked(n, false);
  for (int i : plan.mask) {
    if (i < 0 || i >= n) raise(Err::IndexOutOfRange, "mask index outside the score map");
    masked[i] = true;
  }
  double sum_m = 0.0, sum_v = 0.0;
  int cnt_m = 0, cnt_v = 0;
  for (int i = 0; i < n; ++i) {
    if (masked[i]) {
      sum_m += scores.aggregate[i];
      ++cnt_m;
    } else {
      sum_v += scores.aggregate[i];
      ++cnt_v;
    }
  }
  MaskReport rep;
  rep.mean_masked = cnt_m ? sum_m / cnt_m : 0.0;
  rep.mean_visible = cnt_v ? sum_v / cnt_v : 0.0;
  rep.gap = rep.mean_masked - rep.mean_visible;
  rep.relative_increase = rep.gap / std::max(rep.mean_visible, 1e-12);
  return rep;
}

ReconSummary evaluate_reconstruction(const TokenizerModel& model, const RvqStack& time_stack,
                                     const RvqStack& freq_stack, const TokenizerCorpus& corpus) {
  ReconSummary acc;
  int time_n = 0, amp_n = 0, phase_n = 0;

  for (size_t s = 0; s < corpus.grids.size(); ++s) {
    const PatchGrid& grid = corpus.grids[s];
    Tape tape;
    BoundParams pv = bind(tape, model.params);
    std::vector<int> positions(grid.sequence_length());
    for (size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
    Var h = encoder_forward(pv, model, tape, grid.data, positions);
    Matd en_t = l2_normalize_rows_plain(tape.value(linear(pv, model.in_time, h)));
    Matd en_f = l2_normalize_rows_plain(tape.value(linear(pv, model.in_freq, h)));
    Matd q_t = quantize_rows(time_stack, en_t).quantized;
    Matd q_f = quantize_rows(freq_stack, en_f).quantized;

    Var hq_t = linear(pv, model.out_time, tape.constant(q_t));
    Var hq_f = linear(pv, model.out_freq, tape.constant(q_f));
    Matd y_time = tape.value(decode_time_forward(pv, model, hq_t));
    auto [amp_v, phase_v] = decode_freq_forward(pv, model, hq_f);
    Matd y_amp = tape.value(amp_v);
    Matd y_phase = tape.value(phase_v);

    for (Eigen::Index r = 0; r < grid.data.rows(); ++r) {
      Vecd orig = grid.data.row(r).transpose();
      Vecd rec = y_time.row(r).transpose();
      if ((orig.array() - orig.mean()).abs().maxCoeff() > 1e-300) {
        accumulate(acc.time, recon_metrics(orig, rec));
        ++time_n;
      }
      Vecd amp_t = corpus.amp_targets[s].row(r).transpose();
      Vecd amp_p = y_amp.row(r).transpose();
      if ((amp_t.array() - amp_t.mean()).abs().maxCoeff() > 1e-300) {
        accumulate(acc.amplitude, recon_metrics(amp_t, amp_p));
        ++amp_n;
      }
      Vecd ph_t = corpus.phase_targets[s].row(r).transpose();
      Vecd ph_p = y_phase.row(r).transpose();
      if ((ph_t.array() - ph_t.mean()).abs().maxCoeff() > 1e-300) {
        accumulate(acc.phase, recon_metrics(ph_t, ph_p));
        ++phase_n;
      }
    }
  }
  ReconSummary out;
  out.time = averaged(acc.time, time_n);
  out.amplitude = averaged(acc.amplitude, amp_n);
  out.phase = averaged(acc.phase, phase_n);
  return out;
}

std::vector<DepthResult> rvq_depth_sweep(const TokenizerCorpus& corpus, const ModelConfig& mcfg,
                                         const TrainConfig& tcfg, const std::vector<int>& depths) {
  if (depths.empty()) raise(Err::TooFewPatches, "depth sweep needs at least one depth");
  std::vector<DepthResult> results;
  for (int depth : depths) {
    ModelConfig cfg = mcfg;
    cfg.rvq_layers = depth;
    TokenizerTrainResult trained = train_tokenizer(corpus, cfg, tcfg);
    DepthResult r;
    r.depth = depth;
    r.recon = evaluate_reconstruction(trained.model, trained.time_stack, trained.freq_stack, corpus);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace neurotok
