#pragma once

#include "neurotok/importance.hpp"
#include "neurotok/tokenizer_train.hpp"

#include <cstdint>
#include <vector>

namespace neurotok {

struct CodebookStats {
  std::vector<int64_t> histogram;
  int unused_count = 0;
  double normalized_entropy = 0.0;  // H(p) / log K
  double gini = 0.0;
  double top10_contribution = 0.0;  // share held by the ceil(K/10) most-used codes
};

CodebookStats codebook_stats(const std::vector<int64_t>& counts, int k_codes);

struct ReconTriple {
  double mse = 0.0;
  double pearson_r = 0.0;
  double snr_db = 0.0;
};

// Pearson is undefined for a constant original (ConstantSignal); perfect
// reconstruction reports the 120 dB serialization cap.
ReconTriple recon_metrics(const Vecd& original, const Vecd& reconstructed);

struct MaskReport {
  double mean_masked = 0.0;
  double mean_visible = 0.0;
  double gap = 0.0;
  double relative_increase = 0.0;
};

MaskReport mask_report(const ImportanceMap& scores, const MaskPlan& plan);

// Tokenize-and-decode fidelity over a corpus; per-patch metrics averaged
// (patches whose original is constant are skipped for the correlation mean).
struct ReconSummary {
  ReconTriple time;
  ReconTriple amplitude;
  ReconTriple phase;
};

ReconSummary evaluate_reconstruction(const TokenizerModel& model, const RvqStack& time_stack,
                                     const RvqStack& freq_stack, const TokenizerCorpus& corpus);

struct DepthResult {
  int depth = 0;
  ReconSummary recon;
};

// Trains one tokenizer per depth with a shared seed/config and reports
// reconstruction metrics; the configured rvq_layers value is overridden.
std::vector<DepthResult> rvq_depth_sweep(const TokenizerCorpus& corpus, const ModelConfig& mcfg,
                                         const TrainConfig& tcfg, const std::vector<int>& depths);

}  // namespace neurotok
