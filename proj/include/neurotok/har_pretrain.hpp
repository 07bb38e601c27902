#pragma once

#include "neurotok/importance.hpp"
#include "neurotok/nets.hpp"
#include "neurotok/rvq.hpp"
#include "neurotok/tokenizer_train.hpp"

#include <cmath>
#include <vector>

namespace neurotok {

// depth weight of layer l (0-indexed): 1, 0.5, 0.25, ...
inline double har_layer_weight(int layer) { return std::pow(2.0, -static_cast<double>(layer)); }

struct HarLossReport {
  std::vector<double> ce_time, ce_freq;    // cross-entropy per rvq layer
  std::vector<double> acc_time, acc_freq;  // top-1 accuracy per rvq layer
  double total = 0.0;                      // sum_l lambda_l (time_l + freq_l)
};

// on-tape builder used by the trainer; h_masked covers masked positions only
// and codes are the ground-truth tokenizer outputs at those positions
struct HarLossVars {
  Var total;
  HarLossReport report;
};
HarLossVars har_loss_vars(Tape& tape, const BoundParams& pv, const PretrainModel& m,
                          Var h_masked, const Mati& time_codes, const Mati& freq_codes);

// standalone evaluation over already-encoded masked positions
HarLossReport har_loss(const PretrainModel& m, const Matd& h_masked, const Mati& time_codes,
                       const Mati& freq_codes);

// logits for one layer given encoder output rows and ground-truth codes of
// all preceding layers ("cumulative" conditioning); layer 0 is unconditioned
Var predict_layer_vars(Tape& tape, const BoundParams& pv, const PredictionHeads& heads,
                       Var h_rows, const Mati& gt_codes, int layer);
Matd predict_layer(const PretrainModel& m, Domain domain, const Matd& h_rows,
                   const Mati& gt_codes, int layer);

// MAE-style baseline: every layer predicted independently from h, unit
// weights across layers
struct IndependentLossVars {
  Var total;
  HarLossReport report;
};
IndependentLossVars independent_loss_vars(Tape& tape, const BoundParams& pv,
                                          const PretrainModel& m, Var h_masked,
                                          const Mati& time_codes, const Mati& freq_codes);
double independent_loss(const PretrainModel& m, const Matd& h_masked, const Mati& time_codes,
                        const Mati& freq_codes);

// greedy argmax chain: layer l conditions on the model's own predictions
TokenGrid autoregressive_infer(const PretrainModel& m, const Matd& h_rows);

// fraction of (position, layer, domain) entries where autoregressive
// inference disagrees with teacher-forced argmax
double infer_disagreement(const PretrainModel& m, const Matd& h_rows, const TokenGrid& teacher);

struct HarEpochRecord {
  int epoch = 0;
  double l_har = 0.0;
  double lr = 0.0;
  double w = 0.0;  // curriculum weight at the last step of the epoch
  std::vector<double> ce_time, ce_freq;
  std::vector<double> acc_time, acc_freq;
};

struct PretrainResult {
  PretrainModel model;
  std::vector<HarEpochRecord> history;
};

// Targets come from the frozen tokenizer; masks follow the importance
// curriculum (tau = 0.8, w ramping 0.2 -> 0.7 over all steps).
PretrainResult pretrain(const TokenizerCorpus& corpus, const TokenizerModel& tokenizer,
                        const RvqStack& time_stack, const RvqStack& freq_stack,
                        const TrainConfig& tcfg);

}  // namespace neurotok
