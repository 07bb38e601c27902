#pragma once

#include "neurotok/common.hpp"
#include "neurotok/patching.hpp"
#include "neurotok/rng.hpp"

#include <array>
#include <vector>

namespace neurotok {

struct HjorthMetrics {
  double activity = 0.0;
  double mobility = 0.0;
  double complexity = 0.0;
};

// activity = log(Var(x)+eps); mobility = sqrt(Var(dx)/(Var(x)+eps));
// complexity = sqrt(Var(ddx)/(Var(dx)+eps)) / (mobility+eps); eps = 1e-8
HjorthMetrics hjorth(const Vecd& patch);

// share of PSD mass inside [4, 30) Hz
double neural_band_ratio(const Vecd& power, const Vecd& freqs_hz);

// 1 - share of PSD mass below 2 Hz or at/above 45 Hz
double artifact_penalty(const Vecd& power, const Vecd& freqs_hz);

// E[|d|dx||] / (E[|dx|] + eps)
double irregularity(const Vecd& patch);

struct RawScores {
  double neural = 0.0;
  double clean = 0.0;
  double activity = 0.0;
  double mobility = 0.0;
  double complexity = 0.0;
  double irreg = 0.0;
};

// Activity is computed and carried for reporting but the aggregate weights
// cover exactly five metrics: (neural, clean, complexity, irreg, mobility).
inline constexpr std::array<double, 5> kAggregateWeights = {0.30, 0.25, 0.20, 0.15, 0.10};

struct ImportanceMap {
  std::vector<RawScores> raw;  // per patch, flattened (c, a)
  Matd normalized;             // N×5: neural, clean, complexity, irreg, mobility in [0,1]
  Vecd aggregate;              // N, in [0,1]

  int size() const { return static_cast<int>(raw.size()); }
};

// Min-max normalizes each metric across the sample's patches (a constant
// metric maps to 0.5 everywhere) and combines with the stated weights.
ImportanceMap aggregate_scores(const std::vector<RawScores>& raw,
                               const std::array<double, 5>& alpha = kAggregateWeights);

// Raw metrics for every patch of a grid, then aggregate_scores.
std::vector<RawScores> raw_scores(const PatchGrid& grid, double sample_rate_hz);
ImportanceMap score_grid(const PatchGrid& grid, double sample_rate_hz);

// linear ramp w0 -> wmax over [0, total]
double curriculum_weight(int64_t step, int64_t total, double w0 = 0.2, double wmax = 0.7);

struct MaskPlan {
  std::vector<int> mask;  // ascending, |mask| = round(mask_ratio * N)
  Vecd combined;          // S_hat per patch
  Vecd uniform_draws;     // U per patch
  double w = 0.0;
};

// S_hat = w*S + (1-w)*U with fresh uniforms; indices drawn without
// replacement with probability proportional to exp(S_hat/tau) via the
// Gumbel-top-k trick (exact for this distribution).
MaskPlan sample_mask(const ImportanceMap& scores, double mask_ratio, double w, double tau,
                     Rng& rng);

}  // namespace neurotok
