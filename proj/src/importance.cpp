#include "neurotok/importance.hpp"

#include "neurotok/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace neurotok {

namespace {
constexpr double kEps = 1e-8;

double population_var(const Vecd& x) {
  double mu = x.mean();
  return (x.array() - mu).square().mean();
}

Vecd first_diff(const Vecd& x) {
  return x.tail(x.size() - 1) - x.head(x.size() - 1);
}
}  // namespace

HjorthMetrics hjorth(const Vecd& patch) {
  if (patch.size() < 3) raise(Err::PatchTooShort, "hjorth needs at least 3 samples");
  Vecd d1 = first_diff(patch);
  Vecd d2 = first_diff(d1);
  const double var_x = population_var(patch);
  const double var_d1 = population_var(d1);
  const double var_d2 = population_var(d2);
  HjorthMetrics m;
  m.activity = std::log(var_x + kEps);
  m.mobility = std::sqrt(var_d1 / (var_x + kEps));
  m.complexity = std::sqrt(var_d2 / (var_d1 + kEps)) / (m.mobility + kEps);
  return m;
}

double neural_band_ratio(const Vecd& power, const Vecd& freqs_hz) {
  if (power.size() != freqs_hz.size()) raise(Err::ShapeMismatch, "power/freqs length mismatch");
  double in_band = 0.0, total = 0.0;
  for (Eigen::Index k = 0; k < power.size(); ++k) {
    total += power[k];
    if (freqs_hz[k] >= 4.0 && freqs_hz[k] < 30.0) in_band += power[k];
  }
  return in_band / (total + kEps);
}

double artifact_penalty(const Vecd& power, const Vecd& freqs_hz) {
  if (power.size() != freqs_hz.size()) raise(Err::ShapeMismatch, "power/freqs length mismatch");
  double penalized = 0.0, total = 0.0;
  for (Eigen::Index k = 0; k < power.size(); ++k) {
    total += power[k];
    if (freqs_hz[k] < 2.0 || freqs_hz[k] >= 45.0) penalized += power[k];
  }
  return 1.0 - penalized / (total + kEps);
}

double irregularity(const Vecd& patch) {
  if (patch.size() < 3) raise(Err::PatchTooShort, "irregularity needs at least 3 samples");
  Vecd abs_d1 = first_diff(patch).cwiseAbs();
  Vecd d_abs = first_diff(abs_d1).cwiseAbs();
  return d_abs.mean() / (abs_d1.mean() + kEps);
}

ImportanceMap aggregate_scores(const std::vector<RawScores>& raw,
                               const std::array<double, 5>& alpha) {
  const int n = static_cast<int>(raw.size());
  if (n < 2) raise(Err::TooFewPatches, "min-max normalization needs at least 2 patches");

  ImportanceMap map;
  map.raw = raw;
  map.normalized.resize(n, 5);
  map.aggregate = Vecd::Zero(n);

  // column order matches the weight order: neural, clean, complexity, irreg, mobility
  auto metric = [&](const RawScores& s, int m) {
    switch (m) {
      case 0: return s.neural;
      case 1: return s.clean;
      case 2: return s.complexity;
      case 3: return s.irreg;
      default: return s.mobility;
    }
  };

  for (int m = 0; m < 5; ++m) {
    double lo = metric(raw[0], m), hi = lo;
    for (const RawScores& s : raw) {
      lo = std::min(lo, metric(s, m));
      hi = std::max(hi, metric(s, m));
    }
    const double span = hi - lo;
    for (int i = 0; i < n; ++i) {
      map.normalized(i, m) = span < 1e-12 ? 0.5 : (metric(raw[i], m) - lo) / span;
      map.aggregate[i] += alpha[m] * map.normalized(i, m);
    }
  }
  return map;
}

std::vector<RawScores> raw_scores(const PatchGrid& grid, double sample_rate_hz) {
  const int n = grid.sequence_length();
  const int p = grid.patch_len;
  DftBasis basis(p);
  Matd re, im;
  basis.forward(grid.data, re, im);
  const int bins = p / 2 + 1;

  std::vector<RawScores> raw(n);
  Vecd power(bins), freqs(bins);
  for (int k = 0; k < bins; ++k) freqs[k] = static_cast<double>(k) * sample_rate_hz / p;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < bins; ++k) power[k] = re(i, k) * re(i, k) + im(i, k) * im(i, k);
    Vecd patch = grid.data.row(i).transpose();
    HjorthMetrics hm = hjorth(patch);
    raw[i].neural = neural_band_ratio(power, freqs);
    raw[i].clean = artifact_penalty(power, freqs);
    raw[i].activity = hm.activity;
    raw[i].mobility = hm.mobility;
    raw[i].complexity = hm.complexity;
    raw[i].irreg = irregularity(patch);
  }
  return raw;
}

ImportanceMap score_grid(const PatchGrid& grid, double sample_rate_hz) {
  return aggregate_scores(raw_scores(grid, sample_rate_hz));
}

double curriculum_weight(int64_t step, int64_t total, double w0, double wmax) {
  if (total <= 0) return wmax;
  if (step < 0) step = 0;
  if (step > total) step = total;
  return w0 + (wmax - w0) * (static_cast<double>(step) / static_cast<double>(total));
}

MaskPlan sample_mask(const ImportanceMap& scores, double mask_ratio, double w, double tau,
                     Rng& rng) {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0))
    raise(Err::ShapeMismatch, "mask_ratio must lie in (0, 1)");
  if (!(tau > 0.0)) raise(Err::ShapeMismatch, "temperature must be positive");
  const int n = scores.size();

  MaskPlan plan;
  plan.w = w;
  plan.combined.resize(n);
  plan.uniform_draws.resize(n);
  std::vector<std::pair<double, int>> keys(n);
  for (int i = 0; i < n; ++i) {
    plan.uniform_draws[i] = rng.uniform();
    plan.combined[i] = w * scores.aggregate[i] + (1.0 - w) * plan.uniform_draws[i];
    const double gumbel = -std::log(-std::log(rng.uniform_pos()));
    keys[i] = {plan.combined[i] / tau + gumbel, i};
  }

  const int count = static_cast<int>(std::lround(mask_ratio * n));
  std::partial_sort(keys.begin(), keys.begin() + count, keys.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  plan.mask.reserve(count);
  for (int i = 0; i < count; ++i) plan.mask.push_back(keys[i].second);
  std::sort(plan.mask.begin(), plan.mask.end());
  return plan;
}

}  // namespace neurotok
