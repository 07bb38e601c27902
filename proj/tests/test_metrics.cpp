#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "neurotok/metrics.hpp"
#include "neurotok/rng.hpp"

#include <cmath>

using namespace neurotok;

TEST_CASE("uniform histogram: entropy 1, gini 0") {
  std::vector<int64_t> counts(16, 25);
  CodebookStats st = codebook_stats(counts, 16);
  CHECK(st.normalized_entropy == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(st.gini == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(st.unused_count == 0);
  CHECK(st.top10_contribution == doctest::Approx(2.0 / 16.0));  // ceil(16/10)=2 codes
}

TEST_CASE("point mass: entropy 0, gini (K-1)/K, K-1 unused") {
  std::vector<int64_t> counts(8, 0);
  counts[3] = 100;
  CodebookStats st = codebook_stats(counts, 8);
  CHECK(st.normalized_entropy == doctest::Approx(0.0));
  CHECK(st.gini == doctest::Approx(7.0 / 8.0).epsilon(1e-12));
  CHECK(st.unused_count == 7);
  CHECK(st.top10_contribution == doctest::Approx(1.0));
}

TEST_CASE("hand-built histogram [4,2,1,1]") {
  std::vector<int64_t> counts = {4, 2, 1, 1};
  CodebookStats st = codebook_stats(counts, 4);
  const double p[4] = {0.5, 0.25, 0.125, 0.125};
  double h = 0.0;
  for (double q : p) h -= q * std::log(q);
  CHECK(st.normalized_entropy == doctest::Approx(h / std::log(4.0)).epsilon(1e-12));
  // sorted ascending: .125 .125 .25 .5 -> G = sum (2i-K-1) p_(i) / K, i 1-based
  double gini = ((2 * 1 - 5) * 0.125 + (2 * 2 - 5) * 0.125 + (2 * 3 - 5) * 0.25 +
                 (2 * 4 - 5) * 0.5) /
                4.0;
  CHECK(st.gini == doctest::Approx(gini).epsilon(1e-12));
  CHECK(st.top10_contribution == doctest::Approx(0.5));  // ceil(4/10)=1 top code
}

TEST_CASE("recon metrics of identical vectors") {
  Vecd x(4);
  x << 1, 2, 3, 4;
  ReconTriple m = recon_metrics(x, x);
  CHECK(m.mse == 0.0);
  CHECK(m.pearson_r == doctest::Approx(1.0));
  CHECK(m.snr_db == 120.0);  // capped

  ReconTriple anti = recon_metrics(x, Vecd(-x));
  CHECK(anti.pearson_r == doctest::Approx(-1.0));
}

TEST_CASE("recon metrics by hand") {
  Vecd x(4), y(4);
  x << 1, 2, 3, 4;
  y << 1, 2, 3, 5;
  ReconTriple m = recon_metrics(x, y);
  CHECK(m.mse == doctest::Approx(0.25));
  CHECK(m.snr_db == doctest::Approx(10.0 * std::log10(30.0 / 1.0)).epsilon(1e-9));
}

TEST_CASE("constant original is rejected for pearson") {
  Vecd x = Vecd::Constant(5, 2.0);
  Vecd y(5);
  y << 1, 2, 3, 4, 5;
  try {
    (void)recon_metrics(x, y);
    FAIL("expected ConstantSignal");
  } catch (const Error& e) {
    CHECK(e.code() == Err::ConstantSignal);
  }
}

TEST_CASE("snr rises as error falls") {
  Rng rng(1);
  Vecd x(64);
  for (int i = 0; i < 64; ++i) x[i] = rng.uniform(-1.0, 1.0);
  Vecd noise(64);
  for (int i = 0; i < 64; ++i) noise[i] = rng.uniform(-1.0, 1.0);
  double prev = -1e9;
  for (double amp : {0.5, 0.25, 0.1, 0.01}) {
    ReconTriple m = recon_metrics(x, x + amp * noise);
    CHECK(m.snr_db > prev);
    prev = m.snr_db;
  }
}

TEST_CASE("mask report arithmetic and degenerate case") {
  std::vector<RawScores> raw(4);
  raw[0] = {1.0, 1.0, 0.0, 1.0, 1.0, 1.0};
  raw[1] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  raw[2] = {0.5, 0.5, 0.0, 0.5, 0.5, 0.5};
  raw[3] = {0.25, 0.25, 0.0, 0.25, 0.25, 0.25};
  ImportanceMap map = aggregate_scores(raw);
  MaskPlan plan;
  plan.mask = {0, 2};
  MaskReport rep = mask_report(map, plan);
  CHECK(rep.mean_masked == doctest::Approx((map.aggregate[0] + map.aggregate[2]) / 2));
  CHECK(rep.mean_visible == doctest::Approx((map.aggregate[1] + map.aggregate[3]) / 2));
  CHECK(rep.gap == doctest::Approx(rep.mean_masked - rep.mean_visible));
  CHECK(rep.relative_increase == doctest::Approx(rep.gap / rep.mean_visible));

  // all scores equal -> every aggregate is 0.5 -> gap exactly 0
  std::vector<RawScores> flat(4, RawScores{0.3, 0.3, 0.0, 0.3, 0.3, 0.3});
  ImportanceMap flat_map = aggregate_scores(flat);
  MaskReport flat_rep = mask_report(flat_map, plan);
  CHECK(flat_rep.gap == 0.0);
}

TEST_CASE("random plans have near-zero expected gap") {
  Rng rng(2);
  std::vector<RawScores> raw(30);
  for (auto& r : raw)
    r = {rng.uniform(), rng.uniform(), 0.0, rng.uniform(), rng.uniform(), rng.uniform()};
  ImportanceMap map = aggregate_scores(raw);
  double gap = 0.0;
  const int draws = 10000;
  for (int d = 0; d < draws; ++d) {
    MaskPlan plan = sample_mask(map, 0.5, 0.0, 0.8, rng);
    gap += mask_report(map, plan).gap;
  }
  CHECK(std::abs(gap / draws) < 0.02);
}
