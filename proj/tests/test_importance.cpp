#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "neurotok/importance.hpp"
#include "neurotok/rng.hpp"
#include "neurotok/spectral.hpp"

#include <cmath>

using namespace neurotok;

namespace {

constexpr double kEps = 1e-8;

double population_var(const Vecd& x) {
  double mu = x.mean();
  return (x.array() - mu).square().mean();
}

// brute-force re-implementation of the variance-ratio formulas
HjorthMetrics hjorth_oracle(const Vecd& x) {
  const int p = static_cast<int>(x.size());
  Vecd d1(p - 1), d2(p - 2);
  for (int i = 0; i < p - 1; ++i) d1[i] = x[i + 1] - x[i];
  for (int i = 0; i < p - 2; ++i) d2[i] = d1[i + 1] - d1[i];
  HjorthMetrics m;
  m.activity = std::log(population_var(x) + kEps);
  m.mobility = std::sqrt(population_var(d1) / (population_var(x) + kEps));
  m.complexity = std::sqrt(population_var(d2) / (population_var(d1) + kEps)) / (m.mobility + kEps);
  return m;
}

Vecd random_patch(Rng& rng, int p) {
  Vecd x(p);
  for (int i = 0; i < p; ++i) x[i] = rng.uniform(-1.0, 1.0);
  return x;
}

Vecd tone(double freq, double fs, int p, double amp = 1.0) {
  Vecd x(p);
  for (int n = 0; n < p; ++n) x[n] = amp * std::sin(2.0 * M_PI * freq * n / fs);
  return x;
}

}  // namespace

TEST_CASE("hjorth of a constant patch") {
  HjorthMetrics m = hjorth(Vecd::Constant(50, 3.0));
  CHECK(m.activity == doctest::Approx(std::log(kEps)));
  CHECK(m.mobility == 0.0);
  CHECK(m.complexity == 0.0);  // 0/eps convention
}

TEST_CASE("hjorth matches the direct-variance oracle on noise") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    Vecd x = random_patch(rng, 100);
    HjorthMetrics a = hjorth(x);
    HjorthMetrics b = hjorth_oracle(x);
    CHECK(std::abs(a.activity - b.activity) < 1e-9);
    CHECK(std::abs(a.mobility - b.mobility) < 1e-9);
    CHECK(std::abs(a.complexity - b.complexity) < 1e-9);
  }
}

TEST_CASE("mobility of a sinusoid approximates 2 sin(pi f / fs)") {
  const double fs = 200.0;
  for (double f : {5.0, 10.0, 20.0}) {
    Vecd x = tone(f, fs, 400);
    HjorthMetrics m = hjorth(x);
    double expected = 2.0 * std::sin(M_PI * f / fs);
    CHECK(m.mobility == doctest::Approx(expected).epsilon(0.05));
  }
}

TEST_CASE("hjorth needs at least 3 samples") {
  CHECK_THROWS_AS((void)hjorth(Vecd::Ones(2)), Error);
}

TEST_CASE("neural band ratio extremes") {
  Vecd power, freqs;
  psd(tone(10.0, 200.0, 200), 200.0, power, freqs);
  CHECK(neural_band_ratio(power, freqs) > 0.97);
  psd(tone(50.0, 200.0, 200), 200.0, power, freqs);
  CHECK(neural_band_ratio(power, freqs) < 0.03);
}

TEST_CASE("two equal tones split the neural ratio") {
  Vecd x = tone(10.0, 200.0, 200) + tone(50.0, 200.0, 200);
  Vecd power, freqs;
  psd(x, 200.0, power, freqs);
  CHECK(neural_band_ratio(power, freqs) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("artifact penalty extremes") {
  Vecd power, freqs;
  psd(tone(1.0, 200.0, 200), 200.0, power, freqs);
  CHECK(artifact_penalty(power, freqs) < 0.03);
  psd(tone(10.0, 200.0, 200), 200.0, power, freqs);
  CHECK(artifact_penalty(power, freqs) > 0.97);
  Vecd both = tone(1.0, 200.0, 200) + tone(10.0, 200.0, 200);
  psd(both, 200.0, power, freqs);
  CHECK(artifact_penalty(power, freqs) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("irregularity of a linear ramp is zero") {
  Vecd x(20);
  for (int i = 0; i < 20; ++i) x[i] = 0.5 * i;
  CHECK(irregularity(x) == doctest::Approx(0.0));
}

TEST_CASE("irregularity by hand") {
  // x = 0,1,-1,2: d = 1,-2,3; |d| = 1,2,3; |d|d|| = 1,1 -> mean 1; mean|d| = 2
  Vecd x(4);
  x << 0, 1, -1, 2;
  CHECK(irregularity(x) == doctest::Approx(1.0 / (2.0 + kEps)));

  // alternating sign, constant magnitude: numerator vanishes
  Vecd alt(6);
  alt << 1, -1, 1, -1, 1, -1;
  CHECK(irregularity(alt) == doctest::Approx(0.0));
}

TEST_CASE("constant patch has zero irregularity") {
  CHECK(irregularity(Vecd::Constant(10, 4.0)) == doctest::Approx(0.0));
}

TEST_CASE("scale invariance of the ratio metrics; activity shifts by 2 log a") {
  Rng rng(2);
  Vecd x = random_patch(rng, 128);
  const double a = 3.7;
  Vecd xs = a * x;

  HjorthMetrics m1 = hjorth(x), m2 = hjorth(xs);
  CHECK(m2.mobility == doctest::Approx(m1.mobility).epsilon(1e-6));
  CHECK(m2.complexity == doctest::Approx(m1.complexity).epsilon(1e-6));
  CHECK(m2.activity - m1.activity == doctest::Approx(2.0 * std::log(a)).epsilon(1e-5));
  CHECK(irregularity(xs) == doctest::Approx(irregularity(x)).epsilon(1e-7));

  Vecd p1, p2, f1, f2;
  psd(x, 200.0, p1, f1);
  psd(xs, 200.0, p2, f2);
  CHECK(neural_band_ratio(p2, f2) == doctest::Approx(neural_band_ratio(p1, f1)).epsilon(1e-6));
  CHECK(artifact_penalty(p2, f2) == doctest::Approx(artifact_penalty(p1, f1)).epsilon(1e-6));
}

TEST_CASE("min-max endpoints and hand-computed aggregate") {
  std::vector<RawScores> raw(3);
  // patch 0 dominates every metric; patch 2 is the minimum everywhere
  raw[0] = {0.9, 0.8, 0.0, 0.7, 0.6, 0.5};
  raw[1] = {0.5, 0.5, 0.0, 0.4, 0.3, 0.3};
  raw[2] = {0.1, 0.2, 0.0, 0.1, 0.0, 0.1};
  ImportanceMap map = aggregate_scores(raw);
  CHECK(map.aggregate[0] == doctest::Approx(1.0));
  CHECK(map.aggregate[2] == doctest::Approx(0.0));

  // middle patch by hand with alpha = (.30,.25,.20,.15,.10) over
  // (neural, clean, complexity, irreg, mobility)
  double n = (0.5 - 0.1) / 0.8, c = (0.5 - 0.2) / 0.6, x = (0.3 - 0.0) / 0.6,
         ir = (0.3 - 0.1) / 0.4, mo = (0.4 - 0.1) / 0.6;
  double expected = 0.30 * n + 0.25 * c + 0.20 * x + 0.15 * ir + 0.10 * mo;
  CHECK(map.aggregate[1] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("identical patches map to one half") {
  std::vector<RawScores> raw(4, RawScores{0.4, 0.4, 0.0, 0.4, 0.4, 0.4});
  ImportanceMap map = aggregate_scores(raw);
  for (int i = 0; i < 4; ++i) CHECK(map.aggregate[i] == doctest::Approx(0.5));
}

TEST_CASE("aggregation needs at least two patches") {
  std::vector<RawScores> raw(1);
  CHECK_THROWS_AS((void)aggregate_scores(raw), Error);
}

TEST_CASE("curriculum weight endpoints and midpoint") {
  CHECK(curriculum_weight(0, 1000) == doctest::Approx(0.2));
  CHECK(curriculum_weight(1000, 1000) == doctest::Approx(0.7));
  CHECK(curriculum_weight(500, 1000) == doctest::Approx(0.45));
}

TEST_CASE("mask plan size is exactly round(ratio * N)") {
  Rng rng(3);
  std::vector<RawScores> raw(20);
  for (auto& r : raw) r = {rng.uniform(), rng.uniform(), 0.0, rng.uniform(), rng.uniform(), rng.uniform()};
  ImportanceMap map = aggregate_scores(raw);
  for (double ratio : {0.1, 0.25, 0.5, 0.73}) {
    MaskPlan plan = sample_mask(map, ratio, 0.5, 0.8, rng);
    CHECK(static_cast<int>(plan.mask.size()) == static_cast<int>(std::lround(ratio * 20)));
    // indices distinct and in range
    for (size_t i = 1; i < plan.mask.size(); ++i) CHECK(plan.mask[i] > plan.mask[i - 1]);
    CHECK(plan.mask.front() >= 0);
    CHECK(plan.mask.back() < 20);
  }
}

TEST_CASE("full-scale shape: round(0.5 x 570) masks 285 tokens") {
  Rng rng(4);
  std::vector<RawScores> raw(570);
  for (auto& r : raw) r = {rng.uniform(), rng.uniform(), 0.0, rng.uniform(), rng.uniform(), rng.uniform()};
  ImportanceMap map = aggregate_scores(raw);
  MaskPlan plan = sample_mask(map, 0.5, 0.7, 0.8, rng);
  CHECK(plan.mask.size() == 285);
}

TEST_CASE("w=0 sampling is exchangeable across patches") {
  Rng rng(5);
  const int n = 20, draws = 10000;
  const double ratio = 0.5;
  std::vector<RawScores> raw(n);
  for (int i = 0; i < n; ++i)
    raw[i] = {i / 19.0, 0.5, 0.0, 0.5, 0.5, 0.5};  // spread scores, must not matter at w=0
  ImportanceMap map = aggregate_scores(raw);
  std::vector<int> hits(n, 0);
  for (int d = 0; d < draws; ++d) {
    MaskPlan plan = sample_mask(map, ratio, 0.0, 0.8, rng);
    for (int i : plan.mask) hits[i]++;
  }
  // binomial(10000, 0.5): 3 sigma = 150
  for (int i = 0; i < n; ++i) CHECK(std::abs(hits[i] - 5000) < 450);
}

TEST_CASE("w=1 prefers the one high-importance patch") {
  Rng rng(6);
  const int n = 10, draws = 10000;
  std::vector<RawScores> raw(n);
  for (int i = 0; i < n; ++i) raw[i] = {i == 3 ? 1.0 : 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  ImportanceMap map = aggregate_scores(raw);
  std::vector<int> hits(n, 0);
  for (int d = 0; d < draws; ++d) {
    MaskPlan plan = sample_mask(map, 0.1, 1.0, 0.8, rng);  // |M| = 1
    REQUIRE(plan.mask.size() == 1);
    hits[plan.mask[0]]++;
  }
  for (int i = 0; i < n; ++i)
    if (i != 3) CHECK(hits[3] > hits[i]);
}

TEST_CASE("masked mean exceeds visible mean for positive w on spread scores") {
  Rng rng(7);
  const int n = 40;
  std::vector<RawScores> raw(n);
  for (int i = 0; i < n; ++i) {
    double v = static_cast<double>(i) / (n - 1);
    raw[i] = {v, v, 0.0, v, v, v};
  }
  ImportanceMap map = aggregate_scores(raw);
  double gap = 0.0;
  const int draws = 3000;
  for (int d = 0; d < draws; ++d) {
    MaskPlan plan = sample_mask(map, 0.5, 0.7, 0.8, rng);
    double masked = 0.0, visible = 0.0;
    std::vector<bool> is_masked(n, false);
    for (int i : plan.mask) is_masked[i] = true;
    int cm = 0, cv = 0;
    for (int i = 0; i < n; ++i)
      (is_masked[i] ? masked : visible) += map.aggregate[i],
          (is_masked[i] ? cm : cv) += 1;
    gap += masked / cm - visible / cv;
  }
  CHECK(gap / draws > 0.02);
}
