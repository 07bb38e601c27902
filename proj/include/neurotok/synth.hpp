#pragma once

#include "neurotok/signal_io.hpp"

#include <utility>
#include <vector>

namespace neurotok {

// Deterministic test-corpus generator: a shared slow drift, planted 4-30 Hz
// oscillation bursts (the "informative" patches), sparse sub-threshold
// transients, and optional over-threshold spikes for rejection testing.
// No stochastic noise floor is added: every patch is a deterministic
// function of the seed, so both waveform and spectrum are learnable targets.
struct SynthSpec {
  uint64_t seed = 7;
  double minutes = 2.0;
  int channels = 3;
  double sample_rate_hz = 200.0;
  double spike_density = 0.0;     // over-threshold spikes per channel-minute
  double spike_amp_uv = 150.0;
  double burst_density = 0.25;    // probability a 1 s slot carries a burst event
  double transient_density = 2.0; // sub-threshold bumps per channel-minute
};

struct SynthResult {
  Recording recording;
  // (channel, patch index) pairs for patches carrying a planted burst,
  // indexed on the raw recording's 1-second grid
  std::vector<std::pair<int, int>> informative;
};

SynthResult gen_synth(const SynthSpec& spec);

}  // namespace neurotok
