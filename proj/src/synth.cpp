#include "neurotok/synth.hpp"

#include "neurotok/rng.hpp"

#include <cmath>

namespace neurotok {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

// slow deterministic modulation built from two incommensurate sinusoids
struct SlowWalk {
  double base, span, f1, f2, p1, p2;

  static SlowWalk make(Rng& rng, double lo, double hi) {
    SlowWalk w;
    w.base = 0.5 * (lo + hi);
    w.span = 0.5 * (hi - lo);
    w.f1 = rng.uniform(0.01, 0.035);
    w.f2 = rng.uniform(0.035, 0.08);
    w.p1 = rng.uniform(0.0, kTwoPi);
    w.p2 = rng.uniform(0.0, kTwoPi);
    return w;
  }

  double at(double t) const {
    return base + span * 0.5 * (std::sin(kTwoPi * f1 * t + p1) + std::sin(kTwoPi * f2 * t + p2));
  }
};
}  // namespace

SynthResult gen_synth(const SynthSpec& spec) {
  const int channels = spec.channels;
  const double fs = spec.sample_rate_hz;
  const int t_total = static_cast<int>(std::lround(spec.minutes * 60.0 * fs));
  if (channels < 1 || t_total < 1) raise(Err::EmptyRecording, "synth spec yields no data");

  Rng root(spec.seed);
  Rng chan_rng = root.stream("synth/channels");
  Rng burst_rng = root.stream("synth/bursts");
  Rng transient_rng = root.stream("synth/transients");
  Rng spike_rng = root.stream("synth/spikes");

  SynthResult out;
  out.recording.sample_rate_hz = fs;
  out.recording.channel_labels = default_channel_labels(channels);
  out.recording.samples = Matd::Zero(channels, t_total);
  Matd& x = out.recording.samples;

  // Background: an amplitude-modulated slow oscillation over a shared
  // drift. The oscillation frequency is an integer picked per 1-second slot
  // from a slow walk, so every slot carries a whole number of cycles and the
  // phase at slot boundaries never drifts: patch waveforms are decodable
  // functions of (frequency, amplitude), not of an unobservable random
  // phase. The walk is shared across channels with per-channel gain, so a
  // masked patch stays inferable from its siblings at the same time slot.
  SlowWalk drift_amp = SlowWalk::make(chan_rng, 3.0, 6.0);
  const double drift_freq = chan_rng.uniform(0.35, 0.55);
  const double drift_phase = chan_rng.uniform(0.0, kTwoPi);
  std::vector<double> gain(channels);
  for (int c = 0; c < channels; ++c) gain[c] = chan_rng.uniform(0.7, 1.3);

  SlowWalk freq_walk = SlowWalk::make(chan_rng, 0.7, 3.49);
  SlowWalk amp_walk = SlowWalk::make(chan_rng, 10.0, 32.0);
  const double base_phase = chan_rng.uniform(0.0, kTwoPi);
  double phase = base_phase;
  for (int t = 0; t < t_total; ++t) {
    const double ts = t / fs;
    const double slot_start = std::floor(ts);
    const double f_slot = std::max(1.0, std::round(freq_walk.at(slot_start)));
    phase += kTwoPi * f_slot / fs;
    const double drift = drift_amp.at(ts) * std::sin(kTwoPi * drift_freq * ts + drift_phase);
    const double common = amp_walk.at(ts) * std::sin(phase) + drift;
    for (int c = 0; c < channels; ++c) x(c, t) = gain[c] * common;
  }

  // Burst events on the 1-second slot grid. Each event spans two adjacent
  // slots and a channel subset with a shared frequency and phase, so a
  // masked burst patch stays inferable from channel siblings or its
  // temporal neighbor.
  const int slot_len = static_cast<int>(std::lround(fs));
  const int slots = t_total / slot_len;
  int a = 0;
  while (a + 1 < slots) {
    if (burst_rng.uniform() >= spec.burst_density) {
      ++a;
      continue;
    }
    // a compact dictionary of integer frequencies and two phases keeps the
    // burst waveform family within the span of a desk-scale linear decoder
    const double freq = 6.0 + 3.0 * burst_rng.uniform_int(8);
    const double phase = 0.25 * kTwoPi * burst_rng.uniform_int(2);
    const double amp = burst_rng.uniform(30.0, 55.0);
    std::vector<int> members;
    for (int c = 0; c < channels; ++c)
      if (burst_rng.uniform() < 0.8) members.push_back(c);
    if (members.empty()) members.push_back(burst_rng.uniform_int(channels));
    const int len = 2 * slot_len;
    for (int c : members) {
      const double cgain = 0.8 + 0.4 * gain[c] / 1.3;
      for (int i = 0; i < len; ++i) {
        const int t = a * slot_len + i;
        const double hann = 0.5 * (1.0 - std::cos(kTwoPi * i / (len - 1)));
        x(c, t) += cgain * amp * hann * std::sin(kTwoPi * freq * t / fs + phase);
      }
      out.informative.emplace_back(c, a);
      out.informative.emplace_back(c, a + 1);
    }
    a += 2;
  }

  // sparse sub-threshold gaussian bumps
  const double n_transients = spec.transient_density * spec.minutes;
  for (int c = 0; c < channels; ++c) {
    const int count = static_cast<int>(std::floor(n_transients));
    for (int k = 0; k < count; ++k) {
      const int center = transient_rng.uniform_int(t_total);
      const double amp = transient_rng.uniform(15.0, 35.0);
      const double width = fs * transient_rng.uniform(0.02, 0.04);
      const int lo = std::max(0, center - static_cast<int>(4 * width));
      const int hi = std::min(t_total - 1, center + static_cast<int>(4 * width));
      for (int t = lo; t <= hi; ++t) {
        const double z = (t - center) / width;
        x(c, t) += amp * std::exp(-0.5 * z * z);
      }
    }
  }

  // over-threshold spikes (for rejection tests)
  const double n_spikes = spec.spike_density * spec.minutes;
  for (int c = 0; c < channels; ++c) {
    const int count = static_cast<int>(std::floor(n_spikes));
    for (int k = 0; k < count; ++k) {
      const int center = spike_rng.uniform_int(t_total);
      const double width = fs * 0.008;
      const int lo = std::max(0, center - static_cast<int>(4 * width));
      const int hi = std::min(t_total - 1, center + static_cast<int>(4 * width));
      for (int t = lo; t <= hi; ++t) {
        const double z = (t - center) / width;
        x(c, t) += spec.spike_amp_uv * std::exp(-0.5 * z * z);
      }
    }
  }

  return out;
}

}  // namespace neurotok
