#pragma once

#include "neurotok/common.hpp"
#include "neurotok/signal_io.hpp"

#include <vector>

namespace neurotok {

// Fixed-length window cut from a recording. `data` is in microvolts until
// normalize() divides it down to the dimensionless training range.
struct Segment {
  Matd data;  // C×T'
  double sample_rate_hz = 0.0;

  int channels() const { return static_cast<int>(data.rows()); }
  int length() const { return static_cast<int>(data.cols()); }
};

struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;  // a0 normalized to 1
};

std::vector<Biquad> butterworth_lowpass(int order, double cutoff_hz, double sample_rate_hz);
std::vector<Biquad> butterworth_highpass(int order, double cutoff_hz, double sample_rate_hz);
Biquad notch_biquad(double center_hz, double q, double sample_rate_hz);

// Boundary extension for zero-phase filtering. Even reflection keeps the
// local mean (safe through a sub-hertz high-pass); odd reflection keeps the
// derivative (safe through a notch, which passes broadband kinks).
enum class PadMode { even, odd };

// Zero-phase forward-backward run of a biquad cascade with reflection
// padding and steady-state section initialization.
Vecd filtfilt(const std::vector<Biquad>& cascade, const Vecd& x, int pad_len,
              PadMode mode = PadMode::even);

// Order-4 Butterworth high-pass at low_hz cascaded with order-4 low-pass at
// high_hz, applied zero-phase per channel.
Recording bandpass(const Recording& rec, double low_hz, double high_hz);

// Single-biquad notch (Q = 30), applied zero-phase per channel.
Recording notch(const Recording& rec, double center_hz);

// Windowed-sinc (Kaiser, 64-tap) polyphase resampler.
Recording resample(const Recording& rec, double target_hz);

// Non-overlapping windows in order; windows containing any |x| above the
// threshold are dropped, as is the trailing partial window.
std::vector<Segment> segment_and_reject(const Recording& rec, double window_s,
                                        double amp_thresh_uv);

Segment normalize(const Segment& seg, double scale_uv = 100.0);

Recording trim_boundaries(const Recording& rec, double seconds);

}  // namespace neurotok
