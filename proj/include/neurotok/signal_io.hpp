#pragma once

#include "neurotok/common.hpp"

#include <string>
#include <vector>

namespace neurotok {

// Multi-channel continuous recording, amplitudes in microvolts.
struct Recording {
  std::vector<std::string> channel_labels;
  double sample_rate_hz = 0.0;
  Matd samples;  // C×T

  int channels() const { return static_cast<int>(samples.rows()); }
  int length() const { return static_cast<int>(samples.cols()); }
};

enum class RecordingFormat { bin, csv };

// Binary container: 8-byte magic "NRTK0001", u32 C, u32 T, f64 sample_rate,
// then C*T little-endian f32, row-major (channel-major).
// CSV: one row per channel, comma-separated, no header; the sample rate is
// supplied by the caller.
Recording load_recording(const std::string& path, RecordingFormat format,
                         double csv_sample_rate_hz = 0.0);

void save_recording(const Recording& rec, const std::string& path);

// Raises unless C >= 1, T >= 1, labels match C and every sample is finite.
void validate_recording(const Recording& rec);

std::vector<std::string> default_channel_labels(int channels);

}  // namespace neurotok
