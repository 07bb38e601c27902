#include "neurotok/signal_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace neurotok {

namespace {

constexpr char kMagic[8] = {'N', 'R', 'T', 'K', '0', '0', '0', '1'};

Recording load_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Err::IoFailure, "cannot open " + path);

  char magic[8];
  uint32_t c = 0, t = 0;
  double rate = 0.0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&c), 4);
  in.read(reinterpret_cast<char*>(&t), 4);
  in.read(reinterpret_cast<char*>(&rate), 8);
  if (!in) raise(Err::MalformedHeader, "truncated header in " + path);
  if (std::memcmp(magic, kMagic, 8) != 0) raise(Err::MalformedHeader, "bad magic in " + path);
  if (c == 0 || t == 0) raise(Err::EmptyRecording, "zero dimension in " + path);
  if (!(rate > 0.0) || !std::isfinite(rate))
    raise(Err::MalformedHeader, "non-positive sample rate in " + path);

  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<uint64_t>(in.tellg());
  const uint64_t expected = 24ull + 4ull * c * t;
  if (file_size != expected)
    raise(Err::MalformedHeader, "payload length mismatch in " + path + ": have " +
                                    std::to_string(file_size) + ", expected " +
                                    std::to_string(expected));
  in.seekg(24, std::ios::beg);

  std::vector<float> payload(static_cast<size_t>(c) * t);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 4));
  if (!in) raise(Err::IoFailure, "short read in " + path);

  Recording rec;
  rec.sample_rate_hz = rate;
  rec.channel_labels = default_channel_labels(static_cast<int>(c));
  rec.samples.resize(c, t);
  for (uint32_t ch = 0; ch < c; ++ch)
    for (uint32_t i = 0; i < t; ++i) {
      float v = payload[static_cast<size_t>(ch) * t + i];
      if (!std::isfinite(v))
        raise(Err::NonFinite, "non-finite sample at channel " + std::to_string(ch) +
                                  ", index " + std::to_string(i));
      rec.samples(ch, i) = static_cast<double>(v);
    }
  return rec;
}

Recording load_csv(const std::string& path, double sample_rate_hz) {
  if (!(sample_rate_hz > 0.0))
    raise(Err::MalformedHeader, "csv import needs a positive sample rate");
  std::ifstream in(path);
  if (!in) raise(Err::IoFailure, "cannot open " + path);

  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &pos);
      } catch (const std::exception&) {
        raise(Err::MalformedHeader, "unparsable cell '" + cell + "' in " + path);
      }
      if (!std::isfinite(v)) raise(Err::NonFinite, "non-finite cell in " + path);
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      raise(Err::MalformedHeader, "ragged csv rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) raise(Err::EmptyRecording, "no data in " + path);

  Recording rec;
  rec.sample_rate_hz = sample_rate_hz;
  rec.channel_labels = default_channel_labels(static_cast<int>(rows.size()));
  rec.samples.resize(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t i = 0; i < rows[r].size(); ++i)
      rec.samples(static_cast<int>(r), static_cast<int>(i)) = rows[r][i];
  return rec;
}

}  // namespace

std::vector<std::string> default_channel_labels(int channels) {
  std::vector<std::string> labels;
  labels.reserve(channels);
  for (int c = 0; c < channels; ++c) labels.push_back("ch" + std::to_string(c));
  return labels;
}

void validate_recording(const Recording& rec) {
  if (rec.channels() < 1 || rec.length() < 1)
    raise(Err::EmptyRecording, "recording must have C >= 1 and T >= 1");
  if (static_cast<int>(rec.channel_labels.size()) != rec.channels())
    raise(Err::ShapeMismatch, "channel label count does not match C");
  if (!(rec.sample_rate_hz > 0.0)) raise(Err::MalformedHeader, "sample rate must be positive");
  if (!rec.samples.allFinite()) raise(Err::NonFinite, "recording contains NaN or Inf");
}

Recording load_recording(const std::string& path, RecordingFormat format,
                         double csv_sample_rate_hz) {
  Recording rec = format == RecordingFormat::bin ? load_bin(path)
                                                 : load_csv(path, csv_sample_rate_hz);
  validate_recording(rec);
  return rec;
}

void save_recording(const Recording& rec, const std::string& path) {
  validate_recording(rec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Err::IoFailure, "cannot open " + path + " for writing");

  const uint32_t c = static_cast<uint32_t>(rec.channels());
  const uint32_t t = static_cast<uint32_t>(rec.length());
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&c), 4);
  out.write(reinterpret_cast<const char*>(&t), 4);
  out.write(reinterpret_cast<const char*>(&rec.sample_rate_hz), 8);

  std::vector<float> payload(static_cast<size_t>(c) * t);
  for (uint32_t ch = 0; ch < c; ++ch)
    for (uint32_t i = 0; i < t; ++i)
      payload[static_cast<size_t>(ch) * t + i] = static_cast<float>(rec.samples(ch, i));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * 4));
  if (!out) raise(Err::IoFailure, "short write to " + path);
}

}  // namespace neurotok
