#include "neurotok/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace neurotok {

namespace {
constexpr double kPi = 3.141592653589793238462643383280;

// zeroth-order modified Bessel function of the first kind, power series
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double half_sq = 0.25 * x * x;
  for (int k = 1; k < 64; ++k) {
    term *= half_sq / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

struct BiquadState {
  double s1 = 0.0, s2 = 0.0;
};

// direct form II transposed
inline double tick(const Biquad& q, BiquadState& st, double x) {
  double y = q.b0 * x + st.s1;
  st.s1 = q.b1 * x - q.a1 * y + st.s2;
  st.s2 = q.b2 * x - q.a2 * y;
  return y;
}

// steady-state internal state for a constant input x0
BiquadState steady_state(const Biquad& q, double x0) {
  double den = 1.0 + q.a1 + q.a2;
  double gain_dc = (q.b0 + q.b1 + q.b2) / den;
  double y0 = gain_dc * x0;
  BiquadState st;
  st.s2 = q.b2 * x0 - q.a2 * y0;
  st.s1 = (q.b1 + q.b2) * x0 - (q.a1 + q.a2) * y0;
  return st;
}

Vecd run_cascade(const std::vector<Biquad>& cascade, const Vecd& x) {
  Vecd y = x;
  for (const Biquad& q : cascade) {
    BiquadState st = steady_state(q, y[0]);
    for (Eigen::Index n = 0; n < y.size(); ++n) y[n] = tick(q, st, y[n]);
  }
  return y;
}

Recording filter_per_channel(const Recording& rec, const std::vector<Biquad>& cascade,
                             int pad_len, PadMode mode) {
  Recording out = rec;
  for (int c = 0; c < rec.channels(); ++c) {
    Vecd row = rec.samples.row(c).transpose();
    out.samples.row(c) = filtfilt(cascade, row, pad_len, mode).transpose();
  }
  return out;
}
}  // namespace

std::vector<Biquad> butterworth_lowpass(int order, double cutoff_hz, double sample_rate_hz) {
  // even order only; sections from the analog prototype via bilinear transform
  const double k = std::tan(kPi * cutoff_hz / sample_rate_hz);
  std::vector<Biquad> sections;
  for (int s = 0; s < order / 2; ++s) {
    const double q_factor = 1.0 / (2.0 * std::sin(kPi * (2.0 * s + 1.0) / (2.0 * order)));
    const double norm = k * k + k / q_factor + 1.0;
    Biquad q;
    q.b0 = k * k / norm;
    q.b1 = 2.0 * q.b0;
    q.b2 = q.b0;
    q.a1 = 2.0 * (k * k - 1.0) / norm;
    q.a2 = (k * k - k / q_factor + 1.0) / norm;
    sections.push_back(q);
  }
  return sections;
}

std::vector<Biquad> butterworth_highpass(int order, double cutoff_hz, double sample_rate_hz) {
  const double k = std::tan(kPi * cutoff_hz / sample_rate_hz);
  std::vector<Biquad> sections;
  for (int s = 0; s < order / 2; ++s) {
    const double q_factor = 1.0 / (2.0 * std::sin(kPi * (2.0 * s + 1.0) / (2.0 * order)));
    const double norm = k * k + k / q_factor + 1.0;
    Biquad q;
    q.b0 = 1.0 / norm;
    q.b1 = -2.0 / norm;
    q.b2 = q.b0;
    q.a1 = 2.0 * (k * k - 1.0) / norm;
    q.a2 = (k * k - k / q_factor + 1.0) / norm;
    sections.push_back(q);
  }
  return sections;
}

Biquad notch_biquad(double center_hz, double q_factor, double sample_rate_hz) {
  const double w0 = 2.0 * kPi * center_hz / sample_rate_hz;
  const double alpha = std::sin(w0) / (2.0 * q_factor);
  const double a0 = 1.0 + alpha;
  Biquad q;
  q.b0 = 1.0 / a0;
  q.b1 = -2.0 * std::cos(w0) / a0;
  q.b2 = 1.0 / a0;
  q.a1 = -2.0 * std::cos(w0) / a0;
  q.a2 = (1.0 - alpha) / a0;
  return q;
}

Vecd filtfilt(const std::vector<Biquad>& cascade, const Vecd& x, int pad_len, PadMode mode) {
  const Eigen::Index t = x.size();
  pad_len = std::min<Eigen::Index>(pad_len, t - 1);
  pad_len = std::max(pad_len, 0);

  Vecd ext(t + 2 * pad_len);
  if (mode == PadMode::even) {
    for (int i = 0; i < pad_len; ++i) ext[i] = x[pad_len - i];
    ext.segment(pad_len, t) = x;
    for (int i = 0; i < pad_len; ++i) ext[pad_len + t + i] = x[t - 2 - i];
  } else {
    for (int i = 0; i < pad_len; ++i) ext[i] = 2.0 * x[0] - x[pad_len - i];
    ext.segment(pad_len, t) = x;
    for (int i = 0; i < pad_len; ++i) ext[pad_len + t + i] = 2.0 * x[t - 1] - x[t - 2 - i];
  }

  Vecd fwd = run_cascade(cascade, ext);
  Vecd rev = fwd.reverse();
  Vecd back = run_cascade(cascade, rev);
  Vecd full = back.reverse();
  return full.segment(pad_len, t);
}

Recording bandpass(const Recording& rec, double low_hz, double high_hz) {
  validate_recording(rec);
  const double nyquist = rec.sample_rate_hz / 2.0;
  if (!(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < nyquist))
    raise(Err::InvalidBand, "need 0 < low < high < nyquist, got [" + std::to_string(low_hz) +
                                ", " + std::to_string(high_hz) + "] at fs " +
                                std::to_string(rec.sample_rate_hz));
  std::vector<Biquad> cascade = butterworth_highpass(4, low_hz, rec.sample_rate_hz);
  std::vector<Biquad> lp = butterworth_lowpass(4, high_hz, rec.sample_rate_hz);
  cascade.insert(cascade.end(), lp.begin(), lp.end());
  // transient of the low edge dominates the settling time
  const int pad = static_cast<int>(std::lround(3.0 * rec.sample_rate_hz / low_hz)) + 32;
  return filter_per_channel(rec, cascade, pad, PadMode::even);
}

Recording notch(const Recording& rec, double center_hz) {
  validate_recording(rec);
  if (!(center_hz > 0.0) || !(center_hz < rec.sample_rate_hz / 2.0))
    raise(Err::InvalidBand, "notch center must lie in (0, nyquist)");
  const double q_factor = 30.0;
  std::vector<Biquad> cascade = {notch_biquad(center_hz, q_factor, rec.sample_rate_hz)};
  const int pad =
      static_cast<int>(std::lround(3.0 * rec.sample_rate_hz * q_factor / center_hz)) + 32;
  // a notch passes broadband kinks, so the C1-continuous extension wins here
  return filter_per_channel(rec, cascade, pad, PadMode::odd);
}

Recording resample(const Recording& rec, double target_hz) {
  validate_recording(rec);
  if (!(target_hz > 0.0)) raise(Err::InvalidBand, "target rate must be positive");
  if (std::abs(target_hz - rec.sample_rate_hz) < 1e-12 * rec.sample_rate_hz) {
    return rec;  // identity path, bit-exact
  }

  const double ratio = target_hz / rec.sample_rate_hz;
  const int t_in = rec.length();
  const int t_out = static_cast<int>(std::lround(t_in * ratio));
  constexpr int kTaps = 64;
  constexpr int kHalf = kTaps / 2;
  constexpr double kBeta = 8.0;
  const double cutoff = 0.5 * std::min(1.0, ratio) * 0.92;  // cycles per input sample
  const double i0_beta = bessel_i0(kBeta);

  Recording out = rec;
  out.sample_rate_hz = target_hz;
  out.samples.resize(rec.channels(), t_out);

  for (int c = 0; c < rec.channels(); ++c) {
    for (int m = 0; m < t_out; ++m) {
      const double center = static_cast<double>(m) / ratio;
      const int n0 = static_cast<int>(std::floor(center)) - kHalf + 1;
      double acc = 0.0, wsum = 0.0;
      for (int i = 0; i < kTaps; ++i) {
        const int n = n0 + i;
        const double d = center - n;
        const double window_arg = d / kHalf;
        if (window_arg <= -1.0 || window_arg >= 1.0) continue;
        const double kaiser =
            bessel_i0(kBeta * std::sqrt(1.0 - window_arg * window_arg)) / i0_beta;
        const double sinc_arg = 2.0 * cutoff * d;
        const double sinc =
            sinc_arg == 0.0 ? 1.0 : std::sin(kPi * sinc_arg) / (kPi * sinc_arg);
        const double w = 2.0 * cutoff * sinc * kaiser;
        // reflect at the edges
        int idx = n;
        if (idx < 0) idx = -idx;
        if (idx >= t_in) idx = 2 * (t_in - 1) - idx;
        idx = std::clamp(idx, 0, t_in - 1);
        acc += w * rec.samples(c, idx);
        wsum += w;
      }
      // normalizing by the actual tap sum pins DC gain to exactly 1
      out.samples(c, m) = wsum != 0.0 ? acc / wsum : 0.0;
    }
  }
  return out;
}

std::vector<Segment> segment_and_reject(const Recording& rec, double window_s,
                                        double amp_thresh_uv) {
  validate_recording(rec);
  const long w = std::lround(window_s * rec.sample_rate_hz);
  if (w < 1) raise(Err::WindowTooLong, "window must cover at least one sample");
  if (w > rec.length())
    raise(Err::WindowTooLong, "window of " + std::to_string(w) + " samples exceeds recording of " +
                                  std::to_string(rec.length()));
  const int count = rec.length() / static_cast<int>(w);
  std::vector<Segment> kept;
  for (int k = 0; k < count; ++k) {
    Matd block = rec.samples.middleCols(k * w, w);
    if (block.cwiseAbs().maxCoeff() > amp_thresh_uv) continue;
    kept.push_back(Segment{block, rec.sample_rate_hz});
  }
  return kept;
}

Segment normalize(const Segment& seg, double scale_uv) {
  if (!(scale_uv > 0.0)) raise(Err::InvalidBand, "normalization scale must be positive");
  Segment out = seg;
  out.data = seg.data / scale_uv;
  return out;
}

Recording trim_boundaries(const Recording& rec, double seconds) {
  validate_recording(rec);
  const long n = std::lround(seconds * rec.sample_rate_hz);
  if (n < 0) raise(Err::TooShort, "trim duration must be non-negative");
  if (2 * n >= rec.length())
    raise(Err::TooShort, "trimming " + std::to_string(2 * n) + " samples from a recording of " +
                             std::to_string(rec.length()));
  Recording out = rec;
  out.samples = rec.samples.middleCols(n, rec.length() - 2 * n).eval();
  return out;
}

}  // namespace neurotok
