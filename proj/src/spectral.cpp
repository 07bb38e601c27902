#include "neurotok/spectral.hpp"

#include <cmath>

namespace neurotok {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.141592653589793238462643383280;
}  // namespace

DftBasis::DftBasis(int patch_len) : p_(patch_len) {
  cos_t_.resize(p_, p_);
  sin_t_.resize(p_, p_);
  for (int n = 0; n < p_; ++n) {
    for (int k = 0; k < p_; ++k) {
      double angle = kTwoPi * static_cast<double>(k) * static_cast<double>(n) / p_;
      cos_t_(n, k) = std::cos(angle);
      sin_t_(n, k) = std::sin(angle);
    }
  }
}

void DftBasis::forward(const Matd& patches, Matd& re, Matd& im) const {
  if (patches.cols() != p_)
    raise(Err::ShapeMismatch, "dft basis expects row length " + std::to_string(p_));
  re.noalias() = patches * cos_t_;
  im.noalias() = -(patches * sin_t_);
}

void DftBasis::amplitude_phase_rows(const Matd& patches, Matd& amp, Matd& phase) const {
  Matd re, im;
  forward(patches, re, im);
  amp.resize(re.rows(), re.cols());
  phase.resize(re.rows(), re.cols());
  for (Eigen::Index r = 0; r < re.rows(); ++r) {
    for (Eigen::Index c = 0; c < re.cols(); ++c) {
      amp(r, c) = std::hypot(re(r, c), im(r, c));
      double ph = std::atan2(im(r, c), re(r, c));
      if (ph <= -kPi) ph += kTwoPi;  // pin the branch cut to (-pi, pi]
      phase(r, c) = ph;
    }
  }
}

Spectrum dft(const Vecd& patch) {
  const int p = static_cast<int>(patch.size());
  Spectrum spec;
  spec.real_part = Vecd::Zero(p);
  spec.imag_part = Vecd::Zero(p);
  for (int k = 0; k < p; ++k) {
    double re = 0.0, im = 0.0;
    for (int n = 0; n < p; ++n) {
      double angle = kTwoPi * static_cast<double>(k) * static_cast<double>(n) / p;
      re += patch[n] * std::cos(angle);
      im -= patch[n] * std::sin(angle);
    }
    spec.real_part[k] = re;
    spec.imag_part[k] = im;
  }
  return spec;
}

Vecd idft(const Spectrum& spec) {
  const int p = spec.size();
  if (spec.imag_part.size() != p) raise(Err::ShapeMismatch, "spectrum parts differ in length");

  double scale = std::max(1.0, std::max(spec.real_part.cwiseAbs().maxCoeff(),
                                        spec.imag_part.cwiseAbs().maxCoeff()));
  for (int k = 0; k < p; ++k) {
    int mirror = (p - k) % p;
    double dre = spec.real_part[k] - spec.real_part[mirror];
    double dim = spec.imag_part[k] + spec.imag_part[mirror];
    if (std::abs(dre) > 1e-6 * scale || std::abs(dim) > 1e-6 * scale)
      raise(Err::AsymmetricSpectrum, "spectrum does not describe a real signal at bin " +
                                         std::to_string(k));
  }

  Vecd out = Vecd::Zero(p);
  for (int n = 0; n < p; ++n) {
    double acc = 0.0;
    for (int k = 0; k < p; ++k) {
      double angle = kTwoPi * static_cast<double>(k) * static_cast<double>(n) / p;
      // real part of X[k] * e^{+j angle}; imaginary parts cancel by symmetry
      acc += spec.real_part[k] * std::cos(angle) - spec.imag_part[k] * std::sin(angle);
    }
    out[n] = acc / p;
  }
  return out;
}

void amplitude_phase(const Spectrum& spec, Vecd& amp, Vecd& phase) {
  const int p = spec.size();
  amp.resize(p);
  phase.resize(p);
  for (int k = 0; k < p; ++k) {
    amp[k] = std::hypot(spec.real_part[k], spec.imag_part[k]);
    double ph = std::atan2(spec.imag_part[k], spec.real_part[k]);
    if (ph <= -kPi) ph += kTwoPi;
    phase[k] = ph;
  }
}

void psd(const Vecd& patch, double sample_rate_hz, Vecd& power, Vecd& freqs) {
  const int p = static_cast<int>(patch.size());
  if (p < 2) raise(Err::PatchTooShort, "psd needs at least 2 samples");
  Spectrum spec = dft(patch);
  const int bins = p / 2 + 1;
  power.resize(bins);
  freqs.resize(bins);
  for (int k = 0; k < bins; ++k) {
    power[k] = spec.real_part[k] * spec.real_part[k] + spec.imag_part[k] * spec.imag_part[k];
    freqs[k] = static_cast<double>(k) * sample_rate_hz / p;
  }
}

}  // namespace neurotok
