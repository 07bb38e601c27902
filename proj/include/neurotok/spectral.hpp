#pragma once

#include "neurotok/common.hpp"

namespace neurotok {

// Complex spectrum of a length-P real patch, stored as parallel real/imag
// parts. Real inputs obey conjugate symmetry X[k] = conj(X[P-k mod P]).
struct Spectrum {
  Vecd real_part;
  Vecd imag_part;
  int size() const { return static_cast<int>(real_part.size()); }
};

Spectrum dft(const Vecd& patch);

// Inverse transform. Requires conjugate symmetry (the input must describe a
// real signal); raises AsymmetricSpectrum otherwise.
Vecd idft(const Spectrum& spec);

void amplitude_phase(const Spectrum& spec, Vecd& amp, Vecd& phase);

// One-sided power spectral density: power[k] = |X[k]|^2 and
// freqs[k] = k * fs / P for k = 0 .. floor(P/2).
void psd(const Vecd& patch, double sample_rate_hz, Vecd& power, Vecd& freqs);

// Precomputed transform basis so batches of patches go through two matrix
// products instead of per-patch O(P^2) loops.
class DftBasis {
 public:
  explicit DftBasis(int patch_len);

  int patch_len() const { return p_; }

  // rows of `patches` are transformed independently; outputs are N×P
  void forward(const Matd& patches, Matd& re, Matd& im) const;

  // amplitude |X[k]| and phase in (-pi, pi] for every row
  void amplitude_phase_rows(const Matd& patches, Matd& amp, Matd& phase) const;

 private:
  int p_;
  Matd cos_t_;  // P×P, [n][k] = cos(2*pi*k*n/P)
  Matd sin_t_;  // P×P, [n][k] = sin(2*pi*k*n/P)
};

}  // namespace neurotok
