#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace neurotok {

// Row-major throughout: a C×A×P grid flattens to (C·A)×P with each patch
// contiguous in memory, and reshape/flatten in the autodiff engine stay
// zero-cost.
template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Matd = MatrixX<double>;
using Vecd = VectorX<double>;
using Matf = MatrixX<float>;
using Mati = MatrixX<int>;
using Veci = VectorX<int>;

enum class Err {
  MalformedHeader,
  NonFinite,
  EmptyRecording,
  IoFailure,
  InvalidBand,
  WindowTooLong,
  TooShort,
  PatchTooLong,
  AsymmetricSpectrum,
  ShapeMismatch,
  IndexOutOfRange,
  NonScalarOutput,
  NonFiniteInput,
  NonFiniteLoss,
  EmptyMask,
  PatchTooShort,
  TooFewPatches,
  ConstantSignal,
  MalformedConfig,
};

const char* err_name(Err e);

// Module errors carry a stable name so the CLI can surface structured
// error identifiers on stderr.
class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}
  Err code() const { return code_; }
  const char* name() const { return err_name(code_); }

 private:
  Err code_;
};

[[noreturn]] inline void raise(Err code, const std::string& what) { throw Error(code, what); }

}  // namespace neurotok
