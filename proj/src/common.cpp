#include "neurotok/common.hpp"

namespace neurotok {

const char* err_name(Err e) {
  switch (e) {
    case Err::MalformedHeader: return "MalformedHeader";
    case Err::NonFinite: return "NonFinite";
    case Err::EmptyRecording: return "EmptyRecording";
    case Err::IoFailure: return "IoFailure";
    case Err::InvalidBand: return "InvalidBand";
    case Err::WindowTooLong: return "WindowTooLong";
    case Err::TooShort: return "TooShort";
    case Err::PatchTooLong: return "PatchTooLong";
    case Err::AsymmetricSpectrum: return "AsymmetricSpectrum";
    case Err::ShapeMismatch: return "ShapeMismatch";
    case Err::IndexOutOfRange: return "IndexOutOfRange";
    case Err::NonScalarOutput: return "NonScalarOutput";
    case Err::NonFiniteInput: return "NonFiniteInput";
    case Err::NonFiniteLoss: return "NonFiniteLoss";
    case Err::EmptyMask: return "EmptyMask";
    case Err::PatchTooShort: return "PatchTooShort";
    case Err::TooFewPatches: return "TooFewPatches";
    case Err::ConstantSignal: return "ConstantSignal";
    case Err::MalformedConfig: return "MalformedConfig";
  }
  return "UnknownError";
}

}  // namespace neurotok
