#pragma once

#include <stdexcept>
#include <string>

namespace ptgan {

enum class Errc {
  malformed_document,
  wrong_joint_count,
  negative_confidence,
  zero_dims,
  no_shared_visible_joints,
  empty_image,
  dim_mismatch,
  non_finite_activation,
  non_finite_loss,
  label_out_of_range,
  row_not_normalized,
  missing_file,
  weights_unavailable,
  config_error,
  usage_error,
};

constexpr const char* errc_name(Errc code) {
  switch (code) {
    case Errc::malformed_document: return "MalformedDocument";
    case Errc::wrong_joint_count: return "WrongJointCount";
    case Errc::negative_confidence: return "NegativeConfidence";
    case Errc::zero_dims: return "ZeroDims";
    case Errc::no_shared_visible_joints: return "NoSharedVisibleJoints";
    case Errc::empty_image: return "EmptyImage";
    case Errc::dim_mismatch: return "DimMismatch";
    case Errc::non_finite_activation: return "NonFiniteActivation";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::label_out_of_range: return "LabelOutOfRange";
    case Errc::row_not_normalized: return "RowNotNormalized";
    case Errc::missing_file: return "MissingFile";
    case Errc::weights_unavailable: return "WeightsUnavailable";
    case Errc::config_error: return "ConfigError";
    case Errc::usage_error: return "UsageError";
  }
  return "Error";
}

/// Library-wide exception carrying a stable error code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool cond, Errc code, const std::string& message) {
  if (!cond) fail(code, message);
}

}  // namespace ptgan
