#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mapf {

enum class ErrorCode {
  kNonRectangular,
  kUnknownCharacter,
  kEmptyStarts,
  kEmptyGoals,
  kDisconnected,
  kInvalidMap,
  kInvalidState,
  kInvalidJointState,
  kCapacity,
  kInvalidConfig,
  kGeneration,
  kIo,
  kParse,
  kEmptyInput,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonRectangular: return "non_rectangular";
    case ErrorCode::kUnknownCharacter: return "unknown_character";
    case ErrorCode::kEmptyStarts: return "empty_starts";
    case ErrorCode::kEmptyGoals: return "empty_goals";
    case ErrorCode::kDisconnected: return "disconnected";
    case ErrorCode::kInvalidMap: return "invalid_map";
    case ErrorCode::kInvalidState: return "invalid_state";
    case ErrorCode::kInvalidJointState: return "invalid_joint_state";
    case ErrorCode::kCapacity: return "capacity";
    case ErrorCode::kInvalidConfig: return "invalid_config";
    case ErrorCode::kGeneration: return "generation";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kEmptyInput: return "empty_input";
  }
  return "unknown";
}

/// All library failures surface as this exception; code() names the failure kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mapf
