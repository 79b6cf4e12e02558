#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace miniperm {

enum class ErrorCode {
  InvalidArgument,
  UnknownMiniProgram,
  UnknownScope,
  UnknownApi,
  UnknownHost,
  UnknownEnv,
  MiniProgramDeleted,
  MiniProgramNotOpen,
  ChannelUnsupported,
  SettingsUnavailable,
  RevocationIneffective,
  NoSuchGrant,
  AlreadyDeleted,
  LifecycleViolation,
  ParseError,
  SchemaViolation,
  DanglingReference,
  DuplicateId,
  MissingManifest,
  IoError,
  EmptyInput,
};

std::string_view to_string(ErrorCode code);

// Raised for precondition violations and malformed inputs. Authorization
// denials are not errors; they come back as a CallOutcome with a fail reason.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace miniperm
