#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hic {

// Every failure the middleware reports is one of these codes. Components that
// cross the service bus turn them into fault values; in-process callers get
// them as hic::Error exceptions.
enum class Errc {
  kInvalidEvent,
  kClockRegression,
  kUnknownSubscription,
  kDuplicateName,
  kNotFound,
  kUnknownMethod,
  kBadParams,
  kTransportError,
  kApplicationFault,
  kUnknownRegistration,
  kParseError,
  kWellFormednessError,
  kUnknownState,
  kEventNotAllowed,
  kUnknownUser,
  kAliasChain,
  kDuplicateBip,
  kUnboundBip,
  kUnknownTaskModel,
  kUnknownSession,
  kUnknownApp,
  kMalformedPayload,
  kUnboundAction,
  kJoinKeyMissing,
  kBadFilter,
  kRightDenied,
  kUnknownFlight,
  kConfigError,
};

std::string_view to_string(Errc code);

// Reverse of to_string; returns false for an unknown name.
bool errc_from_string(std::string_view name, Errc& out);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Parse failures carry the 1-based source line (0 when no line applies).
class ParseError : public Error {
 public:
  ParseError(Errc code, int line, const std::string& reason);

  int line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  int line_;
  std::string reason_;
};

}  // namespace hic
