#include "hic/error.hpp"

#include <array>
#include <utility>

namespace hic {
namespace {

constexpr std::array<std::pair<Errc, std::string_view>, 28> kNames{{
    {Errc::kInvalidEvent, "InvalidEvent"},
    {Errc::kClockRegression, "ClockRegression"},
    {Errc::kUnknownSubscription, "UnknownSubscription"},
    {Errc::kDuplicateName, "DuplicateName"},
    {Errc::kNotFound, "NotFound"},
    {Errc::kUnknownMethod, "UnknownMethod"},
    {Errc::kBadParams, "BadParams"},
    {Errc::kTransportError, "TransportError"},
    {Errc::kApplicationFault, "ApplicationFault"},
    {Errc::kUnknownRegistration, "UnknownRegistration"},
    {Errc::kParseError, "ParseError"},
    {Errc::kWellFormednessError, "WellFormednessError"},
    {Errc::kUnknownState, "UnknownState"},
    {Errc::kEventNotAllowed, "EventNotAllowed"},
    {Errc::kUnknownUser, "UnknownUser"},
    {Errc::kAliasChain, "AliasChain"},
    {Errc::kDuplicateBip, "DuplicateBip"},
    {Errc::kUnboundBip, "UnboundBip"},
    {Errc::kUnknownTaskModel, "UnknownTaskModel"},
    {Errc::kUnknownSession, "UnknownSession"},
    {Errc::kUnknownApp, "UnknownApp"},
    {Errc::kMalformedPayload, "MalformedPayload"},
    {Errc::kUnboundAction, "UnboundAction"},
    {Errc::kJoinKeyMissing, "JoinKeyMissing"},
    {Errc::kBadFilter, "BadFilter"},
    {Errc::kRightDenied, "RightDenied"},
    {Errc::kUnknownFlight, "UnknownFlight"},
    {Errc::kConfigError, "ConfigError"},
}};

}  // namespace

std::string_view to_string(Errc code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

bool errc_from_string(std::string_view name, Errc& out) {
  for (const auto& [c, n] : kNames) {
    if (n == name) {
      out = c;
      return true;
    }
  }
  return false;
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

ParseError::ParseError(Errc code, int line, const std::string& reason)
    : Error(code, "line " + std::to_string(line) + ": " + reason),
      line_(line),
      reason_(reason) {}

}  // namespace hic
