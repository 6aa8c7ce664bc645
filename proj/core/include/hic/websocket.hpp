#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace hic::ws {

enum class Opcode : std::uint8_t {
  kContinuation = 0x0,
  kText = 0x1,
  kBinary = 0x2,
  kClose = 0x8,
  kPing = 0x9,
  kPong = 0xA,
};

// Sec-WebSocket-Accept value for a client key (RFC 6455 section 4.2.2).
std::string accept_key(std::string_view client_key);

// One final frame. Clients must mask; servers must not.
std::string encode_frame(Opcode opcode, std::string_view payload, bool mask = false,
                         std::uint32_t masking_key = 0x5a17c3e1);

struct Frame {
  bool fin = true;
  Opcode opcode = Opcode::kText;
  std::string payload;  // unmasked
};

// Decodes one frame from the front of `buffer`, consuming it. Returns
// nullopt when more bytes are needed. Throws Error(kTransportError) when the
// declared payload exceeds `max_payload`.
std::optional<Frame> decode_frame(std::string& buffer, std::size_t max_payload);

}  // namespace hic::ws
