#include "hic/websocket.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include "hic/error.hpp"

namespace hic::ws {

std::string accept_key(std::string_view client_key) {
  static constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  std::string input(client_key);
  input += kGuid;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(input.data()), input.size(), digest);
  unsigned char out[4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1];
  const int n = EVP_EncodeBlock(out, digest, SHA_DIGEST_LENGTH);
  return std::string(reinterpret_cast<const char*>(out), static_cast<std::size_t>(n));
}

std::string encode_frame(Opcode opcode, std::string_view payload, bool mask,
                         std::uint32_t masking_key) {
  std::string out;
  out.push_back(static_cast<char>(0x80 | static_cast<std::uint8_t>(opcode)));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  const std::size_t len = payload.size();
  if (len < 126) {
    out.push_back(static_cast<char>(mask_bit | len));
  } else if (len <= 0xFFFF) {
    out.push_back(static_cast<char>(mask_bit | 126));
    out.push_back(static_cast<char>((len >> 8) & 0xFF));
    out.push_back(static_cast<char>(len & 0xFF));
  } else {
    out.push_back(static_cast<char>(mask_bit | 127));
    for (int shift = 56; shift >= 0; shift -= 8) {
      out.push_back(static_cast<char>((static_cast<std::uint64_t>(len) >> shift) & 0xFF));
    }
  }
  if (!mask) {
    out.append(payload);
    return out;
  }
  const char key[4] = {static_cast<char>(masking_key >> 24), static_cast<char>(masking_key >> 16),
                       static_cast<char>(masking_key >> 8), static_cast<char>(masking_key)};
  out.append(key, 4);
  for (std::size_t i = 0; i < len; ++i) out.push_back(static_cast<char>(payload[i] ^ key[i % 4]));
  return out;
}

std::optional<Frame> decode_frame(std::string& buffer, std::size_t max_payload) {
  if (buffer.size() < 2) return std::nullopt;
  const auto b0 = static_cast<std::uint8_t>(buffer[0]);
  const auto b1 = static_cast<std::uint8_t>(buffer[1]);
  std::size_t pos = 2;
  std::uint64_t len = b1 & 0x7F;
  if (len == 126) {
    if (buffer.size() < 4) return std::nullopt;
    len = (static_cast<std::uint64_t>(static_cast<std::uint8_t>(buffer[2])) << 8) |
          static_cast<std::uint8_t>(buffer[3]);
    pos = 4;
  } else if (len == 127) {
    if (buffer.size() < 10) return std::nullopt;
    len = 0;
    for (int i = 0; i < 8; ++i) len = (len << 8) | static_cast<std::uint8_t>(buffer[2 + i]);
    pos = 10;
  }
  if (len > max_payload) {
    throw Error(Errc::kTransportError, "websocket frame of " + std::to_string(len) +
                                           " bytes exceeds the limit");
  }
  const bool masked = (b1 & 0x80) != 0;
  const std::size_t header = pos + (masked ? 4 : 0);
  if (buffer.size() < header + len) return std::nullopt;

  Frame frame;
  frame.fin = (b0 & 0x80) != 0;
  frame.opcode = static_cast<Opcode>(b0 & 0x0F);
  frame.payload = buffer.substr(header, static_cast<std::size_t>(len));
  if (masked) {
    for (std::size_t i = 0; i < frame.payload.size(); ++i) frame.payload[i] ^= buffer[pos + (i % 4)];
  }
  buffer.erase(0, header + static_cast<std::size_t>(len));
  return frame;
}

}  // namespace hic::ws
