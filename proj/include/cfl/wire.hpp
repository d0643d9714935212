#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cfl::wire {

// Framed binary record:
//   [0, 8)        magic, 8 ASCII bytes
//   [8, 16)       header length H, unsigned 64-bit little-endian
//   [16, 16 + H)  JSON header, UTF-8
//   then          payload, 64-bit IEEE-754 little-endian doubles to end of buffer
struct Frame {
  std::string header;
  std::vector<double> payload;
};

std::vector<std::uint8_t> encode(std::string_view magic, std::string_view header,
                                 std::span<const double> payload);
// Throws DataError on a wrong magic or truncated buffer.
Frame decode(std::string_view magic, std::span<const std::uint8_t> bytes);

}  // namespace cfl::wire
