#include "cfl/wire.hpp"

#include <bit>
#include <cstring>

#include "cfl/error.hpp"

namespace cfl::wire {

namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode(std::string_view magic, std::string_view header,
                                 std::span<const double> payload) {
  if (magic.size() != 8) throw Error("wire::encode: magic must be 8 bytes");
  std::vector<std::uint8_t> out;
  out.reserve(16 + header.size() + 8 * payload.size());
  out.insert(out.end(), magic.begin(), magic.end());
  put_u64(out, header.size());
  out.insert(out.end(), header.begin(), header.end());
  for (double v : payload) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Frame decode(std::string_view magic, std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), magic.data(), 8) != 0)
    throw DataError("wire::decode: bad magic, expected '" + std::string(magic) + "'");
  const std::uint64_t h = get_u64(bytes.data() + 8);
  if (h > bytes.size() - 16) throw DataError("wire::decode: truncated header");
  const std::size_t rest = bytes.size() - 16 - h;
  if (rest % 8 != 0) throw DataError("wire::decode: payload is not a whole number of doubles");
  Frame f;
  f.header.assign(reinterpret_cast<const char*>(bytes.data() + 16), h);
  f.payload.resize(rest / 8);
  const std::uint8_t* p = bytes.data() + 16 + h;
  for (std::size_t i = 0; i < f.payload.size(); ++i)
    f.payload[i] = std::bit_cast<double>(get_u64(p + 8 * i));
  return f;
}

}  // namespace cfl::wire
