#include "tiad/container.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "tiad/error.hpp"

namespace tiad::io {
namespace {

static_assert(sizeof(float) == 4);
constexpr bool kLittle = std::endian::native == std::endian::little;

constexpr std::uint32_t byteswap(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xFF00u) | ((v << 8) & 0xFF0000u) | (v << 24);
}

void write_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), 4);
}

std::uint32_t read_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw FormatError("truncated header");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

constexpr std::uint32_t kMaxHeaderBytes = 64u << 20;

}  // namespace

void write_header(std::ostream& os, std::string_view magic, std::uint32_t version, const nlohmann::json& meta) {
  std::array<char, 8> m{};
  std::memcpy(m.data(), magic.data(), std::min<std::size_t>(magic.size(), 8));
  os.write(m.data(), 8);
  write_u32(os, version);
  const std::string text = meta.dump();
  write_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
}

nlohmann::json read_header(std::istream& is, std::string_view magic, std::uint32_t version) {
  std::array<char, 8> m{};
  if (!is.read(m.data(), 8)) throw FormatError("truncated magic");
  std::array<char, 8> want{};
  std::memcpy(want.data(), magic.data(), std::min<std::size_t>(magic.size(), 8));
  if (m != want) throw FormatError("bad magic, expected " + std::string(magic));
  const auto v = read_u32(is);
  if (v != version) {
    throw FormatError("version mismatch: file " + std::to_string(v) + ", reader " + std::to_string(version));
  }
  const auto len = read_u32(is);
  if (len > kMaxHeaderBytes) throw FormatError("header length implausible");
  std::string text(len, '\0');
  if (!is.read(text.data(), len)) throw FormatError("truncated header text");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt header: ") + e.what());
  }
}

void write_f32(std::ostream& os, std::span<const float> values) {
  if constexpr (kLittle) {
    os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float f : values) {
      auto u = byteswap(std::bit_cast<std::uint32_t>(f));
      os.write(reinterpret_cast<const char*>(&u), 4);
    }
  }
}

void read_f32(std::istream& is, std::span<float> values) {
  if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()))) {
    throw FormatError("truncated payload");
  }
  if constexpr (!kLittle) {
    for (float& f : values) f = std::bit_cast<float>(byteswap(std::bit_cast<std::uint32_t>(f)));
  }
}

void write_u8(std::ostream& os, std::span<const std::uint8_t> values) {
  os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size()));
}

void read_u8(std::istream& is, std::span<std::uint8_t> values) {
  if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size()))) {
    throw FormatError("truncated payload");
  }
}

void expect_eof(std::istream& is) {
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after payload");
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open for reading: " + path.string());
  return is;
}

}  // namespace tiad::io
