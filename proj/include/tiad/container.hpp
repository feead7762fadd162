#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string_view>

#include <json.hpp>

namespace tiad::io {

/// Binary container shared by cube, score-map, mask and checkpoint files:
///
///   magic      8 bytes ASCII
///   version    u32 little-endian
///   hdr_len    u32 little-endian
///   header     hdr_len bytes of UTF-8 JSON
///   payload    format-specific little-endian arrays
///
/// Readers throw FormatError on bad magic, version mismatch, truncation or
/// trailing bytes.
void write_header(std::ostream& os, std::string_view magic, std::uint32_t version, const nlohmann::json& meta);
nlohmann::json read_header(std::istream& is, std::string_view magic, std::uint32_t version);

void write_f32(std::ostream& os, std::span<const float> values);
void read_f32(std::istream& is, std::span<float> values);
void write_u8(std::ostream& os, std::span<const std::uint8_t> values);
void read_u8(std::istream& is, std::span<std::uint8_t> values);

/// Throws FormatError unless the stream is exhausted.
void expect_eof(std::istream& is);

std::ofstream open_for_write(const std::filesystem::path& path);
std::ifstream open_for_read(const std::filesystem::path& path);

}  // namespace tiad::io
