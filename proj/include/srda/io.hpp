#pragma once

// File access for everything the library reads or writes. Reads are
// recorded in a process-wide log so tests can check which files an
// operation touched.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace srda::io {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

void record_read(const std::filesystem::path& path);
/// Canonical paths of every file read since the last clear, in order.
std::vector<std::string> read_log();
void clear_read_log();

}  // namespace srda::io
