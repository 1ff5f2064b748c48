#pragma once

// Minimal reader and writer for NumPy .npy files (format 1.0/2.0, C order,
// little-endian numeric dtypes).

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace srda {

struct NpyArray {
  std::string dtype;  // e.g. "<f4", "|u1"
  std::vector<std::size_t> shape;
  std::vector<std::uint8_t> bytes;

  std::size_t count() const;
};

void write_npy(const std::filesystem::path& path, std::span<const float> data, const std::vector<std::size_t>& shape);
void write_npy(const std::filesystem::path& path, std::span<const std::uint8_t> data,
               const std::vector<std::size_t>& shape);

NpyArray read_npy(const std::filesystem::path& path);
NpyArray parse_npy(const std::vector<std::uint8_t>& file, const std::string& name = "<memory>");

/// Converts any supported numeric dtype to float.
std::vector<float> npy_as_float(const NpyArray& a);
/// Integer dtypes only; values must fit in a byte.
std::vector<std::uint8_t> npy_as_u8(const NpyArray& a);

}  // namespace srda
