#include "srda/npy.hpp"

#include <cmath>
#include <cstring>
#include <regex>

#include "srda/errors.hpp"
#include "srda/io.hpp"

namespace srda {

std::size_t NpyArray::count() const {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

namespace {

std::vector<std::uint8_t> encode(const std::string& dtype, const void* data, std::size_t bytes,
                                 const std::vector<std::size_t>& shape) {
  std::string dims;
  for (std::size_t d : shape) dims += std::to_string(d) + ", ";
  if (shape.size() > 1) dims.resize(dims.size() - 1);
  std::string header = "{'descr': '" + dtype + "', 'fortran_order': False, 'shape': (" + dims + "), }";
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header += '\n';
  std::vector<std::uint8_t> out = {0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
  const auto len = static_cast<std::uint16_t>(header.size());
  out.push_back(static_cast<std::uint8_t>(len & 0xff));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.insert(out.end(), header.begin(), header.end());
  const auto* p = static_cast<const std::uint8_t*>(data);
  out.insert(out.end(), p, p + bytes);
  return out;
}

std::size_t dtype_size(const std::string& d) {
  if (d.size() < 3) return 0;
  return static_cast<std::size_t>(std::stoi(d.substr(2)));
}

template <typename T>
T load(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

}  // namespace

void write_npy(const std::filesystem::path& path, std::span<const float> data, const std::vector<std::size_t>& shape) {
  io::write_bytes(path, encode("<f4", data.data(), data.size_bytes(), shape));
}

void write_npy(const std::filesystem::path& path, std::span<const std::uint8_t> data,
               const std::vector<std::size_t>& shape) {
  io::write_bytes(path, encode("|u1", data.data(), data.size_bytes(), shape));
}

NpyArray parse_npy(const std::vector<std::uint8_t>& f, const std::string& name) {
  static const std::uint8_t magic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
  if (f.size() < 10 || std::memcmp(f.data(), magic, 6) != 0) throw IoError(name + " is not a .npy file");
  const int major = f[6];
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = f[8] | (static_cast<std::size_t>(f[9]) << 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (f.size() < 12) throw IoError(name + ": truncated header");
    header_len = f[8] | (static_cast<std::size_t>(f[9]) << 8) | (static_cast<std::size_t>(f[10]) << 16) |
                 (static_cast<std::size_t>(f[11]) << 24);
    offset = 12;
  } else {
    throw IoError(name + ": unsupported .npy version " + std::to_string(major));
  }
  if (offset + header_len > f.size()) throw IoError(name + ": truncated header");
  const std::string header(reinterpret_cast<const char*>(f.data() + offset), header_len);
  std::smatch m;
  NpyArray a;
  if (!std::regex_search(header, m, std::regex("'descr':\\s*'([^']+)'"))) throw IoError(name + ": missing dtype");
  a.dtype = m[1];
  if (std::regex_search(header, m, std::regex("'fortran_order':\\s*True"))) throw IoError(name + ": Fortran order is not supported");
  if (!std::regex_search(header, m, std::regex("'shape':\\s*\\(([^)]*)\\)"))) throw IoError(name + ": missing shape");
  const std::string dims = m[1];
  std::regex num("\\d+");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), num); it != std::sregex_iterator(); ++it)
    a.shape.push_back(static_cast<std::size_t>(std::stoull(it->str())));
  if (a.dtype.size() < 3 || (a.dtype[0] != '<' && a.dtype[0] != '|' && a.dtype[0] != '='))
    throw IoError(name + ": unsupported dtype " + a.dtype);
  const std::size_t need = a.count() * dtype_size(a.dtype);
  const std::size_t data_start = offset + header_len;
  if (f.size() - data_start != need)
    throw IoError(name + ": expected " + std::to_string(need) + " data bytes, found " + std::to_string(f.size() - data_start));
  a.bytes.assign(f.begin() + static_cast<std::ptrdiff_t>(data_start), f.end());
  return a;
}

NpyArray read_npy(const std::filesystem::path& path) { return parse_npy(io::read_bytes(path), path.string()); }

std::vector<float> npy_as_float(const NpyArray& a) {
  const std::string t = a.dtype.substr(1);
  const std::size_t n = a.count();
  std::vector<float> out(n);
  const std::uint8_t* p = a.bytes.data();
  for (std::size_t i = 0; i < n; ++i) {
    if (t == "f4") out[i] = load<float>(p + 4 * i);
    else if (t == "f8") out[i] = static_cast<float>(load<double>(p + 8 * i));
    else if (t == "u1") out[i] = p[i];
    else if (t == "i1") out[i] = static_cast<std::int8_t>(p[i]);
    else if (t == "b1") out[i] = p[i] ? 1.0f : 0.0f;
    else if (t == "i2") out[i] = load<std::int16_t>(p + 2 * i);
    else if (t == "u2") out[i] = load<std::uint16_t>(p + 2 * i);
    else if (t == "i4") out[i] = static_cast<float>(load<std::int32_t>(p + 4 * i));
    else if (t == "u4") out[i] = static_cast<float>(load<std::uint32_t>(p + 4 * i));
    else if (t == "i8") out[i] = static_cast<float>(load<std::int64_t>(p + 8 * i));
    else throw IoError("unsupported dtype " + a.dtype);
  }
  return out;
}

std::vector<std::uint8_t> npy_as_u8(const NpyArray& a) {
  const std::string t = a.dtype.substr(1);
  if (t == "f4" || t == "f8") {
    std::vector<std::uint8_t> out;
    for (float v : npy_as_float(a)) {
      if (v < 0 || v > 255 || v != std::floor(v)) throw IoError("mask holds non-integer values");
      out.push_back(static_cast<std::uint8_t>(v));
    }
    return out;
  }
  const std::vector<float> f = npy_as_float(a);
  std::vector<std::uint8_t> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] < 0 || f[i] > 255) throw IoError("mask value out of byte range");
    out[i] = static_cast<std::uint8_t>(f[i]);
  }
  return out;
}

}  // namespace srda
