#include "srda/io.hpp"

#include <fstream>
#include <iterator>
#include <mutex>

#include "srda/errors.hpp"

namespace srda::io {
namespace {

std::mutex log_mutex;
std::vector<std::string>& log_storage() {
  static std::vector<std::string> log;
  return log;
}

}  // namespace

void record_read(const std::filesystem::path& path) {
  std::error_code ec;
  auto canonical = std::filesystem::weakly_canonical(path, ec);
  std::lock_guard lock(log_mutex);
  log_storage().push_back(ec ? path.string() : canonical.string());
}

std::vector<std::string> read_log() {
  std::lock_guard lock(log_mutex);
  return log_storage();
}

void clear_read_log() {
  std::lock_guard lock(log_mutex);
  log_storage().clear();
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  record_read(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace srda::io
