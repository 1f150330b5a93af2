#include "binary_io.hpp"

#include <fstream>
#include <iterator>

namespace heg::io {

void Writer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

Reader Reader::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Reader(std::move(data), path.string());
}

void Reader::fail(const std::string& msg) const {
  throw FormatError(source_ + ": " + msg + " at byte offset " + std::to_string(pos_));
}

void Reader::require(std::uint64_t n, std::string_view what) const {
  const std::uint64_t left = data_.size() - pos_;
  if (n > left) {
    fail("truncated " + std::string(what) + ": expected " + std::to_string(n) +
         " more bytes (file length " + std::to_string(pos_ + n) + "), actual " +
         std::to_string(left) + " (file length " + std::to_string(data_.size()) + ")");
  }
}

void Reader::expect_magic(std::string_view m) {
  require(m.size(), "magic");
  if (std::string_view(data_.data() + pos_, m.size()) != m) {
    fail("bad magic, expected '" + std::string(m) + "'");
  }
  pos_ += m.size();
}

std::string Reader::str() {
  const std::uint64_t n = u64();
  require(n, "string");
  std::string s(data_.data() + pos_, n);
  pos_ += n;
  return s;
}

void Reader::expect_end() const {
  if (pos_ != data_.size()) {
    fail(std::to_string(data_.size() - pos_) + " trailing bytes");
  }
}

}  // namespace heg::io
