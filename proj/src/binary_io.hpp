#pragma once

// Little-endian primitive encoding shared by the HEGG, HEGF and checkpoint
// formats. Internal to the library.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "heg/errors.hpp"

namespace heg::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void magic(std::string_view m) { bytes(m.data(), m.size()); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void i64(std::int64_t v) { bytes(&v, sizeof v); }
  void f32(float v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }

  const std::vector<char>& buffer() const { return buf_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(std::vector<char> data, std::string source) : data_(std::move(data)), source_(std::move(source)) {}
  static Reader from_file(const std::filesystem::path& path);

  void expect_magic(std::string_view m);
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::int64_t i64() { return pod<std::int64_t>(); }
  float f32() { return pod<float>(); }
  double f64() { return pod<double>(); }
  std::string str();

  // Fails unless n more bytes are available; used before bulk reads so the
  // error names the whole expected length.
  void require(std::uint64_t n, std::string_view what) const;
  void expect_end() const;

  std::size_t offset() const { return pos_; }
  std::size_t size() const { return data_.size(); }
  const std::string& source() const { return source_; }

  [[noreturn]] void fail(const std::string& msg) const;

 private:
  template <typename T>
  T pod() {
    require(sizeof(T), "value");
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::vector<char> data_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace heg::io
