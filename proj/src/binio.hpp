#pragma once

// Little-endian binary encoding shared by the on-disk formats.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>

namespace semtok::binio {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void magic(std::string_view tag);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);

 private:
  void bytes(const unsigned char* p, std::size_t n);
  std::ostream& out_;
};

class Reader {
 public:
  // `source` names the stream in error messages.
  Reader(std::istream& in, std::string source)
      : in_(in), source_(std::move(source)) {}

  // Throws FormatError naming the source and the expected tag on mismatch.
  void expect_magic(std::string_view tag);
  void expect_version(std::uint32_t version);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  // Throws FormatError unless the stream is exhausted.
  void expect_end();

  const std::string& source() const { return source_; }

 private:
  void bytes(unsigned char* p, std::size_t n);
  std::istream& in_;
  std::string source_;
};

}  // namespace semtok::binio
