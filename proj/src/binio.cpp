#include "binio.hpp"

#include <bit>
#include <istream>
#include <ostream>

#include "semtok/error.hpp"

namespace semtok::binio {

void Writer::bytes(const unsigned char* p, std::size_t n) {
  out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void Writer::magic(std::string_view tag) {
  out_.write(tag.data(), static_cast<std::streamsize>(tag.size()));
}

void Writer::u8(std::uint8_t v) { bytes(&v, 1); }

void Writer::u32(std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  bytes(b, 4);
}

void Writer::u64(std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  bytes(b, 8);
}

void Writer::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void Writer::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void Reader::bytes(unsigned char* p, std::size_t n) {
  in_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    throw FormatError(source_ + ": unexpected end of file");
  }
}

void Reader::expect_magic(std::string_view tag) {
  std::string found(tag.size(), '\0');
  in_.read(found.data(), static_cast<std::streamsize>(found.size()));
  if (static_cast<std::size_t>(in_.gcount()) != tag.size() || found != tag) {
    throw FormatError(source_ + ": bad magic, expected \"" + std::string(tag) +
                      "\"");
  }
}

void Reader::expect_version(std::uint32_t version) {
  const std::uint32_t found = u32();
  if (found != version) {
    throw FormatError(source_ + ": unsupported version " +
                      std::to_string(found) + ", expected " +
                      std::to_string(version));
  }
}

std::uint8_t Reader::u8() {
  unsigned char b = 0;
  bytes(&b, 1);
  return b;
}

std::uint32_t Reader::u32() {
  unsigned char b[4];
  bytes(b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t Reader::u64() {
  unsigned char b[8];
  bytes(b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }
double Reader::f64() { return std::bit_cast<double>(u64()); }

void Reader::expect_end() {
  if (in_.peek() != std::char_traits<char>::eof()) {
    throw FormatError(source_ + ": trailing bytes after payload");
  }
}

}  // namespace semtok::binio
