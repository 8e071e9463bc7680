#pragma once

// Little-endian binary readers/writers shared by the .rfb, .pcb and .mlp formats.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace framesel::binio {

class Writer {
 public:
  void magic(std::string_view tag);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Sequential reader over an in-memory file image. Every read names the field
/// it is decoding so truncation and corruption errors identify the culprit.
class Reader {
 public:
  explicit Reader(std::vector<std::uint8_t> bytes, std::string source = {});
  static Reader open(const std::filesystem::path& path);

  void expect_magic(std::string_view tag);
  std::uint8_t u8(std::string_view field);
  std::uint32_t u32(std::string_view field);
  float f32(std::string_view field);
  double f64(std::string_view field);

  std::size_t remaining() const { return bytes_.size() - pos_; }
  void expect_end();

 private:
  const std::uint8_t* take(std::size_t n, std::string_view field);

  std::vector<std::uint8_t> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace framesel::binio
