#include "framesel/binio.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "framesel/error.hpp"

namespace framesel::binio {

namespace {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void Writer::magic(std::string_view tag) { bytes_.insert(bytes_.end(), tag.begin(), tag.end()); }
void Writer::u8(std::uint8_t v) { bytes_.push_back(v); }
void Writer::u32(std::uint32_t v) { put_le(bytes_, v); }
void Writer::f32(float v) { put_le(bytes_, std::bit_cast<std::uint32_t>(v)); }
void Writer::f64(double v) { put_le(bytes_, std::bit_cast<std::uint64_t>(v)); }

void Writer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
  require(static_cast<bool>(out), "write failed for '" + path.string() + "'");
}

Reader::Reader(std::vector<std::uint8_t> bytes, std::string source)
    : bytes_(std::move(bytes)), source_(std::move(source)) {}

Reader Reader::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Reader(std::move(bytes), path.string());
}

const std::uint8_t* Reader::take(std::size_t n, std::string_view field) {
  if (bytes_.size() - pos_ < n) {
    throw Error((source_.empty() ? std::string("buffer") : source_) + ": truncated while reading field '" +
                std::string(field) + "'");
  }
  const std::uint8_t* p = bytes_.data() + pos_;
  pos_ += n;
  return p;
}

void Reader::expect_magic(std::string_view tag) {
  const std::uint8_t* p = take(tag.size(), "magic");
  if (!std::equal(tag.begin(), tag.end(), p)) {
    throw Error((source_.empty() ? std::string("buffer") : source_) + ": bad magic, expected '" +
                std::string(tag) + "'");
  }
}

std::uint8_t Reader::u8(std::string_view field) { return *take(1, field); }
std::uint32_t Reader::u32(std::string_view field) { return get_le<std::uint32_t>(take(4, field)); }
float Reader::f32(std::string_view field) { return std::bit_cast<float>(get_le<std::uint32_t>(take(4, field))); }
double Reader::f64(std::string_view field) { return std::bit_cast<double>(get_le<std::uint64_t>(take(8, field))); }

void Reader::expect_end() {
  if (remaining() != 0) {
    throw Error((source_.empty() ? std::string("buffer") : source_) + ": " + std::to_string(remaining()) +
                " trailing bytes after last field");
  }
}

}  // namespace framesel::binio
