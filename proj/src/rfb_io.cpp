#include "framesel/binio.hpp"
#include "framesel/error.hpp"
#include "framesel/rfsim.hpp"

namespace framesel {

void write_rfb(const std::filesystem::path& path, std::span<const RfFrame> frames) {
  require(!frames.empty(), "cannot write an empty RF sequence");
  const RfFrame& first = frames.front();
  binio::Writer w;
  w.magic("RFB1");
  w.u32(static_cast<std::uint32_t>(first.m()));
  w.u32(static_cast<std::uint32_t>(first.l()));
  w.u32(static_cast<std::uint32_t>(frames.size()));
  w.f64(first.psf.sampling_frequency_hz);
  w.f64(first.psf.center_frequency_hz);
  for (const RfFrame& f : frames) {
    require(f.m() == first.m() && f.l() == first.l(), "all frames of a sequence must share dimensions");
    // Eigen storage is column-major, i.e. line by line.
    for (Eigen::Index k = 0; k < f.samples.size(); ++k) w.f32(f.samples.data()[k]);
  }
  w.save(path);
}

std::vector<RfFrame> read_rfb(const std::filesystem::path& path) {
  auto r = binio::Reader::open(path);
  r.expect_magic("RFB1");
  const auto m = r.u32("m");
  const auto l = r.u32("l");
  const auto n = r.u32("n_frames");
  PsfParams psf;
  psf.sampling_frequency_hz = r.f64("sampling_frequency_hz");
  psf.center_frequency_hz = r.f64("center_frequency_hz");
  require(m > 0 && l > 0 && n > 0, path.string() + ": zero dimension in header");
  if (r.remaining() / 4 < std::size_t{m} * l * n) {
    throw Error(path.string() + ": truncated while reading field 'samples' (header announces " + std::to_string(n) +
                " frames of " + std::to_string(m) + "x" + std::to_string(l) + ")");
  }

  std::vector<RfFrame> frames(n);
  for (auto& f : frames) {
    f.psf = psf;
    f.samples.resize(m, l);
    for (Eigen::Index k = 0; k < f.samples.size(); ++k) f.samples.data()[k] = r.f32("samples");
  }
  r.expect_end();
  return frames;
}

}  // namespace framesel
