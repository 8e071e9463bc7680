#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <tuple>

#include "framesel/error.hpp"
#include "framesel/random.hpp"
#include "framesel/rfsim.hpp"

using namespace framesel;
namespace fs = std::filesystem;

namespace {

Inclusion centred_inclusion(double radius = 5.0, double stiffness = 3.0) {
  Inclusion inc;
  inc.center_axial_mm = 20.0;
  inc.center_lateral_mm = 19.0;
  inc.radius_mm = radius;
  inc.stiffness_ratio = stiffness;
  return inc;
}

ScattererPhantom small_phantom(std::uint64_t seed, double stiffness = 3.0) {
  return make_phantom(seed, {40.0, 38.0}, centred_inclusion(5.0, stiffness), 12.0);
}

bool same(const Scatterer& a, const Scatterer& b) {
  return a.axial_mm == b.axial_mm && a.lateral_mm == b.lateral_mm && a.elevational_mm == b.elevational_mm &&
         a.amplitude == b.amplitude;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "framesel_test_rfsim";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(MakePhantom, CountFollowsDensity) {
  const ScattererPhantom p = small_phantom(0);
  EXPECT_EQ(p.scatterers.size(), static_cast<std::size_t>(std::ceil(12.0 * 40.0 * 38.0)));
}

TEST(MakePhantom, DeterministicPerSeed) {
  const ScattererPhantom a = small_phantom(0);
  const ScattererPhantom b = small_phantom(0);
  const ScattererPhantom c = small_phantom(1);
  ASSERT_EQ(a.scatterers.size(), b.scatterers.size());
  for (std::size_t k = 0; k < a.scatterers.size(); ++k) ASSERT_TRUE(same(a.scatterers[k], b.scatterers[k]));
  std::size_t differing = 0;
  for (std::size_t k = 0; k < a.scatterers.size(); ++k) differing += !same(a.scatterers[k], c.scatterers[k]);
  EXPECT_EQ(differing, a.scatterers.size());
}

TEST(MakePhantom, ScatterersInsideExtentAndSlice) {
  const ScattererPhantom p = small_phantom(3);
  for (const Scatterer& s : p.scatterers) {
    EXPECT_GE(s.axial_mm, 0.0);
    EXPECT_LT(s.axial_mm, 40.0);
    EXPECT_GE(s.lateral_mm, 0.0);
    EXPECT_LT(s.lateral_mm, 38.0);
    EXPECT_LE(std::abs(s.elevational_mm), p.slice_half_thickness_mm);
  }
}

TEST(MakePhantom, RejectsBadSpecs) {
  Inclusion outside = centred_inclusion();
  outside.center_axial_mm = 38.0;
  EXPECT_THROW(make_phantom(0, {40.0, 38.0}, outside, 12.0), Error);
  EXPECT_THROW(make_phantom(0, {40.0, 38.0}, centred_inclusion(), 9.0), Error);
  EXPECT_THROW(make_phantom(0, {40.0, 38.0}, centred_inclusion(0.0), 12.0), Error);
  EXPECT_THROW(make_phantom(0, {40.0, 38.0}, centred_inclusion(5.0, 0.0), 12.0), Error);
}

TEST(Deform, IdentityLeavesPhantomUnchanged) {
  const ScattererPhantom p = small_phantom(2);
  const ScattererPhantom q = deform(p, DeformationParams{}, 99);
  ASSERT_EQ(p.scatterers.size(), q.scatterers.size());
  for (std::size_t k = 0; k < p.scatterers.size(); ++k) ASSERT_TRUE(same(p.scatterers[k], q.scatterers[k]));
}

TEST(Deform, LocalStrainInsideAndOutsideInclusion) {
  const ScattererPhantom p = small_phantom(4, 2.0);
  DeformationParams d;
  d.axial_strain = 0.02;
  const ScattererPhantom q = deform(p, d);
  for (std::size_t k = 0; k < p.scatterers.size(); ++k) {
    const Scatterer& s = p.scatterers[k];
    const double expected = p.inclusion.contains(s.axial_mm, s.lateral_mm) ? 0.99 : 0.98;
    EXPECT_NEAR(q.scatterers[k].axial_mm, s.axial_mm * expected, 1e-12);
    EXPECT_EQ(q.scatterers[k].lateral_mm, s.lateral_mm);
  }
}

TEST(Deform, ShiftsWrapIntoExtent) {
  const ScattererPhantom p = small_phantom(5);
  DeformationParams d;
  d.lateral_shift_mm = 3.0;
  d.axial_shift_mm = -1.5;
  d.elevational_shift_mm = 0.2;
  const ScattererPhantom q = deform(p, d);
  for (std::size_t k = 0; k < p.scatterers.size(); ++k) {
    const Scatterer& a = p.scatterers[k];
    const Scatterer& b = q.scatterers[k];
    EXPECT_NEAR(std::fmod(a.lateral_mm + 3.0, 38.0), b.lateral_mm, 1e-9);
    EXPECT_NEAR(std::fmod(a.axial_mm - 1.5 + 40.0, 40.0), b.axial_mm, 1e-9);
    EXPECT_LE(std::abs(b.elevational_mm), p.slice_half_thickness_mm);
  }
  EXPECT_NEAR(q.inclusion.center_lateral_mm, 22.0, 1e-12);
}

TEST(Deform, ReplacesCeilRhoTimesCount) {
  const ScattererPhantom p = small_phantom(6);
  const std::size_t n = p.scatterers.size();
  for (double rho : {0.0, 0.001, 0.15, 0.5, 0.999, 1.0}) {
    DeformationParams d;
    d.decorrelation = rho;
    const ScattererPhantom q = deform(p, d, 17);
    std::size_t changed = 0;
    for (std::size_t k = 0; k < n; ++k) changed += !same(p.scatterers[k], q.scatterers[k]);
    EXPECT_EQ(changed, static_cast<std::size_t>(std::ceil(rho * static_cast<double>(n)))) << "rho " << rho;
  }
}

TEST(Deform, FullDecorrelationSharesNothing) {
  const ScattererPhantom p = small_phantom(7);
  DeformationParams d;
  d.decorrelation = 1.0;
  const ScattererPhantom q = deform(p, d, 1);
  std::set<std::tuple<double, double, double>> before;
  for (const Scatterer& s : p.scatterers) before.insert({s.axial_mm, s.lateral_mm, s.amplitude});
  for (const Scatterer& s : q.scatterers) EXPECT_EQ(before.count({s.axial_mm, s.lateral_mm, s.amplitude}), 0u);
}

TEST(Deform, RejectsInvalidParams) {
  const ScattererPhantom p = small_phantom(8);
  DeformationParams d;
  d.decorrelation = 1.5;
  EXPECT_THROW(deform(p, d), Error);
  d = {};
  d.axial_strain = 0.1;
  EXPECT_THROW(deform(p, d), Error);
}

TEST(RenderRf, SingleScattererPeaksAtItsIndex) {
  ScattererPhantom p;
  p.extent = {12.0, 12.8};
  const PsfParams psf;
  const FrameGeometry geo(512, 128, psf, p.extent);
  p.scatterers.push_back({geo.axial_mm(200.0), geo.lateral_mm(40.0), 0.0, 1.0});
  const RfFrame f = render_rf(p, psf, 512, 128);
  Eigen::Index r = 0, c = 0;
  f.samples.cwiseAbs().maxCoeff(&r, &c);
  EXPECT_EQ(r, 200);
  EXPECT_EQ(c, 40);
  EXPECT_FLOAT_EQ(f.samples(200, 40), 1.0f);
}

TEST(RenderRf, EmptyPhantomGivesZeroFrame) {
  ScattererPhantom p;
  p.extent = {12.0, 12.8};
  const RfFrame f = render_rf(p, PsfParams{}, 256, 64);
  EXPECT_EQ(f.samples.cwiseAbs().maxCoeff(), 0.0f);
}

TEST(RenderRf, RejectsOversizedPsfAndSmallFrames) {
  ScattererPhantom p;
  p.extent = {12.0, 1.6};
  PsfParams psf;
  psf.lateral_beamwidth_mm = 2.0;
  EXPECT_THROW(render_rf(p, psf, 128, 16), Error);
  EXPECT_THROW(render_rf(p, PsfParams{}, 32, 16), Error);
  psf = {};
  psf.center_frequency_hz = 25e6;
  EXPECT_THROW(render_rf(p, psf, 128, 16), Error);
}

TEST(RenderRf, IdentityDeformationIsBitIdentical) {
  const SimulationSetup setup = SimulationSetup::for_frame(256, 64);
  const ScattererPhantom p = make_phantom(1, setup.extent, setup.inclusion, setup.density_per_mm2);
  const RfFrame a = render_rf(p, setup.psf, 256, 64);
  const RfFrame b = render_rf(deform(p, DeformationParams{}, 5), setup.psf, 256, 64);
  EXPECT_TRUE((a.samples.array() == b.samples.array()).all());
}

TEST(RenderRf, FullSizeFrame) {
  const SimulationSetup setup = SimulationSetup::for_frame(2304, 384);
  const ScattererPhantom p = make_phantom(2, setup.extent, setup.inclusion, setup.density_per_mm2);
  const RfFrame f = render_rf(p, setup.psf, 2304, 384);
  EXPECT_EQ(f.m(), 2304);
  EXPECT_EQ(f.l(), 384);
  EXPECT_NO_THROW(f.validate());
}

TEST(Psf, AxialSigmaFromBandwidth) {
  const PsfParams psf;
  // sqrt(2 ln 2) / (pi * 0.6 * 8.5 MHz) * 40 MHz
  EXPECT_NEAR(psf.axial_sigma_samples(), 2.9394, 1e-4);
  EXPECT_NEAR(psf.sample_spacing_mm(), 0.01925, 1e-15);
}

TEST(LabelRule, Thresholds) {
  const LabelRule rule;
  EXPECT_TRUE(rule.good(0.01, 0.0, 0.0, 0.0));
  EXPECT_TRUE(rule.good(-0.005, 0.15, 1.0, -1.0));
  EXPECT_FALSE(rule.good(0.004, 0.0, 0.0, 0.0));
  EXPECT_FALSE(rule.good(0.036, 0.0, 0.0, 0.0));
  EXPECT_FALSE(rule.good(0.01, 0.16, 0.0, 0.0));
  EXPECT_FALSE(rule.good(0.01, 0.0, 1.01, 0.0));
  EXPECT_FALSE(rule.good(0.01, 0.0, 0.0, 1.01));
}

namespace {

std::vector<DeformationParams> steady(int steps, double strain) {
  DeformationParams d;
  d.axial_strain = strain;
  return std::vector<DeformationParams>(static_cast<std::size_t>(steps), d);
}

}  // namespace

TEST(GroundTruth, SteadyCompressionAdjacentPairsGood) {
  const SequenceGroundTruth t = simulate_truth(SimulationSetup::for_frame(256, 64), steady(16, 0.01));
  for (int i = 0; i + 1 < t.frame_count(); ++i) {
    EXPECT_EQ(t.pair(i, i + 1).label, 1);
    EXPECT_EQ(t.pair(i + 1, i).label, 1);
  }
}

TEST(GroundTruth, DecorrelationEventMakesSpanningPairsBad) {
  auto script = steady(16, 0.01);
  script[7].decorrelation = 0.5;
  const SequenceGroundTruth t = simulate_truth(SimulationSetup::for_frame(256, 64), script);
  for (const PairTruth& p : t.pairs()) {
    if (std::min(p.i, p.j) <= 7 && std::max(p.i, p.j) >= 8) {
      EXPECT_EQ(p.label, 0) << p.i << "," << p.j;
    }
  }
}

TEST(GroundTruth, SeventeenFramesGiveSixteenPartners) {
  const SequenceGroundTruth t = simulate_truth(SimulationSetup::for_frame(256, 64), steady(16, 0.01));
  std::vector<int> partners(17, 0);
  for (const PairTruth& p : t.pairs()) ++partners[static_cast<std::size_t>(p.i)];
  EXPECT_EQ(partners[8], 16);
  EXPECT_EQ(partners[0], 8);
  EXPECT_EQ(partners[16], 8);
  EXPECT_EQ(t.pairs().size(), 200u);
}

TEST(GroundTruth, CumulativeComposition) {
  std::vector<DeformationParams> script(3);
  script[0].axial_strain = 0.01;
  script[0].decorrelation = 0.1;
  script[0].lateral_shift_mm = 0.2;
  script[1].axial_strain = 0.02;
  script[1].decorrelation = 0.05;
  script[1].rotation_deg = 0.4;
  script[2].axial_strain = -0.005;
  const SequenceGroundTruth t = simulate_truth(SimulationSetup::for_frame(256, 64), script);
  const double scale = 0.99 * 0.98 * 1.005;
  const PairTruth f = t.pair(0, 3);
  EXPECT_NEAR(f.axial_strain, 1.0 - scale, 1e-15);
  EXPECT_NEAR(f.decorrelation, 1.0 - 0.9 * 0.95, 1e-15);
  EXPECT_NEAR(f.lateral_shift_mm, 0.2, 1e-15);
  EXPECT_NEAR(f.rotation_deg, 0.4, 1e-15);
  const PairTruth b = t.pair(3, 0);
  EXPECT_NEAR(b.axial_strain, 1.0 - 1.0 / scale, 1e-15);
  EXPECT_NEAR(b.decorrelation, f.decorrelation, 1e-15);
  EXPECT_NEAR(b.lateral_shift_mm, -0.2, 1e-15);
  EXPECT_NEAR(b.rotation_deg, -0.4, 1e-15);
}

TEST(GroundTruth, PureAxialFieldIsLinearInDepthOutsideInclusion) {
  const SimulationSetup setup = SimulationSetup::for_frame(256, 64);
  std::vector<DeformationParams> script(1);
  script[0].axial_strain = 0.02;
  script[0].axial_shift_mm = 0.05;
  const SequenceGroundTruth t = simulate_truth(setup, script);
  const FrameGeometry geo(256, 64, setup.psf, setup.extent);
  const Eigen::MatrixXd forward = t.displacement_field(0, 1);
  const Eigen::MatrixXd backward = t.displacement_field(1, 0);
  const double shift = 0.05 / geo.sample_spacing_mm;
  for (Eigen::Index k = 0; k < 64; ++k) {
    for (Eigen::Index r = 0; r < 256; ++r) {
      const double z = geo.axial_mm(static_cast<double>(r));
      if (setup.inclusion.contains(z, geo.lateral_mm(static_cast<double>(k)))) continue;
      EXPECT_NEAR(forward(r, k), -0.02 * static_cast<double>(r) + shift, 1e-9);
      // Backward: frame-1 position z' came from (z' - shift) / 0.98, when that origin lies outside too.
      const double origin = (z - 0.05) / 0.98;
      if (!setup.inclusion.contains(origin, geo.lateral_mm(static_cast<double>(k)))) {
        EXPECT_NEAR(backward(r, k), (origin - z) / geo.sample_spacing_mm, 1e-9);
      }
    }
  }
  EXPECT_TRUE(t.displacement_field(0, 0).isZero());
}

TEST(Simulate, DeterministicFrames) {
  const SimulationSetup setup = SimulationSetup::for_frame(256, 64);
  const auto script = random_motion_script(3, 4, MotionProfile::training());
  const Sequence a = simulate_sequence(11, 5, script, setup);
  const Sequence b = simulate_sequence(11, 5, script, setup);
  const Sequence c = simulate_sequence(12, 5, script, setup);
  ASSERT_EQ(a.frames.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_TRUE((a.frames[k].samples.array() == b.frames[k].samples.array()).all());
  EXPECT_FALSE((a.frames[0].samples.array() == c.frames[0].samples.array()).all());
  EXPECT_THROW(simulate_sequence(11, 6, script, setup), Error);
  EXPECT_THROW(simulate_sequence(11, 1, {}, setup), Error);
}

TEST(MotionScript, DeterministicAndValid) {
  const auto a = random_motion_script(5, 30, MotionProfile::evaluation());
  const auto b = random_motion_script(5, 30, MotionProfile::evaluation());
  ASSERT_EQ(a.size(), 30u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].axial_strain, b[k].axial_strain);
    EXPECT_EQ(a[k].decorrelation, b[k].decorrelation);
    EXPECT_NO_THROW(a[k].validate());
  }
  MotionProfile bad;
  bad.step_strain_min = 0.0;
  EXPECT_THROW(random_motion_script(1, 3, bad), Error);
}

TEST(MotionScript, StrainCoupledDecorrelationFloor) {
  MotionProfile p = MotionProfile::training();
  p.decorrelation_event_probability = 0.0;
  for (const DeformationParams& d : random_motion_script(8, 50, p)) {
    EXPECT_GE(d.decorrelation, p.decorrelation_per_strain * std::abs(d.axial_strain) - 1e-15);
  }
}

TEST(FamilyField, ModesAreEvaluatedAtNormalizedCoordinates) {
  std::array<double, kDeformationFamilySize> c{};
  c[1] = 10.0;  // 10 * z, z in [0, 1]
  c[2] = -2.0;  // -2 * xi, xi in [-1, 1]
  const Eigen::MatrixXd f = deformation_family_field(c, 11, 5);
  EXPECT_NEAR(f(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(f(10, 4), 10.0 - 2.0, 1e-12);
  EXPECT_NEAR(f(5, 2), 5.0, 1e-12);
}

TEST(FamilyField, NoiseFractionOfRms) {
  const Eigen::MatrixXd clean = random_family_field(3, 256, 64, 0.0);
  const Eigen::MatrixXd noisy = random_family_field(3, 256, 64, 0.01);
  const double rms = std::sqrt(clean.squaredNorm() / static_cast<double>(clean.size()));
  const double noise_rms = std::sqrt((noisy - clean).squaredNorm() / static_cast<double>(clean.size()));
  EXPECT_NEAR(noise_rms / rms, 0.01, 0.0005);
}

TEST(RfbFile, RoundTripAndCorruption) {
  const SimulationSetup setup = SimulationSetup::for_frame(128, 32);
  const Sequence seq = simulate_sequence(1, 3, steady(2, 0.01), setup);
  const fs::path path = scratch("seq.rfb");
  write_rfb(path, seq.frames);
  const auto frames = read_rfb(path);
  ASSERT_EQ(frames.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_TRUE((frames[k].samples.array() == seq.frames[k].samples.array()).all());
  EXPECT_EQ(frames[0].psf.center_frequency_hz, 8.5e6);
  EXPECT_EQ(fs::file_size(path), 4 + 12 + 16 + 3u * 128 * 32 * 4);

  fs::resize_file(path, fs::file_size(path) - 2);
  try {
    read_rfb(path);
    FAIL() << "truncated file accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("samples"), std::string::npos) << e.what();
  }
  {
    std::ofstream out(path, std::ios::binary);
    out << "RFB2xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx";
  }
  EXPECT_THROW(read_rfb(path), Error);
  {
    std::ofstream out(path, std::ios::binary);
    out << "RFB1\x01";
  }
  try {
    read_rfb(path);
    FAIL() << "truncated header accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'m'"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read_rfb(scratch("missing.rfb")), Error);
}

TEST(TruthCsv, RoundTripAndErrors) {
  auto script = steady(5, 0.004);
  script[2].decorrelation = 0.3;
  script[3].lateral_shift_mm = 0.7;
  const SequenceGroundTruth t = simulate_truth(SimulationSetup::for_frame(128, 32), script);
  const fs::path path = scratch("truth.csv");
  write_truth_csv(path, t);
  const auto pairs = read_truth_csv(path);
  ASSERT_EQ(pairs.size(), t.pairs().size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    EXPECT_EQ(pairs[k].i, t.pairs()[k].i);
    EXPECT_EQ(pairs[k].j, t.pairs()[k].j);
    EXPECT_EQ(pairs[k].label, t.pairs()[k].label);
    EXPECT_EQ(pairs[k].axial_strain, t.pairs()[k].axial_strain);
    EXPECT_EQ(pairs[k].decorrelation, t.pairs()[k].decorrelation);
    EXPECT_EQ(pairs[k].lateral_shift_mm, t.pairs()[k].lateral_shift_mm);
  }
  {
    std::ofstream out(path);
    out << "frame_i,frame_j,label,axial_strain,rho,lateral_shift_mm\n0,1,2,0.01,0,0\n";
  }
  try {
    read_truth_csv(path);
    FAIL() << "bad label accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  {
    std::ofstream out(path);
    out << "i,j\n";
  }
  EXPECT_THROW(read_truth_csv(path), Error);
}
