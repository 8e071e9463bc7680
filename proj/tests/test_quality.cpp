#include <gtest/gtest.h>

#include <cmath>

#include "framesel/quality.hpp"
#include "framesel/random.hpp"

using namespace framesel;

namespace {

WindowStats stats(double mean, double stddev) {
  WindowStats s;
  s.mean = mean;
  s.stddev = stddev;
  s.count = 100;
  return s;
}

RfFrame noise_frame(std::uint64_t seed, Eigen::Index m, Eigen::Index l) {
  Rng rng(seed);
  RfFrame f;
  f.samples.resize(m, l);
  for (Eigen::Index k = 0; k < f.samples.size(); ++k) f.samples.data()[k] = static_cast<float>(rng.normal());
  return f;
}

// Strain image: background level 2 with +-0.5 checkerboard noise, target
// block at level 1 with the same noise.
Eigen::MatrixXd checker_image() {
  Eigen::MatrixXd s(40, 30);
  for (Eigen::Index c = 0; c < 30; ++c) {
    for (Eigen::Index r = 0; r < 40; ++r) {
      const double level = (r >= 20 && c >= 15) ? 1.0 : 2.0;
      s(r, c) = level + (((r + c) % 2 == 0) ? 0.5 : -0.5);
    }
  }
  return s;
}

}  // namespace

TEST(Snr, MeanOverStd) {
  EXPECT_DOUBLE_EQ(snr(stats(2.0, 0.5)), 4.0);
  EXPECT_DOUBLE_EQ(snr(stats(-1.0, 0.25)), -4.0);
  EXPECT_THROW(snr(stats(1.0, 0.0)), Error);
}

TEST(Cnr, ContrastOverPooledNoise) {
  EXPECT_NEAR(cnr(stats(1.0, 0.5), stats(2.0, 0.5)), 2.0, 1e-12);
  EXPECT_NEAR(cnr(stats(1.0, 1.0), stats(2.0, 0.0)), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(cnr(stats(0.5, 0.6), stats(1.5, 0.8)), std::sqrt(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(cnr(stats(1.0, 0.3), stats(1.0, 0.4)), 0.0);
  EXPECT_THROW(cnr(stats(1.0, 0.0), stats(2.0, 0.0)), Error);
}

TEST(Cnr, SymmetricInWindows) {
  Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    const WindowStats a = stats(rng.normal(), rng.uniform(0.1, 2.0));
    const WindowStats b = stats(rng.normal(), rng.uniform(0.1, 2.0));
    EXPECT_DOUBLE_EQ(cnr(a, b), cnr(b, a));
  }
}

TEST(WindowStats, UnbiasedStd) {
  Eigen::MatrixXd s(3, 3);
  s << 1, 2, 0,
       3, 4, 0,
       0, 0, 0;
  const WindowStats w = window_stats(s, {0, 2, 0, 2});
  EXPECT_EQ(w.count, 4);
  EXPECT_DOUBLE_EQ(w.mean, 2.5);
  EXPECT_NEAR(w.stddev, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_THROW(window_stats(s, {2, 2, 0, 1}), Error);
  EXPECT_THROW(window_stats(s, {0, 0, 0, 1}), Error);
}

TEST(Assess, CheckerImage) {
  const Eigen::MatrixXd s = checker_image();
  const Window target{22, 10, 17, 10};
  const Window background{2, 10, 2, 10};
  const QualityReport q = assess(s, target, background);
  // 100 values of +-0.5 in equal numbers: unbiased variance 25 / 99.
  const double sd = std::sqrt(25.0 / 99.0);
  EXPECT_NEAR(q.background_stats.stddev, sd, 1e-12);
  EXPECT_NEAR(q.snr, 2.0 / sd, 1e-12);
  EXPECT_NEAR(q.cnr, 1.0 / sd, 1e-12);
  EXPECT_THROW(assess(s, target, {20, 5, 15, 5}), Error);
}

TEST(Assess, ScaleInvariance) {
  const Eigen::MatrixXd s = checker_image();
  const Window target{22, 10, 17, 10};
  const Window background{2, 10, 2, 10};
  const QualityReport base = assess(s, target, background);
  for (double k : {0.01, 3.0, 250.0}) {
    const QualityReport scaled = assess(k * s, target, background);
    EXPECT_NEAR(scaled.snr, base.snr, 1e-12 * base.snr);
    EXPECT_NEAR(scaled.cnr, base.cnr, 1e-12 * base.cnr);
  }
  EXPECT_NEAR(assess(-s, target, background).cnr, base.cnr, 1e-12);
}

TEST(LsqStrain, AffineDisplacementExact) {
  Eigen::MatrixXd u(200, 3);
  for (Eigen::Index c = 0; c < 3; ++c) {
    for (Eigen::Index r = 0; r < 200; ++r) u(r, c) = 4.0 + (0.01 + 0.005 * c) * static_cast<double>(r);
  }
  const StrainImage s = lsq_strain(u, 41);
  EXPECT_EQ(s.strain.rows(), 160);
  EXPECT_EQ(s.strain.cols(), 3);
  for (Eigen::Index c = 0; c < 3; ++c) {
    EXPECT_LE((s.strain.col(c).array() - (0.01 + 0.005 * c)).abs().maxCoeff(), 1e-12);
  }
}

TEST(LsqStrain, QuadraticGivesCentreDerivative) {
  Eigen::MatrixXd u(100, 1);
  for (Eigen::Index r = 0; r < 100; ++r) u(r, 0) = 0.001 * static_cast<double>(r * r);
  const StrainImage s = lsq_strain(u, 11);
  for (Eigen::Index r = 0; r < s.strain.rows(); ++r) {
    EXPECT_NEAR(s.strain(r, 0), 0.002 * static_cast<double>(r + 5), 1e-12);
  }
}

TEST(LsqStrain, PiecewiseConstantPlateaus) {
  Eigen::MatrixXi u = Eigen::MatrixXi::Zero(80, 2);
  u.bottomRows(40).setConstant(6);
  const StrainImage s = lsq_strain(u, 7);
  for (Eigen::Index r = 0; r < s.strain.rows(); ++r) {
    const Eigen::Index centre = r + 3;
    if (centre + 3 < 40 || centre - 3 >= 40) EXPECT_EQ(s.strain(r, 0), 0.0);
    else EXPECT_GT(s.strain(r, 0), 0.0);
  }
}

TEST(LsqStrain, RejectsBadWindows) {
  const Eigen::MatrixXd u = Eigen::MatrixXd::Zero(100, 2);
  EXPECT_THROW(lsq_strain(u, 4), Error);
  EXPECT_THROW(lsq_strain(u, 1), Error);
  EXPECT_THROW(lsq_strain(u, 27), Error);
  EXPECT_NO_THROW(lsq_strain(u, 25));
}

TEST(DenseDisplacement, IdenticalFramesGiveZeroField) {
  const RfFrame f = noise_frame(1, 128, 16);
  DpParams dp;
  dp.d_max = 6;
  EXPECT_TRUE(dense_displacement(f, f, dp).isZero());
}

TEST(DenseDisplacement, UniformShift) {
  const RfFrame wide = noise_frame(2, 140, 16);
  RfFrame first, second;
  first.samples = wide.samples.middleRows(6, 128);
  second.samples = wide.samples.middleRows(2, 128);  // second[r + 4] = first[r]
  DpParams dp;
  dp.d_max = 8;
  const Eigen::MatrixXi u = dense_displacement(first, second, dp, false);
  EXPECT_TRUE((u.middleRows(8, 112).array() == 4).all());
  const Eigen::MatrixXi filtered = dense_displacement(first, second, dp, true);
  EXPECT_TRUE((filtered.middleRows(9, 110).array() == 4).all());
  EXPECT_THROW(dense_displacement(first, noise_frame(3, 128, 17), dp), Error);
}

TEST(Median3x3, RemovesIsolatedOutliersAndKeepsEdges) {
  Eigen::MatrixXi f = Eigen::MatrixXi::Constant(6, 5, 2);
  f(3, 2) = 40;
  f(0, 0) = -9;
  const Eigen::MatrixXi g = median3x3(f);
  EXPECT_TRUE((g.array() == 2).all());

  Eigen::MatrixXi step = Eigen::MatrixXi::Zero(6, 4);
  step.bottomRows(3).setConstant(5);
  EXPECT_TRUE((median3x3(step).array() == step.array()).all());
}

TEST(DefaultWindows, CentredInclusion) {
  const SimulationSetup setup = SimulationSetup::for_frame(512, 128);
  const FrameGeometry geo(512, 128, setup.psf, setup.extent);
  const WindowPair w = default_windows(setup.inclusion, geo, 41);
  const Eigen::Index strain_rows = 512 - 40;
  EXPECT_TRUE(w.target.inside(strain_rows, 128));
  EXPECT_TRUE(w.background.inside(strain_rows, 128));
  EXPECT_FALSE(w.target.overlaps(w.background));
  EXPECT_EQ(w.target.rows, w.background.rows);
  EXPECT_EQ(w.target.cols, w.background.cols);
  // Target centred on the inclusion in strain-image rows (offset by half the window).
  const double centre_row = static_cast<double>(w.target.row0) + static_cast<double>(w.target.rows - 1) / 2.0 + 20.0;
  const double centre_col = static_cast<double>(w.target.col0) + static_cast<double>(w.target.cols - 1) / 2.0;
  EXPECT_NEAR(geo.axial_mm(centre_row), setup.inclusion.center_axial_mm, geo.sample_spacing_mm);
  EXPECT_NEAR(geo.lateral_mm(centre_col), setup.inclusion.center_lateral_mm, geo.line_pitch_mm);
  // Half-side 0.6 r.
  EXPECT_NEAR(static_cast<double>(w.target.rows) * geo.sample_spacing_mm, 1.2 * setup.inclusion.radius_mm,
              2.0 * geo.sample_spacing_mm);
  // Background in the upper-left quadrant.
  EXPECT_LT(w.background.row0 + w.background.rows, strain_rows / 2);
  EXPECT_LT(w.background.col0 + w.background.cols, 64);
  // Every background pixel lies outside the inclusion.
  for (Eigen::Index c = w.background.col0; c < w.background.col0 + w.background.cols; ++c) {
    for (Eigen::Index r = w.background.row0; r < w.background.row0 + w.background.rows; ++r) {
      EXPECT_FALSE(setup.inclusion.contains(geo.axial_mm(static_cast<double>(r + 20)), geo.lateral_mm(static_cast<double>(c))));
    }
  }
}

TEST(DefaultWindows, DriftedInclusionUsesUpperRight) {
  const SimulationSetup setup = SimulationSetup::for_frame(512, 128);
  const FrameGeometry geo(512, 128, setup.psf, setup.extent);
  Inclusion left = setup.inclusion;
  left.center_lateral_mm = 3.0;
  const WindowPair w = default_windows(left, geo, 41);
  EXPECT_GT(w.background.col0, 64);
  EXPECT_EQ(w.background.col0 + w.background.cols, 128 - 128 / 32);
  EXPECT_FALSE(w.target.overlaps(w.background));

  Inclusion outside = setup.inclusion;
  outside.center_axial_mm = 0.5;
  EXPECT_THROW(default_windows(outside, geo, 41), Error);
  Inclusion tiny = setup.inclusion;
  tiny.radius_mm = 0.05;
  EXPECT_THROW(default_windows(tiny, geo, 41), Error);
}
