#pragma once

// Synthetic scatterer phantoms, parameterized rigid/elastic motion and
// separable-PSF RF rendering. Stands in for acquired phantom/in-vivo data so
// every downstream stage can be trained and scored against known motion.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace framesel {

/// Speed of sound used to convert between depth and RF sample index.
inline constexpr double kSoundSpeedMmPerS = 1.54e6;

struct Scatterer {
  double axial_mm = 0.0;
  double lateral_mm = 0.0;
  double elevational_mm = 0.0;
  double amplitude = 0.0;
};

struct Extent {
  double axial_mm = 0.0;
  double lateral_mm = 0.0;
};

/// Circular stiff (stiffness_ratio > 1) or soft lesion in the imaging plane.
struct Inclusion {
  double center_axial_mm = 0.0;
  double center_lateral_mm = 0.0;
  double radius_mm = 1.0;
  double stiffness_ratio = 1.0;

  bool contains(double axial_mm, double lateral_mm) const;
};

struct ScattererPhantom {
  std::vector<Scatterer> scatterers;
  Inclusion inclusion;
  Extent extent;
  double slice_half_thickness_mm = 0.5;
};

/// One inter-frame motion step. Positive axial_strain compresses toward the
/// transducer face (z = 0); rotation pivots about the top-centre of the extent;
/// decorrelation is the fraction of scatterers replaced (out-of-plane motion).
struct DeformationParams {
  double axial_strain = 0.0;
  double lateral_shift_mm = 0.0;
  double axial_shift_mm = 0.0;
  double elevational_shift_mm = 0.0;
  double rotation_deg = 0.0;
  double decorrelation = 0.0;

  void validate() const;
};

/// lateral_beamwidth_mm is the standard deviation of the Gaussian lateral beam profile.
struct PsfParams {
  double center_frequency_hz = 8.5e6;
  double sampling_frequency_hz = 40e6;
  double fractional_bandwidth = 0.6;
  double lateral_beamwidth_mm = 0.5;

  void validate() const;
  /// Depth covered by one RF sample (two-way travel).
  double sample_spacing_mm() const { return kSoundSpeedMmPerS / (2.0 * sampling_frequency_hz); }
  /// Standard deviation of the Gaussian pulse envelope, in samples.
  double axial_sigma_samples() const;
};

/// m x l RF echo image; column k is scan line k.
struct RfFrame {
  Eigen::MatrixXf samples;
  PsfParams psf;

  Eigen::Index m() const { return samples.rows(); }
  Eigen::Index l() const { return samples.cols(); }
  void validate() const;
};

/// Mapping between frame indices and phantom millimetres. Lines are spaced
/// evenly over the phantom's lateral extent; samples follow the PSF sampling rate.
struct FrameGeometry {
  Eigen::Index m = 0;
  Eigen::Index l = 0;
  double sample_spacing_mm = 0.0;
  double line_pitch_mm = 0.0;

  FrameGeometry() = default;
  FrameGeometry(Eigen::Index rows, Eigen::Index cols, const PsfParams& psf, const Extent& extent);

  double axial_mm(double sample) const { return sample * sample_spacing_mm; }
  double lateral_mm(double line) const { return (line + 0.5) * line_pitch_mm; }
  double sample_of(double axial_mm) const { return axial_mm / sample_spacing_mm; }
  double line_of(double lateral_mm) const { return lateral_mm / line_pitch_mm - 0.5; }
};

ScattererPhantom make_phantom(std::uint64_t seed, Extent extent, Inclusion inclusion, double density_per_mm2);

/// Applies one motion step. The seed drives which scatterers are replaced
/// and where their replacements land.
ScattererPhantom deform(const ScattererPhantom& phantom, const DeformationParams& params, std::uint64_t seed = 0);

/// Maps one in-plane point through a motion step (no decorrelation, no wrap).
/// Inclusion membership is judged at the input position.
Eigen::Vector2d deform_point(const Eigen::Vector2d& axial_lateral_mm, const Inclusion& inclusion,
                             const Extent& extent, const DeformationParams& params);

RfFrame render_rf(const ScattererPhantom& phantom, const PsfParams& psf, Eigen::Index m, Eigen::Index l);

// ---------------------------------------------------------------------------
// Sequences and ground truth

/// Good-pair labeling rule thresholds.
struct LabelRule {
  double min_strain = 0.005;
  double max_strain = 0.035;
  double max_decorrelation = 0.15;
  double max_lateral_shift_mm = 1.0;
  double max_rotation_deg = 1.0;
  int max_offset = 8;

  bool good(double axial_strain, double decorrelation, double lateral_shift_mm, double rotation_deg) const;
};

struct PairTruth {
  int i = 0;
  int j = 0;
  int label = 0;
  double axial_strain = 0.0;
  double decorrelation = 0.0;
  double lateral_shift_mm = 0.0;
  double rotation_deg = 0.0;
};

struct SimulationSetup {
  Eigen::Index m = 512;
  Eigen::Index l = 128;
  PsfParams psf;
  Extent extent;
  Inclusion inclusion;
  double density_per_mm2 = 50.0;
  LabelRule rule;

  /// Phantom sized to the frame (15% axial margin below the imaged depth),
  /// inclusion of radius a quarter of the smaller imaged dimension at the centre.
  static SimulationSetup for_frame(Eigen::Index m, Eigen::Index l, const PsfParams& psf = {});
};

class SequenceGroundTruth {
 public:
  SequenceGroundTruth() = default;
  SequenceGroundTruth(const SimulationSetup& setup, std::vector<DeformationParams> steps);

  int frame_count() const { return static_cast<int>(inclusions_.size()); }
  const std::vector<DeformationParams>& steps() const { return steps_; }
  const std::vector<Inclusion>& inclusions() const { return inclusions_; }
  const std::vector<PairTruth>& pairs() const { return pairs_; }
  const SimulationSetup& setup() const { return setup_; }

  /// Cumulative motion and label for the ordered pair (i, j); i > j inverts the motion.
  PairTruth pair(int i, int j) const;

  /// Axial displacement in samples of every pixel of frame i when moving to
  /// frame j: I_j(r + u(r, k), k) corresponds to I_i(r, k).
  Eigen::MatrixXd displacement_field(int i, int j) const;

 private:
  Eigen::Vector2d forward_map(int from, int to, Eigen::Vector2d point) const;

  SimulationSetup setup_;
  std::vector<DeformationParams> steps_;
  std::vector<Inclusion> inclusions_;
  std::vector<PairTruth> pairs_;
};

struct Sequence {
  std::vector<RfFrame> frames;
  SequenceGroundTruth truth;
};

/// Ground truth only; no scatterers are rendered.
SequenceGroundTruth simulate_truth(const SimulationSetup& setup, std::span<const DeformationParams> motion_script);

/// Renders frame 0 from a seeded phantom and frame k+1 by deforming frame k's phantom.
Sequence simulate_sequence(std::uint64_t seed, int n_frames, std::span<const DeformationParams> motion_script,
                           const SimulationSetup& setup);

// ---------------------------------------------------------------------------
// Freehand-motion scripts

/// Random freehand motion: a per-sequence compression rate (log-uniform in
/// [step_strain_min, step_strain_max]) with jitter and pauses, plus
/// intermittent decorrelation, lateral-slip and rotation events. Compression
/// also pushes scatterers out of plane: each step decorrelates by
/// decorrelation_per_strain * |strain|. Lateral slips after the first move
/// back toward the starting position.
struct MotionProfile {
  double step_strain_min = 0.002;
  double step_strain_max = 0.03;
  double strain_jitter = 0.3;
  double pause_probability = 0.1;
  double axial_shift_jitter_mm = 0.01;
  double decorrelation_per_strain = 8.0;

  double decorrelation_event_probability = 0.08;
  double decorrelation_event_min = 0.3;
  double decorrelation_event_max = 0.7;
  double decorrelation_jitter = 0.005;

  double lateral_event_probability = 0.05;
  double lateral_event_min_mm = 1.2;
  double lateral_event_max_mm = 2.0;
  double lateral_jitter_mm = 0.02;

  double rotation_event_probability = 0.05;
  double rotation_event_min_deg = 1.5;
  double rotation_event_max_deg = 3.0;
  double rotation_jitter_deg = 0.03;

  /// Broad coverage of both classes; used to build training corpora.
  static MotionProfile training();
  /// Mostly-good freehand scans with occasional bad events.
  static MotionProfile evaluation();
};

std::vector<DeformationParams> random_motion_script(std::uint64_t seed, int steps, const MotionProfile& profile);

// ---------------------------------------------------------------------------
// Low-dimensional displacement family

inline constexpr int kDeformationFamilySize = 12;

/// Smooth axial displacement field (samples) spanned by twelve modes: a
/// bivariate cubic in normalized depth/lateral position (ten modes) plus a
/// Gaussian inclusion bump and its depth-weighted variant.
Eigen::MatrixXd deformation_family_field(const std::array<double, kDeformationFamilySize>& coefficients,
                                         Eigen::Index m, Eigen::Index l);

/// Draws random family coefficients (descending scale) and adds white noise
/// with standard deviation noise_fraction times the field's RMS.
Eigen::MatrixXd random_family_field(std::uint64_t seed, Eigen::Index m, Eigen::Index l, double noise_fraction);

// ---------------------------------------------------------------------------
// Files

/// ".rfb" sequence file: "RFB1", u32 m, l, n_frames, f64 fs, f64 fc, then
/// column-major f32 frames.
void write_rfb(const std::filesystem::path& path, std::span<const RfFrame> frames);
std::vector<RfFrame> read_rfb(const std::filesystem::path& path);

/// Ground truth sidecar: frame_i,frame_j,label,axial_strain,rho,lateral_shift_mm
void write_truth_csv(const std::filesystem::path& path, const SequenceGroundTruth& truth);
std::vector<PairTruth> read_truth_csv(const std::filesystem::path& path);

}  // namespace framesel
