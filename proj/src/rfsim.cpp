#include "framesel/rfsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "csv.hpp"
#include "framesel/error.hpp"
#include "framesel/random.hpp"

namespace framesel {

namespace {

double wrap(double v, double period) {
  if (v >= 0.0 && v < period) return v;
  double w = v - period * std::floor(v / period);
  return w >= period ? 0.0 : w;
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

bool Inclusion::contains(double axial_mm, double lateral_mm) const {
  const double dz = axial_mm - center_axial_mm;
  const double dx = lateral_mm - center_lateral_mm;
  return dz * dz + dx * dx <= radius_mm * radius_mm;
}

void DeformationParams::validate() const {
  require(finite(axial_strain) && finite(lateral_shift_mm) && finite(axial_shift_mm) &&
              finite(elevational_shift_mm) && finite(rotation_deg) && finite(decorrelation),
          "deformation parameters must be finite");
  require(decorrelation >= 0.0 && decorrelation <= 1.0, "decorrelation fraction must lie in [0, 1]");
  require(std::abs(axial_strain) < 0.1, "axial strain magnitude must be below 0.1");
}

void PsfParams::validate() const {
  require(center_frequency_hz > 0.0 && center_frequency_hz < sampling_frequency_hz / 2.0,
          "center frequency must lie in (0, fs/2)");
  require(fractional_bandwidth > 0.0 && fractional_bandwidth <= 1.0, "fractional bandwidth must lie in (0, 1]");
  require(lateral_beamwidth_mm > 0.0, "lateral beamwidth must be positive");
}

double PsfParams::axial_sigma_samples() const {
  // -6 dB full bandwidth of a Gaussian-enveloped pulse fixes its envelope width.
  const double sigma_t = std::sqrt(2.0 * std::numbers::ln2) / (std::numbers::pi * fractional_bandwidth * center_frequency_hz);
  return sigma_t * sampling_frequency_hz;
}

void RfFrame::validate() const {
  require(m() >= 64 && l() >= 16, "RF frame must have at least 64 samples and 16 lines");
  require(samples.allFinite(), "RF frame contains non-finite samples");
}

FrameGeometry::FrameGeometry(Eigen::Index rows, Eigen::Index cols, const PsfParams& psf, const Extent& extent)
    : m(rows), l(cols), sample_spacing_mm(psf.sample_spacing_mm()), line_pitch_mm(extent.lateral_mm / cols) {}

ScattererPhantom make_phantom(std::uint64_t seed, Extent extent, Inclusion inclusion, double density_per_mm2) {
  require(extent.axial_mm > 0.0 && extent.lateral_mm > 0.0, "phantom extent must be positive");
  require(density_per_mm2 >= 10.0, "scatterer density must be at least 10 per mm^2 for developed speckle");
  require(inclusion.radius_mm > 0.0, "inclusion radius must be positive");
  require(inclusion.stiffness_ratio > 0.0, "inclusion stiffness ratio must be positive");
  if (inclusion.center_axial_mm - inclusion.radius_mm < 0.0 ||
      inclusion.center_axial_mm + inclusion.radius_mm > extent.axial_mm ||
      inclusion.center_lateral_mm - inclusion.radius_mm < 0.0 ||
      inclusion.center_lateral_mm + inclusion.radius_mm > extent.lateral_mm) {
    throw Error("inclusion (center " + csv::format(inclusion.center_axial_mm) + "," +
                csv::format(inclusion.center_lateral_mm) + " mm, radius " + csv::format(inclusion.radius_mm) +
                " mm) does not fit inside the " + csv::format(extent.axial_mm) + "x" +
                csv::format(extent.lateral_mm) + " mm extent");
  }

  ScattererPhantom phantom;
  phantom.extent = extent;
  phantom.inclusion = inclusion;
  const auto count = static_cast<std::size_t>(std::ceil(density_per_mm2 * extent.axial_mm * extent.lateral_mm));
  phantom.scatterers.resize(count);

  Rng rng(seed);
  const double h = phantom.slice_half_thickness_mm;
  for (auto& s : phantom.scatterers) {
    s.axial_mm = rng.uniform() * extent.axial_mm;
    s.lateral_mm = rng.uniform() * extent.lateral_mm;
    s.elevational_mm = rng.uniform(-h, h);
    s.amplitude = rng.normal();
  }
  return phantom;
}

Eigen::Vector2d deform_point(const Eigen::Vector2d& axial_lateral_mm, const Inclusion& inclusion,
                             const Extent& extent, const DeformationParams& params) {
  double z = axial_lateral_mm.x();
  double x = axial_lateral_mm.y();
  const double local_strain =
      inclusion.contains(z, x) ? params.axial_strain / inclusion.stiffness_ratio : params.axial_strain;
  z *= 1.0 - local_strain;

  if (params.rotation_deg != 0.0) {
    const double theta = params.rotation_deg * std::numbers::pi / 180.0;
    const double pivot = extent.lateral_mm / 2.0;
    const double dx = x - pivot;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    x = pivot + dx * c - z * s;
    z = dx * s + z * c;
  }
  return {z + params.axial_shift_mm, x + params.lateral_shift_mm};
}

ScattererPhantom deform(const ScattererPhantom& phantom, const DeformationParams& params, std::uint64_t seed) {
  params.validate();
  ScattererPhantom out = phantom;
  const Extent& ext = phantom.extent;
  const double h = phantom.slice_half_thickness_mm;

  for (auto& s : out.scatterers) {
    const Eigen::Vector2d p = deform_point({s.axial_mm, s.lateral_mm}, phantom.inclusion, ext, params);
    s.axial_mm = wrap(p.x(), ext.axial_mm);
    s.lateral_mm = wrap(p.y(), ext.lateral_mm);
    if (params.elevational_shift_mm != 0.0) s.elevational_mm = wrap(s.elevational_mm + params.elevational_shift_mm + h, 2.0 * h) - h;
  }

  const Eigen::Vector2d c =
      deform_point({phantom.inclusion.center_axial_mm, phantom.inclusion.center_lateral_mm}, phantom.inclusion, ext, params);
  out.inclusion.center_axial_mm = wrap(c.x(), ext.axial_mm);
  out.inclusion.center_lateral_mm = wrap(c.y(), ext.lateral_mm);

  const std::size_t n = out.scatterers.size();
  const auto replaced = static_cast<std::size_t>(std::ceil(params.decorrelation * static_cast<double>(n)));
  if (replaced > 0) {
    Rng rng(seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = 0; k < replaced; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng.below(n - k));
      std::swap(order[k], order[pick]);
      Scatterer& s = out.scatterers[order[k]];
      s.axial_mm = rng.uniform() * ext.axial_mm;
      s.lateral_mm = rng.uniform() * ext.lateral_mm;
      s.elevational_mm = rng.uniform(-h, h);
      s.amplitude = rng.normal();
    }
  }
  return out;
}

RfFrame render_rf(const ScattererPhantom& phantom, const PsfParams& psf, Eigen::Index m, Eigen::Index l) {
  psf.validate();
  require(m >= 64 && l >= 16, "RF frame must have at least 64 samples and 16 lines");
  require(phantom.extent.lateral_mm > 0.0, "phantom extent must be positive");

  const FrameGeometry geo(m, l, psf, phantom.extent);
  const double sigma_axial = psf.axial_sigma_samples();
  const double sigma_lateral = psf.lateral_beamwidth_mm / geo.line_pitch_mm;
  const auto half_axial = static_cast<Eigen::Index>(std::ceil(3.0 * sigma_axial));
  const auto half_lateral = static_cast<Eigen::Index>(std::ceil(3.0 * sigma_lateral));
  if (2 * half_axial + 1 > m || 2 * half_lateral + 1 > l) {
    throw Error("PSF support (" + std::to_string(2 * half_axial + 1) + " samples x " +
                std::to_string(2 * half_lateral + 1) + " lines) exceeds the " + std::to_string(m) + "x" +
                std::to_string(l) + " image");
  }

  const double cycles_per_sample = psf.center_frequency_hz / psf.sampling_frequency_hz;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, l);
  Eigen::VectorXd axial(2 * half_axial + 2);
  Eigen::VectorXd lateral(2 * half_lateral + 2);

  for (const Scatterer& s : phantom.scatterers) {
    const double row = geo.sample_of(s.axial_mm);
    const double col = geo.line_of(s.lateral_mm);
    const auto r0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::ceil(row - half_axial)));
    const auto r1 = std::min<Eigen::Index>(m - 1, static_cast<Eigen::Index>(std::floor(row + half_axial)));
    const auto c0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::ceil(col - half_lateral)));
    const auto c1 = std::min<Eigen::Index>(l - 1, static_cast<Eigen::Index>(std::floor(col + half_lateral)));
    if (r0 > r1 || c0 > c1) continue;

    const Eigen::Index nr = r1 - r0 + 1;
    const Eigen::Index nc = c1 - c0 + 1;
    for (Eigen::Index r = 0; r < nr; ++r) {
      const double t = static_cast<double>(r0 + r) - row;
      axial[r] = std::exp(-t * t / (2.0 * sigma_axial * sigma_axial)) *
                 std::cos(2.0 * std::numbers::pi * cycles_per_sample * t);
    }
    for (Eigen::Index c = 0; c < nc; ++c) {
      const double t = static_cast<double>(c0 + c) - col;
      lateral[c] = std::exp(-t * t / (2.0 * sigma_lateral * sigma_lateral));
    }
    acc.block(r0, c0, nr, nc).noalias() += (s.amplitude * axial.head(nr)) * lateral.head(nc).transpose();
  }

  RfFrame frame;
  frame.samples = acc.cast<float>();
  frame.psf = psf;
  return frame;
}

// ---------------------------------------------------------------------------

bool LabelRule::good(double axial_strain, double decorrelation, double lateral_shift_mm, double rotation_deg) const {
  const double strain = std::abs(axial_strain);
  return strain >= min_strain && strain <= max_strain && decorrelation <= max_decorrelation &&
         std::abs(lateral_shift_mm) <= max_lateral_shift_mm && std::abs(rotation_deg) <= max_rotation_deg;
}

SimulationSetup SimulationSetup::for_frame(Eigen::Index m, Eigen::Index l, const PsfParams& psf) {
  constexpr double kLinePitchMm = 0.1;
  SimulationSetup setup;
  setup.m = m;
  setup.l = l;
  setup.psf = psf;
  const double depth = static_cast<double>(m) * psf.sample_spacing_mm();
  const double width = static_cast<double>(l) * kLinePitchMm;
  setup.extent = {1.15 * depth, width};
  setup.inclusion.center_axial_mm = depth / 2.0;
  setup.inclusion.center_lateral_mm = width / 2.0;
  setup.inclusion.radius_mm = 0.25 * std::min(depth, width);
  setup.inclusion.stiffness_ratio = 3.0;
  return setup;
}

SequenceGroundTruth::SequenceGroundTruth(const SimulationSetup& setup, std::vector<DeformationParams> steps)
    : setup_(setup), steps_(std::move(steps)) {
  inclusions_.reserve(steps_.size() + 1);
  inclusions_.push_back(setup_.inclusion);
  for (const DeformationParams& step : steps_) {
    step.validate();
    Inclusion next = inclusions_.back();
    const Eigen::Vector2d c =
        deform_point({next.center_axial_mm, next.center_lateral_mm}, next, setup_.extent, step);
    next.center_axial_mm = wrap(c.x(), setup_.extent.axial_mm);
    next.center_lateral_mm = wrap(c.y(), setup_.extent.lateral_mm);
    inclusions_.push_back(next);
  }

  const int n = frame_count();
  const int span = setup_.rule.max_offset;
  for (int i = 0; i < n; ++i) {
    for (int j = std::max(0, i - span); j <= std::min(n - 1, i + span); ++j) {
      if (j != i) pairs_.push_back(pair(i, j));
    }
  }
}

PairTruth SequenceGroundTruth::pair(int i, int j) const {
  require(i >= 0 && j >= 0 && i < frame_count() && j < frame_count(), "frame index out of range");
  PairTruth t;
  t.i = i;
  t.j = j;
  const int lo = std::min(i, j);
  const int hi = std::max(i, j);
  double scale = 1.0;
  double kept = 1.0;
  for (int k = lo; k < hi; ++k) {
    const DeformationParams& s = steps_[static_cast<std::size_t>(k)];
    scale *= 1.0 - s.axial_strain;
    kept *= 1.0 - s.decorrelation;
    t.lateral_shift_mm += s.lateral_shift_mm;
    t.rotation_deg += s.rotation_deg;
  }
  t.decorrelation = 1.0 - kept;
  if (i <= j) {
    t.axial_strain = 1.0 - scale;
  } else {
    t.axial_strain = 1.0 - 1.0 / scale;
    t.lateral_shift_mm = -t.lateral_shift_mm;
    t.rotation_deg = -t.rotation_deg;
  }
  t.label = (i != j && setup_.rule.good(t.axial_strain, t.decorrelation, t.lateral_shift_mm, t.rotation_deg)) ? 1 : 0;
  return t;
}

Eigen::Vector2d SequenceGroundTruth::forward_map(int from, int to, Eigen::Vector2d point) const {
  for (int k = from; k < to; ++k) {
    point = deform_point(point, inclusions_[static_cast<std::size_t>(k)], setup_.extent,
                         steps_[static_cast<std::size_t>(k)]);
  }
  return point;
}

Eigen::MatrixXd SequenceGroundTruth::displacement_field(int i, int j) const {
  require(i >= 0 && j >= 0 && i < frame_count() && j < frame_count(), "frame index out of range");
  const FrameGeometry geo(setup_.m, setup_.l, setup_.psf, setup_.extent);
  Eigen::MatrixXd field = Eigen::MatrixXd::Zero(setup_.m, setup_.l);
  if (i == j) return field;

  for (Eigen::Index k = 0; k < setup_.l; ++k) {
    for (Eigen::Index r = 0; r < setup_.m; ++r) {
      const Eigen::Vector2d p(geo.axial_mm(static_cast<double>(r)), geo.lateral_mm(static_cast<double>(k)));
      Eigen::Vector2d q;
      if (i < j) {
        q = forward_map(i, j, p);
      } else {
        // Invert the forward motion from j to i by fixed-point iteration; the
        // maps are small perturbations of the identity.
        q = p;
        for (int it = 0; it < 50; ++it) {
          const Eigen::Vector2d step = p - forward_map(j, i, q);
          q += step;
          if (step.cwiseAbs().maxCoeff() < 1e-12) break;
        }
      }
      field(r, k) = (q.x() - p.x()) / geo.sample_spacing_mm;
    }
  }
  return field;
}

SequenceGroundTruth simulate_truth(const SimulationSetup& setup, std::span<const DeformationParams> motion_script) {
  return SequenceGroundTruth(setup, std::vector<DeformationParams>(motion_script.begin(), motion_script.end()));
}

Sequence simulate_sequence(std::uint64_t seed, int n_frames, std::span<const DeformationParams> motion_script,
                           const SimulationSetup& setup) {
  require(n_frames >= 2, "a sequence needs at least two frames");
  require(motion_script.size() == static_cast<std::size_t>(n_frames - 1),
          "motion script must hold n_frames - 1 steps");

  Sequence seq;
  seq.truth = simulate_truth(setup, motion_script);
  seq.frames.reserve(static_cast<std::size_t>(n_frames));

  ScattererPhantom phantom = make_phantom(derive_seed(seed, 0), setup.extent, setup.inclusion, setup.density_per_mm2);
  seq.frames.push_back(render_rf(phantom, setup.psf, setup.m, setup.l));
  for (int k = 0; k + 1 < n_frames; ++k) {
    phantom = deform(phantom, motion_script[static_cast<std::size_t>(k)], derive_seed(seed, static_cast<std::uint64_t>(k) + 1));
    seq.frames.push_back(render_rf(phantom, setup.psf, setup.m, setup.l));
  }
  return seq;
}

// ---------------------------------------------------------------------------

MotionProfile MotionProfile::training() {
  MotionProfile p;
  p.step_strain_min = 0.001;
  p.step_strain_max = 0.015;
  p.strain_jitter = 0.5;
  p.decorrelation_event_probability = 0.10;
  p.lateral_event_probability = 0.06;
  p.rotation_event_probability = 0.06;
  return p;
}

MotionProfile MotionProfile::evaluation() {
  MotionProfile p;
  p.step_strain_min = 0.002;
  p.step_strain_max = 0.012;
  p.strain_jitter = 0.5;
  p.decorrelation_event_probability = 0.08;
  p.lateral_event_probability = 0.05;
  p.rotation_event_probability = 0.05;
  return p;
}

std::vector<DeformationParams> random_motion_script(std::uint64_t seed, int steps, const MotionProfile& profile) {
  require(steps >= 0, "step count must be non-negative");
  require(profile.step_strain_min > 0.0 && profile.step_strain_min <= profile.step_strain_max,
          "step strain range must be positive and ordered");
  require(profile.decorrelation_per_strain >= 0.0, "strain-coupled decorrelation must be non-negative");
  Rng rng(seed);
  const double rate = std::exp(rng.uniform(std::log(profile.step_strain_min), std::log(profile.step_strain_max)));
  auto signed_magnitude = [&rng](double lo, double hi) {
    const double v = rng.uniform(lo, hi);
    return rng.bernoulli(0.5) ? v : -v;
  };

  std::vector<DeformationParams> script(static_cast<std::size_t>(steps));
  double lateral_offset = 0.0;
  for (DeformationParams& d : script) {
    d.axial_strain = rng.bernoulli(profile.pause_probability)
                         ? 0.0
                         : rate * (1.0 + profile.strain_jitter * rng.uniform(-1.0, 1.0));
    d.axial_shift_mm = profile.axial_shift_jitter_mm * rng.normal();
    d.lateral_shift_mm = profile.lateral_jitter_mm * rng.normal();
    d.rotation_deg = profile.rotation_jitter_deg * rng.normal();
    d.decorrelation = std::min(
        1.0, profile.decorrelation_per_strain * std::abs(d.axial_strain) + std::abs(profile.decorrelation_jitter * rng.normal()));
    if (rng.bernoulli(profile.decorrelation_event_probability)) {
      d.decorrelation = rng.uniform(profile.decorrelation_event_min, profile.decorrelation_event_max);
    }
    if (rng.bernoulli(profile.lateral_event_probability)) {
      // Slips are corrected: each one heads back toward the starting position.
      const double slip = signed_magnitude(profile.lateral_event_min_mm, profile.lateral_event_max_mm);
      d.lateral_shift_mm += lateral_offset == 0.0 ? slip : std::copysign(slip, -lateral_offset);
    }
    lateral_offset += d.lateral_shift_mm;
    if (rng.bernoulli(profile.rotation_event_probability)) {
      d.rotation_deg += signed_magnitude(profile.rotation_event_min_deg, profile.rotation_event_max_deg);
    }
  }
  return script;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd deformation_family_field(const std::array<double, kDeformationFamilySize>& coefficients,
                                         Eigen::Index m, Eigen::Index l) {
  require(m >= 2 && l >= 2, "field must be at least 2x2");
  Eigen::MatrixXd field(m, l);
  const double aspect = static_cast<double>(l) / static_cast<double>(m);
  for (Eigen::Index k = 0; k < l; ++k) {
    const double xi = 2.0 * static_cast<double>(k) / static_cast<double>(l - 1) - 1.0;
    for (Eigen::Index r = 0; r < m; ++r) {
      const double z = static_cast<double>(r) / static_cast<double>(m - 1);
      const double dz = z - 0.5;
      const double dx = 0.5 * xi * aspect;
      const double bump = std::exp(-(dz * dz + dx * dx) / (2.0 * 0.12 * 0.12));
      const std::array<double, kDeformationFamilySize> modes{
          1.0, z, xi, z * z, z * xi, xi * xi, z * z * z, z * z * xi, z * xi * xi, xi * xi * xi, bump, z * bump};
      double v = 0.0;
      for (int q = 0; q < kDeformationFamilySize; ++q) v += coefficients[static_cast<std::size_t>(q)] * modes[static_cast<std::size_t>(q)];
      field(r, k) = v;
    }
  }
  return field;
}

Eigen::MatrixXd random_family_field(std::uint64_t seed, Eigen::Index m, Eigen::Index l, double noise_fraction) {
  Rng rng(seed);
  std::array<double, kDeformationFamilySize> c{};
  // Scale in samples: a 1% strain over the full depth moves the bottom by 0.01 m.
  const double scale = 0.01 * static_cast<double>(m);
  for (int q = 0; q < kDeformationFamilySize; ++q) c[static_cast<std::size_t>(q)] = scale * std::pow(0.75, q) * rng.normal();
  Eigen::MatrixXd field = deformation_family_field(c, m, l);
  const double rms = std::sqrt(field.squaredNorm() / static_cast<double>(field.size()));
  for (Eigen::Index k = 0; k < field.size(); ++k) field.data()[k] += noise_fraction * rms * rng.normal();
  return field;
}

// ---------------------------------------------------------------------------

void write_truth_csv(const std::filesystem::path& path, const SequenceGroundTruth& truth) {
  auto out = csv::open_out(path);
  out << "frame_i,frame_j,label,axial_strain,rho,lateral_shift_mm\n";
  for (const PairTruth& p : truth.pairs()) {
    out << p.i << ',' << p.j << ',' << p.label << ',' << csv::format(p.axial_strain) << ','
        << csv::format(p.decorrelation) << ',' << csv::format(p.lateral_shift_mm) << '\n';
  }
  require(static_cast<bool>(out), "write failed for '" + path.string() + "'");
}

std::vector<PairTruth> read_truth_csv(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  require(!lines.empty(), path.string() + ": empty ground-truth file");
  require(csv::trim(lines.front()) == "frame_i,frame_j,label,axial_strain,rho,lateral_shift_mm",
          path.string() + ": unexpected ground-truth header");
  std::vector<PairTruth> pairs;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto cols = csv::split(lines[n]);
    const std::string where = path.string() + " line " + std::to_string(n + 1);
    require(cols.size() == 6, where + ": expected 6 columns");
    PairTruth p;
    p.i = static_cast<int>(csv::parse_int(cols[0], where));
    p.j = static_cast<int>(csv::parse_int(cols[1], where));
    p.label = static_cast<int>(csv::parse_int(cols[2], where));
    require(p.label == 0 || p.label == 1, where + ": label must be 0 or 1");
    p.axial_strain = csv::parse_double(cols[3], where);
    p.decorrelation = csv::parse_double(cols[4], where);
    p.lateral_shift_mm = csv::parse_double(cols[5], where);
    pairs.push_back(p);
  }
  return pairs;
}

}  // namespace framesel
