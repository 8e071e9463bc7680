#pragma once

// Frame-pair selection over a +-window/2 neighbourhood, fixed-skip comparison,
// training-corpus generation and the latency benchmark.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "framesel/features.hpp"
#include "framesel/mlp.hpp"
#include "framesel/pcabasis.hpp"
#include "framesel/quality.hpp"
#include "framesel/rfsim.hpp"

namespace framesel {

struct Candidate {
  int partner = 0;
  double prob_good = 0.0;
};

struct SelectionResult {
  int ref_frame = 0;
  int chosen_partner = 0;
  double prob_good = 0.0;
  std::vector<Candidate> candidates;
  bool none_found = true;

  /// ref=<i> chosen=<j> prob_good=<p> none_found=<0|1> candidates=<j:p;...>
  std::string to_record() const;
};

/// Partners at offsets -1, +1, -2, +2, ... up to window / 2, clipped to the sequence.
std::vector<int> candidate_partners(int ref, int n_frames, int window);

/// Argmax of prob_good; ties go to the smaller |offset|, then the negative offset.
/// none_found is set when no candidate reaches 0.5.
SelectionResult choose_partner(int ref, std::vector<Candidate> candidates);

/// Scores precomputed candidate features (feature.j is the partner).
SelectionResult select_from_features(int ref, std::span<const FeatureVector> candidates, const MlpModel& model,
                                     bool append_residual = false);

SelectionResult select_pair(std::span<const RfFrame> sequence, int ref, int window, const PcaBasis& basis,
                            const MlpModel& model, const FeatureOptions& options);

// ---------------------------------------------------------------------------
// Strain-quality comparison against fixed-skip pairing

enum class PairingMethod { kSkip1 = 0, kSkip2 = 1, kSkip3 = 2, kSelected = 3 };
inline constexpr std::array<PairingMethod, 4> kPairingMethods{PairingMethod::kSkip1, PairingMethod::kSkip2,
                                                              PairingMethod::kSkip3, PairingMethod::kSelected};
std::string to_string(PairingMethod method);

struct QualityConfig {
  int strain_window = 41;
  bool median_filter = true;
  DpParams dp;
  /// Fixed windows; when unset they follow the inclusion of each reference frame.
  std::optional<WindowPair> windows;
};

/// Strain image of the pair, oriented so the background mean is non-negative
/// (compression and release score alike), and its SNR / CNR. A strain image
/// with zero variance in a window scores 0.
QualityReport pair_quality(const RfFrame& first, const RfFrame& second, const WindowPair& windows,
                           const QualityConfig& config);

struct PairQuality {
  int i = 0;
  int j = 0;
  PairingMethod method = PairingMethod::kSkip1;
  double snr = 0.0;
  double cnr = 0.0;
};

struct MethodSummary {
  PairingMethod method = PairingMethod::kSkip1;
  Eigen::Index count = 0;
  double snr_mean = 0.0;
  double snr_std = 0.0;
  double cnr_mean = 0.0;
  double cnr_std = 0.0;
};

struct EvalTable {
  std::array<MethodSummary, 4> methods;
  std::vector<PairQuality> rows;
  std::vector<SelectionResult> selections;
  int none_found = 0;

  const MethodSummary& operator[](PairingMethod m) const { return methods[static_cast<std::size_t>(m)]; }
};

/// Mean and (n - 1) standard deviation per method over the given rows.
EvalTable summarize(std::vector<PairQuality> rows, std::vector<SelectionResult> selections = {});

/// For every reference frame i: skip-k pairs (i, i + k) where they exist, and
/// the pair chosen by select_pair.
EvalTable evaluate_sequence(std::span<const RfFrame> sequence, const SequenceGroundTruth& truth,
                            const PcaBasis& basis, const MlpModel& model, const FeatureOptions& options,
                            const QualityConfig& quality, int window = 16);

/// Pools the rows of several evaluations into one table.
EvalTable merge(std::span<const EvalTable> tables);

/// method,count,snr_mean,snr_std,cnr_mean,cnr_std
void write_eval_csv(const std::filesystem::path& path, const EvalTable& table);
/// pair_i,pair_j,method,snr,cnr
void write_pair_quality_csv(const std::filesystem::path& path, std::span<const PairQuality> rows);

// ---------------------------------------------------------------------------
// Training corpora

struct CorpusConfig {
  SimulationSetup setup;
  MotionProfile profile = MotionProfile::training();
  int sequences = 8;
  int frames = 17;
  std::uint64_t seed = 0;
};

/// Ground-truth displacement fields of every labelled pair, downsampled to the
/// grid (one per row) with white noise of noise_fraction times the corpus RMS.
/// Nothing is rendered.
Eigen::MatrixXd truth_field_corpus(const CorpusConfig& config, GridShape grid, double noise_fraction);

struct LabeledFeatures {
  std::vector<FeatureVector> features;
  std::vector<int> labels;
};

/// Simulates and renders the sequences and extracts features for every labelled pair.
LabeledFeatures feature_corpus(const CorpusConfig& config, const PcaBasis& basis, const FeatureOptions& options);

/// Randomly drops majority-class examples until both classes are equally frequent.
LabeledFeatures balance(const LabeledFeatures& data, std::uint64_t seed);

/// Joins features with labels on (i, j); pairs absent from the truth table are rejected.
LabeledFeatures join_labels(std::span<const FeatureVector> features, std::span<const PairTruth> truth);

Dataset to_dataset(const LabeledFeatures& data, bool append_residual);

// ---------------------------------------------------------------------------
// Latency

struct BenchReport {
  int repetitions = 0;
  int candidates = 0;
  Eigen::Index m = 0;
  Eigen::Index l = 0;
  Eigen::Index p = 0;
  double classify_median_ms = 0.0;
  double classify_mean_ms = 0.0;
  double extract_median_ms = 0.0;
  double extract_mean_ms = 0.0;
};

/// Times (a) scoring `candidates` precomputed feature vectors and choosing the
/// best, and (b) one feature extraction on (first, second), each repeated.
BenchReport run_benchmark(const RfFrame& first, const RfFrame& second, const PcaBasis& basis, const MlpModel& model,
                          const FeatureOptions& options, int repetitions, int candidates = 16);

}  // namespace framesel
