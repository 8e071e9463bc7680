#include "framesel/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "csv.hpp"
#include "framesel/random.hpp"

namespace framesel {

std::string SelectionResult::to_record() const {
  std::ostringstream out;
  out << "ref=" << ref_frame << " chosen=" << chosen_partner << " prob_good=" << csv::format(prob_good)
      << " none_found=" << (none_found ? 1 : 0) << " candidates=";
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (k) out << ';';
    out << candidates[k].partner << ':' << csv::format(candidates[k].prob_good);
  }
  return out.str();
}

std::vector<int> candidate_partners(int ref, int n_frames, int window) {
  require(n_frames >= 2, "selection needs a sequence of at least two frames");
  require(window >= 2 && window % 2 == 0, "search window must be a positive even number");
  if (ref < 0 || ref >= n_frames) {
    throw Error("reference frame " + std::to_string(ref) + " outside a sequence of " + std::to_string(n_frames) +
                " frames");
  }
  std::vector<int> partners;
  for (int d = 1; d <= window / 2; ++d) {
    if (ref - d >= 0) partners.push_back(ref - d);
    if (ref + d < n_frames) partners.push_back(ref + d);
  }
  return partners;
}

SelectionResult choose_partner(int ref, std::vector<Candidate> candidates) {
  require(!candidates.empty(), "no candidate partners to choose from");
  auto key = [ref](const Candidate& c) {
    const int offset = c.partner - ref;
    return std::make_tuple(-c.prob_good, std::abs(offset), offset < 0 ? 0 : 1);
  };
  const auto best = std::min_element(candidates.begin(), candidates.end(),
                                     [&](const Candidate& a, const Candidate& b) { return key(a) < key(b); });
  SelectionResult r;
  r.ref_frame = ref;
  r.chosen_partner = best->partner;
  r.prob_good = best->prob_good;
  r.none_found = best->prob_good < 0.5;
  r.candidates = std::move(candidates);
  return r;
}

SelectionResult select_from_features(int ref, std::span<const FeatureVector> candidates, const MlpModel& model,
                                     bool append_residual) {
  std::vector<Candidate> scored;
  scored.reserve(candidates.size());
  for (const FeatureVector& f : candidates) {
    scored.push_back({f.j, predict(model, f.classifier_input(append_residual)).prob_good});
  }
  return choose_partner(ref, std::move(scored));
}

SelectionResult select_pair(std::span<const RfFrame> sequence, int ref, int window, const PcaBasis& basis,
                            const MlpModel& model, const FeatureOptions& options) {
  const std::vector<int> partners = candidate_partners(ref, static_cast<int>(sequence.size()), window);
  std::vector<FramePair> pairs;
  for (int j : partners) pairs.emplace_back(ref, j);
  const auto features = extract_features_batch(sequence, pairs, basis, options.lines, options.dp);
  return select_from_features(ref, features, model, options.append_residual);
}

// ---------------------------------------------------------------------------

std::string to_string(PairingMethod method) {
  switch (method) {
    case PairingMethod::kSkip1:
      return "skip1";
    case PairingMethod::kSkip2:
      return "skip2";
    case PairingMethod::kSkip3:
      return "skip3";
    case PairingMethod::kSelected:
      return "selected";
  }
  return "unknown";
}

QualityReport pair_quality(const RfFrame& first, const RfFrame& second, const WindowPair& windows,
                           const QualityConfig& config) {
  const Eigen::MatrixXi displacement = dense_displacement(first, second, config.dp, config.median_filter);
  StrainImage image = lsq_strain(displacement, config.strain_window);

  QualityReport q;
  q.target = windows.target;
  q.background = windows.background;
  require(!q.target.overlaps(q.background), "target and background windows overlap");
  if (window_stats(image.strain, q.background).mean < 0.0) image.strain = -image.strain;
  q.target_stats = window_stats(image.strain, q.target);
  q.background_stats = window_stats(image.strain, q.background);
  q.snr = q.background_stats.stddev > 0.0 ? snr(q.background_stats) : 0.0;
  const bool has_noise = q.background_stats.stddev > 0.0 || q.target_stats.stddev > 0.0;
  q.cnr = has_noise ? cnr(q.target_stats, q.background_stats) : 0.0;
  return q;
}

EvalTable summarize(std::vector<PairQuality> rows, std::vector<SelectionResult> selections) {
  EvalTable table;
  for (PairingMethod method : kPairingMethods) {
    MethodSummary& s = table.methods[static_cast<std::size_t>(method)];
    s.method = method;
    std::vector<double> snrs;
    std::vector<double> cnrs;
    for (const PairQuality& r : rows) {
      if (r.method != method) continue;
      snrs.push_back(r.snr);
      cnrs.push_back(r.cnr);
    }
    s.count = static_cast<Eigen::Index>(snrs.size());
    if (snrs.empty()) continue;
    auto mean_std = [](const std::vector<double>& v) {
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      return std::make_pair(mean, sd);
    };
    std::tie(s.snr_mean, s.snr_std) = mean_std(snrs);
    std::tie(s.cnr_mean, s.cnr_std) = mean_std(cnrs);
  }
  table.none_found = static_cast<int>(
      std::count_if(selections.begin(), selections.end(), [](const SelectionResult& s) { return s.none_found; }));
  table.rows = std::move(rows);
  table.selections = std::move(selections);
  return table;
}

EvalTable evaluate_sequence(std::span<const RfFrame> sequence, const SequenceGroundTruth& truth,
                            const PcaBasis& basis, const MlpModel& model, const FeatureOptions& options,
                            const QualityConfig& quality, int window) {
  const auto n = static_cast<int>(sequence.size());
  require(n >= 10, "evaluation needs a sequence of at least 10 frames");
  require(quality.windows.has_value() || truth.frame_count() == n,
          "ground truth does not describe this sequence and no fixed windows were given");
  const FrameGeometry geometry(sequence.front().m(), sequence.front().l(), truth.setup().psf, truth.setup().extent);

  std::vector<PairQuality> rows;
  std::vector<SelectionResult> selections;
  for (int i = 0; i < n; ++i) {
    const WindowPair windows = quality.windows ? *quality.windows
                                               : default_windows(truth.inclusions()[static_cast<std::size_t>(i)],
                                                                 geometry, quality.strain_window);
    auto score = [&](int j, PairingMethod method) {
      const QualityReport q = pair_quality(sequence[static_cast<std::size_t>(i)], sequence[static_cast<std::size_t>(j)],
                                           windows, quality);
      rows.push_back({i, j, method, q.snr, q.cnr});
    };
    for (int k = 1; k <= 3; ++k) {
      if (i + k < n) score(i + k, static_cast<PairingMethod>(k - 1));
    }
    SelectionResult sel = select_pair(sequence, i, window, basis, model, options);
    score(sel.chosen_partner, PairingMethod::kSelected);
    selections.push_back(std::move(sel));
  }
  return summarize(std::move(rows), std::move(selections));
}

EvalTable merge(std::span<const EvalTable> tables) {
  std::vector<PairQuality> rows;
  std::vector<SelectionResult> selections;
  for (const EvalTable& t : tables) {
    rows.insert(rows.end(), t.rows.begin(), t.rows.end());
    selections.insert(selections.end(), t.selections.begin(), t.selections.end());
  }
  return summarize(std::move(rows), std::move(selections));
}

void write_eval_csv(const std::filesystem::path& path, const EvalTable& table) {
  auto out = csv::open_out(path);
  out << "method,count,snr_mean,snr_std,cnr_mean,cnr_std\n";
  for (const MethodSummary& s : table.methods) {
    out << to_string(s.method) << ',' << s.count << ',' << csv::format(s.snr_mean) << ',' << csv::format(s.snr_std)
        << ',' << csv::format(s.cnr_mean) << ',' << csv::format(s.cnr_std) << '\n';
  }
  require(static_cast<bool>(out), "write failed for '" + path.string() + "'");
}

void write_pair_quality_csv(const std::filesystem::path& path, std::span<const PairQuality> rows) {
  auto out = csv::open_out(path);
  out << "pair_i,pair_j,method,snr,cnr\n";
  for (const PairQuality& r : rows) {
    out << r.i << ',' << r.j << ',' << to_string(r.method) << ',' << csv::format(r.snr) << ',' << csv::format(r.cnr)
        << '\n';
  }
  require(static_cast<bool>(out), "write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------

namespace {

std::vector<DeformationParams> corpus_script(const CorpusConfig& config, int sequence) {
  return random_motion_script(derive_seed(config.seed, 2 * static_cast<std::uint64_t>(sequence)), config.frames - 1,
                              config.profile);
}

}  // namespace

Eigen::MatrixXd truth_field_corpus(const CorpusConfig& config, GridShape grid, double noise_fraction) {
  require(config.sequences >= 1 && config.frames >= 2, "corpus needs at least one sequence of two frames");
  std::vector<Eigen::VectorXd> rows;
  for (int s = 0; s < config.sequences; ++s) {
    const auto script = corpus_script(config, s);
    const SequenceGroundTruth truth = simulate_truth(config.setup, script);
    for (const PairTruth& p : truth.pairs()) rows.push_back(downsample_field(truth.displacement_field(p.i, p.j), grid));
  }
  Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()), grid.rows * grid.cols);
  for (std::size_t r = 0; r < rows.size(); ++r) data.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();

  if (noise_fraction > 0.0) {
    const double rms = std::sqrt(data.squaredNorm() / static_cast<double>(data.size()));
    Rng rng(derive_seed(config.seed, 0xC0FFEE));
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      for (Eigen::Index r = 0; r < data.rows(); ++r) data(r, c) += noise_fraction * rms * rng.normal();
    }
  }
  return data;
}

LabeledFeatures feature_corpus(const CorpusConfig& config, const PcaBasis& basis, const FeatureOptions& options) {
  LabeledFeatures out;
  for (int s = 0; s < config.sequences; ++s) {
    const auto script = corpus_script(config, s);
    const Sequence seq =
        simulate_sequence(derive_seed(config.seed, 2 * static_cast<std::uint64_t>(s) + 1), config.frames, script, config.setup);
    std::vector<FramePair> pairs;
    for (const PairTruth& p : seq.truth.pairs()) {
      pairs.emplace_back(p.i, p.j);
      out.labels.push_back(p.label);
    }
    auto features = extract_features_batch(seq.frames, pairs, basis, options.lines, options.dp);
    out.features.insert(out.features.end(), std::make_move_iterator(features.begin()),
                        std::make_move_iterator(features.end()));
  }
  return out;
}

LabeledFeatures balance(const LabeledFeatures& data, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t k = 0; k < data.labels.size(); ++k) by_class[static_cast<std::size_t>(data.labels[k] != 0)].push_back(k);
  const std::size_t keep = std::min(by_class[0].size(), by_class[1].size());
  Rng rng(seed);
  std::vector<std::size_t> kept;
  for (auto& members : by_class) {
    shuffle(members, rng);
    kept.insert(kept.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(kept.begin(), kept.end());
  LabeledFeatures out;
  for (std::size_t k : kept) {
    out.features.push_back(data.features[k]);
    out.labels.push_back(data.labels[k]);
  }
  return out;
}

LabeledFeatures join_labels(std::span<const FeatureVector> features, std::span<const PairTruth> truth) {
  std::map<std::pair<int, int>, int> labels;
  for (const PairTruth& t : truth) labels[{t.i, t.j}] = t.label;
  LabeledFeatures out;
  for (const FeatureVector& f : features) {
    const auto it = labels.find({f.i, f.j});
    if (it == labels.end()) {
      throw Error("no ground-truth label for pair (" + std::to_string(f.i) + ", " + std::to_string(f.j) + ")");
    }
    out.features.push_back(f);
    out.labels.push_back(it->second);
  }
  return out;
}

Dataset to_dataset(const LabeledFeatures& data, bool append_residual) {
  Dataset d;
  d.labels = data.labels;
  if (data.features.empty()) return d;
  const Eigen::Index dim = data.features.front().classifier_input(append_residual).size();
  d.inputs.resize(dim, static_cast<Eigen::Index>(data.features.size()));
  for (std::size_t k = 0; k < data.features.size(); ++k) {
    const Eigen::VectorXd x = data.features[k].classifier_input(append_residual);
    require(x.size() == dim, "feature vectors differ in length");
    d.inputs.col(static_cast<Eigen::Index>(k)) = x;
  }
  return d;
}

// ---------------------------------------------------------------------------

namespace {

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace

BenchReport run_benchmark(const RfFrame& first, const RfFrame& second, const PcaBasis& basis, const MlpModel& model,
                          const FeatureOptions& options, int repetitions, int candidates) {
  require(repetitions >= 1 && candidates >= 1, "benchmark needs at least one repetition and one candidate");
  using clock = std::chrono::steady_clock;
  auto elapsed_ms = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };

  BenchReport report;
  report.repetitions = repetitions;
  report.candidates = candidates;
  report.m = first.m();
  report.l = first.l();
  report.p = options.lines;

  std::vector<double> extract_ms;
  FeatureVector sample;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = clock::now();
    sample = extract_features(first, second, basis, options.lines, options.dp);
    extract_ms.push_back(elapsed_ms(t0, clock::now()));
  }

  // Distinct candidate vectors around the measured one.
  std::vector<FeatureVector> pool;
  for (int k = 0; k < candidates; ++k) {
    FeatureVector f = sample;
    f.i = candidates / 2;
    f.j = k < candidates / 2 ? k : k + 1;
    f.w *= 1.0 + 0.05 * (k - candidates / 2);
    pool.push_back(std::move(f));
  }
  std::vector<double> classify_ms;
  int sink = 0;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = clock::now();
    const SelectionResult s = select_from_features(candidates / 2, pool, model, options.append_residual);
    classify_ms.push_back(elapsed_ms(t0, clock::now()));
    sink += s.chosen_partner;
  }
  require(sink >= 0, "unreachable");

  report.classify_median_ms = median(classify_ms);
  report.classify_mean_ms = mean(classify_ms);
  report.extract_median_ms = median(extract_ms);
  report.extract_mean_ms = mean(extract_ms);
  return report;
}

}  // namespace framesel
