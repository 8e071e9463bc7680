// framesel: simulate RF sequences, train the PCA basis and classifier, pick
// frame pairs and compare them against fixed-skip pairing.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "framesel/error.hpp"
#include "framesel/features.hpp"
#include "framesel/mlp.hpp"
#include "framesel/pcabasis.hpp"
#include "framesel/pipeline.hpp"
#include "framesel/random.hpp"
#include "framesel/rfsim.hpp"

namespace fs = std::filesystem;
using namespace framesel;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  int p = 5;
  int d_max = 40;
  double relative_lambda = DpParams{}.relative_lambda;
  int window = 16;
  bool center = false;
  bool append_residual = false;
  unsigned threads = 1;

  std::string rfb;
  std::string basis;
  std::string model;
  std::string out;
  std::vector<std::string> truth;
  std::vector<std::string> features;

  FeatureOptions feature_options() const {
    FeatureOptions o;
    o.lines = p;
    o.dp.d_max = d_max;
    o.dp.relative_lambda = relative_lambda;
    o.append_residual = append_residual;
    return o;
  }
};

struct SimulateArgs {
  int frames = 17;
  int m = 512;
  int l = 128;
  std::string profile = "evaluation";
};

struct PcaArgs {
  int sequences = 3;
  int frames = 17;
  int m = 512;
  int l = 128;
  int components = 12;
  int grid_rows = 64;
  int grid_cols = 48;
  double noise = 0.01;
};

struct MlpArgs {
  int epochs = 300;
  int batch = 32;
  double learning_rate = 1e-3;
  double val_fraction = 0.2;
  std::vector<int> hidden{64, 32};
  bool balance = true;
};

struct EvalArgs {
  int strain_window = 41;
  bool median = true;
  std::string pairs_out;
};

struct BenchArgs {
  int repetitions = 100;
  int candidates = 16;
  int m = 2304;
  int l = 384;
};

MotionProfile profile_named(const std::string& name) {
  if (name == "training") return MotionProfile::training();
  return MotionProfile::evaluation();
}

const std::string& need(const std::string& value, const char* flag) {
  if (value.empty()) throw CLI::RequiredError(flag);
  return value;
}

fs::path truth_path_for(const Globals& g) {
  if (!g.truth.empty()) return g.truth.front();
  fs::path p = need(g.out, "--out");
  p.replace_extension(".truth.csv");
  return p;
}

std::vector<FramePair> pairs_within(int n_frames, int max_offset) {
  std::vector<FramePair> pairs;
  for (int i = 0; i < n_frames; ++i) {
    for (int j = std::max(0, i - max_offset); j <= std::min(n_frames - 1, i + max_offset); ++j) {
      if (j != i) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

void run_simulate(const Globals& g, const SimulateArgs& a) {
  require(a.frames >= 2, "--frames must be at least 2");
  const SimulationSetup setup = SimulationSetup::for_frame(a.m, a.l);
  const auto script = random_motion_script(derive_seed(g.seed, 1), a.frames - 1, profile_named(a.profile));
  const Sequence seq = simulate_sequence(derive_seed(g.seed, 2), a.frames, script, setup);
  write_rfb(need(g.out, "--out"), seq.frames);
  write_truth_csv(truth_path_for(g), seq.truth);
}

void run_train_pca(const Globals& g, const PcaArgs& a) {
  CorpusConfig corpus;
  corpus.setup = SimulationSetup::for_frame(a.m, a.l);
  corpus.profile = MotionProfile::training();
  corpus.sequences = a.sequences;
  corpus.frames = a.frames;
  corpus.seed = g.seed;
  const GridShape grid{a.grid_rows, a.grid_cols};
  Eigen::MatrixXd data = truth_field_corpus(corpus, grid, a.noise);
  PcaBasis basis = fit_pca_downsampled(std::move(data), a.m, a.l, a.components, grid);
  basis.center = g.center;
  save_basis(basis, need(g.out, "--out"));
}

void run_extract(const Globals& g) {
  const auto frames = read_rfb(need(g.rfb, "--rfb"));
  const PcaBasis basis = load_basis(need(g.basis, "--basis"));
  std::vector<FramePair> pairs;
  if (!g.truth.empty()) {
    for (const PairTruth& t : read_truth_csv(g.truth.front())) pairs.emplace_back(t.i, t.j);
  } else {
    pairs = pairs_within(static_cast<int>(frames.size()), LabelRule{}.max_offset);
  }
  const FeatureOptions o = g.feature_options();
  const auto features = extract_features_batch(frames, pairs, basis, o.lines, o.dp, g.threads);
  write_features_csv(need(g.out, "--out"), features);
}

void run_train_mlp(const Globals& g, const MlpArgs& a) {
  require(!g.features.empty(), "--features is required");
  require(g.features.size() == g.truth.size(), "give one --truth file per --features file");
  LabeledFeatures all;
  for (std::size_t k = 0; k < g.features.size(); ++k) {
    const auto features = read_features_csv(g.features[k]);
    const auto truth = read_truth_csv(g.truth[k]);
    LabeledFeatures part = join_labels(features, truth);
    all.features.insert(all.features.end(), part.features.begin(), part.features.end());
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
  }
  if (a.balance) all = balance(all, derive_seed(g.seed, 1));

  TrainConfig config;
  config.seed = derive_seed(g.seed, 2);
  config.epochs = a.epochs;
  config.batch_size = a.batch;
  config.learning_rate = a.learning_rate;
  config.val_fraction = a.val_fraction;
  config.hidden.assign(a.hidden.begin(), a.hidden.end());
  const TrainResult result = train(to_dataset(all, g.append_residual), config);
  save_model(result.model, need(g.out, "--out"));

  const auto e = static_cast<std::size_t>(result.best_epoch);
  std::cout << "examples=" << all.labels.size() << " best_epoch=" << result.best_epoch
            << " val_accuracy=" << result.history.val_accuracy[e] << " val_loss=" << result.history.val_loss[e] << '\n';
}

void run_select(const Globals& g, int ref) {
  const auto frames = read_rfb(need(g.rfb, "--rfb"));
  const PcaBasis basis = load_basis(need(g.basis, "--basis"));
  const MlpModel model = load_model(need(g.model, "--model"));
  const SelectionResult r = select_pair(frames, ref, g.window, basis, model, g.feature_options());
  const std::string record = r.to_record();
  if (!g.out.empty()) {
    std::ofstream out(g.out, std::ios::binary);
    out << record << '\n';
    require(static_cast<bool>(out), "write failed for '" + g.out + "'");
  }
  std::cout << record << '\n';
}

void run_evaluate(const Globals& g, const EvalArgs& a) {
  const auto frames = read_rfb(need(g.rfb, "--rfb"));
  const PcaBasis basis = load_basis(need(g.basis, "--basis"));
  const MlpModel model = load_model(need(g.model, "--model"));
  require(!g.truth.empty(), "--truth is required");
  const auto pairs = read_truth_csv(g.truth.front());
  int n_truth = 0;
  for (const PairTruth& t : pairs) n_truth = std::max({n_truth, t.i + 1, t.j + 1});
  require(n_truth == static_cast<int>(frames.size()), "ground truth does not describe this sequence");

  const RfFrame& first = frames.front();
  const SimulationSetup setup = SimulationSetup::for_frame(first.m(), first.l(), first.psf);
  QualityConfig quality;
  quality.strain_window = a.strain_window;
  quality.median_filter = a.median;
  quality.dp = g.feature_options().dp;
  quality.windows = default_windows(setup.inclusion, FrameGeometry(first.m(), first.l(), first.psf, setup.extent),
                                    a.strain_window);
  const SequenceGroundTruth geometry_only(setup, {});
  const EvalTable table = evaluate_sequence(frames, geometry_only, basis, model, g.feature_options(), quality, g.window);
  write_eval_csv(need(g.out, "--out"), table);
  if (!a.pairs_out.empty()) write_pair_quality_csv(a.pairs_out, table.rows);
}

void run_bench(const Globals& g, const BenchArgs& a) {
  std::vector<RfFrame> frames;
  if (!g.rfb.empty()) {
    frames = read_rfb(g.rfb);
    require(frames.size() >= 2, "benchmark needs a sequence of at least two frames");
  } else {
    const SimulationSetup setup = SimulationSetup::for_frame(a.m, a.l);
    DeformationParams step;
    step.axial_strain = 0.01;
    const std::vector<DeformationParams> script{step};
    frames = simulate_sequence(g.seed, 2, script, setup).frames;
  }
  const Eigen::Index m = frames[0].m();
  const Eigen::Index l = frames[0].l();

  PcaBasis basis;
  if (!g.basis.empty()) {
    basis = load_basis(g.basis);
  } else {
    const GridShape grid;
    Eigen::MatrixXd data(64, grid.rows * grid.cols);
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      data.row(r) = downsample_field(random_family_field(derive_seed(g.seed, 10 + static_cast<std::uint64_t>(r)), m, l, 0.01), grid)
                        .transpose();
    }
    basis = fit_pca_downsampled(std::move(data), m, l, kDeformationFamilySize, grid);
  }
  const MlpModel model = !g.model.empty() ? load_model(g.model)
                                          : init_model(derive_seed(g.seed, 3), std::vector<Eigen::Index>{
                                                basis.size(), 64, 32, 2});

  const BenchReport r = run_benchmark(frames[0], frames[1], basis, model, g.feature_options(), a.repetitions, a.candidates);
  std::cout << "bench m=" << r.m << " l=" << r.l << " p=" << r.p << " repetitions=" << r.repetitions
            << " candidates=" << r.candidates << '\n'
            << "classify_median_ms=" << r.classify_median_ms << '\n'
            << "classify_mean_ms=" << r.classify_mean_ms << '\n'
            << "extract_median_ms=" << r.extract_median_ms << '\n'
            << "extract_mean_ms=" << r.extract_mean_ms << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ultrasound RF frame-pair selection for strain imaging"};
  app.set_config("--config", "", "key=value file of option defaults (flags take precedence)");
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--p", g.p, "RF lines tracked per pair")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--dmax", g.d_max, "DP search range in samples")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--lambda", g.relative_lambda, "DP smoothness weight relative to mean(line^2)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app.add_option("--window", g.window, "Candidate window (even; offsets +-window/2)")->capture_default_str();
  app.add_flag("--center", g.center, "Subtract the basis mean field before projecting");
  app.add_flag("--append-residual", g.append_residual, "Append the fit residual to the classifier input");
  app.add_option("--threads", g.threads, "Worker threads for feature extraction")->capture_default_str();
  app.add_option("--rfb", g.rfb, "RF sequence file");
  app.add_option("--basis", g.basis, "PCA basis file");
  app.add_option("--model", g.model, "Classifier model file");
  app.add_option("--truth", g.truth, "Ground-truth CSV (repeatable for train-mlp)");
  app.add_option("--features", g.features, "Features CSV (repeatable)");
  app.add_option("--out", g.out, "Output file");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate a sequence; writes --out (.rfb) and the truth CSV");
  simulate->add_option("--frames", sim.frames)->capture_default_str();
  simulate->add_option("--m", sim.m, "Samples per line")->capture_default_str();
  simulate->add_option("--l", sim.l, "Lines per frame")->capture_default_str();
  simulate->add_option("--profile", sim.profile)->capture_default_str()->check(CLI::IsMember({"training", "evaluation"}));

  PcaArgs pca;
  auto* train_pca = app.add_subcommand("train-pca", "Fit the displacement basis on simulated ground truth");
  train_pca->add_option("--sequences", pca.sequences)->capture_default_str()->check(CLI::PositiveNumber);
  train_pca->add_option("--frames", pca.frames)->capture_default_str();
  train_pca->add_option("--m", pca.m)->capture_default_str();
  train_pca->add_option("--l", pca.l)->capture_default_str();
  train_pca->add_option("--components", pca.components)->capture_default_str()->check(CLI::PositiveNumber);
  train_pca->add_option("--grid-rows", pca.grid_rows)->capture_default_str();
  train_pca->add_option("--grid-cols", pca.grid_cols)->capture_default_str();
  train_pca->add_option("--noise", pca.noise, "Noise as a fraction of the corpus RMS")->capture_default_str();

  auto* extract = app.add_subcommand("extract-features", "Feature vectors for the pairs in --truth (or all within +-8)");

  MlpArgs mlp;
  auto* train_mlp = app.add_subcommand("train-mlp", "Train the good/bad pair classifier");
  train_mlp->add_option("--epochs", mlp.epochs)->capture_default_str();
  train_mlp->add_option("--batch", mlp.batch)->capture_default_str();
  train_mlp->add_option("--lr", mlp.learning_rate)->capture_default_str();
  train_mlp->add_option("--val-fraction", mlp.val_fraction)->capture_default_str();
  train_mlp->add_option("--hidden", mlp.hidden)->capture_default_str();
  train_mlp->add_option("--balance", mlp.balance, "Drop majority-class pairs to balance the classes")
      ->capture_default_str();

  int ref = 0;
  auto* select = app.add_subcommand("select", "Choose the partner of --ref; prints a one-line record");
  select->add_option("--ref", ref, "Reference frame index")->required();

  EvalArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Strain SNR/CNR of selected vs skip-1/2/3 pairs");
  evaluate->add_option("--strain-window", ev.strain_window)->capture_default_str();
  evaluate->add_option("--median", ev.median, "3x3 median filter on the displacement")->capture_default_str();
  evaluate->add_option("--pairs-out", ev.pairs_out, "Per-pair CSV");

  BenchArgs bench;
  auto* benchmark = app.add_subcommand("bench", "Latency of candidate scoring and feature extraction");
  benchmark->add_option("--reps", bench.repetitions)->capture_default_str()->check(CLI::PositiveNumber);
  benchmark->add_option("--candidates", bench.candidates)->capture_default_str()->check(CLI::PositiveNumber);
  benchmark->add_option("--m", bench.m)->capture_default_str();
  benchmark->add_option("--l", bench.l)->capture_default_str();

  try {
    app.parse(argc, argv);
    if (g.threads == 0) g.threads = std::max(1u, std::thread::hardware_concurrency());

    if (*simulate) run_simulate(g, sim);
    if (*train_pca) run_train_pca(g, pca);
    if (*extract) run_extract(g);
    if (*train_mlp) run_train_mlp(g, mlp);
    if (*select) run_select(g, ref);
    if (*evaluate) run_evaluate(g, ev);
    if (*benchmark) run_bench(g, bench);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const Error& e) {
    std::cerr << "framesel: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
