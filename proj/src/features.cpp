#include "framesel/features.hpp"

#include <cmath>
#include <string>
#include <thread>

#include "csv.hpp"

namespace framesel {

Eigen::VectorXd FeatureVector::classifier_input(bool append_residual) const {
  if (!append_residual) return w;
  Eigen::VectorXd x(w.size() + 1);
  x << w, residual_rms;
  return x;
}

FeatureVector extract_features(const RfFrame& first, const RfFrame& second, const PcaBasis& basis, Eigen::Index p,
                               const DpParams& params) {
  if (first.m() != basis.frame_rows || first.l() != basis.frame_cols) {
    throw Error("frame is " + std::to_string(first.m()) + "x" + std::to_string(first.l()) + " but the basis maps onto " +
                std::to_string(basis.frame_rows) + "x" + std::to_string(basis.frame_cols));
  }
  const SparseDisplacement sparse = sparse_track(first, second, p, params);
  const DesignMatrix design = sample_basis(basis, sparse.coords);

  Eigen::VectorXd target = sparse.c.cast<double>();
  if (basis.center) target -= design.mean;

  FeatureVector out;
  out.w = solve_lsq(design.A, target);
  out.residual_rms = (design.A * out.w - target).norm() / std::sqrt(static_cast<double>(target.size()));
  return out;
}

std::vector<FeatureVector> extract_features_batch(std::span<const RfFrame> sequence, std::span<const FramePair> pairs,
                                                  const PcaBasis& basis, Eigen::Index p, const DpParams& params,
                                                  unsigned threads) {
  const auto n = static_cast<int>(sequence.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    if (i < 0 || j < 0 || i >= n || j >= n) {
      throw Error("pair " + std::to_string(k) + " (" + std::to_string(i) + ", " + std::to_string(j) +
                  ") indexes outside a sequence of " + std::to_string(n) + " frames");
    }
  }

  std::vector<FeatureVector> out(pairs.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t k = begin; k < pairs.size(); k += stride) {
      const auto [i, j] = pairs[k];
      out[k] = extract_features(sequence[static_cast<std::size_t>(i)], sequence[static_cast<std::size_t>(j)], basis, p,
                                params);
      out[k].i = i;
      out[k].j = j;
    }
  };

  if (threads <= 1 || pairs.size() < 2) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  return out;
}

void write_features_csv(const std::filesystem::path& path, std::span<const FeatureVector> features) {
  auto out = csv::open_out(path);
  const Eigen::Index n = features.empty() ? 0 : features.front().w.size();
  out << "i,j";
  for (Eigen::Index k = 1; k <= n; ++k) out << ",w_" << k;
  out << ",residual_rms\n";
  for (const FeatureVector& f : features) {
    require(f.w.size() == n, "feature vectors differ in length");
    out << f.i << ',' << f.j;
    for (Eigen::Index k = 0; k < n; ++k) out << ',' << csv::format(f.w[k]);
    out << ',' << csv::format(f.residual_rms) << '\n';
  }
  require(static_cast<bool>(out), "write failed for '" + path.string() + "'");
}

std::vector<FeatureVector> read_features_csv(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  require(!lines.empty(), path.string() + ": empty feature file");
  const auto header = csv::split(lines.front());
  require(header.size() >= 4 && csv::trim(header[0]) == "i" && csv::trim(header[1]) == "j" &&
              csv::trim(header.back()) == "residual_rms",
          path.string() + ": unexpected feature header");
  const std::size_t n = header.size() - 3;

  std::vector<FeatureVector> out;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    const auto cols = csv::split(lines[row]);
    const std::string where = path.string() + " line " + std::to_string(row + 1);
    require(cols.size() == header.size(), where + ": column count differs from header");
    FeatureVector f;
    f.i = static_cast<int>(csv::parse_int(cols[0], where));
    f.j = static_cast<int>(csv::parse_int(cols[1], where));
    f.w.resize(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) f.w[static_cast<Eigen::Index>(k)] = csv::parse_double(cols[2 + k], where);
    f.residual_rms = csv::parse_double(cols.back(), where);
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace framesel
