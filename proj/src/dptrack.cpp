#include "framesel/dptrack.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstdlib>
#include <limits>
#include <tuple>

#include "framesel/error.hpp"

namespace framesel {

void DpParams::validate() const {
  require(d_max >= 1, "d_max must be at least 1");
  require(!lambda_smooth || (*lambda_smooth >= 0.0 && std::isfinite(*lambda_smooth)),
          "smoothness weight must be finite and non-negative");
  require(relative_lambda >= 0.0 && std::isfinite(relative_lambda), "relative smoothness weight must be finite and non-negative");
}

double DpParams::resolve_lambda(const Eigen::Ref<const Eigen::VectorXd>& line1) const {
  if (lambda_smooth) return *lambda_smooth;
  return line1.size() == 0 ? 0.0 : relative_lambda * line1.squaredNorm() / static_cast<double>(line1.size());
}

Eigen::VectorXi dp_displacement(const Eigen::Ref<const Eigen::VectorXd>& line1,
                                const Eigen::Ref<const Eigen::VectorXd>& line2, const DpParams& params) {
  params.validate();
  const Eigen::Index m = line1.size();
  require(line2.size() == m, "RF lines must have equal length");
  require(m >= 2, "RF lines need at least two samples");
  if (m <= 2 * static_cast<Eigen::Index>(params.d_max)) {
    throw Error("line length " + std::to_string(m) + " must exceed 2 * d_max = " + std::to_string(2 * params.d_max));
  }
  require(line1.allFinite() && line2.allFinite(), "RF lines contain non-finite samples");

  const double lambda = params.resolve_lambda(line1);
  const int d_max = params.d_max;
  const Eigen::Index span = 2 * d_max + 1;

  auto data_cost = [&](Eigen::Index i, int d) {
    const Eigen::Index j = std::clamp<Eigen::Index>(i + d, 0, m - 1);
    const double diff = line1[i] - line2[j];
    return diff * diff;
  };

  // acc(o, i): best cost of a path over samples 0..i ending at d = o - d_max.
  Eigen::MatrixXd acc(span, m);
  for (Eigen::Index o = 0; o < span; ++o) acc(o, 0) = data_cost(0, static_cast<int>(o) - d_max);

  Eigen::VectorXd reach(span);
  for (Eigen::Index i = 1; i < m; ++i) {
    // L1 distance transform: reach[o] = min_o' acc(o', i-1) + lambda * |o - o'|.
    reach[0] = acc(0, i - 1);
    for (Eigen::Index o = 1; o < span; ++o) reach[o] = std::min(acc(o, i - 1), reach[o - 1] + lambda);
    for (Eigen::Index o = span - 2; o >= 0; --o) reach[o] = std::min(reach[o], reach[o + 1] + lambda);
    for (Eigen::Index o = 0; o < span; ++o) acc(o, i) = data_cost(i, static_cast<int>(o) - d_max) + reach[o];
  }

  Eigen::VectorXi path(m);
  int best = 0;
  auto best_key = std::make_tuple(std::numeric_limits<double>::infinity(), 0, 0);
  for (int o = 0; o < span; ++o) {
    const int d = o - d_max;
    const auto key = std::make_tuple(acc(o, m - 1), std::abs(d), d);
    if (key < best_key) {
      best_key = key;
      best = d;
    }
  }
  path[m - 1] = best;

  for (Eigen::Index i = m - 1; i >= 1; --i) {
    const int next = path[i];
    auto key_best = std::make_tuple(std::numeric_limits<double>::infinity(), 0, 0, 0);
    int chosen = 0;
    for (int o = 0; o < span; ++o) {
      const int d = o - d_max;
      const auto key = std::make_tuple(acc(o, i - 1) + lambda * std::abs(d - next), std::abs(d), std::abs(d - next), d);
      if (key < key_best) {
        key_best = key;
        chosen = d;
      }
    }
    path[i - 1] = chosen;
  }
  return path;
}

double dp_path_cost(const Eigen::Ref<const Eigen::VectorXd>& line1, const Eigen::Ref<const Eigen::VectorXd>& line2,
                    const Eigen::Ref<const Eigen::VectorXi>& path, double lambda) {
  const Eigen::Index m = line1.size();
  require(line2.size() == m && path.size() == m, "line and path lengths must agree");
  double cost = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index j = std::clamp<Eigen::Index>(i + path[i], 0, m - 1);
    const double diff = line1[i] - line2[j];
    cost += diff * diff;
    if (i > 0) cost += lambda * std::abs(path[i] - path[i - 1]);
  }
  return cost;
}

std::vector<Eigen::Index> select_lines(Eigen::Index l, Eigen::Index p) {
  if (p < 1 || p > l) {
    throw Error("cannot choose " + std::to_string(p) + " lines out of " + std::to_string(l));
  }
  std::vector<Eigen::Index> lines(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) lines[static_cast<std::size_t>(j)] = l * (j + 1) / (p + 1);
  require(std::adjacent_find(lines.begin(), lines.end(), std::greater_equal<>()) == lines.end(),
          "selected line indices are not strictly increasing");
  return lines;
}

SparseDisplacement sparse_track(const RfFrame& first, const RfFrame& second, Eigen::Index p, const DpParams& params) {
  if (first.m() != second.m() || first.l() != second.l()) {
    throw Error("frame dimensions differ: " + std::to_string(first.m()) + "x" + std::to_string(first.l()) + " vs " +
                std::to_string(second.m()) + "x" + std::to_string(second.l()));
  }
  SparseDisplacement out;
  out.line_indices = select_lines(first.l(), p);
  const Eigen::Index m = first.m();
  out.samples_per_line = m;
  out.c.resize(m * p);
  out.coords.reserve(static_cast<std::size_t>(m * p));

  Eigen::Index offset = 0;
  for (Eigen::Index line : out.line_indices) {
    const Eigen::VectorXd a = first.samples.col(line).cast<double>();
    const Eigen::VectorXd b = second.samples.col(line).cast<double>();
    out.c.segment(offset, m) = dp_displacement(a, b, params);
    for (Eigen::Index i = 0; i < m; ++i) out.coords.push_back({static_cast<double>(i), static_cast<double>(line)});
    offset += m;
  }
  return out;
}

}  // namespace framesel
