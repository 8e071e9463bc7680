#pragma once

// Test-side reference implementations, written independently of the library.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

inline double path_cost(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const std::vector<int>& path,
                        double lambda) {
  const auto m = static_cast<int>(a.size());
  double cost = 0.0;
  for (int i = 0; i < m; ++i) {
    const int j = std::min(std::max(i + path[static_cast<std::size_t>(i)], 0), m - 1);
    cost += (a[i] - b[j]) * (a[i] - b[j]);
    if (i > 0) cost += lambda * std::abs(path[static_cast<std::size_t>(i)] - path[static_cast<std::size_t>(i) - 1]);
  }
  return cost;
}

struct BruteForce {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<int> path;
};

/// Depth-first enumeration of all (2 d_max + 1)^m paths. Every term is
/// non-negative, so prefixes already costing at least the best total are cut.
inline BruteForce exhaustive_dp(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int d_max, double lambda) {
  const auto m = static_cast<int>(a.size());
  BruteForce best;
  std::vector<int> path(static_cast<std::size_t>(m));
  std::function<void(int, double)> visit = [&](int i, double partial) {
    if (partial >= best.cost) return;
    if (i == m) {
      if (partial < best.cost) {
        best.cost = partial;
        best.path = path;
      }
      return;
    }
    for (int d = -d_max; d <= d_max; ++d) {
      const int j = std::min(std::max(i + d, 0), m - 1);
      double c = partial + (a[i] - b[j]) * (a[i] - b[j]);
      if (i > 0) c += lambda * std::abs(d - path[static_cast<std::size_t>(i) - 1]);
      path[static_cast<std::size_t>(i)] = d;
      visit(i + 1, c);
    }
  };
  visit(0, 0.0);
  return best;
}

/// Central difference of f at x along coordinate k.
inline double central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                 Eigen::Index k, double h) {
  const double x0 = x[k];
  x[k] = x0 + h;
  const double up = f(x);
  x[k] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

struct Pca {
  Eigen::VectorXd mean;
  /// Eigenvectors of the sample covariance, by descending eigenvalue.
  Eigen::MatrixXd components;
  Eigen::VectorXd eigenvalues;
};

/// Eigendecomposition of the covariance of the rows of data.
inline Pca covariance_pca(const Eigen::MatrixXd& data) {
  Pca out;
  out.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centred = data.rowwise() - out.mean.transpose();
  const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(data.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  out.components = eig.eigenvectors().rowwise().reverse();
  out.eigenvalues = eig.eigenvalues().reverse();
  return out;
}

/// Least squares through the normal equations.
inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& A, const Eigen::VectorXd& c) {
  return (A.transpose() * A).ldlt().solve(A.transpose() * c);
}

/// Mean cross-entropy of a ReLU network with a softmax output, evaluated
/// with explicit loops. weights[k] is fan_out x fan_in.
inline double mlp_loss(const std::vector<Eigen::MatrixXd>& weights, const std::vector<Eigen::VectorXd>& biases,
                       const Eigen::MatrixXd& inputs, const std::vector<int>& labels) {
  double total = 0.0;
  for (Eigen::Index n = 0; n < inputs.cols(); ++n) {
    std::vector<double> x(inputs.col(n).data(), inputs.col(n).data() + inputs.rows());
    for (std::size_t k = 0; k < weights.size(); ++k) {
      std::vector<double> z(static_cast<std::size_t>(weights[k].rows()));
      for (Eigen::Index r = 0; r < weights[k].rows(); ++r) {
        double acc = biases[k][r];
        for (Eigen::Index c = 0; c < weights[k].cols(); ++c) acc += weights[k](r, c) * x[static_cast<std::size_t>(c)];
        const bool hidden = k + 1 < weights.size();
        z[static_cast<std::size_t>(r)] = hidden ? std::max(acc, 0.0) : acc;
      }
      x = std::move(z);
    }
    const double top = *std::max_element(x.begin(), x.end());
    double sum = 0.0;
    for (double v : x) sum += std::exp(v - top);
    total += top + std::log(sum) - x[static_cast<std::size_t>(labels[static_cast<std::size_t>(n)])];
  }
  return total / static_cast<double>(inputs.cols());
}

}  // namespace oracle
