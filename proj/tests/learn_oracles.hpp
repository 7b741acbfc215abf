#pragma once

// Explicit-feature oracles for the kernel classifiers. They work on feature
// matrices directly and share no code with the dual implementations.

#include <Eigen/Dense>
#include <random>
#include <vector>

namespace nli::testing {

/// One-vs-all primal ridge regression scores: X_eval (X^T X + lambda I)^-1 X^T Y.
inline Eigen::MatrixXd primal_ridge_scores(const Eigen::MatrixXd& x, const std::vector<int>& labels, int classes,
                                           double lambda, const Eigen::MatrixXd& x_eval) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(x.rows(), classes, -1.0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i, labels[i]) = 1.0;
  Eigen::MatrixXd a = x.transpose() * x;
  a.diagonal().array() += lambda;
  const Eigen::MatrixXd w = a.colPivHouseholderQr().solve(x.transpose() * y);
  return x_eval * w;
}

/// Fisher LDA on explicit features. Returns class means projected onto the
/// top `dims` discriminant directions (classes x dims).
inline Eigen::MatrixXd fisher_lda_means(const Eigen::MatrixXd& x, const std::vector<int>& labels, int classes,
                                        int dims) {
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(classes, d);
  std::vector<double> counts(classes, 0.0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    means.row(labels[i]) += x.row(i);
    counts[labels[i]] += 1.0;
  }
  for (int c = 0; c < classes; ++c) means.row(c) /= counts[c];
  const Eigen::RowVectorXd global = x.colwise().mean();
  Eigen::MatrixXd sb = Eigen::MatrixXd::Zero(d, d), sw = Eigen::MatrixXd::Zero(d, d);
  for (int c = 0; c < classes; ++c) {
    const Eigen::VectorXd diff = (means.row(c) - global).transpose();
    sb += counts[c] * diff * diff.transpose();
  }
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd diff = (x.row(i) - means.row(labels[i])).transpose();
    sw += diff * diff.transpose();
  }
  // Non-symmetric route: eigenvectors of Sw^-1 Sb.
  Eigen::EigenSolver<Eigen::MatrixXd> es(sw.inverse() * sb);
  std::vector<std::pair<double, Eigen::VectorXd>> pairs;
  for (Eigen::Index k = 0; k < d; ++k) pairs.emplace_back(es.eigenvalues()(k).real(), es.eigenvectors().col(k).real());
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  Eigen::MatrixXd w(d, dims);
  for (int k = 0; k < dims; ++k) w.col(k) = pairs[k].second;
  return means * w;
}

/// Scales each column to unit norm with its largest-magnitude entry positive,
/// so projections that agree up to per-axis sign and scale compare equal.
inline Eigen::MatrixXd align_columns(Eigen::MatrixXd m) {
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    Eigen::Index at = 0;
    m.col(k).cwiseAbs().maxCoeff(&at);
    m.col(k) /= (m(at, k) < 0 ? -1.0 : 1.0) * m.col(k).norm();
  }
  return m;
}

/// Three Gaussian classes in 2-D with collinear means 4 sigma apart.
inline void gaussian_toy(std::mt19937_64& rng, int n, Eigen::MatrixXd& x, std::vector<int>& labels) {
  std::normal_distribution<double> noise(0.0, 1.0);
  x.resize(n, 2);
  labels.resize(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = i % 3;
    x(i, 0) = 4.0 * labels[i] + noise(rng);
    x(i, 1) = noise(rng);
  }
}

}  // namespace nli::testing
