#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <utility>

#include "nli/corpus.hpp"
#include "nli/gram.hpp"

namespace nli {

inline constexpr double kDefaultStringSigma = 1.0;
inline constexpr double kDefaultIvectorSigma = 0.5;

/// Entrywise exp(-(1 - k) / (2 sigma^2)) over a normalized kernel. Entries must
/// lie in [0, 1] up to 1e-9; out-of-range entries raise a ContractError.
GramMatrix rbf_transform(const GramMatrix& normalized, double sigma);

/// exp(-||x/|x| - y/|y|||_2 / (2 sigma^2)). Zero vectors and mismatched
/// dimensions are rejected. Rows and cols with equal ids give a symmetric block.
GramMatrix ivector_gram(std::span<const FeatureVector> rows, std::span<const FeatureVector> cols,
                        double sigma);

struct SquaredKernels {
  GramMatrix train;
  std::optional<GramMatrix> eval;
};

/// Treats each sample's similarity row against the training set as its
/// feature vector: train' = K_train K_train^T, eval' = K_eval K_train^T.
SquaredKernels squared_kernel(const GramMatrix& train, const GramMatrix* eval = nullptr);

/// Entrywise sum of aligned blocks; components are concatenated.
GramMatrix sum_kernels(std::span<const GramMatrix> parts);

struct PsdReport {
  double min_eigenvalue = 0.0;
  double trace = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Smallest eigenvalue of (K + K^T)/2; passes when it is >= -tol * trace(K).
PsdReport psd_check(const GramMatrix& k, double tol = 1e-9);
PsdReport psd_check(const Eigen::MatrixXd& k, double tol = 1e-9);

/// Gram cache file. See docs/formats.md for the byte layout.
void save_gram(const GramMatrix& k, const std::filesystem::path& path);
GramMatrix load_gram(const std::filesystem::path& path);

}  // namespace nli
