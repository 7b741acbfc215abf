#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nli/gram.hpp"

namespace nli {

enum class Method { krr, kda };

std::string_view to_string(Method m) noexcept;

/// One-vs-all ridge weights; column c is alpha_c.
struct KrrWeights {
  Eigen::MatrixXd dual;  // n_train x classes
  double lambda = 1.0;
};

/// Discriminant projections and the class centroids of the projected training set.
struct KdaProjection {
  Eigen::MatrixXd coefficients;  // n_train x d, d <= classes - 1
  Eigen::MatrixXd centroids;     // classes x d
  Eigen::VectorXd eigenvalues;   // d, descending
  double mu = 0.0;
};

struct TrainedModel {
  std::vector<std::string> classes;
  std::vector<std::string> train_ids;
  std::variant<KrrWeights, KdaProjection> payload;

  Method method() const noexcept { return payload.index() == 0 ? Method::krr : Method::kda; }
};

/// Class list used when the caller does not supply one: sorted distinct labels.
std::vector<std::string> distinct_labels(std::span<const std::string> labels);

/// Solves (K + lambda I) alpha_c = y_c for every class with y_c in {+1, -1}^n.
/// `classes` fixes the class order (and tie-breaks); empty means distinct_labels.
TrainedModel krr_train(const GramMatrix& k, std::span<const std::string> labels, double lambda,
                       std::span<const std::string> classes = {});

/// eval x classes matrix of sum_j K_eval[i][j] alpha_c[j].
Eigen::MatrixXd krr_scores(const TrainedModel& model, const GramMatrix& k_eval);
std::vector<std::string> krr_predict(const TrainedModel& model, const GramMatrix& k_eval);

/// Default KDA ridge: 1e-3 * trace(N) / n for the unregularized within-class matrix N.
double default_kda_mu(const GramMatrix& k, std::span<const std::string> labels);

/// Kernel Fisher discriminant. With class-mean columns m_c of K and global
/// mean m, solves M a = l (N + mu I) a for
///   M = sum_c n_c (m_c - m)(m_c - m)^T,
///   N = sum_c sum_{j in c} (k_j - m_c)(k_j - m_c)^T,
/// keeping the top (classes - 1) eigenvectors. `mu` empty means default_kda_mu.
TrainedModel kda_train(const GramMatrix& k, std::span<const std::string> labels,
                       std::optional<double> mu = std::nullopt,
                       std::span<const std::string> classes = {});

/// eval x d projections K_eval A.
Eigen::MatrixXd kda_project(const TrainedModel& model, const GramMatrix& k_eval);
std::vector<std::string> kda_predict(const TrainedModel& model, const GramMatrix& k_eval);

/// Dispatches on model.method().
std::vector<std::string> predict(const TrainedModel& model, const GramMatrix& k_eval);

/// Index of the best score in each row; ties go to the lowest index.
std::vector<std::size_t> argmax_rows(const Eigen::MatrixXd& scores);
/// Index of the nearest centroid (rows of `centroids`) to each row of `points`;
/// ties go to the lowest index.
std::vector<std::size_t> nearest_centroid(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace nli
