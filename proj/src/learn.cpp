#include "nli/learn.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <set>

#include "nli/envelope.hpp"
#include "nli/error.hpp"

namespace nli {

std::string_view to_string(Method m) noexcept { return m == Method::krr ? "krr" : "kda"; }

std::vector<std::string> distinct_labels(std::span<const std::string> labels) {
  std::set<std::string> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

namespace {

constexpr std::uint32_t kModelVersion = 1;

struct LabelIndex {
  std::vector<std::string> classes;
  std::vector<std::size_t> of_sample;
  std::vector<std::size_t> counts;
};

LabelIndex index_labels(const GramMatrix& k, std::span<const std::string> labels,
                        std::span<const std::string> classes, const char* op) {
  if (!k.is_square_symmetric()) throw ContractError(std::string(op) + ": training kernel must be square symmetric");
  const auto n = static_cast<std::size_t>(k.rows());
  if (labels.size() != n) {
    throw ContractError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(n) + " training samples");
  }
  if (n < 2) throw ContractError(std::string(op) + ": need at least 2 training samples");
  LabelIndex idx;
  idx.classes = classes.empty() ? distinct_labels(labels) : std::vector<std::string>(classes.begin(), classes.end());
  idx.counts.assign(idx.classes.size(), 0);
  for (const auto& l : labels) {
    auto it = std::find(idx.classes.begin(), idx.classes.end(), l);
    if (it == idx.classes.end()) throw LabelError(std::string(op) + ": label '" + l + "' not in class list");
    const auto c = static_cast<std::size_t>(it - idx.classes.begin());
    idx.of_sample.push_back(c);
    ++idx.counts[c];
  }
  std::size_t present = 0;
  for (std::size_t c = 0; c < idx.classes.size(); ++c) {
    if (idx.counts[c] > 0) ++present;
  }
  if (present < 2) throw ContractError(std::string(op) + ": training labels must contain at least 2 classes");
  for (std::size_t c = 0; c < idx.classes.size(); ++c) {
    if (idx.counts[c] == 0) {
      throw ContractError(std::string(op) + ": class '" + idx.classes[c] + "' has no training samples");
    }
  }
  return idx;
}

void check_eval(const TrainedModel& model, const GramMatrix& k_eval, const char* op) {
  if (k_eval.col_ids() != model.train_ids) {
    throw AlignmentError(std::string(op) + ": kernel columns do not match the model's training samples");
  }
}

std::vector<std::string> to_labels(const std::vector<std::size_t>& idx, const std::vector<std::string>& classes) {
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(classes[i]);
  return out;
}

Eigen::MatrixXd within_class_centered(const Eigen::MatrixXd& k, const LabelIndex& idx,
                                      Eigen::MatrixXd* class_means) {
  const Eigen::Index n = k.rows();
  const auto nc = static_cast<Eigen::Index>(idx.classes.size());
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(n, nc);
  for (Eigen::Index j = 0; j < n; ++j) means.col(static_cast<Eigen::Index>(idx.of_sample[j])) += k.col(j);
  for (Eigen::Index c = 0; c < nc; ++c) means.col(c) /= static_cast<double>(idx.counts[c]);
  Eigen::MatrixXd centered = k;
  for (Eigen::Index j = 0; j < n; ++j) centered.col(j) -= means.col(static_cast<Eigen::Index>(idx.of_sample[j]));
  if (class_means) *class_means = std::move(means);
  return centered;
}

double mu_from(const Eigen::MatrixXd& k, const Eigen::MatrixXd& centered) {
  const double n = static_cast<double>(k.rows());
  const double within = centered.squaredNorm();  // trace(centered * centered^T)
  if (within > 0.0) return 1e-3 * within / n;
  // No within-class spread at all; fall back to the kernel's own scale.
  const double tr = k.trace();
  return tr > 0.0 ? 1e-3 * tr / n : 1e-12;
}

}  // namespace

TrainedModel krr_train(const GramMatrix& k, std::span<const std::string> labels, double lambda,
                       std::span<const std::string> classes) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ContractError("krr_train: lambda must be >= 0");
  const LabelIndex idx = index_labels(k, labels, classes, "krr_train");
  const Eigen::Index n = k.rows();
  const auto nc = static_cast<Eigen::Index>(idx.classes.size());

  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(n, nc, -1.0);
  for (Eigen::Index i = 0; i < n; ++i) y(i, static_cast<Eigen::Index>(idx.of_sample[i])) = 1.0;

  Eigen::MatrixXd a = k.values();
  a.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw NumericError("krr_train: factorization failed");
  Eigen::MatrixXd alpha = ldlt.solve(y);
  for (int step = 0; step < 2 && alpha.allFinite(); ++step) alpha += ldlt.solve(y - a * alpha);

  // Normwise backward error of the computed solution.
  const double backward = (a * alpha - y).lpNorm<Eigen::Infinity>() /
                          (a.lpNorm<Eigen::Infinity>() * alpha.lpNorm<Eigen::Infinity>() + 1.0);
  if (!alpha.allFinite() || !(backward <= 1e-10)) {
    throw NumericError("krr_train: (K + lambda I) is singular or ill-conditioned (lambda = " +
                       std::to_string(lambda) + ")");
  }
  return TrainedModel{idx.classes, k.row_ids(), KrrWeights{std::move(alpha), lambda}};
}

Eigen::MatrixXd krr_scores(const TrainedModel& model, const GramMatrix& k_eval) {
  const auto* w = std::get_if<KrrWeights>(&model.payload);
  if (!w) throw ContractError("krr_predict: model was not trained with KRR");
  check_eval(model, k_eval, "krr_predict");
  return k_eval.values() * w->dual;
}

std::vector<std::string> krr_predict(const TrainedModel& model, const GramMatrix& k_eval) {
  return to_labels(argmax_rows(krr_scores(model, k_eval)), model.classes);
}

double default_kda_mu(const GramMatrix& k, std::span<const std::string> labels) {
  const LabelIndex idx = index_labels(k, labels, {}, "kda_train");
  return mu_from(k.values(), within_class_centered(k.values(), idx, nullptr));
}

TrainedModel kda_train(const GramMatrix& k, std::span<const std::string> labels, std::optional<double> mu,
                       std::span<const std::string> classes) {
  const LabelIndex idx = index_labels(k, labels, classes, "kda_train");
  if (mu && (!(*mu > 0.0) || !std::isfinite(*mu))) throw ContractError("kda_train: mu must be positive");
  const Eigen::MatrixXd& kv = k.values();
  const Eigen::Index n = kv.rows();
  const auto nc = static_cast<Eigen::Index>(idx.classes.size());

  Eigen::MatrixXd means;
  const Eigen::MatrixXd centered = within_class_centered(kv, idx, &means);
  const double ridge = mu ? *mu : mu_from(kv, centered);

  const Eigen::VectorXd global = kv.rowwise().mean();
  Eigen::MatrixXd spread = means.colwise() - global;
  for (Eigen::Index c = 0; c < nc; ++c) spread.col(c) *= std::sqrt(static_cast<double>(idx.counts[c]));
  Eigen::MatrixXd between = spread * spread.transpose();
  Eigen::MatrixXd within = centered * centered.transpose();
  between = 0.5 * (between + between.transpose()).eval();
  within = 0.5 * (within + within.transpose()).eval();
  within.diagonal().array() += ridge;

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(between, within,
                                                                   Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success) throw NumericError("kda_train: generalized eigensolver failed");

  const Eigen::Index d = std::min<Eigen::Index>(nc - 1, n);
  Eigen::MatrixXd coeffs(n, d);
  Eigen::VectorXd values(d);
  for (Eigen::Index t = 0; t < d; ++t) {
    const Eigen::Index src = n - 1 - t;  // eigenvalues come ascending
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index at = 0;
    v.cwiseAbs().maxCoeff(&at);
    if (v(at) < 0) v = -v;
    coeffs.col(t) = v;
    values(t) = solver.eigenvalues()(src);
  }
  if (!coeffs.allFinite()) throw NumericError("kda_train: non-finite discriminant directions");

  const Eigen::MatrixXd projected = kv * coeffs;
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(nc, d);
  for (Eigen::Index i = 0; i < n; ++i) centroids.row(static_cast<Eigen::Index>(idx.of_sample[i])) += projected.row(i);
  for (Eigen::Index c = 0; c < nc; ++c) centroids.row(c) /= static_cast<double>(idx.counts[c]);

  return TrainedModel{idx.classes, k.row_ids(),
                      KdaProjection{std::move(coeffs), std::move(centroids), std::move(values), ridge}};
}

Eigen::MatrixXd kda_project(const TrainedModel& model, const GramMatrix& k_eval) {
  const auto* p = std::get_if<KdaProjection>(&model.payload);
  if (!p) throw ContractError("kda_predict: model was not trained with KDA");
  check_eval(model, k_eval, "kda_predict");
  return k_eval.values() * p->coefficients;
}

std::vector<std::string> kda_predict(const TrainedModel& model, const GramMatrix& k_eval) {
  const Eigen::MatrixXd z = kda_project(model, k_eval);
  return to_labels(nearest_centroid(z, std::get<KdaProjection>(model.payload).centroids), model.classes);
}

std::vector<std::string> predict(const TrainedModel& model, const GramMatrix& k_eval) {
  return model.method() == Method::krr ? krr_predict(model, k_eval) : kda_predict(model, k_eval);
}

std::vector<std::size_t> argmax_rows(const Eigen::MatrixXd& scores) {
  std::vector<std::size_t> out(static_cast<std::size_t>(scores.rows()), 0);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

std::vector<std::size_t> nearest_centroid(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids) {
  std::vector<std::size_t> out(static_cast<std::size_t>(points.rows()), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Eigen::Index best = 0;
    double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
    for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
      const double d = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d < best_d) {
        best = c;
        best_d = d;
      }
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["method"] = std::string(to_string(model.method()));
  meta["classes"] = model.classes;
  meta["train_ids"] = model.train_ids;
  PayloadWriter w;
  if (const auto* krr = std::get_if<KrrWeights>(&model.payload)) {
    meta["lambda"] = krr->lambda;
    w.bytes(meta.dump());
    w.matrix(krr->dual);
  } else {
    const auto& kda = std::get<KdaProjection>(model.payload);
    meta["mu"] = kda.mu;
    w.bytes(meta.dump());
    w.matrix(kda.coefficients);
    w.matrix(kda.centroids);
    w.matrix(kda.eigenvalues);
  }
  write_envelope(path, kModelMagic, kModelVersion, w.str());
}

TrainedModel load_model(const std::filesystem::path& path) {
  const std::string payload = read_envelope(path, kModelMagic, kModelVersion);
  PayloadReader r(payload);
  try {
    const auto meta = nlohmann::json::parse(r.bytes());
    TrainedModel model;
    model.classes = meta.at("classes").get<std::vector<std::string>>();
    model.train_ids = meta.at("train_ids").get<std::vector<std::string>>();
    const auto method = meta.at("method").get<std::string>();
    if (method == "krr") {
      model.payload = KrrWeights{r.matrix(), meta.at("lambda").get<double>()};
    } else if (method == "kda") {
      KdaProjection p;
      p.coefficients = r.matrix();
      p.centroids = r.matrix();
      p.eigenvalues = r.matrix().col(0);
      p.mu = meta.at("mu").get<double>();
      model.payload = std::move(p);
    } else {
      throw DataError(path.string() + ": unknown method '" + method + "'");
    }
    if (!r.done()) throw DataError(path.string() + ": trailing bytes in model");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed model metadata: " + e.what());
  }
}

}  // namespace nli
