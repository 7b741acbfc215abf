#include "nli/kernelops.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "nli/envelope.hpp"
#include "nli/error.hpp"

namespace nli {

namespace {

constexpr std::uint32_t kGramVersion = 1;

std::vector<KernelSpec> single_component(const GramMatrix& k, const char* op) {
  if (k.components().size() != 1) {
    throw ContractError(std::string(op) + " expects a single kernel, got " +
                        std::to_string(k.components().size()) + " components");
  }
  return k.components();
}

}  // namespace

GramMatrix rbf_transform(const GramMatrix& normalized, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ContractError("rbf_transform: sigma must be positive");
  auto components = single_component(normalized, "rbf_transform");
  if (components.front().sigma) throw ContractError("rbf_transform: kernel already has an RBF transform");
  components.front().sigma = sigma;

  const Eigen::MatrixXd& k = normalized.values();
  const double scale = 1.0 / (2.0 * sigma * sigma);
  Eigen::MatrixXd out(k.rows(), k.cols());
  for (Eigen::Index j = 0; j < k.cols(); ++j) {
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      const double v = k(i, j);
      if (v < -1e-9 || v > 1.0 + 1e-9) {
        throw ContractError("rbf_transform: entry (" + normalized.row_ids()[i] + ", " +
                            normalized.col_ids()[j] + ") = " + std::to_string(v) +
                            " is outside [0, 1]");
      }
      out(i, j) = std::exp(-(1.0 - std::clamp(v, 0.0, 1.0)) * scale);
    }
  }
  return GramMatrix(std::move(out), normalized.row_ids(), normalized.col_ids(), std::move(components),
                    normalized.is_square_symmetric());
}

GramMatrix ivector_gram(std::span<const FeatureVector> rows, std::span<const FeatureVector> cols,
                        double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ContractError("ivector_gram: sigma must be positive");
  const std::size_t dim = !rows.empty() ? rows.front().values.size()
                                        : (!cols.empty() ? cols.front().values.size() : 0);
  auto normalize = [dim](std::span<const FeatureVector> vs) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(vs.size()));
    for (std::size_t i = 0; i < vs.size(); ++i) {
      if (vs[i].values.size() != dim) {
        throw DimensionMismatchError("vector '" + vs[i].id + "' has dimension " +
                                     std::to_string(vs[i].values.size()) + ", expected " +
                                     std::to_string(dim));
      }
      Eigen::Map<const Eigen::VectorXd> v(vs[i].values.data(), static_cast<Eigen::Index>(dim));
      const double norm = v.norm();
      if (!(norm > 0.0)) throw DataError("vector '" + vs[i].id + "' has zero L2 norm");
      m.col(static_cast<Eigen::Index>(i)) = v / norm;
    }
    return m;
  };
  const Eigen::MatrixXd x = normalize(rows);
  const Eigen::MatrixXd y = normalize(cols);

  bool square = rows.size() == cols.size();
  for (std::size_t i = 0; square && i < rows.size(); ++i) {
    square = rows[i].id == cols[i].id && rows[i].values == cols[i].values;
  }

  const double scale = 1.0 / (2.0 * sigma * sigma);
  const auto nr = x.cols();
  const auto nc = y.cols();
  Eigen::MatrixXd out(nr, nc);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < nr; ++i) {
    for (Eigen::Index j = square ? i : 0; j < nc; ++j) {
      const double d = (x.col(i) - y.col(j)).norm();
      out(i, j) = std::exp(-d * scale);
      if (square) out(j, i) = out(i, j);
    }
  }

  std::vector<std::string> row_ids, col_ids;
  for (const auto& v : rows) row_ids.push_back(v.id);
  for (const auto& v : cols) col_ids.push_back(v.id);
  KernelSpec spec;
  spec.kind = KernelKind::ivector_rbf;
  spec.modality = Modality::audio;
  spec.sigma = sigma;
  return GramMatrix(std::move(out), std::move(row_ids), std::move(col_ids), {spec}, square);
}

SquaredKernels squared_kernel(const GramMatrix& train, const GramMatrix* eval) {
  if (!train.is_square_symmetric()) throw ContractError("squared_kernel: training block must be square symmetric");
  auto components = train.components();
  for (auto& c : components) {
    if (c.squared) throw ContractError("squared_kernel: kernel is already squared");
    c.squared = true;
  }

  const Eigen::MatrixXd& k = train.values();
  Eigen::MatrixXd sq = k * k.transpose();
  for (Eigen::Index i = 0; i < sq.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < sq.cols(); ++j) sq(j, i) = sq(i, j);
  }
  SquaredKernels out{GramMatrix(std::move(sq), train.row_ids(), train.col_ids(), components, true),
                     std::nullopt};
  if (eval) {
    if (eval->col_ids() != train.row_ids()) {
      throw AlignmentError("squared_kernel: eval block columns are not the training samples");
    }
    if (eval->components() != train.components()) {
      throw AlignmentError("squared_kernel: eval and train blocks come from different kernels");
    }
    Eigen::MatrixXd e = eval->values() * k.transpose();
    out.eval.emplace(std::move(e), eval->row_ids(), train.row_ids(), components, false);
  }
  return out;
}

GramMatrix sum_kernels(std::span<const GramMatrix> parts) {
  if (parts.empty()) throw ContractError("sum_kernels: nothing to sum");
  const GramMatrix& first = parts.front();
  Eigen::MatrixXd total = first.values();
  std::vector<KernelSpec> components = first.components();
  bool symmetric = first.is_square_symmetric();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const GramMatrix& part = parts[k];
    if (part.rows() != first.rows() || part.cols() != first.cols()) {
      throw AlignmentError("sum_kernels: part 0 is " + std::to_string(first.rows()) + "x" +
                           std::to_string(first.cols()) + " but part " + std::to_string(k) + " is " +
                           std::to_string(part.rows()) + "x" + std::to_string(part.cols()));
    }
    if (part.row_ids() != first.row_ids() || part.col_ids() != first.col_ids()) {
      throw AlignmentError("sum_kernels: ids of part " + std::to_string(k) + " do not match part 0");
    }
    total += part.values();
    components.insert(components.end(), part.components().begin(), part.components().end());
    symmetric = symmetric && part.is_square_symmetric();
  }
  return GramMatrix(std::move(total), first.row_ids(), first.col_ids(), std::move(components), symmetric);
}

PsdReport psd_check(const Eigen::MatrixXd& k, double tol) {
  if (k.rows() != k.cols()) {
    throw ContractError("psd_check: matrix is " + std::to_string(k.rows()) + "x" +
                        std::to_string(k.cols()) + ", not square");
  }
  PsdReport r;
  r.trace = k.trace();
  r.tolerance = tol;
  if (k.size() == 0) {
    r.passed = true;
    return r;
  }
  const Eigen::MatrixXd sym = 0.5 * (k + k.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("psd_check: eigensolver did not converge");
  r.min_eigenvalue = solver.eigenvalues().minCoeff();
  r.passed = r.min_eigenvalue >= -tol * r.trace;
  return r;
}

PsdReport psd_check(const GramMatrix& k, double tol) { return psd_check(k.values(), tol); }

void save_gram(const GramMatrix& k, const std::filesystem::path& path) {
  nlohmann::json header;
  header["components"] = nlohmann::json::parse(specs_to_json(k.components()));
  header["symmetric"] = k.is_square_symmetric();
  header["row_ids"] = k.row_ids();
  header["col_ids"] = k.col_ids();
  PayloadWriter w;
  w.bytes(header.dump());
  w.matrix(k.values());
  write_envelope(path, kGramMagic, kGramVersion, w.str());
}

GramMatrix load_gram(const std::filesystem::path& path) {
  const std::string payload = read_envelope(path, kGramMagic, kGramVersion);
  PayloadReader r(payload);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.bytes());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed header: " + e.what());
  }
  Eigen::MatrixXd values = r.matrix();
  if (!r.done()) throw DataError(path.string() + ": trailing bytes after matrix");
  try {
    return GramMatrix(std::move(values), header.at("row_ids").get<std::vector<std::string>>(),
                      header.at("col_ids").get<std::vector<std::string>>(),
                      specs_from_json(header.at("components").dump()), header.at("symmetric").get<bool>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed header: " + e.what());
  }
}

}  // namespace nli
