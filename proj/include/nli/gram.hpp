#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nli/corpus.hpp"

namespace nli {

enum class KernelKind { presence, intersection, ivector_rbf };

std::string_view to_string(KernelKind k) noexcept;

struct PRange {
  std::size_t min = 1;
  std::size_t max = 1;

  std::size_t count() const noexcept { return max - min + 1; }
  bool operator==(const PRange&) const = default;
};

/// Declarative description of one kernel.
///
/// String kernels carry a p range; `sigma` is set when the normalized kernel
/// is passed through the RBF transform. The i-vector kernel always carries
/// sigma and never a p range. `squared` marks the K * K' construction.
struct KernelSpec {
  KernelKind kind = KernelKind::presence;
  Modality modality = Modality::essay;
  std::optional<PRange> p;
  std::optional<double> sigma;
  bool squared = false;

  bool is_string_kernel() const noexcept { return kind != KernelKind::ivector_rbf; }
  /// The cacheable part: a string kernel without RBF/squaring, or the plain i-vector kernel.
  KernelSpec base() const;
  /// Throws ConfigError when the field combination is inconsistent.
  void validate() const;
  /// Expression-grammar spelling, e.g. `rbf2(presence:essay:5-9,1)`.
  std::string expression() const;

  bool operator==(const KernelSpec&) const = default;
};

std::string specs_to_json(std::span<const KernelSpec> specs);
std::vector<KernelSpec> specs_from_json(std::string_view json);

/// Dense block of pairwise kernel values with the sample ids of its rows and
/// columns. Immutable once built; the constructor checks shape, finiteness and,
/// for square-symmetric blocks, id equality and symmetry.
class GramMatrix {
 public:
  GramMatrix(Eigen::MatrixXd values, std::vector<std::string> row_ids,
             std::vector<std::string> col_ids, std::vector<KernelSpec> components,
             bool square_symmetric);

  const Eigen::MatrixXd& values() const noexcept { return values_; }
  Eigen::Index rows() const noexcept { return values_.rows(); }
  Eigen::Index cols() const noexcept { return values_.cols(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
  const std::vector<std::string>& row_ids() const noexcept { return row_ids_; }
  const std::vector<std::string>& col_ids() const noexcept { return col_ids_; }
  /// One spec for a single kernel; several for a sum.
  const std::vector<KernelSpec>& components() const noexcept { return components_; }
  bool is_square_symmetric() const noexcept { return square_symmetric_; }

  bool has_unit_diagonal(double tol = 1e-12) const;

  friend bool operator==(const GramMatrix& a, const GramMatrix& b);

 private:
  Eigen::MatrixXd values_;
  std::vector<std::string> row_ids_;
  std::vector<std::string> col_ids_;
  std::vector<KernelSpec> components_;
  bool square_symmetric_ = false;
};

}  // namespace nli
