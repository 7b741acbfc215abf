#include "nli/gram.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "nli/error.hpp"

namespace nli {

using nlohmann::json;

std::string_view to_string(KernelKind k) noexcept {
  switch (k) {
    case KernelKind::presence: return "presence";
    case KernelKind::intersection: return "intersection";
    case KernelKind::ivector_rbf: return "ivec";
  }
  return "?";
}

namespace {

KernelKind parse_kind(std::string_view s) {
  if (s == "presence") return KernelKind::presence;
  if (s == "intersection") return KernelKind::intersection;
  if (s == "ivec") return KernelKind::ivector_rbf;
  throw ConfigError("unknown kernel kind '" + std::string(s) + "'");
}

std::string format_sigma(double sigma) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", sigma);
  return buf;
}

}  // namespace

KernelSpec KernelSpec::base() const {
  KernelSpec b = *this;
  b.squared = false;
  if (is_string_kernel()) b.sigma.reset();
  return b;
}

void KernelSpec::validate() const {
  if (is_string_kernel()) {
    if (!p) throw ConfigError("string kernel needs a p range");
    if (p->min < 1 || p->min > p->max) throw ConfigError("invalid p range in " + expression());
    if (modality == Modality::audio) throw ConfigError("string kernels read essay or transcript text");
    if (squared && !sigma) throw ConfigError("squared string kernel needs the RBF transform (sigma)");
  } else {
    if (p) throw ConfigError("the i-vector kernel takes no p range");
    if (!sigma) throw ConfigError("the i-vector kernel needs sigma");
    if (modality != Modality::audio) throw ConfigError("the i-vector kernel reads the audio modality");
  }
  if (sigma && !(*sigma > 0.0 && std::isfinite(*sigma))) {
    throw ConfigError("sigma must be positive and finite");
  }
}

std::string KernelSpec::expression() const {
  if (!is_string_kernel()) {
    return std::string(squared ? "ivec2" : "ivec") + (sigma ? ":" + format_sigma(*sigma) : "");
  }
  std::string core = std::string(to_string(kind)) + ":" + std::string(to_string(modality)) + ":";
  if (p) core += std::to_string(p->min) + "-" + std::to_string(p->max);
  if (!sigma) return core;
  return std::string(squared ? "rbf2(" : "rbf(") + core + "," + format_sigma(*sigma) + ")";
}

namespace {

json spec_json(const KernelSpec& s) {
  json j;
  j["kind"] = std::string(to_string(s.kind));
  j["modality"] = std::string(to_string(s.modality));
  j["p_min"] = s.p ? json(s.p->min) : json(nullptr);
  j["p_max"] = s.p ? json(s.p->max) : json(nullptr);
  j["sigma"] = s.sigma ? json(*s.sigma) : json(nullptr);
  j["squared"] = s.squared;
  return j;
}

KernelSpec spec_from(const json& j) {
  KernelSpec s;
  s.kind = parse_kind(j.at("kind").get<std::string>());
  s.modality = parse_modality(j.at("modality").get<std::string>());
  if (!j.at("p_min").is_null()) s.p = PRange{j.at("p_min").get<std::size_t>(), j.at("p_max").get<std::size_t>()};
  if (!j.at("sigma").is_null()) s.sigma = j.at("sigma").get<double>();
  s.squared = j.at("squared").get<bool>();
  return s;
}

}  // namespace

std::string specs_to_json(std::span<const KernelSpec> specs) {
  json arr = json::array();
  for (const auto& s : specs) arr.push_back(spec_json(s));
  return arr.dump();
}

std::vector<KernelSpec> specs_from_json(std::string_view text) {
  try {
    json arr = json::parse(text);
    std::vector<KernelSpec> specs;
    for (const auto& j : arr) specs.push_back(spec_from(j));
    return specs;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed kernel spec: ") + e.what());
  }
}

GramMatrix::GramMatrix(Eigen::MatrixXd values, std::vector<std::string> row_ids,
                       std::vector<std::string> col_ids, std::vector<KernelSpec> components,
                       bool square_symmetric)
    : values_(std::move(values)),
      row_ids_(std::move(row_ids)),
      col_ids_(std::move(col_ids)),
      components_(std::move(components)),
      square_symmetric_(square_symmetric) {
  if (static_cast<std::size_t>(values_.rows()) != row_ids_.size() ||
      static_cast<std::size_t>(values_.cols()) != col_ids_.size()) {
    throw ContractError("gram matrix shape " + std::to_string(values_.rows()) + "x" +
                        std::to_string(values_.cols()) + " does not match id lists " +
                        std::to_string(row_ids_.size()) + "x" + std::to_string(col_ids_.size()));
  }
  if (!values_.allFinite()) throw NumericError("gram matrix has non-finite entries");
  if (square_symmetric_) {
    if (row_ids_ != col_ids_) throw AlignmentError("symmetric gram matrix needs row ids == col ids");
    const double scale = std::max(1.0, values_.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < values_.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < values_.cols(); ++j) {
        if (std::abs(values_(i, j) - values_(j, i)) > 1e-12 * scale) {
          throw NumericError("gram matrix not symmetric at (" + std::to_string(i) + ", " +
                             std::to_string(j) + ")");
        }
      }
    }
  }
}

bool GramMatrix::has_unit_diagonal(double tol) const {
  if (rows() != cols()) return false;
  for (Eigen::Index i = 0; i < rows(); ++i) {
    if (std::abs(values_(i, i) - 1.0) > tol) return false;
  }
  return true;
}

bool operator==(const GramMatrix& a, const GramMatrix& b) {
  return a.square_symmetric_ == b.square_symmetric_ && a.row_ids_ == b.row_ids_ &&
         a.col_ids_ == b.col_ids_ && a.components_ == b.components_ &&
         a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
         a.values_ == b.values_;
}

}  // namespace nli
