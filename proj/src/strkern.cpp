#include "nli/strkern.hpp"

#include <algorithm>
#include <cmath>

#include "nli/error.hpp"
#include "nli/hash.hpp"

namespace nli {

std::string_view to_string(StringKernelKind k) noexcept {
  return k == StringKernelKind::presence ? "presence" : "intersection";
}

namespace {

constexpr std::uint64_t kHashSeed = 0x243f6a8885a308d3ULL;

inline std::uint64_t hash_step(std::uint64_t h, char32_t c) noexcept {
  return mix64(h ^ (static_cast<std::uint64_t>(c) * 0x9e3779b97f4a7c15ULL));
}

std::vector<PGramProfile> build_profiles(std::span<const Document> docs, std::size_t p) {
  std::vector<PGramProfile> out(docs.size());
  const auto n = static_cast<std::ptrdiff_t>(docs.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = build_profile(docs[i].text, p);
  return out;
}

void check_documents(std::span<const Document> docs, std::size_t p_max) {
  for (const auto& d : docs) {
    if (d.text.size() < p_max) {
      throw DegenerateDocumentError("document '" + d.id + "' has " + std::to_string(d.text.size()) +
                                    " characters, fewer than p = " + std::to_string(p_max) +
                                    "; its self-kernel would be 0");
    }
    if (d.text.size() > kMaxDocumentLength) {
      throw DegenerateDocumentError("document '" + d.id + "' exceeds the maximum length of " +
                                    std::to_string(kMaxDocumentLength) + " characters");
    }
  }
}

bool same_documents(std::span<const Document> a, std::span<const Document> b) {
  if (a.data() == b.data() && a.size() == b.size()) return true;
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].id != b[i].id || a[i].text != b[i].text) return false;
  }
  return true;
}

}  // namespace

std::uint64_t pgram_hash(std::u32string_view gram) noexcept {
  std::uint64_t h = kHashSeed;
  for (char32_t c : gram) h = hash_step(h, c);
  return h;
}

PGramProfile build_profile(std::u32string_view s, std::size_t p) {
  if (p < 1) throw ContractError("p must be >= 1");
  PGramProfile profile;
  profile.p = p;
  if (s.size() < p) return profile;
  const std::size_t n = s.size() - p + 1;
  std::vector<std::uint64_t> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = pgram_hash(s.substr(i, p));
  std::sort(keys.begin(), keys.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && keys[j] == keys[i]) ++j;
    profile.entries.push_back(PGramEntry{keys[i], static_cast<std::uint32_t>(j - i)});
    i = j;
  }
  profile.total = n;
  return profile;
}

std::uint64_t kernel_value(const PGramProfile& a, const PGramProfile& b, StringKernelKind kind) {
  if (a.p != b.p) {
    throw ContractError("kernel_value: profiles built with different p (" + std::to_string(a.p) +
                        " vs " + std::to_string(b.p) + ")");
  }
  std::uint64_t sum = 0;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() && ib != b.entries.end()) {
    if (ia->key < ib->key) {
      ++ia;
    } else if (ib->key < ia->key) {
      ++ib;
    } else {
      sum += kind == StringKernelKind::presence ? 1 : std::min(ia->count, ib->count);
      ++ia;
      ++ib;
    }
  }
  return sum;
}

std::uint64_t self_kernel(const PGramProfile& a, StringKernelKind kind) noexcept {
  return kind == StringKernelKind::presence ? a.distinct() : a.total;
}

GramMatrix blended_gram(std::span<const Document> rows, std::span<const Document> cols,
                        StringKernelKind kind, std::size_t p_min, std::size_t p_max) {
  if (p_min < 1 || p_min > p_max) {
    throw ContractError("blended_gram: need 1 <= p_min <= p_max, got " + std::to_string(p_min) +
                        ".." + std::to_string(p_max));
  }
  check_documents(rows, p_max);
  check_documents(cols, p_max);
  const bool square = same_documents(rows, cols);
  const auto nr = static_cast<Eigen::Index>(rows.size());
  const auto nc = static_cast<Eigen::Index>(cols.size());

  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(nr, nc);
  for (std::size_t p = p_min; p <= p_max; ++p) {
    const auto row_prof = build_profiles(rows, p);
    const auto col_prof = square ? std::vector<PGramProfile>{} : build_profiles(cols, p);
    const auto& cp = square ? row_prof : col_prof;
    std::vector<double> row_self(row_prof.size()), col_self(cp.size());
    for (std::size_t i = 0; i < row_prof.size(); ++i) row_self[i] = static_cast<double>(self_kernel(row_prof[i], kind));
    for (std::size_t j = 0; j < cp.size(); ++j) col_self[j] = static_cast<double>(self_kernel(cp[j], kind));

#pragma omp parallel for schedule(dynamic, 4)
    for (Eigen::Index i = 0; i < nr; ++i) {
      for (Eigen::Index j = square ? i : 0; j < nc; ++j) {
        const auto raw = static_cast<double>(kernel_value(row_prof[i], cp[j], kind));
        acc(i, j) += raw / std::sqrt(row_self[i] * col_self[j]);
      }
    }
  }

  const auto count = static_cast<double>(p_max - p_min + 1);
  for (Eigen::Index i = 0; i < nr; ++i) {
    for (Eigen::Index j = square ? i : 0; j < nc; ++j) {
      const double v = std::clamp(acc(i, j) / count, 0.0, 1.0);
      acc(i, j) = v;
      if (square) acc(j, i) = v;
    }
  }

  std::vector<std::string> row_ids, col_ids;
  for (const auto& d : rows) row_ids.push_back(d.id);
  for (const auto& d : cols) col_ids.push_back(d.id);
  const Modality modality = rows.empty() ? (cols.empty() ? Modality::essay : cols.front().modality)
                                         : rows.front().modality;
  KernelSpec spec;
  spec.kind = kind == StringKernelKind::presence ? KernelKind::presence : KernelKind::intersection;
  spec.modality = modality;
  spec.p = PRange{p_min, p_max};
  return GramMatrix(std::move(acc), std::move(row_ids), std::move(col_ids), {spec}, square);
}

}  // namespace nli
