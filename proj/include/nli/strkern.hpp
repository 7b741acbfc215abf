#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "nli/corpus.hpp"
#include "nli/gram.hpp"

namespace nli {

enum class StringKernelKind { presence, intersection };

std::string_view to_string(StringKernelKind k) noexcept;

/// Longest document accepted by the string kernels, in code points.
inline constexpr std::size_t kMaxDocumentLength = std::size_t{1} << 20;

struct PGramEntry {
  std::uint64_t key;    // 64-bit hash of the p-gram
  std::uint32_t count;  // occurrences, > 0

  bool operator==(const PGramEntry&) const = default;
};

/// Distinct p-grams of one string with their counts, sorted by key.
struct PGramProfile {
  std::size_t p = 0;
  std::vector<PGramEntry> entries;
  std::uint64_t total = 0;  // |s| - p + 1, or 0 when |s| < p

  std::uint64_t distinct() const noexcept { return entries.size(); }
};

/// Hash of the p-gram text[0, p). Stable across runs and platforms.
std::uint64_t pgram_hash(std::u32string_view gram) noexcept;

PGramProfile build_profile(std::u32string_view s, std::size_t p);

/// Raw (unnormalized) kernel. Throws ContractError when a.p != b.p.
std::uint64_t kernel_value(const PGramProfile& a, const PGramProfile& b, StringKernelKind kind);

/// Self-kernel k(s, s) read off the profile.
std::uint64_t self_kernel(const PGramProfile& a, StringKernelKind kind) noexcept;

/// Blended normalized string kernel:
///   K[i][j] = 1/(p_max-p_min+1) * sum_p k_p(r_i, c_j) / sqrt(k_p(r_i, r_i) k_p(c_j, c_j)).
/// When rows and cols hold the same ids the result is marked square-symmetric,
/// computed on the upper triangle and mirrored. Rows are processed in parallel;
/// output does not depend on the thread count.
GramMatrix blended_gram(std::span<const Document> rows, std::span<const Document> cols,
                        StringKernelKind kind, std::size_t p_min, std::size_t p_max);

}  // namespace nli
