#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace nli {

struct ClassScores {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold instances

  bool operator==(const ClassScores&) const = default;
};

/// Gold-row x predicted-column counts in a fixed class order.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<std::uint64_t>> counts;

  std::uint64_t total() const noexcept;
  std::uint64_t trace() const noexcept;
  bool operator==(const ConfusionMatrix&) const = default;
};

struct EvalReport {
  double accuracy = 0.0;
  std::vector<ClassScores> per_class;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;  // support-weighted; equals macro_f1 on balanced data
  ConfusionMatrix confusion;
  std::size_t n = 0;

  bool operator==(const EvalReport&) const = default;
};

/// Precision, recall and F1 are 0 whenever their denominator is 0.
EvalReport evaluate(std::span<const std::string> pred, std::span<const std::string> gold,
                    std::span<const std::string> classes);

struct McNemarResult {
  std::size_t a_only = 0;  // A correct, B wrong
  std::size_t b_only = 0;  // A wrong, B correct
  double statistic = 0.0;  // min(b, c) for the exact test, chi-square otherwise
  double p_value = 1.0;
  bool exact = true;
  bool significant = false;
};

/// Exact two-sided binomial test when the discordant count is below 25,
/// continuity-corrected chi-square (1 d.o.f.) otherwise.
McNemarResult mcnemar(std::span<const std::string> pred_a, std::span<const std::string> pred_b,
                      std::span<const std::string> gold, double alpha = 0.05);

/// CSV: header `gold,<class>...`, then one `<class>,<count>...` row per gold class.
void export_confusion(const EvalReport& report, const std::filesystem::path& path);
void write_confusion_csv(const ConfusionMatrix& confusion, std::ostream& out);
ConfusionMatrix read_confusion(const std::filesystem::path& path);

/// `key: value` lines followed by the per-class table and the confusion CSV.
void write_report(const EvalReport& report, std::ostream& out);

}  // namespace nli
