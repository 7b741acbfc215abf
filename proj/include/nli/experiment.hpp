#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nli/corpus.hpp"
#include "nli/eval.hpp"
#include "nli/gram.hpp"
#include "nli/kernelops.hpp"
#include "nli/learn.hpp"

namespace nli {

enum class Track { essay, speech, fusion };

std::string_view to_string(Track t) noexcept;
Track parse_track(std::string_view s);

/// Throws ConfigError when `spec` reads a modality the track forbids.
void check_track(Track track, const KernelSpec& spec);

/// Parses a kernel expression: terms joined by '+'.
///
///     term  := strk | 'rbf(' strk [',' sigma] ')' | 'rbf2(' strk [',' sigma] ')'
///            | 'ivec' [':' sigma] | 'ivec2' [':' sigma]
///     strk  := ('presence' | 'intersection') ':' ('essay' | 'transcript') ':' p ['-' p]
///
/// Missing sigmas take the given defaults.
std::vector<KernelSpec> parse_kernel_expression(std::string_view expr,
                                                double string_sigma = kDefaultStringSigma,
                                                double ivec_sigma = kDefaultIvectorSigma);
std::string format_kernel_expression(std::span<const KernelSpec> specs);

struct ExperimentConfig {
  std::string name;
  std::filesystem::path corpus;                 // manifest; ignored when `synthetic` is set
  std::optional<SyntheticOptions> synthetic;    // generated in memory from `seed`
  Track track = Track::fusion;
  std::vector<KernelSpec> kernel;
  Method classifier = Method::kda;
  double lambda = 1.0;
  std::optional<double> mu;
  std::vector<Split> train_on{Split::train};
  Split eval_on = Split::dev;
  std::filesystem::path cache_dir;              // empty disables the Gram cache
  std::uint64_t seed = 0;
  bool lowercase = false;

  /// Display name: `name`, else the kernel expression and classifier.
  std::string id() const;
  void validate() const;
};

/// Flat `key = value` file; see docs/formats.md. Relative paths resolve
/// against `base_dir`.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string format_config(const ExperimentConfig& config);

/// Cache directory after the NLIK_CACHE_DIR override.
std::filesystem::path effective_cache_dir(const ExperimentConfig& config);

struct Prediction {
  std::string id;
  std::string gold;
  std::string pred;

  bool operator==(const Prediction&) const = default;
};

struct RunStats {
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
  std::size_t grams_computed = 0;
};

struct RunResult {
  std::string config_id;
  std::uint64_t corpus_checksum = 0;
  Split eval_on = Split::dev;
  EvalReport report;
  std::vector<Prediction> predictions;
  RunStats stats;
};

using Logger = std::function<void(std::string_view)>;

/// Reads only the parts of the corpus the config's kernels need.
Corpus load_experiment_corpus(const ExperimentConfig& config);

/// Builds the fused train x train and eval x train kernels for `config`,
/// reusing cached base Grams where possible.
struct KernelBlocks {
  GramMatrix train;
  GramMatrix eval;
};
KernelBlocks build_kernel_blocks(const ExperimentConfig& config, const Corpus& corpus,
                                 std::span<const std::size_t> train_rows,
                                 std::span<const std::size_t> eval_rows, RunStats* stats = nullptr,
                                 const Logger& log = {});

RunResult run_experiment(const ExperimentConfig& config, const Logger& log = {});

/// TSV with header `id\tgold\tpred`.
void write_predictions(std::span<const Prediction> predictions, const std::filesystem::path& path);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

struct SweepRow {
  std::size_t config_index = 0;
  std::string config_id;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::size_t group = 1;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by macro F1, best first
  std::vector<RunResult> runs;  // in config order
};

/// Ranks systems by macro F1. Walking down the ranking, a system joins the
/// current group unless McNemar's test separates it from the group's leader,
/// in which case it starts the next group.
SweepResult group_systems(std::vector<RunResult> runs, double alpha = 0.05);
SweepResult sweep(std::span<const ExperimentConfig> configs, double alpha = 0.05, const Logger& log = {});
void write_sweep_table(const SweepResult& result, std::ostream& out);

struct SigmaScore {
  double sigma = 0.0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct TuneResult {
  double best_sigma = 0.0;
  std::vector<SigmaScore> scores;  // grid order, ascending sigma
};

enum class SigmaTarget { all, string, ivec };

/// Trains on train and scores on dev for each sigma, applying it to every
/// sigma-bearing term selected by `target`. Ties go to the smallest sigma.
TuneResult tune_sigma(const ExperimentConfig& base, std::span<const double> grid,
                      SigmaTarget target = SigmaTarget::all, const Logger& log = {});

}  // namespace nli
