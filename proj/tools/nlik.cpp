// nlik: command-line front end for the string-kernel NLI pipeline.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nli/corpus.hpp"
#include "nli/error.hpp"
#include "nli/eval.hpp"
#include "nli/experiment.hpp"
#include "nli/hash.hpp"
#include "nli/kernelops.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kConfig = 2,
  kData = 3,
  kNumeric = 4,
  kContract = 5,
};

int exit_code_for(nli::ErrorCategory c) {
  switch (c) {
    case nli::ErrorCategory::config: return kConfig;
    case nli::ErrorCategory::data: return kData;
    case nli::ErrorCategory::numeric: return kNumeric;
    case nli::ErrorCategory::contract: return kContract;
  }
  return kOther;
}

std::vector<nli::Split> parse_splits(const std::string& text) {
  std::vector<nli::Split> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(nli::parse_split(item));
  if (out.empty()) throw nli::ConfigError("empty split list");
  return out;
}

std::vector<std::size_t> rows_in(const nli::Corpus& corpus, const std::vector<nli::Split>& splits) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    if (std::find(splits.begin(), splits.end(), corpus.samples[i].split) != splits.end()) rows.push_back(i);
  }
  return rows;
}

struct Overrides {
  std::string corpus;
  std::string cache_dir;
  std::string train_on;
  std::string eval_on;
  std::optional<std::uint64_t> seed;
};

nli::ExperimentConfig load_with(const std::string& path, const Overrides& o) {
  nli::ExperimentConfig c = nli::load_config(path);
  if (!o.corpus.empty()) {
    c.corpus = o.corpus;
    c.synthetic.reset();
  }
  if (!o.cache_dir.empty()) c.cache_dir = o.cache_dir;
  if (!o.train_on.empty()) c.train_on = parse_splits(o.train_on);
  if (!o.eval_on.empty()) c.eval_on = nli::parse_split(o.eval_on);
  if (o.seed) {
    c.seed = *o.seed;
    if (c.synthetic) c.synthetic->seed = *o.seed;
  }
  c.validate();
  return c;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--corpus", o.corpus, "Corpus manifest (overrides the config)");
  cmd->add_option("--cache-dir", o.cache_dir, "Gram cache directory (NLIK_CACHE_DIR wins)");
  cmd->add_option("--train-on", o.train_on, "Comma-separated training splits");
  cmd->add_option("--eval-on", o.eval_on, "Evaluation split");
  cmd->add_option("--seed", o.seed, "Seed for synthetic corpora");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-kernel native language identification with string kernels"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress and cache messages");

  // run
  auto* run = app.add_subcommand("run", "Run one experiment config");
  std::string run_config, predictions_path, report_path, confusion_path;
  Overrides run_overrides;
  run->add_option("config", run_config, "Experiment config file")->required();
  run->add_option("--predictions", predictions_path, "Write id/gold/pred TSV here");
  run->add_option("--report", report_path, "Write the evaluation report here");
  run->add_option("--confusion", confusion_path, "Write the confusion matrix CSV here");
  add_overrides(run, run_overrides);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Rank several configs and group them by McNemar's test");
  std::vector<std::string> sweep_configs;
  double alpha = 0.05;
  std::string sweep_out;
  Overrides sweep_overrides;
  sweep_cmd->add_option("configs", sweep_configs, "Experiment config files")->required();
  sweep_cmd->add_option("--alpha", alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  sweep_cmd->add_option("-o,--output", sweep_out, "Write the ranked table here");
  add_overrides(sweep_cmd, sweep_overrides);

  // tune-sigma
  auto* tune = app.add_subcommand("tune-sigma", "Pick sigma on the dev split");
  std::string tune_config, target = "all";
  std::vector<double> grid;
  Overrides tune_overrides;
  tune->add_option("config", tune_config, "Experiment config file")->required();
  tune->add_option("--grid", grid, "Sigma values")->required()->delimiter(',');
  tune->add_option("--target", target, "Which kernels to tune")->check(CLI::IsMember({"all", "string", "ivec"}));
  add_overrides(tune, tune_overrides);

  // gram
  auto* gram = app.add_subcommand("gram", "Build or inspect Gram matrices");
  gram->require_subcommand(1);
  auto* gram_build = gram->add_subcommand("build", "Compute a Gram matrix and save it");
  std::string gb_manifest, gb_kernel, gb_rows = "train", gb_cols = "train", gb_out;
  double gb_string_sigma = nli::kDefaultStringSigma, gb_ivec_sigma = nli::kDefaultIvectorSigma;
  bool gb_lowercase = false;
  gram_build->add_option("manifest", gb_manifest, "Corpus manifest")->required();
  gram_build->add_option("--kernel", gb_kernel, "Kernel expression")->required();
  gram_build->add_option("--rows", gb_rows, "Row splits");
  gram_build->add_option("--cols", gb_cols, "Column splits (the training side for squared kernels)");
  gram_build->add_option("--string-sigma", gb_string_sigma, "Default sigma for rbf()/rbf2() terms");
  gram_build->add_option("--ivec-sigma", gb_ivec_sigma, "Default sigma for ivec terms");
  gram_build->add_flag("--lowercase", gb_lowercase, "Lowercase texts before computing kernels");
  gram_build->add_option("-o,--output", gb_out, "Output file")->required();

  auto* gram_check = gram->add_subcommand("check", "Report the smallest eigenvalue of a square Gram");
  std::string gc_file;
  double gc_tol = 1e-9;
  gram_check->add_option("file", gc_file, "Gram file")->required();
  gram_check->add_option("--tol", gc_tol, "Pass when lambda_min >= -tol * trace");

  // corpus
  auto* corpus_cmd = app.add_subcommand("corpus", "Corpus utilities");
  corpus_cmd->require_subcommand(1);
  auto* synth = corpus_cmd->add_subcommand("synth", "Write a synthetic corpus");
  nli::SyntheticOptions so;
  std::string synth_out;
  synth->add_option("--classes", so.num_classes)->check(CLI::PositiveNumber);
  synth->add_option("--docs", so.docs_per_class, "Documents per class")->check(CLI::PositiveNumber);
  synth->add_option("--length", so.doc_length, "Characters per document")->check(CLI::PositiveNumber);
  synth->add_option("--dim", so.vector_dim, "Feature vector dimension")->check(CLI::PositiveNumber);
  synth->add_option("--seed", so.seed);
  synth->add_option("--test-fraction", so.test_fraction);
  synth->add_option("--dev-fraction", so.dev_fraction);
  synth->add_option("--class-signal", so.class_signal);
  synth->add_option("--vector-noise", so.vector_noise);
  synth->add_flag("--transcripts", so.with_transcripts, "Also generate transcripts");
  synth->add_option("-o,--output", synth_out, "Output directory")->required();

  auto* validate = corpus_cmd->add_subcommand("validate", "Load and check a corpus manifest");
  std::string validate_manifest;
  validate->add_option("manifest", validate_manifest)->required();

  CLI11_PARSE(app, argc, argv);

  const nli::Logger log = [quiet](std::string_view msg) {
    if (!quiet) std::cerr << "[nlik] " << msg << '\n';
  };

  try {
    if (*run) {
      const auto config = load_with(run_config, run_overrides);
      const auto result = nli::run_experiment(config, log);
      if (!predictions_path.empty()) nli::write_predictions(result.predictions, predictions_path);
      if (!confusion_path.empty()) nli::export_confusion(result.report, confusion_path);
      std::ostringstream report;
      report << "config: " << result.config_id << '\n';
      nli::write_report(result.report, report);
      if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
        out << report.str();
      }
      std::cout << report.str();
    } else if (*sweep_cmd) {
      std::vector<nli::ExperimentConfig> configs;
      for (const auto& path : sweep_configs) configs.push_back(load_with(path, sweep_overrides));
      const auto result = nli::sweep(configs, alpha, log);
      nli::write_sweep_table(result, std::cout);
      if (!sweep_out.empty()) {
        std::ofstream out(sweep_out, std::ios::binary | std::ios::trunc);
        nli::write_sweep_table(result, out);
      }
    } else if (*tune) {
      const auto config = load_with(tune_config, tune_overrides);
      const auto t = target == "string" ? nli::SigmaTarget::string
                     : target == "ivec" ? nli::SigmaTarget::ivec
                                        : nli::SigmaTarget::all;
      const auto result = nli::tune_sigma(config, grid, t, log);
      std::printf("sigma\taccuracy\tmacro_f1\n");
      for (const auto& s : result.scores) std::printf("%g\t%.6f\t%.6f\n", s.sigma, s.accuracy, s.macro_f1);
      std::printf("best_sigma: %g\n", result.best_sigma);
    } else if (*gram_build) {
      nli::ExperimentConfig c;
      c.corpus = gb_manifest;
      c.track = nli::Track::fusion;
      c.kernel = nli::parse_kernel_expression(gb_kernel, gb_string_sigma, gb_ivec_sigma);
      c.lowercase = gb_lowercase;
      const auto corpus = nli::load_experiment_corpus(c);
      const auto rows = rows_in(corpus, parse_splits(gb_rows));
      const auto cols = rows_in(corpus, parse_splits(gb_cols));
      const auto blocks = nli::build_kernel_blocks(c, corpus, cols, rows, nullptr, log);
      const bool square = rows == cols;
      nli::save_gram(square ? blocks.train : blocks.eval, gb_out);
      const auto& g = square ? blocks.train : blocks.eval;
      std::printf("wrote %s: %lldx%lld %s\n", gb_out.c_str(), static_cast<long long>(g.rows()),
                  static_cast<long long>(g.cols()), nli::format_kernel_expression(g.components()).c_str());
    } else if (*gram_check) {
      const auto g = nli::load_gram(gc_file);
      const auto r = nli::psd_check(g, gc_tol);
      std::printf("rows: %lld\ncols: %lld\nkernel: %s\nmin_eigenvalue: %.17g\ntrace: %.17g\npsd: %s\n",
                  static_cast<long long>(g.rows()), static_cast<long long>(g.cols()),
                  nli::format_kernel_expression(g.components()).c_str(), r.min_eigenvalue, r.trace,
                  r.passed ? "pass" : "fail");
      if (!r.passed) return kNumeric;
    } else if (*synth) {
      const auto corpus = nli::generate_synthetic_corpus(so);
      const auto manifest = nli::write_corpus(corpus, synth_out);
      std::printf("wrote %s: %zu samples, %zu classes\n", manifest.string().c_str(), corpus.samples.size(),
                  corpus.classes.size());
    } else if (*validate) {
      const auto corpus = nli::load_corpus(validate_manifest);
      std::size_t counts[3] = {0, 0, 0};
      for (const auto& s : corpus.samples) ++counts[static_cast<int>(s.split)];
      std::printf("classes: %zu\nsamples: %zu (train %zu, dev %zu, test %zu)\n", corpus.classes.size(),
                  corpus.samples.size(), counts[0], counts[1], counts[2]);
      std::printf("essays: %zu\ntranscripts: %zu\nvectors: %zu (dim %zu)\nchecksum: %s\n", corpus.essays.size(),
                  corpus.transcripts.size(), corpus.vectors.size(), corpus.vector_dim(),
                  nli::to_hex(corpus.provenance.checksum).c_str());
    }
  } catch (const nli::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOk;
}
