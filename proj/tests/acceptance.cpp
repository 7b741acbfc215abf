// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.
//
//   acceptance [path-to-nlik]
//
// Without the nlik path the CLI half of criterion 8 is skipped and reported.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "learn_oracles.hpp"
#include "nli/error.hpp"
#include "nli/eval.hpp"
#include "nli/experiment.hpp"
#include "nli/kernelops.hpp"
#include "nli/learn.hpp"
#include "nli/strkern.hpp"
#include "test_util.hpp"

using namespace nli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<std::string> ids(Eigen::Index n, const std::string& prefix = "s") {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

std::vector<std::string> names(const std::vector<int>& labels) {
  std::vector<std::string> out;
  for (int l : labels) out.push_back("c" + std::to_string(l));
  return out;
}

KernelSpec linear_spec() {
  KernelSpec s;
  s.kind = KernelKind::ivector_rbf;
  s.modality = Modality::audio;
  s.sigma = 1.0;
  return s;
}

GramMatrix linear_train(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd k = x * x.transpose();
  return GramMatrix(0.5 * (k + k.transpose()), ids(x.rows()), ids(x.rows()), {linear_spec()}, true);
}

GramMatrix linear_eval(const Eigen::MatrixXd& xe, const Eigen::MatrixXd& x) {
  return GramMatrix(xe * x.transpose(), ids(xe.rows(), "e"), ids(x.rows()), {linear_spec()}, false);
}

// 1. Fast p-gram kernels equal naive enumeration.
Outcome string_kernel_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0, checks = 0;
  for (int pair = 0; pair < 200; ++pair) {
    const std::size_t alphabet = 1 + rng() % 8;
    const auto s = nli::testing::random_string(rng, alphabet, 64);
    const auto t = nli::testing::random_string(rng, alphabet, 64);
    for (std::size_t p = 1; p <= 6; ++p) {
      const auto a = build_profile(s, p), b = build_profile(t, p);
      mismatches += kernel_value(a, b, StringKernelKind::presence) != nli::testing::naive_presence(s, t, p);
      mismatches += kernel_value(a, b, StringKernelKind::intersection) != nli::testing::naive_intersection(s, t, p);
      checks += 2;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0,
          fmt("%zu/%zu kernel values exact, %.2fs (limit 5s)", checks - mismatches, checks, secs)};
}

std::vector<Document> random_docs(std::mt19937_64& rng, std::size_t n) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    docs.push_back(nli::testing::doc(fmt("d%03zu", i), nli::testing::random_string(rng, 2 + rng() % 6, 120, 8)));
  }
  return docs;
}

// 2. Normalized blended Grams: unit diagonal, symmetric, entries in [0, 1].
Outcome normalization_invariants() {
  std::mt19937_64 rng(7);
  const auto docs = random_docs(rng, 50);
  double diag = 0.0, asym = 0.0, lo = 1.0, hi = 0.0;
  for (auto kind : {StringKernelKind::presence, StringKernelKind::intersection}) {
    const auto g = blended_gram(docs, docs, kind, 2, 4);
    const Eigen::MatrixXd& k = g.values();
    diag = std::max(diag, (k.diagonal().array() - 1.0).abs().maxCoeff());
    asym = std::max(asym, (k - k.transpose()).cwiseAbs().maxCoeff());
    lo = std::min(lo, k.minCoeff());
    hi = std::max(hi, k.maxCoeff());
  }
  return {diag <= 1e-12 && asym <= 1e-12 && lo >= 0.0 && hi <= 1.0,
          fmt("max |diag-1| %.1e, max asymmetry %.1e, range [%.4f, %.4f]", diag, asym, lo, hi)};
}

// 3. Every construction, and every sum of them, is PSD.
Outcome psd_everywhere() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  const auto docs = random_docs(rng, 50);
  std::vector<FeatureVector> vecs;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    std::vector<double> v(8);
    for (auto& x : v) x = n01(rng);
    vecs.push_back(nli::testing::vec(docs[i].id, v));
  }
  const auto presence = blended_gram(docs, docs, StringKernelKind::presence, 2, 4);
  const auto intersection = blended_gram(docs, docs, StringKernelKind::intersection, 1, 3);
  const auto rbf_p = rbf_transform(presence, 1.0);
  const auto rbf_i = rbf_transform(intersection, 0.5);
  const auto ivec = ivector_gram(vecs, vecs, 0.5);
  std::vector<GramMatrix> all{presence, intersection, rbf_p, rbf_i, ivec, squared_kernel(rbf_p).train,
                              squared_kernel(ivec).train};

  std::size_t tested = 0, failed = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << all.size()); ++mask) {
    std::vector<GramMatrix> parts;
    for (std::size_t b = 0; b < all.size(); ++b) {
      if (mask & (1u << b)) parts.push_back(all[b]);
    }
    const auto report = psd_check(parts.size() == 1 ? parts[0] : sum_kernels(parts), 1e-9);
    ++tested;
    failed += !report.passed;
    worst = std::min(worst, report.min_eigenvalue / report.trace);
  }
  return {failed == 0, fmt("%zu/%zu constructions and sums pass (worst lambda_min/trace %.2e)", tested - failed,
                           tested, worst)};
}

// 4. Dual KRR with a linear kernel equals primal ridge regression.
Outcome krr_oracle() {
  std::mt19937_64 rng(404);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  std::size_t label_mismatch = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int classes = 2 + static_cast<int>(rng() % 3);
    const int n = std::max<int>(classes, 2 + static_cast<int>(rng() % 29));
    const int d = 1 + static_cast<int>(rng() % 5);
    Eigen::MatrixXd x(n, d), xe(15, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n01(rng);
    for (Eigen::Index i = 0; i < xe.size(); ++i) xe.data()[i] = n01(rng);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = i < classes ? i : static_cast<int>(rng() % classes);
    const double lambda = std::pow(10.0, -2.0 + 3.0 * (rng() % 1000) / 1000.0);

    std::vector<std::string> order;
    for (int c = 0; c < classes; ++c) order.push_back("c" + std::to_string(c));
    const auto model = krr_train(linear_train(x), names(labels), lambda, order);
    const Eigen::MatrixXd dual = krr_scores(model, linear_eval(xe, x));
    const Eigen::MatrixXd primal = nli::testing::primal_ridge_scores(x, labels, classes, lambda, xe);
    worst = std::max(worst, (dual - primal).cwiseAbs().maxCoeff());
    const auto a = argmax_rows(dual), b = argmax_rows(primal);
    label_mismatch += a != b;
  }
  return {worst <= 1e-6 && label_mismatch == 0,
          fmt("20 instances, max score difference %.2e (limit 1e-6), %zu prediction mismatches", worst,
              label_mismatch)};
}

// 5. Linear KDA equals Fisher LDA; Gaussian toy accuracy.
Outcome kda_oracle() {
  std::mt19937_64 rng(55);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd x;
    std::vector<int> labels;
    nli::testing::gaussian_toy(rng, 60, x, labels);
    x.col(1) += 1.5 * x.col(0).unaryExpr([](double v) { return std::sin(v); });
    const auto model = kda_train(linear_train(x), names(labels), 1e-6);
    const Eigen::MatrixXd kda = nli::testing::align_columns(std::get<KdaProjection>(model.payload).centroids);
    const Eigen::MatrixXd lda = nli::testing::align_columns(nli::testing::fisher_lda_means(x, labels, 3, 2));
    worst = std::max(worst, (kda - lda).cwiseAbs().maxCoeff());
  }
  double acc = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 toy(seed);
    Eigen::MatrixXd x, xe;
    std::vector<int> labels, gold;
    nli::testing::gaussian_toy(toy, 200, x, labels);
    nli::testing::gaussian_toy(toy, 200, xe, gold);
    const auto pred = kda_predict(kda_train(linear_train(x), names(labels)), linear_eval(xe, x));
    const auto expected = names(gold);
    int correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == expected[i];
    acc += correct / 200.0 / 10.0;
  }
  return {worst <= 1e-6 && acc >= 0.95,
          fmt("max aligned projected-mean difference %.2e (limit 1e-6); toy accuracy %.4f over 10 seeds (>= 0.95)",
              worst, acc)};
}

// 6. End-to-end synthetic NLI.
Outcome end_to_end() {
  const auto t0 = Clock::now();
  const char* kernels[] = {"presence:essay:3-5", "ivec:0.5", "presence:essay:3-5 + ivec:0.5"};
  int fusion_wins = 0, fusion_strict = 0;
  double text_acc_first = 0.0, text_acc_mean = 0.0;
  std::string rows;
  for (std::uint64_t seed = 7; seed < 17; ++seed) {
    ExperimentConfig c;
    SyntheticOptions o;
    o.num_classes = 5;
    o.docs_per_class = 50;
    o.doc_length = 500;
    o.vector_dim = 16;
    o.seed = seed;
    o.test_fraction = 0.2;
    c.synthetic = o;
    c.seed = seed;
    c.track = Track::fusion;
    c.classifier = Method::kda;
    c.eval_on = Split::test;
    double f1[3];
    for (int k = 0; k < 3; ++k) {
      c.kernel = parse_kernel_expression(kernels[k]);
      const auto r = run_experiment(c);
      if (r.report.n != 50 || r.predictions.size() != 50) throw ContractError("expected 50 test documents");
      f1[k] = r.report.macro_f1;
      if (k == 0) {
        if (seed == 7) text_acc_first = r.report.accuracy;
        text_acc_mean += r.report.accuracy / 10.0;
      }
    }
    const bool win = f1[2] >= f1[0] && f1[2] >= f1[1];
    fusion_wins += win;
    fusion_strict += f1[2] > f1[0] && f1[2] > f1[1];
    rows += fmt("\n    seed %2llu  macro F1 text %.3f  ivec %.3f  fused %.3f%s", static_cast<unsigned long long>(seed),
                f1[0], f1[1], f1[2], win ? "" : "  (fusion below a single modality)");
  }
  const double secs = seconds_since(t0);
  return {text_acc_first >= 0.9 && text_acc_mean >= 0.9 && fusion_wins >= 8 && secs < 120.0,
          fmt("presence 3-5 + KDA test accuracy %.3f on seed 7, mean %.3f over 10 seeds (>= 0.9); "
              "fusion >= both modalities on %d/10 seeds (>= 8), strictly above both on %d; %.1fs (limit 120s)",
              text_acc_first, text_acc_mean, fusion_wins, fusion_strict, secs) +
              rows};
}

// 7. Metrics and significance test.
Outcome metrics() {
  const std::vector<std::string> classes{"A", "B"};
  const std::vector<std::string> gold{"A", "A", "B"}, pred{"A", "B", "B"};
  const auto r = evaluate(pred, gold, classes);
  bool ok = std::abs(r.accuracy - 2.0 / 3.0) < 1e-12 && std::abs(r.macro_f1 - 2.0 / 3.0) < 1e-12;

  nli::testing::TempDir dir;
  export_confusion(r, dir / "confusion.csv");
  const bool round_trip = read_confusion(dir / "confusion.csv") == r.confusion;

  std::vector<std::string> g(40, "A"), a(40, "A"), b(40, "A");
  for (int i = 0; i < 10; ++i) b[i] = "B";
  const double exact = mcnemar(a, b, g).p_value;
  std::vector<std::string> g2(100, "A"), a2(100, "A"), b2(100, "A");
  for (int i = 0; i < 30; ++i) b2[i] = "B";
  for (int i = 30; i < 40; ++i) a2[i] = "B";
  const double chi2 = mcnemar(a2, b2, g2).p_value;
  ok = ok && round_trip && std::abs(exact - 0.001953125) <= 1e-4 && std::abs(chi2 - 0.002663119259138558) <= 1e-4;
  return {ok, fmt("accuracy %.6f, macro F1 %.6f (expected 0.666667); confusion round trip %s; "
                  "McNemar p exact %.6f (0.001953), chi-square %.6f (0.002663)",
                  r.accuracy, r.macro_f1, round_trip ? "ok" : "FAILED", exact, chi2)};
}

int run_cli(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

// 8. Reproducibility, in process and through the CLI.
Outcome reproducibility(const std::string& nlik) {
  nli::testing::TempDir dir;
  SyntheticOptions o;
  o.num_classes = 4;
  o.docs_per_class = 15;
  o.doc_length = 200;
  o.vector_dim = 8;
  o.seed = 3;
  o.dev_fraction = 0.2;
  o.test_fraction = 0.2;
  o.with_transcripts = true;
  const auto manifest = write_corpus(generate_synthetic_corpus(o), dir / "corpus");
  const std::string cfg_text = "corpus = " + manifest.string() + "\ncache_dir = " + (dir / "cache").string() +
                               "\nkernel = presence:essay:2-4 + rbf2(intersection:transcript:2-3) + ivec2:0.5\n"
                               "train_on = train,dev\neval_on = test\nseed = 3\n";
  const auto config = parse_config(cfg_text);

  const auto cold = run_experiment(config);
  const auto warm = run_experiment(config);
  write_predictions(cold.predictions, dir / "cold.tsv");
  write_predictions(warm.predictions, dir / "warm.tsv");
  std::ostringstream rc, rw;
  write_report(cold.report, rc);
  write_report(warm.report, rw);
  bool ok = nli::testing::read_text(dir / "cold.tsv") == nli::testing::read_text(dir / "warm.tsv") &&
            rc.str() == rw.str() && warm.stats.grams_computed == 0 && warm.stats.cache_hits > 0;
  std::string detail = fmt("in-process: predictions and reports %s, warm run %zu cache hits / %zu recomputed",
                           ok ? "identical" : "DIFFER", warm.stats.cache_hits, warm.stats.grams_computed);

  if (nlik.empty()) return {false, detail + "; CLI check not run (no nlik path given)"};
  nli::testing::write_text(dir / "run.cfg", cfg_text);
  const std::string base = "\"" + nlik + "\" run \"" + (dir / "run.cfg").string() + "\" --cache-dir \"" +
                           (dir / "cli_cache").string() + "\"";
  int status = 0;
  for (int i = 1; i <= 3; ++i) {
    status |= run_cli(base + fmt(" --predictions \"%s\" --report \"%s\"", (dir / fmt("p%d.tsv", i)).c_str(),
                                 (dir / fmt("r%d.txt", i)).c_str()));
  }
  const auto p1 = nli::testing::read_text(dir / "p1.tsv");
  const bool cli_ok = status == 0 && !p1.empty() && p1 == nli::testing::read_text(dir / "p2.tsv") &&
                      p1 == nli::testing::read_text(dir / "p3.tsv") &&
                      nli::testing::read_text(dir / "r1.txt") == nli::testing::read_text(dir / "r2.txt") &&
                      p1 == nli::testing::read_text(dir / "cold.tsv");
  return {ok && cli_ok, detail + fmt("; CLI: 3 runs (cold, warm, warm) %s", cli_ok ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string nlik = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"string-kernel oracle equivalence", string_kernel_oracle},
      {"normalization invariants", normalization_invariants},
      {"positive semidefiniteness", psd_everywhere},
      {"KRR matches primal ridge", krr_oracle},
      {"KDA matches Fisher LDA", kda_oracle},
      {"end-to-end synthetic NLI", end_to_end},
      {"metric correctness", metrics},
      {"reproducibility", [&] { return reproducibility(nlik); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.passed;
    std::printf("%s criterion %zu: %s -- %s\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
