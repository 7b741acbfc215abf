#include "nli/experiment.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "nli/error.hpp"
#include "nli/hash.hpp"
#include "nli/strkern.hpp"
#include "nli/text.hpp"

namespace nli {

namespace fs = std::filesystem;

std::string_view to_string(Track t) noexcept {
  switch (t) {
    case Track::essay: return "essay";
    case Track::speech: return "speech";
    case Track::fusion: return "fusion";
  }
  return "?";
}

Track parse_track(std::string_view s) {
  if (s == "essay") return Track::essay;
  if (s == "speech") return Track::speech;
  if (s == "fusion") return Track::fusion;
  throw ConfigError("unknown track '" + std::string(s) + "' (expected essay, speech or fusion)");
}

void check_track(Track track, const KernelSpec& spec) {
  const bool ok = track == Track::fusion || (track == Track::essay && spec.modality == Modality::essay) ||
                  (track == Track::speech && spec.modality != Modality::essay);
  if (!ok) {
    throw ConfigError("kernel '" + spec.expression() + "' reads " + std::string(to_string(spec.modality)) +
                      " data, which the " + std::string(to_string(track)) + " track does not allow");
  }
}

// ---------------------------------------------------------------------------
// Kernel expressions

namespace {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    parts.emplace_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  const std::string t = trim(text);
  T v{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("invalid " + std::string(what) + " '" + t + "'");
  }
  return v;
}

double parse_sigma(std::string_view text) {
  const double v = parse_number<double>(text, "sigma");
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("sigma must be positive, got '" + std::string(text) + "'");
  return v;
}

bool parse_bool(std::string_view text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("invalid boolean '" + t + "'");
}

KernelSpec parse_string_kernel(std::string_view text) {
  const auto parts = split_on(text, ':');
  if (parts.size() != 3) {
    throw ConfigError("string kernel '" + std::string(text) + "' must look like presence:essay:5-9");
  }
  KernelSpec s;
  if (parts[0] == "presence") {
    s.kind = KernelKind::presence;
  } else if (parts[0] == "intersection") {
    s.kind = KernelKind::intersection;
  } else {
    throw ConfigError("unknown string kernel '" + parts[0] + "'");
  }
  s.modality = parse_modality(parts[1]);
  const auto dash = parts[2].find('-');
  PRange r;
  r.min = parse_number<std::size_t>(parts[2].substr(0, dash), "p");
  r.max = dash == std::string::npos ? r.min : parse_number<std::size_t>(parts[2].substr(dash + 1), "p");
  s.p = r;
  return s;
}

KernelSpec parse_term(const std::string& term, double string_sigma, double ivec_sigma) {
  if (term.empty()) throw ConfigError("empty kernel term");
  KernelSpec s;
  for (const char* fn : {"rbf2(", "rbf("}) {
    const std::string_view prefix(fn);
    if (!term.starts_with(prefix)) continue;
    if (term.back() != ')') throw ConfigError("unbalanced parentheses in '" + term + "'");
    const std::string inner = term.substr(prefix.size(), term.size() - prefix.size() - 1);
    const auto comma = inner.find(',');
    s = parse_string_kernel(trim(inner.substr(0, comma)));
    s.sigma = comma == std::string::npos ? string_sigma : parse_sigma(inner.substr(comma + 1));
    s.squared = prefix == "rbf2(";
    s.validate();
    return s;
  }
  if (term.starts_with("ivec")) {
    const auto colon = term.find(':');
    const std::string head = term.substr(0, colon);
    if (head != "ivec" && head != "ivec2") throw ConfigError("unknown kernel term '" + term + "'");
    s.kind = KernelKind::ivector_rbf;
    s.modality = Modality::audio;
    s.sigma = colon == std::string::npos ? ivec_sigma : parse_sigma(term.substr(colon + 1));
    s.squared = head == "ivec2";
    s.validate();
    return s;
  }
  s = parse_string_kernel(term);
  s.validate();
  return s;
}

}  // namespace

std::vector<KernelSpec> parse_kernel_expression(std::string_view expr, double string_sigma, double ivec_sigma) {
  std::vector<KernelSpec> specs;
  for (const auto& term : split_on(expr, '+')) specs.push_back(parse_term(term, string_sigma, ivec_sigma));
  return specs;
}

std::string format_kernel_expression(std::span<const KernelSpec> specs) {
  std::string out;
  for (const auto& s : specs) {
    if (!out.empty()) out += " + ";
    out += s.expression();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config

std::string ExperimentConfig::id() const {
  if (!name.empty()) return name;
  return format_kernel_expression(kernel) + " [" + std::string(to_string(classifier)) + "]";
}

void ExperimentConfig::validate() const {
  if (kernel.empty()) throw ConfigError("config has no kernel");
  for (const auto& k : kernel) {
    k.validate();
    check_track(track, k);
  }
  if (!synthetic && corpus.empty()) throw ConfigError("config names no corpus");
  if (train_on.empty()) throw ConfigError("train_on is empty");
  if (std::find(train_on.begin(), train_on.end(), eval_on) != train_on.end()) {
    throw ConfigError("eval split '" + std::string(to_string(eval_on)) + "' is also a training split");
  }
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be positive");
  if (mu && (!(*mu > 0.0) || !std::isfinite(*mu))) throw ConfigError("mu must be positive");
}

ExperimentConfig parse_config(std::string_view text, const fs::path& base_dir) {
  ExperimentConfig c;
  std::string kernel_expr;
  double string_sigma = kDefaultStringSigma;
  double ivec_sigma = kDefaultIvectorSigma;
  SyntheticOptions synth;
  bool have_synth = false;

  std::size_t line_no = 0;
  for (const auto& raw : split_on(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "name") {
      c.name = value;
    } else if (key == "corpus") {
      c.corpus = fs::path(value).is_absolute() || base_dir.empty() ? fs::path(value) : base_dir / value;
    } else if (key == "track") {
      c.track = parse_track(value);
    } else if (key == "kernel") {
      kernel_expr = value;
    } else if (key == "string_sigma") {
      string_sigma = parse_sigma(value);
    } else if (key == "ivec_sigma") {
      ivec_sigma = parse_sigma(value);
    } else if (key == "classifier") {
      if (value == "krr") {
        c.classifier = Method::krr;
      } else if (value == "kda") {
        c.classifier = Method::kda;
      } else {
        throw ConfigError("unknown classifier '" + value + "'");
      }
    } else if (key == "lambda") {
      c.lambda = parse_number<double>(value, "lambda");
    } else if (key == "mu") {
      if (value == "auto") {
        c.mu.reset();
      } else {
        c.mu = parse_number<double>(value, "mu");
      }
    } else if (key == "train_on") {
      c.train_on.clear();
      for (const auto& s : split_on(value, ',')) c.train_on.push_back(parse_split(s));
    } else if (key == "eval_on") {
      c.eval_on = parse_split(value);
    } else if (key == "cache_dir") {
      c.cache_dir = fs::path(value).is_absolute() || base_dir.empty() ? fs::path(value) : base_dir / value;
    } else if (key == "seed") {
      c.seed = parse_number<std::uint64_t>(value, "seed");
    } else if (key == "lowercase") {
      c.lowercase = parse_bool(value);
    } else if (key.starts_with("synthetic.")) {
      have_synth = true;
      const std::string field = key.substr(10);
      if (field == "classes") {
        synth.num_classes = parse_number<std::size_t>(value, key);
      } else if (field == "docs") {
        synth.docs_per_class = parse_number<std::size_t>(value, key);
      } else if (field == "length") {
        synth.doc_length = parse_number<std::size_t>(value, key);
      } else if (field == "dim") {
        synth.vector_dim = parse_number<std::size_t>(value, key);
      } else if (field == "test_fraction") {
        synth.test_fraction = parse_number<double>(value, key);
      } else if (field == "dev_fraction") {
        synth.dev_fraction = parse_number<double>(value, key);
      } else if (field == "transcripts") {
        synth.with_transcripts = parse_bool(value);
      } else if (field == "class_signal") {
        synth.class_signal = parse_number<double>(value, key);
      } else if (field == "vector_noise") {
        synth.vector_noise = parse_number<double>(value, key);
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  if (kernel_expr.empty()) throw ConfigError("config has no kernel");
  c.kernel = parse_kernel_expression(kernel_expr, string_sigma, ivec_sigma);
  if (have_synth) {
    synth.seed = c.seed;
    c.synthetic = synth;
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream out;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  if (!c.name.empty()) out << "name = " << c.name << '\n';
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    out << "synthetic.classes = " << s.num_classes << '\n'
        << "synthetic.docs = " << s.docs_per_class << '\n'
        << "synthetic.length = " << s.doc_length << '\n'
        << "synthetic.dim = " << s.vector_dim << '\n'
        << "synthetic.test_fraction = " << num(s.test_fraction) << '\n'
        << "synthetic.dev_fraction = " << num(s.dev_fraction) << '\n'
        << "synthetic.transcripts = " << (s.with_transcripts ? "true" : "false") << '\n'
        << "synthetic.class_signal = " << num(s.class_signal) << '\n'
        << "synthetic.vector_noise = " << num(s.vector_noise) << '\n';
  } else {
    out << "corpus = " << c.corpus.string() << '\n';
  }
  out << "track = " << to_string(c.track) << '\n';
  out << "kernel = " << format_kernel_expression(c.kernel) << '\n';
  out << "classifier = " << to_string(c.classifier) << '\n';
  out << "lambda = " << num(c.lambda) << '\n';
  out << "mu = " << (c.mu ? num(*c.mu) : std::string("auto")) << '\n';
  out << "train_on = ";
  for (std::size_t i = 0; i < c.train_on.size(); ++i) out << (i ? "," : "") << to_string(c.train_on[i]);
  out << '\n';
  out << "eval_on = " << to_string(c.eval_on) << '\n';
  if (!c.cache_dir.empty()) out << "cache_dir = " << c.cache_dir.string() << '\n';
  out << "seed = " << c.seed << '\n';
  out << "lowercase = " << (c.lowercase ? "true" : "false") << '\n';
  return out.str();
}

fs::path effective_cache_dir(const ExperimentConfig& config) {
  if (const char* env = std::getenv("NLIK_CACHE_DIR"); env && *env) return fs::path(env);
  return config.cache_dir;
}

// ---------------------------------------------------------------------------
// Running

Corpus load_experiment_corpus(const ExperimentConfig& config) {
  bool essays = false, transcripts = false, vectors = false;
  for (const auto& k : config.kernel) {
    essays |= k.modality == Modality::essay;
    transcripts |= k.modality == Modality::transcript;
    vectors |= k.modality == Modality::audio;
  }
  Corpus corpus;
  if (config.synthetic) {
    SyntheticOptions o = *config.synthetic;
    o.seed = config.seed;
    o.with_transcripts = o.with_transcripts && transcripts;
    corpus = generate_synthetic_corpus(o);
    if (!essays) corpus.essays.clear();
    if (!transcripts) corpus.transcripts.clear();
    if (!vectors) corpus.vectors.clear();
    if (config.lowercase) {
      for (auto* docs : {&corpus.essays, &corpus.transcripts}) {
        for (auto& d : *docs) d.text = to_lower(d.text);
      }
    }
    corpus.provenance.checksum = content_checksum(corpus);
  } else {
    LoadOptions o{essays, transcripts, vectors, config.lowercase};
    corpus = load_corpus(config.corpus, o);
  }
  for (const auto& k : config.kernel) {
    if (!corpus.has(k.modality)) {
      throw DataError("corpus has no " + std::string(to_string(k.modality)) + " data for kernel '" +
                      k.expression() + "'");
    }
  }
  return corpus;
}

namespace {

template <typename T>
std::vector<T> pick(const std::vector<T>& all, std::span<const std::size_t> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (auto i : rows) out.push_back(all[i]);
  return out;
}

std::uint64_t modality_checksum(const Corpus& corpus, Modality m) {
  Fnv1a h;
  h.update(to_string(m));
  if (m == Modality::audio) {
    for (const auto& v : corpus.vectors) {
      h.update(v.id).update_u64(v.values.size());
      for (double x : v.values) h.update_u64(std::bit_cast<std::uint64_t>(x));
    }
  } else {
    for (const auto& d : corpus.documents(m)) h.update(d.id).update_u64(d.text.size()).update(encode_utf8(d.text));
  }
  return h.digest();
}

class GramCache {
 public:
  GramCache(fs::path dir, const Corpus& corpus, RunStats* stats, const Logger& log)
      : dir_(std::move(dir)), corpus_(corpus), stats_(stats), log_(log) {}

  GramMatrix get(const KernelSpec& base, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
    std::vector<std::string> row_ids, col_ids;
    for (auto i : rows) row_ids.push_back(corpus_.samples[i].id);
    for (auto j : cols) col_ids.push_back(corpus_.samples[j].id);

    fs::path file;
    if (!dir_.empty()) {
      Fnv1a h;
      h.update("nlik-gram-v1").update_u64(checksum(base.modality));
      h.update(specs_to_json(std::span(&base, 1)));
      h.update_u64(row_ids.size());
      for (const auto& id : row_ids) h.update(id).update_u64(0);
      h.update_u64(col_ids.size());
      for (const auto& id : col_ids) h.update(id).update_u64(0);
      file = dir_ / (to_hex(h.digest()) + ".gram");
      if (fs::exists(file)) {
        std::optional<GramMatrix> cached;
        try {
          cached.emplace(load_gram(file));
        } catch (const DataError& e) {
          say(std::string("cache entry unreadable, recomputing: ") + e.what());
        }
        if (cached) {
          if (cached->components() != std::vector<KernelSpec>{base} || cached->row_ids() != row_ids ||
              cached->col_ids() != col_ids) {
            throw ConfigError("cache entry " + file.string() + " does not match kernel '" + base.expression() +
                              "' (spec hash differs)");
          }
          if (stats_) ++stats_->cache_hits;
          say("cache hit: " + base.expression() + " " + std::to_string(rows.size()) + "x" +
              std::to_string(cols.size()) + " <- " + file.filename().string());
          return std::move(*cached);
        }
      }
      if (stats_) ++stats_->cache_misses;
    }

    GramMatrix g = compute(base, rows, cols);
    if (stats_) ++stats_->grams_computed;
    say("computed: " + base.expression() + " " + std::to_string(rows.size()) + "x" + std::to_string(cols.size()));
    if (!file.empty()) save_gram(g, file);
    return g;
  }

 private:
  GramMatrix compute(const KernelSpec& base, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
    if (base.kind == KernelKind::ivector_rbf) {
      return ivector_gram(pick(corpus_.vectors, rows), pick(corpus_.vectors, cols), *base.sigma);
    }
    const auto& docs = corpus_.documents(base.modality);
    const auto kind = base.kind == KernelKind::presence ? StringKernelKind::presence : StringKernelKind::intersection;
    const auto row_docs = pick(docs, rows);
    if (std::equal(rows.begin(), rows.end(), cols.begin(), cols.end())) {
      return blended_gram(row_docs, row_docs, kind, base.p->min, base.p->max);
    }
    return blended_gram(row_docs, pick(docs, cols), kind, base.p->min, base.p->max);
  }

  std::uint64_t checksum(Modality m) {
    auto it = checksums_.find(m);
    if (it == checksums_.end()) it = checksums_.emplace(m, modality_checksum(corpus_, m)).first;
    return it->second;
  }

  void say(const std::string& msg) const {
    if (log_) log_(msg);
  }

  fs::path dir_;
  const Corpus& corpus_;
  RunStats* stats_;
  const Logger& log_;
  std::map<Modality, std::uint64_t> checksums_;
};

}  // namespace

KernelBlocks build_kernel_blocks(const ExperimentConfig& config, const Corpus& corpus,
                                 std::span<const std::size_t> train_rows, std::span<const std::size_t> eval_rows,
                                 RunStats* stats, const Logger& log) {
  GramCache cache(effective_cache_dir(config), corpus, stats, log);
  std::vector<GramMatrix> train_parts, eval_parts;
  for (const auto& spec : config.kernel) {
    check_track(config.track, spec);
    const KernelSpec base = spec.base();
    GramMatrix train = cache.get(base, train_rows, train_rows);
    GramMatrix eval = cache.get(base, eval_rows, train_rows);
    if (spec.is_string_kernel() && spec.sigma) {
      train = rbf_transform(train, *spec.sigma);
      eval = rbf_transform(eval, *spec.sigma);
    }
    if (spec.squared) {
      auto sq = squared_kernel(train, &eval);
      train = std::move(sq.train);
      eval = std::move(*sq.eval);
    }
    train_parts.push_back(std::move(train));
    eval_parts.push_back(std::move(eval));
  }
  return KernelBlocks{sum_kernels(train_parts), sum_kernels(eval_parts)};
}

RunResult run_experiment(const ExperimentConfig& config, const Logger& log) {
  config.validate();
  const Corpus corpus = load_experiment_corpus(config);

  std::vector<std::size_t> train_rows, eval_rows;
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const Split s = corpus.samples[i].split;
    if (std::find(config.train_on.begin(), config.train_on.end(), s) != config.train_on.end()) {
      train_rows.push_back(i);
    } else if (s == config.eval_on) {
      eval_rows.push_back(i);
    }
  }
  if (train_rows.empty()) throw DataError("no training samples in the requested splits");
  if (eval_rows.empty()) {
    throw DataError("no samples in the '" + std::string(to_string(config.eval_on)) + "' split");
  }

  RunResult result;
  result.config_id = config.id();
  result.corpus_checksum = corpus.provenance.checksum;
  result.eval_on = config.eval_on;
  const KernelBlocks blocks = build_kernel_blocks(config, corpus, train_rows, eval_rows, &result.stats, log);

  std::vector<std::string> train_labels, gold;
  for (auto i : train_rows) train_labels.push_back(corpus.samples[i].label);
  for (auto i : eval_rows) gold.push_back(corpus.samples[i].label);

  const TrainedModel model = config.classifier == Method::krr
                                 ? krr_train(blocks.train, train_labels, config.lambda, corpus.classes)
                                 : kda_train(blocks.train, train_labels, config.mu, corpus.classes);
  const auto pred = predict(model, blocks.eval);

  result.report = evaluate(pred, gold, corpus.classes);
  for (std::size_t k = 0; k < eval_rows.size(); ++k) {
    result.predictions.push_back(Prediction{corpus.samples[eval_rows[k]].id, gold[k], pred[k]});
  }
  return result;
}

void write_predictions(std::span<const Prediction> predictions, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "id\tgold\tpred\n";
  for (const auto& p : predictions) out << p.id << '\t' << p.gold << '\t' << p.pred << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<Prediction> read_predictions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "id\tgold\tpred") throw DataError(path.string() + ": bad header");
  std::vector<Prediction> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_on(line, '\t');
    if (f.size() != 3) throw DataError(path.string() + ": expected 3 columns");
    out.push_back(Prediction{f[0], f[1], f[2]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

SweepResult group_systems(std::vector<RunResult> runs, double alpha) {
  SweepResult result;
  if (runs.empty()) return result;
  const auto& ref = runs.front();
  std::vector<std::string> gold;
  for (const auto& p : ref.predictions) gold.push_back(p.gold);
  std::vector<std::vector<std::string>> preds;
  for (const auto& run : runs) {
    if (run.eval_on != ref.eval_on || run.predictions.size() != ref.predictions.size()) {
      throw ConfigError("sweep: '" + run.config_id + "' evaluates on a different split than '" + ref.config_id + "'");
    }
    std::vector<std::string> p;
    for (std::size_t i = 0; i < run.predictions.size(); ++i) {
      if (run.predictions[i].id != ref.predictions[i].id || run.predictions[i].gold != gold[i]) {
        throw ConfigError("sweep: '" + run.config_id + "' evaluates on different samples than '" +
                          ref.config_id + "'");
      }
      p.push_back(run.predictions[i].pred);
    }
    preds.push_back(std::move(p));
  }

  std::vector<std::size_t> order(runs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return runs[a].report.macro_f1 > runs[b].report.macro_f1;
  });

  std::size_t group = 1;
  std::size_t leader = order.front();
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const std::size_t i = order[rank];
    if (rank > 0 && mcnemar(preds[leader], preds[i], gold, alpha).significant) {
      ++group;
      leader = i;
    }
    result.rows.push_back(SweepRow{i, runs[i].config_id, runs[i].report.accuracy, runs[i].report.macro_f1, group});
  }
  result.runs = std::move(runs);
  return result;
}

SweepResult sweep(std::span<const ExperimentConfig> configs, double alpha, const Logger& log) {
  if (configs.empty()) throw ConfigError("sweep: no configs");
  for (const auto& c : configs) {
    if (c.eval_on != configs.front().eval_on) {
      throw ConfigError("sweep: '" + c.id() + "' evaluates on " + std::string(to_string(c.eval_on)) + ", not " +
                        std::string(to_string(configs.front().eval_on)));
    }
  }
  std::vector<RunResult> runs;
  for (const auto& c : configs) {
    if (log) log("running " + c.id());
    runs.push_back(run_experiment(c, log));
  }
  return group_systems(std::move(runs), alpha);
}

void write_sweep_table(const SweepResult& result, std::ostream& out) {
  char buf[64];
  out << "rank\tgroup\taccuracy\tmacro_f1\tconfig\n";
  for (std::size_t r = 0; r < result.rows.size(); ++r) {
    const auto& row = result.rows[r];
    std::snprintf(buf, sizeof buf, "%zu\t%zu\t%.6f\t%.6f\t", r + 1, row.group, row.accuracy, row.macro_f1);
    out << buf << row.config_id << '\n';
  }
}

TuneResult tune_sigma(const ExperimentConfig& base, std::span<const double> grid, SigmaTarget target,
                      const Logger& log) {
  if (grid.empty()) throw ConfigError("tune_sigma: empty sigma grid");
  for (double s : grid) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("tune_sigma: sigma values must be positive");
  }
  auto targeted = [target](const KernelSpec& k) {
    if (!k.sigma) return false;
    if (target == SigmaTarget::string) return k.is_string_kernel();
    if (target == SigmaTarget::ivec) return !k.is_string_kernel();
    return true;
  };
  if (std::none_of(base.kernel.begin(), base.kernel.end(), targeted)) {
    throw ConfigError("tune_sigma: '" + format_kernel_expression(base.kernel) + "' has no sigma-bearing kernel");
  }
  std::vector<double> sigmas(grid.begin(), grid.end());
  std::sort(sigmas.begin(), sigmas.end());
  sigmas.erase(std::unique(sigmas.begin(), sigmas.end()), sigmas.end());

  TuneResult result;
  double best_f1 = -1.0;
  for (double sigma : sigmas) {
    ExperimentConfig c = base;
    c.train_on = {Split::train};
    c.eval_on = Split::dev;
    for (auto& k : c.kernel) {
      if (targeted(k)) k.sigma = sigma;
    }
    if (log) log("sigma = " + std::to_string(sigma));
    const RunResult run = run_experiment(c, log);
    result.scores.push_back(SigmaScore{sigma, run.report.accuracy, run.report.macro_f1});
    if (run.report.macro_f1 > best_f1) {
      best_f1 = run.report.macro_f1;
      result.best_sigma = sigma;
    }
  }
  return result;
}

}  // namespace nli
