#include "nli/corpus.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "nli/error.hpp"
#include "nli/hash.hpp"
#include "nli/text.hpp"

namespace nli {

namespace fs = std::filesystem;

std::string_view to_string(Modality m) noexcept {
  switch (m) {
    case Modality::essay: return "essay";
    case Modality::transcript: return "transcript";
    case Modality::audio: return "audio";
  }
  return "?";
}

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

Modality parse_modality(std::string_view s) {
  if (s == "essay") return Modality::essay;
  if (s == "transcript") return Modality::transcript;
  if (s == "audio") return Modality::audio;
  throw ConfigError("unknown modality '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(s) + "'");
}

bool Corpus::has(Modality m) const noexcept {
  switch (m) {
    case Modality::essay: return !essays.empty();
    case Modality::transcript: return !transcripts.empty();
    case Modality::audio: return !vectors.empty();
  }
  return false;
}

const std::vector<Document>& Corpus::documents(Modality m) const {
  switch (m) {
    case Modality::essay: return essays;
    case Modality::transcript: return transcripts;
    case Modality::audio: break;
  }
  throw ContractError("audio modality has no documents");
}

std::size_t Corpus::class_index(std::string_view label) const {
  auto it = std::find(classes.begin(), classes.end(), label);
  if (it == classes.end()) throw LabelError("label '" + std::string(label) + "' not in class list");
  return static_cast<std::size_t>(it - classes.begin());
}

LoadOptions LoadOptions::only(std::initializer_list<Modality> modalities, bool lowercase) {
  LoadOptions o{false, false, false, lowercase};
  for (Modality m : modalities) {
    if (m == Modality::essay) o.essays = true;
    if (m == Modality::transcript) o.transcripts = true;
    if (m == Modality::audio) o.vectors = true;
  }
  return o;
}

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
    parts.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::vector<std::string> lines_of(const std::string& content) {
  std::vector<std::string> lines = split_on(content, '\n');
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  return lines;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

struct Manifest {
  std::vector<std::string> classes;
  std::vector<std::pair<Split, fs::path>> splits;
  std::optional<fs::path> essays;
  std::optional<fs::path> transcripts;
  std::optional<fs::path> vectors;
};

Manifest parse_manifest(const fs::path& path) {
  const std::string content = read_file(path);
  const fs::path base = path.parent_path();
  Manifest m;
  bool have_classes = false;
  int line_no = 0;
  for (const auto& raw : lines_of(content)) {
    ++line_no;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "classes") {
      for (auto& c : split_on(value, ',')) {
        std::string name = trim(c);
        if (name.empty()) continue;
        if (std::find(m.classes.begin(), m.classes.end(), name) != m.classes.end()) {
          throw ConfigError(path.string() + ": duplicate class '" + name + "'");
        }
        m.classes.push_back(name);
      }
      have_classes = true;
    } else if (key.starts_with("split.")) {
      m.splits.emplace_back(parse_split(key.substr(6)), base / value);
    } else if (key == "text.essay") {
      m.essays = base / value;
    } else if (key == "text.transcript") {
      m.transcripts = base / value;
    } else if (key == "vectors") {
      m.vectors = base / value;
    } else {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (!have_classes || m.classes.empty()) throw ConfigError(path.string() + ": missing classes");
  if (m.splits.empty()) throw ConfigError(path.string() + ": no split files listed");
  return m;
}

double parse_double(std::string_view text, const std::string& where) {
  std::string t = trim(text);
  double v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw DataError(where + ": not a number '" + t + "'");
  }
  if (!std::isfinite(v)) throw DataError(where + ": non-finite value");
  return v;
}

std::vector<Document> load_texts(const fs::path& dir, Modality modality,
                                 const std::vector<Sample>& samples, bool lowercase) {
  if (!fs::is_directory(dir)) throw MissingFileError("text directory not found: " + dir.string());
  std::vector<Document> docs;
  docs.reserve(samples.size());
  for (const auto& s : samples) {
    const fs::path file = dir / (s.id + ".txt");
    if (!fs::exists(file)) {
      throw MissingFileError(std::string(to_string(modality)) + " text missing for id '" + s.id +
                             "' (" + file.string() + ")");
    }
    std::u32string text;
    try {
      text = normalize_whitespace(decode_utf8(read_file(file)));
    } catch (const DecodeError& e) {
      throw DecodeError(e.offset(), "in " + file.string());
    }
    if (lowercase) text = to_lower(text);
    docs.push_back(Document{s.id, modality, std::move(text), s.label, s.split});
  }
  return docs;
}

std::vector<FeatureVector> load_vectors(const fs::path& path, const std::vector<Sample>& samples) {
  const std::string content = read_file(path);
  std::unordered_map<std::string, std::vector<double>> by_id;
  std::size_t dim = 0;
  std::string first_id;
  int line_no = 0;
  for (const auto& line : lines_of(content)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_on(line, ',');
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    std::string id = trim(fields[0]);
    if (fields.size() < 2) throw DataError(where + ": vector for '" + id + "' has no values");
    std::vector<double> values;
    values.reserve(fields.size() - 1);
    for (std::size_t k = 1; k < fields.size(); ++k) values.push_back(parse_double(fields[k], where));
    if (dim == 0) {
      dim = values.size();
      first_id = id;
    } else if (values.size() != dim) {
      throw DimensionMismatchError(where + ": vector '" + id + "' has dimension " +
                                   std::to_string(values.size()) + ", expected " +
                                   std::to_string(dim) + " (from '" + first_id + "')");
    }
    if (!by_id.emplace(id, std::move(values)).second) {
      throw DuplicateIdError(where + ": duplicate vector id '" + id + "'");
    }
  }
  std::vector<FeatureVector> vectors;
  vectors.reserve(samples.size());
  for (const auto& s : samples) {
    auto it = by_id.find(s.id);
    if (it == by_id.end()) throw MissingFileError("no feature vector for id '" + s.id + "'");
    vectors.push_back(FeatureVector{s.id, std::move(it->second), s.label, s.split});
    by_id.erase(it);
  }
  if (!by_id.empty()) {
    std::vector<std::string> extra;
    for (auto& kv : by_id) extra.push_back(kv.first);
    std::sort(extra.begin(), extra.end());
    throw DataError(path.filename().string() + ": vector id '" + extra.front() +
                    "' is not listed in any split");
  }
  return vectors;
}

}  // namespace

Corpus load_corpus(const fs::path& manifest_path, const LoadOptions& options) {
  const Manifest manifest = parse_manifest(manifest_path);
  Corpus corpus;
  corpus.classes = manifest.classes;

  std::set<std::string> seen;
  for (const auto& [split, file] : manifest.splits) {
    const std::string content = read_file(file);
    int line_no = 0;
    for (const auto& line : lines_of(content)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const std::string where = file.filename().string() + ":" + std::to_string(line_no);
      auto fields = split_on(line, '\t');
      if (fields.size() != 2) throw DataError(where + ": expected id<TAB>label");
      Sample s{trim(fields[0]), trim(fields[1]), split};
      if (s.id.empty()) throw DataError(where + ": empty id");
      if (std::find(corpus.classes.begin(), corpus.classes.end(), s.label) == corpus.classes.end()) {
        throw LabelError(where + ": id '" + s.id + "' has label '" + s.label +
                         "' which is not in the class list");
      }
      if (!seen.insert(s.id).second) throw DuplicateIdError(where + ": duplicate id '" + s.id + "'");
      corpus.samples.push_back(std::move(s));
    }
  }
  std::sort(corpus.samples.begin(), corpus.samples.end(),
            [](const Sample& a, const Sample& b) { return a.id < b.id; });

  if (options.essays && manifest.essays) {
    corpus.essays = load_texts(*manifest.essays, Modality::essay, corpus.samples, options.lowercase);
  }
  if (options.transcripts && manifest.transcripts) {
    corpus.transcripts =
        load_texts(*manifest.transcripts, Modality::transcript, corpus.samples, options.lowercase);
  }
  if (options.vectors && manifest.vectors) {
    corpus.vectors = load_vectors(*manifest.vectors, corpus.samples);
  }
  corpus.provenance.manifest = manifest_path;
  corpus.provenance.checksum = content_checksum(corpus);
  return corpus;
}

std::uint64_t content_checksum(const Corpus& corpus) {
  Fnv1a h;
  h.update("classes");
  for (const auto& c : corpus.classes) h.update(c).update_u64(0);
  h.update("samples");
  for (const auto& s : corpus.samples) {
    h.update(s.id).update_u64(0).update(s.label).update_u64(static_cast<std::uint64_t>(s.split));
  }
  for (const auto* docs : {&corpus.essays, &corpus.transcripts}) {
    h.update("docs").update_u64(docs->size());
    for (const auto& d : *docs) h.update(encode_utf8(d.text)).update_u64(d.text.size());
  }
  h.update("vectors").update_u64(corpus.vectors.size());
  for (const auto& v : corpus.vectors) {
    for (double x : v.values) h.update_u64(std::bit_cast<std::uint64_t>(x));
    h.update_u64(v.values.size());
  }
  return h.digest();
}

fs::path write_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  std::ostringstream manifest;
  manifest << "# corpus manifest\nclasses = ";
  for (std::size_t i = 0; i < corpus.classes.size(); ++i) {
    manifest << (i ? ", " : "") << corpus.classes[i];
  }
  manifest << "\n";
  for (Split split : {Split::train, Split::dev, Split::test}) {
    std::string tsv;
    for (const auto& s : corpus.samples) {
      if (s.split == split) tsv += s.id + "\t" + s.label + "\n";
    }
    const std::string name = std::string(to_string(split)) + ".tsv";
    write_file(dir / name, tsv);
    manifest << "split." << to_string(split) << " = " << name << "\n";
  }
  for (Modality m : {Modality::essay, Modality::transcript}) {
    if (!corpus.has(m)) continue;
    const std::string sub = std::string(to_string(m)) + "s";
    fs::create_directories(dir / sub);
    for (const auto& d : corpus.documents(m)) write_file(dir / sub / (d.id + ".txt"), encode_utf8(d.text));
    manifest << "text." << to_string(m) << " = " << sub << "\n";
  }
  if (!corpus.vectors.empty()) {
    std::string csv;
    char buf[32];
    for (const auto& v : corpus.vectors) {
      csv += v.id;
      for (double x : v.values) {
        std::snprintf(buf, sizeof buf, ",%.17g", x);
        csv += buf;
      }
      csv += "\n";
    }
    write_file(dir / "ivectors.csv", csv);
    manifest << "vectors = ivectors.csv\n";
  }
  const fs::path manifest_path = dir / "manifest.txt";
  write_file(manifest_path, manifest.str());
  return manifest_path;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

constexpr std::u32string_view kAlphabet = U"aeioustnrlmdh ";
constexpr std::size_t kStates = kAlphabet.size();
constexpr std::size_t kSpace = kStates - 1;

// std::*_distribution output is implementation-defined; these are not.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double standard_normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  return std::mt19937_64(mix64(seed ^ mix64(a ^ mix64(b ^ mix64(c + 0x5bd1e995ULL)))));
}

using Table = std::array<std::array<double, kStates>, kStates>;

Table random_table(std::mt19937_64& rng) {
  Table t{};
  for (auto& row : t) {
    for (auto& w : row) {
      double u = uniform01(rng);
      w = -std::log(u > 0 ? u : 0x1.0p-53);
    }
  }
  return t;
}

Table mix_tables(const Table& shared, const Table& own, double signal) {
  Table t{};
  for (std::size_t i = 0; i < kStates; ++i) {
    double total = 0;
    for (std::size_t j = 0; j < kStates; ++j) {
      t[i][j] = (1.0 - signal) * shared[i][j] + signal * own[i][j];
      if (i == kSpace && j == kSpace) t[i][j] = 0.0;
      total += t[i][j];
    }
    for (auto& w : t[i]) w /= total;
  }
  return t;
}

std::size_t sample_row(const std::array<double, kStates>& row, std::mt19937_64& rng, bool allow_space) {
  double total = 0;
  for (std::size_t j = 0; j < kStates; ++j) total += (allow_space || j != kSpace) ? row[j] : 0.0;
  double u = uniform01(rng) * total;
  std::size_t last = 0;
  for (std::size_t j = 0; j < kStates; ++j) {
    if (!allow_space && j == kSpace) continue;
    last = j;
    if (u < row[j]) return j;
    u -= row[j];
  }
  return last;
}

std::u32string sample_text(const Table& t, std::size_t length, std::mt19937_64& rng) {
  std::u32string s;
  s.reserve(length);
  std::size_t state = static_cast<std::size_t>(uniform01(rng) * (kStates - 1));
  for (std::size_t k = 0; k < length; ++k) {
    if (k > 0) state = sample_row(t[state], rng, k + 1 < length);
    s.push_back(kAlphabet[state]);
  }
  return s;
}

std::string class_name(std::size_t c, std::size_t count) {
  const int width = count > 10 ? 2 : 1;
  char buf[16];
  std::snprintf(buf, sizeof buf, "c%0*zu", width, c);
  return buf;
}

}  // namespace

Corpus generate_synthetic_corpus(const SyntheticOptions& o) {
  if (o.num_classes < 1 || o.docs_per_class < 1 || o.doc_length < 1 || o.vector_dim < 1) {
    throw ContractError("synthetic corpus counts must all be >= 1");
  }
  if (o.test_fraction < 0 || o.dev_fraction < 0 || o.test_fraction + o.dev_fraction >= 1.0) {
    throw ContractError("synthetic split fractions must be non-negative and sum below 1");
  }
  const auto n_test = static_cast<std::size_t>(std::lround(o.docs_per_class * o.test_fraction));
  const auto n_dev = static_cast<std::size_t>(std::lround(o.docs_per_class * o.dev_fraction));
  const std::size_t n_train = o.docs_per_class - std::min(o.docs_per_class, n_test + n_dev);

  Corpus corpus;
  for (std::size_t c = 0; c < o.num_classes; ++c) corpus.classes.push_back(class_name(c, o.num_classes));

  auto shared_rng = stream(o.seed, 1);
  const Table shared = random_table(shared_rng);
  auto shared_speech_rng = stream(o.seed, 2);
  const Table shared_speech = random_table(shared_speech_rng);

  std::vector<Table> essay_tables, speech_tables;
  std::vector<std::vector<double>> means;
  for (std::size_t c = 0; c < o.num_classes; ++c) {
    auto rng = stream(o.seed, 3, c);
    essay_tables.push_back(mix_tables(shared, random_table(rng), o.class_signal));
    speech_tables.push_back(mix_tables(shared_speech, random_table(rng), 0.5 * o.class_signal));
    std::vector<double> mean(o.vector_dim);
    double norm = 0;
    for (auto& x : mean) {
      x = standard_normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : mean) x /= norm;
    means.push_back(std::move(mean));
  }

  const std::size_t total = o.num_classes * o.docs_per_class;
  for (std::size_t index = 0; index < total; ++index) {
    const std::size_t c = index % o.num_classes;
    const std::size_t k = index / o.num_classes;
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%06zu", index);
    const Split split = k < n_train ? Split::train : (k < n_train + n_dev ? Split::dev : Split::test);
    Sample sample{buf, corpus.classes[c], split};

    auto rng = stream(o.seed, 4, c, k);
    corpus.essays.push_back(Document{sample.id, Modality::essay,
                                     normalize_whitespace(sample_text(essay_tables[c], o.doc_length, rng)),
                                     sample.label, split});
    if (o.with_transcripts) {
      const std::size_t len = std::max<std::size_t>(1, o.doc_length / 2);
      corpus.transcripts.push_back(Document{sample.id, Modality::transcript,
                                            normalize_whitespace(sample_text(speech_tables[c], len, rng)),
                                            sample.label, split});
    }
    std::vector<double> values(means[c]);
    for (auto& x : values) x += o.vector_noise * standard_normal(rng);
    corpus.vectors.push_back(FeatureVector{sample.id, std::move(values), sample.label, split});
    corpus.samples.push_back(std::move(sample));
  }
  corpus.provenance.checksum = content_checksum(corpus);
  return corpus;
}

Corpus generate_synthetic_corpus(std::size_t num_classes, std::size_t docs_per_class,
                                 std::size_t doc_length, std::size_t vector_dim, std::uint64_t seed) {
  SyntheticOptions o;
  o.num_classes = num_classes;
  o.docs_per_class = docs_per_class;
  o.doc_length = doc_length;
  o.vector_dim = vector_dim;
  o.seed = seed;
  return generate_synthetic_corpus(o);
}

}  // namespace nli
