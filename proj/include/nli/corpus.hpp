#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nli {

enum class Modality { essay, transcript, audio };
enum class Split { train, dev, test };

std::string_view to_string(Modality m) noexcept;
std::string_view to_string(Split s) noexcept;
Modality parse_modality(std::string_view s);
Split parse_split(std::string_view s);

/// One sample as declared by the split files.
struct Sample {
  std::string id;
  std::string label;
  Split split = Split::train;

  bool operator==(const Sample&) const = default;
};

/// One text sample. `text` is whitespace-normalized code points.
struct Document {
  std::string id;
  Modality modality = Modality::essay;
  std::u32string text;
  std::string label;
  Split split = Split::train;

  bool operator==(const Document&) const = default;
};

struct FeatureVector {
  std::string id;
  std::vector<double> values;
  std::string label;
  Split split = Split::train;

  bool operator==(const FeatureVector&) const = default;
};

struct Provenance {
  std::filesystem::path manifest;  // empty for generated corpora
  std::uint64_t checksum = 0;

  bool operator==(const Provenance&) const = default;
};

/// A validated corpus. `samples` is sorted by id; every loaded modality holds
/// exactly one record per sample, in the same order.
struct Corpus {
  std::vector<std::string> classes;
  std::vector<Sample> samples;
  std::vector<Document> essays;
  std::vector<Document> transcripts;
  std::vector<FeatureVector> vectors;
  Provenance provenance;

  bool has(Modality m) const noexcept;
  const std::vector<Document>& documents(Modality m) const;
  std::size_t vector_dim() const noexcept { return vectors.empty() ? 0 : vectors.front().values.size(); }
  std::size_t class_index(std::string_view label) const;

  bool operator==(const Corpus&) const = default;
};

/// Which parts of a manifest to read. Parts not requested are never opened.
struct LoadOptions {
  bool essays = true;
  bool transcripts = true;
  bool vectors = true;
  bool lowercase = false;

  static LoadOptions only(std::initializer_list<Modality> modalities, bool lowercase = false);
};

/// Manifest format (one `key = value` per line, `#` comments):
///
///     classes = ARA, CHI, FRE
///     split.train = train.tsv        # id<TAB>label per line
///     split.dev = dev.tsv
///     split.test = test.tsv
///     text.essay = essays            # <dir>/<id>.txt, UTF-8
///     text.transcript = transcripts
///     vectors = ivectors.csv         # id,v1,...,vm
///
/// Paths are relative to the manifest's directory. Split, text and vector
/// entries are optional, but at least one split must be present.
Corpus load_corpus(const std::filesystem::path& manifest, const LoadOptions& options = {});

/// Writes `corpus` as a manifest directory readable by load_corpus.
std::filesystem::path write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Canonical content hash over classes, samples, texts and vectors.
std::uint64_t content_checksum(const Corpus& corpus);

struct SyntheticOptions {
  std::size_t num_classes = 2;
  std::size_t docs_per_class = 10;
  std::size_t doc_length = 200;
  std::size_t vector_dim = 8;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  double dev_fraction = 0.0;
  bool with_transcripts = false;
  // Weight of the class-specific transition table against the shared one.
  double class_signal = 0.2;
  double vector_noise = 0.25;
};

/// Each class is an order-1 character Markov chain mixing a shared table with
/// a class table; vectors are unit-norm class means plus Gaussian noise.
/// Identical options give bit-identical corpora.
Corpus generate_synthetic_corpus(const SyntheticOptions& options);
Corpus generate_synthetic_corpus(std::size_t num_classes, std::size_t docs_per_class,
                                 std::size_t doc_length, std::size_t vector_dim, std::uint64_t seed);

}  // namespace nli
