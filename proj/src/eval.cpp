#include "nli/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "nli/error.hpp"

namespace nli {

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t t = 0;
  for (const auto& row : counts) {
    for (auto v : row) t += v;
  }
  return t;
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
  return t;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::vector<std::size_t> indices(std::span<const std::string> labels,
                                 const std::unordered_map<std::string, std::size_t>& lookup, const char* what) {
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = lookup.find(labels[i]);
    if (it == lookup.end()) {
      throw LabelError(std::string(what) + " label '" + labels[i] + "' at position " + std::to_string(i) +
                       " is not a known class");
    }
    out.push_back(it->second);
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

// Two-sided exact binomial p-value for k successes out of n at p = 0.5, k <= n/2.
double binomial_two_sided(std::size_t k, std::size_t n) {
  if (n == 0) return 1.0;
  double tail = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
                     static_cast<double>(n) * std::log(2.0));
  }
  return std::min(1.0, 2.0 * tail);
}

}  // namespace

EvalReport evaluate(std::span<const std::string> pred, std::span<const std::string> gold,
                    std::span<const std::string> classes) {
  if (pred.size() != gold.size()) {
    throw ContractError("evaluate: " + std::to_string(pred.size()) + " predictions for " +
                        std::to_string(gold.size()) + " gold labels");
  }
  if (gold.empty()) throw ContractError("evaluate: nothing to score");
  std::unordered_map<std::string, std::size_t> lookup;
  for (std::size_t c = 0; c < classes.size(); ++c) lookup.emplace(classes[c], c);
  const auto p = indices(pred, lookup, "predicted");
  const auto g = indices(gold, lookup, "gold");

  const std::size_t k = classes.size();
  EvalReport r;
  r.n = gold.size();
  r.confusion.classes.assign(classes.begin(), classes.end());
  r.confusion.counts.assign(k, std::vector<std::uint64_t>(k, 0));
  for (std::size_t i = 0; i < r.n; ++i) ++r.confusion.counts[g[i]][p[i]];

  r.accuracy = ratio(r.confusion.trace(), r.n);
  double f1_sum = 0.0, weighted = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t tp = r.confusion.counts[c][c], gold_c = 0, pred_c = 0;
    for (std::size_t o = 0; o < k; ++o) {
      gold_c += r.confusion.counts[c][o];
      pred_c += r.confusion.counts[o][c];
    }
    ClassScores s;
    s.name = classes[c];
    s.precision = ratio(tp, pred_c);
    s.recall = ratio(tp, gold_c);
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    s.support = gold_c;
    f1_sum += s.f1;
    weighted += s.f1 * static_cast<double>(gold_c);
    r.per_class.push_back(std::move(s));
  }
  r.macro_f1 = k == 0 ? 0.0 : f1_sum / static_cast<double>(k);
  r.weighted_f1 = weighted / static_cast<double>(r.n);
  return r;
}

McNemarResult mcnemar(std::span<const std::string> pred_a, std::span<const std::string> pred_b,
                      std::span<const std::string> gold, double alpha) {
  if (pred_a.size() != gold.size() || pred_b.size() != gold.size()) {
    throw ContractError("mcnemar: prediction and gold lengths differ");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("mcnemar: alpha must be in (0, 1)");
  McNemarResult r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool a = pred_a[i] == gold[i];
    const bool b = pred_b[i] == gold[i];
    if (a && !b) ++r.a_only;
    if (!a && b) ++r.b_only;
  }
  const std::size_t discordant = r.a_only + r.b_only;
  if (discordant < 25) {
    r.exact = true;
    r.statistic = static_cast<double>(std::min(r.a_only, r.b_only));
    r.p_value = binomial_two_sided(std::min(r.a_only, r.b_only), discordant);
  } else {
    r.exact = false;
    const double diff = std::abs(static_cast<double>(r.a_only) - static_cast<double>(r.b_only)) - 1.0;
    r.statistic = diff * diff / static_cast<double>(discordant);
    // Survival function of chi-square with one degree of freedom.
    r.p_value = std::erfc(std::sqrt(r.statistic / 2.0));
  }
  r.significant = r.p_value < alpha;
  return r;
}

void write_confusion_csv(const ConfusionMatrix& confusion, std::ostream& out) {
  out << "gold";
  for (const auto& c : confusion.classes) out << ',' << csv_field(c);
  out << '\n';
  for (std::size_t i = 0; i < confusion.classes.size(); ++i) {
    out << csv_field(confusion.classes[i]);
    for (auto v : confusion.counts[i]) out << ',' << v;
    out << '\n';
  }
}

void export_confusion(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_confusion_csv(report.confusion, out);
  if (!out) throw DataError("write failed: " + path.string());
}

ConfusionMatrix read_confusion(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty confusion file");
  auto header = parse_csv_line(line);
  ConfusionMatrix m;
  m.classes.assign(header.begin() + 1, header.end());
  const std::size_t k = m.classes.size();
  for (std::size_t i = 0; i < k; ++i) {
    if (!std::getline(in, line)) throw DataError(path.string() + ": missing row " + std::to_string(i + 1));
    auto fields = parse_csv_line(line);
    if (fields.size() != k + 1 || fields[0] != m.classes[i]) {
      throw DataError(path.string() + ": malformed row for class '" + m.classes[i] + "'");
    }
    std::vector<std::uint64_t> row;
    for (std::size_t j = 1; j <= k; ++j) row.push_back(std::stoull(fields[j]));
    m.counts.push_back(std::move(row));
  }
  return m;
}

void write_report(const EvalReport& report, std::ostream& out) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  out << "n: " << report.n << '\n';
  out << "accuracy: " << num(report.accuracy) << '\n';
  out << "macro_f1: " << num(report.macro_f1) << '\n';
  out << "weighted_f1: " << num(report.weighted_f1) << '\n';
  out << "per_class:\n";
  out << "class,precision,recall,f1,support\n";
  for (const auto& c : report.per_class) {
    out << csv_field(c.name) << ',' << num(c.precision) << ',' << num(c.recall) << ',' << num(c.f1) << ','
        << c.support << '\n';
  }
  out << "confusion:\n";
  write_confusion_csv(report.confusion, out);
}

}  // namespace nli
