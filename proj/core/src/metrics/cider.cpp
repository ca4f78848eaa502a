#include "memetrn/metrics/cider.hpp"

#include <cmath>
#include <map>
#include <set>

#include "memetrn/errors.hpp"
#include "memetrn/text/vocab.hpp"

namespace memetrn::metrics {
namespace {

constexpr char kSep = '\x1f';

std::string key_of(const Tokens& words, std::size_t begin, std::size_t n) {
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) key += kSep;
    key += words[begin + i];
  }
  return key;
}

// Ordered map keeps floating-point summation order independent of hashing.
std::map<std::string, double> ngram_counts(const Tokens& words, std::size_t n) {
  std::map<std::string, double> counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) counts[key_of(words, i, n)] += 1.0;
  return counts;
}

struct TfIdf {
  std::map<std::string, double> weights;
  double norm = 0.0;
};

TfIdf tfidf(const std::map<std::string, double>& counts, std::size_t n, const IdfTable& idf) {
  TfIdf v;
  double total = 0.0;
  for (const auto& [k, c] : counts) total += c;
  if (total == 0.0) return v;
  double sq = 0.0;
  for (const auto& [k, c] : counts) {
    const double w = (c / total) * idf.idf_key(n, k);
    v.weights.emplace(k, w);
    sq += w * w;
  }
  v.norm = std::sqrt(sq);
  return v;
}

}  // namespace

Tokens caption_words(std::string_view caption) { return text::normalize_words(caption); }

std::size_t IdfTable::df(const Tokens& ngram) const {
  if (ngram.empty() || ngram.size() > kMaxNgram) return 0;
  const auto& table = df_[ngram.size() - 1];
  auto it = table.find(key_of(ngram, 0, ngram.size()));
  return it == table.end() ? 0 : it->second;
}

double IdfTable::idf(const Tokens& ngram) const {
  if (ngram.empty() || ngram.size() > kMaxNgram) throw InputError("idf: n-gram order must be 1..4");
  return idf_key(ngram.size(), key_of(ngram, 0, ngram.size()));
}

double IdfTable::idf_key(std::size_t n, const std::string& key) const {
  const auto& table = df_[n - 1];
  auto it = table.find(key);
  const double df = it == table.end() ? 1.0 : static_cast<double>(it->second);
  return std::log(static_cast<double>(corpus_size_) / df);
}

IdfTable compute_idf(const std::vector<std::vector<Tokens>>& references) {
  if (references.empty()) throw InputError("compute_idf: empty reference corpus");
  IdfTable t;
  t.corpus_size_ = references.size();
  for (const auto& image_refs : references) {
    for (std::size_t n = 1; n <= kMaxNgram; ++n) {
      std::set<std::string> present;
      for (const auto& ref : image_refs) {
        for (std::size_t i = 0; i + n <= ref.size(); ++i) present.insert(key_of(ref, i, n));
      }
      for (const auto& k : present) ++t.df_[n - 1][k];
    }
  }
  return t;
}

double cider_d(const Tokens& candidate, const std::vector<Tokens>& references, const IdfTable& idf,
               const CiderOptions& options) {
  if (references.empty()) return 0.0;
  const bool dvariant = options.variant == CiderVariant::CiderD;
  double total = 0.0;
  for (std::size_t n = 1; n <= kMaxNgram; ++n) {
    const TfIdf cand = tfidf(ngram_counts(candidate, n), n, idf);
    double per_n = 0.0;
    for (const auto& ref : references) {
      const TfIdf rv = tfidf(ngram_counts(ref, n), n, idf);
      if (cand.norm == 0.0 || rv.norm == 0.0) continue;
      double num = 0.0;
      for (const auto& [k, wc] : cand.weights) {
        auto it = rv.weights.find(k);
        if (it == rv.weights.end()) continue;
        num += (dvariant ? std::min(wc, it->second) : wc) * it->second;
      }
      double sim = num / (cand.norm * rv.norm);
      if (dvariant) {
        const double delta = static_cast<double>(candidate.size()) - static_cast<double>(ref.size());
        sim *= std::exp(-(delta * delta) / (2.0 * options.sigma * options.sigma));
      }
      per_n += sim;
    }
    total += per_n / static_cast<double>(references.size());
  }
  const double score = total / static_cast<double>(kMaxNgram);
  return dvariant ? 10.0 * score : score;
}

double corpus_cider(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references,
                    const IdfTable& idf, const CiderOptions& options) {
  if (candidates.size() != references.size()) {
    throw InputError("corpus_cider: " + std::to_string(candidates.size()) + " candidates for " +
                     std::to_string(references.size()) + " reference sets");
  }
  if (candidates.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) sum += cider_d(candidates[i], references[i], idf, options);
  return sum / static_cast<double>(candidates.size());
}

}  // namespace memetrn::metrics
