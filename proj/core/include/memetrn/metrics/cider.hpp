#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace memetrn::metrics {

using Tokens = std::vector<std::string>;

inline constexpr std::size_t kMaxNgram = 4;

// Words of a caption after the text normaliser (lowercase, punctuation split).
Tokens caption_words(std::string_view caption);

// Document frequencies of 1..4-grams over a reference corpus, where a document
// is one image's whole reference set.
class IdfTable {
 public:
  std::size_t corpus_size() const { return corpus_size_; }
  // 0 when the n-gram never occurs.
  std::size_t df(const Tokens& ngram) const;
  // ln(|I| / max(df, 1)).
  double idf(const Tokens& ngram) const;
  std::size_t entries(std::size_t n) const { return df_.at(n - 1).size(); }

  // Keyed access used by the scorer; key joins words with '\x1f'.
  double idf_key(std::size_t n, const std::string& key) const;

 private:
  friend IdfTable compute_idf(const std::vector<std::vector<Tokens>>& references);
  std::array<std::unordered_map<std::string, std::size_t>, kMaxNgram> df_;
  std::size_t corpus_size_ = 0;
};

// references[i] holds every reference caption of image i.
IdfTable compute_idf(const std::vector<std::vector<Tokens>>& references);

enum class CiderVariant {
  // Plain consensus cosine, averaged over n.
  Cider,
  // Clipped numerator min(g_c, g_s) * g_s, Gaussian length penalty, x10.
  CiderD,
};

struct CiderOptions {
  CiderVariant variant = CiderVariant::CiderD;
  double sigma = 6.0;
};

// Consensus score of `candidate` against one image's references. Term
// frequencies are normalised by the candidate's (or reference's) n-gram total;
// a zero-norm vector makes that term 0.
double cider_d(const Tokens& candidate, const std::vector<Tokens>& references, const IdfTable& idf,
               const CiderOptions& options = {});

// Mean per-image score.
double corpus_cider(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references,
                    const IdfTable& idf, const CiderOptions& options = {});

}  // namespace memetrn::metrics
