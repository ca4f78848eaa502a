#include <doctest.h>

#include <cmath>

#include "memetrn/errors.hpp"
#include "memetrn/metrics/cider.hpp"
#include "memetrn/metrics/classification.hpp"
#include "memetrn/numerics/rng.hpp"
#include "support/metric_oracles.hpp"

using namespace memetrn;
using namespace memetrn::metrics;

using namespace memetrn::testing;

TEST_CASE("idf closed forms") {
  const std::vector<std::vector<Tokens>> one{{{"a", "cat"}}};
  CHECK(compute_idf(one).idf({"cat"}) == 0.0);
  const std::vector<std::vector<Tokens>> four{{{"a", "cat"}}, {{"a", "dog"}}, {{"a", "cow"}}, {{"a", "hen"}}};
  const IdfTable t = compute_idf(four);
  CHECK(t.idf({"a"}) == 0.0);
  CHECK(t.idf({"cat"}) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK(t.df({"a", "cat"}) == 1);
  CHECK(t.df({"zebra"}) == 0);
  CHECK_THROWS_AS(compute_idf({}), InputError);
}

TEST_CASE("idf table matches a brute-force recount") {
  Rng rng(3, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto corpus = random_corpus(rng);
    const IdfTable t = compute_idf(corpus);
    for (std::size_t n = 1; n <= 4; ++n) {
      for (const auto& refs : corpus) {
        for (const auto& r : refs) {
          for (const auto& g : naive::grams(r, n)) {
            const double d = naive::df(corpus, g);
            CHECK(t.df(g) == static_cast<std::size_t>(d));
            CHECK(t.df(g) >= 1);
            CHECK(t.df(g) <= corpus.size());
          }
        }
      }
    }
  }
}

TEST_CASE("CIDEr-D degenerate cases") {
  const std::vector<std::vector<Tokens>> one{{{"a", "cat", "on", "a", "mat"}}};
  const IdfTable t1 = compute_idf(one);
  CHECK(cider_d({}, one[0], t1) == 0.0);
  CHECK(cider_d(one[0][0], one[0], t1) == 0.0);
  const std::vector<std::vector<Tokens>> two{{{"a", "cat", "on", "a", "mat"}}, {{"the", "dog"}}};
  const IdfTable t2 = compute_idf(two);
  CHECK(cider_d(two[0][0], two[0], t2) > 0.0);
  CHECK(cider_d({"zebra"}, two[0], t2) == 0.0);
}

TEST_CASE("CIDEr-D matches the brute-force oracle on 20 fuzzed corpora") {
  Rng rng(17, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto corpus = random_corpus(rng);
    const IdfTable t = compute_idf(corpus);
    for (std::size_t img = 0; img < corpus.size(); ++img) {
      for (int c = 0; c < 3; ++c) {
        const Tokens cand = c == 0 ? corpus[img][0] : random_sentence(rng, 9);
        CHECK(std::abs(cider_d(cand, corpus[img], t) - naive::cider_d(cand, corpus[img], corpus)) <= 1e-9);
      }
    }
  }
}

TEST_CASE("CIDEr-D is pure and invariant to reference order") {
  Rng rng(8, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto corpus = random_corpus(rng);
    const IdfTable t = compute_idf(corpus);
    const Tokens cand = random_sentence(rng, 8);
    auto refs = corpus[0];
    const double a = cider_d(cand, refs, t);
    CHECK(a == cider_d(cand, refs, t));
    std::reverse(refs.begin(), refs.end());
    CHECK(std::abs(a - cider_d(cand, refs, t)) <= 1e-12);
    CHECK(a >= 0.0);
  }
}

TEST_CASE("plain CIDEr variant differs from CIDEr-D") {
  const std::vector<std::vector<Tokens>> corpus{{{"a", "cat", "on", "a", "mat"}}, {{"the", "dog"}}};
  const IdfTable t = compute_idf(corpus);
  const Tokens cand{"cat", "cat", "cat", "mat"};
  const double plain = cider_d(cand, corpus[0], t, {CiderVariant::Cider, 6.0});
  const double dvar = cider_d(cand, corpus[0], t, {CiderVariant::CiderD, 6.0});
  CHECK(plain > 0.0);
  CHECK(dvar < 10.0 * plain);
  CHECK(corpus_cider({corpus[0][0], corpus[1][0]}, corpus, t) > 0.0);
  CHECK_THROWS_AS(corpus_cider({cand}, corpus, t), InputError);
}

TEST_CASE("AUROC closed forms and errors") {
  CHECK(auroc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
  CHECK(auroc(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{0, 1, 1}) == 0.5);
  CHECK(auroc(std::vector<double>{0.9, 0.1}, std::vector<int>{0, 1}) == 0.0);
  CHECK_THROWS_AS(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), EvaluationError);
  CHECK_THROWS_AS(auroc(std::vector<double>{0.1}, std::vector<int>{1, 0}), InputError);
}

TEST_CASE("AUROC matches the pairwise oracle on 200 fuzzed sets with ties") {
  Rng rng(99, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const std::size_t levels = 1 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 0;
    y[1] = 1;
    const double a = auroc(s, y);
    CHECK(std::abs(a - pairwise_auroc(s, y)) <= 1e-12);

    std::vector<double> t(n), neg(n);
    std::vector<int> flip(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = std::exp(3.0 * s[i]) - 7.0;
      neg[i] = -s[i];
      flip[i] = 1 - y[i];
    }
    CHECK(auroc(t, y) == a);
    CHECK(std::abs(auroc(neg, flip) - a) <= 1e-12);
  }
}

TEST_CASE("accuracy counts ties at the threshold as positive") {
  std::vector<ScoredSample> s{{"a", 0.5, 1}, {"b", 0.49, 0}, {"c", 0.5, 0}, {"d", 0.9, 1}};
  CHECK(accuracy(s) == 0.75);
  CHECK(accuracy(s, 0.95) == 0.5);
  CHECK_THROWS_AS(accuracy(std::vector<ScoredSample>{}), EvaluationError);
}
