// Micro-benchmarks for the hot paths: dense kernels on the tape, attention,
// a full detector training step, CIDEr-D, AUROC and WordPiece tokenisation.

#include <benchmark/benchmark.h>

#include <memory>
#include <string>
#include <vector>

#include "memetrn/metrics/cider.hpp"
#include "memetrn/metrics/classification.hpp"
#include "memetrn/numerics/ops.hpp"
#include "memetrn/numerics/rng.hpp"
#include "memetrn/numerics/tape.hpp"
#include "memetrn/pipeline/pipeline.hpp"
#include "memetrn/text/vocab.hpp"
#include "memetrn/trn/attention.hpp"

using namespace memetrn;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.normal();
  return Tensor({rows, cols}, std::move(v));
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_matrix(n, n, 1);
  const Tensor b = random_matrix(n, n, 2);
  for (auto _ : state) {
    Tape tape;
    Var x = tape.leaf(a);
    Var y = tape.leaf(b);
    Var loss = ops::sum(ops::matmul(x, y));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad(x));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(16)->Arg(32)->Arg(64);

void BM_SelfAttention(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t d = 32;
  ParameterStore store;
  trn::AttentionSublayer attn(store, "attn", d, 4, 0.02, 7);
  const Tensor input = random_matrix(len, d, 3);
  const Tensor allowed = Tensor::full({len, len}, 1.0);
  for (auto _ : state) {
    Tape tape;
    Var x = tape.constant(input);
    Var out = attn.forward(tape, x, x, allowed, 0.0);
    tape.backward(ops::sum(out));
    benchmark::DoNotOptimize(out.value());
  }
}
BENCHMARK(BM_SelfAttention)->Arg(16)->Arg(48);

struct DetectorFixture {
  pipeline::Detector detector;
  std::vector<embedding::InputSequence> batch;
};

DetectorFixture make_detector(trn::Variant variant) {
  pipeline::RunConfig cfg = pipeline::default_run_config();
  cfg.world.n_samples = 200;
  cfg.world.feature_dim = 16;
  cfg.world.regions_per_image = 4;
  cfg.world.gold_captions = true;
  cfg.model.variant = variant;
  cfg.model.d = 32;
  cfg.model.heads = 2;
  cfg.model.layers = 2;
  cfg.model.dropout = 0.0;
  cfg.model.feature_dim = 16;
  SyntheticWorld world = gen_synthetic(cfg.world);
  text::Vocab vocab = pipeline::corpus_vocab(world.train, world.captions, cfg.world, 1000);
  cfg.model.vocab_size = vocab.size();
  DetectorFixture f{pipeline::Detector{cfg, std::move(vocab), std::make_unique<trn::DetectorModel>(cfg.model)}, {}};
  for (std::size_t i = 0; i < 16; ++i) f.batch.push_back(f.detector.encode(world.train[i]));
  return f;
}

void BM_DetectorBatchStep(benchmark::State& state) {
  const auto variant = state.range(0) == 0 ? trn::Variant::OneStream : trn::Variant::TwoStream;
  DetectorFixture f = make_detector(variant);
  std::vector<std::size_t> labels(f.batch.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 2;
  for (auto _ : state) {
    Tape tape;
    Var loss = ops::cross_entropy(f.detector.model->batch_logits(tape, f.batch), labels);
    tape.backward(loss);
    f.detector.model->params().zero_grad();
  }
  state.SetLabel(state.range(0) == 0 ? "one-stream, batch 16" : "two-stream, batch 16");
}
BENCHMARK(BM_DetectorBatchStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_CorpusCider(benchmark::State& state) {
  const auto images = static_cast<std::size_t>(state.range(0));
  const std::vector<std::string> words = {"a", "dog", "cat", "beside", "near", "the", "tree", "car", "with", "flag"};
  Rng rng(5);
  auto sentence = [&] {
    metrics::Tokens t;
    for (std::size_t i = 0; i < 8; ++i) t.push_back(words[rng.below(words.size())]);
    return t;
  };
  std::vector<metrics::Tokens> candidates;
  std::vector<std::vector<metrics::Tokens>> references;
  for (std::size_t i = 0; i < images; ++i) {
    candidates.push_back(sentence());
    references.push_back({sentence(), sentence(), sentence(), sentence(), sentence()});
  }
  const metrics::IdfTable idf = metrics::compute_idf(references);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::corpus_cider(candidates, references, idf));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(images));
}
BENCHMARK(BM_CorpusCider)->Arg(200)->Arg(1000);

void BM_Auroc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(9);
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = rng.bernoulli(0.36) ? 1 : 0;
    scores[i] = rng.uniform() + 0.3 * labels[i];
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::auroc(scores, labels));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Auroc)->Arg(1000)->Arg(100000);

void BM_WordpieceTokenize(benchmark::State& state) {
  const std::vector<std::string> corpus = {
      "when the weekend finally arrives and the coffee machine breaks",
      "nobody: absolutely nobody: my cat at 3am knocking things over",
      "that feeling when your code compiles on the first try",
  };
  const text::Vocab vocab = text::build_vocab(corpus, 120);
  const std::string line = "unbelievably the weekendish coffee-machines break at 3am, nobody expected it!";
  for (auto _ : state) benchmark::DoNotOptimize(text::wordpiece_tokenize(line, vocab, 64));
}
BENCHMARK(BM_WordpieceTokenize);

}  // namespace
BENCHMARK_MAIN();
