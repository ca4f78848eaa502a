// Acceptance runner. Prints one PASS/FAIL line per criterion and exits 0 only
// when every selected criterion passes.
//
//   memetrn_acceptance            run criteria 1-9
//   memetrn_acceptance 3 7        run a subset

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "memetrn/captioner/captioner.hpp"
#include "memetrn/metrics/cider.hpp"
#include "memetrn/metrics/classification.hpp"
#include "memetrn/numerics/ops.hpp"
#include "memetrn/pipeline/pipeline.hpp"
#include "memetrn/trn/model.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/metric_oracles.hpp"

using namespace memetrn;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Pinned tolerances and thresholds

constexpr double kWholeModelGradTol = 1e-5;
constexpr double kPerOpGradTol = 1e-6;
constexpr double kCiderOracleTol = 1e-9;
constexpr double kAurocOracleTol = 1e-12;
constexpr double kScstTwoPathTol = 1e-9;
constexpr double kOverfitLoss = 0.01;
constexpr std::size_t kOverfitSteps = 500;
constexpr double kFusedMinAuroc = 0.85;
constexpr double kUnimodalMaxAuroc = 0.65;
constexpr double kCaptionMinGain = 0.05;
constexpr double kXeMinTokenAccuracy = 0.95;
constexpr double kTrainPositiveRate = 0.36;
constexpr double kTrainPositiveSlack = 0.01;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Gradient integrity

Var weighted_sum(Tape& tape, Var y, std::uint64_t seed) {
  return ops::sum(ops::mul(y, tape.constant(testing::random_tensor(y.shape(), seed))));
}

double per_op_max_error() {
  using testing::random_tensor;
  using Unary = std::function<Var(Var)>;
  using Binary = std::function<Var(Var, Var)>;
  Tensor positive = random_tensor({3, 4}, 4);
  for (double& v : positive.data()) v = std::abs(v) + 0.5;
  Tensor mask = Tensor::full({3, 4}, 1.0);
  mask(0, 1) = 0.0;
  mask(2, 3) = 0.0;
  const std::vector<std::size_t> rows{2, 0, 2, 1};
  const std::vector<std::size_t> cols{3, 0, 1};

  const std::vector<std::pair<Unary, Tensor>> unary = {
      {[](Var a) { return ops::gelu(a); }, random_tensor({3, 4}, 1)},
      {[](Var a) { return ops::relu(a); }, random_tensor({3, 4}, 2)},
      {[](Var a) { return ops::exp(a); }, random_tensor({3, 4}, 3)},
      {[](Var a) { return ops::log(a); }, positive},
      {[](Var a) { return ops::transpose(a); }, random_tensor({3, 4}, 5)},
      {[](Var a) { return ops::scale(a, -1.7); }, random_tensor({3, 4}, 6)},
      {[](Var a) { return ops::add_scalar(a, 0.3); }, random_tensor({3, 4}, 7)},
      {[](Var a) { return ops::slice(a, 1, 1, 3); }, random_tensor({3, 4}, 8)},
      {[](Var a) { return ops::mean_rows(a); }, random_tensor({3, 4}, 10)},
      {[](Var a) { return ops::softmax(a, 0); }, random_tensor({3, 4}, 11)},
      {[](Var a) { return ops::softmax(a, 1); }, random_tensor({3, 4}, 12)},
      {[](Var a) { return ops::log_softmax(a); }, random_tensor({3, 4}, 13)},
      {[](Var a) { return ops::mean(a); }, random_tensor({3, 4}, 14)},
      {[](Var a) { return ops::clamp(a, -0.5, 0.5); }, random_tensor({3, 4}, 15)},
      {[&](Var a) { return ops::pick(a, cols); }, random_tensor({3, 4}, 16)},
      {[&](Var a) { return ops::masked_fill(a, mask, -5.0); }, random_tensor({3, 4}, 17)},
      {[&](Var a) { return ops::embedding_lookup(a, rows); }, random_tensor({3, 4}, 18)},
      {[&](Var a) { return ops::cross_entropy(a, cols); }, random_tensor({3, 4}, 19)},
  };
  const std::vector<std::tuple<Binary, Tensor, Tensor>> binary = {
      {[](Var a, Var b) { return ops::add(a, b); }, random_tensor({2, 3}, 1), random_tensor({2, 3}, 2)},
      {[](Var a, Var b) { return ops::sub(a, b); }, random_tensor({2, 3}, 3), random_tensor({2, 3}, 4)},
      {[](Var a, Var b) { return ops::mul(a, b); }, random_tensor({2, 3}, 5), random_tensor({2, 3}, 6)},
      {[](Var a, Var b) { return ops::add_bias(a, b); }, random_tensor({2, 3}, 7), random_tensor({3}, 8)},
      {[](Var a, Var b) { return ops::matmul(a, b); }, random_tensor({4, 5}, 9), random_tensor({5, 2}, 10)},
      {[](Var a, Var b) { return ops::concat({a, b, a}, 1); }, random_tensor({2, 3}, 11), random_tensor({2, 2}, 12)},
  };

  double worst = 0.0;
  for (const auto& [op, x] : unary) {
    const auto r = testing::check_leaf_gradients(
        [&](Tape& t, const std::vector<Var>& in) { return weighted_sum(t, op(in[0]), 21); }, {x});
    worst = std::max(worst, r.max_rel_error);
  }
  for (const auto& [op, x, y] : binary) {
    const auto r = testing::check_leaf_gradients(
        [&](Tape& t, const std::vector<Var>& in) { return weighted_sum(t, op(in[0], in[1]), 22); }, {x, y});
    worst = std::max(worst, r.max_rel_error);
  }
  const auto ln = testing::check_leaf_gradients(
      [](Tape& t, const std::vector<Var>& in) { return weighted_sum(t, ops::layer_norm(in[0], in[1], in[2]), 23); },
      {random_tensor({3, 5}, 24), random_tensor({5}, 25), random_tensor({5}, 26)});
  return std::max(worst, ln.max_rel_error);
}

Outcome gradient_integrity() {
  const WorldConfig wc = testing::tiny_world_config();
  const text::Vocab vocab = testing::world_vocab(wc);
  const SyntheticWorld world = gen_synthetic(wc);
  std::vector<embedding::InputSequence> batch;
  std::vector<int> labels;
  for (std::size_t i = 0; i < 2; ++i) {
    batch.push_back(embedding::encode_meme(world.train[i], vocab, {}, {8, 8, 4}, {40, 3, 0}));
    labels.push_back(world.train[i].label);
  }
  std::ostringstream detail;
  bool pass = true;
  for (trn::Variant v : {trn::Variant::OneStream, trn::Variant::TwoStream}) {
    trn::DetectorModel model(testing::tiny_model_config(vocab.size(), v));
    const auto r = testing::check_store_gradients(
        model.params(), [&](Tape& t) { return trn::detector_loss(t, model, batch, labels); }, testing::kComposedStep,
        1, testing::kComposedFloor);
    pass = pass && r.max_rel_error <= kWholeModelGradTol;
    detail << trn::to_string(v) << " " << fmt("%.2e", r.max_rel_error) << " over " << r.checked << " params, ";
  }
  const double op = per_op_max_error();
  pass = pass && op <= kPerOpGradTol;
  detail << "per-op " << fmt("%.2e", op) << fmt(" [model<=%.0e, op<=%.0e]", kWholeModelGradTol, kPerOpGradTol);
  return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// 2. Metric oracles

Outcome metric_oracles() {
  double cider_err = 0.0;
  std::size_t cider_cases = 0;
  Rng rng(2024, 1);
  for (int corpus_i = 0; corpus_i < 20; ++corpus_i) {
    const auto corpus = testing::random_corpus(rng);
    const metrics::IdfTable idf = metrics::compute_idf(corpus);
    for (std::size_t img = 0; img < corpus.size(); ++img) {
      for (int c = 0; c < 3; ++c) {
        const metrics::Tokens cand = c == 0 ? corpus[img][0] : testing::random_sentence(rng, 9);
        const double got = metrics::cider_d(cand, corpus[img], idf);
        cider_err = std::max(cider_err, std::abs(got - testing::naive::cider_d(cand, corpus[img], corpus)));
        ++cider_cases;
      }
    }
  }
  double auroc_err = 0.0;
  std::size_t tied_sets = 0;
  Rng srng(2025, 1);
  for (int set = 0; set < 200; ++set) {
    const std::size_t n = 2 + srng.below(80);
    const std::size_t levels = 1 + srng.below(10);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(srng.below(levels)) / static_cast<double>(levels);
      y[i] = static_cast<int>(srng.below(2));
    }
    y[0] = 0;
    y[1] = 1;
    if (levels < n) ++tied_sets;
    auroc_err = std::max(auroc_err, std::abs(metrics::auroc(s, y) - testing::pairwise_auroc(s, y)));
  }
  const bool pass = cider_err <= kCiderOracleTol && auroc_err <= kAurocOracleTol;
  return {pass, fmt("CIDEr-D max diff %.2e on %zu cases from 20 corpora [<=%.0e], AUROC max diff %.2e on 200 sets "
                    "(%zu with ties) [<=%.0e]",
                    cider_err, cider_cases, kCiderOracleTol, auroc_err, tied_sets, kAurocOracleTol)};
}

// ---------------------------------------------------------------------------
// 3. SCST correctness

Outcome scst_correctness() {
  WorldConfig wc = testing::tiny_world_config(5, 40);
  const SyntheticWorld world = gen_synthetic(wc);
  const text::Vocab vocab = testing::world_vocab(wc);
  captioner::CaptionerConfig cc;
  cc.vocab_size = vocab.size();
  cc.feature_dim = wc.feature_dim;
  cc.d = 16;
  cc.heads = 2;
  cc.layers = 2;
  cc.max_length = 12;
  cc.init_std = 0.5;
  cc.seed = 11;
  captioner::Captioner model(cc);

  std::vector<std::vector<metrics::Tokens>> corpus;
  for (const auto& image : world.captions) {
    std::vector<metrics::Tokens> refs;
    for (const auto& r : image.references) refs.push_back(metrics::caption_words(r));
    corpus.push_back(std::move(refs));
  }
  const metrics::IdfTable idf = metrics::compute_idf(corpus);

  // Zero advantage: references no caption can match.
  const std::vector<metrics::Tokens> impossible{{"zzz", "qqq"}};
  const metrics::IdfTable impossible_idf = metrics::compute_idf({impossible});
  std::size_t nonzero_grads = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    model.params().zero_grad();
    Rng rng(i, 2);
    Tape tape;
    const auto out = captioner::scst_step(tape, model, world.captions[i].regions, impossible, impossible_idf, vocab,
                                          {}, rng);
    if (out.advantage() != 0.0) return {false, "reward against impossible references was not zero"};
    tape.backward(out.surrogate);
    for (const Parameter* p : std::as_const(model.params()).all()) {
      for (double g : p->grad.data()) nonzero_grads += g != 0.0 ? 1 : 0;
    }
  }

  // Two-path comparison: surrogate gradient versus -A * grad log p(sample).
  double max_err = 0.0;
  std::size_t nonzero_adv = 0;
  for (std::size_t i = 0; i < world.captions.size() && nonzero_adv < 6; ++i) {
    const auto& regions = world.captions[i].regions;
    const std::string greedy = captioner::caption_text(captioner::decode_greedy(model, regions, {}).ids, vocab);
    std::vector<metrics::Tokens> refs = corpus[i];
    refs.push_back(metrics::caption_words(greedy + " " + greedy));
    model.params().zero_grad();
    double advantage = 0.0;
    std::vector<std::size_t> sample;
    {
      Tape tape;
      Rng rng(i, 5);
      const auto out = captioner::scst_step(tape, model, regions, refs, idf, vocab, {}, rng);
      advantage = out.advantage();
      sample = out.sample.ids;
      tape.backward(out.surrogate);
    }
    std::vector<Tensor> surrogate;
    for (const Parameter* p : std::as_const(model.params()).all()) surrogate.push_back(p->grad);
    model.params().zero_grad();
    {
      Tape tape;
      tape.backward(captioner::sequence_log_prob(tape, model, regions, sample));
    }
    std::size_t k = 0;
    for (const Parameter* p : std::as_const(model.params()).all()) {
      for (std::size_t j = 0; j < p->grad.size(); ++j) {
        max_err = std::max(max_err, std::abs(surrogate[k][j] + advantage * p->grad[j]));
      }
      ++k;
    }
    nonzero_adv += advantage != 0.0 ? 1 : 0;
  }
  const bool pass = nonzero_grads == 0 && max_err <= kScstTwoPathTol && nonzero_adv > 0;
  return {pass, fmt("zero-advantage nonzero grads %zu [==0], two-path max diff %.2e over %zu nonzero-advantage "
                    "samples [<=%.0e]",
                    nonzero_grads, max_err, nonzero_adv, kScstTwoPathTol)};
}

// ---------------------------------------------------------------------------
// Small world shared by criteria 4 and 9

pipeline::RunConfig small_run_config() {
  pipeline::RunConfig cfg = pipeline::default_run_config();
  cfg.seed = 3;
  cfg.vocab_size = 200;
  cfg.world.seed = 4;
  cfg.world.n_samples = 200;
  cfg.world.feature_dim = 8;
  cfg.world.regions_per_image = 3;
  cfg.world.caption_images = 24;
  cfg.world.gold_captions = true;
  cfg.model.d = 16;
  cfg.model.heads = 2;
  cfg.model.layers = 1;
  cfg.model.text_layers = 1;
  cfg.model.visual_layers = 1;
  cfg.model.co_layers = 1;
  cfg.model.tokens = {12, 10, 6};
  cfg.train.steps = 30;
  cfg.train.batch_size = 8;
  cfg.captioner.d = 16;
  cfg.captioner.heads = 2;
  cfg.captioner.layers = 1;
  cfg.caption_train.xe_epochs = 4;
  cfg.caption_train.scst_epochs = 2;
  cfg.caption_train.batch_size = 8;
  cfg.caption_train.eval_every = 1;
  return cfg;
}

// ---------------------------------------------------------------------------
// 4. Overfit sanity

Outcome overfit_sanity() {
  pipeline::RunConfig cfg = small_run_config();
  cfg.model.variant = trn::Variant::OneStream;
  cfg.model.layers = 2;
  cfg.model.dropout = 0.0;
  cfg.train.steps = kOverfitSteps;
  cfg.train.batch_size = 32;
  cfg.train.lr = 1e-3;
  cfg.train.final_lr = 1e-3;
  cfg.train.warmup_steps = 0;
  cfg.train.log_every = 1;
  const SyntheticWorld world = gen_synthetic(cfg.world);
  const std::vector<MemeSample> batch(world.train.begin(), world.train.begin() + 32);
  const text::Vocab vocab = pipeline::corpus_vocab(world.train, world.captions, cfg.world, cfg.vocab_size);
  double first = -1.0, last = 1.0;
  std::size_t reached = 0;
  pipeline::train_detector(cfg, batch, vocab, [&](const pipeline::LogRecord& r) {
    if (first < 0.0) first = r.loss;
    last = r.loss;
    if (reached == 0 && r.loss < kOverfitLoss) reached = r.step;
  });
  return {reached > 0, fmt("BCE %.4f at step 1, first < %.2f at step %zu, %.5f at step %zu [<%.2f within %zu]", first,
                           kOverfitLoss, reached, last, kOverfitSteps, kOverfitLoss, kOverfitSteps)};
}

// ---------------------------------------------------------------------------
// 5. Multimodal necessity on the XOR world

pipeline::RunConfig xor_run_config(std::uint64_t seed) {
  pipeline::RunConfig cfg = pipeline::default_run_config();
  cfg.seed = seed;
  cfg.vocab_size = 300;
  cfg.world.seed = seed;
  cfg.world.rule = PlantedRule::Xor;
  cfg.world.n_samples = 3000;
  cfg.world.dev_fraction = 500.0 / 3000.0;
  cfg.world.test_fraction = 500.0 / 3000.0;
  cfg.world.feature_dim = 16;
  cfg.world.regions_per_image = 4;
  cfg.model.variant = trn::Variant::OneStream;
  cfg.model.d = 32;
  cfg.model.heads = 2;
  cfg.model.layers = 2;
  cfg.model.dropout = 0.0;
  cfg.model.tokens = {16, 12, 8};
  cfg.train.steps = 2000;
  cfg.train.batch_size = 16;
  cfg.train.lr = 1e-3;
  cfg.train.final_lr = 1e-4;
  cfg.train.log_every = 1000;
  return cfg;
}

double dev_auroc(const pipeline::RunConfig& cfg, const SyntheticWorld& world, const text::Vocab& vocab) {
  const pipeline::Detector det = pipeline::train_detector(cfg, world.train, vocab);
  return pipeline::evaluate(pipeline::predict(det, world.dev), world.dev).auroc;
}

Outcome multimodal_necessity() {
  struct Arm {
    const char* name;
    embedding::InputFlags flags;
    std::vector<double> auroc;
  };
  std::vector<Arm> arms = {{"fused", {true, false, true, true}, {}},
                           {"text-only", {true, false, false, false}, {}},
                           {"vision-only", {false, false, true, true}, {}}};
  std::size_t train_size = 0, dev_size = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    pipeline::RunConfig cfg = xor_run_config(seed);
    const SyntheticWorld world = gen_synthetic(cfg.world);
    train_size = world.train.size();
    dev_size = world.dev.size();
    const text::Vocab vocab = pipeline::corpus_vocab(world.train, world.captions, cfg.world, cfg.vocab_size);
    for (Arm& arm : arms) {
      cfg.inputs.flags = arm.flags;
      arm.auroc.push_back(dev_auroc(cfg, world, vocab));
    }
  }
  bool pass = train_size == 2000 && dev_size == 500;
  std::ostringstream detail;
  detail << "train " << train_size << " dev " << dev_size << ";";
  for (const Arm& arm : arms) {
    detail << " " << arm.name;
    for (double a : arm.auroc) {
      detail << fmt(" %.3f", a);
      pass = pass && (arm.name == std::string("fused") ? a >= kFusedMinAuroc : a <= kUnimodalMaxAuroc);
    }
    detail << ";";
  }
  detail << fmt(" [fused>=%.2f, unimodal<=%.2f, every seed]", kFusedMinAuroc, kUnimodalMaxAuroc);
  return {pass, detail.str()};
}

// ---------------------------------------------------------------------------
// 6. Caption input direction of effect

Outcome caption_effect() {
  double on_sum = 0.0, off_sum = 0.0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    pipeline::RunConfig cfg = xor_run_config(seed);
    // Trigger concepts share their region features with benign concepts, so
    // only caption words can reveal the visual indicator.
    cfg.world.alias_trigger_features = true;
    cfg.world.gold_captions = true;
    const SyntheticWorld world = gen_synthetic(cfg.world);
    const text::Vocab vocab = pipeline::corpus_vocab(world.train, world.captions, cfg.world, cfg.vocab_size);
    cfg.inputs.flags = {true, true, false, true};
    const double on = dev_auroc(cfg, world, vocab);
    cfg.inputs.flags.use_caption = false;
    const double off = dev_auroc(cfg, world, vocab);
    on_sum += on;
    off_sum += off;
    per_seed << fmt(" %.3f/%.3f", on, off);
  }
  const double gain = (on_sum - off_sum) / 3.0;
  return {gain >= kCaptionMinGain, fmt("dev AUROC caption on/off per seed:%s; mean gain %+.3f [>=%.2f]",
                                       per_seed.str().c_str(), gain, kCaptionMinGain)};
}

// ---------------------------------------------------------------------------
// 7. Captioner training

Outcome captioner_training() {
  pipeline::RunConfig cfg = pipeline::default_run_config();
  cfg.seed = 1;
  cfg.vocab_size = 300;
  cfg.world.seed = 1;
  cfg.world.n_samples = 400;
  cfg.world.dev_fraction = 0.1;
  cfg.world.test_fraction = 0.1;
  cfg.world.feature_dim = 16;
  cfg.world.regions_per_image = 4;
  cfg.world.caption_images = 200;
  cfg.captioner.d = 32;
  cfg.captioner.heads = 2;
  cfg.captioner.layers = 2;
  cfg.caption_train.xe_epochs = 200;
  cfg.caption_train.scst_epochs = 5;
  cfg.caption_train.eval_every = 50;
  const SyntheticWorld world = gen_synthetic(cfg.world);
  const text::Vocab vocab = pipeline::corpus_vocab(world.train, world.captions, cfg.world, cfg.vocab_size);
  pipeline::CaptionerReport rep;
  pipeline::train_captioner(cfg, world.captions, vocab, true, &rep);
  std::size_t skipped = 0;
  for (const auto& e : rep.epochs) skipped += e.skipped_steps;

  // Zero-advantage steps: with unreachable references every SCST step is
  // skipped and the parameters stay at their initial values.
  pipeline::RunConfig zero = cfg;
  zero.caption_train.xe_epochs = 0;
  zero.caption_train.scst_epochs = 2;
  std::vector<CaptionSample> images(world.captions.begin(), world.captions.begin() + 40);
  for (auto& image : images) image.references = {"qqqq xxxx"};
  pipeline::CaptionerReport zero_rep;
  const pipeline::CaptionerBundle untouched = pipeline::train_captioner(zero, images, vocab, true, &zero_rep);
  std::size_t zero_skipped = 0, zero_steps = 0;
  for (const auto& e : zero_rep.epochs) {
    zero_skipped += e.skipped_steps;
    if (e.phase == "scst") zero_steps += (images.size() - zero_rep.selection_images + zero.caption_train.batch_size - 1) /
                                         zero.caption_train.batch_size;
  }
  const captioner::Captioner fresh(untouched.model->config());
  bool unchanged = true;
  const auto a = std::as_const(untouched.model->params()).all();
  const auto b = fresh.params().all();
  for (std::size_t i = 0; i < a.size(); ++i) unchanged = unchanged && a[i]->value == b[i]->value;

  const bool pass = rep.xe_token_accuracy >= kXeMinTokenAccuracy && rep.cider_after_scst >= rep.cider_after_xe &&
                    unchanged && zero_skipped == zero_steps && zero_steps > 0;
  return {pass, fmt("XE token accuracy %.4f [>=%.2f]; CIDEr-D after XE %.4f, after SCST %.4f [non-decreasing], "
                    "%zu zero-advantage batches skipped in the main run; forced zero-advantage run: %zu/%zu steps "
                    "skipped, parameters %s",
                    rep.xe_token_accuracy, kXeMinTokenAccuracy, rep.cider_after_xe, rep.cider_after_scst, skipped,
                    zero_skipped, zero_steps, unchanged ? "unchanged" : "CHANGED")};
}

// ---------------------------------------------------------------------------
// 8. Dataset statistics

Outcome dataset_statistics() {
  WorldConfig wc = WorldConfig::defaults();
  wc.n_samples = 10000;
  const SyntheticWorld world = gen_synthetic(wc);
  auto positives = [](const std::vector<MemeSample>& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](const MemeSample& m) { return m.label == 1; }));
  };
  const std::size_t tp = positives(world.train), dp = positives(world.dev), sp = positives(world.test);
  const double rate = static_cast<double>(tp) / static_cast<double>(world.train.size());
  const bool pass = world.train.size() == 8500 && world.dev.size() == 500 && world.test.size() == 1000 && dp == 250 &&
                    sp == 500 && tp == 3060 && std::abs(rate - kTrainPositiveRate) <= kTrainPositiveSlack;
  return {pass, fmt("train %zu (%zu hateful, %.2f%%) dev %zu (%zu hateful) test %zu (%zu hateful) "
                    "[8500/3060, 500/250, 1000/500; rate 36%%+-1pp]",
                    world.train.size(), tp, 100.0 * rate, world.dev.size(), dp, world.test.size(), sp)};
}

// ---------------------------------------------------------------------------
// 9. Reproducibility

std::vector<std::pair<std::string, std::string>> run_all_commands(const fs::path& dir) {
  fs::remove_all(dir);
  const pipeline::RunConfig cfg = small_run_config();
  const pipeline::DatasetFiles files{dir / "data"};
  const SyntheticWorld world = pipeline::write_dataset(cfg, files.dir);
  const text::Vocab vocab = pipeline::dataset_vocab(files, cfg);

  pipeline::CaptionerReport rep;
  const auto cap = pipeline::train_captioner(cfg, world.captions, vocab, true, &rep);
  pipeline::save_captioner(dir / "captioner.ckpt", cap);
  std::vector<MemeSample> train = world.train, dev = world.dev;
  save_caption_cache(captioner::caption_dataset(train, *cap.model, vocab, {}), dir / "train.captions.jsonl");
  captioner::caption_dataset(dev, *cap.model, vocab, {});

  std::vector<std::pair<std::string, std::string>> out;
  for (trn::Variant v : {trn::Variant::OneStream, trn::Variant::TwoStream}) {
    pipeline::RunConfig dc = cfg;
    dc.model.variant = v;
    dc.inputs.use_augmentation = true;
    const pipeline::Detector det = pipeline::train_detector(dc, train, vocab);
    const std::string name = trn::to_string(v);
    pipeline::save_detector(dir / (name + ".ckpt"), det);
    const auto preds = pipeline::predict(det, dev);
    save_predictions(preds, dir / (name + ".csv"));
    const auto ev = pipeline::evaluate(preds, dev);
    out.emplace_back(name + " metrics", fmt("%.17g %.17g", ev.auroc, ev.accuracy));
  }
  pipeline::RunConfig ac = cfg;
  ac.train.steps = 5;
  write_text_file(dir / "ablation.csv", pipeline::ablation_csv(pipeline::run_ablation(ac, world.train, world.dev, vocab),
                                                               ac.model.variant));
  out.emplace_back("captioner report", fmt("%.17g %.17g %.17g", rep.xe_token_accuracy, rep.cider_after_xe,
                                           rep.cider_after_scst));
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) out.emplace_back(fs::relative(entry.path(), dir).string(), read_text_file(entry.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "memetrn_acceptance_repro";
  const auto a = run_all_commands(root / "a");
  const auto b = run_all_commands(root / "b");
  std::size_t mismatched = a.size() == b.size() ? 0 : 1;
  std::string first_diff;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i] != b[i]) {
      ++mismatched;
      if (first_diff.empty()) first_diff = a[i].first;
    }
  }
  fs::remove_all(root);
  return {mismatched == 0, fmt("%zu artifacts and metrics compared across two runs, %zu differ%s%s [==0]", a.size(),
                               mismatched, first_diff.empty() ? "" : ", first: ", first_diff.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  std::vector<int> selected;
  app.add_option("criteria", selected, "Criteria to run (default: all)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient integrity", gradient_integrity},
      {"metric oracles", metric_oracles},
      {"SCST correctness", scst_correctness},
      {"overfit sanity", overfit_sanity},
      {"multimodal necessity", multimodal_necessity},
      {"caption input effect", caption_effect},
      {"captioner training", captioner_training},
      {"dataset statistics", dataset_statistics},
      {"reproducibility", reproducibility},
  };

  bool all = true;
  for (int id : selected) {
    const auto& [name, run] = criteria[static_cast<std::size_t>(id - 1)];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d %-22s %s  %s (%.1fs)\n", id, name, out.pass ? "PASS" : "FAIL", out.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && out.pass;
  }
  return all ? 0 : 1;
}
