#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <tuple>

#include "memetrn/errors.hpp"
#include "memetrn/numerics/checkpoint.hpp"
#include "memetrn/pipeline/config.hpp"
#include "memetrn/pipeline/pipeline.hpp"

using namespace memetrn;
using namespace memetrn::pipeline;

namespace {

RunConfig small_config() {
  RunConfig cfg = default_run_config();
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
  cfg.model.dropout = 0.1;
  cfg.model.tokens = {12, 10, 6};
  cfg.model.feature_dim = 8;
  cfg.train.steps = 20;
  cfg.train.batch_size = 8;
  cfg.captioner.d = 16;
  cfg.captioner.heads = 2;
  cfg.captioner.layers = 1;
  cfg.captioner.feature_dim = 8;
  cfg.caption_train.xe_epochs = 3;
  cfg.caption_train.scst_epochs = 2;
  cfg.caption_train.batch_size = 8;
  cfg.caption_train.eval_every = 1;
  cfg.vocab_size = 200;
  return cfg;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("memetrn_test_pipeline_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

bool same_values(const ParameterStore& a, const ParameterStore& b) {
  const auto pa = a.all();
  const auto pb = b.all();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->name != pb[i]->name || !std::ranges::equal(pa[i]->value.data(), pb[i]->value.data())) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("run config: defaults, partial overrides and resolved round trip") {
  const RunConfig defaults = parse_run_config("{}");
  CHECK(defaults.train.steps == 2000);
  CHECK(defaults.train.batch_size == 16);
  CHECK(defaults.model.variant == trn::Variant::OneStream);

  const RunConfig cfg = parse_run_config(R"({"seed": 9, "variant": "two-stream",
      "model": {"d": 32, "tokens": {"ocr": 20}},
      "inputs": {"use_caption": false, "use_augmentation": true, "augmentation_diversity": 5},
      "world": {"rule": "and", "n_samples": 400}})");
  CHECK(cfg.seed == 9);
  CHECK(cfg.model.variant == trn::Variant::TwoStream);
  CHECK(cfg.model.d == 32);
  CHECK(cfg.model.tokens.ocr == 20);
  CHECK(cfg.model.tokens.caption == defaults.model.tokens.caption);
  CHECK_FALSE(cfg.inputs.flags.use_caption);
  CHECK(cfg.inputs.augmentation_diversity == 5);
  CHECK(cfg.world.rule == PlantedRule::And);

  const std::string resolved = run_config_json(cfg);
  const RunConfig again = parse_run_config(resolved);
  CHECK(run_config_json(again) == resolved);
  CHECK(again.model == cfg.model);
  CHECK(again.inputs == cfg.inputs);
  CHECK(again.train == cfg.train);
  CHECK(again.caption_train == cfg.caption_train);
}

TEST_CASE("run config: errors name the offending key") {
  auto message = [](const std::string& text) {
    try {
      parse_run_config(text);
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(R"({"train": {"stepz": 3}})").find("train.stepz") != std::string::npos);
  CHECK(message(R"({"train": {"steps": -3}})").find("train.steps") != std::string::npos);
  CHECK(message(R"({"model": {"dropout": "high"}})").find("model.dropout") != std::string::npos);
  CHECK(message(R"({"variant": "three-stream"})").find("three-stream") != std::string::npos);
  CHECK_FALSE(message("{not json").empty());
  CHECK_FALSE(message(R"({"model": {"d": 30, "heads": 4}})").empty());
  CHECK_FALSE(message(R"({"inputs": {"use_augmentation": true, "augmentation_diversity": 3}})").empty());
  CHECK_FALSE(message(R"({"world": {"trigger_words": ["happy"]}})").empty());
}

TEST_CASE("dataset directory holds every file and a consistent vocabulary") {
  const RunConfig cfg = small_config();
  const auto dir = scratch_dir("dataset");
  const SyntheticWorld world = write_dataset(cfg, dir);
  const DatasetFiles files{dir};
  CHECK(load_memes(files.split("train")) == world.train);
  CHECK(load_memes(files.split("dev")) == world.dev);
  CHECK(load_memes(files.split("test")) == world.test);
  CHECK(load_caption_samples(files.captions()) == world.captions);
  CHECK(load_provenance(files.provenance()) == world.provenance);
  CHECK(parse_run_config(read_text_file(files.config())).world.seed == cfg.world.seed);
  const text::Vocab vocab = dataset_vocab(files, cfg);
  std::filesystem::remove(files.vocab());
  CHECK(dataset_vocab(files, cfg) == vocab);
  // Every corpus word tokenises without [UNK].
  for (const auto& m : world.dev) {
    for (std::size_t id : text::wordpiece_tokenize(m.text, vocab, 1000).ids) CHECK(id != text::kUnkId);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("one-stream detector overfits a fixed 32-sample batch") {
  RunConfig cfg = small_config();
  cfg.model.dropout = 0.0;
  cfg.model.layers = 2;
  cfg.train.steps = 500;
  cfg.train.batch_size = 32;
  cfg.train.lr = 1e-3;
  cfg.train.final_lr = 1e-3;
  cfg.train.warmup_steps = 0;
  const SyntheticWorld world = gen_synthetic(cfg.world);
  const std::vector<MemeSample> batch(world.train.begin(), world.train.begin() + 32);
  const text::Vocab vocab = corpus_vocab(world.train, world.captions, cfg.world, cfg.vocab_size);
  double last = 1.0;
  std::size_t reached = 0;
  train_detector(cfg, batch, vocab, [&](const LogRecord& r) {
    last = r.loss;
    if (reached == 0 && r.loss < 0.01) reached = r.step;
  });
  MESSAGE("overfit: loss " << last << ", first below 0.01 at step " << reached);
  CHECK(last < 0.01);
  CHECK(reached > 0);
}

TEST_CASE("detector training is reproducible and checkpoints round trip") {
  for (trn::Variant variant : {trn::Variant::OneStream, trn::Variant::TwoStream}) {
    RunConfig cfg = small_config();
    cfg.model.variant = variant;
    const SyntheticWorld world = gen_synthetic(cfg.world);
    const text::Vocab vocab = corpus_vocab(world.train, world.captions, cfg.world, cfg.vocab_size);
    std::vector<LogRecord> log_a, log_b;
    const Detector a = train_detector(cfg, world.train, vocab, [&](const LogRecord& r) { log_a.push_back(r); });
    const Detector b = train_detector(cfg, world.train, vocab, [&](const LogRecord& r) { log_b.push_back(r); });
    CHECK(same_values(a.model->params(), b.model->params()));
    REQUIRE(log_a.size() == log_b.size());
    for (std::size_t i = 0; i < log_a.size(); ++i) CHECK(log_a[i].loss == log_b[i].loss);

    RunConfig other = cfg;
    other.seed = cfg.seed + 1;
    CHECK_FALSE(same_values(a.model->params(), train_detector(other, world.train, vocab).model->params()));

    const auto dir = scratch_dir("detector");
    save_detector(dir / "d.ckpt", a);
    const Detector loaded = load_detector(dir / "d.ckpt");
    CHECK(loaded.vocab == a.vocab);
    CHECK(loaded.config.model.variant == variant);
    CHECK(same_values(loaded.model->params(), a.model->params()));
    const auto pa = predict(a, world.dev);
    const auto pl = predict(loaded, world.dev);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].proba == pl[i].proba);
    CHECK_THROWS_AS(load_captioner(dir / "d.ckpt"), InputError);
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("augmentation keeps originals first and preserves labels") {
  RunConfig cfg = small_config();
  cfg.inputs.use_augmentation = true;
  cfg.inputs.augmentation_diversity = 5;
  const SyntheticWorld world = gen_synthetic(cfg.world);
  const std::vector<MemeSample> aug = augment_training_set(world.train, cfg);
  CHECK(aug.size() > world.train.size());
  CHECK(aug.size() <= 6 * world.train.size());
  std::map<std::string, int> label_of;
  for (const auto& s : world.train) label_of[s.id] = s.label;
  for (const auto& s : aug) {
    REQUIRE(label_of.count(s.lineage()));
    CHECK(label_of[s.lineage()] == s.label);
  }
  cfg.inputs.use_augmentation = false;
  CHECK(augment_training_set(world.train, cfg) == world.train);
}

TEST_CASE("evaluate joins by id and rejects gaps") {
  std::vector<MemeSample> gold(4);
  const int labels[] = {1, 0, 1, 0};
  for (std::size_t i = 0; i < 4; ++i) {
    gold[i].id = "m" + std::to_string(i);
    gold[i].label = labels[i];
  }
  std::vector<Prediction> preds{{"m3", 0.1, 0}, {"m2", 0.8, 1}, {"m1", 0.6, 1}, {"m0", 0.9, 1}};
  const Evaluation e = evaluate(preds, gold);
  CHECK(e.auroc == 1.0);
  CHECK(e.accuracy == 0.75);
  CHECK(e.count == 4);
  preds.pop_back();
  CHECK_THROWS_AS(evaluate(preds, gold), InputError);
  preds.push_back({"m3", 0.2, 0});
  CHECK_THROWS_AS(evaluate(preds, gold), IntegrityError);
}

TEST_CASE("captioner training is reproducible and selects by CIDEr-D") {
  const RunConfig cfg = small_config();
  const SyntheticWorld world = gen_synthetic(cfg.world);
  const text::Vocab vocab = corpus_vocab(world.train, world.captions, cfg.world, cfg.vocab_size);
  CaptionerReport ra, rb;
  const CaptionerBundle a = train_captioner(cfg, world.captions, vocab, true, &ra);
  const CaptionerBundle b = train_captioner(cfg, world.captions, vocab, true, &rb);
  CHECK(same_values(a.model->params(), b.model->params()));
  CHECK(ra.best_cider == rb.best_cider);
  CHECK(ra.epochs.size() == 5);
  double best = -1.0;
  for (const auto& e : ra.epochs) best = std::max(best, e.cider);
  CHECK(ra.best_cider == best);
  CHECK(ra.selection_images == 2);

  const auto dir = scratch_dir("captioner");
  save_captioner(dir / "c.ckpt", a);
  const CaptionerBundle loaded = load_captioner(dir / "c.ckpt");
  CHECK(same_values(loaded.model->params(), a.model->params()));
  CHECK_THROWS_AS(load_detector(dir / "c.ckpt"), InputError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("SCST steps with zero advantage leave parameters unchanged") {
  RunConfig cfg = small_config();
  cfg.caption_train.xe_epochs = 0;
  cfg.caption_train.scst_epochs = 3;
  const SyntheticWorld world = gen_synthetic(cfg.world);
  const text::Vocab vocab = corpus_vocab(world.train, world.captions, cfg.world, cfg.vocab_size);
  // References no caption can contain: every reward is 0.
  std::vector<CaptionSample> images = world.captions;
  for (auto& image : images) image.references = {"qqqq xxxx"};
  CaptionerReport rep;
  const CaptionerBundle trained = train_captioner(cfg, images, vocab, true, &rep);
  std::size_t skipped = 0;
  for (const auto& e : rep.epochs) skipped += e.skipped_steps;
  CHECK(skipped == 3 * 3);  // 22 training images in batches of 8
  const captioner::Captioner fresh(trained.model->config());
  CHECK(same_values(trained.model->params(), fresh.params()));
}

TEST_CASE("ablation covers the eight input combinations") {
  RunConfig cfg = small_config();
  cfg.train.steps = 4;
  const SyntheticWorld world = gen_synthetic(cfg.world);
  const text::Vocab vocab = corpus_vocab(world.train, world.captions, cfg.world, cfg.vocab_size);
  const auto rows = run_ablation(cfg, world.train, world.dev, vocab);
  REQUIRE(rows.size() == 8);
  std::set<std::tuple<bool, bool, bool>> seen;
  for (const auto& r : rows) seen.insert({r.use_caption, r.use_object_labels, r.use_augmentation});
  CHECK(seen.size() == 8);
  const std::string csv = ablation_csv(rows, trn::Variant::OneStream);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  CHECK(csv.rfind("variant,use_caption,use_object_labels,use_augmentation,dev_auroc,dev_accuracy\n", 0) == 0);
  CHECK(run_ablation(cfg, world.train, world.dev, vocab)[5].dev.auroc == rows[5].dev.auroc);
}
