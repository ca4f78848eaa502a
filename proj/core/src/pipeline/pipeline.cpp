#include "memetrn/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "memetrn/errors.hpp"
#include "memetrn/metrics/classification.hpp"
#include "memetrn/numerics/adam.hpp"
#include "memetrn/numerics/checkpoint.hpp"
#include "memetrn/numerics/ops.hpp"
#include "memetrn/text/paraphrase.hpp"

namespace memetrn::pipeline {

namespace {

using json = nlohmann::ordered_json;

template <class T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

// Endless shuffled pass over [0, n): a fresh permutation per epoch.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : n_(n), root_(seed, Rng::hash("batches")) { refill(); }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    while (out.size() < std::min(batch, n_)) {
      if (pos_ == order_.size()) refill();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void refill() {
    order_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
    Rng rng = root_.fork(epoch_++);
    shuffle_in_place(order_, rng);
    pos_ = 0;
  }

  std::size_t n_;
  Rng root_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::uint64_t epoch_ = 0;
};

LrSchedule schedule_for(double lr, double final_lr, std::size_t steps, std::size_t warmup) {
  LrSchedule s;
  s.kind = LrSchedule::Kind::LinearDecay;
  s.base_lr = lr;
  s.final_lr = final_lr;
  s.total_steps = static_cast<std::int64_t>(std::max<std::size_t>(steps, 1));
  s.warmup_steps = static_cast<std::int64_t>(warmup);
  return s;
}

json vocab_json(const text::Vocab& vocab) { return json(vocab.tokens()); }

std::string metadata(const char* kind, const RunConfig& cfg, const text::Vocab& vocab) {
  json meta = {{"kind", kind}, {"config", json::parse(run_config_json(cfg))}, {"vocab", vocab_json(vocab)}};
  return meta.dump();
}

struct Metadata {
  RunConfig config;
  text::Vocab vocab;
};

Metadata parse_metadata(const Checkpoint& ckpt, const char* expected_kind) {
  json meta;
  try {
    meta = json::parse(ckpt.metadata);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint metadata is not JSON: ") + e.what());
  }
  if (!meta.is_object() || !meta.contains("kind") || !meta.contains("config") || !meta.contains("vocab")) {
    throw ParseError("checkpoint metadata lacks kind/config/vocab");
  }
  if (meta["kind"] != expected_kind) {
    throw InputError("checkpoint holds a " + meta["kind"].get<std::string>() + ", expected a " + expected_kind);
  }
  Metadata out;
  out.config = parse_run_config(meta["config"].dump());
  out.vocab = text::Vocab::from_tokens(meta["vocab"].get<std::vector<std::string>>());
  return out;
}

void check_feature_dim(const std::vector<MemeSample>& samples, const RunConfig& cfg) {
  for (const auto& s : samples) {
    for (const auto& r : s.regions) {
      if (r.feat.size() != cfg.world.feature_dim) {
        throw InputError("sample '" + s.id + "' has " + std::to_string(r.feat.size()) +
                         "-dim region features but world.feature_dim is " + std::to_string(cfg.world.feature_dim));
      }
    }
  }
}

trn::ModelConfig resolved_model(const RunConfig& cfg, const text::Vocab& vocab) {
  trn::ModelConfig m = cfg.model;
  m.vocab_size = vocab.size();
  m.feature_dim = cfg.world.feature_dim;
  m.seed = cfg.seed;
  return m;
}

captioner::CaptionerConfig resolved_captioner(const RunConfig& cfg, const text::Vocab& vocab) {
  captioner::CaptionerConfig c = cfg.captioner;
  c.vocab_size = vocab.size();
  c.feature_dim = cfg.world.feature_dim;
  c.seed = cfg.seed;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------

text::Vocab corpus_vocab(const std::vector<MemeSample>& train, const std::vector<CaptionSample>& captions,
                         const WorldConfig& world, std::size_t target_size) {
  std::vector<std::string> corpus;
  for (const auto& m : train) {
    corpus.push_back(m.text);
    if (m.caption) corpus.push_back(*m.caption);
    corpus.push_back(embedding::object_label_text(m.regions));
  }
  for (const auto& c : captions) corpus.insert(corpus.end(), c.references.begin(), c.references.end());
  corpus.insert(corpus.end(), world.benign_words.begin(), world.benign_words.end());
  corpus.insert(corpus.end(), world.trigger_words.begin(), world.trigger_words.end());
  corpus.insert(corpus.end(), world.concepts.begin(), world.concepts.end());
  for (const auto& [word, alts] : world.synonyms) corpus.insert(corpus.end(), alts.begin(), alts.end());
  return text::build_vocab(corpus, target_size);
}

SyntheticWorld write_dataset(const RunConfig& cfg, const std::filesystem::path& dir) {
  SyntheticWorld world = gen_synthetic(cfg.world);
  std::filesystem::create_directories(dir);
  const DatasetFiles files{dir};
  save_memes(world.train, files.split("train"));
  save_memes(world.dev, files.split("dev"));
  save_memes(world.test, files.split("test"));
  save_caption_samples(world.captions, files.captions());
  save_provenance(world.provenance, files.provenance());
  corpus_vocab(world.train, world.captions, cfg.world, cfg.vocab_size).save(files.vocab());
  write_text_file(files.config(), run_config_json(cfg));
  return world;
}

text::Vocab dataset_vocab(const DatasetFiles& files, const RunConfig& cfg) {
  if (std::filesystem::exists(files.vocab())) return text::Vocab::load(files.vocab());
  std::vector<CaptionSample> captions;
  if (std::filesystem::exists(files.captions())) captions = load_caption_samples(files.captions());
  return corpus_vocab(load_memes(files.split("train")), captions, cfg.world, cfg.vocab_size);
}

// ---------------------------------------------------------------------------

embedding::InputSequence Detector::encode(const MemeSample& sample) const {
  return embedding::encode_meme(sample, vocab, config.inputs.flags, config.model.tokens, config.model.sequence);
}

std::vector<MemeSample> augment_training_set(const std::vector<MemeSample>& train, const RunConfig& cfg) {
  if (!cfg.inputs.use_augmentation) return train;
  text::ParaphraseConfig pc;
  pc.diversity = cfg.inputs.augmentation_diversity;
  pc.seed = cfg.seed;
  pc.lexicon = cfg.world.synonyms;
  pc.protected_words.insert(cfg.world.trigger_words.begin(), cfg.world.trigger_words.end());
  std::vector<MemeSample> out;
  out.reserve(train.size() * static_cast<std::size_t>(1 + pc.diversity));
  for (const auto& s : train) {
    out.push_back(s);
    const text::ParaphraseResult r = text::paraphrase_augment(s, pc);
    for (const auto& v : r.variants) {
      if (v.id != s.id) out.push_back(v);
    }
  }
  return out;
}

Detector train_detector(const RunConfig& cfg, const std::vector<MemeSample>& train, const text::Vocab& vocab,
                        const LogSink& log) {
  if (train.empty()) throw InputError("training split is empty");
  check_feature_dim(train, cfg);
  Detector det;
  det.config = cfg;
  det.vocab = vocab;
  det.model = std::make_unique<trn::DetectorModel>(resolved_model(cfg, vocab));

  const std::vector<MemeSample> samples = augment_training_set(train, cfg);
  std::vector<embedding::InputSequence> seqs;
  std::vector<int> labels;
  seqs.reserve(samples.size());
  for (const auto& s : samples) {
    seqs.push_back(det.encode(s));
    labels.push_back(s.label);
  }

  AdamOptions opt;
  opt.clip_norm = cfg.train.clip_norm;
  opt.schedule = schedule_for(cfg.train.lr, cfg.train.final_lr, cfg.train.steps, cfg.train.warmup_steps);
  Adam adam(opt);
  BatchSampler sampler(seqs.size(), cfg.seed);
  ParameterStore& store = det.model->params();
  const bool dropout = cfg.model.dropout > 0.0;
  for (std::size_t step = 1; step <= cfg.train.steps; ++step) {
    const std::vector<std::size_t> idx = sampler.next(cfg.train.batch_size);
    std::vector<embedding::InputSequence> batch;
    std::vector<int> batch_labels;
    for (std::size_t i : idx) {
      batch.push_back(seqs[i]);
      batch_labels.push_back(labels[i]);
    }
    Tape tape(TapeOptions{dropout, Rng::mix(cfg.seed, Rng::hash("dropout"), step)});
    const Var loss = trn::detector_loss(tape, *det.model, batch, batch_labels);
    store.zero_grad();
    tape.backward(loss);
    const double lr = adam.step(store);
    if (log && (step % std::max<std::size_t>(cfg.train.log_every, 1) == 0 || step == cfg.train.steps)) {
      log({step, loss.value().item(), lr});
    }
  }
  return det;
}

std::vector<Prediction> predict(const Detector& detector, const std::vector<MemeSample>& samples) {
  check_feature_dim(samples, detector.config);
  std::vector<Prediction> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const double p = detector.model->hateful_probability(detector.encode(s));
    out.push_back({s.id, p, p >= 0.5 ? 1 : 0});
  }
  return out;
}

Evaluation evaluate(const std::vector<Prediction>& predictions, const std::vector<MemeSample>& gold) {
  std::map<std::string, double> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.id, p.proba).second) throw IntegrityError("duplicate prediction id '" + p.id + "'");
  }
  std::vector<metrics::ScoredSample> scored;
  scored.reserve(gold.size());
  for (const auto& g : gold) {
    auto it = by_id.find(g.id);
    if (it == by_id.end()) throw InputError("no prediction for gold id '" + g.id + "'");
    scored.push_back({g.id, it->second, g.label});
  }
  Evaluation e;
  e.auroc = metrics::auroc(scored);
  e.accuracy = metrics::accuracy(scored);
  e.count = scored.size();
  return e;
}

void save_detector(const std::filesystem::path& path, const Detector& detector) {
  save_checkpoint(path, detector.model->params(), metadata("detector", detector.config, detector.vocab));
}

Detector load_detector(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  Metadata meta = parse_metadata(ckpt, "detector");
  Detector det;
  det.config = std::move(meta.config);
  det.vocab = std::move(meta.vocab);
  det.model = std::make_unique<trn::DetectorModel>(resolved_model(det.config, det.vocab));
  load_parameters(ckpt, det.model->params());
  return det;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Tensor> snapshot(const ParameterStore& store) {
  std::vector<Tensor> out;
  for (const Parameter* p : store.all()) out.push_back(p->value);
  return out;
}

void restore(ParameterStore& store, const std::vector<Tensor>& values) {
  auto params = store.all();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

std::vector<metrics::Tokens> reference_words(const CaptionSample& image) {
  std::vector<metrics::Tokens> refs;
  for (const auto& r : image.references) refs.push_back(metrics::caption_words(r));
  return refs;
}

}  // namespace

double caption_cider(const captioner::Captioner& model, const text::Vocab& vocab,
                     const std::vector<CaptionSample>& images, const metrics::IdfTable& idf) {
  std::vector<metrics::Tokens> cands;
  std::vector<std::vector<metrics::Tokens>> refs;
  captioner::DecodeConfig greedy;
  greedy.max_length = model.config().max_length;
  for (const auto& image : images) {
    cands.push_back(metrics::caption_words(captioner::caption_text(captioner::decode_greedy(model, image.regions, greedy).ids, vocab)));
    refs.push_back(reference_words(image));
  }
  return metrics::corpus_cider(cands, refs, idf);
}

CaptionerBundle train_captioner(const RunConfig& cfg, const std::vector<CaptionSample>& images,
                                const text::Vocab& vocab, bool scst, CaptionerReport* report, const LogSink& log) {
  if (images.empty()) throw InputError("no caption images");
  for (const auto& image : images) {
    if (image.references.empty()) throw InputError("caption image '" + image.id + "' has no references");
  }
  const CaptionerSchedule& sched = cfg.caption_train;
  CaptionerBundle bundle;
  bundle.config = cfg;
  bundle.vocab = vocab;
  bundle.model = std::make_unique<captioner::Captioner>(resolved_captioner(cfg, vocab));
  captioner::Captioner& model = *bundle.model;
  ParameterStore& store = model.params();

  // Deterministic split into training and selection images.
  std::vector<std::size_t> order(images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(cfg.seed, Rng::hash("caption-holdout"));
  shuffle_in_place(order, split_rng);
  const auto held = static_cast<std::size_t>(std::llround(sched.holdout_fraction * static_cast<double>(images.size())));
  if (held >= images.size()) throw InputError("caption holdout leaves no training images");
  std::vector<CaptionSample> train_images, select_images;
  for (std::size_t i = 0; i < order.size(); ++i) (i < held ? select_images : train_images).push_back(images[order[i]]);
  if (select_images.empty()) select_images = train_images;

  std::vector<captioner::CaptionTarget> targets;
  std::vector<std::vector<metrics::Tokens>> train_refs;
  for (const auto& image : train_images) {
    targets.push_back({image.regions, captioner::reference_ids(image.references.front(), vocab, model.config().max_length)});
    train_refs.push_back(reference_words(image));
  }
  const metrics::IdfTable idf = metrics::compute_idf(train_refs);

  CaptionerReport rep;
  rep.selection_images = select_images.size();
  rep.best_cider = -1.0;
  std::vector<Tensor> best = snapshot(store);
  auto consider = [&](const std::string& phase, std::size_t epoch, CaptionerEpoch& rec) {
    rec.cider = caption_cider(model, vocab, select_images, idf);
    if (rec.cider > rep.best_cider) {
      rep.best_cider = rec.cider;
      rep.best_phase = phase;
      rep.best_epoch = epoch;
      best = snapshot(store);
    }
  };
  const std::size_t every = std::max<std::size_t>(sched.eval_every, 1);

  // Cross-entropy phase.
  const std::size_t batches = (targets.size() + sched.batch_size - 1) / sched.batch_size;
  AdamOptions xe_opt;
  xe_opt.clip_norm = 1.0;
  xe_opt.schedule = schedule_for(sched.lr, sched.final_lr, sched.xe_epochs * batches, 0);
  Adam xe_adam(xe_opt);
  BatchSampler xe_sampler(targets.size(), cfg.seed);
  std::size_t global_step = 0;
  for (std::size_t epoch = 1; epoch <= sched.xe_epochs; ++epoch) {
    CaptionerEpoch rec{"xe", epoch};
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<captioner::CaptionTarget> batch;
      for (std::size_t i : xe_sampler.next(sched.batch_size)) batch.push_back(targets[i]);
      Tape tape;
      const Var loss = captioner::xe_loss(tape, model, batch);
      store.zero_grad();
      tape.backward(loss);
      const double lr = xe_adam.step(store);
      loss_sum += loss.value().item();
      ++global_step;
      if (log) log({global_step, loss.value().item(), lr});
    }
    rec.loss = loss_sum / static_cast<double>(batches);
    if (epoch % every == 0 || epoch == sched.xe_epochs) consider("xe", epoch, rec);
    rep.epochs.push_back(rec);
  }
  rep.xe_token_accuracy = captioner::token_accuracy(model, targets).value();
  rep.cider_after_xe = caption_cider(model, vocab, select_images, idf);
  if (sched.xe_epochs == 0) {
    CaptionerEpoch rec{"xe", 0};
    consider("xe", 0, rec);
  }

  // Self-critical phase.
  rep.cider_after_scst = rep.cider_after_xe;
  if (scst && sched.scst_epochs > 0) {
    AdamOptions sc_opt;
    sc_opt.clip_norm = 1.0;
    sc_opt.schedule.base_lr = sched.scst_lr;
    Adam sc_adam(sc_opt);
    BatchSampler sc_sampler(train_images.size(), cfg.seed ^ Rng::hash("scst"));
    Rng sample_rng(cfg.seed, Rng::hash("scst-samples"));
    captioner::DecodeConfig dc;
    dc.max_length = model.config().max_length;
    dc.temperature = sched.temperature;
    const std::size_t sc_batches = (train_images.size() + sched.batch_size - 1) / sched.batch_size;
    for (std::size_t epoch = 1; epoch <= sched.scst_epochs; ++epoch) {
      CaptionerEpoch rec{"scst", epoch};
      double loss_sum = 0.0;
      for (std::size_t b = 0; b < sc_batches; ++b) {
        const std::vector<std::size_t> idx = sc_sampler.next(sched.batch_size);
        Tape tape;
        std::vector<Var> terms;
        bool any_signal = false;
        for (std::size_t i : idx) {
          const captioner::ScstOutcome out = captioner::scst_step(tape, model, train_images[i].regions, train_refs[i],
                                                                   idf, vocab, dc, sample_rng);
          any_signal = any_signal || out.advantage() != 0.0;
          terms.push_back(out.surrogate);
        }
        Var total = terms.front();
        for (std::size_t k = 1; k < terms.size(); ++k) total = ops::add(total, terms[k]);
        const Var loss = ops::scale(total, 1.0 / static_cast<double>(terms.size()));
        loss_sum += loss.value().item();
        ++global_step;
        if (!any_signal) {
          // Adam would still move parameters on momentum alone.
          ++rec.skipped_steps;
          continue;
        }
        store.zero_grad();
        tape.backward(loss);
        const double lr = sc_adam.step(store);
        if (log) log({global_step, loss.value().item(), lr});
      }
      rec.loss = loss_sum / static_cast<double>(sc_batches);
      if (epoch % every == 0 || epoch == sched.scst_epochs) consider("scst", epoch, rec);
      rep.epochs.push_back(rec);
    }
    rep.cider_after_scst = caption_cider(model, vocab, select_images, idf);
  }

  restore(store, best);
  if (report) *report = std::move(rep);
  return bundle;
}

void save_captioner(const std::filesystem::path& path, const CaptionerBundle& captioner) {
  save_checkpoint(path, captioner.model->params(), metadata("captioner", captioner.config, captioner.vocab));
}

CaptionerBundle load_captioner(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  Metadata meta = parse_metadata(ckpt, "captioner");
  CaptionerBundle out;
  out.config = std::move(meta.config);
  out.vocab = std::move(meta.vocab);
  out.model = std::make_unique<captioner::Captioner>(resolved_captioner(out.config, out.vocab));
  load_parameters(ckpt, out.model->params());
  return out;
}

// ---------------------------------------------------------------------------

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::vector<MemeSample>& train,
                                      const std::vector<MemeSample>& dev, const text::Vocab& vocab) {
  std::vector<AblationRow> rows;
  for (int caption = 0; caption < 2; ++caption) {
    for (int labels = 0; labels < 2; ++labels) {
      for (int aug = 0; aug < 2; ++aug) {
        RunConfig cell = cfg;
        cell.inputs.flags.use_caption = caption == 1;
        cell.inputs.flags.use_object_labels = labels == 1;
        cell.inputs.use_augmentation = aug == 1;
        const Detector det = train_detector(cell, train, vocab);
        AblationRow row;
        row.use_caption = cell.inputs.flags.use_caption;
        row.use_object_labels = cell.inputs.flags.use_object_labels;
        row.use_augmentation = cell.inputs.use_augmentation;
        row.dev = evaluate(predict(det, dev), dev);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows, trn::Variant variant) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "variant,use_caption,use_object_labels,use_augmentation,dev_auroc,dev_accuracy\n";
  for (const auto& r : rows) {
    os << trn::to_string(variant) << ',' << r.use_caption << ',' << r.use_object_labels << ',' << r.use_augmentation
       << ',' << r.dev.auroc << ',' << r.dev.accuracy << '\n';
  }
  return os.str();
}

}  // namespace memetrn::pipeline
