#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "memetrn/captioner/captioner.hpp"
#include "memetrn/data/dataset_io.hpp"
#include "memetrn/data/world.hpp"
#include "memetrn/pipeline/config.hpp"
#include "memetrn/text/vocab.hpp"
#include "memetrn/trn/model.hpp"

namespace memetrn::pipeline {

// ---------------------------------------------------------------------------
// Dataset directories
//
//   train.jsonl dev.jsonl test.jsonl   memes
//   captions.jsonl                     captioner training images
//   provenance.jsonl                   planted indicators per meme
//   vocab.txt                          shared WordPiece vocabulary
//   config.json                        resolved run configuration

struct DatasetFiles {
  std::filesystem::path dir;

  std::filesystem::path split(const std::string& name) const { return dir / (name + ".jsonl"); }
  std::filesystem::path captions() const { return dir / "captions.jsonl"; }
  std::filesystem::path provenance() const { return dir / "provenance.jsonl"; }
  std::filesystem::path vocab() const { return dir / "vocab.txt"; }
  std::filesystem::path config() const { return dir / "config.json"; }
};

// Vocabulary over the training memes (OCR, captions, region labels), the
// caption references and the world's lexicons.
text::Vocab corpus_vocab(const std::vector<MemeSample>& train, const std::vector<CaptionSample>& captions,
                         const WorldConfig& world, std::size_t target_size);

// Generates the world and writes every dataset file. Returns the world.
SyntheticWorld write_dataset(const RunConfig& cfg, const std::filesystem::path& dir);

// Loads vocab.txt when present, otherwise builds it from the training split.
text::Vocab dataset_vocab(const DatasetFiles& files, const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Detector

struct LogRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

using LogSink = std::function<void(const LogRecord&)>;

struct Detector {
  RunConfig config;
  text::Vocab vocab;
  std::unique_ptr<trn::DetectorModel> model;

  embedding::InputSequence encode(const MemeSample& sample) const;
};

// Training set after optional paraphrase augmentation: every original
// followed by its rewrites.
std::vector<MemeSample> augment_training_set(const std::vector<MemeSample>& train, const RunConfig& cfg);

// Adam on mean BCE over shuffled mini-batches. Batch order, dropout masks and
// initialisation are all derived from cfg.seed.
Detector train_detector(const RunConfig& cfg, const std::vector<MemeSample>& train, const text::Vocab& vocab,
                        const LogSink& log = {});

std::vector<Prediction> predict(const Detector& detector, const std::vector<MemeSample>& samples);

struct Evaluation {
  double auroc = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

// Joins predictions to gold labels by id. Throws InputError when a gold id
// has no prediction.
Evaluation evaluate(const std::vector<Prediction>& predictions, const std::vector<MemeSample>& gold);

void save_detector(const std::filesystem::path& path, const Detector& detector);
Detector load_detector(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Captioner

struct CaptionerEpoch {
  std::string phase;  // "xe" or "scst"
  std::size_t epoch = 0;
  double loss = 0.0;
  // Corpus CIDEr-D on the selection images, or -1 when not evaluated.
  double cider = -1.0;
  // SCST only: steps skipped because every advantage in the batch was zero.
  std::size_t skipped_steps = 0;
};

struct CaptionerReport {
  std::vector<CaptionerEpoch> epochs;
  // Teacher-forced accuracy on the training references after the XE phase.
  double xe_token_accuracy = 0.0;
  // Corpus CIDEr-D on the selection images of the final XE and final SCST
  // parameters (before best-checkpoint selection).
  double cider_after_xe = 0.0;
  double cider_after_scst = 0.0;
  double best_cider = 0.0;
  std::string best_phase;
  std::size_t best_epoch = 0;
  std::size_t selection_images = 0;
};

struct CaptionerBundle {
  RunConfig config;
  text::Vocab vocab;
  std::unique_ptr<captioner::Captioner> model;
};

// XE on each image's canonical reference (reference 0), then optionally SCST
// with a CIDEr-D reward whose IDF is frozen from the training references. The
// returned parameters are the ones with the best selection CIDEr-D.
CaptionerBundle train_captioner(const RunConfig& cfg, const std::vector<CaptionSample>& images, const text::Vocab& vocab,
                                bool scst, CaptionerReport* report = nullptr, const LogSink& log = {});

// Corpus CIDEr-D of greedy captions against all references.
double caption_cider(const captioner::Captioner& model, const text::Vocab& vocab,
                     const std::vector<CaptionSample>& images, const metrics::IdfTable& idf);

void save_captioner(const std::filesystem::path& path, const CaptionerBundle& captioner);
CaptionerBundle load_captioner(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Ablation over (caption, object labels, augmentation)

struct AblationRow {
  bool use_caption = false;
  bool use_object_labels = false;
  bool use_augmentation = false;
  Evaluation dev;
};

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::vector<MemeSample>& train,
                                      const std::vector<MemeSample>& dev, const text::Vocab& vocab);
std::string ablation_csv(const std::vector<AblationRow>& rows, trn::Variant variant);

}  // namespace memetrn::pipeline
