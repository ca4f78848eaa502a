#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "memetrn/captioner/captioner.hpp"
#include "memetrn/data/world.hpp"
#include "memetrn/embedding/embedding.hpp"
#include "memetrn/trn/model.hpp"

namespace memetrn::pipeline {

// Which inputs reach the detector. The caption, object-label and
// augmentation switches are the axes of the ablation grid.
struct DetectorInputs {
  embedding::InputFlags flags;
  bool use_augmentation = false;
  // Paraphrases per training sample: 2, 5 or 10.
  int augmentation_diversity = 2;

  friend bool operator==(const DetectorInputs&, const DetectorInputs&) = default;
};

struct TrainSchedule {
  std::size_t steps = 2000;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double final_lr = 1e-4;
  std::size_t warmup_steps = 50;
  double clip_norm = 1.0;
  std::size_t log_every = 50;

  friend bool operator==(const TrainSchedule&, const TrainSchedule&) = default;
};

struct CaptionerSchedule {
  std::size_t xe_epochs = 200;
  std::size_t scst_epochs = 20;
  std::size_t batch_size = 16;
  double lr = 1e-4;
  double final_lr = 4e-5;
  double scst_lr = 1e-5;
  // Share of caption images held out for checkpoint selection (0: select on
  // the training images).
  double holdout_fraction = 0.1;
  // Epochs between CIDEr-D evaluations for checkpoint selection.
  std::size_t eval_every = 10;
  double temperature = 1.0;

  friend bool operator==(const CaptionerSchedule&, const CaptionerSchedule&) = default;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t vocab_size = 1000;
  WorldConfig world = WorldConfig::defaults();
  // vocab_size and feature_dim are filled from the data at training time.
  trn::ModelConfig model;
  DetectorInputs inputs;
  TrainSchedule train;
  captioner::CaptionerConfig captioner;
  CaptionerSchedule caption_train;
};

RunConfig default_run_config();

// Nested JSON. Missing keys keep their defaults; unknown keys and values of
// the wrong type raise InputError naming the dotted key path.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
// Fully resolved configuration, every key present, pretty-printed.
std::string run_config_json(const RunConfig& cfg);

}  // namespace memetrn::pipeline
