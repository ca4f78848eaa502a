#pragma once

// Line-delimited JSON files, one record per line. Doubles are written in
// shortest round-trip decimal form, so save -> load reproduces every bit.
//
//   memes:       {"id","text","label","regions":[{"feat","box","label","score"}],
//                 "caption"?, "origin"?}
//   captions:    {"id","regions","references":[...]}
//   provenance:  {"id","text_trigger","visual_trigger","flipped","rule","concepts"}
//   caption cache: {"id","caption","log_prob"}
//
// Predictions are CSV: header "id,proba,label", proba with 6 decimals.

#include <filesystem>
#include <string>
#include <vector>

#include "memetrn/data/meme.hpp"
#include "memetrn/data/world.hpp"

namespace memetrn {

void save_memes(const std::vector<MemeSample>& samples, const std::filesystem::path& path);
// Throws ParseError (with line number and missing field) on malformed lines and
// IntegrityError on duplicate ids or invalid regions.
std::vector<MemeSample> load_memes(const std::filesystem::path& path);

std::string meme_to_json_line(const MemeSample& sample);
MemeSample meme_from_json_line(const std::string& line, std::size_t line_no = 0);

void save_caption_samples(const std::vector<CaptionSample>& samples, const std::filesystem::path& path);
std::vector<CaptionSample> load_caption_samples(const std::filesystem::path& path);

void save_provenance(const std::vector<Provenance>& records, const std::filesystem::path& path);
std::vector<Provenance> load_provenance(const std::filesystem::path& path);

struct CaptionRecord {
  std::string id;
  std::string caption;
  double log_prob = 0.0;
  // Non-empty when captioning failed for this sample.
  std::string error;

  friend bool operator==(const CaptionRecord&, const CaptionRecord&) = default;
};

void save_caption_cache(const std::vector<CaptionRecord>& records, const std::filesystem::path& path);
std::vector<CaptionRecord> load_caption_cache(const std::filesystem::path& path);

struct Prediction {
  std::string id;
  double proba = 0.0;
  int label = 0;
};

void save_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

// Whole-file helpers.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace memetrn
