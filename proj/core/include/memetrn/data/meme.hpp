#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace memetrn {

// One detected object. Box is [x1, y1, x2, y2] normalised to [0, 1] with
// x1 < x2 and y1 < y2.
struct RegionFeature {
  std::vector<double> feat;
  std::array<double, 4> box{0.0, 0.0, 1.0, 1.0};
  std::string label;
  double score = 1.0;

  friend bool operator==(const RegionFeature&, const RegionFeature&) = default;
};

bool valid_box(const std::array<double, 4>& box);

struct MemeSample {
  std::string id;
  std::string text;
  int label = 0;
  std::vector<RegionFeature> regions;
  std::optional<std::string> caption;
  // Id of the sample this one was derived from (augmentation lineage).
  // Empty for originals.
  std::string origin;

  const std::string& lineage() const { return origin.empty() ? id : origin; }

  friend bool operator==(const MemeSample&, const MemeSample&) = default;
};

// Image/caption pair for captioner training.
struct CaptionSample {
  std::string id;
  std::vector<RegionFeature> regions;
  std::vector<std::string> references;

  friend bool operator==(const CaptionSample&, const CaptionSample&) = default;
};

}  // namespace memetrn
