#pragma once

#include <span>
#include <string>
#include <vector>

namespace memetrn::metrics {

struct ScoredSample {
  std::string id;
  double score = 0.0;
  int label = 0;
};

// Area under the ROC curve from the rank-sum statistic with midranks for ties:
// (R+ - P(P+1)/2) / (P N). Throws EvaluationError unless both classes occur.
double auroc(std::span<const ScoredSample> samples);
double auroc(std::span<const double> scores, std::span<const int> labels);

// Fraction correct when predicting positive for score >= threshold.
double accuracy(std::span<const ScoredSample> samples, double threshold = 0.5);

}  // namespace memetrn::metrics
