#include "memetrn/metrics/classification.hpp"

#include <algorithm>
#include <numeric>

#include "memetrn/errors.hpp"

namespace memetrn::metrics {

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InputError("auroc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1..j share their average.
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum_pos += midrank;
        ++pos;
      } else if (labels[order[k]] != 0) {
        throw InputError("auroc: labels must be 0 or 1");
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) {
    throw EvaluationError("auroc needs at least one positive and one negative (got " + std::to_string(pos) + "/" +
                          std::to_string(neg) + ")");
  }
  const double p = static_cast<double>(pos);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double auroc(std::span<const ScoredSample> samples) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& s : samples) {
    scores.push_back(s.score);
    labels.push_back(s.label);
  }
  return auroc(scores, labels);
}

double accuracy(std::span<const ScoredSample> samples, double threshold) {
  if (samples.empty()) throw EvaluationError("accuracy of an empty set");
  std::size_t correct = 0;
  for (const auto& s : samples) correct += ((s.score >= threshold ? 1 : 0) == s.label) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace memetrn::metrics
