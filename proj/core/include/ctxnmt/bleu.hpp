#pragma once

#include <array>
#include <string>
#include <vector>

namespace ctxnmt {

struct BleuReport {
  double bleu = 0.0;  // 0..100
  std::array<double, 4> precisions{};
  double brevity_penalty = 1.0;
  long candidate_length = 0;
  long reference_length = 0;
};

// Corpus-level BLEU-4, one reference per candidate, no smoothing: clipped
// modified n-gram precisions aggregated over the corpus, geometric mean,
// brevity penalty exp(1 - r/c) for c < r. Any p_n = 0 gives score 0.
// Throws std::invalid_argument on size mismatch or an empty corpus.
BleuReport corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                       const std::vector<std::vector<std::string>>& references);

// Same scorer over id sequences (training-time dev metric).
BleuReport corpus_bleu_ids(const std::vector<std::vector<int>>& candidates,
                           const std::vector<std::vector<int>>& references);

}  // namespace ctxnmt
