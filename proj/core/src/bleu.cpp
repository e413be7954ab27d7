#include "ctxnmt/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ctxnmt {

namespace {

template <typename Token>
BleuReport score(const std::vector<std::vector<Token>>& candidates,
                 const std::vector<std::vector<Token>>& references) {
  if (candidates.size() != references.size()) {
    throw std::invalid_argument("bleu: " + std::to_string(candidates.size()) +
                                " candidates vs " +
                                std::to_string(references.size()) + " references");
  }
  if (candidates.empty()) throw std::invalid_argument("bleu: empty corpus");

  BleuReport report;
  long matched[4] = {0, 0, 0, 0};
  long total[4] = {0, 0, 0, 0};
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const auto& cand = candidates[s];
    const auto& ref = references[s];
    report.candidate_length += static_cast<long>(cand.size());
    report.reference_length += static_cast<long>(ref.size());
    for (int n = 1; n <= 4; ++n) {
      if (cand.size() < static_cast<std::size_t>(n)) continue;
      std::map<std::vector<Token>, long> ref_counts;
      for (std::size_t i = 0; i + n <= ref.size(); ++i) {
        ++ref_counts[std::vector<Token>(ref.begin() + i, ref.begin() + i + n)];
      }
      std::map<std::vector<Token>, long> cand_counts;
      for (std::size_t i = 0; i + n <= cand.size(); ++i) {
        ++cand_counts[std::vector<Token>(cand.begin() + i, cand.begin() + i + n)];
      }
      for (const auto& [gram, count] : cand_counts) {
        const auto it = ref_counts.find(gram);
        const long clip = it == ref_counts.end() ? 0 : it->second;
        matched[n - 1] += std::min(count, clip);
        total[n - 1] += count;
      }
    }
  }

  bool any_zero = false;
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    report.precisions[static_cast<std::size_t>(n)] =
        total[n] ? static_cast<double>(matched[n]) / static_cast<double>(total[n])
                 : 0.0;
    if (matched[n] == 0) {
      any_zero = true;
    } else {
      log_sum += 0.25 * std::log(report.precisions[static_cast<std::size_t>(n)]);
    }
  }
  if (report.candidate_length > 0 &&
      report.candidate_length < report.reference_length) {
    report.brevity_penalty =
        std::exp(1.0 - static_cast<double>(report.reference_length) /
                           static_cast<double>(report.candidate_length));
  }
  report.bleu = any_zero ? 0.0 : 100.0 * report.brevity_penalty * std::exp(log_sum);
  return report;
}

}  // namespace

BleuReport corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                       const std::vector<std::vector<std::string>>& references) {
  return score(candidates, references);
}

BleuReport corpus_bleu_ids(const std::vector<std::vector<int>>& candidates,
                           const std::vector<std::vector<int>>& references) {
  return score(candidates, references);
}

}  // namespace ctxnmt
