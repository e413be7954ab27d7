#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace ctxnmt {

/// Token ids 0..3 are reserved in this order for checkpoint compatibility;
/// everything after is ranked by descending corpus frequency, ties broken
/// lexicographically. Lookup is total: unknown tokens map to kUnk.
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReservedCount = 4;

  std::vector<std::string> tokens;  // index = id, reserved block included
  std::unordered_map<std::string, int> ids;
  int cutoff = 0;  // the k this vocabulary was built with

  int size() const { return static_cast<int>(tokens.size()); }
  int lookup(const std::string& token) const {
    const auto it = ids.find(token);
    return it == ids.end() ? kUnk : it->second;
  }
  const std::string& surface(int id) const;  // throws on out-of-range id
};

/// Reserved surfaces, in id order. Corpus occurrences of these literals are
/// not double-counted as regular entries.
extern const char* const kReservedSurfaces[4];  // <pad> <unk> <bos> <eos>

/// k most frequent tokens after the reserved block. Throws on an empty
/// corpus or k < 1.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, int k);

/// File format: the four reserved surfaces, one per line, then one token
/// per line; (line number - 1) = id.
void save_vocab(const std::string& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::string& path);

struct SentencePair {
  std::vector<std::string> source;
  std::vector<std::string> target;
  long line = 0;
};

struct FilterThresholds {
  double oov_src_max = 0.10;
  double oov_tgt_max = 0.10;
  int max_len = 50;
};

struct FilterReport {
  long kept = 0;
  long removed_length = 0;   // either side longer than max_len
  long removed_src_oov = 0;  // source OOV ratio strictly above threshold
  long removed_tgt_oov = 0;
  long removed() const { return removed_length + removed_src_oov + removed_tgt_oov; }
};

/// A pair is removed iff a side exceeds max_len tokens, or a side's OOV
/// ratio is STRICTLY above its threshold (exactly at threshold is kept:
/// the rule is "more than"). Each removed pair is counted once, first
/// matching reason in the order length, source OOV, target OOV.
std::vector<SentencePair> filter_pairs(const std::vector<SentencePair>& pairs,
                                       const Vocabulary& src_vocab,
                                       const Vocabulary& tgt_vocab,
                                       const FilterThresholds& thresholds,
                                       FilterReport* report = nullptr);

struct CorpusStats {
  long unique_tokens = 0;
  long total_tokens = 0;
  double coverage = 0.0;  // percent of tokens with id != kUnk
};

CorpusStats corpus_stats(const std::vector<std::vector<std::string>>& corpus,
                         const Vocabulary& vocab);

/// One training batch: rectangular id matrices padded with kPad. Source
/// rows end with EOS; target rows are BOS ... EOS. The true lengths
/// (pad excluded) are alongside; loss must ignore pad positions.
struct Batch {
  std::vector<std::vector<int>> source;
  std::vector<std::vector<int>> target;
  std::vector<int> source_len;
  std::vector<int> target_len;

  int size() const { return static_cast<int>(source.size()); }
};

/// Buckets pairs by source length, slices buckets into batches, then
/// shuffles the batch order with the seed (private Fisher–Yates so the
/// sequence is pinned, not library-dependent). Same seed, same batches.
std::vector<Batch> make_batches(const std::vector<SentencePair>& pairs,
                                const Vocabulary& src_vocab,
                                const Vocabulary& tgt_vocab, int batch_size,
                                std::uint64_t seed);

/// Whitespace-split (space/tab), no other processing: inputs are expected
/// to be pre-tokenized.
std::vector<std::string> tokenize_line(const std::string& line);

/// Minimal fallback tokenizer for raw text, NOT the pipeline any
/// publication used: whitespace split plus detaching of leading/trailing
/// ASCII punctuation (quotes, brackets, sentence marks). '^', '_', '<', '>'
/// and digits/letters never detach, so merge indicators and typed symbols
/// survive.
std::vector<std::string> fallback_tokenize(const std::string& line);

/// Reads a whole file as token lines via tokenize_line. Throws on open
/// failure. A trailing newline does not create an empty final line.
std::vector<std::vector<std::string>> read_token_lines(const std::string& path);

}  // namespace ctxnmt
