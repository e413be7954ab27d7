#include "ctxnmt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "ctxnmt/rng.hpp"

namespace ctxnmt {

const char* const kReservedSurfaces[4] = {"<pad>", "<unk>", "<bos>", "<eos>"};

const std::string& Vocabulary::surface(int id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("vocabulary: id " + std::to_string(id) +
                            " outside [0," + std::to_string(size()) + ")");
  }
  return tokens[static_cast<std::size_t>(id)];
}

namespace {

bool is_reserved_surface(const std::string& token) {
  for (const char* r : kReservedSurfaces) {
    if (token == r) return true;
  }
  return false;
}

Vocabulary from_ranked(std::vector<std::string> ranked, int k) {
  Vocabulary v;
  v.cutoff = k;
  v.tokens.reserve(ranked.size() + Vocabulary::kReservedCount);
  for (const char* r : kReservedSurfaces) v.tokens.emplace_back(r);
  for (std::string& t : ranked) v.tokens.push_back(std::move(t));
  for (int id = 0; id < v.size(); ++id) {
    if (!v.ids.emplace(v.tokens[static_cast<std::size_t>(id)], id).second) {
      throw std::invalid_argument("vocabulary: duplicate token \"" +
                                  v.tokens[static_cast<std::size_t>(id)] + "\"");
    }
  }
  return v;
}

// Deterministic shuffle pinned to this exact sequence; std::shuffle's draw
// pattern is library-specific.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  Xorshift64Star rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next() % i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, int k) {
  if (k < 1) throw std::invalid_argument("build_vocab: k must be >= 1");
  std::unordered_map<std::string, long> freq;
  long total = 0;
  for (const auto& line : corpus) {
    for (const auto& tok : line) {
      if (is_reserved_surface(tok)) continue;
      ++freq[tok];
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("build_vocab: empty corpus");

  std::vector<std::pair<std::string, long>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<std::size_t>(k) < ranked.size()) {
    ranked.resize(static_cast<std::size_t>(k));
  }
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, count] : ranked) tokens.push_back(std::move(tok));
  return from_ranked(std::move(tokens), k);
}

void save_vocab(const std::string& path, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("vocabulary: cannot open " + path + " for writing");
  for (const std::string& tok : vocab.tokens) out << tok << '\n';
  out.flush();
  if (!out) throw std::runtime_error("vocabulary: write failed for " + path);
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("vocabulary: cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.size() < Vocabulary::kReservedCount) {
    throw std::runtime_error("vocabulary: " + path + " is missing the reserved header");
  }
  for (int i = 0; i < Vocabulary::kReservedCount; ++i) {
    if (lines[static_cast<std::size_t>(i)] != kReservedSurfaces[i]) {
      throw std::runtime_error("vocabulary: " + path + " line " + std::to_string(i + 1) +
                               " must be " + kReservedSurfaces[i]);
    }
  }
  std::vector<std::string> ranked;
  ranked.reserve(lines.size() - Vocabulary::kReservedCount);
  for (std::size_t i = Vocabulary::kReservedCount; i < lines.size(); ++i) {
    if (lines[i].empty()) {
      throw std::runtime_error("vocabulary: " + path + " line " + std::to_string(i + 1) +
                               " is empty");
    }
    ranked.push_back(lines[i]);
  }
  Vocabulary v = from_ranked(std::move(ranked), static_cast<int>(lines.size()) -
                                                    Vocabulary::kReservedCount);
  return v;
}

namespace {

double oov_ratio(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  if (tokens.empty()) return 0.0;
  long oov = 0;
  for (const std::string& tok : tokens) {
    if (vocab.lookup(tok) == Vocabulary::kUnk) ++oov;
  }
  return static_cast<double>(oov) / static_cast<double>(tokens.size());
}

}  // namespace

std::vector<SentencePair> filter_pairs(const std::vector<SentencePair>& pairs,
                                       const Vocabulary& src_vocab,
                                       const Vocabulary& tgt_vocab,
                                       const FilterThresholds& thresholds,
                                       FilterReport* report) {
  FilterReport local;
  std::vector<SentencePair> kept;
  kept.reserve(pairs.size());
  for (const SentencePair& p : pairs) {
    if (p.source.empty() || p.target.empty() ||
        p.source.size() > static_cast<std::size_t>(thresholds.max_len) ||
        p.target.size() > static_cast<std::size_t>(thresholds.max_len)) {
      ++local.removed_length;
      continue;
    }
    if (oov_ratio(p.source, src_vocab) > thresholds.oov_src_max) {
      ++local.removed_src_oov;
      continue;
    }
    if (oov_ratio(p.target, tgt_vocab) > thresholds.oov_tgt_max) {
      ++local.removed_tgt_oov;
      continue;
    }
    kept.push_back(p);
    ++local.kept;
  }
  if (report) *report = local;
  return kept;
}

CorpusStats corpus_stats(const std::vector<std::vector<std::string>>& corpus,
                         const Vocabulary& vocab) {
  CorpusStats stats;
  std::unordered_map<std::string, bool> seen;
  long known = 0;
  for (const auto& line : corpus) {
    for (const auto& tok : line) {
      ++stats.total_tokens;
      seen.emplace(tok, true);
      if (vocab.lookup(tok) != Vocabulary::kUnk) ++known;
    }
  }
  stats.unique_tokens = static_cast<long>(seen.size());
  stats.coverage = stats.total_tokens == 0
                       ? 0.0
                       : 100.0 * static_cast<double>(known) /
                             static_cast<double>(stats.total_tokens);
  return stats;
}

std::vector<Batch> make_batches(const std::vector<SentencePair>& pairs,
                                const Vocabulary& src_vocab,
                                const Vocabulary& tgt_vocab, int batch_size,
                                std::uint64_t seed) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");

  // bucket by source length; std::map keeps the length order stable
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    buckets[pairs[i].source.size()].push_back(i);
  }
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [len, idxs] : buckets) {
    for (std::size_t at = 0; at < idxs.size(); at += static_cast<std::size_t>(batch_size)) {
      const std::size_t n = std::min(idxs.size() - at, static_cast<std::size_t>(batch_size));
      groups.emplace_back(idxs.begin() + static_cast<long>(at),
                          idxs.begin() + static_cast<long>(at + n));
    }
  }
  seeded_shuffle(groups, seed);

  std::vector<Batch> batches;
  batches.reserve(groups.size());
  for (const auto& group : groups) {
    Batch b;
    std::size_t max_src = 0, max_tgt = 0;
    for (std::size_t idx : group) {
      max_src = std::max(max_src, pairs[idx].source.size() + 1);  // + EOS
      max_tgt = std::max(max_tgt, pairs[idx].target.size() + 2);  // BOS + EOS
    }
    for (std::size_t idx : group) {
      const SentencePair& p = pairs[idx];
      std::vector<int> src;
      src.reserve(max_src);
      for (const std::string& tok : p.source) src.push_back(src_vocab.lookup(tok));
      src.push_back(Vocabulary::kEos);
      b.source_len.push_back(static_cast<int>(src.size()));
      src.resize(max_src, Vocabulary::kPad);

      std::vector<int> tgt;
      tgt.reserve(max_tgt);
      tgt.push_back(Vocabulary::kBos);
      for (const std::string& tok : p.target) tgt.push_back(tgt_vocab.lookup(tok));
      tgt.push_back(Vocabulary::kEos);
      b.target_len.push_back(static_cast<int>(tgt.size()));
      tgt.resize(max_tgt, Vocabulary::kPad);

      b.source.push_back(std::move(src));
      b.target.push_back(std::move(tgt));
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<std::string> tokenize_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

namespace {

bool detachable_punct(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case '(': case ')': case '[': case ']': case '{': case '}':
    case '"': case '\'':
      return true;
    default:
      return false;
  }
}

}  // namespace

std::vector<std::string> fallback_tokenize(const std::string& line) {
  std::vector<std::string> out;
  for (const std::string& raw : tokenize_line(line)) {
    std::size_t a = 0, b = raw.size();
    std::vector<std::string> lead;
    while (a < b && detachable_punct(raw[a])) lead.emplace_back(1, raw[a++]);
    std::vector<std::string> trail;
    while (b > a && detachable_punct(raw[b - 1])) trail.emplace_back(1, raw[--b]);
    for (auto& t : lead) out.push_back(std::move(t));
    if (b > a) out.push_back(raw.substr(a, b - a));
    for (auto it = trail.rbegin(); it != trail.rend(); ++it) out.push_back(std::move(*it));
  }
  return out;
}

std::vector<std::vector<std::string>> read_token_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("corpus: cannot open " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(tokenize_line(line));
  }
  return out;
}

}  // namespace ctxnmt
