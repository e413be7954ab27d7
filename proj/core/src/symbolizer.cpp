#include "ctxnmt/symbolizer.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>

namespace ctxnmt {

namespace {

const std::string kLAngle = "\xE2\x9F\xA8";  // U+27E8
const std::string kRAngle = "\xE2\x9F\xA9";  // U+27E9
const std::string kMerge = "^^";

bool has_merge_prefix(const std::string& t) {
  return t.size() >= 2 && t[0] == '^' && t[1] == '^';
}

char kind_letter(SymbolKind k) {
  switch (k) {
    case SymbolKind::kDigit: return 'N';
    case SymbolKind::kProperNoun: return 'S';
    case SymbolKind::kAcronym: return 'C';
  }
  return '?';
}

bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

// Decodes UTF-8; each invalid byte decodes as its own value so arbitrary
// input never throws. Latin-1 letters are all this module cares about.
std::vector<std::uint32_t> code_points(const std::string& s) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < s.size();) {
    const unsigned char b = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    std::uint32_t cp = b;
    if (b >= 0xF0) {
      len = 4;
      cp = b & 0x07u;
    } else if (b >= 0xE0) {
      len = 3;
      cp = b & 0x0Fu;
    } else if (b >= 0xC0) {
      len = 2;
      cp = b & 0x1Fu;
    }
    if (len > 1) {
      if (i + len > s.size()) len = 1, cp = b;
      for (std::size_t k = 1; k < len; ++k) {
        const unsigned char c = static_cast<unsigned char>(s[i + k]);
        if ((c & 0xC0u) != 0x80u) {  // not a continuation byte: bail out
          len = 1;
          cp = b;
          break;
        }
        cp = (cp << 6) | (c & 0x3Fu);
      }
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

// ASCII plus the Latin-1 supplement, enough for the European languages the
// pipeline targets. Anything else counts as neither case.
bool is_upper_cp(std::uint32_t c) {
  return (c >= 'A' && c <= 'Z') || (c >= 0xC0 && c <= 0xDE && c != 0xD7);
}
bool is_lower_cp(std::uint32_t c) {
  return (c >= 'a' && c <= 'z') || (c >= 0xDF && c <= 0xFF && c != 0xF7);
}
bool is_letter_cp(std::uint32_t c) { return is_upper_cp(c) || is_lower_cp(c); }

// All-capital word: at least two letters, nothing but uppercase letters.
bool is_all_caps(const std::string& t) {
  const auto cps = code_points(t);
  if (cps.size() < 2) return false;
  for (std::uint32_t c : cps) {
    if (!is_upper_cp(c)) return false;
  }
  return true;
}

// Capitalized word: leading uppercase letter, and not an all-caps word
// (those belong to the acronym pass).
bool is_capitalized(const std::string& t) {
  const auto cps = code_points(t);
  return !cps.empty() && is_upper_cp(cps[0]) && !is_all_caps(t);
}

std::string lower_copy(const std::string& t) {
  std::string out;
  out.reserve(t.size());
  for (std::uint32_t c : code_points(t)) {
    if (is_upper_cp(c)) c += 0x20;
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xE0 | (c >> 12)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

bool in_list(const std::string& lowered, const std::vector<std::string>& list) {
  return std::find(list.begin(), list.end(), lowered) != list.end();
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t j = s.find(' ', i);
    if (j == std::string::npos) {
      out.push_back(s.substr(i));
      break;
    }
    out.push_back(s.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

// -------- digit handling --------

bool digit_token_body(const std::string& t) {
  if (t.empty() || !is_ascii_digit(t.front()) || !is_ascii_digit(t.back())) {
    return false;
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    const char c = t[i];
    if (is_ascii_digit(c)) continue;
    if (c != '.' && c != ',' && c != ' ') return false;
    // single separator, digits on both sides
    if (!is_ascii_digit(t[i - 1]) || !is_ascii_digit(t[i + 1])) return false;
  }
  return true;
}

// Splits a token body at digit/non-digit boundaries; interior '.'/',' with
// digits on both sides stay inside the digit run so "12,158" is one piece.
std::vector<std::string> split_body(const std::string& body) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < body.size()) {
    std::size_t j = i;
    if (is_ascii_digit(body[i])) {
      while (j < body.size()) {
        if (is_ascii_digit(body[j])) {
          ++j;
        } else if ((body[j] == '.' || body[j] == ',') && j + 1 < body.size() &&
                   is_ascii_digit(body[j + 1])) {
          j += 2;
        } else {
          break;
        }
      }
    } else {
      while (j < body.size() && !is_ascii_digit(body[j])) ++j;
    }
    parts.push_back(body.substr(i, j - i));
    i = j;
  }
  return parts;
}

// -------- phrase detection --------

struct Span {
  std::size_t start = 0;
  std::size_t len = 0;
};

struct Accepted {
  Span src;
  Span tgt;
  std::vector<std::string> surface_src;
  std::vector<std::string> surface_tgt;
};

std::vector<std::string> rebuild(const std::vector<std::string>& tokens,
                                 std::vector<std::pair<Span, std::string>> spans) {
  std::sort(spans.begin(), spans.end(),
            [](const auto& a, const auto& b) { return a.first.start < b.first.start; });
  std::vector<std::string> out;
  out.reserve(tokens.size());
  std::size_t next = 0;
  for (std::size_t i = 0; i < tokens.size();) {
    if (next < spans.size() && spans[next].first.start == i) {
      out.push_back(spans[next].second);
      i += spans[next].first.len;
      ++next;
    } else {
      out.push_back(tokens[i]);
      ++i;
    }
  }
  return out;
}

}  // namespace

std::string TypedSymbol::surface() const {
  return kLAngle + kind_letter(kind) + "_" + std::to_string(index) + kRAngle;
}

std::string TypedSymbol::ascii() const {
  return std::string("<") + kind_letter(kind) + "_" + std::to_string(index) + ">";
}

std::optional<TypedSymbol> parse_typed_symbol(const std::string& token) {
  // both renderings accepted: the glyph form is canonical in memory, the
  // ASCII form ("<N_1>") is the on-disk contract
  std::string langle = kLAngle, rangle = kRAngle;
  if (!token.empty() && token.front() == '<') {
    langle = "<";
    rangle = ">";
  }
  if (token.size() < langle.size() + 3 + rangle.size()) return std::nullopt;
  if (token.compare(0, langle.size(), langle) != 0) return std::nullopt;
  std::size_t i = langle.size();
  SymbolKind kind;
  switch (token[i]) {
    case 'N': kind = SymbolKind::kDigit; break;
    case 'S': kind = SymbolKind::kProperNoun; break;
    case 'C': kind = SymbolKind::kAcronym; break;
    default: return std::nullopt;
  }
  ++i;
  if (token[i] != '_') return std::nullopt;
  ++i;
  long index = 0;
  std::size_t digits = 0;
  while (i < token.size() && is_ascii_digit(token[i])) {
    if (++digits > 9) return std::nullopt;
    index = index * 10 + (token[i] - '0');
    ++i;
  }
  if (digits == 0 || index < 1) return std::nullopt;
  if (token.compare(i, std::string::npos, rangle) != 0) return std::nullopt;
  return TypedSymbol{kind, static_cast<int>(index)};
}

std::string to_ascii_symbols(const std::string& token) {
  const auto sym = parse_typed_symbol(token);
  return sym ? sym->ascii() : token;
}

std::string to_glyph_symbols(const std::string& token) {
  const auto sym = parse_typed_symbol(token);
  return sym ? sym->surface() : token;
}

const SymbolRule* SymbolRuleSet::find(const TypedSymbol& symbol) const {
  for (const SymbolRule& r : rules) {
    if (r.symbol == symbol) return &r;
  }
  return nullptr;
}

std::vector<std::string> separate_digit_units(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const std::string& tok : tokens) {
    if (parse_typed_symbol(tok)) {  // already-symbolized input passes through
      out.push_back(tok);
      continue;
    }
    const bool merged = has_merge_prefix(tok);
    const std::string body = merged ? tok.substr(2) : tok;
    const auto parts = split_body(body);
    if (parts.size() <= 1) {
      out.push_back(tok);
      continue;
    }
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i == 0) {
        out.push_back(merged ? kMerge + parts[i] : parts[i]);
      } else {
        out.push_back(kMerge + parts[i]);
      }
    }
  }
  return out;
}

bool is_digit_token(const std::string& token) { return digit_token_body(token); }

std::string normalize_number(const std::string& token) {
  if (!is_digit_token(token)) {
    throw std::invalid_argument("normalize_number: not a digit run: " + token);
  }
  // groups of digits and the separator preceding each group after the first
  std::vector<std::string> groups(1);
  std::vector<char> seps;
  for (char c : token) {
    if (is_ascii_digit(c)) {
      groups.back().push_back(c);
    } else {
      seps.push_back(c);
      groups.emplace_back();
    }
  }
  std::string out = groups[0];
  for (std::size_t i = 0; i < seps.size(); ++i) {
    const std::string& after = groups[i + 1];
    const bool grouping = seps[i] == ' ' || after.size() == 3;
    if (!grouping) out.push_back('.');
    out += after;
  }
  return out;
}

PassResult symbolize_digits(const std::vector<std::string>& src,
                            const std::vector<std::string>& tgt) {
  PassResult r;
  r.source = src;
  r.target = tgt;
  std::vector<bool> used(tgt.size(), false);
  int counter = 1;
  for (std::size_t i = 0; i < r.source.size(); ++i) {
    if (!is_digit_token(r.source[i])) continue;
    const std::string canon = normalize_number(r.source[i]);
    for (std::size_t j = 0; j < r.target.size(); ++j) {
      if (used[j] || !is_digit_token(r.target[j])) continue;
      if (normalize_number(r.target[j]) != canon) continue;
      const TypedSymbol sym{SymbolKind::kDigit, counter++};
      r.rules.push_back({sym, {r.source[i]}, {r.target[j]}});
      r.source[i] = sym.surface();
      r.target[j] = sym.surface();
      used[j] = true;
      break;
    }
  }
  return r;
}

namespace {

// Token roles inside the proper-noun pass. A member anchors or extends a
// phrase; a bridge ("of", "de", ...) may only sit between members. All-caps
// tokens count as members in pair mode only — "Warcraft III" is one phrase,
// but the target-side verbatim match is what keeps this safe; with no
// target to check, all-caps stay out ("The IMF" is not a name).
struct PhraseScan {
  std::vector<bool> member;
  std::vector<bool> regular_cap;
  std::vector<bool> in_run;
};

PhraseScan scan_tokens(const std::vector<std::string>& toks, bool absorb_all_caps,
                       const SymbolizerConfig& cfg) {
  PhraseScan s;
  const std::size_t n = toks.size();
  s.member.assign(n, false);
  s.regular_cap.assign(n, false);
  s.in_run.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    s.regular_cap[i] = is_capitalized(toks[i]);
    s.member[i] = s.regular_cap[i] || (absorb_all_caps && is_all_caps(toks[i]));
    const bool bridge =
        !s.member[i] && !is_all_caps(toks[i]) && in_list(lower_copy(toks[i]), cfg.functional_words);
    s.in_run[i] = s.member[i] || bridge;
  }
  return s;
}

struct Candidate {
  std::size_t start = 0;
  std::size_t len = 0;
};

// Phrase candidates: contiguous spans whose edges are members, holding at
// least `min_members` members of which at least one is a regular
// capitalized word. Bridges are interior by construction.
std::vector<Candidate> phrase_candidates(const PhraseScan& s, int min_members) {
  std::vector<Candidate> out;
  const std::size_t n = s.member.size();
  std::size_t i = 0;
  while (i < n) {
    if (!s.in_run[i]) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < n && s.in_run[end]) ++end;  // [i, end) is a raw run
    for (std::size_t a = i; a < end; ++a) {
      if (!s.member[a]) continue;
      int members = 0;
      int caps = 0;
      for (std::size_t b = a; b < end; ++b) {
        members += s.member[b] ? 1 : 0;
        caps += s.regular_cap[b] ? 1 : 0;
        if (!s.member[b]) continue;  // spans must end on a member
        if (members >= min_members && caps >= 1) {
          out.push_back({a, b - a + 1});
        }
      }
    }
    i = end;
  }
  // longest first, then leftmost
  std::sort(out.begin(), out.end(), [](const Candidate& x, const Candidate& y) {
    if (x.len != y.len) return x.len > y.len;
    return x.start < y.start;
  });
  return out;
}

bool span_free(const std::vector<bool>& used, std::size_t start, std::size_t len) {
  for (std::size_t i = start; i < start + len; ++i) {
    if (used[i]) return false;
  }
  return true;
}

}  // namespace

PassResult symbolize_proper_nouns(const std::vector<std::string>& src,
                                  const std::vector<std::string>& tgt,
                                  const SymbolizerConfig& cfg) {
  PassResult r;
  r.source = src;
  r.target = tgt;
  const int min_members = cfg.single_word_proper_nouns ? 1 : 2;
  const PhraseScan scan = scan_tokens(src, /*absorb_all_caps=*/true, cfg);
  std::vector<bool> src_used(src.size(), false);
  std::vector<bool> tgt_used(tgt.size(), false);
  std::vector<Accepted> accepted;

  for (const Candidate& c : phrase_candidates(scan, min_members)) {
    if (!span_free(src_used, c.start, c.len)) continue;
    // leftmost identical token sequence on the target side
    bool placed = false;
    for (std::size_t t0 = 0; t0 + c.len <= tgt.size() && !placed; ++t0) {
      if (!span_free(tgt_used, t0, c.len)) continue;
      bool equal = true;
      for (std::size_t k = 0; k < c.len; ++k) {
        if (tgt[t0 + k] != src[c.start + k]) {
          equal = false;
          break;
        }
      }
      if (!equal) continue;
      std::fill(src_used.begin() + static_cast<long>(c.start),
                src_used.begin() + static_cast<long>(c.start + c.len), true);
      std::fill(tgt_used.begin() + static_cast<long>(t0),
                tgt_used.begin() + static_cast<long>(t0 + c.len), true);
      Accepted a;
      a.src = {c.start, c.len};
      a.tgt = {t0, c.len};
      a.surface_src.assign(src.begin() + static_cast<long>(c.start),
                           src.begin() + static_cast<long>(c.start + c.len));
      a.surface_tgt = a.surface_src;
      accepted.push_back(std::move(a));
      placed = true;
    }
  }

  std::sort(accepted.begin(), accepted.end(),
            [](const Accepted& a, const Accepted& b) { return a.src.start < b.src.start; });
  std::vector<std::pair<Span, std::string>> src_spans, tgt_spans;
  int counter = 1;
  for (const Accepted& a : accepted) {
    const TypedSymbol sym{SymbolKind::kProperNoun, counter++};
    r.rules.push_back({sym, a.surface_src, a.surface_tgt});
    src_spans.emplace_back(a.src, sym.surface());
    tgt_spans.emplace_back(a.tgt, sym.surface());
  }
  r.source = rebuild(src, src_spans);
  r.target = rebuild(tgt, tgt_spans);
  return r;
}

PassResult symbolize_acronyms(const std::vector<std::string>& src,
                              const std::vector<std::string>& tgt) {
  PassResult r;
  r.source = src;
  r.target = tgt;
  std::vector<bool> src_used(src.size(), false);
  std::vector<bool> tgt_used(tgt.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (src pos, tgt pos)

  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!is_all_caps(src[i])) continue;
    for (std::size_t j = 0; j < tgt.size(); ++j) {
      if (tgt_used[j] || !is_all_caps(tgt[j]) || tgt[j] != src[i]) continue;
      pairs.emplace_back(i, j);
      src_used[i] = tgt_used[j] = true;
      break;
    }
  }

  // The cross-lingual case (IMF/FMI): exactly one all-caps word left on
  // each side pairs up even though the surfaces differ.
  std::vector<std::size_t> src_left, tgt_left;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (is_all_caps(src[i]) && !src_used[i]) src_left.push_back(i);
  }
  for (std::size_t j = 0; j < tgt.size(); ++j) {
    if (is_all_caps(tgt[j]) && !tgt_used[j]) tgt_left.push_back(j);
  }
  if (src_left.size() == 1 && tgt_left.size() == 1) {
    pairs.emplace_back(src_left[0], tgt_left[0]);
  }

  std::sort(pairs.begin(), pairs.end());
  int counter = 1;
  for (const auto& [i, j] : pairs) {
    const TypedSymbol sym{SymbolKind::kAcronym, counter++};
    r.rules.push_back({sym, {src[i]}, {tgt[j]}});
    r.source[i] = sym.surface();
    r.target[j] = sym.surface();
  }
  return r;
}

SymbolizedPair symbolize_pair(const std::vector<std::string>& src,
                              const std::vector<std::string>& tgt,
                              const SymbolizerConfig& cfg) {
  SymbolizedPair out;
  const auto src0 = separate_digit_units(src);
  const auto tgt0 = separate_digit_units(tgt);
  PassResult digits = symbolize_digits(src0, tgt0);
  PassResult propers = symbolize_proper_nouns(digits.source, digits.target, cfg);
  PassResult acronyms = symbolize_acronyms(propers.source, propers.target);
  out.source = std::move(acronyms.source);
  out.target = std::move(acronyms.target);
  out.rules.rules = std::move(digits.rules);
  out.rules.rules.insert(out.rules.rules.end(), propers.rules.begin(), propers.rules.end());
  out.rules.rules.insert(out.rules.rules.end(), acronyms.rules.begin(), acronyms.rules.end());
  return out;
}

SymbolizedSource symbolize_source_only(const std::vector<std::string>& src,
                                       const SymbolizerConfig& cfg) {
  SymbolizedSource out;
  out.source = separate_digit_units(src);

  int n_counter = 1;
  for (std::string& tok : out.source) {
    if (!is_digit_token(tok)) continue;
    const TypedSymbol sym{SymbolKind::kDigit, n_counter++};
    out.rules.rules.push_back({sym, {tok}, {tok}});
    tok = sym.surface();
  }

  // Whole maximal runs only: with no target side to confirm against there
  // is nothing to justify a sub-phrase split.
  const PhraseScan scan = scan_tokens(out.source, /*absorb_all_caps=*/false, cfg);
  const int min_members = cfg.single_word_proper_nouns ? 1 : 2;
  std::vector<std::pair<Span, std::string>> spans;
  std::vector<SymbolRule> phrase_rules;
  int s_counter = 1;
  std::size_t i = 0;
  const std::size_t n = out.source.size();
  while (i < n) {
    if (!scan.in_run[i]) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < n && scan.in_run[end]) ++end;
    std::size_t a = i, b = end;
    while (a < b && !scan.member[a]) ++a;
    while (b > a && !scan.member[b - 1]) --b;
    int members = 0;
    for (std::size_t k = a; k < b; ++k) members += scan.member[k] ? 1 : 0;
    if (members >= min_members && b > a) {
      const TypedSymbol sym{SymbolKind::kProperNoun, s_counter++};
      std::vector<std::string> surface(out.source.begin() + static_cast<long>(a),
                                       out.source.begin() + static_cast<long>(b));
      phrase_rules.push_back({sym, surface, surface});
      spans.emplace_back(Span{a, b - a}, sym.surface());
    }
    i = end;
  }
  out.source = rebuild(out.source, spans);
  out.rules.rules.insert(out.rules.rules.end(), phrase_rules.begin(), phrase_rules.end());

  int c_counter = 1;
  for (std::string& tok : out.source) {
    if (!is_all_caps(tok)) continue;
    const TypedSymbol sym{SymbolKind::kAcronym, c_counter++};
    out.rules.rules.push_back({sym, {tok}, {tok}});
    tok = sym.surface();
  }
  return out;
}

DesymbolizeResult desymbolize(const std::vector<std::string>& tokens,
                              const SymbolRuleSet& rules) {
  DesymbolizeResult r;
  std::vector<std::string> spliced;
  spliced.reserve(tokens.size());
  for (const std::string& tok : tokens) {
    const auto sym = parse_typed_symbol(tok);
    if (!sym) {
      spliced.push_back(tok);
      continue;
    }
    const SymbolRule* rule = rules.find(*sym);
    if (!rule) {
      spliced.push_back(tok);  // keep the literal token, never crash
      ++r.missing_rules;
      continue;
    }
    spliced.insert(spliced.end(), rule->target_surface.begin(),
                   rule->target_surface.end());
  }
  for (std::string& tok : spliced) {
    if (has_merge_prefix(tok)) {
      if (r.tokens.empty()) {
        ++r.dangling_merges;
        r.tokens.push_back(tok.substr(2));
      } else {
        r.tokens.back() += tok.substr(2);
      }
    } else {
      r.tokens.push_back(std::move(tok));
    }
  }
  return r;
}

namespace {

std::string escape_field(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\\') {
      out += "\\\\";
    } else if (c == '\t') {
      out += "\\t";
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string unescape_field(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out.push_back(s[i]);
      continue;
    }
    ++i;
    switch (s[i]) {
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      default: out.push_back(s[i]); break;
    }
  }
  return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (true) {
    const std::size_t j = s.find(sep, i);
    if (j == std::string::npos) {
      out.push_back(s.substr(i));
      return out;
    }
    out.push_back(s.substr(i, j - i));
    i = j + 1;
  }
}

}  // namespace

std::string format_rules_line(const SymbolRuleSet& rules) {
  std::string out = std::to_string(rules.line);
  for (const SymbolRule& r : rules.rules) {
    out.push_back('\t');
    out.push_back(kind_letter(r.symbol.kind));
    out.push_back(':');
    out += std::to_string(r.symbol.index);
    out.push_back('\t');
    out += escape_field(join_tokens(r.source_surface));
    out.push_back('\t');
    out += escape_field(join_tokens(r.target_surface));
  }
  return out;
}

SymbolRuleSet parse_rules_line(const std::string& line) {
  const auto fields = split_on(line, '\t');
  SymbolRuleSet out;
  try {
    std::size_t pos = 0;
    out.line = std::stol(fields.at(0), &pos);
    if (pos != fields[0].size()) throw std::invalid_argument("junk");
  } catch (const std::exception&) {
    throw std::invalid_argument("rules: bad line number field: " + fields[0]);
  }
  if ((fields.size() - 1) % 3 != 0) {
    throw std::invalid_argument("rules: field count not a multiple of 3");
  }
  for (std::size_t i = 1; i + 2 < fields.size(); i += 3) {
    const std::string& head = fields[i];
    SymbolRule rule;
    if (head.size() < 3 || head[1] != ':') {
      throw std::invalid_argument("rules: bad symbol field: " + head);
    }
    switch (head[0]) {
      case 'N': rule.symbol.kind = SymbolKind::kDigit; break;
      case 'S': rule.symbol.kind = SymbolKind::kProperNoun; break;
      case 'C': rule.symbol.kind = SymbolKind::kAcronym; break;
      default: throw std::invalid_argument("rules: bad symbol kind: " + head);
    }
    try {
      std::size_t pos = 0;
      rule.symbol.index = std::stoi(head.substr(2), &pos);
      if (pos != head.size() - 2 || rule.symbol.index < 1) {
        throw std::invalid_argument("junk");
      }
    } catch (const std::exception&) {
      throw std::invalid_argument("rules: bad symbol index: " + head);
    }
    rule.source_surface = split_tokens(unescape_field(fields[i + 1]));
    rule.target_surface = split_tokens(unescape_field(fields[i + 2]));
    if (rule.source_surface.empty() || rule.target_surface.empty()) {
      throw std::invalid_argument("rules: empty surface for " + head);
    }
    out.rules.push_back(std::move(rule));
  }
  return out;
}

}  // namespace ctxnmt
