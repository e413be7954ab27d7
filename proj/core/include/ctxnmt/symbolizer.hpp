#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ctxnmt {

// Typed positional tokens: "⟨N_n⟩" (digit), "⟨S_n⟩" (proper-noun phrase),
// "⟨C_n⟩" (acronym). n counts first occurrences in the SOURCE sentence,
// per kind, starting at 1.
enum class SymbolKind { kDigit, kProperNoun, kAcronym };

struct TypedSymbol {
  SymbolKind kind;
  int index = 0;

  std::string surface() const;  // canonical glyph rendering, e.g. "⟨N_12⟩"
  std::string ascii() const;    // on-disk rendering, e.g. "<N_12>"
  bool operator==(const TypedSymbol&) const = default;
};

// "⟨N_12⟩" or its ASCII rendering "<N_12>" -> {kDigit, 12}; else nullopt.
std::optional<TypedSymbol> parse_typed_symbol(const std::string& token);

// Re-render a token if it is a typed symbol; anything else passes through.
std::string to_ascii_symbols(const std::string& token);
std::string to_glyph_symbols(const std::string& token);

struct SymbolRule {
  TypedSymbol symbol;
  std::vector<std::string> source_surface;
  std::vector<std::string> target_surface;
};

// Rules are scoped to one sentence pair, never global.
struct SymbolRuleSet {
  long line = 0;
  std::vector<SymbolRule> rules;

  const SymbolRule* find(const TypedSymbol& symbol) const;
};

struct SymbolizerConfig {
  // Lowercase functional words that may appear inside a capitalized phrase
  // without breaking it ("World of Warcraft"). Compared case-insensitively
  // in phrase-internal position only.
  std::vector<std::string> functional_words = {"of", "de",  "du",  "des", "von",
                                               "van", "the", "la", "le"};
  // Off by default: symbolize single capitalized words too. Not the stated
  // rule (which wants phrases of more than one word); provided as a switch.
  bool single_word_proper_nouns = false;
};

// "137Kg" -> "137", "^^Kg"; "2nd" -> "2", "^^nd". The "^^" prefix marks a
// fragment that rejoins its left neighbour without a space when
// de-symbolizing. Interior '.'/',' flanked by digits stay inside the digit
// run ("12,158" survives whole); typed symbols pass through untouched.
std::vector<std::string> separate_digit_units(const std::vector<std::string>& tokens);

// True when the token is a digit run with optional single interior '.', ','
// or ' ' separators between digit groups — the shape eligible for
// cross-lingual digit matching.
bool is_digit_token(const std::string& token);

// Canonical form for matching only (never for output): grouping separators
// stripped, decimal mark rendered '.'. Spaces always group; a '.' or ','
// followed by exactly three digits groups, anything else is a decimal mark
// (heuristic — locale is unknown at this point). Throws std::invalid_argument
// when the token is not a digit run.
std::string normalize_number(const std::string& token);

struct PassResult {
  std::vector<std::string> source;
  std::vector<std::string> target;
  std::vector<SymbolRule> rules;
};

// The three rewriting passes, applied in this order. Each assumes the
// previous ones already ran and starts its counter at 1.
PassResult symbolize_digits(const std::vector<std::string>& src,
                            const std::vector<std::string>& tgt);
PassResult symbolize_proper_nouns(const std::vector<std::string>& src,
                                  const std::vector<std::string>& tgt,
                                  const SymbolizerConfig& cfg = {});
PassResult symbolize_acronyms(const std::vector<std::string>& src,
                              const std::vector<std::string>& tgt);

struct SymbolizedPair {
  std::vector<std::string> source;
  std::vector<std::string> target;
  SymbolRuleSet rules;
};

// Unit separation on both sides, then digits -> proper nouns -> acronyms.
SymbolizedPair symbolize_pair(const std::vector<std::string>& src,
                              const std::vector<std::string>& tgt,
                              const SymbolizerConfig& cfg = {});

struct SymbolizedSource {
  std::vector<std::string> source;
  SymbolRuleSet rules;
};

// Test-time rewriting with no target side: every detector hit is replaced
// and its rule copies the source surface as the target surface. All-caps
// tokens never join phrases here (they would steal acronyms: "The IMF"
// must leave "IMF" for the ⟨C⟩ pass).
SymbolizedSource symbolize_source_only(const std::vector<std::string>& src,
                                       const SymbolizerConfig& cfg = {});

struct DesymbolizeResult {
  std::vector<std::string> tokens;
  int missing_rules = 0;    // typed symbols kept literal for lack of a rule
  int dangling_merges = 0;  // "^^x" with nothing on its left
};

// Replace typed symbols by their rules' target surfaces, then merge every
// "^^"-prefixed token into its left neighbour. Never fails: unknown symbols
// stay literal and are counted.
DesymbolizeResult desymbolize(const std::vector<std::string>& tokens,
                              const SymbolRuleSet& rules);

// Rules sidecar: one line per pair, TAB-separated: line number, then per
// rule kind:index, source surface, target surface (surfaces space-joined;
// backslash escaping for TAB/newline/backslash).
std::string format_rules_line(const SymbolRuleSet& rules);
SymbolRuleSet parse_rules_line(const std::string& line);

}  // namespace ctxnmt
