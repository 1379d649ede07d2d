#pragma once

// Chemical-string utilities: molecular formula parsing, token-split string
// equivalence, grammar-level SMILES validation and oxidation-state
// (SMACT-style) composition screening.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace scireward::chem {

// ---------------------------------------------------------------------------
// Periodic table symbols (Z = 1..118), used to validate parsed element tokens.
// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 118> kElementSymbols{
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
    "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
    "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
    "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po",
    "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
    "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

inline bool is_element_symbol(std::string_view symbol) {
  for (auto s : kElementSymbols) {
    if (s == symbol) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Molecular formulas
// ---------------------------------------------------------------------------

/// Ordered element/count pairs exactly as written in the source string.
/// Repeated element runs are kept separate so re-serialization reproduces
/// the input; multiset comparison aggregates them.
struct ChemFormula {
  struct Part {
    std::string element;
    long long count = 1;
    bool operator==(const Part&) const = default;
  };
  std::vector<Part> parts;

  bool operator==(const ChemFormula&) const = default;
};

class FormulaError : public std::runtime_error {
 public:
  enum class Code { syntax, unknown_element };

  FormulaError(Code code, std::string msg, std::size_t position, std::string symbol = {})
      : std::runtime_error(std::move(msg)), code_(code), position_(position),
        symbol_(std::move(symbol)) {}

  Code code() const { return code_; }
  std::size_t position() const { return position_; }
  const std::string& symbol() const { return symbol_; }

 private:
  Code code_;
  std::size_t position_;
  std::string symbol_;
};

/// Parses a plain Element[count] formula such as "C7H15Cl2N2OPS". Implicit
/// counts are 1 and multi-digit counts are allowed; anything beyond that
/// (parentheses, charges, isotopes, hydrates) is a syntax error. Outer
/// whitespace is forgiven, inner whitespace is not.
inline ChemFormula parse_formula(std::string_view text) {
  std::size_t lo = 0, hi = text.size();
  while (lo < hi && std::isspace(static_cast<unsigned char>(text[lo]))) ++lo;
  while (hi > lo && std::isspace(static_cast<unsigned char>(text[hi - 1]))) --hi;
  if (lo == hi) throw FormulaError(FormulaError::Code::syntax, "empty formula", lo);

  ChemFormula formula;
  std::size_t i = lo;
  while (i < hi) {
    char c = text[i];
    if (!std::isupper(static_cast<unsigned char>(c))) {
      throw FormulaError(FormulaError::Code::syntax,
                         "expected element symbol at position " + std::to_string(i), i);
    }
    std::size_t sym_start = i;
    std::string symbol(1, c);
    ++i;
    while (i < hi && std::islower(static_cast<unsigned char>(text[i]))) {
      symbol += text[i];
      ++i;
    }
    if (!is_element_symbol(symbol)) {
      throw FormulaError(FormulaError::Code::unknown_element,
                         "unknown element '" + symbol + "' at position " +
                             std::to_string(sym_start),
                         sym_start, symbol);
    }
    long long count = 1;
    if (i < hi && std::isdigit(static_cast<unsigned char>(text[i]))) {
      std::size_t digits_start = i;
      count = 0;
      while (i < hi && std::isdigit(static_cast<unsigned char>(text[i]))) {
        count = count * 10 + (text[i] - '0');
        if (count > 1'000'000'000LL) {
          throw FormulaError(FormulaError::Code::syntax,
                             "count too large at position " + std::to_string(digits_start),
                             digits_start);
        }
        ++i;
      }
      if (count == 0) {
        throw FormulaError(FormulaError::Code::syntax,
                           "zero count at position " + std::to_string(digits_start),
                           digits_start);
      }
    }
    formula.parts.push_back({std::move(symbol), count});
  }
  return formula;
}

/// Re-serializes a formula in source order; counts of 1 stay implicit.
inline std::string format_formula(const ChemFormula& f) {
  std::string out;
  for (const auto& part : f.parts) {
    out += part.element;
    if (part.count != 1) out += std::to_string(part.count);
  }
  return out;
}

/// Aggregated per-element counts (the multiset C(F)).
inline std::map<std::string, long long> element_counts(const ChemFormula& f) {
  std::map<std::string, long long> counts;
  for (const auto& part : f.parts) counts[part.element] += part.count;
  return counts;
}

/// True iff both formulas contain identical counts of each element,
/// disregarding element order.
inline bool element_multiset_equal(const ChemFormula& a, const ChemFormula& b) {
  return element_counts(a) == element_counts(b);
}

/// Canonical comparison string: elements alphabetical, aggregated counts,
/// count 1 implicit. Used for novelty checks against known composition sets.
inline std::string canonical_formula(const ChemFormula& f) {
  std::string out;
  for (const auto& [element, count] : element_counts(f)) {
    out += element;
    if (count != 1) out += std::to_string(count);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Token-split equivalence
// ---------------------------------------------------------------------------

/// Normalization rule for token-sequence comparison: delimiters split the
/// string, case is optionally folded, delimiter runs optionally collapse.
struct SplitRule {
  std::string delimiters = " \t\n\r\f\v";
  bool fold_case = true;
  bool collapse_whitespace = true;
};

inline std::vector<std::string> normalize_tokens(std::string_view text, const SplitRule& rule) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (rule.delimiters.find(c) != std::string::npos) {
      if (!current.empty() || !rule.collapse_whitespace) {
        tokens.push_back(std::move(current));
        current.clear();
      }
      continue;
    }
    current += rule.fold_case ? static_cast<char>(std::tolower(static_cast<unsigned char>(c)))
                              : c;
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  // Outer whitespace never matters, collapsed or not.
  while (!tokens.empty() && tokens.front().empty()) tokens.erase(tokens.begin());
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return tokens;
}

/// Single normalized string form of `text` under `rule` (tokens re-joined
/// with one space). Convenient for set membership and uniqueness counting.
inline std::string normalize_text(std::string_view text, const SplitRule& rule) {
  std::string out;
  for (const auto& token : normalize_tokens(text, rule)) {
    if (!out.empty()) out += ' ';
    out += token;
  }
  return out;
}

/// True iff some reference has the same normalized token sequence as the
/// prediction.
inline bool split_match(std::string_view pred, const std::vector<std::string>& refs,
                        const SplitRule& rule = {}) {
  if (refs.empty()) throw std::invalid_argument("split_match: empty reference set");
  auto pred_tokens = normalize_tokens(pred, rule);
  for (const auto& ref : refs) {
    if (normalize_tokens(ref, rule) == pred_tokens) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// SMILES grammar validation
// ---------------------------------------------------------------------------

struct SmilesError {
  enum class Code { empty_input, illegal_token, unbalanced_paren, unclosed_ring };
  Code code;
  std::size_t position;
};

namespace detail {

// Organic-subset atoms that may appear outside brackets; two-letter first.
inline bool scan_bare_atom(std::string_view s, std::size_t& i) {
  if (i + 1 < s.size()) {
    std::string_view two = s.substr(i, 2);
    if (two == "Cl" || two == "Br") {
      i += 2;
      return true;
    }
  }
  switch (s[i]) {
    case 'B': case 'C': case 'N': case 'O': case 'P': case 'S':
    case 'F': case 'I':
    case 'b': case 'c': case 'n': case 'o': case 'p': case 's':
      ++i;
      return true;
    default:
      return false;
  }
}

inline bool is_bond_char(char c) {
  return c == '-' || c == '=' || c == '#' || c == '$' || c == ':' || c == '/' || c == '\\';
}

}  // namespace detail

/// Grammar-level SMILES check: legal tokens, balanced parentheses and
/// brackets, paired ring-closure digits (including %nn). No valence or
/// aromaticity perception.
inline std::optional<SmilesError> validate_smiles(std::string_view s) {
  using Code = SmilesError::Code;
  if (s.empty()) return SmilesError{Code::empty_input, 0};

  std::vector<std::size_t> paren_stack;
  std::map<int, std::size_t> open_rings;  // ring number -> position opened
  bool seen_atom = false;                 // an atom has appeared in the current fragment
  std::size_t i = 0;

  auto toggle_ring = [&](int number, std::size_t pos) {
    auto it = open_rings.find(number);
    if (it == open_rings.end()) {
      open_rings.emplace(number, pos);
    } else {
      open_rings.erase(it);
    }
  };

  while (i < s.size()) {
    char c = s[i];
    if (c == '(') {
      if (!seen_atom) return SmilesError{Code::illegal_token, i};
      paren_stack.push_back(i);
      ++i;
    } else if (c == ')') {
      if (paren_stack.empty()) return SmilesError{Code::unbalanced_paren, i};
      paren_stack.pop_back();
      ++i;
    } else if (c == '[') {
      std::size_t open_pos = i;
      ++i;
      std::size_t content = 0;
      while (i < s.size() && s[i] != ']') {
        char b = s[i];
        bool ok = std::isalnum(static_cast<unsigned char>(b)) || b == '@' || b == '+' ||
                  b == '-' || b == ':' || b == '*';
        if (!ok) return SmilesError{Code::illegal_token, i};
        ++content;
        ++i;
      }
      if (i >= s.size()) return SmilesError{Code::unbalanced_paren, open_pos};
      if (content == 0) return SmilesError{Code::illegal_token, open_pos};
      ++i;  // ']'
      seen_atom = true;
    } else if (c == '%') {
      if (!seen_atom) return SmilesError{Code::illegal_token, i};
      if (i + 2 >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
          !std::isdigit(static_cast<unsigned char>(s[i + 2]))) {
        return SmilesError{Code::illegal_token, i};
      }
      toggle_ring((s[i + 1] - '0') * 10 + (s[i + 2] - '0'), i);
      i += 3;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      if (!seen_atom) return SmilesError{Code::illegal_token, i};
      toggle_ring(c - '0', i);
      ++i;
    } else if (detail::is_bond_char(c)) {
      ++i;
    } else if (c == '.') {
      seen_atom = false;
      ++i;
    } else if (detail::scan_bare_atom(s, i)) {
      seen_atom = true;
    } else {
      return SmilesError{Code::illegal_token, i};
    }
  }
  if (!paren_stack.empty()) return SmilesError{Code::unbalanced_paren, paren_stack.back()};
  if (!open_rings.empty()) return SmilesError{Code::unclosed_ring, open_rings.begin()->second};
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Oxidation-state composition screening
// ---------------------------------------------------------------------------

/// Allowed oxidation states plus Pauling electronegativity per element.
/// Loaded from the repository data file; immutable afterwards.
class OxidationTable {
 public:
  struct Entry {
    std::vector<int> states;  // may be empty (noble gases)
    double electronegativity = 0.0;
  };

  void set(std::string symbol, Entry entry) { entries_[std::move(symbol)] = std::move(entry); }

  const Entry* find(const std::string& symbol) const {
    auto it = entries_.find(symbol);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return entries_.size(); }

  /// Parses the line-oriented table: `Symbol<TAB>state1,state2,...<TAB>EN`,
  /// '#' starts a comment, the states field may be empty.
  static OxidationTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open oxidation table: " + path);
    OxidationTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::string_view view = line;
      if (view.empty() || view.front() == '#') continue;
      std::size_t tab1 = view.find('\t');
      std::size_t tab2 = tab1 == std::string_view::npos ? std::string_view::npos
                                                        : view.find('\t', tab1 + 1);
      if (tab1 == std::string_view::npos || tab2 == std::string_view::npos) {
        throw std::runtime_error("oxidation table: malformed line " + std::to_string(line_no));
      }
      std::string symbol(view.substr(0, tab1));
      std::string states_field(view.substr(tab1 + 1, tab2 - tab1 - 1));
      std::string en_field(view.substr(tab2 + 1));
      Entry entry;
      std::stringstream states(states_field);
      std::string item;
      while (std::getline(states, item, ',')) {
        if (item.empty()) continue;
        entry.states.push_back(std::stoi(item));
      }
      entry.electronegativity = en_field.empty() ? 0.0 : std::stod(en_field);
      table.set(std::move(symbol), std::move(entry));
    }
    return table;
  }

 private:
  std::unordered_map<std::string, Entry> entries_;
};

/// Composition plausibility: true iff some assignment of one allowed
/// oxidation state per distinct element is charge-neutral and orders
/// electronegativities consistently (every positive-state element no more
/// electronegative than every negative-state element). Single-element
/// compositions are valid by convention.
inline bool smact_valid(const ChemFormula& f, const OxidationTable& table) {
  auto counts = element_counts(f);
  if (counts.empty()) return false;

  struct Species {
    long long count;
    const OxidationTable::Entry* entry;
  };
  std::vector<Species> species;
  species.reserve(counts.size());
  for (const auto& [element, count] : counts) {
    const auto* entry = table.find(element);
    if (entry == nullptr) {
      throw FormulaError(FormulaError::Code::unknown_element,
                         "element '" + element + "' missing from oxidation table", 0, element);
    }
    species.push_back({count, entry});
  }
  if (species.size() == 1) return true;  // single-element convention
  for (const auto& sp : species) {
    if (sp.entry->states.empty()) return false;  // no assignable state at all
  }

  // Odometer over one state choice per element.
  std::vector<std::size_t> choice(species.size(), 0);
  while (true) {
    long long charge = 0;
    double max_positive_en = -1e300;
    double min_negative_en = 1e300;
    for (std::size_t k = 0; k < species.size(); ++k) {
      int state = species[k].entry->states[choice[k]];
      charge += species[k].count * state;
      double en = species[k].entry->electronegativity;
      if (state > 0) max_positive_en = std::max(max_positive_en, en);
      if (state < 0) min_negative_en = std::min(min_negative_en, en);
    }
    if (charge == 0 && max_positive_en <= min_negative_en) return true;

    std::size_t k = 0;
    while (k < species.size()) {
      if (++choice[k] < species[k].entry->states.size()) break;
      choice[k] = 0;
      ++k;
    }
    if (k == species.size()) return false;
  }
}

}  // namespace scireward::chem
