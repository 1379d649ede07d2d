#pragma once

// Discipline-tag grammar for scientific payloads embedded in model text:
// <SMILES> CCO </SMILES>, <dna>ACGT</dna>, <protein>MKV</protein>, ...
// plus the <think>...</think> reasoning-block convention.

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scireward::seqtag {

enum class SeqKind {
  smiles,
  selfies,
  iupac,
  dna,
  rna,
  protein,
  material,
  sirna,
};

inline constexpr std::size_t kSeqKindCount = 8;

struct TagForm {
  SeqKind kind;
  std::string_view open;
  std::string_view close;
  bool spaced;  // emit "<TAG> body </TAG>" instead of "<TAG>body</TAG>"
};

// Casing and spacing follow the source corpora: molecular string tags are
// upper-case and spaced, sequence tags lower-case and tight.
inline constexpr std::array<TagForm, kSeqKindCount> kTagForms{{
    {SeqKind::smiles, "<SMILES>", "</SMILES>", true},
    {SeqKind::selfies, "<SELFIES>", "</SELFIES>", true},
    {SeqKind::iupac, "<IUPAC>", "</IUPAC>", true},
    {SeqKind::dna, "<dna>", "</dna>", false},
    {SeqKind::rna, "<rna>", "</rna>", false},
    {SeqKind::protein, "<protein>", "</protein>", false},
    {SeqKind::material, "<material>", "</material>", false},
    {SeqKind::sirna, "<sirna>", "</sirna>", false},
}};

inline const TagForm& tag_form(SeqKind kind) {
  return kTagForms[static_cast<std::size_t>(kind)];
}

inline std::string_view kind_name(SeqKind kind) {
  switch (kind) {
    case SeqKind::smiles: return "smiles";
    case SeqKind::selfies: return "selfies";
    case SeqKind::iupac: return "iupac";
    case SeqKind::dna: return "dna";
    case SeqKind::rna: return "rna";
    case SeqKind::protein: return "protein";
    case SeqKind::material: return "material";
    case SeqKind::sirna: return "sirna";
  }
  return "?";
}

inline std::optional<SeqKind> kind_from_name(std::string_view name) {
  for (const auto& form : kTagForms) {
    if (kind_name(form.kind) == name) return form.kind;
  }
  return std::nullopt;
}

// A tag-wrapped payload located in source text. `begin`/`end` are byte
// offsets of the whole tagged region (open tag through close tag).
struct TaggedSequence {
  SeqKind kind;
  std::string body;
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct ReasoningSplit {
  std::optional<std::string> thinking;
  std::string answer;
};

class TagError : public std::runtime_error {
 public:
  enum class Code { missing_close_tag, nested_tag, body_contains_tag, unclosed_think_block };

  TagError(Code code, std::string msg, std::size_t offset,
           std::optional<SeqKind> kind = std::nullopt)
      : std::runtime_error(std::move(msg)), code_(code), offset_(offset), kind_(kind) {}

  Code code() const { return code_; }
  std::size_t offset() const { return offset_; }
  std::optional<SeqKind> kind() const { return kind_; }

 private:
  Code code_;
  std::size_t offset_;
  std::optional<SeqKind> kind_;
};

struct AlphabetError {
  std::size_t position;
  char symbol;
};

namespace detail {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Earliest occurrence of any payload tag token (open or close, any kind)
// at or after `from`. Returns the token's offset, its length, its kind and
// whether it is an open tag.
struct TagToken {
  std::size_t offset;
  std::size_t length;
  SeqKind kind;
  bool is_open;
};

inline std::optional<TagToken> find_tag_token(std::string_view text, std::size_t from) {
  std::optional<TagToken> best;
  for (const auto& form : kTagForms) {
    for (bool open : {true, false}) {
      std::string_view token = open ? form.open : form.close;
      std::size_t pos = text.find(token, from);
      if (pos == std::string_view::npos) continue;
      if (!best || pos < best->offset) {
        best = TagToken{pos, token.size(), form.kind, open};
      }
    }
  }
  return best;
}

}  // namespace detail

/// Extracts all tag-wrapped payloads from `text` in source order. Whitespace
/// immediately inside the tags is trimmed; untagged text is skipped. Throws
/// TagError on an unterminated tag or on a tag token inside another tag's body.
inline std::vector<TaggedSequence> parse_tagged(std::string_view text) {
  std::vector<TaggedSequence> out;
  std::size_t cursor = 0;
  while (cursor < text.size()) {
    auto token = detail::find_tag_token(text, cursor);
    if (!token) break;
    if (!token->is_open) {
      // Stray close tag with no matching open: untagged text, skip it.
      cursor = token->offset + token->length;
      continue;
    }
    std::size_t body_start = token->offset + token->length;
    auto inner = detail::find_tag_token(text, body_start);
    if (!inner) {
      throw TagError(TagError::Code::missing_close_tag,
                     "missing close tag for <" + std::string(kind_name(token->kind)) +
                         "> opened at offset " + std::to_string(token->offset),
                     token->offset, token->kind);
    }
    if (inner->is_open || inner->kind != token->kind) {
      throw TagError(TagError::Code::nested_tag,
                     "tag token inside <" + std::string(kind_name(token->kind)) +
                         "> body at offset " + std::to_string(inner->offset),
                     inner->offset, inner->kind);
    }
    std::string_view body = text.substr(body_start, inner->offset - body_start);
    std::size_t region_end = inner->offset + inner->length;
    out.push_back(TaggedSequence{token->kind, std::string(detail::trim(body)),
                                 token->offset, region_end});
    cursor = region_end;
  }
  return out;
}

/// Inverse of parse_tagged for a single payload. The body must be non-empty
/// and free of tag delimiters.
inline std::string wrap(SeqKind kind, std::string_view body) {
  if (body.empty()) throw std::invalid_argument("wrap: empty body");
  if (auto token = detail::find_tag_token(body, 0)) {
    throw TagError(TagError::Code::body_contains_tag,
                   "body contains tag delimiter at offset " + std::to_string(token->offset),
                   token->offset, token->kind);
  }
  const TagForm& form = tag_form(kind);
  std::string out;
  out.reserve(form.open.size() + form.close.size() + body.size() + 2);
  out += form.open;
  if (form.spaced) out += ' ';
  out += body;
  if (form.spaced) out += ' ';
  out += form.close;
  return out;
}

namespace detail {

inline bool in_alphabet(SeqKind kind, char c) {
  switch (kind) {
    case SeqKind::dna:
      return c == 'A' || c == 'C' || c == 'G' || c == 'T' || c == 'N';
    case SeqKind::rna:
      return c == 'A' || c == 'C' || c == 'G' || c == 'U' || c == 'N';
    case SeqKind::protein:
      return std::string_view("ACDEFGHIKLMNPQRSTVWYX").find(c) != std::string_view::npos;
    case SeqKind::sirna:
      // RNA alphabet, lower-case residues, the 'f' modification mark and
      // spaces, as in "a Af a c u Uf g ...".
      return std::string_view("ACGUNacgunf ").find(c) != std::string_view::npos;
    default:
      // smiles/selfies/iupac/material bodies are opaque here; dedicated
      // validators live in chemparse.
      return true;
  }
}

}  // namespace detail

/// Checks every symbol of the payload against the kind's legal alphabet.
/// Returns the first offending position, or nullopt when the body is clean.
inline std::optional<AlphabetError> validate_alphabet(const TaggedSequence& seq) {
  for (std::size_t i = 0; i < seq.body.size(); ++i) {
    if (!detail::in_alphabet(seq.kind, seq.body[i])) {
      return AlphabetError{i, seq.body[i]};
    }
  }
  return std::nullopt;
}

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";

/// Splits a response into the first well-formed think block and the remaining
/// answer text. Unclosed think blocks are errors, both at the first block and
/// anywhere in the remainder.
inline ReasoningSplit split_reasoning(std::string_view text) {
  std::size_t open = text.find(kThinkOpen);
  if (open == std::string_view::npos) {
    return ReasoningSplit{std::nullopt, std::string(detail::trim(text))};
  }
  std::size_t body_start = open + kThinkOpen.size();
  std::size_t close = text.find(kThinkClose, body_start);
  if (close == std::string_view::npos) {
    throw TagError(TagError::Code::unclosed_think_block,
                   "unclosed think block at offset " + std::to_string(open), open);
  }
  std::string remainder;
  remainder.append(text.substr(0, open));
  remainder.append(text.substr(close + kThinkClose.size()));
  std::size_t stray = remainder.find(kThinkOpen);
  if (stray != std::string::npos &&
      remainder.find(kThinkClose, stray + kThinkOpen.size()) == std::string::npos) {
    throw TagError(TagError::Code::unclosed_think_block,
                   "unclosed think block in answer text", stray);
  }
  ReasoningSplit split;
  split.thinking = std::string(detail::trim(text.substr(body_start, close - body_start)));
  split.answer = std::string(detail::trim(remainder));
  return split;
}

/// Emits the think-block + answer target form used for reasoning-task labels.
inline std::string compose_reasoning(std::string_view thinking, std::string_view answer) {
  std::string out;
  out.reserve(kThinkOpen.size() + kThinkClose.size() + thinking.size() + answer.size());
  out += kThinkOpen;
  out += thinking;
  out += kThinkClose;
  out += answer;
  return out;
}

}  // namespace scireward::seqtag
