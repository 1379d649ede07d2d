#pragma once

// Scalar evaluation metrics over prediction/reference pairs: string-match
// rates, ROUGE-L, regression errors, rank correlations, MAD/MAE, confusion
// metrics, Fmax, AUC, local alignment and generation statistics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "scireward/chemparse.hpp"

namespace scireward::metrics {

using chem::SplitRule;

class MetricError : public std::runtime_error {
 public:
  enum class Code {
    length_mismatch,
    constant_targets,
    zero_variance,
    single_class,
    empty_group,
    empty_sample_set,
    non_finite,
  };

  MetricError(Code code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// Aggregate result of scoring a list of examples. `per_example` holds the
/// scored examples in input order; `skipped` records unscorable ones.
struct MetricReport {
  std::string metric_id;
  double value = 0.0;
  std::vector<double> per_example;
  std::size_t n = 0;
  std::vector<std::pair<std::size_t, std::string>> skipped;  // (index, reason)

  std::size_t skipped_count() const { return skipped.size(); }
};

struct ConfusionCounts {
  long long tp = 0, fp = 0, tn = 0, fn = 0;
};

struct AlignmentScoring {
  int match_score = 1;      // > 0
  int mismatch_penalty = -1;  // <= 0
  int gap_penalty = -1;       // <= 0
};

// ---------------------------------------------------------------------------
// Numeric extraction from model text
// ---------------------------------------------------------------------------

/// First decimal literal in `text` starting at or after `from` (optional
/// sign, digits, optional fraction, optional exponent). LLM answers wrap
/// numbers in prose or JSON; everything around the literal is ignored.
inline std::optional<double> extract_first_number(std::string_view text, std::size_t from = 0) {
  for (std::size_t i = from; i < text.size(); ++i) {
    char c = text[i];
    bool starts_digit = std::isdigit(static_cast<unsigned char>(c));
    bool starts_sign = (c == '-' || c == '+') && i + 1 < text.size() &&
                       (std::isdigit(static_cast<unsigned char>(text[i + 1])) ||
                        (text[i + 1] == '.' && i + 2 < text.size() &&
                         std::isdigit(static_cast<unsigned char>(text[i + 2]))));
    bool starts_dot = c == '.' && i + 1 < text.size() &&
                      std::isdigit(static_cast<unsigned char>(text[i + 1]));
    if (!starts_digit && !starts_sign && !starts_dot) continue;
    std::size_t j = i;
    if (text[j] == '-' || text[j] == '+') ++j;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j < text.size() && text[j] == '.') {
      ++j;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    }
    if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
      std::size_t k = j + 1;
      if (k < text.size() && (text[k] == '-' || text[k] == '+')) ++k;
      if (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
        ++k;
        while (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) ++k;
        j = k;
      }
    }
    try {
      return std::stod(std::string(text.substr(i, j - i)));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

/// First decimal literal after the first occurrence of `key`, or the first
/// literal anywhere when the key is absent.
inline std::optional<double> extract_number_after(std::string_view text, std::string_view key) {
  std::size_t pos = key.empty() ? std::string_view::npos : text.find(key);
  if (pos == std::string_view::npos) return extract_first_number(text);
  return extract_first_number(text, pos + key.size());
}

/// Reads a truthy/falsy verdict out of model text ("True", "yes.",
/// "{is_stable: False}"). Tokens are compared whole after stripping
/// punctuation, so digits inside numbers never trigger a verdict.
inline std::optional<bool> parse_bool(std::string_view text, const SplitRule& rule = {}) {
  for (const auto& raw : chem::normalize_tokens(text, rule)) {
    std::string_view token = raw;
    auto is_word_char = [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) != 0;
    };
    while (!token.empty() && !is_word_char(token.front())) token.remove_prefix(1);
    while (!token.empty() && !is_word_char(token.back())) token.remove_suffix(1);
    for (std::string_view truthy : {"true", "yes", "positive", "1"}) {
      if (token == truthy) return true;
    }
    for (std::string_view falsy : {"false", "no", "negative", "0"}) {
      if (token == falsy) return false;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Match rates (exact / split / element)
// ---------------------------------------------------------------------------

enum class MatchMode { exact, split, element };

/// Fraction of predictions accepted by the mode's comparator against any of
/// the example's references. Element mode parses both sides as molecular
/// formulas; a prediction that fails to parse scores 0 rather than erroring.
inline MetricReport match_rate(const std::vector<std::string>& preds,
                               const std::vector<std::vector<std::string>>& refs,
                               MatchMode mode, const SplitRule& rule = {}) {
  if (preds.size() != refs.size()) {
    throw MetricError(MetricError::Code::length_mismatch,
                      "match_rate: preds and refs differ in length");
  }
  MetricReport report;
  report.metric_id = mode == MatchMode::exact   ? "exact_match"
                     : mode == MatchMode::split ? "split_match"
                                                : "element_match";
  report.per_example.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (refs[i].empty()) {
      throw MetricError(MetricError::Code::empty_group,
                        "match_rate: empty reference set at index " + std::to_string(i));
    }
    bool hit = false;
    switch (mode) {
      case MatchMode::exact:
        hit = std::any_of(refs[i].begin(), refs[i].end(),
                          [&](const std::string& r) { return r == preds[i]; });
        break;
      case MatchMode::split:
        hit = chem::split_match(preds[i], refs[i], rule);
        break;
      case MatchMode::element: {
        chem::ChemFormula pred_formula;
        try {
          pred_formula = chem::parse_formula(preds[i]);
        } catch (const chem::FormulaError&) {
          break;  // unparseable prediction scores 0
        }
        for (const auto& r : refs[i]) {
          try {
            if (chem::element_multiset_equal(pred_formula, chem::parse_formula(r))) {
              hit = true;
              break;
            }
          } catch (const chem::FormulaError&) {
            // unparseable reference cannot match; try the next one
          }
        }
        break;
      }
    }
    report.per_example.push_back(hit ? 1.0 : 0.0);
  }
  report.n = report.per_example.size();
  report.value = report.n == 0 ? 0.0
                               : std::accumulate(report.per_example.begin(),
                                                 report.per_example.end(), 0.0) /
                                     static_cast<double>(report.n);
  return report;
}

// ---------------------------------------------------------------------------
// ROUGE-L
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> whitespace_tokens(std::string_view text) {
  SplitRule rule;
  rule.fold_case = false;
  return chem::normalize_tokens(text, rule);
}

inline std::size_t lcs_length(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), curr(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      curr[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], curr[j - 1]);
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

}  // namespace detail

/// ROUGE-L F1 over whitespace tokens: P = LCS/|pred|, R = LCS/|ref|.
/// Empty prediction or reference scores 0.
inline double rouge_l(std::string_view pred, std::string_view ref) {
  auto pred_tokens = detail::whitespace_tokens(pred);
  auto ref_tokens = detail::whitespace_tokens(ref);
  if (pred_tokens.empty() || ref_tokens.empty()) return 0.0;
  double lcs = static_cast<double>(detail::lcs_length(pred_tokens, ref_tokens));
  double precision = lcs / static_cast<double>(pred_tokens.size());
  double recall = lcs / static_cast<double>(ref_tokens.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

// ---------------------------------------------------------------------------
// Regression metrics
// ---------------------------------------------------------------------------

struct RegressionErrors {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> r2;  // absent when targets are constant
};

inline RegressionErrors regression_errors(const std::vector<double>& preds,
                                          const std::vector<double>& targets) {
  if (preds.size() != targets.size()) {
    throw MetricError(MetricError::Code::length_mismatch, "regression_errors: length mismatch");
  }
  if (preds.empty()) {
    throw MetricError(MetricError::Code::empty_group, "regression_errors: empty input");
  }
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double d = preds[i] - targets[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  double n = static_cast<double>(preds.size());
  RegressionErrors out;
  out.mae = abs_sum / n;
  out.rmse = std::sqrt(sq_sum / n);
  double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / n;
  double ss_tot = 0.0;
  for (double y : targets) ss_tot += (y - mean) * (y - mean);
  if (ss_tot > 0.0) out.r2 = 1.0 - sq_sum / ss_tot;
  return out;
}

/// The Pearson correlation coefficient. Throws ZeroVariance when either side
/// is constant.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw MetricError(MetricError::Code::length_mismatch, "pearson: length mismatch");
  }
  if (x.size() < 2) {
    throw MetricError(MetricError::Code::length_mismatch, "pearson: need at least 2 points");
  }
  double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw MetricError(MetricError::Code::zero_variance, "pearson: constant input");
  }
  return sxy / (std::sqrt(sxx) * std::sqrt(syy));
}

namespace detail {

/// Average ranks (1-based); ties receive the mean of their rank range.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

/// Spearman rank correlation: Pearson of tie-averaged ranks.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw MetricError(MetricError::Code::length_mismatch, "spearman: length mismatch");
  }
  return pearson(detail::average_ranks(x), detail::average_ranks(y));
}

/// Size-weighted mean of per-group MAD/MAE ratios. MAD is the targets'
/// mean absolute deviation from their own mean; MAE below `mae_floor` is
/// clamped so perfect predictions stay finite.
inline double mad_over_mae(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& groups,
    double mae_floor = 1e-8) {
  if (groups.empty()) {
    throw MetricError(MetricError::Code::empty_group, "mad_over_mae: no groups");
  }
  double weighted = 0.0, total = 0.0;
  for (const auto& [preds, targets] : groups) {
    if (preds.empty() || preds.size() != targets.size()) {
      throw MetricError(MetricError::Code::empty_group, "mad_over_mae: bad group");
    }
    double n = static_cast<double>(targets.size());
    double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / n;
    double mad = 0.0, mae = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      mad += std::abs(targets[i] - mean);
      mae += std::abs(preds[i] - targets[i]);
    }
    mad /= n;
    mae = std::max(mae / n, mae_floor);
    weighted += n * (mad / mae);
    total += n;
  }
  return weighted / total;
}

/// Matthews correlation coefficient; 0 when any marginal is zero.
inline double mcc(const ConfusionCounts& c) {
  double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

// ---------------------------------------------------------------------------
// Multi-label precision/recall/F1 and Fmax
// ---------------------------------------------------------------------------

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

namespace detail {

inline std::set<std::string> normalize_label_set(const std::vector<std::string>& labels,
                                                 const SplitRule& rule) {
  std::set<std::string> out;
  for (const auto& label : labels) {
    std::string norm = chem::normalize_text(label, rule);
    if (!norm.empty()) out.insert(std::move(norm));
  }
  return out;
}

inline Prf prf_from_sets(const std::set<std::string>& pred, const std::set<std::string>& ref) {
  std::size_t hits = 0;
  for (const auto& label : pred) hits += ref.count(label);
  Prf out;
  out.precision = pred.empty() ? 0.0 : static_cast<double>(hits) / pred.size();
  out.recall = ref.empty() ? 0.0 : static_cast<double>(hits) / ref.size();
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

}  // namespace detail

/// Set precision/recall/F1 after per-label normalization. An empty
/// prediction set scores 0 across the board.
inline Prf multilabel_prf(const std::vector<std::string>& pred_labels,
                          const std::vector<std::string>& ref_labels,
                          const SplitRule& rule = {}) {
  auto ref = detail::normalize_label_set(ref_labels, rule);
  if (ref.empty()) {
    throw MetricError(MetricError::Code::empty_group, "multilabel_prf: empty reference set");
  }
  return detail::prf_from_sets(detail::normalize_label_set(pred_labels, rule), ref);
}

/// Maximum F1 over confidence thresholds. With all confidences equal this
/// reduces to the plain multi-label F1.
inline double fmax(const std::vector<std::pair<std::string, double>>& scored,
                   const std::vector<std::string>& refs, const SplitRule& rule = {}) {
  auto ref = detail::normalize_label_set(refs, rule);
  if (ref.empty()) {
    throw MetricError(MetricError::Code::empty_group, "fmax: empty reference set");
  }
  if (scored.empty()) return 0.0;
  std::set<double> thresholds;
  for (const auto& [label, confidence] : scored) thresholds.insert(confidence);
  double best = 0.0;
  for (double t : thresholds) {
    std::vector<std::string> kept;
    for (const auto& [label, confidence] : scored) {
      if (confidence >= t) kept.push_back(label);
    }
    best = std::max(best, detail::prf_from_sets(detail::normalize_label_set(kept, rule), ref).f1);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Mixed-Score (siRNA efficiency composite)
// ---------------------------------------------------------------------------

/// 0.5*(1 - MAE/100) + 0.5*F1*(1 - Range_MAE/100) over percent-remaining
/// values. The positive class is "target inside [range_low, range_high]";
/// predictions are thresholded the same way for the F1 term, and Range_MAE
/// is restricted to examples whose target lies in the range (0 when none do).
inline double mixed_score(const std::vector<double>& preds, const std::vector<double>& targets,
                          double range_low = 0.0, double range_high = 30.0) {
  if (preds.size() != targets.size()) {
    throw MetricError(MetricError::Code::length_mismatch, "mixed_score: length mismatch");
  }
  if (preds.empty()) {
    throw MetricError(MetricError::Code::empty_group, "mixed_score: empty input");
  }
  auto in_range = [&](double v) { return v >= range_low && v <= range_high; };
  double abs_sum = 0.0, range_abs_sum = 0.0;
  std::size_t range_n = 0;
  ConfusionCounts counts;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    abs_sum += std::abs(preds[i] - targets[i]);
    bool ref_pos = in_range(targets[i]);
    bool pred_pos = in_range(preds[i]);
    if (ref_pos) {
      range_abs_sum += std::abs(preds[i] - targets[i]);
      ++range_n;
      pred_pos ? ++counts.tp : ++counts.fn;
    } else {
      pred_pos ? ++counts.fp : ++counts.tn;
    }
  }
  double n = static_cast<double>(preds.size());
  double mae = abs_sum / n;
  double range_mae = range_n == 0 ? 0.0 : range_abs_sum / static_cast<double>(range_n);
  double precision = counts.tp + counts.fp > 0
                         ? static_cast<double>(counts.tp) / (counts.tp + counts.fp)
                         : 0.0;
  double recall = counts.tp + counts.fn > 0
                      ? static_cast<double>(counts.tp) / (counts.tp + counts.fn)
                      : 0.0;
  double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  return 0.5 * (1.0 - mae / 100.0) + 0.5 * f1 * (1.0 - range_mae / 100.0);
}

// ---------------------------------------------------------------------------
// AUC
// ---------------------------------------------------------------------------

/// Rank-based (Mann-Whitney) AUC with tie correction.
inline double auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) {
    throw MetricError(MetricError::Code::length_mismatch, "auc: length mismatch");
  }
  std::size_t positives = static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), true));
  std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw MetricError(MetricError::Code::single_class, "auc: need both classes");
  }
  auto ranks = detail::average_ranks(scores);
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) positive_rank_sum += ranks[i];
  }
  double np = static_cast<double>(positives), nn = static_cast<double>(negatives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

// ---------------------------------------------------------------------------
// Smith-Waterman local alignment
// ---------------------------------------------------------------------------

/// Best local-alignment score of `a` against `b`, divided by the reference's
/// self-alignment score match_score*|b|. Empty inputs score 0.
inline double smith_waterman_normalized(std::string_view a, std::string_view b,
                                        const AlignmentScoring& s = {}) {
  if (a.empty() || b.empty()) return 0.0;
  std::vector<long long> prev(b.size() + 1, 0), curr(b.size() + 1, 0);
  long long best = 0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      long long diag = prev[j - 1] + (a[i - 1] == b[j - 1] ? s.match_score : s.mismatch_penalty);
      long long up = prev[j] + s.gap_penalty;
      long long left = curr[j - 1] + s.gap_penalty;
      curr[j] = std::max({0LL, diag, up, left});
      best = std::max(best, curr[j]);
    }
    std::swap(prev, curr);
  }
  return static_cast<double>(best) /
         (static_cast<double>(s.match_score) * static_cast<double>(b.size()));
}

// ---------------------------------------------------------------------------
// Generation statistics & material set metrics
// ---------------------------------------------------------------------------

struct GenerationStats {
  double validity = 0.0;
  double uniqueness = 0.0;
  double diversity = 0.0;  // non-repetition rate, identical to uniqueness
  double avg_length = 0.0;
};

inline GenerationStats generation_stats(const std::vector<std::string>& samples,
                                        const std::function<bool(const std::string&)>& validator) {
  if (samples.empty()) {
    throw MetricError(MetricError::Code::empty_sample_set, "generation_stats: no samples");
  }
  std::unordered_set<std::string> distinct;
  std::size_t valid = 0;
  double length_sum = 0.0;
  for (const auto& sample : samples) {
    if (validator(sample)) ++valid;
    distinct.insert(sample);
    length_sum += static_cast<double>(sample.size());
  }
  double n = static_cast<double>(samples.size());
  GenerationStats stats;
  stats.validity = static_cast<double>(valid) / n;
  stats.uniqueness = static_cast<double>(distinct.size()) / n;
  stats.diversity = stats.uniqueness;
  stats.avg_length = length_sum / n;
  return stats;
}

struct MaterialSetMetrics {
  double precision = 0.0;    // mean |pred ∩ ref| / |ref|
  double novelty = 0.0;      // fraction of predictions absent from known set
  double success_rate = 0.0; // fraction with pred ⊇ ref
};

/// Element-set agreement between predicted compositions and per-sample
/// reference element sets, plus novelty against a known composition set
/// (compared through canonical formula strings).
inline MaterialSetMetrics material_set_metrics(const std::vector<chem::ChemFormula>& preds,
                                               const std::vector<std::set<std::string>>& refs,
                                               const std::set<std::string>& known_set) {
  if (preds.size() != refs.size()) {
    throw MetricError(MetricError::Code::length_mismatch, "material_set_metrics: length mismatch");
  }
  std::set<std::string> known_canonical;
  for (const auto& entry : known_set) {
    try {
      known_canonical.insert(chem::canonical_formula(chem::parse_formula(entry)));
    } catch (const chem::FormulaError&) {
      known_canonical.insert(entry);
    }
  }
  MaterialSetMetrics out;
  if (preds.empty()) return out;
  double precision_sum = 0.0;
  std::size_t novel = 0, success = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::set<std::string> pred_elements;
    for (const auto& part : preds[i].parts) pred_elements.insert(part.element);
    std::size_t hits = 0;
    for (const auto& element : refs[i]) hits += pred_elements.count(element);
    precision_sum += refs[i].empty() ? 0.0 : static_cast<double>(hits) / refs[i].size();
    if (hits == refs[i].size() && !refs[i].empty()) ++success;
    if (known_canonical.count(chem::canonical_formula(preds[i])) == 0) ++novel;
  }
  double n = static_cast<double>(preds.size());
  out.precision = precision_sum / n;
  out.novelty = static_cast<double>(novel) / n;
  out.success_rate = static_cast<double>(success) / n;
  return out;
}

}  // namespace scireward::metrics
