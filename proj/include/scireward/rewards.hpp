#pragma once

// Task specifications, metric dispatch by reward group, and softening of
// raw metric values into calibrated [0,1] rewards.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scireward/chemparse.hpp"
#include "scireward/metrics.hpp"
#include "scireward/seqtag.hpp"
#include "scireward/toolbridge.hpp"

namespace scireward::rewards {

enum class TaskFamily { translation, extraction_qa, regression, classification, generation_design };
enum class TaskMode { instant, thinking };
enum class RewardGroup { distance, matching, tool_verified };

/// Monotone calibration g mapping a raw metric onto [0,1]. The family fixes
/// the functional form; `direction` records which way quality improves so
/// monotonicity can be property-checked.
struct Calibration {
  enum class Family { identity_clamp, exp_decay, rational_decay, affine_clamp };
  enum class Direction { higher_better, lower_better };

  Family family = Family::identity_clamp;
  Direction direction = Direction::higher_better;
  double tau = 1.0;           // exp_decay / rational_decay scale, > 0
  double lo = 0.0, hi = 1.0;  // affine_clamp window, lo < hi
};

struct TaskSpec {
  std::string id;
  TaskFamily family = TaskFamily::translation;
  TaskMode mode = TaskMode::instant;
  RewardGroup reward_group = RewardGroup::matching;
  std::string metric_id;
  Calibration calibration;
  double equivalence_threshold = 0.99;
  std::optional<seqtag::SeqKind> payload_kind;  // tagged payload to compare, if any
  std::map<std::string, double> params;         // metric parameters (ranges, alignment scores)

  double param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

struct PredictionRecord {
  std::string task_id;
  std::string example_id;
  std::string prompt;
  std::string prediction;
  std::vector<std::string> references;
  std::optional<std::vector<std::pair<std::string, double>>> confidences;
};

struct SoftReward {
  double value = 0.0;      // calibrated, always finite and in [0,1]
  double raw_metric = 0.0;
  std::string metric_id;
  bool degraded = false;   // fallback or unparseable input involved
};

/// Metric ids the engine can dispatch for matching and distance tasks.
/// Tool-verified metric ids are open-ended: they double as verifier kinds
/// and are bound by deployment configuration.
inline bool is_registered_metric(std::string_view id) {
  for (std::string_view known :
       {"exact_match", "split_match", "element_match", "rouge_l", "multilabel_f1", "fmax",
        "smith_waterman", "label_match", "mae", "rmse", "r2", "pearson", "spearman",
        "mixed_score", "mad_over_mae", "auc", "mcc", "smiles_validity", "smact_validity"}) {
    if (id == known) return true;
  }
  return false;
}

class RewardError : public std::runtime_error {
 public:
  enum class Code { unknown_metric, unknown_task, non_finite };

  RewardError(Code code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// Applies the calibration map. Raw must be finite.
inline double soften_value(double raw, const Calibration& c) {
  if (!std::isfinite(raw)) {
    throw RewardError(RewardError::Code::non_finite, "soften: non-finite raw metric");
  }
  switch (c.family) {
    case Calibration::Family::identity_clamp:
      return std::clamp(raw, 0.0, 1.0);
    case Calibration::Family::exp_decay:
      if (c.tau <= 0.0) throw std::invalid_argument("soften: tau must be positive");
      return std::exp(-raw / c.tau);
    case Calibration::Family::rational_decay:
      if (c.tau <= 0.0) throw std::invalid_argument("soften: tau must be positive");
      return 1.0 / (1.0 + raw / c.tau);
    case Calibration::Family::affine_clamp:
      if (!(c.lo < c.hi)) throw std::invalid_argument("soften: affine window needs lo < hi");
      return std::clamp((raw - c.lo) / (c.hi - c.lo), 0.0, 1.0);
  }
  return 0.0;
}

inline SoftReward soften(double raw, const Calibration& c, std::string metric_id = {},
                         bool degraded = false) {
  SoftReward reward;
  reward.value = soften_value(raw, c);
  reward.raw_metric = raw;
  reward.metric_id = std::move(metric_id);
  reward.degraded = degraded;
  return reward;
}

namespace detail {

/// Strips the reasoning block from thinking-mode output; falls back to the
/// raw text (flagged) when the block is malformed.
inline std::string answer_text(const TaskSpec& spec, std::string_view text, bool& degraded) {
  if (spec.mode != TaskMode::thinking) return std::string(text);
  try {
    return seqtag::split_reasoning(text).answer;
  } catch (const seqtag::TagError&) {
    degraded = true;
    return std::string(text);
  }
}

/// Pulls the first tagged payload of the task's kind; untagged text is used
/// verbatim so bare answers still score.
inline std::string payload_text(const TaskSpec& spec, const std::string& text) {
  if (!spec.payload_kind) return text;
  try {
    for (const auto& seq : seqtag::parse_tagged(text)) {
      if (seq.kind == *spec.payload_kind) return seq.body;
    }
  } catch (const seqtag::TagError&) {
    // malformed tags: fall through to the raw text
  }
  return text;
}

inline std::vector<std::string> split_labels(std::string_view text) {
  std::vector<std::string> labels;
  std::string current;
  for (char c : text) {
    if (c == ';' || c == ',') {
      labels.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  labels.push_back(current);
  return labels;
}

inline std::string strip_spaces(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  }
  return out;
}

inline metrics::AlignmentScoring alignment_scoring(const TaskSpec& spec) {
  metrics::AlignmentScoring s;
  s.match_score = static_cast<int>(spec.param("match_score", 1.0));
  s.mismatch_penalty = static_cast<int>(spec.param("mismatch_penalty", -1.0));
  s.gap_penalty = static_cast<int>(spec.param("gap_penalty", -1.0));
  return s;
}

/// Per-record matching-group metric in [0,1].
inline double matching_metric(const TaskSpec& spec, const std::string& pred,
                              const std::vector<std::string>& refs,
                              const PredictionRecord& rec, const chem::SplitRule& rule) {
  const std::string& id = spec.metric_id;
  if (id == "exact_match") {
    return std::any_of(refs.begin(), refs.end(),
                       [&](const std::string& r) { return r == pred; })
               ? 1.0
               : 0.0;
  }
  if (id == "split_match") {
    return chem::split_match(pred, refs, rule) ? 1.0 : 0.0;
  }
  if (id == "element_match") {
    chem::ChemFormula pf;
    try {
      pf = chem::parse_formula(pred);
    } catch (const chem::FormulaError&) {
      return 0.0;
    }
    for (const auto& r : refs) {
      try {
        if (chem::element_multiset_equal(pf, chem::parse_formula(r))) return 1.0;
      } catch (const chem::FormulaError&) {
      }
    }
    return 0.0;
  }
  if (id == "rouge_l") {
    double best = 0.0;
    for (const auto& r : refs) best = std::max(best, metrics::rouge_l(pred, r));
    return best;
  }
  if (id == "multilabel_f1") {
    double best = 0.0;
    for (const auto& r : refs) {
      best = std::max(best, metrics::multilabel_prf(split_labels(pred), split_labels(r), rule).f1);
    }
    return best;
  }
  if (id == "fmax") {
    std::vector<std::pair<std::string, double>> scored;
    if (rec.confidences) {
      scored = *rec.confidences;
    } else {
      for (const auto& label : split_labels(pred)) scored.emplace_back(label, 1.0);
    }
    double best = 0.0;
    for (const auto& r : refs) {
      best = std::max(best, metrics::fmax(scored, split_labels(r), rule));
    }
    return best;
  }
  if (id == "smith_waterman") {
    double best = 0.0;
    for (const auto& r : refs) {
      best = std::max(best, metrics::smith_waterman_normalized(pred, r, alignment_scoring(spec)));
    }
    return best;
  }
  if (id == "label_match" || id == "auc" || id == "mcc") {
    // Aggregate classification metrics reduce to per-record label agreement
    // when used as an RL reward. Numeric scores count as positive at >= 0.5.
    auto predicted = metrics::parse_bool(pred, rule);
    if (!predicted) {
      if (auto score = metrics::extract_first_number(pred)) predicted = *score >= 0.5;
    }
    if (!predicted) return 0.0;
    for (const auto& r : refs) {
      if (auto label = metrics::parse_bool(r, rule); label && *label == *predicted) return 1.0;
    }
    return 0.0;
  }
  throw RewardError(RewardError::Code::unknown_metric,
                    "unknown matching metric '" + id + "' for task " + spec.id);
}

/// Local stand-ins used when an external verifier is unavailable. Scores are
/// flagged degraded by the caller.
inline double fallback_tool_score(const TaskSpec& spec, const std::string& pred,
                                  const std::vector<std::string>& refs) {
  const std::string& id = spec.metric_id;
  if (id == "smiles_canonical_match" || id == "canonicalize_smiles") {
    if (chem::validate_smiles(strip_spaces(pred))) return 0.0;  // grammar reject
    std::string flat = strip_spaces(pred);
    for (const auto& r : refs) {
      if (strip_spaces(r) == flat) return 1.0;
    }
    return 0.0;
  }
  if (id == "rna_mfe") {
    try {
      return static_cast<double>(toolbridge::nussinov_pairs(strip_spaces(pred)));
    } catch (const toolbridge::RnaAlphabetError&) {
      return 0.0;
    }
  }
  if (id == "semantic_judge") {
    double best = 0.0;
    for (const auto& r : refs) best = std::max(best, metrics::rouge_l(pred, r));
    return best;
  }
  // No better local route: exact normalized equality.
  std::string flat = strip_spaces(pred);
  for (const auto& r : refs) {
    if (strip_spaces(r) == flat) return 1.0;
  }
  return 0.0;
}

}  // namespace detail

/// Scores one prediction record under its task spec. Distance-group tasks
/// parse a numeric prediction and soften the absolute error; matching-group
/// tasks run the registered [0,1] metric; tool-verified tasks consult the
/// verifier registry and fall back to a flagged local score when the tool is
/// unavailable. Unparseable distance predictions yield a degraded reward of
/// 0 instead of throwing, so RL batches never abort.
inline SoftReward compute_reward(const TaskSpec& spec, const PredictionRecord& rec,
                                 const toolbridge::VerifierRegistry& tools,
                                 const chem::SplitRule& rule = {}) {
  bool degraded = false;
  std::string answer = detail::answer_text(spec, rec.prediction, degraded);
  std::string pred = detail::payload_text(spec, answer);
  std::vector<std::string> refs;
  refs.reserve(rec.references.size());
  for (const auto& r : rec.references) refs.push_back(detail::payload_text(spec, r));

  switch (spec.reward_group) {
    case RewardGroup::distance: {
      auto predicted = metrics::extract_first_number(pred);
      if (!predicted) {
        SoftReward reward;
        reward.value = 0.0;
        reward.raw_metric = 0.0;
        reward.metric_id = spec.metric_id;
        reward.degraded = true;
        return reward;
      }
      double best = std::numeric_limits<double>::infinity();
      for (const auto& r : refs) {
        if (auto target = metrics::extract_first_number(r)) {
          best = std::min(best, std::abs(*predicted - *target));
        }
      }
      if (!std::isfinite(best)) {
        SoftReward reward;
        reward.metric_id = spec.metric_id;
        reward.degraded = true;
        return reward;
      }
      return soften(best, spec.calibration, spec.metric_id, degraded);
    }
    case RewardGroup::matching: {
      double raw = detail::matching_metric(spec, pred, refs, rec, rule);
      return soften(raw, spec.calibration, spec.metric_id, degraded);
    }
    case RewardGroup::tool_verified: {
      toolbridge::VerifierRequest req;
      req.kind = spec.metric_id;
      req.payload["task_id"] = spec.id;
      req.payload["prediction"] = pred;
      if (!refs.empty()) req.payload["reference"] = refs.front();
      if (tools.has(req.kind)) {
        try {
          auto response = tools.call(req);
          if (response.ok) {
            return soften(*response.score, spec.calibration, spec.metric_id, degraded);
          }
        } catch (const toolbridge::ToolError&) {
          // fall through to the local fallback
        }
      }
      double raw = detail::fallback_tool_score(spec, pred, refs);
      return soften(raw, spec.calibration, spec.metric_id, true);
    }
  }
  throw RewardError(RewardError::Code::unknown_metric, "unhandled reward group");
}

/// True iff scoring `output` against `answer` clears the task's equivalence
/// threshold. Used for solve-rate adjudication and dynamic-sampling filters.
inline bool is_equivalent(const std::string& answer, const std::string& output,
                          const TaskSpec& spec, const toolbridge::VerifierRegistry& tools,
                          const chem::SplitRule& rule = {}) {
  PredictionRecord rec;
  rec.task_id = spec.id;
  rec.prediction = output;
  rec.references = {answer};
  return compute_reward(spec, rec, tools, rule).value >= spec.equivalence_threshold;
}

}  // namespace scireward::rewards
