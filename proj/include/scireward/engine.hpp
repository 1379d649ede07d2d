#pragma once

// Prediction-file evaluation: JSONL ingestion, per-task metric dispatch and
// report assembly. Keeps the CLI thin and lets tests drive the same paths.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "scireward/chemparse.hpp"
#include "scireward/metrics.hpp"
#include "scireward/registry.hpp"
#include "scireward/rewards.hpp"
#include "scireward/toolbridge.hpp"

namespace scireward::engine {

struct EvalContext {
  const toolbridge::VerifierRegistry* tools = nullptr;
  const chem::OxidationTable* oxidation = nullptr;  // needed for smact_validity
  chem::SplitRule rule;
};

struct TaskEvaluation {
  metrics::MetricReport report;
  double soft_reward_mean = 0.0;
  bool degraded = false;
  std::string note;  // non-empty when the aggregate metric was undefined
};

class InputError : public std::runtime_error {
 public:
  explicit InputError(std::string msg) : std::runtime_error(std::move(msg)) {}
};

// ---------------------------------------------------------------------------
// JSONL ingestion
// ---------------------------------------------------------------------------

inline rewards::PredictionRecord parse_prediction(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("record is not a JSON object");
  rewards::PredictionRecord rec;
  try {
    rec.task_id = j.at("task_id").get<std::string>();
    rec.example_id = j.value("example_id", "");
    rec.prompt = j.value("prompt", "");
    rec.prediction = j.at("prediction").get<std::string>();
    for (const auto& ref : j.at("references")) {
      rec.references.push_back(ref.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad record: ") + e.what());
  }
  if (rec.references.empty()) throw InputError("record has no references");
  if (j.contains("confidences")) {
    std::vector<std::pair<std::string, double>> scored;
    for (const auto& entry : j["confidences"]) {
      scored.emplace_back(entry.at("label").get<std::string>(),
                          entry.at("confidence").get<double>());
    }
    rec.confidences = std::move(scored);
  }
  return rec;
}

/// Reads line-delimited prediction records. A malformed line aborts with its
/// 1-based line number in the message.
inline std::vector<rewards::PredictionRecord> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open predictions file: " + path);
  std::vector<rewards::PredictionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(parse_prediction(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Per-task evaluation
// ---------------------------------------------------------------------------

namespace detail {

using metrics::parse_bool;

struct NumericPairs {
  std::vector<double> preds;
  std::vector<double> targets;
  std::vector<std::pair<std::size_t, std::string>> skipped;
};

inline NumericPairs numeric_pairs(const rewards::TaskSpec& spec,
                                  const std::vector<rewards::PredictionRecord>& records) {
  NumericPairs out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    bool degraded = false;
    std::string answer = rewards::detail::answer_text(spec, records[i].prediction, degraded);
    auto pred = metrics::extract_first_number(answer);
    if (!pred) {
      out.skipped.emplace_back(i, "unparseable prediction");
      continue;
    }
    std::optional<double> target;
    for (const auto& ref : records[i].references) {
      if ((target = metrics::extract_first_number(ref))) break;
    }
    if (!target) {
      out.skipped.emplace_back(i, "unparseable reference");
      continue;
    }
    out.preds.push_back(*pred);
    out.targets.push_back(*target);
  }
  return out;
}

}  // namespace detail

/// Computes the task's registered metric over its records plus the mean
/// softened reward. Undefined aggregates (constant targets, one class, too
/// few points) yield value 0 with an explanatory note instead of aborting
/// the whole report.
inline TaskEvaluation evaluate_task(const rewards::TaskSpec& spec,
                                    const std::vector<rewards::PredictionRecord>& records,
                                    const EvalContext& ctx) {
  static const toolbridge::VerifierRegistry empty_registry;
  const toolbridge::VerifierRegistry& tools = ctx.tools ? *ctx.tools : empty_registry;

  TaskEvaluation eval;
  eval.report.metric_id = spec.metric_id;

  const std::string& id = spec.metric_id;
  bool per_example_soft = false;

  if (id == "exact_match" || id == "split_match" || id == "element_match" || id == "rouge_l" ||
      id == "multilabel_f1" || id == "fmax" || id == "smith_waterman" ||
      id == "smiles_validity" || id == "smact_validity" || id == "smiles_canonical_match" ||
      id == "rna_mfe" || id == "semantic_judge" || spec.reward_group == rewards::RewardGroup::tool_verified) {
    // Per-example route: the metric and the softened reward share one pass.
    per_example_soft = true;
    bool validity_metric = id == "smiles_validity" || id == "smact_validity";
    if (id == "smact_validity" && ctx.oxidation == nullptr) {
      throw InputError("smact_validity requires an oxidation table");
    }
    double soft_sum = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      double metric_value;
      if (validity_metric) {
        // Validity is the raw metric itself; no reference is consulted.
        bool degraded = false;
        std::string answer = rewards::detail::answer_text(spec, records[i].prediction, degraded);
        std::string payload = rewards::detail::payload_text(spec, answer);
        if (id == "smiles_validity") {
          metric_value =
              chem::validate_smiles(rewards::detail::strip_spaces(payload)) ? 0.0 : 1.0;
        } else {
          try {
            metric_value =
                chem::smact_valid(chem::parse_formula(payload), *ctx.oxidation) ? 1.0 : 0.0;
          } catch (const chem::FormulaError&) {
            metric_value = 0.0;
          }
        }
        soft_sum += rewards::soften(metric_value, spec.calibration).value;
        eval.degraded = eval.degraded || degraded;
      } else {
        auto reward = rewards::compute_reward(spec, records[i], tools, ctx.rule);
        metric_value = reward.raw_metric;
        soft_sum += reward.value;
        eval.degraded = eval.degraded || reward.degraded;
      }
      eval.report.per_example.push_back(metric_value);
    }
    eval.report.n = eval.report.per_example.size();
    eval.report.value =
        eval.report.n == 0
            ? 0.0
            : std::accumulate(eval.report.per_example.begin(), eval.report.per_example.end(), 0.0) /
                  static_cast<double>(eval.report.n);
    eval.soft_reward_mean =
        records.empty() ? 0.0 : soft_sum / static_cast<double>(records.size());
  } else if (id == "mae" || id == "rmse" || id == "r2" || id == "pearson" || id == "spearman" ||
             id == "mixed_score" || id == "mad_over_mae") {
    auto pairs = detail::numeric_pairs(spec, records);
    eval.report.skipped = pairs.skipped;
    eval.report.n = pairs.preds.size();
    try {
      if (pairs.preds.empty()) {
        eval.note = "no scorable examples";
      } else if (id == "mae" || id == "rmse" || id == "r2") {
        auto errors = metrics::regression_errors(pairs.preds, pairs.targets);
        if (id == "mae") {
          eval.report.value = errors.mae;
        } else if (id == "rmse") {
          eval.report.value = errors.rmse;
        } else if (errors.r2) {
          eval.report.value = *errors.r2;
        } else {
          eval.note = "constant targets: r2 undefined";
        }
      } else if (id == "pearson") {
        eval.report.value = metrics::pearson(pairs.preds, pairs.targets);
      } else if (id == "spearman") {
        eval.report.value = metrics::spearman(pairs.preds, pairs.targets);
      } else if (id == "mixed_score") {
        eval.report.value = metrics::mixed_score(pairs.preds, pairs.targets,
                                                 spec.param("range_low", 0.0),
                                                 spec.param("range_high", 30.0));
      } else {  // mad_over_mae: the task is one property group
        eval.report.value = metrics::mad_over_mae({{pairs.preds, pairs.targets}});
      }
    } catch (const metrics::MetricError& e) {
      eval.report.value = 0.0;
      eval.note = e.what();
    }
  } else if (id == "auc" || id == "mcc") {
    std::vector<double> scores;
    std::vector<bool> labels;
    metrics::ConfusionCounts counts;
    for (std::size_t i = 0; i < records.size(); ++i) {
      bool degraded = false;
      std::string answer = rewards::detail::answer_text(spec, records[i].prediction, degraded);
      auto label = detail::parse_bool(records[i].references.front(), ctx.rule);
      if (!label) {
        eval.report.skipped.emplace_back(i, "unparseable reference label");
        continue;
      }
      std::optional<double> score = metrics::extract_first_number(answer);
      std::optional<bool> predicted = detail::parse_bool(answer, ctx.rule);
      if (!score && !predicted) {
        eval.report.skipped.emplace_back(i, "unparseable prediction");
        continue;
      }
      if (!score) {
        score = *predicted ? 1.0 : 0.0;
        eval.degraded = true;  // hard labels mapped to {0,1} scores
      }
      if (!predicted) predicted = *score >= 0.5;
      scores.push_back(*score);
      labels.push_back(*label);
      if (*label) {
        *predicted ? ++counts.tp : ++counts.fn;
      } else {
        *predicted ? ++counts.fp : ++counts.tn;
      }
    }
    eval.report.n = scores.size();
    if (id == "mcc") {
      eval.report.value = metrics::mcc(counts);
    } else {
      try {
        eval.report.value = scores.empty() ? 0.0 : metrics::auc(scores, labels);
        if (scores.empty()) eval.note = "no scorable examples";
      } catch (const metrics::MetricError& e) {
        eval.report.value = 0.0;
        eval.note = e.what();
      }
    }
  } else {
    throw rewards::RewardError(rewards::RewardError::Code::unknown_metric,
                               "unknown metric '" + id + "' for task " + spec.id);
  }

  if (!per_example_soft) {
    // Aggregate metrics: soften the per-record reward the RL loop would see.
    double soft_sum = 0.0;
    for (const auto& rec : records) {
      auto reward = rewards::compute_reward(spec, rec, tools, ctx.rule);
      soft_sum += reward.value;
      eval.degraded = eval.degraded || reward.degraded;
    }
    eval.soft_reward_mean = records.empty() ? 0.0 : soft_sum / static_cast<double>(records.size());
  }
  return eval;
}

// ---------------------------------------------------------------------------
// Report assembly
// ---------------------------------------------------------------------------

/// Builds the full evaluation report. Tasks appear once each, in id order;
/// the registry fingerprint ties the report to its configuration.
inline nlohmann::ordered_json build_report(
    const registry::TaskRegistry& reg,
    const std::map<std::string, std::vector<rewards::PredictionRecord>>& by_task,
    const EvalContext& ctx) {
  nlohmann::ordered_json report;
  report["fingerprint"] = reg.fingerprint();
  report["tasks"] = nlohmann::ordered_json::array();
  std::size_t examples = 0, degraded_tasks = 0;
  for (const auto& [task_id, records] : by_task) {
    const rewards::TaskSpec* spec = reg.find(task_id);
    if (spec == nullptr) {
      throw rewards::RewardError(rewards::RewardError::Code::unknown_task,
                                 "unknown task id '" + task_id + "'");
    }
    TaskEvaluation eval = evaluate_task(*spec, records, ctx);
    nlohmann::ordered_json entry;
    entry["task_id"] = task_id;
    entry["metric_id"] = eval.report.metric_id;
    entry["value"] = eval.report.value;
    entry["n"] = eval.report.n;
    entry["skipped"] = eval.report.skipped_count();
    entry["soft_reward_mean"] = eval.soft_reward_mean;
    entry["degraded"] = eval.degraded;
    entry["note"] = eval.note;
    report["tasks"].push_back(std::move(entry));
    examples += records.size();
    if (eval.degraded) ++degraded_tasks;
  }
  report["summary"] = {{"tasks", by_task.size()},
                       {"examples", examples},
                       {"degraded_tasks", degraded_tasks}};
  return report;
}

/// Writes text to `path` through a temporary file and an atomic rename, so
/// a failed run never leaves a partial file behind.
inline void atomic_write(const std::string& path, const std::string& text) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write: " + tmp);
    out << text;
    if (!out) throw InputError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw InputError("cannot rename into place: " + path);
  }
}

}  // namespace scireward::engine
