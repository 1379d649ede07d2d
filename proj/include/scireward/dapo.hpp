#pragma once

// Group-relative policy optimization: group-standardized advantages, the
// asymmetrically clipped token-level objective, dynamic sampling of
// non-degenerate groups, and a seeded tabular-softmax training simulator
// that drives the full reward -> advantage -> update loop.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace scireward::dapo {

class DapoError : public std::runtime_error {
 public:
  enum class Code { too_few_rollouts, degenerate_group, length_mismatch, non_finite_logprob };

  DapoError(Code code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// One sampled response with per-token log-probabilities under the sampling
/// policy (old) and the policy being optimized (new). Token count is the
/// length of the aligned arrays.
struct Rollout {
  std::string text;
  std::vector<double> old_logprobs;
  std::vector<double> new_logprobs;
};

/// One prompt's G responses with their scalar rewards.
struct RolloutGroup {
  std::string question;
  std::string answer;
  std::vector<Rollout> rollouts;
  std::vector<double> rewards;
};

struct DapoConfig {
  double eps_low = 0.2;    // lower clip margin
  double eps_high = 0.28;  // upper clip margin (Clip-Higher)
  double std_floor = 1e-12;
};

struct ObjectiveReport {
  double objective = 0.0;
  std::size_t token_count = 0;
  std::vector<double> per_token;  // unnormalized per-token contributions, batch order
  double fraction_clipped = 0.0;  // tokens where the clipped branch was strictly smaller
};

/// Group-standardized advantages: (R_i - mean) / std with the population
/// standard deviation. Groups whose reward spread falls under the floor are
/// degenerate and must be removed by dynamic sampling first.
inline std::vector<double> group_advantages(const std::vector<double>& rewards,
                                            const DapoConfig& cfg = {}) {
  if (rewards.size() < 2) {
    throw DapoError(DapoError::Code::too_few_rollouts, "group_advantages: need G >= 2");
  }
  double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;
  double std_dev = std::sqrt(var);
  if (std_dev < cfg.std_floor) {
    throw DapoError(DapoError::Code::degenerate_group,
                    "group_advantages: zero reward spread in group");
  }
  std::vector<double> advantages;
  advantages.reserve(rewards.size());
  for (double r : rewards) advantages.push_back((r - mean) / std_dev);
  return advantages;
}

/// Per-token probability ratios r_{i,t} = exp(new - old).
inline std::vector<std::vector<double>> importance_ratios(const RolloutGroup& group) {
  std::vector<std::vector<double>> ratios;
  ratios.reserve(group.rollouts.size());
  for (const auto& rollout : group.rollouts) {
    if (rollout.old_logprobs.size() != rollout.new_logprobs.size() ||
        rollout.old_logprobs.empty()) {
      throw DapoError(DapoError::Code::length_mismatch,
                      "importance_ratios: misaligned logprob arrays");
    }
    std::vector<double> row;
    row.reserve(rollout.old_logprobs.size());
    for (std::size_t t = 0; t < rollout.old_logprobs.size(); ++t) {
      double old_lp = rollout.old_logprobs[t];
      double new_lp = rollout.new_logprobs[t];
      if (!std::isfinite(old_lp) || !std::isfinite(new_lp)) {
        throw DapoError(DapoError::Code::non_finite_logprob,
                        "importance_ratios: non-finite logprob");
      }
      double ratio = std::exp(new_lp - old_lp);
      if (!std::isfinite(ratio)) {
        throw DapoError(DapoError::Code::non_finite_logprob,
                        "importance_ratios: ratio overflow");
      }
      row.push_back(ratio);
    }
    ratios.push_back(std::move(row));
  }
  return ratios;
}

/// Keeps exactly the groups with an equivalent-response count strictly
/// between 0 and G; all-correct and all-wrong groups carry no gradient
/// signal and are dropped. Group contents are never altered.
template <typename Equiv>
std::vector<RolloutGroup> dynamic_sampling_filter(const std::vector<RolloutGroup>& groups,
                                                  Equiv&& equivalent) {
  std::vector<RolloutGroup> kept;
  for (const auto& group : groups) {
    std::size_t hits = 0;
    for (const auto& rollout : group.rollouts) {
      if (equivalent(group.answer, rollout.text)) ++hits;
    }
    if (hits > 0 && hits < group.rollouts.size()) kept.push_back(group);
  }
  return kept;
}

/// The clipped surrogate objective with a single token normalizer across
/// all kept groups:
///   J = (1/sum |o_i|) * sum_i sum_t min(r Â, clip(r, 1-eps_low, 1+eps_high) Â).
inline ObjectiveReport dapo_objective(const std::vector<RolloutGroup>& groups,
                                      const DapoConfig& cfg = {}) {
  ObjectiveReport report;
  double sum = 0.0;
  std::size_t clipped = 0;
  for (const auto& group : groups) {
    if (group.rewards.size() != group.rollouts.size()) {
      throw DapoError(DapoError::Code::length_mismatch,
                      "dapo_objective: rewards/rollouts mismatch");
    }
    auto advantages = group_advantages(group.rewards, cfg);
    auto ratios = importance_ratios(group);
    for (std::size_t i = 0; i < ratios.size(); ++i) {
      double advantage = advantages[i];
      for (double ratio : ratios[i]) {
        double unclipped = ratio * advantage;
        double clipped_ratio = std::clamp(ratio, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high);
        double clipped_term = clipped_ratio * advantage;
        double term = std::min(unclipped, clipped_term);
        if (clipped_term < unclipped) ++clipped;
        report.per_token.push_back(term);
        sum += term;
        ++report.token_count;
      }
    }
  }
  report.objective = report.token_count == 0 ? 0.0 : sum / static_cast<double>(report.token_count);
  report.fraction_clipped =
      report.token_count == 0 ? 0.0
                              : static_cast<double>(clipped) / static_cast<double>(report.token_count);
  return report;
}

// ---------------------------------------------------------------------------
// Tabular-softmax training simulator
// ---------------------------------------------------------------------------

/// A toy categorical task: the policy picks one vocabulary entry per
/// response and is rewarded for matching the reference answer's quality.
struct SimTask {
  std::string prompt;
  std::string answer;
  std::vector<std::string> vocabulary;
};

struct SimConfig {
  std::size_t group_size = 8;       // G
  std::size_t groups_per_step = 4;  // groups sampled per optimization step
  double learning_rate = 0.5;
  DapoConfig dapo;
};

struct TraceEntry {
  std::size_t step = 0;
  double mean_soft_reward = 0.0;  // expected soft reward of the policy at step start
  double fraction_clipped = 0.0;
  std::size_t kept_groups = 0;
};

struct SimResult {
  std::vector<TraceEntry> trace;
  std::vector<double> logits;
};

/// One sampled group plus the vocabulary index of each (single-token)
/// response, so objective and gradient can be re-evaluated at any logits.
struct SimGroup {
  RolloutGroup group;
  std::vector<int> vocab_indices;
};

namespace detail {

inline std::vector<double> log_softmax(const std::vector<double>& logits) {
  double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max_logit);
  double log_z = max_logit + std::log(sum);
  std::vector<double> out;
  out.reserve(logits.size());
  for (double z : logits) out.push_back(z - log_z);
  return out;
}

inline int sample_index(const std::vector<double>& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  double cumulative = 0.0;
  for (std::size_t v = 0; v < probs.size(); ++v) {
    cumulative += probs[v];
    if (u < cumulative) return static_cast<int>(v);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace detail

/// Rewrites each rollout's new logprobs from the given logits and evaluates
/// the objective there.
inline ObjectiveReport objective_for_logits(const std::vector<double>& logits,
                                            const std::vector<SimGroup>& batch,
                                            const DapoConfig& cfg = {}) {
  auto logprobs = detail::log_softmax(logits);
  std::vector<RolloutGroup> groups;
  groups.reserve(batch.size());
  for (const auto& sim_group : batch) {
    RolloutGroup group = sim_group.group;
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
      group.rollouts[i].new_logprobs.assign(1, logprobs[sim_group.vocab_indices[i]]);
    }
    groups.push_back(std::move(group));
  }
  return dapo_objective(groups, cfg);
}

/// Analytic gradient of the objective with respect to the policy logits.
/// Gradient flows through a token only where the unclipped branch is active:
/// positive advantages stop at the upper clip, negative ones at the lower.
inline std::vector<double> gradient_for_logits(const std::vector<double>& logits,
                                               const std::vector<SimGroup>& batch,
                                               const DapoConfig& cfg = {}) {
  auto logprobs = detail::log_softmax(logits);
  std::vector<double> probs;
  probs.reserve(logprobs.size());
  for (double lp : logprobs) probs.push_back(std::exp(lp));

  std::size_t token_count = 0;
  for (const auto& sim_group : batch) token_count += sim_group.group.rollouts.size();
  std::vector<double> grad(logits.size(), 0.0);
  if (token_count == 0) return grad;

  for (const auto& sim_group : batch) {
    auto advantages = group_advantages(sim_group.group.rewards, cfg);
    for (std::size_t i = 0; i < sim_group.group.rollouts.size(); ++i) {
      int v = sim_group.vocab_indices[i];
      double old_lp = sim_group.group.rollouts[i].old_logprobs.at(0);
      double ratio = std::exp(logprobs[v] - old_lp);
      double advantage = advantages[i];
      bool active = advantage >= 0.0 ? ratio < 1.0 + cfg.eps_high : ratio > 1.0 - cfg.eps_low;
      if (!active) continue;
      double coefficient = advantage * ratio / static_cast<double>(token_count);
      for (std::size_t k = 0; k < grad.size(); ++k) {
        double indicator = static_cast<int>(k) == v ? 1.0 : 0.0;
        grad[k] += coefficient * (indicator - probs[k]);
      }
    }
  }
  return grad;
}

/// Samples `groups_per_step` groups of G single-token responses from the
/// categorical policy at `logits`, scoring each with `reward_fn`.
template <typename RewardFn>
std::vector<SimGroup> sample_batch(const SimTask& task, const std::vector<double>& logits,
                                   const SimConfig& cfg, RewardFn&& reward_fn,
                                   std::mt19937_64& rng) {
  auto logprobs = detail::log_softmax(logits);
  std::vector<double> probs;
  probs.reserve(logprobs.size());
  for (double lp : logprobs) probs.push_back(std::exp(lp));

  std::vector<SimGroup> batch;
  batch.reserve(cfg.groups_per_step);
  for (std::size_t g = 0; g < cfg.groups_per_step; ++g) {
    SimGroup sim_group;
    sim_group.group.question = task.prompt;
    sim_group.group.answer = task.answer;
    for (std::size_t i = 0; i < cfg.group_size; ++i) {
      int v = detail::sample_index(probs, rng);
      Rollout rollout;
      rollout.text = task.vocabulary[v];
      rollout.old_logprobs = {logprobs[v]};
      rollout.new_logprobs = {logprobs[v]};
      sim_group.group.rollouts.push_back(std::move(rollout));
      sim_group.vocab_indices.push_back(v);
      sim_group.group.rewards.push_back(reward_fn(task.answer, task.vocabulary[v]));
    }
    batch.push_back(std::move(sim_group));
  }
  return batch;
}

/// Runs `steps` optimization steps: sample, score, dynamic-sample, ascend
/// the analytic objective gradient. The trace records the policy's expected
/// soft reward at each step start; steps whose batch is entirely degenerate
/// apply no update, so the previous value carries forward. Fully
/// reproducible for a fixed seed.
template <typename RewardFn, typename Equiv>
SimResult simulate_training(const SimTask& task, std::vector<double> logits, std::size_t steps,
                            const SimConfig& cfg, RewardFn&& reward_fn, Equiv&& equivalent,
                            std::mt19937_64& rng) {
  if (steps == 0) throw std::invalid_argument("simulate_training: steps must be >= 1");
  if (logits.size() != task.vocabulary.size()) {
    throw std::invalid_argument("simulate_training: logits/vocabulary size mismatch");
  }
  SimResult result;
  result.trace.reserve(steps);
  for (std::size_t step = 0; step < steps; ++step) {
    auto logprobs = detail::log_softmax(logits);
    double expected_reward = 0.0;
    for (std::size_t v = 0; v < task.vocabulary.size(); ++v) {
      expected_reward += std::exp(logprobs[v]) * reward_fn(task.answer, task.vocabulary[v]);
    }

    auto batch = sample_batch(task, logits, cfg, reward_fn, rng);
    std::vector<RolloutGroup> groups;
    groups.reserve(batch.size());
    for (const auto& sim_group : batch) groups.push_back(sim_group.group);
    auto kept_groups = dynamic_sampling_filter(groups, equivalent);

    TraceEntry entry;
    entry.step = step;
    entry.mean_soft_reward = expected_reward;
    entry.kept_groups = kept_groups.size();

    if (!kept_groups.empty()) {
      // Rebuild the kept batch with vocabulary indices for the update.
      std::vector<SimGroup> kept_batch;
      for (std::size_t g = 0; g < batch.size(); ++g) {
        std::size_t hits = 0;
        for (const auto& rollout : batch[g].group.rollouts) {
          if (equivalent(batch[g].group.answer, rollout.text)) ++hits;
        }
        if (hits > 0 && hits < batch[g].group.rollouts.size()) kept_batch.push_back(batch[g]);
      }
      entry.fraction_clipped = objective_for_logits(logits, kept_batch, cfg.dapo).fraction_clipped;
      auto grad = gradient_for_logits(logits, kept_batch, cfg.dapo);
      for (std::size_t k = 0; k < logits.size(); ++k) {
        logits[k] += cfg.learning_rate * grad[k];
      }
    }
    result.trace.push_back(entry);
  }
  result.logits = std::move(logits);
  return result;
}

}  // namespace scireward::dapo
