#pragma once

// Training-pool curation: budgeted correct-only cold-start harvesting,
// empirical solve rates, the mid-difficulty filter, pool sampling with
// top-up, the adaptive temperature rule and the cold-start replacement
// transform for reasoning tasks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scireward/chemparse.hpp"
#include "scireward/rewards.hpp"
#include "scireward/seqtag.hpp"

namespace scireward::curation {

class CurationError : public std::runtime_error {
 public:
  enum class Code { empty_pool, missing_cot, unknown_task };

  CurationError(Code code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// ---------------------------------------------------------------------------
// Cold-start harvesting
// ---------------------------------------------------------------------------

struct ColdStartConfig {
  std::size_t target = 500;        // T: correct items wanted
  std::size_t budget = 50000;      // C: hard evaluation budget
  std::size_t initial_draw = 6000; // first batch size
  double epsilon = 1e-3;           // stability floor for the solve-rate estimate
};

struct PoolExample {
  std::string prompt;
  std::vector<std::string> references;
};

struct HarvestItem {
  std::string prompt;
  std::string cot;
  std::string answer;
};

struct HarvestState {
  std::size_t evaluated = 0;  // N
  std::size_t correct = 0;    // S (= items.size())
  std::vector<HarvestItem> items;
  bool target_met = false;
};

/// Additional prompts to draw so that, at the running accuracy estimate,
/// the remaining target is expected to be met: ceil((T-S)/max(p,eps)).
/// Zero once the target is reached.
inline std::size_t estimate_additional(std::size_t target, std::size_t correct, double p_hat,
                                       double epsilon) {
  if (correct >= target) return 0;
  double denom = std::max(p_hat, epsilon);
  double need = static_cast<double>(target - correct);
  return static_cast<std::size_t>(std::ceil(need / denom));
}

namespace detail {

/// Draws uniformly without replacement until the pool is exhausted, then
/// with replacement. Batch sizes at desk scale can exceed the pool.
class PoolDrawer {
 public:
  PoolDrawer(const std::vector<PoolExample>& pool, std::mt19937_64& rng)
      : pool_(pool), rng_(rng), order_(pool.size()) {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  const PoolExample& next() {
    if (cursor_ < order_.size()) return pool_[order_[cursor_++]];
    std::uniform_int_distribution<std::size_t> pick(0, pool_.size() - 1);
    return pool_[pick(rng_)];
  }

 private:
  const std::vector<PoolExample>& pool_;
  std::mt19937_64& rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace detail

/// Budgeted correct-only harvesting. Draws an initial batch, adjudicates it
/// in full, then repeats estimate-sized batches until the correct tally
/// reaches the target or the evaluation budget is spent. All accumulated
/// correct items are kept either way.
///
/// `generator(prompt)` returns a (cot, answer) pair; `judge(answer, refs)`
/// decides correctness.
template <typename Generator, typename Judge>
HarvestState cold_start_harvest(Generator&& generator, Judge&& judge,
                                const std::vector<PoolExample>& pool,
                                const ColdStartConfig& cfg, std::mt19937_64& rng) {
  HarvestState state;
  if (state.correct >= cfg.target) {
    state.target_met = true;
    return state;
  }
  if (pool.empty()) {
    throw CurationError(CurationError::Code::empty_pool, "cold_start_harvest: empty pool");
  }
  detail::PoolDrawer drawer(pool, rng);

  std::size_t batch = std::min(cfg.initial_draw, cfg.budget);
  while (true) {
    for (std::size_t i = 0; i < batch; ++i) {
      const PoolExample& example = drawer.next();
      auto [cot, answer] = generator(example.prompt);
      ++state.evaluated;
      if (judge(answer, example.references)) {
        ++state.correct;
        state.items.push_back({example.prompt, std::move(cot), std::move(answer)});
      }
    }
    if (state.correct >= cfg.target || state.evaluated >= cfg.budget) break;
    double p_hat = state.evaluated == 0
                       ? 0.0
                       : static_cast<double>(state.correct) / static_cast<double>(state.evaluated);
    std::size_t n_add = estimate_additional(cfg.target, state.correct, p_hat, cfg.epsilon);
    batch = std::min(n_add, cfg.budget - state.evaluated);
  }
  state.target_met = state.correct >= cfg.target;
  return state;
}

// ---------------------------------------------------------------------------
// Solve rate and the mid-difficulty filter
// ---------------------------------------------------------------------------

struct SolveStats {
  std::vector<bool> flags;  // f_i per rollout
  double p_hat = 0.0;       // exactly mean(flags)
};

struct FilterConfig {
  std::size_t n_rollouts = 8;
  double lo = 0.125;  // strict lower bound on p_hat
  double hi = 0.875;  // strict upper bound on p_hat
  std::size_t k = 1000;
};

struct SamplerConfig {
  double temperature = 0.9;
  double step = 0.1;
  double diversity_low = 0.3;
  double failure_high = 0.3;
  std::uint64_t seed = 0;
};

inline constexpr int kGeneratorAttempts = 3;

/// Runs n independent rollouts at fixed temperature with distinct seeds and
/// aggregates the correctness flags. A generator that keeps failing after
/// bounded retries contributes f_i = false.
///
/// `generator(example, temperature, seed)` returns an optional response;
/// `judge(example, response)` applies the task's canonical correctness.
template <typename Generator, typename Judge, typename Example>
SolveStats solve_rate(Generator&& generator, Judge&& judge, const Example& example,
                      const FilterConfig& cfg, const SamplerConfig& sampler) {
  if (cfg.n_rollouts == 0) {
    throw std::invalid_argument("solve_rate: need at least one rollout");
  }
  SolveStats stats;
  stats.flags.reserve(cfg.n_rollouts);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < cfg.n_rollouts; ++i) {
    std::optional<std::string> response;
    for (int attempt = 0; attempt < kGeneratorAttempts && !response; ++attempt) {
      response = generator(example, sampler.temperature,
                           sampler.seed + static_cast<std::uint64_t>(i));
    }
    bool correct = response.has_value() && judge(example, *response);
    stats.flags.push_back(correct);
    if (correct) ++hits;
  }
  stats.p_hat = static_cast<double>(hits) / static_cast<double>(cfg.n_rollouts);
  return stats;
}

/// Retains exactly the examples whose solve rate lies strictly inside
/// (lo, hi). Boundary values are excluded.
template <typename Key>
std::set<Key> mid_difficulty_filter(const std::map<Key, SolveStats>& stats,
                                    const FilterConfig& cfg) {
  std::set<Key> retained;
  for (const auto& [key, s] : stats) {
    if (s.p_hat > cfg.lo && s.p_hat < cfg.hi) retained.insert(key);
  }
  return retained;
}

// ---------------------------------------------------------------------------
// Pool sampling with top-up
// ---------------------------------------------------------------------------

template <typename T>
struct SamplePoolResult {
  std::vector<T> items;
  bool pool_short = false;  // |D| < K: everything returned, caller should warn
};

/// K uniform draws without replacement from the filtered set S, topped up
/// from D without S when S is too small. When even D is smaller than K,
/// everything is returned and the result is flagged.
template <typename T>
SamplePoolResult<T> sample_pool(const std::set<T>& filtered, const std::set<T>& all,
                                std::size_t k, std::mt19937_64& rng) {
  if (!std::includes(all.begin(), all.end(), filtered.begin(), filtered.end())) {
    throw std::invalid_argument("sample_pool: filtered set is not a subset of the pool");
  }
  SamplePoolResult<T> result;
  if (all.size() < k) {
    result.items.assign(all.begin(), all.end());
    result.pool_short = true;
    return result;
  }
  if (filtered.size() >= k) {
    std::sample(filtered.begin(), filtered.end(), std::back_inserter(result.items), k, rng);
    return result;
  }
  result.items.assign(filtered.begin(), filtered.end());
  std::vector<T> rest;
  std::set_difference(all.begin(), all.end(), filtered.begin(), filtered.end(),
                      std::back_inserter(rest));
  std::sample(rest.begin(), rest.end(), std::back_inserter(result.items), k - filtered.size(),
              rng);
  return result;
}

// ---------------------------------------------------------------------------
// Adaptive decoding temperature
// ---------------------------------------------------------------------------

/// One adjustment of the decoding temperature from a batch of rollouts:
/// raise on insufficient diversity of normalized responses, lower (floored
/// at one step) on a high tag/format failure rate, otherwise keep. The two
/// thresholds are configured disjointly; the diversity check runs first.
inline double adapt_temperature(const std::vector<std::string>& responses, double current,
                                const SamplerConfig& cfg) {
  if (responses.empty()) {
    throw std::invalid_argument("adapt_temperature: no responses");
  }
  chem::SplitRule rule;
  std::set<std::string> distinct;
  std::size_t failures = 0;
  for (const auto& response : responses) {
    distinct.insert(chem::normalize_text(response, rule));
    try {
      seqtag::parse_tagged(response);
    } catch (const seqtag::TagError&) {
      ++failures;
    }
  }
  double n = static_cast<double>(responses.size());
  double uniqueness = static_cast<double>(distinct.size()) / n;
  double failure_rate = static_cast<double>(failures) / n;
  if (uniqueness < cfg.diversity_low) return current + cfg.step;
  if (failure_rate > cfg.failure_high) return std::max(cfg.step, current - cfg.step);
  return current;
}

// ---------------------------------------------------------------------------
// Cold-start dataset transform
// ---------------------------------------------------------------------------

struct DataRow {
  std::string task_id;
  std::string prompt;
  std::string target;
};

/// Task-level replacement: rows of thinking tasks get think-block + answer
/// targets from the harvested CoT map; rows of instant tasks pass through
/// byte-identical. Every thinking row must have a CoT entry.
inline std::vector<DataRow> acs_transform(
    const std::vector<DataRow>& dataset,
    const std::map<std::string, rewards::TaskSpec>& tasks,
    const std::map<std::pair<std::string, std::string>, std::pair<std::string, std::string>>&
        cot) {
  std::vector<DataRow> out;
  out.reserve(dataset.size());
  for (const auto& row : dataset) {
    auto task = tasks.find(row.task_id);
    if (task == tasks.end()) {
      throw CurationError(CurationError::Code::unknown_task,
                          "acs_transform: unknown task '" + row.task_id + "'");
    }
    if (task->second.mode != rewards::TaskMode::thinking) {
      out.push_back(row);
      continue;
    }
    auto entry = cot.find({row.task_id, row.prompt});
    if (entry == cot.end()) {
      throw CurationError(CurationError::Code::missing_cot,
                          "acs_transform: no CoT for task '" + row.task_id + "' prompt '" +
                              row.prompt + "'");
    }
    const auto& [thinking, answer] = entry->second;
    out.push_back({row.task_id, row.prompt, seqtag::compose_reasoning(thinking, answer)});
  }
  return out;
}

}  // namespace scireward::curation
