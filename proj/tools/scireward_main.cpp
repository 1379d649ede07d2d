// Command-line front door: evaluate prediction files against a task
// registry, run the curation pipeline (coldstart / filter / sample) and run
// the DAPO training simulator. All commands are deterministic functions of
// their inputs, flags and seed.
//
// Exit codes: 0 success, 1 unknown task id, 2 malformed input or config,
// 3 degraded tool fallback under --strict.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scireward/curation.hpp"
#include "scireward/dapo.hpp"
#include "scireward/engine.hpp"
#include "scireward/registry.hpp"
#include "scireward/rewards.hpp"
#include "scireward/toolbridge.hpp"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitUnknownTask = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitStrictDegraded = 3;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw scireward::engine::InputError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw scireward::engine::InputError(path + ": " + e.what());
  }
  return j;
}

// Binds external verifier processes listed in the config the SCIREWARD_TOOLS
// environment variable points to. Each entry is either a plain argv array or
// {"argv": [...], "pool": N} for a pool of identical instances.
scireward::toolbridge::VerifierRegistry load_tool_bindings() {
  scireward::toolbridge::VerifierRegistry registry;
  const char* path = std::getenv("SCIREWARD_TOOLS");
  if (path == nullptr || *path == '\0') return registry;
  json j = load_json_file(path);
  if (!j.contains("tools")) return registry;
  for (auto it = j["tools"].begin(); it != j["tools"].end(); ++it) {
    std::vector<std::string> argv;
    std::size_t pool = 1;
    const json& value = it.value();
    const json& argv_json = value.is_object() ? value.at("argv") : value;
    for (const auto& arg : argv_json) argv.push_back(arg.get<std::string>());
    if (value.is_object()) pool = value.value("pool", 1u);
    registry.register_process(it.key(), std::move(argv), pool);
  }
  return registry;
}

int cmd_evaluate(const std::string& predictions_path, const std::string& registry_path,
                 const std::string& out_path, const std::string& oxidation_path,
                 bool oxidation_path_given, unsigned jobs, bool strict) {
  auto registry = scireward::registry::TaskRegistry::load(registry_path);
  auto records = scireward::engine::read_predictions(predictions_path);

  std::map<std::string, std::vector<scireward::rewards::PredictionRecord>> by_task;
  for (auto& rec : records) {
    if (registry.find(rec.task_id) == nullptr) {
      std::cerr << "unknown task id '" << rec.task_id << "'\n";
      return kExitUnknownTask;
    }
    by_task[rec.task_id].push_back(std::move(rec));
  }

  auto tools = load_tool_bindings();
  scireward::chem::OxidationTable oxidation;
  scireward::engine::EvalContext ctx;
  ctx.tools = &tools;
  // An explicitly given table path must load; the default path is
  // best-effort so runs outside the repository root still work for tasks
  // that never touch composition screening.
  if (oxidation_path_given || std::ifstream(oxidation_path).good()) {
    oxidation = scireward::chem::OxidationTable::load(oxidation_path);
    ctx.oxidation = &oxidation;
  }

  ordered_json report;
  if (jobs <= 1 || by_task.size() <= 1) {
    report = scireward::engine::build_report(registry, by_task, ctx);
  } else {
    // Tasks evaluate concurrently; assembly stays in task-id order so the
    // report is byte-identical to the serial run.
    std::vector<std::pair<std::string, const std::vector<scireward::rewards::PredictionRecord>*>>
        items;
    for (const auto& [task_id, recs] : by_task) items.emplace_back(task_id, &recs);
    std::vector<scireward::engine::TaskEvaluation> evals(items.size());
    std::vector<std::thread> workers;
    std::atomic<std::size_t> next{0};
    unsigned worker_count = std::min<unsigned>(jobs, static_cast<unsigned>(items.size()));
    for (unsigned w = 0; w < worker_count; ++w) {
      workers.emplace_back([&]() {
        while (true) {
          std::size_t i = next.fetch_add(1);
          if (i >= items.size()) break;
          evals[i] = scireward::engine::evaluate_task(*registry.find(items[i].first),
                                                      *items[i].second, ctx);
        }
      });
    }
    for (auto& worker : workers) worker.join();
    report["fingerprint"] = registry.fingerprint();
    report["tasks"] = ordered_json::array();
    std::size_t examples = 0, degraded_tasks = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& eval = evals[i];
      ordered_json entry;
      entry["task_id"] = items[i].first;
      entry["metric_id"] = eval.report.metric_id;
      entry["value"] = eval.report.value;
      entry["n"] = eval.report.n;
      entry["skipped"] = eval.report.skipped_count();
      entry["soft_reward_mean"] = eval.soft_reward_mean;
      entry["degraded"] = eval.degraded;
      entry["note"] = eval.note;
      report["tasks"].push_back(std::move(entry));
      examples += items[i].second->size();
      if (eval.degraded) ++degraded_tasks;
    }
    report["summary"] = {{"tasks", items.size()},
                         {"examples", examples},
                         {"degraded_tasks", degraded_tasks}};
  }

  if (strict) {
    for (const auto& entry : report["tasks"]) {
      if (entry["degraded"].get<bool>()) {
        std::cerr << "strict: task '" << entry["task_id"].get<std::string>()
                  << "' used a degraded tool fallback\n";
        return kExitStrictDegraded;
      }
    }
  }
  scireward::engine::atomic_write(out_path, report.dump(2) + "\n");
  return kExitOk;
}

// --- curate ------------------------------------------------------------------

int cmd_curate_coldstart(const json& cfg, const std::string& out_path, std::uint64_t seed) {
  scireward::curation::ColdStartConfig cs;
  cs.target = cfg.value("target", 500u);
  cs.budget = cfg.value("budget", 50000u);
  cs.initial_draw = cfg.value("initial_draw", 6000u);
  cs.epsilon = cfg.value("epsilon", 1e-3);
  std::string task_id = cfg.value("task_id", "task");
  std::size_t pool_size = cfg.value("pool_size", 20000u);

  std::vector<scireward::curation::PoolExample> pool;
  pool.reserve(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) {
    std::string tag = std::to_string(i);
    pool.push_back({"prompt-" + tag, {"ref-" + tag}});
  }

  std::mt19937_64 rng(seed);
  json generator_cfg = cfg.value("generator", json{{"type", "mock"}});
  std::string gen_type = generator_cfg.value("type", "mock");

  scireward::curation::HarvestState state;
  auto judge = [](const std::string& answer, const std::vector<std::string>& refs) {
    return std::find(refs.begin(), refs.end(), answer) != refs.end();
  };
  if (gen_type == "mock") {
    double accuracy = generator_cfg.value("accuracy", 1.0);
    std::mt19937_64 gen_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto generator = [&](const std::string& prompt) {
      bool correct = unit(gen_rng) < accuracy;
      std::string answer = correct ? "ref-" + prompt.substr(7) : "incorrect";
      return std::make_pair("worked through " + prompt, answer);
    };
    state = scireward::curation::cold_start_harvest(generator, judge, pool, cs, rng);
  } else if (gen_type == "tool") {
    auto tools = load_tool_bindings();
    std::string kind = generator_cfg.value("kind", "cot_generator");
    auto generator = [&](const std::string& prompt) {
      scireward::toolbridge::VerifierRequest req;
      req.kind = kind;
      req.payload["prompt"] = prompt;
      auto response = tools.call(req);
      json detail = json::parse(response.detail, nullptr, false);
      if (detail.is_object()) {
        return std::make_pair(detail.value("cot", ""), detail.value("answer", ""));
      }
      return std::make_pair(std::string{}, response.detail);
    };
    state = scireward::curation::cold_start_harvest(generator, judge, pool, cs, rng);
  } else {
    throw scireward::engine::InputError("unknown generator type '" + gen_type + "'");
  }

  std::ostringstream out;
  for (const auto& item : state.items) {
    ordered_json line;
    line["task_id"] = task_id;
    line["prompt"] = item.prompt;
    line["cot"] = item.cot;
    line["answer"] = item.answer;
    out << line.dump() << "\n";
  }
  scireward::engine::atomic_write(out_path, out.str());
  std::cerr << "coldstart: evaluated " << state.evaluated << ", collected " << state.correct
            << (state.target_met ? " (target met)\n" : " (budget exhausted)\n");
  return kExitOk;
}

int cmd_curate_filter(const json& cfg, const std::string& out_path, std::uint64_t seed) {
  scireward::curation::FilterConfig fc;
  fc.n_rollouts = cfg.value("n_rollouts", 8u);
  fc.lo = cfg.value("lo", 0.125);
  fc.hi = cfg.value("hi", 0.875);
  scireward::curation::SamplerConfig sampler;
  sampler.temperature = cfg.value("temperature", 0.9);
  sampler.seed = seed;
  std::string task_id = cfg.value("task_id", "task");
  std::string input = cfg.at("input").get<std::string>();

  std::ifstream in(input);
  if (!in) throw scireward::engine::InputError("cannot open: " + input);
  std::ostringstream out;
  std::string line;
  std::size_t line_no = 0, example_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw scireward::engine::InputError(input + " line " + std::to_string(line_no) + ": " +
                                          e.what());
    }
    std::string example_id = j.value("example_id", std::to_string(example_index));
    scireward::curation::SolveStats stats;
    if (j.contains("flags")) {
      std::size_t hits = 0;
      for (const auto& flag : j["flags"]) {
        bool f = flag.get<bool>();
        stats.flags.push_back(f);
        if (f) ++hits;
      }
      if (stats.flags.empty()) {
        throw scireward::engine::InputError(input + " line " + std::to_string(line_no) +
                                            ": empty flags");
      }
      stats.p_hat = static_cast<double>(hits) / static_cast<double>(stats.flags.size());
    } else {
      // Mock rollouts: the generator answers correctly with probability
      // p_mock, judged by exact match; seeds differ per example and rollout.
      double p_mock = j.value("p_mock", 0.5);
      std::string answer = j.value("answer", "answer");
      scireward::curation::SamplerConfig local = sampler;
      local.seed = seed + example_index * 1000003ULL;
      auto generator = [&](const std::string&, double, std::uint64_t rollout_seed)
          -> std::optional<std::string> {
        std::mt19937_64 rng(rollout_seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        return unit(rng) < p_mock ? answer : "wrong";
      };
      auto judge = [&](const std::string& expected, const std::string& response) {
        return response == expected;
      };
      stats = scireward::curation::solve_rate(generator, judge, answer, fc, local);
    }
    bool retained = stats.p_hat > fc.lo && stats.p_hat < fc.hi;
    ordered_json record;
    record["task_id"] = task_id;
    record["example_id"] = example_id;
    record["p_hat"] = stats.p_hat;
    record["retained"] = retained;
    out << record.dump() << "\n";
    ++example_index;
  }
  scireward::engine::atomic_write(out_path, out.str());
  return kExitOk;
}

int cmd_curate_sample(const json& cfg, const std::string& out_path, std::uint64_t seed) {
  std::size_t k = cfg.value("k", 1000u);
  std::string input = cfg.at("input").get<std::string>();
  std::ifstream in(input);
  if (!in) throw scireward::engine::InputError("cannot open: " + input);
  std::set<std::string> filtered, all;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw scireward::engine::InputError(input + " line " + std::to_string(line_no) + ": " +
                                          e.what());
    }
    std::string id = j.at("example_id").get<std::string>();
    all.insert(id);
    if (j.value("retained", false)) filtered.insert(id);
  }
  std::mt19937_64 rng(seed);
  auto result = scireward::curation::sample_pool(filtered, all, k, rng);
  if (result.pool_short) {
    std::cerr << "warning: pool of " << all.size() << " is smaller than k=" << k
              << "; returning everything\n";
  }
  std::ostringstream out;
  for (const auto& id : result.items) {
    ordered_json record;
    record["example_id"] = id;
    out << record.dump() << "\n";
  }
  scireward::engine::atomic_write(out_path, out.str());
  return kExitOk;
}

// --- simulate-dapo -------------------------------------------------------------

int cmd_simulate_dapo(const json& cfg, const std::string& out_path, std::size_t steps,
                      std::uint64_t seed) {
  scireward::dapo::SimTask task;
  const json& task_cfg = cfg.at("task");
  task.prompt = task_cfg.value("prompt", "choose");
  task.answer = task_cfg.at("answer").get<std::string>();
  for (const auto& entry : task_cfg.at("vocabulary")) {
    task.vocabulary.push_back(entry.get<std::string>());
  }

  scireward::dapo::SimConfig sim;
  sim.group_size = cfg.value("group_size", 8u);
  sim.groups_per_step = cfg.value("groups_per_step", 4u);
  sim.learning_rate = cfg.value("learning_rate", 0.5);
  sim.dapo.eps_low = cfg.value("eps_low", 0.2);
  sim.dapo.eps_high = cfg.value("eps_high", 0.28);

  scireward::rewards::TaskSpec spec;
  spec.id = cfg.value("task_id", "sim");
  spec.metric_id = cfg.value("metric_id", "exact_match");
  spec.reward_group = scireward::rewards::RewardGroup::matching;
  spec.equivalence_threshold = cfg.value("theta", 0.99);

  scireward::toolbridge::VerifierRegistry tools;
  auto reward_fn = [&](const std::string& answer, const std::string& response) {
    scireward::rewards::PredictionRecord rec;
    rec.task_id = spec.id;
    rec.prediction = response;
    rec.references = {answer};
    return scireward::rewards::compute_reward(spec, rec, tools).value;
  };
  auto equivalent = [&](const std::string& answer, const std::string& response) {
    return scireward::rewards::is_equivalent(answer, response, spec, tools);
  };

  std::vector<double> logits(task.vocabulary.size(), 0.0);
  std::mt19937_64 rng(seed);
  auto result = scireward::dapo::simulate_training(task, logits, steps, sim, reward_fn,
                                                   equivalent, rng);
  std::ostringstream out;
  for (const auto& entry : result.trace) {
    ordered_json record;
    record["step"] = entry.step;
    record["mean_soft_reward"] = entry.mean_soft_reward;
    record["fraction_clipped"] = entry.fraction_clipped;
    record["kept_groups"] = entry.kept_groups;
    out << record.dump() << "\n";
  }
  scireward::engine::atomic_write(out_path, out.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scireward: scientific reward and evaluation engine"};
  app.require_subcommand(1);

  std::string predictions_path, registry_path, out_path, config_path;
  std::string oxidation_path = "data/oxidation_states.tsv";
  unsigned jobs = 1;
  bool strict = false;
  std::uint64_t seed = 0;
  std::size_t steps = 200;

  auto* evaluate = app.add_subcommand("evaluate", "score a prediction file against the registry");
  evaluate->add_option("--predictions", predictions_path, "JSONL prediction records")->required();
  evaluate->add_option("--registry", registry_path, "task registry JSON")->required();
  evaluate->add_option("--out", out_path, "report output path")->required();
  evaluate->add_option("--oxidation-table", oxidation_path, "oxidation-state data file");
  evaluate->add_option("--jobs", jobs, "concurrent task evaluations");
  evaluate->add_flag("--strict", strict, "treat degraded tool fallbacks as errors");

  auto* curate = app.add_subcommand("curate", "run the data curation pipeline");
  curate->require_subcommand(1);
  auto* coldstart = curate->add_subcommand("coldstart", "budgeted correct-only CoT harvest");
  auto* filter = curate->add_subcommand("filter", "solve rates + mid-difficulty filter");
  auto* sample = curate->add_subcommand("sample", "pool sampling with top-up");
  for (auto* sub : {coldstart, filter, sample}) {
    sub->add_option("--config", config_path, "JSON config")->required();
    sub->add_option("--out", out_path, "output path")->required();
    sub->add_option("--seed", seed, "RNG seed");
  }

  auto* simulate = app.add_subcommand("simulate-dapo", "tabular-policy training simulator");
  simulate->add_option("--config", config_path, "JSON config")->required();
  simulate->add_option("--out", out_path, "trace output path")->required();
  simulate->add_option("--steps", steps, "optimization steps");
  simulate->add_option("--seed", seed, "RNG seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (evaluate->parsed()) {
      return cmd_evaluate(predictions_path, registry_path, out_path, oxidation_path,
                          evaluate->count("--oxidation-table") > 0, jobs, strict);
    }
    if (coldstart->parsed()) {
      return cmd_curate_coldstart(load_json_file(config_path), out_path, seed);
    }
    if (filter->parsed()) {
      return cmd_curate_filter(load_json_file(config_path), out_path, seed);
    }
    if (sample->parsed()) {
      return cmd_curate_sample(load_json_file(config_path), out_path, seed);
    }
    if (simulate->parsed()) {
      return cmd_simulate_dapo(load_json_file(config_path), out_path, steps, seed);
    }
  } catch (const scireward::rewards::RewardError& e) {
    std::cerr << e.what() << "\n";
    return e.code() == scireward::rewards::RewardError::Code::unknown_task ? kExitUnknownTask
                                                                           : kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitBadInput;
  }
  return kExitOk;
}
