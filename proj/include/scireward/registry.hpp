#pragma once

// Task registry: one structured-config document mapping task ids to specs.
// Every report embeds the registry fingerprint so results stay traceable to
// the exact configuration that produced them.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "scireward/rewards.hpp"

namespace scireward::registry {

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

inline std::string fingerprint_hex(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t hash = fnv1a64(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[hash & 0xF];
    hash >>= 4;
  }
  return out;
}

namespace detail {

inline rewards::TaskFamily parse_family(const std::string& name) {
  if (name == "translation") return rewards::TaskFamily::translation;
  if (name == "extraction_qa") return rewards::TaskFamily::extraction_qa;
  if (name == "regression") return rewards::TaskFamily::regression;
  if (name == "classification") return rewards::TaskFamily::classification;
  if (name == "generation_design") return rewards::TaskFamily::generation_design;
  throw std::runtime_error("registry: unknown task family '" + name + "'");
}

inline rewards::TaskMode parse_mode(const std::string& name) {
  if (name == "instant") return rewards::TaskMode::instant;
  if (name == "thinking") return rewards::TaskMode::thinking;
  throw std::runtime_error("registry: unknown task mode '" + name + "'");
}

inline rewards::RewardGroup parse_group(const std::string& name) {
  if (name == "distance") return rewards::RewardGroup::distance;
  if (name == "matching") return rewards::RewardGroup::matching;
  if (name == "tool_verified") return rewards::RewardGroup::tool_verified;
  throw std::runtime_error("registry: unknown reward group '" + name + "'");
}

inline rewards::Calibration parse_calibration(const nlohmann::json& j) {
  rewards::Calibration c;
  if (j.is_null()) return c;
  std::string family = j.value("family", "identity_clamp");
  if (family == "identity_clamp") c.family = rewards::Calibration::Family::identity_clamp;
  else if (family == "exp_decay") c.family = rewards::Calibration::Family::exp_decay;
  else if (family == "rational_decay") c.family = rewards::Calibration::Family::rational_decay;
  else if (family == "affine_clamp") c.family = rewards::Calibration::Family::affine_clamp;
  else throw std::runtime_error("registry: unknown calibration family '" + family + "'");
  std::string direction = j.value("direction", "higher_better");
  if (direction == "higher_better") c.direction = rewards::Calibration::Direction::higher_better;
  else if (direction == "lower_better") c.direction = rewards::Calibration::Direction::lower_better;
  else throw std::runtime_error("registry: unknown direction '" + direction + "'");
  c.tau = j.value("tau", 1.0);
  c.lo = j.value("lo", 0.0);
  c.hi = j.value("hi", 1.0);
  if (c.tau <= 0.0) throw std::runtime_error("registry: calibration tau must be positive");
  if (c.family == rewards::Calibration::Family::affine_clamp && !(c.lo < c.hi)) {
    throw std::runtime_error("registry: affine_clamp needs lo < hi");
  }
  return c;
}

inline rewards::TaskSpec parse_task(const nlohmann::json& j) {
  rewards::TaskSpec spec;
  spec.id = j.at("id").get<std::string>();
  spec.family = parse_family(j.at("family").get<std::string>());
  spec.mode = parse_mode(j.value("mode", "instant"));
  spec.reward_group = parse_group(j.at("reward_group").get<std::string>());
  spec.metric_id = j.at("metric_id").get<std::string>();
  spec.calibration = parse_calibration(j.value("calibration", nlohmann::json()));
  spec.equivalence_threshold = j.value("theta", 0.99);
  if (j.contains("payload_kind")) {
    auto kind = seqtag::kind_from_name(j["payload_kind"].get<std::string>());
    if (!kind) {
      throw std::runtime_error("registry: unknown payload kind for task " + spec.id);
    }
    spec.payload_kind = *kind;
  }
  if (j.contains("params")) {
    for (auto it = j["params"].begin(); it != j["params"].end(); ++it) {
      spec.params[it.key()] = it.value().get<double>();
    }
  }
  if (spec.reward_group != rewards::RewardGroup::tool_verified &&
      !rewards::is_registered_metric(spec.metric_id)) {
    throw std::runtime_error("registry: unknown metric '" + spec.metric_id + "' for task " +
                             spec.id);
  }
  return spec;
}

}  // namespace detail

class TaskRegistry {
 public:
  const rewards::TaskSpec* find(const std::string& task_id) const {
    auto it = tasks_.find(task_id);
    return it == tasks_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, rewards::TaskSpec>& tasks() const { return tasks_; }
  const std::string& fingerprint() const { return fingerprint_; }

  void add(rewards::TaskSpec spec) {
    std::string id = spec.id;
    if (!tasks_.emplace(std::move(id), std::move(spec)).second) {
      throw std::runtime_error("registry: duplicate task id");
    }
  }

  static TaskRegistry from_json_text(const std::string& text) {
    TaskRegistry registry;
    registry.fingerprint_ = fingerprint_hex(text);
    nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_object() || !j.contains("tasks") || !j["tasks"].is_array()) {
      throw std::runtime_error("registry: expected an object with a 'tasks' array");
    }
    for (const auto& entry : j["tasks"]) {
      registry.add(detail::parse_task(entry));
    }
    return registry;
  }

  static TaskRegistry load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open registry: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
  }

 private:
  std::map<std::string, rewards::TaskSpec> tasks_;
  std::string fingerprint_;
};

}  // namespace scireward::registry
