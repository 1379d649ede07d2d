#pragma once

// External-verifier protocol: one JSON request line in, one JSON response
// line out, over a child process's standard streams. Desk-scale fallbacks
// (the Nussinov pairing proxy) live here too.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace scireward::toolbridge {

struct VerifierRequest {
  std::string kind;
  std::map<std::string, std::string> payload;
  std::chrono::milliseconds timeout{5000};
};

struct VerifierResponse {
  bool ok = false;
  std::optional<double> score;
  std::string detail;
};

class ToolError : public std::runtime_error {
 public:
  enum class Code { timeout, protocol_violation, tool_crash, not_registered };

  ToolError(Code code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

namespace detail {

inline std::string encode_request(const VerifierRequest& req) {
  nlohmann::ordered_json j;
  j["kind"] = req.kind;
  j["payload"] = nlohmann::ordered_json::object();
  for (const auto& [key, value] : req.payload) j["payload"][key] = value;
  return j.dump() + "\n";
}

inline VerifierResponse decode_response(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw ToolError(ToolError::Code::protocol_violation, "response is not a JSON record: " + line);
  }
  if (!j.is_object() || !j.contains("ok") || !j["ok"].is_boolean()) {
    throw ToolError(ToolError::Code::protocol_violation, "response lacks boolean 'ok'");
  }
  VerifierResponse resp;
  resp.ok = j["ok"].get<bool>();
  if (j.contains("score") && j["score"].is_number()) resp.score = j["score"].get<double>();
  if (j.contains("detail") && j["detail"].is_string()) resp.detail = j["detail"].get<std::string>();
  if (resp.ok && (!resp.score || !std::isfinite(*resp.score))) {
    throw ToolError(ToolError::Code::protocol_violation, "ok response without finite score");
  }
  return resp;
}

}  // namespace detail

/// One spawned verifier process. At most one request is in flight at a time;
/// the registry serializes callers through a per-instance mutex.
class ProcessVerifier {
 public:
  explicit ProcessVerifier(std::vector<std::string> argv) : argv_(std::move(argv)) {
    if (argv_.empty()) throw std::invalid_argument("ProcessVerifier: empty argv");
  }

  ~ProcessVerifier() { shutdown(); }

  ProcessVerifier(const ProcessVerifier&) = delete;
  ProcessVerifier& operator=(const ProcessVerifier&) = delete;

  VerifierResponse call(const VerifierRequest& req) {
    std::lock_guard<std::mutex> lock(mutex_);
    ensure_running();
    std::string request_line = detail::encode_request(req);
    if (!write_all(request_line)) {
      shutdown();
      throw ToolError(ToolError::Code::tool_crash, "tool closed its input");
    }
    std::string line;
    ReadStatus status = read_line(line, req.timeout);
    if (status == ReadStatus::timeout) {
      shutdown();  // the instance is out of sync; a fresh process is safer
      throw ToolError(ToolError::Code::timeout, "tool did not answer within timeout");
    }
    if (status == ReadStatus::eof) {
      shutdown();
      throw ToolError(ToolError::Code::tool_crash, "tool exited before answering");
    }
    return detail::decode_response(line);
  }

 private:
  enum class ReadStatus { ok, timeout, eof };

  void ensure_running() {
    if (pid_ > 0) return;
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) {
      throw ToolError(ToolError::Code::tool_crash, "pipe() failed");
    }
    pid_t pid = fork();
    if (pid < 0) throw ToolError(ToolError::Code::tool_crash, "fork() failed");
    if (pid == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      std::vector<char*> argv;
      argv.reserve(argv_.size() + 1);
      for (auto& arg : argv_) argv.push_back(arg.data());
      argv.push_back(nullptr);
      execvp(argv[0], argv.data());
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    pid_ = pid;
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    buffer_.clear();
  }

  bool write_all(std::string_view data) {
    std::size_t written = 0;
    while (written < data.size()) {
      ssize_t n = ::write(write_fd_, data.data() + written, data.size() - written);
      if (n <= 0) return false;
      written += static_cast<std::size_t>(n);
    }
    return true;
  }

  ReadStatus read_line(std::string& line, std::chrono::milliseconds timeout) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      std::size_t newline = buffer_.find('\n');
      if (newline != std::string::npos) {
        line = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        return ReadStatus::ok;
      }
      auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (remaining.count() <= 0) return ReadStatus::timeout;
      pollfd pfd{read_fd_, POLLIN, 0};
      int ready = poll(&pfd, 1, static_cast<int>(remaining.count()));
      if (ready == 0) return ReadStatus::timeout;
      if (ready < 0) return ReadStatus::eof;
      char chunk[4096];
      ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
      if (n <= 0) return ReadStatus::eof;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void shutdown() {
    if (pid_ > 0) {
      close(write_fd_);
      close(read_fd_);
      kill(pid_, SIGTERM);
      int status = 0;
      waitpid(pid_, &status, 0);
      pid_ = -1;
      write_fd_ = read_fd_ = -1;
    }
  }

  std::vector<std::string> argv_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string buffer_;
  std::mutex mutex_;
};

/// A fixed-size pool of identical tool processes. Each instance handles one
/// request at a time; callers are spread round-robin across instances.
class ProcessVerifierPool {
 public:
  ProcessVerifierPool(std::vector<std::string> argv, std::size_t pool_size) {
    if (pool_size == 0) pool_size = 1;
    for (std::size_t i = 0; i < pool_size; ++i) {
      instances_.push_back(std::make_unique<ProcessVerifier>(argv));
    }
  }

  VerifierResponse call(const VerifierRequest& req) {
    std::size_t index = next_.fetch_add(1, std::memory_order_relaxed) % instances_.size();
    return instances_[index]->call(req);
  }

 private:
  std::vector<std::unique_ptr<ProcessVerifier>> instances_;
  std::atomic<std::size_t> next_{0};
};

/// Named verifiers, either spawned processes or in-process functions (used
/// for bundled fallbacks and hermetic tests).
class VerifierRegistry {
 public:
  using Fn = std::function<VerifierResponse(const VerifierRequest&)>;

  void register_process(const std::string& kind, std::vector<std::string> argv,
                        std::size_t pool_size = 1) {
    processes_[kind] = std::make_shared<ProcessVerifierPool>(std::move(argv), pool_size);
  }

  void register_function(const std::string& kind, Fn fn) { functions_[kind] = std::move(fn); }

  bool has(const std::string& kind) const {
    return processes_.count(kind) > 0 || functions_.count(kind) > 0;
  }

  VerifierResponse call(const VerifierRequest& req) const {
    if (auto it = processes_.find(req.kind); it != processes_.end()) {
      return it->second->call(req);
    }
    if (auto it = functions_.find(req.kind); it != functions_.end()) {
      return it->second(req);
    }
    throw ToolError(ToolError::Code::not_registered, "no verifier for kind '" + req.kind + "'");
  }

 private:
  std::map<std::string, std::shared_ptr<ProcessVerifierPool>> processes_;
  std::map<std::string, Fn> functions_;
};

inline VerifierResponse call_verifier(const VerifierRegistry& registry,
                                      const VerifierRequest& req) {
  return registry.call(req);
}

// ---------------------------------------------------------------------------
// Nussinov base-pair maximization (desk-scale MFE proxy)
// ---------------------------------------------------------------------------

class RnaAlphabetError : public std::invalid_argument {
 public:
  RnaAlphabetError(std::size_t position, char symbol)
      : std::invalid_argument("non-RNA symbol '" + std::string(1, symbol) + "' at position " +
                              std::to_string(position)),
        position_(position), symbol_(symbol) {}

  std::size_t position() const { return position_; }
  char symbol() const { return symbol_; }

 private:
  std::size_t position_;
  char symbol_;
};

namespace detail {

inline bool rna_pair(char a, char b) {
  return (a == 'A' && b == 'U') || (a == 'U' && b == 'A') || (a == 'G' && b == 'C') ||
         (a == 'C' && b == 'G') || (a == 'G' && b == 'U') || (a == 'U' && b == 'G');
}

}  // namespace detail

/// Maximum number of nested Watson-Crick/GU pairs with hairpin loops of at
/// least `min_loop` unpaired bases, by interval dynamic programming. This is
/// a structural proxy, not a thermodynamic MFE; callers must label scores
/// derived from it as such.
inline int nussinov_pairs(std::string_view rna, int min_loop = 3) {
  for (std::size_t i = 0; i < rna.size(); ++i) {
    char c = rna[i];
    if (c != 'A' && c != 'C' && c != 'G' && c != 'U' && c != 'N') {
      throw RnaAlphabetError(i, c);
    }
  }
  int n = static_cast<int>(rna.size());
  if (n == 0) return 0;
  std::vector<std::vector<int>> dp(n, std::vector<int>(n, 0));
  for (int span = 1; span < n; ++span) {
    for (int i = 0; i + span < n; ++i) {
      int j = i + span;
      int best = std::max(dp[i + 1][j], dp[i][j - 1]);
      if (j - i > min_loop && detail::rna_pair(rna[i], rna[j])) {
        best = std::max(best, (i + 1 <= j - 1 ? dp[i + 1][j - 1] : 0) + 1);
      }
      for (int k = i + 1; k < j; ++k) {
        best = std::max(best, dp[i][k] + dp[k + 1][j]);
      }
      dp[i][j] = best;
    }
  }
  return dp[0][n - 1];
}

/// Pseudo-energy used when softening pairing counts as a stand-in for real
/// folding energies: more pairs, lower energy.
inline double nussinov_pseudo_energy(std::string_view rna, int min_loop = 3) {
  return -static_cast<double>(nussinov_pairs(rna, min_loop));
}

}  // namespace scireward::toolbridge
