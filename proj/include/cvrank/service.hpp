#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvrank/engine.hpp"
#include "cvrank/store.hpp"

namespace httplib {
class Server;
}

namespace cvrank {

enum class JobState { Queued, Running, Done, Failed };
std::string_view job_state_name(JobState state) noexcept;

enum class Verdict { Pending, Liked, Disliked };
std::string_view verdict_name(Verdict verdict) noexcept;

struct QueueEntry {
  std::size_t rank = 0;  // 1-based; also the position id
  CandidateScore score;
  Verdict verdict = Verdict::Pending;
};

/// Local triage loop over one preference store: background ranking jobs,
/// the latest ranked queue, and verdicts that grow the databases. Handler
/// methods return (status, JSON body) and are what the HTTP routes call.
class TriageService {
 public:
  struct Options {
    CycleConfig config;
    RankOptions rank;
    /// Verdict and job timestamps; defaults to the system clock.
    std::function<Timestamp()> clock;
  };

  struct Response {
    int status = 200;
    nlohmann::json body;
  };

  TriageService(PreferenceStore& store, Options options);
  ~TriageService();

  TriageService(const TriageService&) = delete;
  TriageService& operator=(const TriageService&) = delete;

  /// POST /v1/jobs. Body: JSON {"candidates": [...]} or {"pgn": "..."} with
  /// optional "seed", or plain text (FEN lines or PGN).
  Response submit_job(std::string_view body, std::string_view content_type);
  /// GET /v1/jobs/{id}
  Response job_status(std::string_view id) const;
  /// GET /v1/queue
  Response queue() const;
  /// POST /v1/verdict. Body: {"fen": "...", "verdict": "liked" | "disliked"}.
  Response verdict(std::string_view body);
  /// GET /v1/positions/{id}
  Response position(std::string_view id) const;

  /// Registers the /v1 routes.
  void mount(httplib::Server& server);

  /// Blocks until no job is queued or running.
  void wait_idle();

 private:
  struct Job {
    std::string id;
    std::uint64_t seed = 0;
    Timestamp created_at;
    std::vector<FenRecord> candidates;
    JobState state = JobState::Queued;
    std::size_t completed = 0;
    std::size_t total = 0;
    std::string error;
    std::vector<CandidateScore> result;
  };

  void run_job(const std::shared_ptr<Job>& job);
  nlohmann::json job_json(const Job& job) const;
  static nlohmann::json entry_json(const QueueEntry& entry);

  PreferenceStore& store_;
  Options options_;

  mutable std::mutex mutex_;
  std::condition_variable idle_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::uint64_t next_job_ = 1;
  bool busy_ = false;
  bool have_queue_ = false;
  std::vector<QueueEntry> queue_;
  std::mutex verdict_mutex_;
  std::jthread worker_;
};

}  // namespace cvrank
