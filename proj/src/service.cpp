#include "cvrank/service.hpp"

#include <chrono>
#include <charconv>

#include <fmt/format.h>
#include <httplib.h>

#include "cvrank/error.hpp"
#include "cvrank/report.hpp"

namespace cvrank {

namespace {

using Response = TriageService::Response;

Response error_response(int status, std::string message) {
  return {status, {{"error", std::move(message)}}};
}

Timestamp system_now() {
  const auto now = std::chrono::system_clock::now();
  return Timestamp(std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count());
}

}  // namespace

std::string_view job_state_name(JobState state) noexcept {
  switch (state) {
    case JobState::Queued: return "QUEUED";
    case JobState::Running: return "RUNNING";
    case JobState::Done: return "DONE";
    case JobState::Failed: return "FAILED";
  }
  return "UNKNOWN";
}

std::string_view verdict_name(Verdict verdict) noexcept {
  switch (verdict) {
    case Verdict::Pending: return "PENDING";
    case Verdict::Liked: return "LIKED";
    case Verdict::Disliked: return "DISLIKED";
  }
  return "UNKNOWN";
}

TriageService::TriageService(PreferenceStore& store, Options options) : store_(store), options_(std::move(options)) {
  if (!options_.clock) options_.clock = system_now;
  options_.config.validate();
}

TriageService::~TriageService() {
  if (worker_.joinable()) worker_.join();
}

Response TriageService::submit_job(std::string_view body, std::string_view content_type) {
  std::vector<FenRecord> candidates;
  std::uint64_t seed = options_.config.seed;
  try {
    if (body.find_first_not_of(" \t\r\n") == std::string_view::npos) {
      return error_response(422, "request body is empty");
    }
    if (content_type.starts_with("application/json")) {
      const auto j = nlohmann::json::parse(body);
      if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
      if (j.contains("candidates")) {
        std::string lines;
        for (const auto& f : j.at("candidates")) lines += f.get<std::string>() + "\n";
        candidates = parse_candidates(lines);
      } else if (j.contains("pgn")) {
        candidates = parse_candidates(j.at("pgn").get<std::string>());
      } else {
        return error_response(422, "expected \"candidates\" or \"pgn\"");
      }
    } else {
      candidates = parse_candidates(body);
    }
  } catch (const nlohmann::json::exception& e) {
    return error_response(422, fmt::format("bad JSON: {}", e.what()));
  } catch (const Error& e) {
    return error_response(422, e.what());
  }

  std::shared_ptr<Job> job;
  {
    std::lock_guard lock(mutex_);
    if (busy_) return error_response(409, "a ranking job is already running");
    job = std::make_shared<Job>();
    job->id = fmt::format("job-{}", next_job_++);
    job->seed = seed;
    job->created_at = options_.clock();
    job->total = candidates.size();
    job->candidates = std::move(candidates);
    jobs_[job->id] = job;
    busy_ = true;
  }
  if (worker_.joinable()) worker_.join();
  worker_ = std::jthread([this, job] { run_job(job); });

  std::lock_guard lock(mutex_);
  return {202, job_json(*job)};
}

void TriageService::run_job(const std::shared_ptr<Job>& job) {
  {
    std::lock_guard lock(mutex_);
    job->state = JobState::Running;
  }
  try {
    // Snapshots taken now include every acknowledged verdict.
    PreferenceDb liked = store_.load(Label::Liked);
    PreferenceDb disliked = store_.load(Label::Disliked);
    reconcile(liked, disliked);
    RankEngine engine(build_cv_sequence(liked), build_cv_sequence(disliked));

    CycleConfig config = options_.config;
    config.seed = job->seed;
    RankOptions rank = options_.rank;
    rank.progress = [this, job](std::size_t done, std::size_t) {
      std::lock_guard lock(mutex_);
      job->completed = std::max(job->completed, done);
    };
    auto scores = engine.score_all(job->candidates, config, rank);
    sort_by_arp(scores);

    std::lock_guard lock(mutex_);
    job->result = scores;
    job->completed = job->total;
    job->state = JobState::Done;
    queue_.clear();
    for (std::size_t i = 0; i < scores.size(); ++i) queue_.push_back(QueueEntry{i + 1, scores[i], Verdict::Pending});
    have_queue_ = true;
  } catch (const std::exception& e) {
    std::lock_guard lock(mutex_);
    job->state = JobState::Failed;
    job->error = e.what();
  }
  std::lock_guard lock(mutex_);
  busy_ = false;
  idle_.notify_all();
}

void TriageService::wait_idle() {
  std::unique_lock lock(mutex_);
  idle_.wait(lock, [this] { return !busy_; });
}

nlohmann::json TriageService::job_json(const Job& job) const {
  const double fraction =
      job.total == 0 ? 1.0 : static_cast<double>(job.completed) / static_cast<double>(job.total);
  nlohmann::json j = {
      {"id", job.id},
      {"state", job_state_name(job.state)},
      {"seed", job.seed},
      {"created_at", job.created_at.to_string()},
      {"progress", {{"completed", job.completed}, {"total", job.total}, {"fraction", fraction}}},
  };
  if (job.state == JobState::Failed) j["error"] = job.error;
  if (job.state == JobState::Done) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < job.result.size(); ++i) {
      rows.push_back({{"rank", i + 1}, {"fen", job.result[i].fen.text()}, {"arp", job.result[i].arp}});
    }
    j["result"] = std::move(rows);
  }
  return j;
}

nlohmann::json TriageService::entry_json(const QueueEntry& e) {
  nlohmann::json rps = nlohmann::json::array();
  for (const auto& c : e.score.cycles) rps.push_back(c.rp);
  return {{"id", e.rank},           {"rank", e.rank}, {"fen", e.score.fen.text()},
          {"arp", e.score.arp},     {"rps", rps},     {"verdict", verdict_name(e.verdict)}};
}

Response TriageService::job_status(std::string_view id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(std::string(id));
  if (it == jobs_.end()) return error_response(404, fmt::format("no job {}", id));
  return {200, job_json(*it->second)};
}

Response TriageService::queue() const {
  std::lock_guard lock(mutex_);
  if (!have_queue_) return error_response(404, "no ranked collection yet");
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : queue_) entries.push_back(entry_json(e));
  return {200, {{"entries", std::move(entries)}}};
}

Response TriageService::verdict(std::string_view body) {
  FenRecord fen;
  Label label = Label::Liked;
  try {
    const auto j = nlohmann::json::parse(body);
    fen = parse_fen(j.at("fen").get<std::string>());
    label = parse_label(j.at("verdict").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    return error_response(422, fmt::format("bad verdict request: {}", e.what()));
  } catch (const Error& e) {
    return error_response(422, e.what());
  }

  std::lock_guard serial(verdict_mutex_);
  {
    std::lock_guard lock(mutex_);
    const auto it = std::find_if(queue_.begin(), queue_.end(), [&](const QueueEntry& e) { return e.score.fen == fen; });
    if (it == queue_.end()) return error_response(404, fmt::format("{} is not in the queue", fen.text()));
    if (it->verdict != Verdict::Pending) {
      return error_response(409, fmt::format("verdict already recorded as {}", verdict_name(it->verdict)));
    }
  }
  try {
    store_.record_verdict(label, fen, options_.clock());
  } catch (const Error& e) {
    if (e.code() == Errc::DuplicateFen) return error_response(409, e.what());
    return error_response(500, e.what());
  }
  std::lock_guard lock(mutex_);
  const auto it = std::find_if(queue_.begin(), queue_.end(), [&](const QueueEntry& e) { return e.score.fen == fen; });
  if (it == queue_.end()) return error_response(404, "queue was replaced while recording the verdict");
  it->verdict = label == Label::Liked ? Verdict::Liked : Verdict::Disliked;
  return {200, entry_json(*it)};
}

Response TriageService::position(std::string_view id) const {
  std::size_t rank = 0;
  auto [ptr, ec] = std::from_chars(id.data(), id.data() + id.size(), rank);
  std::lock_guard lock(mutex_);
  if (ec != std::errc{} || ptr != id.data() + id.size() || rank == 0 || rank > queue_.size()) {
    return error_response(404, fmt::format("no position {}", id));
  }
  const QueueEntry& e = queue_[rank - 1];
  nlohmann::json j = board_json(e.score.fen);
  j["id"] = e.rank;
  j["arp"] = e.score.arp;
  j["verdict"] = verdict_name(e.verdict);
  return {200, std::move(j)};
}

void TriageService::mount(httplib::Server& server) {
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Post("/v1/jobs", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, submit_job(req.body, req.get_header_value("Content-Type")));
  });
  server.Get(R"(/v1/jobs/([^/]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, job_status(req.matches[1].str()));
  });
  server.Get("/v1/queue", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, queue()); });
  server.Post("/v1/verdict", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, verdict(req.body));
  });
  server.Get(R"(/v1/positions/([^/]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, position(req.matches[1].str()));
  });
}

}  // namespace cvrank
