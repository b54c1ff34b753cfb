#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <unistd.h>

#include "cvrank/service.hpp"
#include "cvrank/synthetic.hpp"

using namespace cvrank;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  fs::path root;
  std::unique_ptr<PreferenceStore> store;
  std::unique_ptr<TriageService> service;
  httplib::Server server;
  std::thread listener;
  int port = 0;
  std::int64_t now = 1'700'000'000;
  std::vector<FenRecord> candidates;

  Fixture() {
    static int counter = 0;
    root = fs::temp_directory_path() / ("cvrank-svc-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(root);
    SyntheticParams sp;
    sp.seed = 6;
    sp.liked_train = 120;
    sp.disliked_train = 120;
    const SyntheticCorpus corpus = make_synthetic(sp);
    store = std::make_unique<PreferenceStore>(root);
    store->ingest_text(to_pgn(corpus.liked), Label::Liked);
    store->ingest_text(to_pgn(corpus.disliked), Label::Disliked);
    candidates = synthetic_candidates(sp, Label::Liked, 3, 1);
    for (const auto& f : synthetic_candidates(sp, Label::Disliked, 3, 1)) candidates.push_back(f);

    TriageService::Options opts;
    opts.config.seed = 5;
    opts.rank.workers = 2;
    opts.clock = [this] { return Timestamp(now++); };
    service = std::make_unique<TriageService>(*store, opts);
    service->mount(server);
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    listener = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~Fixture() {
    server.stop();
    listener.join();
    service.reset();
    fs::remove_all(root);
  }

  httplib::Client client() const { return httplib::Client("127.0.0.1", port); }

  json candidate_body() const {
    json fens = json::array();
    for (const auto& f : candidates) fens.push_back(f.text());
    return {{"candidates", fens}, {"seed", 11}};
  }

  // Submits and polls until the job leaves QUEUED/RUNNING.
  json run_job() {
    auto c = client();
    auto res = c.Post("/v1/jobs", candidate_body().dump(), "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 202);
    const std::string id = json::parse(res->body).at("id");
    for (int i = 0; i < 2000; ++i) {
      auto st = c.Get("/v1/jobs/" + id);
      REQUIRE(st);
      const json j = json::parse(st->body);
      if (j.at("state") == "DONE" || j.at("state") == "FAILED") return j;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    FAIL("job did not finish");
    return {};
  }
};

}  // namespace

TEST_CASE("job lifecycle over HTTP") {
  Fixture f;
  auto c = f.client();
  auto empty_queue = c.Get("/v1/queue");
  REQUIRE(empty_queue);
  CHECK(empty_queue->status == 404);

  const json done = f.run_job();
  CHECK(done.at("state") == "DONE");
  CHECK(done.at("progress").at("completed") == f.candidates.size());
  CHECK(done.at("progress").at("fraction") == 1.0);
  CHECK(done.at("result").size() == f.candidates.size());

  auto q = c.Get("/v1/queue");
  REQUIRE(q);
  CHECK(q->status == 200);
  const json entries = json::parse(q->body).at("entries");
  REQUIRE(entries.size() == f.candidates.size());
  for (std::size_t i = 1; i < entries.size(); ++i) {
    CHECK(entries[i].at("arp").get<double>() <= entries[i - 1].at("arp").get<double>());
  }
  CHECK(entries[0].at("verdict") == "PENDING");
  CHECK(entries[0].at("rps").size() == 3);

  auto pos = c.Get("/v1/positions/1");
  REQUIRE(pos);
  CHECK(pos->status == 200);
  const json board = json::parse(pos->body);
  CHECK(board.at("fen") == entries[0].at("fen"));
  CHECK(board.at("squares").size() == 64);
  CHECK(c.Get("/v1/positions/0")->status == 404);
  CHECK(c.Get("/v1/positions/99")->status == 404);
  CHECK(c.Get("/v1/positions/x")->status == 404);
  CHECK(c.Get("/v1/jobs/job-999")->status == 404);
}

TEST_CASE("verdicts grow the store") {
  Fixture f;
  f.run_job();
  auto c = f.client();
  const json entries = json::parse(c.Get("/v1/queue")->body).at("entries");
  const std::string fen = entries[0].at("fen");
  const std::size_t before = f.store->load(Label::Liked).size();

  auto res = c.Post("/v1/verdict", json{{"fen", fen}, {"verdict", "liked"}}.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body).at("verdict") == "LIKED");

  const PreferenceDb liked = f.store->load(Label::Liked);
  CHECK(liked.size() == before + 1);
  CHECK(liked.records.back().fen.text() == fen);
  CHECK(liked.records.back().generated_at.known());

  CHECK(c.Post("/v1/verdict", json{{"fen", fen}, {"verdict", "disliked"}}.dump(), "application/json")->status ==
        409);
  CHECK(c.Post("/v1/verdict", json{{"fen", fen}, {"verdict", "meh"}}.dump(), "application/json")->status == 422);
  CHECK(c.Post("/v1/verdict", "{not json", "application/json")->status == 422);
  const std::string stranger = "8/8/8/8/8/8/8/K6k w - - 0 1";
  CHECK(c.Post("/v1/verdict", json{{"fen", stranger}, {"verdict", "liked"}}.dump(), "application/json")->status ==
        404);

  auto q = json::parse(c.Get("/v1/queue")->body).at("entries");
  CHECK(q[0].at("verdict") == "LIKED");
  CHECK(q[1].at("verdict") == "PENDING");

  // A rerank sees the new verdict and produces a fresh pending queue.
  const json again = f.run_job();
  CHECK(again.at("state") == "DONE");
  auto q2 = json::parse(c.Get("/v1/queue")->body).at("entries");
  for (const auto& e : q2) CHECK(e.at("verdict") == "PENDING");
}

TEST_CASE("bad job submissions") {
  Fixture f;
  auto c = f.client();
  CHECK(c.Post("/v1/jobs", "", "text/plain")->status == 422);
  CHECK(c.Post("/v1/jobs", "{", "application/json")->status == 422);
  CHECK(c.Post("/v1/jobs", json{{"other", 1}}.dump(), "application/json")->status == 422);
  CHECK(c.Post("/v1/jobs", "not a fen\n", "text/plain")->status == 422);

  // Plain-text FEN lines are accepted too.
  std::string lines;
  for (const auto& fen : f.candidates) lines += fen.text() + "\n";
  auto res = c.Post("/v1/jobs", lines, "text/plain");
  REQUIRE(res);
  CHECK(res->status == 202);
  f.service->wait_idle();
}

TEST_CASE("one job at a time") {
  Fixture f;
  std::vector<FenRecord> many;
  for (int i = 0; i < 40; ++i) {
    for (const auto& fen : f.candidates) many.push_back(fen);
  }
  std::string lines;
  for (const auto& fen : many) lines += fen.text() + "\n";
  const auto first = f.service->submit_job(lines, "text/plain");
  CHECK(first.status == 202);
  const auto second = f.service->submit_job(lines, "text/plain");
  // The first job may already be done on a fast machine.
  CHECK((second.status == 409 || second.status == 202));
  f.service->wait_idle();
  const auto status = f.service->job_status(first.body.at("id").get<std::string>());
  CHECK(status.body.at("state") == "DONE");
}

TEST_CASE("failed jobs report the error") {
  const fs::path root = fs::temp_directory_path() / ("cvrank-svc-empty-" + std::to_string(::getpid()));
  fs::remove_all(root);
  PreferenceStore store(root);
  TriageService service(store, {});
  const auto r = service.submit_job("8/8/8/8/8/8/8/K6k w - - 0 1\n", "text/plain");
  REQUIRE(r.status == 202);
  service.wait_idle();
  const auto st = service.job_status(r.body.at("id").get<std::string>());
  CHECK(st.body.at("state") == "FAILED");
  CHECK(st.body.at("error").get<std::string>().find("FileNotFound") != std::string::npos);
  CHECK(service.queue().status == 404);
  fs::remove_all(root);
}
