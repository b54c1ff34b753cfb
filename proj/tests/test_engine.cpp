#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <vector>

#include "cvrank/engine.hpp"
#include "cvrank/error.hpp"
#include "support/naive_engine.hpp"
#include "support/random_positions.hpp"

using namespace cvrank;
using testing_support::position_walk;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::Io;
}

CvSequence sequence(const std::vector<FenRecord>& fens, Label label) { return build_cv_sequence(fens, label); }

}  // namespace

TEST_CASE("arithmetic identities") {
  CHECK(rank_percentage(36, 14) == 72.0);
  const std::vector<double> rps = {72.0, 64.0, 50.0};
  CHECK(average_rank_percentage(rps) == 62.0);
  bool neutral = false;
  CHECK(rank_percentage(0, 0, &neutral) == 50.0);
  CHECK(neutral);
  CHECK(rank_percentage(0, 5, &neutral) == 0.0);
  CHECK_FALSE(neutral);

  CHECK(grow_sample_size(32, 5, 60) == 37);
  CHECK(grow_sample_size(37, 8, 60) == 45);
  CHECK(grow_sample_size(55, 9, 60) == 60);

  CHECK(classify_transition(false, true) == Transition::Pos);
  CHECK(classify_transition(true, false) == Transition::Neg);
  CHECK(classify_transition(true, true) == Transition::None);
  CHECK(classify_transition(false, false) == Transition::None);
}

TEST_CASE("test-count law") {
  Rng rng(11);
  const auto liked = position_walk(rng, 200, 6);
  const auto disliked = position_walk(rng, 425, 6);
  const RankEngine engine(sequence(liked, Label::Liked), sequence(disliked, Label::Disliked));
  const FenRecord fresh = position_walk(rng, 1, 6).front();
  CHECK(engine.run_cycle(fresh, 32, 0.05).welch_tests == 2 * (200 / 32) * (425 / 32));
  CHECK(engine.run_cycle(fresh, 32, 0.05).welch_tests == 156);
  CHECK(engine.run_cycle(fresh, 32, 0.05, false).welch_tests == 156);
}

TEST_CASE("sample sizes") {
  CycleConfig c;
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const auto sizes = draw_sample_sizes(c, rng);
    REQUIRE(sizes.size() == 3);
    CHECK(sizes[0] >= 30);
    CHECK(sizes[0] <= 40);
    for (std::size_t k = 1; k < sizes.size(); ++k) {
      CHECK(sizes[k] > sizes[k - 1]);
      CHECK(sizes[k] - sizes[k - 1] <= 10);
      CHECK(sizes[k] <= 60);
    }
  }
  CHECK(c.max_sample_size() == 60);

  CycleConfig tight;
  tight.first_size_min = tight.first_size_max = 58;
  Rng rng2(1);
  const auto capped = draw_sample_sizes(tight, rng2);
  CHECK(capped.back() == 60);

  CycleConfig bad;
  bad.first_size_min = 1;
  CHECK(code_of([&] { bad.validate(); }) == Errc::InvalidArgument);
  bad = CycleConfig{};
  bad.alpha = 1.0;
  CHECK(code_of([&] { bad.validate(); }) == Errc::InvalidArgument);
  bad = CycleConfig{};
  bad.first_size_max = 70;
  CHECK(code_of([&] { bad.validate(); }) == Errc::InvalidArgument);
}

TEST_CASE("cv sequences and chunks") {
  Rng rng(2);
  const auto fens = position_walk(rng, 23, 5);
  const CvSequence seq = sequence(fens, Label::Liked);
  REQUIRE(seq.size() == 23);
  CHECK(seq.cvs[0] == 0.0);
  CHECK(seq.cvs[5] == change_value(fens[4], fens[5]));

  const auto chunks = partition_chunks(seq, 5);
  REQUIRE(chunks.size() == 4);
  CHECK(chunks[3].start_index == 15);
  CHECK(chunks[3].cvs.data() == seq.cvs.data() + 15);

  CHECK(code_of([&] { partition_chunks(seq, 1); }) == Errc::InvalidArgument);
  CHECK(code_of([&] { partition_chunks(seq, 24); }) == Errc::DatabaseTooSmall);
  CHECK(code_of([&] { build_cv_sequence(std::vector<FenRecord>{}, Label::Liked); }) == Errc::EmptyDatabase);

  const FenRecord fresh = position_walk(rng, 1, 5).front();
  const auto sub = substitute_last(chunks[1], fresh);
  CHECK(sub.back() == change_value(fens[8], fresh));
  CHECK(std::equal(sub.begin(), sub.end() - 1, chunks[1].cvs.begin()));
  CHECK(seq.cvs[9] == change_value(fens[8], fens[9]));

  const CvSequence other = sequence(position_walk(rng, 12, 5), Label::Disliked);
  const auto other_chunks = partition_chunks(other, 4);
  CHECK(code_of([&] { paired_test(chunks[0], other_chunks[0], fresh, 0.05); }) == Errc::ChunkSizeMismatch);
}

TEST_CASE("oracle equivalence on small instances") {
  Rng rng(2024);
  const std::size_t kSizes[] = {2, 3, 5};
  std::size_t transitions = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto nl = static_cast<std::size_t>(rng.uniform_int(5, 100));
    const auto nd = static_cast<std::size_t>(rng.uniform_int(5, 100));
    const auto pieces = static_cast<std::size_t>(rng.uniform_int(2, 12));
    const auto liked = position_walk(rng, nl, pieces);
    const auto disliked = position_walk(rng, nd, pieces);
    const auto fresh = position_walk(rng, 1, pieces).front();
    std::vector<std::size_t> sizes;
    for (int c = 0; c < 3; ++c) sizes.push_back(kSizes[rng.uniform_int(0, 2)]);
    const double alpha = rng.uniform_int(0, 1) == 0 ? 0.05 : 0.2;

    const RankEngine engine(sequence(liked, Label::Liked), sequence(disliked, Label::Disliked));
    const CandidateScore expected = naive::score(liked, disliked, fresh, sizes, alpha);
    CAPTURE(trial);
    REQUIRE(engine.score(fresh, sizes, alpha, true) == expected);
    REQUIRE(engine.score(fresh, sizes, alpha, false) == expected);
    for (const auto& c : expected.cycles) transitions += c.pos + c.neg;
  }
  // The instances must exercise both transition kinds, not just neutral cycles.
  CHECK(transitions > 1000);
}

TEST_CASE("batch scoring matches the oracle for any worker count") {
  Rng rng(77);
  CycleConfig config;
  config.first_size_min = 2;
  config.first_size_max = 3;
  config.increment_min = 0;
  config.increment_max = 2;
  config.size_cap = 5;
  for (int trial = 0; trial < 40; ++trial) {
    const auto liked = position_walk(rng, static_cast<std::size_t>(rng.uniform_int(5, 100)), 6);
    const auto disliked = position_walk(rng, static_cast<std::size_t>(rng.uniform_int(5, 100)), 6);
    const auto candidates = position_walk(rng, 12, 6);
    config.seed = rng();
    std::vector<CandidateScore> expected;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      Rng stream = Rng::stream(config.seed, i);
      expected.push_back(naive::score(liked, disliked, candidates[i], draw_sample_sizes(config, stream), config.alpha));
      expected.back().ordinal = i;
    }
    const RankEngine engine(sequence(liked, Label::Liked), sequence(disliked, Label::Disliked));
    for (std::size_t workers : {1, 2, 3, 8}) {
      RankOptions options;
      options.workers = workers;
      options.cache_t1 = workers % 2 == 0;
      CAPTURE(workers);
      CHECK(engine.score_all(candidates, config, options) == expected);
    }
  }
}

TEST_CASE("scoring leaves the databases untouched") {
  Rng rng(8);
  const auto liked = position_walk(rng, 90, 6);
  const auto disliked = position_walk(rng, 90, 6);
  const CvSequence ls = sequence(liked, Label::Liked);
  const RankEngine engine(ls, sequence(disliked, Label::Disliked));
  const auto fresh = position_walk(rng, 1, 6).front();
  const std::vector<std::size_t> sizes = {3, 5, 5};
  const CandidateScore first = engine.score(fresh, sizes, 0.05);
  (void)engine.score(position_walk(rng, 1, 6).front(), sizes, 0.05);
  CHECK(engine.liked() == ls);
  CHECK(engine.score(fresh, sizes, 0.05) == first);
}

TEST_CASE("shared batch sizes and progress") {
  Rng rng(9);
  const RankEngine engine(sequence(position_walk(rng, 120, 6), Label::Liked),
                          sequence(position_walk(rng, 120, 6), Label::Disliked));
  const auto candidates = position_walk(rng, 9, 6);
  CycleConfig config;
  config.first_size_min = 3;
  config.first_size_max = 9;
  config.size_cap = 30;
  config.seed = 3;
  RankOptions options;
  options.size_mode = SizeMode::SharedBatch;
  options.workers = 3;
  std::atomic<std::size_t> calls{0};
  std::size_t last = 0;
  bool ordered = true;
  options.progress = [&](std::size_t done, std::size_t total) {
    ordered = ordered && done == last + 1 && total == 9;
    last = done;
    ++calls;
  };
  const auto scores = engine.score_all(candidates, config, options);
  CHECK(calls == 9);
  CHECK(ordered);
  for (const auto& s : scores) {
    REQUIRE(s.cycles.size() == 3);
    for (std::size_t c = 0; c < 3; ++c) CHECK(s.cycles[c].sample_size == scores[0].cycles[c].sample_size);
  }
}

TEST_CASE("guards") {
  Rng rng(10);
  const RankEngine engine(sequence(position_walk(rng, 50, 6), Label::Liked),
                          sequence(position_walk(rng, 80, 6), Label::Disliked));
  const auto candidates = position_walk(rng, 2, 6);
  CHECK(code_of([&] { engine.score_all(candidates, CycleConfig{}); }) == Errc::DatabaseTooSmall);
  CHECK(code_of([&] {
          rank_collection({}, engine.liked(), engine.disliked(), CycleConfig{});
        }) == Errc::EmptyDatabase);
}

TEST_CASE("ranking order") {
  std::vector<CandidateScore> scores(4);
  const double arps[] = {40.0, 75.0, 40.0, 90.0};
  for (std::size_t i = 0; i < 4; ++i) {
    scores[i].arp = arps[i];
    scores[i].ordinal = i;
  }
  sort_by_arp(scores);
  CHECK(scores[0].ordinal == 3);
  CHECK(scores[1].ordinal == 1);
  CHECK(scores[2].ordinal == 0);
  CHECK(scores[3].ordinal == 2);
}
