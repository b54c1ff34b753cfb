#include "cvrank/engine.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <future>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "cvrank/error.hpp"

namespace cvrank {

const ChangeMetric& default_metric() {
  static const ByteBufferMetric metric;
  return metric;
}

CvSequence build_cv_sequence(std::span<const FenRecord> fens, Label label, const ChangeMetric& metric) {
  if (fens.empty()) throw Error(Errc::EmptyDatabase, fmt::format("{} database is empty", label_name(label)));
  CvSequence seq;
  seq.label = label;
  seq.fens.assign(fens.begin(), fens.end());
  seq.cvs.reserve(fens.size());
  seq.cvs.push_back(0.0);
  for (std::size_t i = 1; i < fens.size(); ++i) seq.cvs.push_back(metric(fens[i - 1], fens[i]));
  return seq;
}

CvSequence build_cv_sequence(const PreferenceDb& db, const ChangeMetric& metric) {
  const auto fens = db.fens();
  return build_cv_sequence(fens, db.label, metric);
}

std::vector<Chunk> partition_chunks(const CvSequence& seq, std::size_t sample_size) {
  if (sample_size < 2) throw Error(Errc::InvalidArgument, fmt::format("sample size {} < 2", sample_size));
  const std::size_t count = seq.size() / sample_size;
  if (count == 0) {
    throw Error(Errc::DatabaseTooSmall, fmt::format("{} database has {} CVs, fewer than one chunk of {}",
                                                    label_name(seq.label), seq.size(), sample_size));
  }
  std::vector<Chunk> chunks;
  chunks.reserve(count);
  const std::span<const FenRecord> fens(seq.fens);
  const std::span<const double> cvs(seq.cvs);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t start = k * sample_size;
    chunks.push_back(Chunk{start, fens.subspan(start, sample_size), cvs.subspan(start, sample_size)});
  }
  return chunks;
}

std::vector<double> substitute_last(const Chunk& liked_chunk, const FenRecord& new_fen, const ChangeMetric& metric) {
  std::vector<double> cvs(liked_chunk.cvs.begin(), liked_chunk.cvs.end());
  const std::size_t s = cvs.size();
  if (s >= 2) cvs[s - 1] = metric(liked_chunk.fens[s - 2], new_fen);
  return cvs;
}

Transition paired_test(const Chunk& liked_chunk, const Chunk& disliked_chunk, const FenRecord& new_fen,
                       double alpha, const ChangeMetric& metric) {
  if (liked_chunk.size() != disliked_chunk.size()) {
    throw Error(Errc::ChunkSizeMismatch,
                fmt::format("liked chunk of {} vs disliked chunk of {}", liked_chunk.size(), disliked_chunk.size()));
  }
  const bool t1 = welch_ttest(liked_chunk.cvs, disliked_chunk.cvs, alpha).significant;
  const auto substituted = substitute_last(liked_chunk, new_fen, metric);
  const bool t2 = welch_ttest(substituted, disliked_chunk.cvs, alpha).significant;
  return classify_transition(t1, t2);
}

void CycleConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::InvalidArgument, why); };
  if (first_size_min < 2) fail(fmt::format("first_size_min {} < 2", first_size_min));
  if (first_size_min > first_size_max) fail(fmt::format("first_size_min {} > first_size_max {}", first_size_min, first_size_max));
  if (first_size_max > size_cap) fail(fmt::format("first_size_max {} > size_cap {}", first_size_max, size_cap));
  if (increment_min > increment_max) fail(fmt::format("increment_min {} > increment_max {}", increment_min, increment_max));
  if (cycles < 1) fail("cycles must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(fmt::format("alpha {} outside (0, 1)", alpha));
}

std::size_t CycleConfig::max_sample_size() const noexcept {
  return std::min(size_cap, first_size_max + (cycles - 1) * increment_max);
}

std::vector<std::size_t> draw_sample_sizes(const CycleConfig& config, Rng& rng) {
  config.validate();
  std::vector<std::size_t> sizes;
  sizes.reserve(config.cycles);
  auto draw = [&rng](std::size_t lo, std::size_t hi) {
    return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
  };
  std::size_t s = draw(config.first_size_min, config.first_size_max);
  sizes.push_back(s);
  for (std::size_t c = 1; c < config.cycles; ++c) {
    s = grow_sample_size(s, draw(config.increment_min, config.increment_max), config.size_cap);
    sizes.push_back(s);
  }
  return sizes;
}

double rank_percentage(std::size_t pos, std::size_t neg, bool* neutral) noexcept {
  const std::size_t total = pos + neg;
  if (neutral) *neutral = total == 0;
  if (total == 0) return 50.0;
  return static_cast<double>(pos) / static_cast<double>(total) * 100.0;
}

double average_rank_percentage(std::span<const double> rps) {
  if (rps.empty()) throw Error(Errc::EmptySample, "no cycle rank percentages");
  double sum = 0.0;
  for (double rp : rps) sum += rp;
  return sum / static_cast<double>(rps.size());
}

struct RankEngine::SizeTables {
  std::size_t sample_size = 0;
  std::vector<Chunk> liked_chunks;
  std::vector<Chunk> disliked_chunks;
  std::vector<Summary> disliked_summaries;
  // T1 significance, row-major [liked chunk][disliked chunk]. Empty when the
  // tables are built for an uncached run.
  std::vector<std::uint8_t> t1_significant;
};

RankEngine::RankEngine(CvSequence liked, CvSequence disliked, const ChangeMetric& metric)
    : liked_(std::move(liked)), disliked_(std::move(disliked)), metric_(metric) {
  if (liked_.size() == 0) throw Error(Errc::EmptyDatabase, "liked sequence is empty");
  if (disliked_.size() == 0) throw Error(Errc::EmptyDatabase, "disliked sequence is empty");
}

void RankEngine::require_fit(std::size_t sample_size) const {
  if (liked_.size() < sample_size || disliked_.size() < sample_size) {
    throw Error(Errc::DatabaseTooSmall,
                fmt::format("sample size {} needs at least that many records on both sides (liked {}, disliked {})",
                            sample_size, liked_.size(), disliked_.size()));
  }
}

std::shared_ptr<const RankEngine::SizeTables> RankEngine::tables(std::size_t sample_size, double alpha,
                                                                 bool use_cache) const {
  auto build = [&](bool with_t1) {
    auto t = std::make_shared<SizeTables>();
    t->sample_size = sample_size;
    t->liked_chunks = partition_chunks(liked_, sample_size);
    t->disliked_chunks = partition_chunks(disliked_, sample_size);
    t->disliked_summaries.reserve(t->disliked_chunks.size());
    for (const Chunk& c : t->disliked_chunks) t->disliked_summaries.push_back(summarize(c.cvs));
    if (with_t1) {
      t->t1_significant.reserve(t->liked_chunks.size() * t->disliked_chunks.size());
      for (const Chunk& c : t->liked_chunks) {
        const Summary liked_summary = summarize(c.cvs);
        for (const Summary& d : t->disliked_summaries) {
          t->t1_significant.push_back(welch_ttest(liked_summary, d, alpha).significant);
        }
      }
    }
    return std::shared_ptr<const SizeTables>(std::move(t));
  };

  if (!use_cache) return build(false);

  // One builder per key; concurrent callers wait on its future.
  using Future = std::shared_future<std::shared_ptr<const SizeTables>>;
  std::promise<std::shared_ptr<const SizeTables>> promise;
  Future future;
  bool builder = false;
  {
    std::lock_guard lock(cache_mutex_);
    auto [it, inserted] = cache_.try_emplace({sample_size, alpha});
    if (inserted) {
      it->second = promise.get_future().share();
      builder = true;
    }
    future = it->second;
  }
  if (builder) {
    try {
      promise.set_value(build(true));
    } catch (...) {
      promise.set_exception(std::current_exception());
      std::lock_guard lock(cache_mutex_);
      cache_.erase({sample_size, alpha});
    }
  }
  return future.get();
}

CycleResult RankEngine::run_cycle(const FenRecord& new_fen, std::size_t sample_size, double alpha,
                                  bool use_cache) const {
  require_fit(sample_size);
  const auto t = tables(sample_size, alpha, use_cache);

  CycleResult r;
  r.sample_size = sample_size;
  const std::size_t nd = t->disliked_chunks.size();
  for (std::size_t i = 0; i < t->liked_chunks.size(); ++i) {
    const Chunk& lc = t->liked_chunks[i];
    const bool cached = !t->t1_significant.empty();
    const Summary original = cached ? Summary{} : summarize(lc.cvs);
    const Summary substituted = summarize(substitute_last(lc, new_fen, metric_));
    for (std::size_t j = 0; j < nd; ++j) {
      const Summary& dd = t->disliked_summaries[j];
      const bool t1 = cached ? t->t1_significant[i * nd + j] != 0 : welch_ttest(original, dd, alpha).significant;
      const bool t2 = welch_ttest(substituted, dd, alpha).significant;
      r.welch_tests += 2;
      switch (classify_transition(t1, t2)) {
        case Transition::Pos: ++r.pos; break;
        case Transition::Neg: ++r.neg; break;
        case Transition::None: break;
      }
    }
  }
  r.rp = rank_percentage(r.pos, r.neg, &r.neutral);
  return r;
}

CandidateScore RankEngine::score(const FenRecord& new_fen, std::span<const std::size_t> sizes, double alpha,
                                 bool use_cache) const {
  CandidateScore out;
  out.fen = new_fen;
  std::vector<double> rps;
  for (std::size_t s : sizes) {
    out.cycles.push_back(run_cycle(new_fen, s, alpha, use_cache));
    rps.push_back(out.cycles.back().rp);
  }
  out.arp = average_rank_percentage(rps);
  return out;
}

CandidateScore RankEngine::score_candidate(const FenRecord& new_fen, const CycleConfig& config, Rng& rng,
                                           bool use_cache) const {
  config.validate();
  require_fit(config.max_sample_size());
  const auto sizes = draw_sample_sizes(config, rng);
  return score(new_fen, sizes, config.alpha, use_cache);
}

std::vector<CandidateScore> RankEngine::score_all(std::span<const FenRecord> candidates, const CycleConfig& config,
                                                  const RankOptions& options) const {
  config.validate();
  require_fit(config.max_sample_size());
  const std::size_t total = candidates.size();
  std::vector<CandidateScore> results(total);

  std::vector<std::size_t> shared_sizes;
  if (options.size_mode == SizeMode::SharedBatch) {
    Rng rng = Rng::stream(config.seed, ~std::uint64_t{0});
    shared_sizes = draw_sample_sizes(config, rng);
  }

  std::size_t workers = options.workers;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(total, 1));

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex progress_mutex;
  std::size_t completed = 0;

  auto work = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= total) return;
      try {
        if (options.size_mode == SizeMode::SharedBatch) {
          results[i] = score(candidates[i], shared_sizes, config.alpha, options.cache_t1);
        } else {
          Rng rng = Rng::stream(config.seed, i);
          results[i] = score(candidates[i], draw_sample_sizes(config, rng), config.alpha, options.cache_t1);
        }
        results[i].ordinal = i;
      } catch (...) {
        std::lock_guard lock(progress_mutex);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
      std::lock_guard lock(progress_mutex);
      ++completed;
      if (options.progress) options.progress(completed, total);
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
  return results;
}

CycleResult run_cycle(const FenRecord& new_fen, const CvSequence& liked, const CvSequence& disliked,
                      std::size_t sample_size, double alpha) {
  return RankEngine(liked, disliked).run_cycle(new_fen, sample_size, alpha, false);
}

CandidateScore score_candidate(const FenRecord& new_fen, const CvSequence& liked, const CvSequence& disliked,
                               const CycleConfig& config, Rng& rng) {
  return RankEngine(liked, disliked).score_candidate(new_fen, config, rng, false);
}

void sort_by_arp(std::vector<CandidateScore>& scores) {
  std::stable_sort(scores.begin(), scores.end(),
                   [](const CandidateScore& a, const CandidateScore& b) { return a.arp > b.arp; });
}

std::vector<CandidateScore> rank_collection(std::span<const FenRecord> candidates, const CvSequence& liked,
                                            const CvSequence& disliked, const CycleConfig& config,
                                            const RankOptions& options) {
  if (candidates.empty()) throw Error(Errc::EmptyDatabase, "no candidates to rank");
  auto scores = RankEngine(liked, disliked).score_all(candidates, config, options);
  sort_by_arp(scores);
  return scores;
}

}  // namespace cvrank
