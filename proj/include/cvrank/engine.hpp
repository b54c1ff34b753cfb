#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "cvrank/fen.hpp"
#include "cvrank/rng.hpp"
#include "cvrank/stats.hpp"
#include "cvrank/store.hpp"

namespace cvrank {

/// Change values of a database in chronological order. The first value is 0;
/// value i is the change from position i-1 to position i.
struct CvSequence {
  Label label = Label::Liked;
  std::vector<FenRecord> fens;
  std::vector<double> cvs;

  std::size_t size() const noexcept { return cvs.size(); }
  friend bool operator==(const CvSequence&, const CvSequence&) = default;
};

/// Metric used when none is supplied.
const ChangeMetric& default_metric();

/// Throws Error{EmptyDatabase}.
CvSequence build_cv_sequence(const PreferenceDb& db, const ChangeMetric& metric = default_metric());
CvSequence build_cv_sequence(std::span<const FenRecord> fens, Label label,
                             const ChangeMetric& metric = default_metric());

/// Contiguous, non-overlapping slice of a CvSequence. Views into the parent.
struct Chunk {
  std::size_t start_index = 0;
  std::span<const FenRecord> fens;
  std::span<const double> cvs;

  std::size_t size() const noexcept { return cvs.size(); }
};

/// floor(len / s) chunks; the remainder is discarded. Throws
/// Error{InvalidArgument} for s < 2 and Error{DatabaseTooSmall} when len < s.
std::vector<Chunk> partition_chunks(const CvSequence& seq, std::size_t sample_size);

/// CVs of a liked chunk with its last position replaced by new_fen. The last
/// slot becomes the change from the chunk's penultimate position to new_fen.
std::vector<double> substitute_last(const Chunk& liked_chunk, const FenRecord& new_fen,
                                    const ChangeMetric& metric = default_metric());

enum class Transition { None, Pos, Neg };

/// Insignificant before and significant after is POS; the reverse is NEG.
constexpr Transition classify_transition(bool before_significant, bool after_significant) noexcept {
  if (!before_significant && after_significant) return Transition::Pos;
  if (before_significant && !after_significant) return Transition::Neg;
  return Transition::None;
}

/// T1 on the original chunks, T2 with new_fen substituted into the liked
/// chunk. Throws Error{ChunkSizeMismatch}.
Transition paired_test(const Chunk& liked_chunk, const Chunk& disliked_chunk, const FenRecord& new_fen,
                       double alpha, const ChangeMetric& metric = default_metric());

struct CycleConfig {
  std::size_t first_size_min = 30;
  std::size_t first_size_max = 40;
  std::size_t increment_min = 1;
  std::size_t increment_max = 10;
  std::size_t size_cap = 60;
  std::size_t cycles = 3;
  double alpha = 0.05;
  std::uint64_t seed = 0;

  /// Throws Error{InvalidArgument} describing the first violated bound.
  void validate() const;
  /// Largest sample size any cycle can draw.
  std::size_t max_sample_size() const noexcept;
};

constexpr std::size_t grow_sample_size(std::size_t previous, std::size_t increment, std::size_t cap) noexcept {
  return previous + increment < cap ? previous + increment : cap;
}

/// Sample sizes for one candidate: the first uniform in
/// [first_size_min, first_size_max], each later one adding a uniform
/// increment, clamped to size_cap.
std::vector<std::size_t> draw_sample_sizes(const CycleConfig& config, Rng& rng);

struct CycleResult {
  std::size_t sample_size = 0;
  std::size_t pos = 0;
  std::size_t neg = 0;
  double rp = 50.0;
  /// Set when no transition occurred and rp fell back to 50.
  bool neutral = false;
  /// Welch tests evaluated, counting T1 once per pair even when cached.
  std::size_t welch_tests = 0;

  friend bool operator==(const CycleResult&, const CycleResult&) = default;
};

/// pos / (pos + neg) * 100, or 50 with neutral set when both are zero.
double rank_percentage(std::size_t pos, std::size_t neg, bool* neutral = nullptr) noexcept;
/// Arithmetic mean of the cycle rank percentages.
double average_rank_percentage(std::span<const double> rps);

struct CandidateScore {
  FenRecord fen;
  /// Position in the input collection.
  std::size_t ordinal = 0;
  std::vector<CycleResult> cycles;
  double arp = 50.0;

  friend bool operator==(const CandidateScore&, const CandidateScore&) = default;
};

enum class SizeMode {
  /// Fresh random sizes for every candidate, from its own stream.
  PerCandidate,
  /// One set of sizes for the whole batch; scores differ from PerCandidate.
  SharedBatch,
};

struct RankOptions {
  /// 0 means std::thread::hardware_concurrency().
  std::size_t workers = 0;
  SizeMode size_mode = SizeMode::PerCandidate;
  /// Reuse T1 significance across candidates that draw the same size.
  bool cache_t1 = true;
  /// Called after each candidate with (completed, total); serialized.
  std::function<void(std::size_t, std::size_t)> progress;
};

/// Scores candidates against fixed liked/disliked sequences. Per-size chunk
/// statistics and T1 outcomes are computed once and shared by all threads.
class RankEngine {
 public:
  RankEngine(CvSequence liked, CvSequence disliked, const ChangeMetric& metric = default_metric());

  const CvSequence& liked() const noexcept { return liked_; }
  const CvSequence& disliked() const noexcept { return disliked_; }

  /// One pass over every liked x disliked chunk pair at sample size s.
  /// Throws Error{DatabaseTooSmall} if either side has no chunk.
  CycleResult run_cycle(const FenRecord& new_fen, std::size_t sample_size, double alpha,
                        bool use_cache = true) const;

  CandidateScore score(const FenRecord& new_fen, std::span<const std::size_t> sizes, double alpha,
                       bool use_cache = true) const;

  /// Draws sizes from rng, then scores. Throws Error{DatabaseTooSmall} unless
  /// both databases fit one chunk of config.max_sample_size().
  CandidateScore score_candidate(const FenRecord& new_fen, const CycleConfig& config, Rng& rng,
                                 bool use_cache = true) const;

  /// Scores in input order; candidate i uses Rng::stream(config.seed, i).
  std::vector<CandidateScore> score_all(std::span<const FenRecord> candidates, const CycleConfig& config,
                                        const RankOptions& options = {}) const;

 private:
  struct SizeTables;
  std::shared_ptr<const SizeTables> tables(std::size_t sample_size, double alpha, bool use_cache) const;
  void require_fit(std::size_t sample_size) const;

  CvSequence liked_;
  CvSequence disliked_;
  const ChangeMetric& metric_;

  mutable std::mutex cache_mutex_;
  mutable std::map<std::pair<std::size_t, double>, std::shared_future<std::shared_ptr<const SizeTables>>> cache_;
};

/// Single-candidate entry points over sequences.
CycleResult run_cycle(const FenRecord& new_fen, const CvSequence& liked, const CvSequence& disliked,
                      std::size_t sample_size, double alpha);
CandidateScore score_candidate(const FenRecord& new_fen, const CvSequence& liked, const CvSequence& disliked,
                               const CycleConfig& config, Rng& rng);

/// Sorts by ARP descending; ties keep input order.
void sort_by_arp(std::vector<CandidateScore>& scores);

/// Scores every candidate and returns them ranked. Throws
/// Error{EmptyDatabase} for an empty candidate list.
std::vector<CandidateScore> rank_collection(std::span<const FenRecord> candidates, const CvSequence& liked,
                                            const CvSequence& disliked, const CycleConfig& config,
                                            const RankOptions& options = {});

}  // namespace cvrank
