#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cvrank/fen.hpp"
#include "cvrank/rng.hpp"
#include "cvrank/store.hpp"

namespace cvrank {

/// Random position: both kings plus extra_pieces other pieces on distinct
/// squares. No legality beyond the king count.
FenRecord random_position(Rng& rng, std::size_t extra_pieces);

/// Parameters for a pair of synthetic preference databases. Both sides are
/// streams of variations on one shared motif position. Each record changes
/// the letters of up to max_mutations non-king pieces and moves up to
/// max_moves pieces to empty squares. Disliked streams mutate more, so their
/// change values run slightly higher; the gap is small enough that chunk
/// pairs sit near the significance threshold.
struct SyntheticParams {
  std::uint64_t seed = 1;
  std::size_t liked_train = 500;
  std::size_t disliked_train = 500;
  /// Liked records generated after the cutoff (the holdout).
  std::size_t liked_tail = 20;
  /// Disliked records generated after the cutoff (the baseline pool).
  std::size_t disliked_tail = 100;
  std::size_t liked_max_mutations = 2;
  std::size_t disliked_max_mutations = 3;
  std::size_t liked_max_moves = 0;
  std::size_t disliked_max_moves = 0;
  std::size_t motif_pieces = 10;
};

struct SyntheticCorpus {
  PreferenceDb liked;
  PreferenceDb disliked;
  /// Earliest post-cutoff timestamp; liked_tail and disliked_tail records
  /// are at or after it, everything else before.
  Timestamp cutoff;
};

/// Throws Error{InvalidArgument} when a stream cannot supply enough distinct
/// positions.
SyntheticCorpus make_synthetic(const SyntheticParams& params);

/// Further positions drawn from one side's process, for use as candidates.
/// None of them occurs in make_synthetic(params) or repeats within the list.
std::vector<FenRecord> synthetic_candidates(const SyntheticParams& params, Label family, std::size_t count,
                                            std::uint64_t stream);

/// PGN text with Date/Time/SetUp/FEN tags for each record.
std::string to_pgn(const PreferenceDb& db);

}  // namespace cvrank
