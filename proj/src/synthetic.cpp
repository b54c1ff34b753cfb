#include "cvrank/synthetic.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <unordered_set>

#include <fmt/format.h>

#include "cvrank/error.hpp"
#include "cvrank/pgn.hpp"

namespace cvrank {

namespace {

constexpr std::string_view kNonKing = "QRBNPqrbnp";
constexpr std::size_t kMaxMisses = 100000;

std::string placement_from(const std::array<char, 64>& cells) {
  std::string out;
  for (int rank = 0; rank < 8; ++rank) {
    if (rank > 0) out.push_back('/');
    int run = 0;
    for (int file = 0; file < 8; ++file) {
      const char c = cells[static_cast<std::size_t>(rank * 8 + file)];
      if (c == 0) {
        ++run;
        continue;
      }
      if (run > 0) out.push_back(static_cast<char>('0' + run));
      run = 0;
      out.push_back(c);
    }
    if (run > 0) out.push_back(static_cast<char>('0' + run));
  }
  return out;
}

std::array<char, 64> random_cells(Rng& rng, std::size_t extra_pieces) {
  std::array<char, 64> cells{};
  std::array<int, 64> order{};
  std::iota(order.begin(), order.end(), 0);
  const std::size_t placed = std::min<std::size_t>(extra_pieces + 2, 64);
  for (std::size_t i = 0; i < placed; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i), 63));
    std::swap(order[i], order[j]);
  }
  cells[static_cast<std::size_t>(order[0])] = 'K';
  cells[static_cast<std::size_t>(order[1])] = 'k';
  for (std::size_t i = 2; i < placed; ++i) {
    cells[static_cast<std::size_t>(order[i])] = kNonKing[static_cast<std::size_t>(rng.uniform_int(0, 9))];
  }
  return cells;
}

FenRecord fen_from(const std::array<char, 64>& cells) {
  return parse_fen(placement_from(cells) + " w - - 0 1");
}

// Stream of variations on one motif.
class MotifProcess {
 public:
  MotifProcess(std::uint64_t motif_seed, std::uint64_t seed, std::size_t pieces, std::size_t max_mutations,
               std::size_t max_moves)
      : rng_(seed), max_mutations_(max_mutations), max_moves_(max_moves) {
    Rng motif_rng(motif_seed);
    motif_ = random_cells(motif_rng, pieces);
    for (std::size_t i = 0; i < 64; ++i) {
      if (motif_[i] != 0 && motif_[i] != 'K' && motif_[i] != 'k') mutable_squares_.push_back(i);
    }
  }

  FenRecord next() {
    auto cells = motif_;
    const auto mutations = static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(max_mutations_)));
    for (std::size_t m = 0; m < mutations && !mutable_squares_.empty(); ++m) {
      const auto pick = static_cast<std::size_t>(
          rng_.uniform_int(0, static_cast<std::int64_t>(mutable_squares_.size() - 1)));
      cells[mutable_squares_[pick]] = kNonKing[static_cast<std::size_t>(rng_.uniform_int(0, 9))];
    }
    // Moves shift a piece to an empty square, which disturbs the layout.
    const auto moves = static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(max_moves_)));
    for (std::size_t m = 0; m < moves && !mutable_squares_.empty(); ++m) {
      const auto from = mutable_squares_[static_cast<std::size_t>(
          rng_.uniform_int(0, static_cast<std::int64_t>(mutable_squares_.size() - 1)))];
      const auto to = static_cast<std::size_t>(rng_.uniform_int(0, 63));
      if (cells[from] == 0 || cells[to] != 0) continue;
      std::swap(cells[from], cells[to]);
    }
    return fen_from(cells);
  }

 private:
  Rng rng_;
  std::size_t max_mutations_;
  std::size_t max_moves_;
  std::array<char, 64> motif_{};
  std::vector<std::size_t> mutable_squares_;
};

MotifProcess process_for(const SyntheticParams& p, Label family) {
  const bool liked = family == Label::Liked;
  return MotifProcess(derive_stream_seed(p.seed, 0), derive_stream_seed(p.seed, liked ? 1 : 2), p.motif_pieces,
                      liked ? p.liked_max_mutations : p.disliked_max_mutations,
                      liked ? p.liked_max_moves : p.disliked_max_moves);
}

}  // namespace

FenRecord random_position(Rng& rng, std::size_t extra_pieces) { return fen_from(random_cells(rng, extra_pieces)); }

SyntheticCorpus make_synthetic(const SyntheticParams& p) {
  const Timestamp start = Timestamp::from_civil(2020, 3, 20, 9, 0, 0);
  const std::int64_t train_span = 120LL * 86400;
  const std::int64_t tail_span = 20LL * 86400;
  const std::int64_t cutoff = start.seconds() + train_span;

  // Shared so no FEN lands in both databases.
  std::unordered_set<std::string> seen;
  auto fill = [&](Label label, std::size_t train, std::size_t tail) {
    MotifProcess proc = process_for(p, label);
    PreferenceDb db{label, {}};
    std::uint64_t ordinal = 0;
    auto emit = [&](std::size_t count, std::int64_t from, std::int64_t span) {
      std::size_t made = 0;
      std::size_t misses = 0;
      while (made < count) {
        FenRecord fen = proc.next();
        if (!seen.insert(fen.text()).second) {
          if (++misses > kMaxMisses) {
            throw Error(Errc::InvalidArgument,
                        fmt::format("synthetic {} stream ran out of distinct positions after {} records",
                                    label_name(label), db.records.size()));
          }
          continue;
        }
        misses = 0;
        const std::int64_t at = from + span * static_cast<std::int64_t>(made) / static_cast<std::int64_t>(count);
        db.records.push_back(CompositionRecord{std::move(fen), Timestamp(at), ordinal++, {}});
        ++made;
      }
    };
    emit(train, start.seconds(), train_span);
    emit(tail, cutoff, tail_span);
    return db;
  };

  SyntheticCorpus out;
  out.liked = fill(Label::Liked, p.liked_train, p.liked_tail);
  out.disliked = fill(Label::Disliked, p.disliked_train, p.disliked_tail);
  out.cutoff = Timestamp(cutoff);
  return out;
}

std::vector<FenRecord> synthetic_candidates(const SyntheticParams& params, Label family, std::size_t count,
                                            std::uint64_t stream) {
  // Candidates must be new to both databases.
  const SyntheticCorpus corpus = make_synthetic(params);
  std::unordered_set<std::string> taken;
  for (const auto* db : {&corpus.liked, &corpus.disliked}) {
    for (const auto& r : db->records) taken.insert(r.fen.text());
  }
  MotifProcess proc = process_for(params, family);
  // Skip ahead so different streams give different candidates.
  const std::size_t skip = (family == Label::Liked ? params.liked_train + params.liked_tail
                                                   : params.disliked_train + params.disliked_tail) +
                           static_cast<std::size_t>(stream) * count * 4;
  for (std::size_t i = 0; i < skip; ++i) proc.next();
  std::vector<FenRecord> out;
  out.reserve(count);
  std::size_t misses = 0;
  while (out.size() < count) {
    FenRecord fen = proc.next();
    if (!taken.insert(fen.text()).second) {
      if (++misses > kMaxMisses) throw Error(Errc::InvalidArgument, "synthetic candidate stream exhausted");
      continue;
    }
    out.push_back(std::move(fen));
  }
  return out;
}

std::string to_pgn(const PreferenceDb& db) {
  std::string out;
  for (const auto& r : db.records) {
    const auto [date, time] = r.generated_at.to_pgn();
    out += render_pgn_game({{"Event", fmt::format("synthetic {} {}", label_name(db.label), r.source_ordinal)},
                            {"Date", date},
                            {"Time", time},
                            {"Result", "*"},
                            {"SetUp", "1"},
                            {"FEN", r.fen.text()}});
  }
  return out;
}

}  // namespace cvrank
