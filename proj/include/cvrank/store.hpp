#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "cvrank/fen.hpp"

namespace cvrank {

enum class Label { Liked, Disliked };

std::string_view label_name(Label label) noexcept;
/// Accepts "liked" or "disliked"; throws Error{InvalidArgument} otherwise.
Label parse_label(std::string_view text);

/// Generation time in whole seconds since the Unix epoch (UTC). An unknown
/// time orders after every known one.
class Timestamp {
 public:
  Timestamp() = default;
  explicit Timestamp(std::int64_t seconds) : seconds_(seconds) {}

  static Timestamp unknown() { return Timestamp(); }
  static Timestamp from_civil(int year, unsigned month, unsigned day, unsigned hour = 0, unsigned minute = 0,
                              unsigned second = 0);
  /// PGN `Date` ("YYYY.MM.DD") plus optional `Time` ("HH:MM:SS"). Any unknown
  /// or malformed date component yields an unknown timestamp; a malformed
  /// time is treated as midnight.
  static Timestamp from_pgn(std::string_view date, std::string_view time);
  /// ISO form written by to_string(), or "-" for unknown.
  static std::optional<Timestamp> parse(std::string_view text);

  bool known() const noexcept { return seconds_.has_value(); }
  std::int64_t seconds() const { return seconds_.value(); }
  /// "YYYY-MM-DDTHH:MM:SS", or "-" when unknown.
  std::string to_string() const;
  /// PGN tag values {"YYYY.MM.DD", "HH:MM:SS"}.
  std::pair<std::string, std::string> to_pgn() const;

  friend bool operator==(const Timestamp&, const Timestamp&) = default;
  friend std::strong_ordering operator<=>(const Timestamp& a, const Timestamp& b) noexcept {
    if (a.known() != b.known()) return a.known() ? std::strong_ordering::less : std::strong_ordering::greater;
    if (!a.known()) return std::strong_ordering::equal;
    return *a.seconds_ <=> *b.seconds_;
  }

 private:
  std::optional<std::int64_t> seconds_;
};

struct CompositionRecord {
  FenRecord fen;
  Timestamp generated_at;
  std::uint64_t source_ordinal = 0;
  std::map<std::string, std::string> meta;

  friend bool operator==(const CompositionRecord&, const CompositionRecord&) = default;
};

/// Chronologically ordered records sharing one verdict.
struct PreferenceDb {
  Label label = Label::Liked;
  std::vector<CompositionRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  /// Full scan of the (generated_at, source_ordinal) ordering.
  bool is_sorted() const;
  bool contains(const FenRecord& fen) const;
  std::vector<FenRecord> fens() const;

  friend bool operator==(const PreferenceDb&, const PreferenceDb&) = default;
};

struct IngestSummary {
  std::size_t ingested = 0;
  std::size_t missing_fen = 0;
  std::size_t invalid_fen = 0;
  std::size_t duplicates = 0;

  std::size_t skipped() const noexcept { return missing_fen + invalid_fen + duplicates; }
};

/// Parses PGN text into a sorted database. Ordinals start at first_ordinal
/// and follow game order in the text. Games without a FEN tag, with an
/// invalid FEN, or repeating an earlier FEN are skipped and counted.
/// Throws Error{NoUsableGames}.
PreferenceDb ingest_pgn_text(std::string_view text, Label label, std::uint64_t first_ordinal = 0,
                             IngestSummary* summary = nullptr);
/// Throws Error{FileNotFound}, Error{Io} or Error{NoUsableGames}.
PreferenceDb ingest_pgn(const std::filesystem::path& path, Label label, IngestSummary* summary = nullptr);

/// Prefix of records generated strictly before cutoff.
PreferenceDb truncate_before(const PreferenceDb& db, const Timestamp& cutoff);

struct HoldoutSplit {
  PreferenceDb train;
  std::vector<CompositionRecord> holdout;
};

/// Last n records become the holdout. Throws Error{HoldoutTooLarge} unless
/// n < size.
HoldoutSplit split_holdout(const PreferenceDb& db, std::size_t n);

/// Inserts at the sorted position. Throws Error{DuplicateFen}.
PreferenceDb append_verdict(const PreferenceDb& db, CompositionRecord record);

/// Drops the older verdict for FENs present in both databases; identical
/// timestamps keep both. Each resolved conflict adds a line to warnings.
void reconcile(PreferenceDb& liked, PreferenceDb& disliked, std::vector<std::string>* warnings = nullptr);

/// Sidecar index: a header line then one tab-separated line per record
/// (ordinal, timestamp, FEN, label, then optional key=value metadata).
std::string write_index(const PreferenceDb& db, std::uint64_t next_ordinal);
struct IndexContents {
  PreferenceDb db;
  std::uint64_t next_ordinal = 0;
};
/// Throws Error{Io} (with line number) for a malformed index.
IndexContents read_index(std::string_view text);

/// Candidate list: PGN when any line starts with '[', otherwise one FEN per
/// line ('#' comments and blank lines ignored). Throws Error{MalformedFen} or
/// Error{IllegalPosition} naming the offending line, and Error{EmptyDatabase}
/// if nothing usable remains.
std::vector<FenRecord> parse_candidates(std::string_view text);
std::vector<FenRecord> read_candidates(const std::filesystem::path& path);

/// Reads a whole file. Throws Error{FileNotFound} or Error{Io}.
std::string read_file(const std::filesystem::path& path);
/// Write-temp, fsync, rename. Throws Error{Io}.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Directory holding liked.pgn/liked.idx and disliked.pgn/disliked.idx.
/// Reads may run concurrently; mutations are serialized.
class PreferenceStore {
 public:
  explicit PreferenceStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path pgn_path(Label label) const;
  std::filesystem::path index_path(Label label) const;
  bool exists(Label label) const;

  /// Immutable snapshot. Throws Error{FileNotFound} if the store has no data
  /// for the label.
  PreferenceDb load(Label label) const;

  /// Appends the PGN games to the store, merging with what is there.
  IngestSummary ingest(const std::filesystem::path& pgn, Label label);
  IngestSummary ingest_text(std::string_view pgn_text, Label label);

  /// Records one verdict durably; returns the stored record.
  /// Throws Error{DuplicateFen}.
  CompositionRecord record_verdict(Label label, const FenRecord& fen, const Timestamp& when,
                                   std::map<std::string, std::string> meta = {});

 private:
  IndexContents load_index(Label label) const;
  void persist(Label label, const IndexContents& contents, std::string_view pgn_addition);

  std::filesystem::path root_;
  mutable std::shared_mutex mutex_;
};

}  // namespace cvrank
