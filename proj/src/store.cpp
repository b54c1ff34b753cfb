#include "cvrank/store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <mutex>
#include <sstream>
#include <unordered_set>

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>

#include "cvrank/error.hpp"
#include "cvrank/pgn.hpp"

namespace cvrank {

namespace {

constexpr std::string_view kIndexMagic = "#cvrank-index";

// Howard Hinnant's days_from_civil / civil_from_days.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct Civil {
  std::int64_t year;
  unsigned month;
  unsigned day;
};

Civil civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {y + (m <= 2), m, d};
}

bool is_leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(std::int64_t y, unsigned m) {
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = s.find(sep, start);
    if (at == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, at - start));
    start = at + 1;
  }
}

bool record_less(const CompositionRecord& a, const CompositionRecord& b) {
  if (a.generated_at != b.generated_at) return a.generated_at < b.generated_at;
  return a.source_ordinal < b.source_ordinal;
}

// Index fields are tab separated; metadata escapes tab, newline, CR and
// backslash.
std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

std::optional<std::string> unescape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i == s.size()) return std::nullopt;
    switch (s[i]) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case '\\': out += '\\'; break;
      default: return std::nullopt;
    }
  }
  return out;
}

// Tags carried into CompositionRecord::meta.
constexpr std::string_view kMetaTags[] = {"Event", "White", "Black", "Composer", "Stipulation", "Site"};

}  // namespace

std::string_view label_name(Label label) noexcept { return label == Label::Liked ? "liked" : "disliked"; }

Label parse_label(std::string_view text) {
  if (text == "liked") return Label::Liked;
  if (text == "disliked") return Label::Disliked;
  throw Error(Errc::InvalidArgument, fmt::format("label must be liked or disliked, got \"{}\"", text));
}

Timestamp Timestamp::from_civil(int year, unsigned month, unsigned day, unsigned hour, unsigned minute,
                                unsigned second) {
  return Timestamp(days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second);
}

Timestamp Timestamp::from_pgn(std::string_view date, std::string_view time) {
  const auto parts = split(date, '.');
  if (parts.size() != 3) return unknown();
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (!parse_number(parts[0], y) || !parse_number(parts[1], m) || !parse_number(parts[2], d)) return unknown();
  if (m < 1 || m > 12 || d < 1 || d > days_in_month(y, m)) return unknown();

  unsigned hh = 0;
  unsigned mm = 0;
  unsigned ss = 0;
  const auto tparts = split(time, ':');
  if (tparts.size() == 3 && parse_number(tparts[0], hh) && parse_number(tparts[1], mm) &&
      parse_number(tparts[2], ss) && hh < 24 && mm < 60 && ss < 61) {
    return from_civil(y, m, d, hh, mm, ss);
  }
  return from_civil(y, m, d);
}

std::optional<Timestamp> Timestamp::parse(std::string_view text) {
  if (text == "-") return unknown();
  // YYYY-MM-DDTHH:MM:SS
  if (text.size() < 19 || text[text.size() - 9] != 'T') return std::nullopt;
  const auto date = split(text.substr(0, text.size() - 9), '-');
  const auto time = split(text.substr(text.size() - 8), ':');
  if (date.size() != 3 || time.size() != 3) return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0, hh = 0, mm = 0, ss = 0;
  if (!parse_number(date[0], y) || !parse_number(date[1], m) || !parse_number(date[2], d) ||
      !parse_number(time[0], hh) || !parse_number(time[1], mm) || !parse_number(time[2], ss)) {
    return std::nullopt;
  }
  if (m < 1 || m > 12 || d < 1 || d > days_in_month(y, m) || hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  return from_civil(y, m, d, hh, mm, ss);
}

std::string Timestamp::to_string() const {
  if (!known()) return "-";
  std::int64_t days = *seconds_ / 86400;
  std::int64_t rem = *seconds_ % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  const Civil c = civil_from_days(days);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}", c.year, c.month, c.day, rem / 3600, rem / 60 % 60,
                     rem % 60);
}

std::pair<std::string, std::string> Timestamp::to_pgn() const {
  if (!known()) return {"????.??.??", "??:??:??"};
  const std::string iso = to_string();
  std::string date = iso.substr(0, 10);
  std::replace(date.begin(), date.end(), '-', '.');
  return {date, iso.substr(11)};
}

bool PreferenceDb::is_sorted() const {
  return std::is_sorted(records.begin(), records.end(), record_less);
}

bool PreferenceDb::contains(const FenRecord& fen) const {
  return std::any_of(records.begin(), records.end(), [&](const CompositionRecord& r) { return r.fen == fen; });
}

std::vector<FenRecord> PreferenceDb::fens() const {
  std::vector<FenRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.fen);
  return out;
}

PreferenceDb ingest_pgn_text(std::string_view text, Label label, std::uint64_t first_ordinal,
                             IngestSummary* summary) {
  IngestSummary local;
  PreferenceDb db{label, {}};
  std::unordered_set<std::string> seen;
  for (const PgnGame& game : parse_pgn(text)) {
    const auto fen_text = game.tag("FEN");
    if (!fen_text) {
      ++local.missing_fen;
      continue;
    }
    CompositionRecord rec;
    try {
      rec.fen = parse_fen(*fen_text);
    } catch (const Error&) {
      ++local.invalid_fen;
      continue;
    }
    if (!seen.insert(rec.fen.text()).second) {
      ++local.duplicates;
      continue;
    }
    rec.generated_at = Timestamp::from_pgn(game.tag("Date").value_or(""), game.tag("Time").value_or(""));
    if (!rec.generated_at.known()) {
      rec.generated_at = Timestamp::from_pgn(game.tag("UTCDate").value_or(""), game.tag("UTCTime").value_or(""));
    }
    rec.source_ordinal = first_ordinal + game.index;
    for (std::string_view key : kMetaTags) {
      if (auto v = game.tag(key)) rec.meta.emplace(std::string(key), *v);
    }
    db.records.push_back(std::move(rec));
  }
  local.ingested = db.records.size();
  if (summary) *summary = local;
  if (db.records.empty()) {
    throw Error(Errc::NoUsableGames, fmt::format("no game carries a valid FEN tag ({} without FEN, {} invalid)",
                                                 local.missing_fen, local.invalid_fen));
  }
  std::stable_sort(db.records.begin(), db.records.end(), record_less);
  return db;
}

PreferenceDb ingest_pgn(const std::filesystem::path& path, Label label, IngestSummary* summary) {
  return ingest_pgn_text(read_file(path), label, 0, summary);
}

PreferenceDb truncate_before(const PreferenceDb& db, const Timestamp& cutoff) {
  PreferenceDb out{db.label, {}};
  for (const auto& r : db.records) {
    if (!(r.generated_at < cutoff)) break;
    out.records.push_back(r);
  }
  return out;
}

HoldoutSplit split_holdout(const PreferenceDb& db, std::size_t n) {
  if (n >= db.size()) {
    throw Error(Errc::HoldoutTooLarge, fmt::format("holdout {} needs a database larger than {}", n, db.size()));
  }
  HoldoutSplit split;
  split.train.label = db.label;
  const auto cut = db.records.end() - static_cast<std::ptrdiff_t>(n);
  split.train.records.assign(db.records.begin(), cut);
  split.holdout.assign(cut, db.records.end());
  return split;
}

PreferenceDb append_verdict(const PreferenceDb& db, CompositionRecord record) {
  if (db.contains(record.fen)) {
    throw Error(Errc::DuplicateFen,
                fmt::format("\"{}\" is already in the {} database", record.fen.text(), label_name(db.label)));
  }
  PreferenceDb out = db;
  const auto at = std::upper_bound(out.records.begin(), out.records.end(), record, record_less);
  out.records.insert(at, std::move(record));
  return out;
}

void reconcile(PreferenceDb& liked, PreferenceDb& disliked, std::vector<std::string>* warnings) {
  std::map<std::string, const CompositionRecord*> in_liked;
  for (const auto& r : liked.records) in_liked.emplace(r.fen.text(), &r);

  std::unordered_set<std::string> drop_liked;
  std::unordered_set<std::string> drop_disliked;
  for (const auto& r : disliked.records) {
    const auto it = in_liked.find(r.fen.text());
    if (it == in_liked.end()) continue;
    const CompositionRecord& l = *it->second;
    if (l.generated_at == r.generated_at) {
      if (warnings) warnings->push_back(fmt::format("{} has both verdicts at the same time; kept both", r.fen.text()));
    } else if (l.generated_at < r.generated_at) {
      drop_liked.insert(r.fen.text());
      if (warnings) warnings->push_back(fmt::format("{} flipped to disliked; liked verdict ignored", r.fen.text()));
    } else {
      drop_disliked.insert(r.fen.text());
      if (warnings) warnings->push_back(fmt::format("{} flipped to liked; disliked verdict ignored", r.fen.text()));
    }
  }
  std::erase_if(liked.records, [&](const CompositionRecord& r) { return drop_liked.contains(r.fen.text()); });
  std::erase_if(disliked.records, [&](const CompositionRecord& r) { return drop_disliked.contains(r.fen.text()); });
}

std::string write_index(const PreferenceDb& db, std::uint64_t next_ordinal) {
  std::string out = fmt::format("{}\tv1\t{}\tnext={}\n", kIndexMagic, label_name(db.label), next_ordinal);
  for (const auto& r : db.records) {
    out += fmt::format("{}\t{}\t{}\t{}", r.source_ordinal, r.generated_at.to_string(), r.fen.text(),
                       label_name(db.label));
    for (const auto& [k, v] : r.meta) out += fmt::format("\t{}={}", escape_field(k), escape_field(v));
    out += '\n';
  }
  return out;
}

IndexContents read_index(std::string_view text) {
  IndexContents out;
  std::size_t line_no = 0;
  bool header = false;
  std::unordered_set<std::uint64_t> ordinals;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    auto bad = [&](std::string_view why) {
      return Error(Errc::Io, fmt::format("index line {}: {}", line_no, why));
    };
    if (!header) {
      if (cols.size() != 4 || cols[0] != kIndexMagic || cols[1] != "v1" || !cols[3].starts_with("next=")) {
        throw bad("missing or unsupported header");
      }
      if (cols[2] != "liked" && cols[2] != "disliked") throw bad("unknown label");
      out.db.label = parse_label(cols[2]);
      if (!parse_number(cols[3].substr(5), out.next_ordinal)) throw bad("bad next ordinal");
      header = true;
      continue;
    }
    if (cols.size() < 4) throw bad("expected at least 4 columns");
    CompositionRecord rec;
    if (!parse_number(cols[0], rec.source_ordinal)) throw bad("bad ordinal");
    if (!ordinals.insert(rec.source_ordinal).second) throw bad("duplicate ordinal");
    const auto ts = Timestamp::parse(cols[1]);
    if (!ts) throw bad("bad timestamp");
    rec.generated_at = *ts;
    try {
      rec.fen = parse_fen(cols[2]);
    } catch (const Error& e) {
      throw bad(e.what());
    }
    if (cols[3] != label_name(out.db.label)) throw bad("label differs from header");
    for (std::size_t i = 4; i < cols.size(); ++i) {
      const auto eq = cols[i].find('=');
      if (eq == std::string_view::npos) throw bad("metadata must be key=value");
      auto key = unescape_field(cols[i].substr(0, eq));
      auto value = unescape_field(cols[i].substr(eq + 1));
      if (!key || !value) throw bad("bad escape in metadata");
      rec.meta.emplace(std::move(*key), std::move(*value));
    }
    out.db.records.push_back(std::move(rec));
  }
  if (!header) throw Error(Errc::Io, "index is empty");
  if (!out.db.is_sorted()) throw Error(Errc::Io, "index records are not in chronological order");
  return out;
}

std::vector<FenRecord> parse_candidates(std::string_view text) {
  std::vector<FenRecord> out;
  const auto lines = split(text, '\n');
  const bool is_pgn = std::any_of(lines.begin(), lines.end(), [](std::string_view l) {
    const auto first = l.find_first_not_of(" \t");
    return first != std::string_view::npos && l[first] == '[';
  });
  if (is_pgn) {
    for (const PgnGame& game : parse_pgn(text)) {
      const auto fen = game.tag("FEN");
      if (!fen) continue;
      try {
        out.push_back(parse_fen(*fen));
      } catch (const Error& e) {
        throw Error(e.code(), fmt::format("game {}: {}", game.index + 1, e.detail()));
      }
    }
  } else {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::string_view line = lines[i];
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string_view::npos || line[first] == '#') continue;
      try {
        out.push_back(parse_fen(line));
      } catch (const Error& e) {
        throw Error(e.code(), fmt::format("line {}: {}", i + 1, e.detail()));
      }
    }
  }
  if (out.empty()) throw Error(Errc::EmptyDatabase, "no candidate positions found");
  return out;
}

std::vector<FenRecord> read_candidates(const std::filesystem::path& path) { return parse_candidates(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(Errc::FileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(Errc::Io, fmt::format("cannot read {}", path.string()));
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(Errc::Io, fmt::format("cannot create {}", tmp.string()));
  std::size_t done = 0;
  while (done < contents.size()) {
    const ssize_t n = ::write(fd, contents.data() + done, contents.size() - done);
    if (n < 0) {
      ::close(fd);
      throw Error(Errc::Io, fmt::format("write to {} failed", tmp.string()));
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) throw Error(Errc::Io, fmt::format("sync of {} failed", tmp.string()));
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    throw Error(Errc::Io, fmt::format("rename to {} failed", path.string()));
  }
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  const int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

PreferenceStore::PreferenceStore(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path PreferenceStore::pgn_path(Label label) const {
  return root_ / fmt::format("{}.pgn", label_name(label));
}

std::filesystem::path PreferenceStore::index_path(Label label) const {
  return root_ / fmt::format("{}.idx", label_name(label));
}

bool PreferenceStore::exists(Label label) const {
  std::error_code ec;
  return std::filesystem::is_regular_file(index_path(label), ec);
}

IndexContents PreferenceStore::load_index(Label label) const {
  if (!exists(label)) {
    throw Error(Errc::FileNotFound, fmt::format("no {} database in {}", label_name(label), root_.string()));
  }
  IndexContents c = read_index(read_file(index_path(label)));
  if (c.db.label != label) throw Error(Errc::Io, fmt::format("{} holds another label", index_path(label).string()));
  return c;
}

PreferenceDb PreferenceStore::load(Label label) const {
  std::shared_lock lock(mutex_);
  return load_index(label).db;
}

void PreferenceStore::persist(Label label, const IndexContents& contents, std::string_view pgn_addition) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw Error(Errc::Io, fmt::format("cannot create {}: {}", root_.string(), ec.message()));
  if (!pgn_addition.empty()) {
    std::string pgn;
    if (std::filesystem::is_regular_file(pgn_path(label), ec)) pgn = read_file(pgn_path(label));
    if (!pgn.empty() && pgn.back() != '\n') pgn += '\n';
    if (!pgn.empty()) pgn += '\n';
    pgn += pgn_addition;
    write_file_atomic(pgn_path(label), pgn);
  }
  // The index is authoritative, so it is replaced last.
  write_file_atomic(index_path(label), write_index(contents.db, contents.next_ordinal));
}

IngestSummary PreferenceStore::ingest(const std::filesystem::path& pgn, Label label) {
  return ingest_text(read_file(pgn), label);
}

IngestSummary PreferenceStore::ingest_text(std::string_view text, Label label) {
  std::unique_lock lock(mutex_);
  IndexContents current;
  current.db.label = label;
  if (exists(label)) current = load_index(label);

  IngestSummary summary;
  PreferenceDb incoming = ingest_pgn_text(text, label, current.next_ordinal, &summary);
  const std::size_t games = parse_pgn(text).size();

  PreferenceDb merged = current.db;
  for (auto& rec : incoming.records) {
    if (merged.contains(rec.fen)) {
      ++summary.duplicates;
      --summary.ingested;
      continue;
    }
    merged.records.push_back(std::move(rec));
  }
  std::stable_sort(merged.records.begin(), merged.records.end(), record_less);
  persist(label, IndexContents{std::move(merged), current.next_ordinal + games}, text);
  return summary;
}

CompositionRecord PreferenceStore::record_verdict(Label label, const FenRecord& fen, const Timestamp& when,
                                                  std::map<std::string, std::string> meta) {
  std::unique_lock lock(mutex_);
  IndexContents current;
  current.db.label = label;
  if (exists(label)) current = load_index(label);

  CompositionRecord rec{fen, when, current.next_ordinal, std::move(meta)};
  PreferenceDb updated = append_verdict(current.db, rec);

  const auto [date, time] = when.to_pgn();
  std::vector<std::pair<std::string, std::string>> tags = {
      {"Event", rec.meta.contains("Event") ? rec.meta.at("Event") : std::string("verdict")},
      {"Date", date},
      {"Time", time},
      {"Result", "*"},
      {"SetUp", "1"},
      {"FEN", fen.text()},
  };
  persist(label, IndexContents{std::move(updated), current.next_ordinal + 1}, render_pgn_game(tags));
  return rec;
}

}  // namespace cvrank
