#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "cvrank/error.hpp"
#include "cvrank/pgn.hpp"
#include "cvrank/store.hpp"

using namespace cvrank;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("cvrank-store-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string game(std::string_view date, std::string_view fen, std::string_view extra = "") {
  std::string g = "[Event \"t\"]\n[Date \"" + std::string(date) + "\"]\n";
  g += extra;
  if (!fen.empty()) g += "[SetUp \"1\"]\n[FEN \"" + std::string(fen) + "\"]\n";
  g += "\n1. Qc4+ {a comment} Kb8 *\n\n";
  return g;
}

const char* kA = "8/8/2Q5/1b6/1r6/5B2/k1N5/2K5 w - - 0 1";
const char* kB = "8/5K1k/8/8/7N/1p6/8/B7 w - - 0 1";
const char* kC = "3K4/6Rr/8/5B2/2Q5/8/8/3bk3 w - - 0 1";
const char* kD = "6R1/8/2K5/k7/8/3p4/1P6/8 w - - 0 1";

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::Io;
}

}  // namespace

TEST_CASE("pgn tag sections") {
  const std::string text =
      "; leading comment\n%escape line\n[Event \"one \\\"quoted\\\"\"]\n[FEN \"x\"]\n\n1. e4 *\n"
      "[Event \"two\"]\n[FEN \"y\"]\n[Event \"three\"]\n[FEN \"z\"]\n";
  const auto games = parse_pgn(text);
  REQUIRE(games.size() == 3);
  CHECK(games[0].tag("Event") == "one \"quoted\"");
  CHECK(games[1].tag("FEN") == "y");
  CHECK(games[2].tag("Event") == "three");
  CHECK(games[2].index == 2);
  CHECK_FALSE(games[0].tag("Date").has_value());

  const auto rendered = parse_pgn(render_pgn_game({{"Event", "a \"b\""}, {"FEN", kA}}));
  REQUIRE(rendered.size() == 1);
  CHECK(rendered[0].tag("Event") == "a \"b\"");
}

TEST_CASE("timestamps") {
  const Timestamp t = Timestamp::from_pgn("2021.04.05", "13:14:15");
  CHECK(t.to_string() == "2021-04-05T13:14:15");
  CHECK(Timestamp::parse(t.to_string()) == t);
  CHECK(Timestamp::from_pgn("2021.04.05", "99:00:00") == Timestamp::from_civil(2021, 4, 5));
  CHECK_FALSE(Timestamp::from_pgn("2021.??.??", "").known());
  CHECK(Timestamp::unknown().to_string() == "-");
  CHECK(Timestamp::parse("-") == Timestamp::unknown());
  CHECK(Timestamp::from_civil(1970, 1, 1).seconds() == 0);
  CHECK(t < Timestamp::unknown());
  CHECK(t.to_pgn() == std::pair<std::string, std::string>{"2021.04.05", "13:14:15"});
}

TEST_CASE("ingest sorts, skips and counts") {
  const std::string text = game("2021.01.03", kC) + game("2021.01.01", kA) + game("2021.01.02", "") +
                           game("2021.01.02", "not a fen") + game("2021.01.02", kB) + game("2021.01.05", kA);
  IngestSummary s;
  const PreferenceDb db = ingest_pgn_text(text, Label::Liked, 0, &s);
  CHECK(s.ingested == 3);
  CHECK(s.missing_fen == 1);
  CHECK(s.invalid_fen == 1);
  CHECK(s.duplicates == 1);
  CHECK(s.skipped() == 3);
  REQUIRE(db.size() == 3);
  CHECK(db.records[0].fen.text() == kA);
  CHECK(db.records[1].fen.text() == kB);
  CHECK(db.records[2].fen.text() == kC);
  CHECK(db.is_sorted());
  CHECK(db.records[0].meta.at("Event") == "t");
  CHECK(code_of([] { ingest_pgn_text(game("2021.01.01", ""), Label::Liked); }) == Errc::NoUsableGames);
}

TEST_CASE("equal timestamps keep source order") {
  const std::string text = game("2021.01.01", kB) + game("2021.01.01", kA) + game("????.??.??", kC);
  const PreferenceDb db = ingest_pgn_text(text, Label::Disliked);
  CHECK(db.records[0].fen.text() == kB);
  CHECK(db.records[1].fen.text() == kA);
  CHECK(db.records[2].fen.text() == kC);
  CHECK_FALSE(db.records[2].generated_at.known());
}

TEST_CASE("UTC tags are a fallback") {
  const std::string text = game("????.??.??", kA, "[UTCDate \"2020.02.02\"]\n[UTCTime \"10:00:00\"]\n");
  const PreferenceDb db = ingest_pgn_text(text, Label::Liked);
  CHECK(db.records[0].generated_at.to_string() == "2020-02-02T10:00:00");
}

TEST_CASE("truncate, holdout and append") {
  const std::string text =
      game("2021.01.01", kA) + game("2021.01.02", kB) + game("2021.01.03", kC) + game("2021.01.04", kD);
  const PreferenceDb db = ingest_pgn_text(text, Label::Liked);

  CHECK(truncate_before(db, Timestamp::from_civil(2021, 1, 3)).size() == 2);
  CHECK(truncate_before(db, Timestamp::from_civil(2020, 1, 1)).empty());

  const HoldoutSplit split = split_holdout(db, 1);
  CHECK(split.train.size() == 3);
  REQUIRE(split.holdout.size() == 1);
  CHECK(split.holdout[0].fen.text() == kD);
  CHECK(code_of([&] { split_holdout(db, 4); }) == Errc::HoldoutTooLarge);

  const PreferenceDb three = truncate_before(db, Timestamp::from_civil(2021, 1, 4));
  CompositionRecord late{parse_fen(kD), Timestamp::from_civil(2021, 1, 2, 12), 99, {}};
  const PreferenceDb four = append_verdict(three, late);
  REQUIRE(four.size() == 4);
  CHECK(four.records[2].fen.text() == kD);
  CHECK(four.is_sorted());
  CHECK(code_of([&] { append_verdict(four, late); }) == Errc::DuplicateFen);
}

TEST_CASE("reconcile keeps the newer verdict") {
  PreferenceDb liked = ingest_pgn_text(game("2021.01.01", kA) + game("2021.01.05", kB), Label::Liked);
  PreferenceDb disliked =
      ingest_pgn_text(game("2021.01.03", kA) + game("2021.01.01", kB) + game("2021.01.01", kC), Label::Disliked);
  std::vector<std::string> warnings;
  reconcile(liked, disliked, &warnings);
  CHECK(liked.size() == 1);
  CHECK(liked.records[0].fen.text() == kB);
  CHECK(disliked.size() == 2);
  CHECK(disliked.contains(parse_fen(kA)));
  CHECK_FALSE(disliked.contains(parse_fen(kB)));
  CHECK(warnings.size() == 2);

  PreferenceDb l2 = ingest_pgn_text(game("2021.01.01", kD), Label::Liked);
  PreferenceDb d2 = ingest_pgn_text(game("2021.01.01", kD), Label::Disliked);
  warnings.clear();
  reconcile(l2, d2, &warnings);
  CHECK(l2.size() == 1);
  CHECK(d2.size() == 1);
  CHECK(warnings.size() == 1);
}

TEST_CASE("index round trip") {
  const PreferenceDb db = ingest_pgn_text(
      game("2021.01.01", kA, "[White \"tab\there\"]\n") + game("????.??.??", kB) + game("2021.01.02", kC),
      Label::Disliked, 10);
  const IndexContents back = read_index(write_index(db, 13));
  CHECK(back.db == db);
  CHECK(back.next_ordinal == 13);
  CHECK(code_of([] { read_index("#cvrank-index\tv1\tliked\tnext=0\ngarbage\n"); }) == Errc::Io);
  CHECK(code_of([] { read_index("nonsense\n"); }) == Errc::Io);
}

TEST_CASE("candidate lists") {
  const auto fens = parse_candidates(std::string("# header\n") + kA + "\n\n" + kB + "\r\n");
  REQUIRE(fens.size() == 2);
  CHECK(fens[1].text() == kB);
  CHECK(parse_candidates(game("2021.01.01", kC)).at(0).text() == kC);
  CHECK(code_of([] { parse_candidates("# nothing\n\n"); }) == Errc::EmptyDatabase);
  try {
    parse_candidates(std::string(kA) + "\nbad fen\n");
    FAIL("accepted a bad line");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MalformedFen);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("store persists and merges") {
  TempDir dir;
  const fs::path pgn = dir.path / "in.pgn";
  {
    std::ofstream(pgn) << game("2021.01.02", kB) + game("2021.01.01", kA) + game("2021.01.03", "");
  }
  {
    PreferenceStore store(dir.path / "s");
    CHECK_FALSE(store.exists(Label::Liked));
    CHECK(code_of([&] { store.load(Label::Liked); }) == Errc::FileNotFound);
    const IngestSummary s = store.ingest(pgn, Label::Liked);
    CHECK(s.ingested == 2);
    CHECK(s.missing_fen == 1);
  }
  PreferenceStore store(dir.path / "s");
  const PreferenceDb first = store.load(Label::Liked);
  CHECK(first.size() == 2);
  CHECK(first.records[0].fen.text() == kA);

  // Re-ingesting the same file adds nothing.
  CHECK(store.ingest(pgn, Label::Liked).duplicates == 2);
  CHECK(store.load(Label::Liked) == first);

  const CompositionRecord r = store.record_verdict(Label::Liked, parse_fen(kC), Timestamp::from_civil(2021, 2, 1));
  CHECK(r.fen.text() == kC);
  const PreferenceDb after = store.load(Label::Liked);
  CHECK(after.size() == 3);
  CHECK(after.records.back().fen.text() == kC);
  CHECK(code_of([&] { store.record_verdict(Label::Liked, parse_fen(kC), Timestamp::from_civil(2021, 2, 2)); }) ==
        Errc::DuplicateFen);

  // The PGN alone reproduces the database.
  const PreferenceDb from_pgn = ingest_pgn(store.pgn_path(Label::Liked), Label::Liked);
  CHECK(from_pgn.fens() == after.fens());
  CHECK(code_of([&] { store.ingest(dir.path / "missing.pgn", Label::Liked); }) == Errc::FileNotFound);
}

TEST_CASE("concurrent verdicts are serialized") {
  TempDir dir;
  PreferenceStore store(dir.path);
  store.ingest_text(game("2021.01.01", kA), Label::Disliked);
  const char* fens[] = {kB, kC, kD};
  std::vector<std::jthread> threads;
  for (int i = 0; i < 3; ++i) {
    threads.emplace_back([&, i] {
      store.record_verdict(Label::Disliked, parse_fen(fens[i]), Timestamp::from_civil(2021, 3, 1 + i));
      (void)store.load(Label::Disliked);
    });
  }
  threads.clear();
  const PreferenceDb db = store.load(Label::Disliked);
  CHECK(db.size() == 4);
  CHECK(db.is_sorted());
}
