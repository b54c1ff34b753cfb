#include "cvrank/report.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace cvrank {

std::string format_percent(double value) { return fmt::format("{:.2f}", value); }

std::string csv_quote(std::string_view field) {
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string rank_csv(std::span<const CandidateScore> ranked) {
  std::size_t cycles = 0;
  for (const auto& s : ranked) cycles = std::max(cycles, s.cycles.size());
  std::string out = "rank,fen";
  for (std::size_t c = 1; c <= cycles; ++c) out += fmt::format(",cycle_{}", c);
  out += ",arp\r\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& s = ranked[i];
    out += fmt::format("{},{}", i + 1, csv_quote(s.fen.text()));
    for (std::size_t c = 0; c < cycles; ++c) {
      out += ',';
      if (c < s.cycles.size()) out += format_percent(s.cycles[c].rp);
    }
    out += fmt::format(",{}\r\n", format_percent(s.arp));
  }
  return out;
}

nlohmann::json to_json(const CycleConfig& config) {
  return {
      {"first_size_min", config.first_size_min}, {"first_size_max", config.first_size_max},
      {"increment_min", config.increment_min},   {"increment_max", config.increment_max},
      {"size_cap", config.size_cap},             {"cycles", config.cycles},
      {"alpha", config.alpha},                   {"seed", config.seed},
  };
}

nlohmann::json to_json(const CandidateScore& score) {
  nlohmann::json cycles = nlohmann::json::array();
  for (const auto& c : score.cycles) {
    cycles.push_back({{"sample_size", c.sample_size},
                      {"pos", c.pos},
                      {"neg", c.neg},
                      {"rp", c.rp},
                      {"neutral", c.neutral},
                      {"welch_tests", c.welch_tests}});
  }
  return {{"fen", score.fen.text()}, {"ordinal", score.ordinal}, {"arp", score.arp}, {"cycles", std::move(cycles)}};
}

nlohmann::json rank_json(std::span<const CandidateScore> ranked, const CycleConfig& config) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    auto row = to_json(ranked[i]);
    row["rank"] = i + 1;
    rows.push_back(std::move(row));
  }
  return {{"schema", "cvrank.rank/v1"}, {"config", to_json(config)}, {"results", std::move(rows)}};
}

namespace {

nlohmann::json ttest_json(const TTestResult& r) {
  // JSON has no infinity; the degenerate statistic is already finite.
  return {{"t", r.t}, {"df", r.df}, {"reporting_df", r.reporting_df()}, {"p", r.p}, {"significant", r.significant}};
}

}  // namespace

nlohmann::json to_json(const EvaluationReport& report) {
  nlohmann::json j;
  j["schema"] = "cvrank.evaluation/v1";
  j["mode"] = report.fixture_mode ? "fixture" : "engine";
  j["alpha"] = report.alpha;
  j["holdout_size"] = report.holdout_size;
  j["target"] = {{"label", kTargetLabel}, {"arps", report.target_arps}};
  nlohmann::json groups = nlohmann::json::array();
  for (std::size_t g = 0; g < report.baseline_arps.size(); ++g) {
    const auto& [label, arps] = report.baseline_arps[g];
    nlohmann::json entry = {{"label", label}, {"arps", arps}};
    if (g < report.group_tests.size()) entry["ttest"] = ttest_json(report.group_tests[g].result);
    if (g < report.top_half.size()) {
      entry["top_half"] = {{"count", report.top_half[g].count}, {"fraction", report.top_half[g].fraction}};
    }
    groups.push_back(std::move(entry));
  }
  j["baseline"] = std::move(groups);
  nlohmann::json desc = nlohmann::json::array();
  for (const auto& d : report.descriptives) {
    desc.push_back({{"label", d.label}, {"max", d.stats.max}, {"median", d.stats.median}, {"mean", d.stats.mean}});
  }
  j["descriptives"] = std::move(desc);
  j["mean_top_half_fraction"] = report.mean_top_half_fraction();
  if (!report.fixture_mode) {
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& s : report.target_scores) scores.push_back(to_json(s));
    j["target"]["scores"] = std::move(scores);
    for (std::size_t g = 0; g < report.baseline_scores.size() && g < j["baseline"].size(); ++g) {
      nlohmann::json gs = nlohmann::json::array();
      for (const auto& s : report.baseline_scores[g].scores) gs.push_back(to_json(s));
      j["baseline"][g]["scores"] = std::move(gs);
    }
  }
  return j;
}

std::string render_text(const EvaluationReport& report) {
  std::string out;
  out += fmt::format("{:<10} {:>8} {:>8} {:>8}\n", "group", "max", "median", "mean");
  for (const auto& d : report.descriptives) {
    out += fmt::format("{:<10} {:>8} {:>8} {:>8}\n", d.label, format_percent(d.stats.max),
                       format_percent(d.stats.median), format_percent(d.stats.mean));
  }
  out += '\n';
  const double target_mean = report.descriptives.empty() ? 0.0 : report.descriptives.front().stats.mean;
  out += fmt::format("{:<10} {:>28} {:>12}\n", "vs", fmt::format("{} ({})", kTargetLabel, format_percent(target_mean)),
                     "top half");
  for (std::size_t g = 0; g < report.group_tests.size(); ++g) {
    const auto& t = report.group_tests[g].result;
    const auto& h = report.top_half[g];
    out += fmt::format("{:<10} {:>28} {:>12}\n", report.group_tests[g].label,
                       fmt::format("t({}) = {:.3f}, p = {:.3f}{}", t.reporting_df(), t.t, t.p, t.significant ? " *" : ""),
                       fmt::format("{}/{} ({:.0f}%)", h.count, report.holdout_size, h.fraction * 100.0));
  }
  out += fmt::format("\nmean top-half fraction: {:.2f}%\n", report.mean_top_half_fraction() * 100.0);
  return out;
}

nlohmann::json board_json(const FenRecord& fen) {
  nlohmann::json squares = nlohmann::json::array();
  for (int idx = 0; idx < 64; ++idx) {
    const int file = idx % 8;
    const int rank = 8 - idx / 8;
    const Square& sq = fen.board()[static_cast<std::size_t>(idx)];
    nlohmann::json cell = {{"square", fmt::format("{}{}", static_cast<char>('a' + file), rank)}};
    cell["piece"] = sq.empty() ? nlohmann::json(nullptr) : nlohmann::json(std::string(1, sq.glyph()));
    squares.push_back(std::move(cell));
  }
  return {{"fen", fen.text()}, {"side_to_move", fen.side_to_move() == Color::White ? "w" : "b"},
          {"squares", std::move(squares)}};
}

}  // namespace cvrank
