#pragma once

#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "cvrank/engine.hpp"
#include "cvrank/evaluation.hpp"

namespace cvrank {

/// Two-decimal display used for rank percentages.
std::string format_percent(double value);

/// RFC 4180 field quoting.
std::string csv_quote(std::string_view field);

/// Header `rank,fen,cycle_1..cycle_k,arp`; percentages to two decimals.
std::string rank_csv(std::span<const CandidateScore> ranked);

nlohmann::json to_json(const CycleConfig& config);
nlohmann::json to_json(const CandidateScore& score);
/// Full-precision ranking document (schema "cvrank.rank/v1").
nlohmann::json rank_json(std::span<const CandidateScore> ranked, const CycleConfig& config);

/// Schema "cvrank.evaluation/v1".
nlohmann::json to_json(const EvaluationReport& report);
/// Aligned plain-text tables.
std::string render_text(const EvaluationReport& report);

/// 64 squares from a8 to h1, each {"square": "a8", "piece": "K" or null}.
nlohmann::json board_json(const FenRecord& fen);

}  // namespace cvrank
