#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cvrank/engine.hpp"
#include "cvrank/rng.hpp"
#include "cvrank/stats.hpp"
#include "cvrank/store.hpp"

namespace cvrank {

enum class BaselineSelection { Random, Sequential };

struct ProtocolParams {
  std::size_t holdout = 20;
  std::size_t baseline_total = 60;
  std::size_t baseline_groups = 3;
  BaselineSelection selection = BaselineSelection::Random;
};

struct BaselineGroup {
  std::string label;
  std::vector<CompositionRecord> records;
};

/// Training databases plus the held-out target and baseline groups.
struct ProtocolInputs {
  PreferenceDb train_liked;
  PreferenceDb train_disliked;
  /// Most recent liked records, the "new and unseen" target group.
  std::vector<CompositionRecord> holdout;
  /// Disliked records generated at or after the cutoff, in groups.
  std::vector<BaselineGroup> baseline;
  /// Earliest holdout timestamp; training data predates it.
  Timestamp cutoff;
  /// Disliked records available at or after the cutoff.
  std::size_t baseline_pool = 0;
};

/// "BRS A", "BRS B", ... for group index 0, 1, ...
std::string baseline_group_label(std::size_t index);

/// Throws Error{InvalidArgument} for a zero holdout or zero groups,
/// Error{HoldoutTooLarge}, or Error{InsufficientBaseline} when the baseline
/// does not divide evenly or the post-cutoff pool is too small.
ProtocolInputs build_protocol(const PreferenceDb& liked, const PreferenceDb& disliked, const ProtocolParams& params,
                              Rng& rng);

/// Merges both lists, sorts descending (ties: target first, then input
/// order) and counts target entries in the first n. Throws
/// Error{LengthMismatch}.
std::size_t top_half_count(std::span<const double> target, std::span<const double> baseline);

struct GroupScores {
  std::string label;
  std::vector<CandidateScore> scores;
};

struct GroupTest {
  std::string label;
  TTestResult result;
};

struct TopHalf {
  std::string label;
  std::size_t count = 0;
  double fraction = 0.0;
};

struct GroupDescriptive {
  std::string label;
  Descriptive stats;
};

inline constexpr std::string_view kTargetLabel = "NUS";

struct EvaluationReport {
  bool fixture_mode = false;
  double alpha = 0.05;
  std::size_t holdout_size = 0;
  /// Target ARPs; also filled in fixture mode.
  std::vector<double> target_arps;
  std::vector<std::pair<std::string, std::vector<double>>> baseline_arps;
  /// Full engine output; empty in fixture mode.
  std::vector<CandidateScore> target_scores;
  std::vector<GroupScores> baseline_scores;
  std::vector<GroupTest> group_tests;
  std::vector<TopHalf> top_half;
  /// Target first, then each baseline group.
  std::vector<GroupDescriptive> descriptives;

  double mean_top_half_fraction() const;
};

/// Scores the holdout and every baseline group against the training
/// databases, then compares the groups.
EvaluationReport evaluate(const ProtocolInputs& inputs, const CycleConfig& config, const RankOptions& options = {});

/// Compares precomputed ARP lists without running the engine.
EvaluationReport evaluate_fixture(std::span<const double> target_arps,
                                  const std::vector<std::pair<std::string, std::vector<double>>>& baseline_arps,
                                  double alpha = 0.05);

/// Reads a CSV whose first column is an identifier and whose remaining
/// columns are numeric; returns (header, values) per numeric column.
/// Throws Error{Io} on a ragged or non-numeric table.
std::vector<std::pair<std::string, std::vector<double>>> parse_score_csv(std::string_view text);

}  // namespace cvrank
