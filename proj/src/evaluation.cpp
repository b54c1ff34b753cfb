#include "cvrank/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

#include <fmt/format.h>

#include "cvrank/error.hpp"

namespace cvrank {

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(std::move(cell));
  return out;
}

}  // namespace

std::string baseline_group_label(std::size_t index) {
  if (index < 26) return fmt::format("BRS {}", static_cast<char>('A' + index));
  return fmt::format("BRS {}", index + 1);
}

ProtocolInputs build_protocol(const PreferenceDb& liked, const PreferenceDb& disliked, const ProtocolParams& params,
                              Rng& rng) {
  if (params.holdout == 0) throw Error(Errc::InvalidArgument, "holdout must contain at least one record");
  if (params.baseline_groups == 0) throw Error(Errc::InvalidArgument, "at least one baseline group is required");
  if (params.baseline_total == 0 || params.baseline_total % params.baseline_groups != 0) {
    throw Error(Errc::InsufficientBaseline, fmt::format("baseline of {} does not split into {} equal groups",
                                                        params.baseline_total, params.baseline_groups));
  }

  auto split = split_holdout(liked, params.holdout);
  ProtocolInputs in;
  in.train_liked = std::move(split.train);
  in.holdout = std::move(split.holdout);
  in.cutoff = in.holdout.front().generated_at;
  in.train_disliked = truncate_before(disliked, in.cutoff);

  const std::size_t first_post = in.train_disliked.size();
  in.baseline_pool = disliked.size() - first_post;
  if (in.baseline_pool < params.baseline_total) {
    throw Error(Errc::InsufficientBaseline,
                fmt::format("{} disliked records at or after {}, {} needed", in.baseline_pool,
                            in.cutoff.to_string(), params.baseline_total));
  }

  std::vector<std::size_t> picked(in.baseline_pool);
  std::iota(picked.begin(), picked.end(), first_post);
  if (params.selection == BaselineSelection::Random) {
    // Partial Fisher-Yates; the chosen records are then taken in
    // chronological order before being split.
    for (std::size_t i = 0; i < params.baseline_total; ++i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(picked.size() - 1)));
      std::swap(picked[i], picked[j]);
    }
    picked.resize(params.baseline_total);
    std::sort(picked.begin(), picked.end());
  } else {
    picked.resize(params.baseline_total);
  }

  const std::size_t per_group = params.baseline_total / params.baseline_groups;
  for (std::size_t g = 0; g < params.baseline_groups; ++g) {
    BaselineGroup group{baseline_group_label(g), {}};
    for (std::size_t k = 0; k < per_group; ++k) group.records.push_back(disliked.records[picked[g * per_group + k]]);
    in.baseline.push_back(std::move(group));
  }
  return in;
}

std::size_t top_half_count(std::span<const double> target, std::span<const double> baseline) {
  if (target.size() != baseline.size()) {
    throw Error(Errc::LengthMismatch, fmt::format("target has {} values, baseline {}", target.size(), baseline.size()));
  }
  struct Entry {
    double value;
    int group;  // 0 = target
    std::size_t index;
  };
  std::vector<Entry> merged;
  merged.reserve(target.size() * 2);
  for (std::size_t i = 0; i < target.size(); ++i) merged.push_back({target[i], 0, i});
  for (std::size_t i = 0; i < baseline.size(); ++i) merged.push_back({baseline[i], 1, i});
  std::sort(merged.begin(), merged.end(), [](const Entry& a, const Entry& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.group != b.group) return a.group < b.group;
    return a.index < b.index;
  });
  return static_cast<std::size_t>(std::count_if(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(target.size()),
                                                [](const Entry& e) { return e.group == 0; }));
}

double EvaluationReport::mean_top_half_fraction() const {
  if (top_half.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : top_half) sum += t.fraction;
  return sum / static_cast<double>(top_half.size());
}

EvaluationReport evaluate_fixture(std::span<const double> target_arps,
                                  const std::vector<std::pair<std::string, std::vector<double>>>& baseline_arps,
                                  double alpha) {
  if (target_arps.empty()) throw Error(Errc::EmptySample, "target group is empty");
  EvaluationReport r;
  r.fixture_mode = true;
  r.alpha = alpha;
  r.holdout_size = target_arps.size();
  r.target_arps.assign(target_arps.begin(), target_arps.end());
  r.baseline_arps = baseline_arps;
  r.descriptives.push_back({std::string(kTargetLabel), descriptive(target_arps)});
  for (const auto& [label, arps] : baseline_arps) {
    r.group_tests.push_back({label, welch_ttest(target_arps, arps, alpha)});
    const std::size_t count = top_half_count(target_arps, arps);
    r.top_half.push_back({label, count, static_cast<double>(count) / static_cast<double>(target_arps.size())});
    r.descriptives.push_back({label, descriptive(arps)});
  }
  return r;
}

EvaluationReport evaluate(const ProtocolInputs& inputs, const CycleConfig& config, const RankOptions& options) {
  RankEngine engine(build_cv_sequence(inputs.train_liked), build_cv_sequence(inputs.train_disliked));

  std::vector<FenRecord> candidates;
  for (const auto& r : inputs.holdout) candidates.push_back(r.fen);
  for (const auto& g : inputs.baseline) {
    for (const auto& r : g.records) candidates.push_back(r.fen);
  }
  auto scores = engine.score_all(candidates, config, options);

  auto arps_of = [](std::span<const CandidateScore> s) {
    std::vector<double> out;
    for (const auto& c : s) out.push_back(c.arp);
    return out;
  };

  const std::size_t n = inputs.holdout.size();
  std::vector<std::pair<std::string, std::vector<double>>> baseline_arps;
  std::vector<GroupScores> baseline_scores;
  std::size_t offset = n;
  for (const auto& g : inputs.baseline) {
    std::span<const CandidateScore> slice(scores.data() + offset, g.records.size());
    baseline_arps.emplace_back(g.label, arps_of(slice));
    baseline_scores.push_back({g.label, {slice.begin(), slice.end()}});
    offset += g.records.size();
  }
  std::span<const CandidateScore> target(scores.data(), n);

  EvaluationReport r = evaluate_fixture(arps_of(target), baseline_arps, config.alpha);
  r.fixture_mode = false;
  r.target_scores.assign(target.begin(), target.end());
  r.baseline_scores = std::move(baseline_scores);
  return r;
}

std::vector<std::pair<std::string, std::vector<double>>> parse_score_csv(std::string_view text) {
  std::vector<std::pair<std::string, std::vector<double>>> cols;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header = true;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto cells = split_csv_line(line);
    if (header) {
      if (cells.size() < 2) throw Error(Errc::Io, "score table needs an id column and at least one score column");
      for (std::size_t i = 1; i < cells.size(); ++i) cols.emplace_back(cells[i], std::vector<double>{});
      header = false;
      continue;
    }
    if (cells.size() != cols.size() + 1) {
      throw Error(Errc::Io, fmt::format("line {}: expected {} cells, found {}", line_no, cols.size() + 1, cells.size()));
    }
    for (std::size_t i = 1; i < cells.size(); ++i) {
      std::string_view cell = cells[i];
      while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
      while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw Error(Errc::Io, fmt::format("line {}: \"{}\" is not a number", line_no, cells[i]));
      }
      cols[i - 1].second.push_back(v);
    }
  }
  if (cols.empty()) throw Error(Errc::Io, "score table is empty");
  return cols;
}

}  // namespace cvrank
