#include "cvrank/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <httplib.h>

#include "cvrank/evaluation.hpp"
#include "cvrank/report.hpp"
#include "cvrank/service.hpp"
#include "cvrank/synthetic.hpp"

namespace cvrank {

namespace {

constexpr std::uint64_t kBaselineStream = 0xBA5E11E5ULL;
constexpr const char* kStoreEnv = "CVRANK_STORE";

struct CycleFlags {
  std::optional<std::size_t> first_min, first_max, inc_min, inc_max, cap, cycles;
  std::optional<double> alpha;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--first-min", first_min, "Smallest first-cycle sample size");
    cmd.add_option("--first-max", first_max, "Largest first-cycle sample size");
    cmd.add_option("--inc-min", inc_min, "Smallest per-cycle size increment");
    cmd.add_option("--inc-max", inc_max, "Largest per-cycle size increment");
    cmd.add_option("--cap", cap, "Sample size cap");
    cmd.add_option("--cycles", cycles, "Number of cycles")->check(CLI::PositiveNumber);
    cmd.add_option("--alpha", alpha, "Significance level")->check(CLI::Range(0.0, 1.0));
  }

  void apply(CycleConfig& c) const {
    if (first_min) c.first_size_min = *first_min;
    if (first_max) c.first_size_max = *first_max;
    if (inc_min) c.increment_min = *inc_min;
    if (inc_max) c.increment_max = *inc_max;
    if (cap) c.size_cap = *cap;
    if (cycles) c.cycles = *cycles;
    if (alpha) c.alpha = *alpha;
  }
};

struct Globals {
  std::string store;
  std::string config_file;
  int verbosity = 0;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

CycleConfig resolve_config(const Globals& g, const CycleFlags& flags, std::optional<std::uint64_t> seed) {
  CycleConfig c;
  if (!g.config_file.empty()) apply_config_text(read_file(g.config_file), c);
  flags.apply(c);
  if (seed) c.seed = *seed;
  c.validate();
  return c;
}

std::pair<PreferenceDb, PreferenceDb> load_pair(const PreferenceStore& store, std::ostream& err) {
  PreferenceDb liked = store.load(Label::Liked);
  PreferenceDb disliked = store.load(Label::Disliked);
  std::vector<std::string> warnings;
  reconcile(liked, disliked, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  return {std::move(liked), std::move(disliked)};
}

int cmd_ingest(const Globals& g, const std::string& path, const std::string& label_text, std::ostream& out,
               std::ostream& err) {
  const Label label = parse_label(label_text);
  PreferenceStore store(g.store);
  const IngestSummary s = store.ingest(path, label);
  out << fmt::format("{} ingested, {} skipped\n", s.ingested, s.skipped());
  if (s.skipped() > 0) {
    err << fmt::format("warning: skipped: {} ({} without FEN, {} invalid FEN, {} duplicate)\n", s.skipped(),
                       s.missing_fen, s.invalid_fen, s.duplicates);
  }
  return kExitOk;
}

int cmd_rank(const Globals& g, const CycleConfig& config, const std::string& candidates_path,
             const std::string& format, std::size_t workers, bool shared_sizes, std::ostream& out, std::ostream& err) {
  const auto candidates = read_candidates(candidates_path);
  PreferenceStore store(g.store);
  auto [liked, disliked] = load_pair(store, err);

  RankOptions options;
  options.workers = workers;
  options.size_mode = shared_sizes ? SizeMode::SharedBatch : SizeMode::PerCandidate;
  const auto started = std::chrono::steady_clock::now();
  const auto ranked =
      rank_collection(candidates, build_cv_sequence(liked), build_cv_sequence(disliked), config, options);
  if (g.verbosity > 0) {
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - started;
    err << fmt::format("ranked {} candidates against {} liked / {} disliked in {:.2f}s\n", ranked.size(),
                       liked.size(), disliked.size(), took.count());
  }
  if (format == "json") {
    out << rank_json(ranked, config).dump(2) << '\n';
  } else {
    out << rank_csv(ranked);
  }
  return kExitOk;
}

struct EvaluateArgs {
  std::size_t holdout = 20;
  std::size_t baseline = 60;
  std::size_t groups = 3;
  bool sequential = false;
  std::string format = "text";
  std::string output;
  std::string fixture_target;
  std::string fixture_baseline;
  std::string target_column;
  std::size_t workers = 0;
};

int cmd_evaluate(const Globals& g, const CycleConfig& config, const EvaluateArgs& a, std::ostream& out,
                 std::ostream& err) {
  EvaluationReport report;
  if (!a.fixture_target.empty() || !a.fixture_baseline.empty()) {
    if (a.fixture_target.empty() || a.fixture_baseline.empty()) {
      throw Error(Errc::InvalidArgument, "fixture mode needs both --fixture-target and --fixture-baseline");
    }
    const auto target_cols = parse_score_csv(read_file(a.fixture_target));
    const auto baseline_cols = parse_score_csv(read_file(a.fixture_baseline));
    const auto* target = &target_cols.back();
    if (!a.target_column.empty()) {
      const auto it = std::find_if(target_cols.begin(), target_cols.end(),
                                   [&](const auto& c) { return c.first == a.target_column; });
      if (it == target_cols.end()) throw Error(Errc::InvalidArgument, fmt::format("no column \"{}\"", a.target_column));
      target = &*it;
    }
    report = evaluate_fixture(target->second, baseline_cols, config.alpha);
  } else {
    PreferenceStore store(g.store);
    auto [liked, disliked] = load_pair(store, err);
    ProtocolParams params;
    params.holdout = a.holdout;
    params.baseline_total = a.baseline;
    params.baseline_groups = a.groups;
    params.selection = a.sequential ? BaselineSelection::Sequential : BaselineSelection::Random;
    Rng rng = Rng::stream(config.seed, kBaselineStream);
    const ProtocolInputs inputs = build_protocol(liked, disliked, params, rng);
    if (g.verbosity > 0) {
      err << fmt::format("training on {} liked / {} disliked; cutoff {}; baseline pool {}\n",
                         inputs.train_liked.size(), inputs.train_disliked.size(), inputs.cutoff.to_string(),
                         inputs.baseline_pool);
    }
    RankOptions options;
    options.workers = a.workers;
    report = evaluate(inputs, config, options);
  }

  const auto json = to_json(report);
  if (!a.output.empty()) write_file_atomic(a.output, json.dump(2) + "\n");
  if (a.format == "json") {
    out << json.dump(2) << '\n';
  } else {
    out << render_text(report);
  }
  return kExitOk;
}

int cmd_stats(const Globals& g, const std::string& db_name, std::ostream& out, std::ostream& err) {
  const Label label = parse_label(db_name);
  PreferenceStore store(g.store);
  const PreferenceDb db = store.load(label);
  if (db.empty()) {
    err << fmt::format("error: {} database in {} is empty\n", label_name(label), g.store);
    return kExitIo;
  }
  const CvSequence seq = build_cv_sequence(db);
  const Descriptive d = descriptive(seq.cvs);
  const bool quantized = std::all_of(seq.cvs.begin(), seq.cvs.end(), [](double cv) {
    const double k = cv / kCvQuantum;
    return k == std::floor(k) && k >= 0.0 && k <= static_cast<double>(kBufferLength);
  });
  out << fmt::format("database: {}\nrecords: {}\n", label_name(label), db.size());
  out << fmt::format("cv mean: {}\ncv median: {}\ncv max: {}\n", format_cv(d.mean), format_cv(d.median),
                     format_cv(d.max));
  out << fmt::format("quantization: {} (every CV a multiple of {})\n", quantized ? "ok" : "FAILED", kCvQuantum);
  out << "index\tcv\tgenerated_at\tfen\n";
  for (std::size_t i = 0; i < seq.size(); ++i) {
    out << fmt::format("{}\t{}\t{}\t{}\n", i + 1, format_cv(seq.cvs[i]), db.records[i].generated_at.to_string(),
                       seq.fens[i].text());
  }
  return quantized ? kExitOk : kExitData;
}

int cmd_serve(const Globals& g, const CycleConfig& config, const std::string& bind, int port, std::size_t workers,
              std::ostream& out) {
  PreferenceStore store(g.store);
  TriageService::Options opts;
  opts.config = config;
  opts.rank.workers = workers;
  TriageService service(store, opts);
  httplib::Server server;
  service.mount(server);
  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port(bind);
  } else if (!server.bind_to_port(bind, port)) {
    throw Error(Errc::Io, fmt::format("cannot bind {}:{}", bind, port));
  }
  if (bound < 0) throw Error(Errc::Io, fmt::format("cannot bind {}", bind));
  out << fmt::format("listening on http://{}:{}/v1\n", bind, bound) << std::flush;
  server.listen_after_bind();
  return kExitOk;
}

int cmd_synth(const std::string& dir, const SyntheticParams& params, const std::string& candidates_path,
              std::size_t candidates_per_side, std::ostream& out) {
  const SyntheticCorpus corpus = make_synthetic(params);
  PreferenceStore store(dir);
  if (store.exists(Label::Liked) || store.exists(Label::Disliked)) {
    throw Error(Errc::Io, fmt::format("{} already holds a store", dir));
  }
  store.ingest_text(to_pgn(corpus.liked), Label::Liked);
  store.ingest_text(to_pgn(corpus.disliked), Label::Disliked);
  out << fmt::format("wrote {} liked and {} disliked records to {}\n", corpus.liked.size(), corpus.disliked.size(),
                     dir);
  if (!candidates_path.empty()) {
    std::string text = "# synthetic candidates: liked-like then disliked-like\n";
    for (const auto& f : synthetic_candidates(params, Label::Liked, candidates_per_side, 1)) text += f.text() + "\n";
    for (const auto& f : synthetic_candidates(params, Label::Disliked, candidates_per_side, 1)) text += f.text() + "\n";
    write_file_atomic(candidates_path, text);
    out << fmt::format("wrote {} candidates to {}\n", 2 * candidates_per_side, candidates_path);
  }
  return kExitOk;
}

}  // namespace

int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::FileNotFound:
    case Errc::Io:
      return kExitIo;
    case Errc::MalformedFen:
    case Errc::IllegalPosition:
    case Errc::FenTooLong:
    case Errc::NoUsableGames:
    case Errc::DuplicateFen:
    case Errc::EmptyDatabase:
    case Errc::SampleTooSmall:
    case Errc::EmptySample:
    case Errc::LengthMismatch:
    case Errc::InvalidDf:
      return kExitData;
    case Errc::DatabaseTooSmall:
    case Errc::HoldoutTooLarge:
    case Errc::InsufficientBaseline:
    case Errc::ChunkSizeMismatch:
      return kExitMethod;
    case Errc::InvalidArgument:
      return kExitUsage;
  }
  return kExitData;
}

void apply_config_text(std::string_view text, CycleConfig& config) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::InvalidArgument, fmt::format("config line {}: expected key = value", line_no));
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    auto bad = [&] { return Error(Errc::InvalidArgument, fmt::format("config line {}: bad value for {}", line_no, key)); };
    auto as_size = [&](std::size_t& field) {
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), field);
      if (ec != std::errc{} || p != value.data() + value.size()) throw bad();
    };
    if (key == "first_size_min") {
      as_size(config.first_size_min);
    } else if (key == "first_size_max") {
      as_size(config.first_size_max);
    } else if (key == "increment_min") {
      as_size(config.increment_min);
    } else if (key == "increment_max") {
      as_size(config.increment_max);
    } else if (key == "size_cap") {
      as_size(config.size_cap);
    } else if (key == "cycles") {
      as_size(config.cycles);
    } else if (key == "seed") {
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), config.seed);
      if (ec != std::errc{} || p != value.data() + value.size()) throw bad();
    } else if (key == "alpha") {
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), config.alpha);
      if (ec != std::errc{} || p != value.data() + value.size()) throw bad();
    } else {
      throw Error(Errc::InvalidArgument, fmt::format("config line {}: unknown key \"{}\"", line_no, key));
    }
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rank chess compositions by learned single-user preference", "cvrank"};
  app.require_subcommand(1);

  Globals g;
  if (const char* env = std::getenv(kStoreEnv); env && *env) g.store = env;
  if (g.store.empty()) g.store = "store";
  app.add_option("--store", g.store, fmt::format("Store directory (env {})", kStoreEnv));
  app.add_option("--config", g.config_file, "key=value file overriding cycle settings")->check(CLI::ExistingFile);
  app.add_flag("-v,--verbose", g.verbosity, "More diagnostics on stderr");

  std::string pgn_path;
  std::string label;
  auto* ingest = app.add_subcommand("ingest", "Add a PGN database to the store");
  ingest->add_option("pgn", pgn_path, "PGN file")->required();
  ingest->add_option("--label", label, "liked or disliked")->required()->check(CLI::IsMember({"liked", "disliked"}));

  std::string candidates_path;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::size_t workers = 0;
  bool shared_sizes = false;
  CycleFlags rank_flags;
  auto* rank = app.add_subcommand("rank", "Rank candidate positions by average rank percentage");
  rank->add_option("candidates", candidates_path, "PGN or one FEN per line")->required();
  rank->add_option("--seed", seed, "Random seed");
  rank->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  rank->add_option("--workers", workers, "Worker threads (0 = all cores)");
  rank->add_flag("--shared-sizes", shared_sizes, "Draw one set of sample sizes for the whole batch");
  rank_flags.add_to(*rank);

  EvaluateArgs ev;
  CycleFlags eval_flags;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Holdout evaluation against baseline disliked groups");
  evaluate_cmd->add_option("--holdout", ev.holdout, "Most recent liked records held out")->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--baseline", ev.baseline, "Post-cutoff disliked records drawn")->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--groups", ev.groups, "Baseline groups")->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--seed", seed, "Random seed");
  evaluate_cmd->add_flag("--sequential", ev.sequential, "Take baseline records in order instead of at random");
  evaluate_cmd->add_option("--format", ev.format, "text or json")->check(CLI::IsMember({"text", "json"}));
  evaluate_cmd->add_option("--output", ev.output, "Also write the JSON report here");
  evaluate_cmd->add_option("--fixture-target", ev.fixture_target, "CSV of target-group ARPs")
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--fixture-baseline", ev.fixture_baseline, "CSV of baseline-group ARPs, one column each")
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--target-column", ev.target_column, "Target CSV column (default: last)");
  evaluate_cmd->add_option("--workers", ev.workers, "Worker threads (0 = all cores)");
  eval_flags.add_to(*evaluate_cmd);

  std::string db_name;
  auto* stats = app.add_subcommand("stats", "Change-value statistics of one database");
  stats->add_option("--db", db_name, "liked or disliked")->required()->check(CLI::IsMember({"liked", "disliked"}));

  std::string bind = "127.0.0.1";
  int port = 8080;
  CycleFlags serve_flags;
  auto* serve = app.add_subcommand("serve", "Run the local triage HTTP service");
  serve->add_option("--bind", bind, "Bind address");
  serve->add_option("--port", port, "Port (0 = any free port)")->check(CLI::Range(0, 65535));
  serve->add_option("--workers", workers, "Worker threads (0 = all cores)");
  serve->add_option("--seed", seed, "Default random seed for jobs");
  serve_flags.add_to(*serve);

  std::string synth_dir;
  std::string synth_candidates;
  std::size_t synth_candidate_count = 20;
  SyntheticParams sp;
  auto* synth = app.add_subcommand("synth", "Write a synthetic demo store");
  synth->add_option("--out", synth_dir, "Store directory to create")->required();
  synth->add_option("--seed", sp.seed, "Generator seed");
  synth->add_option("--liked", sp.liked_train, "Liked records before the cutoff");
  synth->add_option("--disliked", sp.disliked_train, "Disliked records before the cutoff");
  synth->add_option("--liked-tail", sp.liked_tail, "Liked records after the cutoff");
  synth->add_option("--disliked-tail", sp.disliked_tail, "Disliked records after the cutoff");
  synth->add_option("--candidates", synth_candidates, "Also write a candidate FEN list here");
  synth->add_option("--candidate-count", synth_candidate_count, "Candidates per family");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(g, pgn_path, label, out, err);
    if (rank->parsed()) {
      return cmd_rank(g, resolve_config(g, rank_flags, seed), candidates_path, format, workers, shared_sizes, out,
                      err);
    }
    if (evaluate_cmd->parsed()) return cmd_evaluate(g, resolve_config(g, eval_flags, seed), ev, out, err);
    if (stats->parsed()) return cmd_stats(g, db_name, out, err);
    if (serve->parsed()) return cmd_serve(g, resolve_config(g, serve_flags, seed), bind, port, workers, out);
    if (synth->parsed()) return cmd_synth(synth_dir, sp, synth_candidates, synth_candidate_count, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace cvrank
