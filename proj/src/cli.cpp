// Subcommand implementations behind the actlang executable.

#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "actlang/actlang.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace actlang;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitMismatch = 3;
constexpr int kExitInternal = 4;

// Bookkeeping for one invocation; becomes the run manifest.
struct Run {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  std::vector<std::string> inputs;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, hash
  std::uint64_t seed = 0;
  std::string manifest_path;

  std::string read(const std::string& path) {
    inputs.push_back(path);
    return io::read_file(path);
  }

  void write(const std::string& path, const std::string& content) {
    io::write_file_atomic(path, content);
    outputs.emplace_back(path, io::hex64(io::fnv1a64(content)));
  }

  json manifest() const {
    json m;
    m["tool"] = "actlang";
    m["version"] = kVersion;
    m["command"] = command;
    m["argv"] = argv;
    m["seed"] = seed;
    m["config"] = config;
    auto in = json::array();
    for (const auto& p : inputs) in.push_back({{"path", p}, {"fnv1a64", io::file_hash(p)}});
    m["inputs"] = std::move(in);
    auto out = json::array();
    for (const auto& [p, h] : outputs) out.push_back({{"path", p}, {"fnv1a64", h}});
    m["outputs"] = std::move(out);
    return m;
  }
};

DatasetProfile parse_profile(const std::string& s) {
  if (auto p = dataset_profile_from_string(s)) return *p;
  if (s == "emaki") return DatasetProfile::EmakiLike;
  if (s == "buffalo") return DatasetProfile::BuffaloLike;
  throw ConfigError("unknown dataset profile '" + s + "' (use emaki or buffalo)");
}

Modality parse_modality(const std::string& s) {
  if (auto m = modality_from_string(s)) return *m;
  throw ConfigError("unknown modality '" + s + "' (use mouse, keyboard or joint)");
}

Session load_session(Run& run, const std::string& path, std::optional<DatasetProfile> profile = std::nullopt) {
  const auto text = run.read(path);
  return parse_events(text, profile);
}

io::TokenFile load_tokens(Run& run, const std::string& path) {
  std::istringstream in(run.read(path));
  return io::read_token_file(in);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<TokenizedTrial> filter_participants(std::vector<TokenizedTrial> trials, const std::string& list) {
  if (list.empty()) return trials;
  const auto wanted = split_list(list);
  const std::set<std::string> keep(wanted.begin(), wanted.end());
  std::vector<TokenizedTrial> out;
  for (auto& t : trials)
    if (keep.count(t.participant_id)) out.push_back(std::move(t));
  if (out.empty()) throw ValidationError("no trials belong to the requested participants");
  return out;
}

bpe::Corpus corpus_of(const io::TokenFile& f) {
  bpe::Corpus corpus;
  for (const auto& t : f.trials) corpus.push_back(f.alphabet.ids_of(t.tokens));
  return corpus;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / p.stem()).string() + suffix;
}

// Modality and profile implied by a vocabulary's atoms.
std::pair<std::string, std::string> describe_atoms(const Alphabet& atoms) {
  bool mouse = false, keys = false, click = false, down = false;
  for (const auto& text : atoms.texts()) {
    const auto tok = token_from_text(text);
    if (const auto* m = std::get_if<MouseToken>(&tok)) {
      mouse = true;
      click |= m->action == MouseAction::Click;
      down |= m->action == MouseAction::Down;
    } else if (std::holds_alternative<KeyToken>(tok)) {
      keys = true;
    }
  }
  const std::string modality = mouse && keys ? "joint" : mouse ? "mouse" : "keyboard";
  const std::string profile = click ? "BuffaloLike" : down ? "EmakiLike" : "unknown";
  return {modality, profile};
}

// Options shared by train and cross-validate.
struct PipelineOptions {
  std::string method = "bpe";
  int k = 300;
  bool bpe_on_trials = false;
  int ae_depth = 1;
  int ae_epochs = 10;
  int layers = 2;
  int heads = 4;
  int d_model = 16;
  int ff_multiplier = 4;
  double dropout = 0.5;
  double label_smoothing = 0.1;
  double lr = 1e-3;
  double weight_decay = 0.01;
  int epochs = 30;
  int batch = 64;
  int window = 150;
  double train_fraction = 1.0;

  void add(CLI::App* app) {
    app->add_option("--method", method, "noenc | ae | bpe")->check(CLI::IsMember({"noenc", "ae", "bpe"}));
    app->add_option("--k", k, "BPE merges")->check(CLI::PositiveNumber);
    app->add_flag("--bpe-on-trials", bpe_on_trials, "learn merges from whole trials instead of windows");
    app->add_option("--ae-depth", ae_depth, "autoencoder depth")->check(CLI::Range(1, 3));
    app->add_option("--ae-epochs", ae_epochs, "autoencoder epochs")->check(CLI::PositiveNumber);
    app->add_option("--layers", layers, "Transformer layers")->check(CLI::PositiveNumber);
    app->add_option("--heads", heads, "attention heads")->check(CLI::PositiveNumber);
    app->add_option("--dmodel", d_model, "model width")->check(CLI::PositiveNumber);
    app->add_option("--ff-mult", ff_multiplier, "feed-forward width multiplier")->check(CLI::PositiveNumber);
    app->add_option("--dropout", dropout)->check(CLI::Range(0.0, 0.99));
    app->add_option("--label-smoothing", label_smoothing)->check(CLI::Range(0.0, 0.99));
    app->add_option("--lr", lr, "learning rate")->check(CLI::PositiveNumber);
    app->add_option("--weight-decay", weight_decay)->check(CLI::NonNegativeNumber);
    app->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
    app->add_option("--batch", batch)->check(CLI::PositiveNumber);
    app->add_option("--window", window, "window length in tokens")->check(CLI::PositiveNumber);
    app->add_option("--train-fraction", train_fraction)->check(CLI::Range(0.0, 1.0));
  }

  classifier::PipelineConfig build(const io::TokenFile& f, std::uint64_t seed) const {
    classifier::PipelineConfig c;
    c.method = *classifier::encoding_method_from_string(method);
    c.bpe_k = k;
    c.bpe_on_trials = bpe_on_trials;
    c.ae_depth = ae_depth;
    c.autoencoder.epochs = ae_epochs;
    c.classifier.num_layers = layers;
    c.classifier.heads = heads;
    c.classifier.d_model = d_model;
    c.classifier.ff_multiplier = ff_multiplier;
    c.classifier.dropout = dropout;
    c.classifier.label_smoothing = label_smoothing;
    c.classifier.learning_rate = lr;
    c.classifier.weight_decay = weight_decay;
    c.classifier.epochs = epochs;
    c.classifier.batch_size = batch;
    c.modality = f.modality;
    c.profile = f.profile;
    c.window_length = window;
    c.train_fraction = train_fraction;
    c.seed = seed;
    c.classifier.validate();
    if (train_fraction <= 0) throw ConfigError("--train-fraction must be > 0");
    return c;
  }
};

void require_trials(const io::TokenFile& f) {
  if (f.window_length > 0) throw ValidationError("expected a whole-trial token file, got a windowed one");
}

}  // namespace

namespace actlang::cli {
int run_cli(std::vector<std::string> args, bool allow_rerun);
}
using actlang::cli::run_cli;

namespace {

int run_rerun(const std::string& manifest_path) {
  json m;
  try {
    m = json::parse(io::read_file(manifest_path));
  } catch (const json::exception& e) {
    throw LoadError("manifest is not valid JSON: " + std::string(e.what()));
  }
  for (const auto& in : m.at("inputs")) {
    const auto path = in.at("path").get<std::string>();
    if (io::file_hash(path) != in.at("fnv1a64").get<std::string>())
      throw ValidationError("input " + path + " changed since the manifest was written");
  }
  const auto args = m.at("argv").get<std::vector<std::string>>();
  const int rc = run_cli(args, false);
  if (rc != kExitOk) return rc;
  int mismatches = 0;
  for (const auto& out : m.at("outputs")) {
    const auto path = out.at("path").get<std::string>();
    const auto now = io::file_hash(path);
    if (now != out.at("fnv1a64").get<std::string>()) {
      std::cerr << "actlang: output " << path << " differs from the manifest\n";
      ++mismatches;
    }
  }
  if (mismatches) return kExitMismatch;
  std::cout << "reproduced " << m.at("outputs").size() << " output(s) byte for byte\n";
  return kExitOk;
}

}  // namespace

int actlang::cli::run_cli(std::vector<std::string> args, bool allow_rerun) {
  CLI::App app{"actlang: tokenise keyboard and mouse logs, learn activity vocabularies, recognise tasks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  Run run;
  run.argv = args;
  std::uint64_t seed = 0;
  std::string manifest;
  bool timing = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--manifest", manifest, "manifest path (default: <first output>.manifest.json)");
  };

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic session with planted motifs");
  std::string synth_out, synth_truth, synth_profiles, synth_profile = "emaki";
  int synth_participants = 12, synth_tasks = 3, synth_trials = 3, synth_events = 900, synth_window = 150;
  double synth_variation = 0.15;
  synth_cmd->add_option("--out", synth_out, "events JSONL")->required();
  synth_cmd->add_option("--truth", synth_truth, "ground-truth JSONL (default: <out>.truth.jsonl)");
  synth_cmd->add_option("--profiles", synth_profiles, "JSON file with task profiles");
  synth_cmd->add_option("--dataset-profile", synth_profile, "emaki | buffalo");
  synth_cmd->add_option("--participants", synth_participants)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--tasks", synth_tasks, "number of built-in task profiles")->check(CLI::Range(1, 3));
  synth_cmd->add_option("--trials", synth_trials, "trials per task")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--events", synth_events, "events per trial")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--window", synth_window, "window length motif rates refer to")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--variation", synth_variation, "per-participant perturbation")->check(CLI::Range(0.0, 1.0));
  common(synth_cmd);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "validate a raw log and write it with normalised coordinates");
  std::string ingest_in, ingest_out, ingest_profile;
  ingest_cmd->add_option("--in", ingest_in)->required();
  ingest_cmd->add_option("--out", ingest_out)->required();
  ingest_cmd->add_option("--dataset-profile", ingest_profile, "emaki | buffalo (default: inferred)");
  common(ingest_cmd);

  // tokenize
  auto* tok_cmd = app.add_subcommand("tokenize", "turn an event log into action tokens");
  std::string tok_in, tok_out, tok_modality = "joint", tok_profile;
  int tok_window = 0;
  IdtConfig idt;
  tok_cmd->add_option("--in", tok_in)->required();
  tok_cmd->add_option("--out", tok_out)->required();
  tok_cmd->add_option("--modality", tok_modality, "mouse | keyboard | joint");
  tok_cmd->add_option("--dataset-profile", tok_profile, "emaki | buffalo (default: inferred)");
  tok_cmd->add_option("--window", tok_window, "emit fixed windows of this many tokens instead of trials");
  tok_cmd->add_option("--duration-ms", idt.duration_threshold_ms, "pinpoint duration threshold")->check(CLI::PositiveNumber);
  tok_cmd->add_option("--dispersion", idt.dispersion_threshold, "pinpoint dispersion threshold")->check(CLI::PositiveNumber);
  common(tok_cmd);

  // learn-vocab
  auto* learn_cmd = app.add_subcommand("learn-vocab", "learn BPE merges over a token file");
  std::string learn_tokens, learn_out, learn_participants;
  int learn_k = 300;
  learn_cmd->add_option("--tokens", learn_tokens)->required();
  learn_cmd->add_option("--out", learn_out)->required();
  learn_cmd->add_option("--k", learn_k, "merges to learn")->check(CLI::PositiveNumber);
  learn_cmd->add_option("--participants", learn_participants, "comma-separated subset to learn from");
  common(learn_cmd);

  // encode
  auto* enc_cmd = app.add_subcommand("encode", "encode a token file with a vocabulary");
  std::string enc_tokens, enc_vocab, enc_out;
  enc_cmd->add_option("--tokens", enc_tokens)->required();
  enc_cmd->add_option("--vocab", enc_vocab)->required();
  enc_cmd->add_option("--out", enc_out, "CSV")->required();
  common(enc_cmd);

  // vocab-stats
  auto* stats_cmd = app.add_subcommand("vocab-stats", "activity length statistics for vocabularies");
  std::vector<std::string> stats_vocabs;
  std::string stats_out, stats_modality, stats_profile;
  stats_cmd->add_option("--vocab", stats_vocabs, "vocabulary file (repeatable)")->required();
  stats_cmd->add_option("--out", stats_out, "CSV; histograms go to the same path with a .hist.json extension")->required();
  stats_cmd->add_option("--modality", stats_modality, "override the modality column");
  stats_cmd->add_option("--dataset-profile", stats_profile, "override the dataset_profile column");
  common(stats_cmd);

  // top-activities
  auto* top_cmd = app.add_subcommand("top-activities", "most frequent activities after encoding");
  std::string top_tokens, top_vocab, top_out;
  int top_n = 10;
  bool top_merged = false;
  top_cmd->add_option("--tokens", top_tokens)->required();
  top_cmd->add_option("--vocab", top_vocab)->required();
  top_cmd->add_option("--out", top_out, "JSON")->required();
  top_cmd->add_option("--n", top_n)->check(CLI::PositiveNumber);
  top_cmd->add_flag("--merged-only", top_merged, "only activities longer than one atom");
  common(top_cmd);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a task classifier on all given participants");
  std::string train_tokens, train_out, train_participants;
  PipelineOptions train_opts;
  train_cmd->add_option("--tokens", train_tokens)->required();
  train_cmd->add_option("--out", train_out, "model JSON")->required();
  train_cmd->add_option("--participants", train_participants, "comma-separated subset to train on");
  train_opts.add(train_cmd);
  common(train_cmd);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score a trained model on a token file");
  std::string eval_model, eval_tokens, eval_out, eval_participants;
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--tokens", eval_tokens)->required();
  eval_cmd->add_option("--out", eval_out, "JSON")->required();
  eval_cmd->add_option("--participants", eval_participants, "comma-separated subset to score");
  common(eval_cmd);

  // cross-validate
  auto* cv_cmd = app.add_subcommand("cross-validate", "participant-independent k-fold evaluation");
  std::string cv_tokens, cv_out;
  int cv_folds = 5, cv_jobs = 1;
  PipelineOptions cv_opts;
  cv_cmd->add_option("--tokens", cv_tokens)->required();
  cv_cmd->add_option("--out", cv_out, "CSV; details go to the same path with a .json extension")->required();
  cv_cmd->add_option("--folds", cv_folds)->check(CLI::Range(2, 1000));
  cv_cmd->add_option("--jobs", cv_jobs, "folds trained in parallel")->check(CLI::PositiveNumber);
  cv_cmd->add_flag("--timing", timing, "fill the seconds column (makes output non-reproducible)");
  cv_opts.add(cv_cmd);
  common(cv_cmd);

  // fitts
  auto* fitts_cmd = app.add_subcommand("fitts", "per-participant Fitts's-law regression");
  std::string fitts_in, fitts_out;
  fitts_cmd->add_option("--in", fitts_in, "CSV with participant,d,w,mt")->required();
  fitts_cmd->add_option("--out", fitts_out)->required();
  common(fitts_cmd);

  // proficiency
  auto* prof_cmd = app.add_subcommand("proficiency", "per-participant keyboard proficiency");
  std::string prof_in, prof_out;
  prof_cmd->add_option("--in", prof_in, "events JSONL")->required();
  prof_cmd->add_option("--out", prof_out)->required();
  common(prof_cmd);

  // task-distance
  auto* dist_cmd = app.add_subcommand("task-distance", "mean mouse-trajectory distance between tasks");
  std::string dist_in, dist_out;
  std::size_t dist_points = 101;
  dist_cmd->add_option("--in", dist_in, "events JSONL")->required();
  dist_cmd->add_option("--out", dist_out)->required();
  dist_cmd->add_option("--points", dist_points, "resampled points per trajectory")->check(CLI::Range(2, 100000));
  common(dist_cmd);

  // rerun
  auto* rerun_cmd = app.add_subcommand("rerun", "re-execute a manifest and verify its outputs");
  std::string rerun_manifest;
  rerun_cmd->add_option("manifest", rerun_manifest)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  auto* sub = app.get_subcommands().front();
  run.command = sub->get_name();
  run.seed = seed;

  if (sub == rerun_cmd) {
    if (!allow_rerun) throw ConfigError("a manifest cannot rerun another manifest");
    return run_rerun(rerun_manifest);
  }

  if (sub == synth_cmd) {
    synth::SynthConfig cfg;
    cfg.participants = synth_participants;
    cfg.trials_per_task = synth_trials;
    cfg.events_per_trial = synth_events;
    cfg.window_length = synth_window;
    cfg.dataset_profile = parse_profile(synth_profile);
    cfg.participant_variation = synth_variation;
    cfg.seed = seed;
    if (!synth_profiles.empty()) {
      const auto j = json::parse(run.read(synth_profiles));
      for (const auto& p : j.at("profiles")) cfg.profiles.push_back(p.get<synth::TaskProfile>());
    } else {
      cfg.profiles = synth::reference_profiles(cfg.dataset_profile, synth_tasks);
    }
    const auto out = synth::generate(cfg);
    run.config = {{"participants", cfg.participants},
                  {"trials_per_task", cfg.trials_per_task},
                  {"events_per_trial", cfg.events_per_trial},
                  {"window_length", cfg.window_length},
                  {"dataset_profile", std::string(to_string(cfg.dataset_profile))},
                  {"participant_variation", cfg.participant_variation},
                  {"profiles", json::parse(nlohmann::json(cfg.profiles).dump())}};
    std::ostringstream events, truth;
    serialize_events(out.session, events);
    synth::write_ground_truth(out.truth, truth);
    run.write(synth_out, events.str());
    run.write(synth_truth.empty() ? with_suffix(synth_out, ".truth.jsonl") : synth_truth, truth.str());
    std::cout << out.session.trials.size() << " trials written to " << synth_out << "\n";
  } else if (sub == ingest_cmd) {
    std::optional<DatasetProfile> profile;
    if (!ingest_profile.empty()) profile = parse_profile(ingest_profile);
    const auto session = normalize_coords(load_session(run, ingest_in, profile));
    run.config = {{"dataset_profile", std::string(to_string(session.dataset_profile))}};
    std::ostringstream out;
    serialize_events(session, out);
    run.write(ingest_out, out.str());
    std::size_t events = 0;
    std::set<std::string> participants;
    for (const auto& t : session.trials) {
      events += t.events.size();
      participants.insert(t.participant_id);
    }
    std::cout << participants.size() << " participants, " << session.trials.size() << " trials, " << events
              << " events (" << to_string(session.dataset_profile) << ")\n";
  } else if (sub == tok_cmd) {
    idt.validate();
    const auto modality = parse_modality(tok_modality);
    std::optional<DatasetProfile> profile;
    if (!tok_profile.empty()) profile = parse_profile(tok_profile);
    const auto session = normalize_coords(load_session(run, tok_in, profile));
    io::TokenFile f;
    f.profile = session.dataset_profile;
    f.modality = modality;
    f.alphabet = Alphabet::build(session.dataset_profile, modality, distinct_keys(session));
    auto trials = tokenize_session(session, modality, idt);
    if (tok_window > 0) {
      f.window_length = tok_window;
      for (auto& w : segment_windows(trials, tok_window, modality))
        f.trials.push_back({w.participant_id, w.task_id, w.trial_index, std::move(w.tokens)});
    } else {
      f.trials = std::move(trials);
    }
    run.config = {{"modality", std::string(to_string(modality))},
                  {"window_length", tok_window},
                  {"duration_ms", idt.duration_threshold_ms},
                  {"dispersion", idt.dispersion_threshold},
                  {"alphabet_size", f.alphabet.size()}};
    run.write(tok_out, io::write_token_file(f));
    std::cout << f.trials.size() << (tok_window > 0 ? " windows" : " trials") << ", alphabet " << f.alphabet.size()
              << "\n";
  } else if (sub == learn_cmd) {
    auto f = load_tokens(run, learn_tokens);
    f.trials = filter_participants(std::move(f.trials), learn_participants);
    bpe::LearnTrace trace;
    const auto vocab = bpe::learn(corpus_of(f), f.alphabet, learn_k, &trace);
    run.config = {{"k", learn_k}, {"participants", learn_participants}, {"modality", std::string(to_string(f.modality))}};
    run.write(learn_out, bpe::save_vocab(vocab));
    std::cout << "vocabulary: " << vocab.atoms().size() << " atoms + " << vocab.merges().size() << " merges = "
              << vocab.size() << (static_cast<int>(vocab.merges().size()) < learn_k ? " (stopped early)" : "")
              << "\n";
  } else if (sub == enc_cmd) {
    const auto f = load_tokens(run, enc_tokens);
    const auto vocab = bpe::load_vocab(run.read(enc_vocab));
    if (!(vocab.atoms() == f.alphabet))
      throw ValidationError("vocabulary atoms do not match the token file's alphabet (different profile, modality or keys)");
    std::string out = io::csv_row({"participant", "task", "trial", "activities"});
    for (const auto& t : f.trials) {
      const auto ids = bpe::encode(std::span<const ActionToken>(t.tokens), vocab);
      std::string line;
      for (int id : ids) line += (line.empty() ? "" : " ") + std::to_string(id);
      out += io::csv_row({t.participant_id, t.task_id, std::to_string(t.trial_index), line});
    }
    run.write(enc_out, out);
  } else if (sub == stats_cmd) {
    std::string csv = io::csv_row({"modality", "dataset_profile", "k", "size", "min", "median", "max"});
    json hist = json::array();
    for (const auto& path : stats_vocabs) {
      const auto vocab = bpe::load_vocab(run.read(path));
      const auto s = analytics::vocab_stats(vocab);
      auto [modality, profile] = describe_atoms(vocab.atoms());
      if (!stats_modality.empty()) modality = stats_modality;
      if (!stats_profile.empty()) profile = stats_profile;
      csv += io::csv_row({modality, profile, std::to_string(vocab.k_requested()), std::to_string(s.vocab_size),
                          std::to_string(s.length_min), std::to_string(s.length_median), std::to_string(s.length_max)});
      json h = json::object();
      for (const auto& [len, count] : s.length_histogram) h[std::to_string(len)] = count;
      hist.push_back({{"vocab", path},
                      {"modality", modality},
                      {"dataset_profile", profile},
                      {"k", vocab.k_requested()},
                      {"size", s.vocab_size},
                      {"length_histogram", std::move(h)}});
    }
    run.write(stats_out, csv);
    run.write(with_suffix(stats_out, ".hist.json"), hist.dump(1) + "\n");
  } else if (sub == top_cmd) {
    const auto f = load_tokens(run, top_tokens);
    const auto vocab = bpe::load_vocab(run.read(top_vocab));
    if (!(vocab.atoms() == f.alphabet)) throw ValidationError("vocabulary atoms do not match the token file's alphabet");
    const auto top = analytics::top_frequent(corpus_of(f), vocab, top_n, top_merged);
    json out = json::array();
    int rank = 0;
    for (const auto& a : top) {
      std::vector<std::string> atoms;
      for (int id : vocab.expansion(a.activity_id)) atoms.push_back(vocab.atoms().text(id));
      out.push_back({{"rank", ++rank},
                     {"activity_id", a.activity_id},
                     {"rendered", a.rendered},
                     {"atoms", atoms},
                     {"length", atoms.size()},
                     {"count", a.count}});
    }
    run.config = {{"n", top_n}, {"merged_only", top_merged}};
    run.write(top_out, out.dump(1) + "\n");
  } else if (sub == train_cmd) {
    auto f = load_tokens(run, train_tokens);
    require_trials(f);
    f.trials = filter_participants(std::move(f.trials), train_participants);
    const auto cfg = train_opts.build(f, seed);
    run.config = classifier::config_echo(cfg);
    run.config["participants"] = train_participants;
    auto trained = classifier::train_pipeline(f.trials, f.alphabet, cfg);
    io::ModelBundle bundle;
    bundle.context = trained.context;
    bundle.config = cfg.classifier;
    bundle.config.seed = cfg.seed;
    bundle.shape = trained.shape;
    bundle.model = std::make_unique<classifier::Model>(std::move(trained.outcome.model));
    auto j = io::save_model(bundle);
    j["training"] = {{"windows", trained.train_windows}, {"epoch_losses", trained.outcome.epoch_losses}};
    run.write(train_out, j.dump() + "\n");
    std::cout << trained.context.method_label() << " trained on " << trained.train_windows << " windows, final loss "
              << trained.outcome.epoch_losses.back() << "\n";
  } else if (sub == eval_cmd) {
    auto bundle = io::load_model(nlohmann::json::parse(run.read(eval_model)));
    auto f = load_tokens(run, eval_tokens);
    require_trials(f);
    f.trials = filter_participants(std::move(f.trials), eval_participants);
    if (!(f.alphabet == bundle.context.atoms)) throw ValidationError("token file alphabet differs from the model's");
    if (f.modality != bundle.context.modality) throw ValidationError("token file modality differs from the model's");
    const auto e = classifier::evaluate_pipeline(*bundle.model, bundle.context, f.trials);
    const auto C = bundle.context.classes.size();
    std::vector<std::vector<int>> confusion(C, std::vector<int>(C, 0));
    for (std::size_t i = 0; i < e.y_true.size(); ++i)
      ++confusion[static_cast<std::size_t>(e.y_true[i])][static_cast<std::size_t>(e.y_pred[i])];
    json out = {{"method", bundle.context.method_label()},
                {"classes", bundle.context.classes},
                {"windows", e.y_true.size()},
                {"macro_f1", e.macro_f1},
                {"confusion", confusion}};
    run.write(eval_out, out.dump(1) + "\n");
    std::cout << "macro F1 " << e.macro_f1 << " over " << e.y_true.size() << " windows\n";
  } else if (sub == cv_cmd) {
    const auto f = load_tokens(run, cv_tokens);
    require_trials(f);
    auto cfg = cv_opts.build(f, seed);
    cfg.folds = cv_folds;
    cfg.jobs = cv_jobs;
    run.config = classifier::config_echo(cfg);
    run.config["timing"] = timing;
    const auto report = classifier::cross_validate(f.trials, f.alphabet, cfg);
    std::string csv = io::csv_row({"dataset_profile", "modality", "L_win", "method", "fold", "macro_f1", "seconds"});
    json folds = json::array();
    for (const auto& r : report.folds) {
      const double secs = timing ? r.seconds : 0.0;
      csv += io::csv_row({std::string(to_string(f.profile)), std::string(to_string(f.modality)),
                          std::to_string(cfg.window_length), report.method_label, std::to_string(r.fold),
                          io::format_double(r.macro_f1), io::format_double(secs)});
      folds.push_back({{"fold", r.fold},
                       {"test_participants", r.test_participants},
                       {"train_windows", r.train_windows},
                       {"test_windows", r.test_windows},
                       {"input_vocab_size", r.vocab_size},
                       {"macro_f1", r.macro_f1},
                       {"epoch_losses", r.epoch_losses}});
    }
    json details = {{"config", run.config},
                    {"method", report.method_label},
                    {"classes", report.classes},
                    {"mean_macro_f1", report.mean_f1()},
                    {"sd_macro_f1", report.sd_f1()},
                    {"folds", std::move(folds)}};
    run.write(cv_out, csv);
    run.write(with_suffix(cv_out, ".json"), details.dump(1) + "\n");
    std::cout << report.method_label << ": macro F1 " << report.mean_f1() << " +- " << report.sd_f1() << " over "
              << report.folds.size() << " folds\n";
  } else if (sub == fitts_cmd) {
    std::istringstream in(run.read(fitts_in));
    std::string line;
    std::map<std::string, std::vector<metrics::FittsTrial>> by_participant;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line_no == 1) continue;  // header
      const auto cols = split_list(line);
      if (cols.size() != 4) throw ParseError(line_no, "expected participant,d,w,mt");
      try {
        by_participant[cols[0]].push_back({std::stod(cols[1]), std::stod(cols[2]), std::stod(cols[3])});
      } catch (const std::exception&) {
        throw ParseError(line_no, "non-numeric Fitts field");
      }
    }
    std::string csv = io::csv_row({"participant", "a", "b"});
    for (const auto& [p, trials] : by_participant) {
      metrics::FittsFit fit;
      try {
        fit = metrics::fitts_fit(trials);
      } catch (const std::exception& e) {
        throw ValidationError("participant " + p + ": " + e.what());
      }
      csv += io::csv_row({p, io::format_double(fit.a), io::format_double(fit.b)});
    }
    run.write(fitts_out, csv);
  } else if (sub == prof_cmd) {
    const auto session = load_session(run, prof_in);
    std::map<std::string, std::vector<metrics::KeyboardProficiency>> by_participant;
    for (const auto& t : session.trials) {
      try {
        by_participant[t.participant_id].push_back(metrics::keyboard_proficiency(t.events));
      } catch (const ValidationError&) {
        by_participant[t.participant_id];  // trial without completed presses
      }
    }
    std::string csv = io::csv_row({"participant", "mean_press_s", "keys_per_min"});
    for (const auto& [p, parts] : by_participant) {
      double press_s = 0, minutes = 0;
      std::size_t presses = 0;
      for (const auto& k : parts) {
        press_s += k.mean_press_s * static_cast<double>(k.presses);
        presses += k.presses;
        minutes += k.span_minutes;
      }
      if (presses == 0) {
        std::cerr << "actlang: participant " << p << " has no completed key press; skipped\n";
        continue;
      }
      csv += io::csv_row({p, io::format_double(press_s / static_cast<double>(presses)),
                          io::format_double(static_cast<double>(presses) / minutes)});
    }
    run.write(prof_out, csv);
  } else if (sub == dist_cmd) {
    const auto session = normalize_coords(load_session(run, dist_in));
    std::map<std::string, std::vector<metrics::Trajectory>> by_task;
    for (const auto& t : session.trials) {
      auto traj = metrics::trajectory_of(t);
      if (traj.size() >= 2) by_task[t.task_id].push_back(std::move(traj));
    }
    std::string csv = io::csv_row({"task_A", "task_B", "distance"});
    for (auto a = by_task.begin(); a != by_task.end(); ++a)
      for (auto b = a; b != by_task.end(); ++b)
        csv += io::csv_row({a->first, b->first,
                            io::format_double(metrics::task_distance(a->second, b->second, dist_points))});
    run.config = {{"points", dist_points}};
    run.write(dist_out, csv);
  }

  if (!run.outputs.empty()) {
    const auto path = manifest.empty() ? run.outputs.front().first + ".manifest.json" : manifest;
    io::write_file_atomic(path, run.manifest().dump(1) + "\n");
  }
  return kExitOk;
}

int actlang::cli::run_main(const std::vector<std::string>& args) {
  try {
    return run_cli(args, true);
  } catch (const ParseError& e) {
    std::cerr << "actlang: parse error: " << e.what() << "\n";
  } catch (const ProfileConflictError& e) {
    std::cerr << "actlang: profile conflict: " << e.what() << "\n";
  } catch (const LoadError& e) {
    std::cerr << "actlang: cannot load: " << e.what() << "\n";
  } catch (const ConfigError& e) {
    std::cerr << "actlang: bad configuration: " << e.what() << "\n";
  } catch (const std::runtime_error& e) {
    std::cerr << "actlang: " << e.what() << "\n";
  } catch (const std::invalid_argument& e) {
    std::cerr << "actlang: " << e.what() << "\n";
  } catch (const json::exception& e) {
    std::cerr << "actlang: malformed JSON: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "actlang: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitData;
}
