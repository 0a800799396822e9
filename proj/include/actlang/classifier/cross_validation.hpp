#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "actlang/bpe.hpp"
#include "actlang/classifier/autoencoder.hpp"
#include "actlang/classifier/config.hpp"
#include "actlang/classifier/dataset.hpp"
#include "actlang/classifier/training.hpp"
#include "actlang/errors.hpp"
#include "actlang/tokenizer.hpp"

namespace actlang::classifier {

// Train fractions from the data-amount sweep.
inline constexpr double kReferenceTrainFractions[] = {0.01, 0.05, 0.15, 0.25, 0.5, 0.75, 1.0};

struct PipelineConfig {
  EncodingMethod method = EncodingMethod::BPE;
  int bpe_k = 300;
  bool bpe_on_trials = false;  // learn merges from whole trial streams instead of windows
  int ae_depth = 1;
  ClassifierConfig classifier;
  AutoencoderConfig autoencoder;
  Modality modality = Modality::Joint;
  DatasetProfile profile = DatasetProfile::EmakiLike;
  int window_length = 150;
  int folds = 5;
  double train_fraction = 1.0;
  std::uint64_t seed = 0;
  int jobs = 1;
};

inline nlohmann::json config_echo(const PipelineConfig& c) {
  return {{"method", std::string(to_string(c.method))},
          {"bpe_k", c.bpe_k},
          {"bpe_corpus", c.bpe_on_trials ? "trials" : "windows"},
          {"ae_depth", c.ae_depth},
          {"classifier", c.classifier},
          {"autoencoder", c.autoencoder},
          {"modality", std::string(to_string(c.modality))},
          {"dataset_profile", std::string(to_string(c.profile))},
          {"window_length", c.window_length},
          {"folds", c.folds},
          {"train_fraction", c.train_fraction},
          {"seed", c.seed},
          {"pooling", "mean_unpadded"},
          {"positional_encoding", "learned"}};
}

// Task labels present in the trials, sorted; the index is the class id.
inline std::vector<std::string> task_classes(std::span<const TokenizedTrial> trials) {
  std::set<std::string> s;
  for (const auto& t : trials) s.insert(t.task_id);
  return {s.begin(), s.end()};
}

inline bpe::Sequence atom_ids(std::span<const ActionToken> tokens, const Alphabet& atoms) {
  bpe::Sequence ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(atoms.id_of(t));
  return ids;
}

// Fits the fold's encoder (BPE merges or autoencoder) on training data only.
inline EncodingContext fit_encoding(const PipelineConfig& cfg, const Alphabet& atoms,
                                    std::vector<std::string> classes,
                                    std::span<const WindowSample> train_windows,
                                    std::span<const TokenizedTrial> train_trials, std::uint64_t seed) {
  EncodingContext ctx;
  ctx.method = cfg.method;
  ctx.atoms = atoms;
  ctx.classes = std::move(classes);
  ctx.modality = cfg.modality;
  ctx.window_length = cfg.window_length;
  if (cfg.method == EncodingMethod::BPE) {
    bpe::Corpus corpus;
    if (cfg.bpe_on_trials) {
      for (const auto& t : train_trials) corpus.push_back(atom_ids(t.tokens, atoms));
    } else {
      for (const auto& w : train_windows) corpus.push_back(atom_ids(w.tokens, atoms));
    }
    ctx.vocab = bpe::learn(corpus, atoms, cfg.bpe_k);
  } else if (cfg.method == EncodingMethod::AE) {
    AutoencoderConfig ae = cfg.autoencoder;
    const auto depth_cfg = AutoencoderConfig::with_depth(cfg.ae_depth);
    ae.encoder_hidden = depth_cfg.encoder_hidden;
    ae.seed = seed;
    std::vector<std::vector<int>> corpus;
    for (const auto& w : train_windows) corpus.push_back(atom_ids(w.tokens, atoms));
    ctx.encoder = std::make_shared<FrozenEncoder>(train_autoencoder(ae, corpus, static_cast<int>(atoms.size())));
  }
  return ctx;
}

// Keeps round(fraction * n_c) windows of each class (at least one), chosen by
// a seeded shuffle; original order is preserved. fraction = 1 is the identity.
inline std::vector<WindowSample> subsample_windows(std::vector<WindowSample> windows, double fraction,
                                                   std::uint64_t seed) {
  if (!(fraction > 0 && fraction <= 1)) throw std::invalid_argument("train_fraction must lie in (0,1]");
  if (fraction == 1.0) return windows;
  std::map<std::string, std::vector<std::size_t>> by_task;
  for (std::size_t i = 0; i < windows.size(); ++i) by_task[windows[i].task_id].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (auto& [task, idx] : by_task) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size()))));
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, idx.size())));
  }
  std::sort(keep.begin(), keep.end());
  std::vector<WindowSample> out;
  out.reserve(keep.size());
  for (auto i : keep) out.push_back(std::move(windows[i]));
  return out;
}

struct FoldResult {
  int fold = 0;
  std::vector<std::string> train_participants;
  std::vector<std::string> test_participants;
  std::set<std::string> encoder_corpus_participants;  // whose tokens the BPE/AE fit saw
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
  std::size_t vocab_size = 0;
  double macro_f1 = 0;
  std::vector<double> epoch_losses;
  double seconds = 0;
};

struct TrainReport {
  PipelineConfig config;
  std::string method_label;
  std::vector<std::string> classes;
  std::vector<FoldResult> folds;

  double mean_f1() const {
    double s = 0;
    for (const auto& f : folds) s += f.macro_f1;
    return folds.empty() ? 0.0 : s / static_cast<double>(folds.size());
  }
  // Sample standard deviation across folds.
  double sd_f1() const {
    if (folds.size() < 2) return 0.0;
    const double m = mean_f1();
    double s = 0;
    for (const auto& f : folds) s += (f.macro_f1 - m) * (f.macro_f1 - m);
    return std::sqrt(s / static_cast<double>(folds.size() - 1));
  }
};

// Participant ids in fold order: a seeded shuffle dealt round-robin into folds.
inline std::vector<std::vector<std::string>> assign_folds(std::span<const TokenizedTrial> trials, int folds,
                                                          std::uint64_t seed) {
  std::set<std::string> uniq;
  for (const auto& t : trials) uniq.insert(t.participant_id);
  if (folds < 2) throw std::invalid_argument("cross-validation needs at least two folds");
  if (static_cast<int>(uniq.size()) < folds)
    throw std::invalid_argument("need at least " + std::to_string(folds) + " participants, got " +
                                std::to_string(uniq.size()));
  std::vector<std::string> ps(uniq.begin(), uniq.end());
  std::mt19937_64 rng(seed * 0xD6E8FEB86659FD93ull + 5);
  std::shuffle(ps.begin(), ps.end(), rng);
  std::vector<std::vector<std::string>> out(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < ps.size(); ++i) out[i % static_cast<std::size_t>(folds)].push_back(ps[i]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

inline FoldResult run_fold(const PipelineConfig& cfg, std::span<const TokenizedTrial> trials, const Alphabet& atoms,
                           const std::vector<std::string>& classes, const std::vector<std::vector<std::string>>& folds,
                           int fold) {
  const auto start = std::chrono::steady_clock::now();
  FoldResult r;
  r.fold = fold;
  r.test_participants = folds[static_cast<std::size_t>(fold)];
  const std::set<std::string> test_set(r.test_participants.begin(), r.test_participants.end());
  std::set<std::string> train_set;
  std::vector<TokenizedTrial> train_trials, test_trials;
  for (const auto& t : trials) {
    if (test_set.count(t.participant_id)) {
      test_trials.push_back(t);
    } else {
      train_set.insert(t.participant_id);
      train_trials.push_back(t);
    }
  }
  for (const auto& p : train_set)
    if (test_set.count(p)) throw InvariantViolation("participant " + p + " is in both train and test");
  r.train_participants.assign(train_set.begin(), train_set.end());

  const std::uint64_t fold_seed = cfg.seed * 1000003ull + static_cast<std::uint64_t>(fold);
  auto train_windows = subsample_windows(segment_windows(train_trials, cfg.window_length, cfg.modality),
                                         cfg.train_fraction, fold_seed);
  const auto test_windows = segment_windows(test_trials, cfg.window_length, cfg.modality);
  r.train_windows = train_windows.size();
  r.test_windows = test_windows.size();

  if (cfg.method != EncodingMethod::NoEncoding) {
    if (cfg.method == EncodingMethod::BPE && cfg.bpe_on_trials) {
      for (const auto& t : train_trials) r.encoder_corpus_participants.insert(t.participant_id);
    } else {
      for (const auto& w : train_windows) r.encoder_corpus_participants.insert(w.participant_id);
    }
    for (const auto& p : r.encoder_corpus_participants)
      if (test_set.count(p)) throw InvariantViolation("encoder corpus contains test participant " + p);
  }
  const auto ctx = fit_encoding(cfg, atoms, classes, train_windows, train_trials, fold_seed);
  r.vocab_size = static_cast<std::size_t>(ctx.input_vocab_size());

  const auto train_ds = build_dataset(train_windows, ctx);
  const auto test_ds = build_dataset(test_windows, ctx);
  ClassifierConfig ccfg = cfg.classifier;
  ccfg.seed = fold_seed;
  auto outcome = train_classifier(ccfg, train_ds, shape_for(ctx));
  r.epoch_losses = outcome.epoch_losses;
  if (test_ds.size() == 0) throw std::invalid_argument("fold " + std::to_string(fold) + " has no test windows");
  const auto pred = predict(outcome.model, test_ds);
  r.macro_f1 = macro_f1(test_ds.labels, pred, static_cast<int>(classes.size()));
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

// Participant-independent k-fold cross-validation. Each fold fits its encoder
// and classifier on the other folds' participants and scores macro F1 on its own.
inline TrainReport cross_validate(std::span<const TokenizedTrial> trials, const Alphabet& atoms,
                                  const PipelineConfig& cfg) {
  cfg.classifier.validate();
  if (cfg.window_length <= 0) throw std::invalid_argument("window length must be positive");
  TrainReport report;
  report.config = cfg;
  report.classes = task_classes(trials);
  if (report.classes.size() < 2) throw std::invalid_argument("cross-validation needs at least two tasks");
  const auto folds = assign_folds(trials, cfg.folds, cfg.seed);
  {
    std::set<std::string> seen;
    for (const auto& f : folds)
      for (const auto& p : f)
        if (!seen.insert(p).second) throw InvariantViolation("participant " + p + " assigned to two folds");
  }
  report.folds.resize(folds.size());
  const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(folds.size())));
  if (jobs == 1) {
    for (int f = 0; f < static_cast<int>(folds.size()); ++f)
      report.folds[static_cast<std::size_t>(f)] = run_fold(cfg, trials, atoms, report.classes, folds, f);
  } else {
    std::vector<std::exception_ptr> errors(folds.size());
    std::vector<std::thread> workers;
    std::atomic<int> next{0};
    for (int j = 0; j < jobs; ++j)
      workers.emplace_back([&] {
        for (int f = next++; f < static_cast<int>(folds.size()); f = next++) {
          try {
            report.folds[static_cast<std::size_t>(f)] = run_fold(cfg, trials, atoms, report.classes, folds, f);
          } catch (...) {
            errors[static_cast<std::size_t>(f)] = std::current_exception();
          }
        }
      });
    for (auto& w : workers) w.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  switch (cfg.method) {
    case EncodingMethod::NoEncoding:
      report.method_label = "NoEncoding";
      break;
    case EncodingMethod::AE:
      report.method_label = "AE-" + std::to_string(cfg.ae_depth);
      break;
    case EncodingMethod::BPE:
      report.method_label = "BPE-" + std::to_string(cfg.bpe_k);
      break;
  }
  return report;
}

struct TrainedPipeline {
  EncodingContext context;
  ModelShape shape;
  TrainOutcome outcome;
  std::size_t train_windows = 0;
};

// Fits encoding and classifier on every given trial; no held-out split.
inline TrainedPipeline train_pipeline(std::span<const TokenizedTrial> trials, const Alphabet& atoms,
                                      const PipelineConfig& cfg) {
  const auto classes = task_classes(trials);
  if (classes.size() < 2) throw std::invalid_argument("training needs at least two tasks");
  const auto windows =
      subsample_windows(segment_windows(trials, cfg.window_length, cfg.modality), cfg.train_fraction, cfg.seed);
  auto ctx = fit_encoding(cfg, atoms, classes, windows, trials, cfg.seed);
  const auto ds = build_dataset(windows, ctx);
  ClassifierConfig ccfg = cfg.classifier;
  ccfg.seed = cfg.seed;
  auto shape = shape_for(ctx);
  auto outcome = train_classifier(ccfg, ds, shape);
  return {std::move(ctx), shape, std::move(outcome), windows.size()};
}

struct Evaluation {
  double macro_f1 = 0;
  std::vector<int> y_true, y_pred;
};

inline Evaluation evaluate_pipeline(Model& model, const EncodingContext& ctx, std::span<const TokenizedTrial> trials) {
  const auto windows = segment_windows(trials, ctx.window_length, ctx.modality);
  if (windows.empty()) throw std::invalid_argument("no complete windows to evaluate");
  const auto ds = build_dataset(windows, ctx);
  Evaluation e;
  e.y_true = ds.labels;
  e.y_pred = predict(model, ds);
  e.macro_f1 = macro_f1(e.y_true, e.y_pred, static_cast<int>(ctx.classes.size()));
  return e;
}

}  // namespace actlang::classifier
