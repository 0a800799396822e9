#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "actlang/classifier/dataset.hpp"
#include "actlang/classifier/transformer.hpp"
#include "actlang/errors.hpp"

namespace actlang::classifier {

// Unweighted mean of per-class F1. A class with no true and no predicted
// samples scores 0.
inline double macro_f1(std::span<const int> y_true, std::span<const int> y_pred, int num_classes) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("y_true and y_pred differ in length");
  if (y_true.empty()) throw std::invalid_argument("macro F1 of empty inputs");
  if (num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
  std::vector<double> tp(static_cast<std::size_t>(num_classes)), fp(tp.size()), fn(tp.size());
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) throw std::invalid_argument("label out of range");
    if (t == p) {
      ++tp[static_cast<std::size_t>(t)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(t)];
    }
  }
  double sum = 0;
  for (std::size_t c = 0; c < tp.size(); ++c) {
    const double precision = tp[c] + fp[c] > 0 ? tp[c] / (tp[c] + fp[c]) : 0.0;
    const double recall = tp[c] + fn[c] > 0 ? tp[c] / (tp[c] + fn[c]) : 0.0;
    sum += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
  return sum / num_classes;
}

using Model = TransformerClassifier<double>;

struct TrainOutcome {
  Model model;
  std::vector<double> epoch_losses;
  double seconds = 0;
};

inline ModelShape shape_for(const EncodingContext& ctx) {
  ModelShape s;
  s.num_classes = static_cast<int>(ctx.classes.size());
  s.max_len = ctx.window_length;
  if (ctx.method == EncodingMethod::AE) {
    s.input = InputKind::Features;
    s.feature_dim = ctx.encoder->feature_dim();
  } else {
    s.input = InputKind::TokenIds;
    s.vocab_size = ctx.input_vocab_size() + 1;
  }
  return s;
}

// Mini-batch AdamW on label-smoothed cross-entropy. The epoch order is a
// seeded shuffle and the last batch of an epoch may be short.
inline TrainOutcome train_classifier(const ClassifierConfig& cfg, const EncodedDataset& data, const ModelShape& shape) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("no training data");
  if (std::set<int>(data.labels.begin(), data.labels.end()).size() < 2)
    throw std::invalid_argument("training data holds a single class");
  const auto start = std::chrono::steady_clock::now();
  TrainOutcome out{Model(cfg, shape), {}, 0};
  nn::AdamWConfig opt_cfg{cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay};
  nn::AdamW<double> opt(out.model.parameters(), opt_cfg);
  std::mt19937_64 rng(cfg.seed * 0x94D049BB133111EBull + 3);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  out.model.set_training(true);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
      const auto e = std::min(order.size(), s + static_cast<std::size_t>(cfg.batch_size));
      const auto batch = make_batch(data, std::span<const std::size_t>(order).subspan(s, e - s));
      opt.zero_grad();
      const double l = out.model.accumulate_gradients(batch);
      if (!std::isfinite(l)) throw TrainingError(epoch + 1, "classifier loss is not finite");
      opt.step();
      total += l * static_cast<double>(e - s);
    }
    out.epoch_losses.push_back(total / static_cast<double>(order.size()));
  }
  out.model.set_training(false);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline std::vector<int> predict(Model& model, const EncodedDataset& data, int batch_size = 64) {
  model.set_training(false);
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& b : batches(data, batch_size)) {
    const auto p = model.predict(b);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

struct GradientCheckOptions {
  std::function<bool(const std::string&)> include = [](const std::string&) { return true; };
  int entries_per_param = 8;
  double relative_step = 1e-5;
  std::uint64_t seed = 0;
};

// Largest relative error between analytic gradients and central finite
// differences, over a seeded sample of entries from the selected parameters.
// Dropout is disabled for the check. The denominator is floored at 1e-6 so
// that gradients which are zero by construction (attention key biases cancel
// in the softmax) are judged on an absolute scale rather than on rounding
// noise.
inline double gradient_check(Model& model, const PaddedBatch& batch, const GradientCheckOptions& opt = {}) {
  const bool was_training = model.training();
  model.set_training(false);
  model.zero_grad();
  model.accumulate_gradients(batch);
  std::mt19937_64 rng(opt.seed);
  double worst = 0;
  for (auto* p : model.parameters()) {
    if (!opt.include(p->name)) continue;
    const auto n = p->value.size();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(opt.entries_per_param)));
    for (auto i : idx) {
      double& theta = p->value.data()[i];
      const double saved = theta;
      const double h = opt.relative_step * std::max(1.0, std::abs(saved));
      theta = saved + h;
      const double up = model.loss(batch);
      theta = saved - h;
      const double down = model.loss(batch);
      theta = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p->grad.data()[i];
      const double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  model.set_training(was_training);
  return worst;
}

}  // namespace actlang::classifier
