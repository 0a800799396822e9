#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "json.hpp"

#include "actlang/classifier/config.hpp"
#include "actlang/classifier/nn.hpp"
#include "actlang/errors.hpp"

namespace actlang::classifier {

// Frozen encoder half of a trained autoencoder. Positions are encoded
// independently, so the encoder reduces to one feature row per atom id.
struct FrozenEncoder {
  nn::Mat<double> table;  // atoms x feature_dim
  AutoencoderConfig config;
  std::vector<double> epoch_losses;

  int feature_dim() const { return static_cast<int>(table.cols()); }
  int num_atoms() const { return static_cast<int>(table.rows()); }

  nn::Mat<double> features(std::span<const int> ids) const {
    nn::Mat<double> out(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= num_atoms()) throw EncodingError("id outside the encoder's alphabet");
      out.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
    }
    return out;
  }
};

inline void to_json(nlohmann::json& j, const FrozenEncoder& e) {
  std::vector<double> flat(e.table.data(), e.table.data() + e.table.size());
  j = nlohmann::json{{"config", e.config},
                     {"rows", e.table.rows()},
                     {"cols", e.table.cols()},
                     {"table", std::move(flat)},
                     {"epoch_losses", e.epoch_losses}};
}

inline void from_json(const nlohmann::json& j, FrozenEncoder& e) {
  e.config = j.at("config").get<AutoencoderConfig>();
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("table").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) throw LoadError("encoder table size mismatch");
  e.table = Eigen::Map<const nn::Mat<double>>(flat.data(), rows, cols);
  e.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
}

// Token-level autoencoder: embedding, FC encoder, mirrored FC decoder and a
// softmax reconstruction layer over the atomic alphabet.
template <typename Scalar>
class TokenAutoencoder {
 public:
  using MatS = nn::Mat<Scalar>;

  TokenAutoencoder(const AutoencoderConfig& cfg, int num_atoms) : cfg_(cfg), num_atoms_(num_atoms) {
    cfg_.validate();
    if (num_atoms < 1) throw ConfigError("autoencoder needs a non-empty alphabet");
    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ull + 11);
    emb_.name = "ae.embedding";
    emb_.resize(num_atoms, cfg.embed_dim);
    nn::normal_init(emb_, 1.0, rng);
    int prev = cfg.embed_dim;
    for (std::size_t i = 0; i < cfg.encoder_hidden.size(); ++i) {
      encoder_.emplace_back();
      encoder_.back().init("ae.encoder." + std::to_string(i), prev, cfg.encoder_hidden[i], rng);
      prev = cfg.encoder_hidden[i];
    }
    std::vector<int> dec_dims(cfg.encoder_hidden.rbegin() + 1, cfg.encoder_hidden.rend());
    dec_dims.push_back(cfg.embed_dim);
    for (std::size_t i = 0; i < dec_dims.size(); ++i) {
      decoder_.emplace_back();
      decoder_.back().init("ae.decoder." + std::to_string(i), prev, dec_dims[i], rng);
      prev = dec_dims[i];
    }
    recon_.init("ae.reconstruction", prev, num_atoms, rng);
    dropout_rng_.seed(cfg.seed * 0xBF58476D1CE4E5B9ull + 13);
  }

  std::vector<nn::Param<Scalar>*> parameters() {
    std::vector<nn::Param<Scalar>*> out{&emb_};
    for (auto& l : encoder_) out.insert(out.end(), {&l.W, &l.b});
    for (auto& l : decoder_) out.insert(out.end(), {&l.W, &l.b});
    out.insert(out.end(), {&recon_.W, &recon_.b});
    return out;
  }

  void set_training(bool on) { training_ = on; }

  // Encoder output for each id (eval mode).
  MatS encode(std::span<const int> ids) {
    const bool was = training_;
    training_ = false;
    Cache c;
    forward(ids, &c);
    training_ = was;
    return c.acts[encoder_.size()];
  }

  // Mean cross-entropy of reconstructing `ids`; accumulates gradients when `backprop`.
  double step_loss(std::span<const int> ids, bool backprop) {
    Cache c;
    MatS logits = forward(ids, &c);
    const auto m = logits.rows();
    nn::softmax_rows(logits);
    double loss = 0;
    for (Eigen::Index i = 0; i < m; ++i) loss -= std::log(std::max<double>(logits(i, ids[static_cast<std::size_t>(i)]), 1e-300));
    loss /= static_cast<double>(m);
    if (backprop) {
      MatS d = logits;
      for (Eigen::Index i = 0; i < m; ++i) d(i, ids[static_cast<std::size_t>(i)]) -= Scalar(1);
      d /= static_cast<Scalar>(m);
      backward(c, d);
    }
    return loss;
  }

  double accuracy(std::span<const int> ids) {
    const bool was = training_;
    training_ = false;
    const MatS logits = forward(ids, nullptr);
    training_ = was;
    std::size_t ok = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      Eigen::Index best = 0;
      logits.row(i).maxCoeff(&best);
      ok += best == ids[static_cast<std::size_t>(i)];
    }
    return ids.empty() ? 1.0 : static_cast<double>(ok) / static_cast<double>(ids.size());
  }

 private:
  struct Cache {
    std::vector<int> ids;
    std::vector<MatS> acts;   // input to layer i (acts[0] = embeddings)
    std::vector<MatS> pre;    // pre-activation of FC layer i
    std::vector<MatS> drops;  // dropout mask after FC layer i
  };

  std::vector<nn::Linear<Scalar>*> hidden_layers() {
    std::vector<nn::Linear<Scalar>*> out;
    for (auto& l : encoder_) out.push_back(&l);
    for (auto& l : decoder_) out.push_back(&l);
    return out;
  }

  MatS forward(std::span<const int> ids, Cache* c) {
    const auto m = static_cast<Eigen::Index>(ids.size());
    MatS x(m, cfg_.embed_dim);
    for (Eigen::Index i = 0; i < m; ++i) {
      const int id = ids[static_cast<std::size_t>(i)];
      if (id < 0 || id >= num_atoms_) throw EncodingError("id outside the autoencoder alphabet");
      x.row(i) = emb_.value.row(id);
    }
    if (c) {
      c->ids.assign(ids.begin(), ids.end());
      c->acts.push_back(x);
    }
    for (auto* layer : hidden_layers()) {
      MatS pre = layer->forward(x);
      x = pre.cwiseMax(Scalar(0));
      MatS drop;
      if (training_ && cfg_.dropout > 0) {
        drop = nn::dropout_mask<Scalar>(x.rows(), x.cols(), cfg_.dropout, dropout_rng_);
        x.array() *= drop.array();
      }
      if (c) {
        c->pre.push_back(std::move(pre));
        c->drops.push_back(std::move(drop));
        c->acts.push_back(x);
      }
    }
    return recon_.forward(x);
  }

  void backward(Cache& c, const MatS& dlogits) {
    auto layers = hidden_layers();
    MatS dx = recon_.backward(c.acts.back(), dlogits);
    for (std::size_t i = layers.size(); i-- > 0;) {
      if (c.drops[i].size()) dx.array() *= c.drops[i].array();
      dx.array() *= (c.pre[i].array() > Scalar(0)).template cast<Scalar>();
      dx = layers[i]->backward(c.acts[i], dx);
    }
    for (Eigen::Index i = 0; i < dx.rows(); ++i) emb_.grad.row(c.ids[static_cast<std::size_t>(i)]) += dx.row(i);
  }

  AutoencoderConfig cfg_;
  int num_atoms_ = 0;
  nn::Param<Scalar> emb_;
  std::vector<nn::Linear<Scalar>> encoder_, decoder_;
  nn::Linear<Scalar> recon_;
  std::mt19937_64 dropout_rng_;
  bool training_ = false;
};

// Trains the autoencoder to reconstruct every position of the corpus windows
// and returns the frozen encoder.
inline FrozenEncoder train_autoencoder(const AutoencoderConfig& cfg, const std::vector<std::vector<int>>& corpus,
                                       int num_atoms, double* final_accuracy = nullptr) {
  cfg.validate();
  if (corpus.empty()) throw std::invalid_argument("autoencoder corpus is empty");
  TokenAutoencoder<double> ae(cfg, num_atoms);
  nn::AdamWConfig opt_cfg;
  opt_cfg.lr = cfg.learning_rate;
  nn::AdamW<double> opt(ae.parameters(), opt_cfg);
  std::mt19937_64 shuffle_rng(cfg.seed * 0x94D049BB133111EBull + 17);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  FrozenEncoder out;
  out.config = cfg;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    ae.set_training(true);
    double total = 0;
    std::size_t positions = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<int> ids;
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t i = start; i < end; ++i) ids.insert(ids.end(), corpus[order[i]].begin(), corpus[order[i]].end());
      if (ids.empty()) continue;
      opt.zero_grad();
      const double l = ae.step_loss(ids, true);
      if (!std::isfinite(l)) throw TrainingError(epoch + 1, "autoencoder loss is not finite");
      opt.step();
      total += l * static_cast<double>(ids.size());
      positions += ids.size();
    }
    out.epoch_losses.push_back(positions ? total / static_cast<double>(positions) : 0.0);
  }
  ae.set_training(false);
  std::vector<int> all(static_cast<std::size_t>(num_atoms));
  std::iota(all.begin(), all.end(), 0);
  out.table = ae.encode(all);
  if (final_accuracy) {
    std::vector<int> ids;
    for (const auto& s : corpus) ids.insert(ids.end(), s.begin(), s.end());
    *final_accuracy = ae.accuracy(ids);
  }
  return out;
}

}  // namespace actlang::classifier
