#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "actlang/classifier/batch.hpp"
#include "actlang/classifier/config.hpp"
#include "actlang/classifier/nn.hpp"
#include "actlang/errors.hpp"

namespace actlang::classifier {

enum class InputKind { TokenIds, Features };

struct ModelShape {
  InputKind input = InputKind::TokenIds;
  int vocab_size = 0;   // embedding rows, pad id included
  int feature_dim = 0;  // for InputKind::Features
  int max_len = 0;
  int num_classes = 0;
};

// (1 - eps) * onehot + eps / C
inline std::vector<double> smoothed_target(int true_class, int num_classes, double eps) {
  if (num_classes < 1 || true_class < 0 || true_class >= num_classes)
    throw std::invalid_argument("class index out of range");
  std::vector<double> y(static_cast<std::size_t>(num_classes), eps / num_classes);
  y[static_cast<std::size_t>(true_class)] += 1.0 - eps;
  return y;
}

// Post-norm Transformer encoder stack over token embeddings (or projected
// features) plus learned positional embeddings, mean-pooled over unpadded
// positions into a linear softmax head.
//
// Padded positions are dropped before attention. This is the same function as
// key-padding masking: pooled outputs never read padded queries, and masked
// keys receive zero attention weight.
template <typename Scalar>
class TransformerClassifier {
 public:
  using MatS = nn::Mat<Scalar>;
  using RowS = nn::RowVec<Scalar>;

  TransformerClassifier() = default;

  TransformerClassifier(const ClassifierConfig& cfg, const ModelShape& shape) : cfg_(cfg), shape_(shape) {
    cfg_.validate();
    if (shape.num_classes < 2) throw ConfigError("classifier needs at least two classes");
    if (shape.max_len < 1) throw ConfigError("max_len must be >= 1");
    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ull + 1);
    const int d = cfg.d_model;
    if (shape.input == InputKind::TokenIds) {
      if (shape.vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
      token_emb_.name = "token_embedding";
      token_emb_.resize(shape.vocab_size, d);
      nn::normal_init(token_emb_, 1.0, rng);
    } else {
      if (shape.feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
      input_proj_.init("input_projection", shape.feature_dim, d, rng);
    }
    pos_emb_.name = "position_embedding";
    pos_emb_.resize(shape.max_len, d);
    nn::normal_init(pos_emb_, 0.1, rng);
    layers_.resize(static_cast<std::size_t>(cfg.num_layers));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const std::string p = "layers." + std::to_string(l) + ".";
      auto& L = layers_[l];
      L.q.init(p + "attn.q", d, d, rng);
      L.k.init(p + "attn.k", d, d, rng);
      L.v.init(p + "attn.v", d, d, rng);
      L.o.init(p + "attn.out", d, d, rng);
      L.ln1.init(p + "norm1", d);
      L.ff1.init(p + "ff.1", d, cfg.ff_dim(), rng);
      L.ff2.init(p + "ff.2", cfg.ff_dim(), d, rng);
      L.ln2.init(p + "norm2", d);
    }
    head_.init("head", d, shape.num_classes, rng);
    dropout_rng_.seed(cfg.seed * 0xBF58476D1CE4E5B9ull + 7);
  }

  const ClassifierConfig& config() const { return cfg_; }
  const ModelShape& shape() const { return shape_; }
  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }

  std::vector<nn::Param<Scalar>*> parameters() {
    std::vector<nn::Param<Scalar>*> out;
    if (shape_.input == InputKind::TokenIds) {
      out.push_back(&token_emb_);
    } else {
      out.push_back(&input_proj_.W);
      out.push_back(&input_proj_.b);
    }
    out.push_back(&pos_emb_);
    for (auto& L : layers_)
      for (auto* p : {&L.q.W, &L.q.b, &L.k.W, &L.k.b, &L.v.W, &L.v.b, &L.o.W, &L.o.b, &L.ln1.gamma, &L.ln1.beta,
                      &L.ff1.W, &L.ff1.b, &L.ff2.W, &L.ff2.b, &L.ln2.gamma, &L.ln2.beta})
        out.push_back(p);
    out.push_back(&head_.W);
    out.push_back(&head_.b);
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  // Logits for every row, shape rows x classes.
  MatS logits(const PaddedBatch& batch) {
    MatS out(batch.rows(), shape_.num_classes);
    for (Eigen::Index r = 0; r < batch.rows(); ++r) out.row(r) = forward_row(batch, r, nullptr);
    return out;
  }

  MatS predict_proba(const PaddedBatch& batch) {
    MatS p = logits(batch);
    nn::softmax_rows(p);
    return p;
  }

  std::vector<int> predict(const PaddedBatch& batch) {
    const MatS p = logits(batch);
    std::vector<int> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      Eigen::Index best = 0;
      p.row(r).maxCoeff(&best);
      out[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
    return out;
  }

  // Mean label-smoothed cross-entropy over the batch.
  double loss(const PaddedBatch& batch) {
    double total = 0;
    for (Eigen::Index r = 0; r < batch.rows(); ++r) total += row_loss(forward_row(batch, r, nullptr), batch.labels[static_cast<std::size_t>(r)]).first;
    return total / static_cast<double>(batch.rows());
  }

  // Forward + backward over the batch; gradients of the mean loss are added to
  // each parameter's grad. Returns the mean loss.
  double accumulate_gradients(const PaddedBatch& batch) {
    double total = 0;
    const auto inv_b = static_cast<Scalar>(1.0 / static_cast<double>(batch.rows()));
    for (Eigen::Index r = 0; r < batch.rows(); ++r) {
      RowCache cache;
      const RowS z = forward_row(batch, r, &cache);
      auto [l, dlogits] = row_loss(z, batch.labels[static_cast<std::size_t>(r)]);
      total += l;
      backward_row(cache, dlogits * inv_b);
    }
    return total / static_cast<double>(batch.rows());
  }

  nlohmann::json save_parameters() {
    nlohmann::json j = nlohmann::json::object();
    for (auto* p : parameters()) {
      std::vector<double> flat(static_cast<std::size_t>(p->value.size()));
      for (Eigen::Index i = 0; i < p->value.size(); ++i) flat[static_cast<std::size_t>(i)] = static_cast<double>(p->value.data()[i]);
      j[p->name] = {{"rows", p->value.rows()}, {"cols", p->value.cols()}, {"data", std::move(flat)}};
    }
    return j;
  }

  void load_parameters(const nlohmann::json& j) {
    for (auto* p : parameters()) {
      if (!j.contains(p->name)) throw LoadError("model file lacks parameter '" + p->name + "'");
      const auto& e = j.at(p->name);
      if (e.at("rows").template get<Eigen::Index>() != p->value.rows() || e.at("cols").template get<Eigen::Index>() != p->value.cols())
        throw LoadError("shape mismatch for parameter '" + p->name + "'");
      const auto flat = e.at("data").template get<std::vector<double>>();
      if (static_cast<Eigen::Index>(flat.size()) != p->value.size())
        throw LoadError("size mismatch for parameter '" + p->name + "'");
      for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = static_cast<Scalar>(flat[static_cast<std::size_t>(i)]);
    }
  }

 private:
  struct Layer {
    nn::Linear<Scalar> q, k, v, o;
    nn::LayerNorm<Scalar> ln1;
    nn::Linear<Scalar> ff1, ff2;
    nn::LayerNorm<Scalar> ln2;
  };

  struct LayerCache {
    MatS x, Q, K, V, O;
    std::vector<MatS> attn;
    MatS drop_attn;
    typename nn::LayerNorm<Scalar>::Cache ln1;
    MatS h1, ff_pre, ff_act, drop_inner, drop_out;
    typename nn::LayerNorm<Scalar>::Cache ln2;
  };

  struct RowCache {
    std::vector<int> ids, positions;
    MatS features;
    MatS drop_emb;
    std::vector<LayerCache> layers;
    RowS pooled;
    Eigen::Index n = 0;
  };

  MatS maybe_dropout(Eigen::Index rows, Eigen::Index cols) {
    if (!training_ || cfg_.dropout <= 0) return MatS();
    return nn::dropout_mask<Scalar>(rows, cols, cfg_.dropout, dropout_rng_);
  }

  static void apply(MatS& x, const MatS& mask) {
    if (mask.size()) x.array() *= mask.array();
  }

  RowS forward_row(const PaddedBatch& batch, Eigen::Index r, RowCache* cache) {
    std::vector<int> ids, positions;
    for (Eigen::Index c = 0; c < batch.max_len(); ++c) {
      if (batch.mask(r, c)) continue;
      if (c >= shape_.max_len) throw std::out_of_range("sequence longer than the model's max_len");
      positions.push_back(static_cast<int>(c));
      ids.push_back(batch.ids(r, c));
    }
    const auto n = static_cast<Eigen::Index>(positions.size());
    if (n == 0) throw InvariantViolation("batch row is entirely padding");
    const int d = cfg_.d_model;

    MatS h(n, d);
    MatS feats;
    if (shape_.input == InputKind::TokenIds) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const int id = ids[static_cast<std::size_t>(i)];
        if (id < 0 || id >= shape_.vocab_size) throw std::out_of_range("token id outside the embedding table");
        h.row(i) = token_emb_.value.row(id);
      }
    } else {
      if (!batch.has_features()) throw std::invalid_argument("feature-input model needs batch features");
      const auto& f = batch.features[static_cast<std::size_t>(r)];
      if (f.cols() != shape_.feature_dim) throw std::invalid_argument("feature dimension mismatch");
      feats.resize(n, shape_.feature_dim);
      for (Eigen::Index i = 0; i < n; ++i) feats.row(i) = f.row(positions[static_cast<std::size_t>(i)]).template cast<Scalar>();
      h = input_proj_.forward(feats);
    }
    for (Eigen::Index i = 0; i < n; ++i) h.row(i) += pos_emb_.value.row(positions[static_cast<std::size_t>(i)]);
    MatS drop_emb = maybe_dropout(n, d);
    apply(h, drop_emb);

    if (cache) {
      cache->ids = std::move(ids);
      cache->positions = std::move(positions);
      cache->features = std::move(feats);
      cache->drop_emb = std::move(drop_emb);
      cache->layers.resize(layers_.size());
      cache->n = n;
    }

    const int H = cfg_.heads;
    const int dk = d / H;
    const auto scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(dk)));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      auto& L = layers_[l];
      LayerCache local;
      LayerCache& c = cache ? cache->layers[l] : local;
      c.x = h;
      c.Q = L.q.forward(h);
      c.K = L.k.forward(h);
      c.V = L.v.forward(h);
      c.O.resize(n, d);
      c.attn.resize(static_cast<std::size_t>(H));
      for (int hd = 0; hd < H; ++hd) {
        MatS s = (c.Q.middleCols(hd * dk, dk) * c.K.middleCols(hd * dk, dk).transpose()) * scale;
        nn::softmax_rows(s);
        c.O.middleCols(hd * dk, dk) = s * c.V.middleCols(hd * dk, dk);
        c.attn[static_cast<std::size_t>(hd)] = std::move(s);
      }
      MatS z = L.o.forward(c.O);
      c.drop_attn = maybe_dropout(n, d);
      apply(z, c.drop_attn);
      c.h1 = L.ln1.forward(h + z, &c.ln1);

      c.ff_pre = L.ff1.forward(c.h1);
      c.ff_act = c.ff_pre.cwiseMax(Scalar(0));
      c.drop_inner = maybe_dropout(n, cfg_.ff_dim());
      apply(c.ff_act, c.drop_inner);
      MatS g = L.ff2.forward(c.ff_act);
      c.drop_out = maybe_dropout(n, d);
      apply(g, c.drop_out);
      h = L.ln2.forward(c.h1 + g, &c.ln2);
    }
    RowS pooled = h.colwise().mean();
    RowS z = pooled * head_.W.value + head_.b.value;
    if (cache) cache->pooled = std::move(pooled);
    return z;
  }

  // Loss and dL/dlogits for one row under label smoothing.
  std::pair<double, RowS> row_loss(const RowS& z, int label) const {
    const auto y = smoothed_target(label, shape_.num_classes, cfg_.label_smoothing);
    const Scalar m = z.maxCoeff();
    RowS p = (z.array() - m).exp();
    const Scalar sum = p.sum();
    p /= sum;
    const Scalar log_sum = std::log(sum) + m;
    double l = 0;
    RowS d = p;
    for (int c = 0; c < shape_.num_classes; ++c) {
      l -= y[static_cast<std::size_t>(c)] * static_cast<double>(z(c) - log_sum);
      d(c) -= static_cast<Scalar>(y[static_cast<std::size_t>(c)]);
    }
    if (!std::isfinite(l)) l = std::numeric_limits<double>::quiet_NaN();
    return {l, d};
  }

  void backward_row(RowCache& c, const RowS& dlogits) {
    head_.W.grad.noalias() += c.pooled.transpose() * dlogits;
    head_.b.grad += dlogits;
    const RowS dpooled = dlogits * head_.W.value.transpose();
    MatS dh = dpooled.replicate(c.n, 1) / static_cast<Scalar>(c.n);

    const int H = cfg_.heads;
    const int dk = cfg_.d_model / H;
    const auto scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(dk)));
    for (std::size_t li = layers_.size(); li-- > 0;) {
      auto& L = layers_[li];
      auto& lc = c.layers[li];
      const MatS dr2 = L.ln2.backward(lc.ln2, dh);
      MatS dg = dr2;
      apply(dg, lc.drop_out);
      MatS dact = L.ff2.backward(lc.ff_act, dg);
      apply(dact, lc.drop_inner);
      dact.array() *= (lc.ff_pre.array() > Scalar(0)).template cast<Scalar>();
      MatS dh1 = dr2 + L.ff1.backward(lc.h1, dact);

      const MatS dr1 = L.ln1.backward(lc.ln1, dh1);
      MatS dz = dr1;
      apply(dz, lc.drop_attn);
      const MatS dO = L.o.backward(lc.O, dz);
      MatS dQ(c.n, cfg_.d_model), dK(c.n, cfg_.d_model), dV(c.n, cfg_.d_model);
      for (int hd = 0; hd < H; ++hd) {
        const MatS& A = lc.attn[static_cast<std::size_t>(hd)];
        const auto dOh = dO.middleCols(hd * dk, dk);
        const MatS dA = dOh * lc.V.middleCols(hd * dk, dk).transpose();
        dV.middleCols(hd * dk, dk) = A.transpose() * dOh;
        MatS dS = A.array() * (dA.array().colwise() - (dA.array() * A.array()).rowwise().sum());
        dS *= scale;
        dQ.middleCols(hd * dk, dk) = dS * lc.K.middleCols(hd * dk, dk);
        dK.middleCols(hd * dk, dk) = dS.transpose() * lc.Q.middleCols(hd * dk, dk);
      }
      dh = dr1 + L.q.backward(lc.x, dQ) + L.k.backward(lc.x, dK) + L.v.backward(lc.x, dV);
    }

    apply(dh, c.drop_emb);
    for (Eigen::Index i = 0; i < c.n; ++i) pos_emb_.grad.row(c.positions[static_cast<std::size_t>(i)]) += dh.row(i);
    if (shape_.input == InputKind::TokenIds) {
      for (Eigen::Index i = 0; i < c.n; ++i) token_emb_.grad.row(c.ids[static_cast<std::size_t>(i)]) += dh.row(i);
    } else {
      input_proj_.backward_params_only(c.features, dh);
    }
  }

  ClassifierConfig cfg_;
  ModelShape shape_;
  nn::Param<Scalar> token_emb_;
  nn::Linear<Scalar> input_proj_;
  nn::Param<Scalar> pos_emb_;
  std::vector<Layer> layers_;
  nn::Linear<Scalar> head_;
  std::mt19937_64 dropout_rng_;
  bool training_ = false;
};

}  // namespace actlang::classifier
