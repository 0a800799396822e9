#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "actlang/errors.hpp"

namespace actlang::classifier {

struct ClassifierConfig {
  int num_layers = 2;  // N in {2, 4, 6}
  int heads = 4;
  int d_model = 16;  // {16, 64}
  int ff_multiplier = 4;
  double dropout = 0.5;
  double label_smoothing = 0.1;
  double learning_rate = 1e-3;  // {1e-3, 1e-4}
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  int batch_size = 64;
  int epochs = 30;
  std::uint64_t seed = 0;

  int ff_dim() const { return ff_multiplier * d_model; }

  void validate() const {
    if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
    if (heads < 1 || d_model < 1 || d_model % heads != 0) throw ConfigError("d_model must be divisible by heads");
    if (ff_multiplier < 1) throw ConfigError("ff_multiplier must be >= 1");
    auto rate = [](double v, const char* what) {
      if (!(v >= 0.0 && v < 1.0)) throw ConfigError(std::string(what) + " must lie in [0,1)");
    };
    rate(dropout, "dropout");
    rate(label_smoothing, "label_smoothing");
    if (!(learning_rate > 0 && learning_rate < 1)) throw ConfigError("learning_rate must lie in (0,1)");
    if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1)) throw ConfigError("Adam betas must lie in (0,1)");
    if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const ClassifierConfig& c) {
  j = nlohmann::json{{"num_layers", c.num_layers},   {"heads", c.heads},
                     {"d_model", c.d_model},         {"ff_dim", c.ff_dim()},
                     {"dropout", c.dropout},         {"label_smoothing", c.label_smoothing},
                     {"learning_rate", c.learning_rate}, {"adam_betas", {c.beta1, c.beta2}},
                     {"weight_decay", c.weight_decay}, {"batch_size", c.batch_size},
                     {"epochs", c.epochs},           {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ClassifierConfig& c) {
  c.num_layers = j.at("num_layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.ff_multiplier = j.at("ff_dim").get<int>() / c.d_model;
  c.dropout = j.at("dropout").get<double>();
  c.label_smoothing = j.at("label_smoothing").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.beta1 = j.at("adam_betas").at(0).get<double>();
  c.beta2 = j.at("adam_betas").at(1).get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

struct AutoencoderConfig {
  int embed_dim = 128;
  std::vector<int> encoder_hidden{64};  // (64), (64,32) or (64,32,16)
  double dropout = 0.1;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 10;
  std::uint64_t seed = 0;

  static AutoencoderConfig with_depth(int depth) {
    if (depth < 1 || depth > 3) throw ConfigError("autoencoder depth must be 1, 2 or 3");
    AutoencoderConfig c;
    const std::vector<int> dims{64, 32, 16};
    c.encoder_hidden.assign(dims.begin(), dims.begin() + depth);
    return c;
  }

  void validate() const {
    if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
    if (encoder_hidden.empty()) throw ConfigError("encoder needs at least one hidden layer");
    int prev = embed_dim + 1;
    for (int h : encoder_hidden) {
      if (h < 1 || h >= prev) throw ConfigError("encoder hidden dims must be strictly decreasing");
      prev = h;
    }
    if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout must lie in [0,1)");
    if (!(learning_rate > 0 && learning_rate < 1)) throw ConfigError("learning_rate must lie in (0,1)");
    if (batch_size < 1 || epochs < 1) throw ConfigError("batch_size and epochs must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const AutoencoderConfig& c) {
  j = nlohmann::json{{"embed_dim", c.embed_dim}, {"encoder_hidden", c.encoder_hidden},
                     {"dropout", c.dropout},     {"learning_rate", c.learning_rate},
                     {"batch_size", c.batch_size}, {"epochs", c.epochs},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, AutoencoderConfig& c) {
  c.embed_dim = j.at("embed_dim").get<int>();
  c.encoder_hidden = j.at("encoder_hidden").get<std::vector<int>>();
  c.dropout = j.at("dropout").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace actlang::classifier
