#include "actlang/classifier/training.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace
{
using namespace actlang::classifier;

// Class c windows are dominated by token c+1; ids 1..5, pad 6.
EncodedDataset toy(std::size_t per_class, std::uint64_t seed, bool ragged = false)
{
  std::mt19937_64 rng(seed);
  EncodedDataset ds;
  ds.pad_id = 6;
  for (std::size_t i = 0; i < per_class; ++i)
    for (int c = 0; c < 3; ++c) {
      const std::size_t len = ragged ? 3 + rng() % 8 : 10;
      actlang::bpe::Sequence s;
      for (std::size_t k = 0; k < len; ++k) s.push_back(rng() % 4 ? c + 1 : 4 + static_cast<int>(rng() % 2));
      ds.sequences.push_back(s);
      ds.labels.push_back(c);
      ds.participants.push_back("p" + std::to_string(i));
    }
  return ds;
}

ModelShape toy_shape()
{
  ModelShape s;
  s.vocab_size = 7;
  s.max_len = 10;
  s.num_classes = 3;
  return s;
}

ClassifierConfig small_config()
{
  ClassifierConfig c;
  c.num_layers = 2;
  c.d_model = 16;
  c.heads = 4;
  c.dropout = 0.0;
  return c;
}

PaddedBatch all_rows(const EncodedDataset & ds)
{
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), 0);
  return make_batch(ds, rows);
}
}  // namespace

TEST(classifier, smoothed_target_example)
{
  const auto y = smoothed_target(0, 3, 0.1);
  EXPECT_NEAR(y[0], 0.9333333333, 1e-9);
  EXPECT_NEAR(y[1], 0.0333333333, 1e-9);
  EXPECT_NEAR(y[2], 0.0333333333, 1e-9);
  EXPECT_NEAR(y[0] + y[1] + y[2], 1.0, 1e-15);
  EXPECT_THROW(smoothed_target(3, 3, 0.1), std::invalid_argument);
}

TEST(classifier, macro_f1_oracles)
{
  const std::vector<int> y{0, 1, 2, 0, 1, 2};
  EXPECT_DOUBLE_EQ(macro_f1(y, y, 3), 1.0);
  const std::vector<int> zeros(6, 0);
  EXPECT_NEAR(macro_f1(y, zeros, 3), 1.0 / 6.0, 1e-12);
  EXPECT_THROW(macro_f1(std::vector<int>{}, std::vector<int>{}, 3), std::invalid_argument);
  EXPECT_THROW(macro_f1(y, std::vector<int>{0}, 3), std::invalid_argument);
  EXPECT_THROW(macro_f1(std::vector<int>{3}, std::vector<int>{0}, 3), std::invalid_argument);
}

TEST(classifier, macro_f1_of_random_guessing_is_near_chance)
{
  std::mt19937_64 rng(2);
  std::vector<int> t(30000), p(30000);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<int>(i % 3);
    p[i] = static_cast<int>(rng() % 3);
  }
  EXPECT_NEAR(macro_f1(t, p, 3), 1.0 / 3.0, 0.05);
}

TEST(classifier, gradient_check_head_only)
{
  Model m(small_config(), toy_shape());
  const auto batch = all_rows(toy(2, 1, true));
  GradientCheckOptions opt;
  opt.include = [](const std::string & n) { return n.rfind("head", 0) == 0; };
  opt.entries_per_param = 50;
  EXPECT_LT(gradient_check(m, batch, opt), 1e-7);
}

TEST(classifier, gradient_check_full_model)
{
  Model m(small_config(), toy_shape());
  const auto batch = all_rows(toy(2, 3, true));
  GradientCheckOptions opt;
  opt.entries_per_param = 12;
  EXPECT_LT(gradient_check(m, batch, opt), 1e-4);
}

TEST(classifier, zero_embeddings_give_finite_loss)
{
  Model m(small_config(), toy_shape());
  for (auto * p : m.parameters())
    if (p->name == "token_embedding") p->value.setZero();
  const double l = m.loss(all_rows(toy(1, 4)));
  EXPECT_TRUE(std::isfinite(l));
}

TEST(classifier, softmax_rows_sum_to_one)
{
  Model m(small_config(), toy_shape());
  const auto p = m.predict_proba(all_rows(toy(5, 5, true)));
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);
    EXPECT_GE(p.row(r).minCoeff(), 0.0);
  }
}

TEST(classifier, padded_ids_do_not_affect_logits)
{
  Model m(small_config(), toy_shape());
  auto batch = all_rows(toy(4, 6, true));
  const auto before = m.logits(batch);
  std::mt19937_64 rng(8);
  for (Eigen::Index r = 0; r < batch.rows(); ++r)
    for (Eigen::Index c = 0; c < batch.max_len(); ++c)
      if (batch.mask(r, c)) batch.ids(r, c) = static_cast<int>(rng() % 7);
  EXPECT_LT((m.logits(batch) - before).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(classifier, learns_a_separable_toy_task)
{
  auto cfg = small_config();
  cfg.num_layers = 1;
  cfg.dropout = 0.1;
  cfg.epochs = 15;
  cfg.batch_size = 16;
  auto out = train_classifier(cfg, toy(40, 10), toy_shape());
  EXPECT_LT(out.epoch_losses.back(), out.epoch_losses.front());
  const auto test = toy(30, 11);
  EXPECT_GE(macro_f1(test.labels, predict(out.model, test), 3), 0.99);
}

TEST(classifier, training_is_deterministic)
{
  auto cfg = small_config();
  cfg.num_layers = 1;
  cfg.epochs = 2;
  cfg.dropout = 0.2;
  const auto data = toy(10, 12);
  auto a = train_classifier(cfg, data, toy_shape());
  auto b = train_classifier(cfg, data, toy_shape());
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  EXPECT_EQ(a.model.save_parameters(), b.model.save_parameters());
}

TEST(classifier, training_rejects_single_class_and_empty_data)
{
  auto data = toy(3, 1);
  std::fill(data.labels.begin(), data.labels.end(), 1);
  EXPECT_THROW(train_classifier(small_config(), data, toy_shape()), std::invalid_argument);
  EXPECT_THROW(train_classifier(small_config(), EncodedDataset{}, toy_shape()), std::invalid_argument);
}

TEST(classifier, config_validation)
{
  auto c = small_config();
  c.heads = 3;
  EXPECT_THROW(c.validate(), actlang::ConfigError);
  c = small_config();
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), actlang::ConfigError);
  EXPECT_THROW(AutoencoderConfig::with_depth(4), actlang::ConfigError);
}

TEST(classifier, parameters_survive_save_and_load)
{
  Model a(small_config(), toy_shape());
  auto cfg = small_config();
  cfg.seed = 99;
  Model b(cfg, toy_shape());
  const auto batch = all_rows(toy(2, 2));
  b.load_parameters(a.save_parameters());
  EXPECT_EQ(a.logits(batch), b.logits(batch));
}

TEST(classifier, batches_mark_padding)
{
  EncodedDataset ds;
  ds.pad_id = 6;
  ds.sequences = {{1, 2, 3}, {4}};
  ds.labels = {0, 1};
  const auto b = all_rows(ds);
  ASSERT_EQ(b.max_len(), 3);
  EXPECT_FALSE(b.mask(0, 2));
  EXPECT_FALSE(b.mask(1, 0));
  EXPECT_TRUE(b.mask(1, 1));
  EXPECT_EQ(b.ids(1, 2), 6);
  EXPECT_EQ(batches(ds, 1).size(), 2u);
}

TEST(classifier, autoencoder_reconstructs_a_constant_corpus)
{
  auto cfg = AutoencoderConfig::with_depth(2);
  cfg.epochs = 10;
  std::vector<std::vector<int>> corpus(20, std::vector<int>(30, 3));
  double acc = 0;
  const auto enc = train_autoencoder(cfg, corpus, 6, &acc);
  EXPECT_DOUBLE_EQ(acc, 1.0);
  EXPECT_EQ(enc.feature_dim(), 32);
  EXPECT_EQ(enc.num_atoms(), 6);
}

TEST(classifier, autoencoder_loss_trends_down)
{
  auto cfg = AutoencoderConfig::with_depth(1);
  cfg.epochs = 8;
  std::mt19937_64 rng(3);
  std::vector<std::vector<int>> corpus(40);
  for (auto & s : corpus)
    for (int i = 0; i < 25; ++i) s.push_back(static_cast<int>(rng() % 10));
  const auto enc = train_autoencoder(cfg, corpus, 10);
  ASSERT_EQ(enc.epoch_losses.size(), 8u);
  for (std::size_t i = 1; i < enc.epoch_losses.size(); ++i)
    EXPECT_LE(enc.epoch_losses[i], enc.epoch_losses[i - 1] * 1.05);
  EXPECT_LT(enc.epoch_losses.back(), enc.epoch_losses.front());
  EXPECT_EQ(enc.feature_dim(), 64);
}

TEST(classifier, feature_input_model_trains)
{
  auto ae = AutoencoderConfig::with_depth(3);
  ae.epochs = 2;
  auto data = toy(20, 13);
  auto enc = std::make_shared<const FrozenEncoder>(train_autoencoder(ae, data.sequences, 7));
  data.encoder = enc;
  ModelShape shape;
  shape.input = InputKind::Features;
  shape.feature_dim = enc->feature_dim();
  shape.max_len = 10;
  shape.num_classes = 3;
  auto cfg = small_config();
  cfg.num_layers = 1;
  cfg.epochs = 10;
  cfg.batch_size = 16;
  auto out = train_classifier(cfg, data, shape);
  EXPECT_EQ(enc->feature_dim(), 16);
  EXPECT_LT(out.epoch_losses.back(), out.epoch_losses.front());
}
