#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "actlang/bpe.hpp"
#include "actlang/classifier/autoencoder.hpp"
#include "actlang/classifier/batch.hpp"
#include "actlang/errors.hpp"
#include "actlang/tokenizer.hpp"

namespace actlang::classifier {

enum class EncodingMethod { NoEncoding, AE, BPE };

inline std::string_view to_string(EncodingMethod m) {
  switch (m) {
    case EncodingMethod::NoEncoding:
      return "noenc";
    case EncodingMethod::AE:
      return "ae";
    case EncodingMethod::BPE:
      return "bpe";
  }
  return "?";
}

inline std::optional<EncodingMethod> encoding_method_from_string(std::string_view s) {
  if (s == "noenc" || s == "NoEncoding") return EncodingMethod::NoEncoding;
  if (s == "ae" || s == "AE") return EncodingMethod::AE;
  if (s == "bpe" || s == "BPE") return EncodingMethod::BPE;
  return std::nullopt;
}

// Everything needed to turn a window into classifier input ids.
struct EncodingContext {
  EncodingMethod method = EncodingMethod::NoEncoding;
  Alphabet atoms;
  std::optional<bpe::Vocabulary> vocab;           // BPE only
  std::shared_ptr<const FrozenEncoder> encoder;   // AE only
  std::vector<std::string> classes;               // task ids, index = class
  Modality modality = Modality::Joint;
  int window_length = 0;

  // Ids the classifier may see; the pad id equals this value.
  int input_vocab_size() const {
    return method == EncodingMethod::BPE ? static_cast<int>(vocab->size()) : static_cast<int>(atoms.size());
  }
  int pad_id() const { return input_vocab_size(); }

  int class_of(const std::string& task) const {
    const auto it = std::find(classes.begin(), classes.end(), task);
    if (it == classes.end()) throw EncodingError("task '" + task + "' is not a known class");
    return static_cast<int>(it - classes.begin());
  }

  // Method label used in reports: NoEncoding, AE-<depth>, BPE-<k>.
  std::string method_label() const {
    switch (method) {
      case EncodingMethod::NoEncoding:
        return "NoEncoding";
      case EncodingMethod::AE:
        return "AE-" + std::to_string(encoder ? encoder->config.encoder_hidden.size() : 0);
      case EncodingMethod::BPE:
        return "BPE-" + std::to_string(vocab ? vocab->k_requested() : 0);
    }
    return "?";
  }
};

struct EncodedDataset {
  std::vector<bpe::Sequence> sequences;
  std::vector<int> labels;
  std::vector<std::string> participants;
  int pad_id = 0;
  std::shared_ptr<const FrozenEncoder> encoder;

  std::size_t size() const { return sequences.size(); }
};

// Encodes windows per the context: atom ids pass through (NoEncoding, AE) or
// are BPE-encoded, giving variable lengths.
inline EncodedDataset build_dataset(std::span<const WindowSample> windows, const EncodingContext& ctx) {
  EncodedDataset ds;
  ds.pad_id = ctx.pad_id();
  ds.encoder = ctx.method == EncodingMethod::AE ? ctx.encoder : nullptr;
  if (ctx.method == EncodingMethod::BPE && !ctx.vocab) throw std::invalid_argument("BPE encoding needs a vocabulary");
  if (ctx.method == EncodingMethod::AE && !ctx.encoder) throw std::invalid_argument("AE encoding needs an encoder");
  if (windows.empty()) return ds;
  const auto modality = windows.front().modality;
  const auto length = windows.front().tokens.size();
  for (const auto& w : windows) {
    if (w.modality != modality) throw std::invalid_argument("windows mix modalities");
    if (w.tokens.size() != length) throw std::invalid_argument("windows differ in length");
    if (w.tokens.empty()) throw std::invalid_argument("empty window");
    bpe::Sequence ids;
    ids.reserve(w.tokens.size());
    for (const auto& t : w.tokens) {
      const auto text = to_text(t);
      const auto id = ctx.atoms.find(text);
      if (!id || *id == 0) throw EncodingError("window token '" + text + "' is outside the vocabulary");
      ids.push_back(*id);
    }
    if (ctx.method == EncodingMethod::BPE) ids = bpe::encode(std::span<const int>(ids), *ctx.vocab);
    ds.sequences.push_back(std::move(ids));
    ds.labels.push_back(ctx.class_of(w.task_id));
    ds.participants.push_back(w.participant_id);
  }
  return ds;
}

inline PaddedBatch make_batch(const EncodedDataset& ds, std::span<const std::size_t> rows) {
  PaddedBatch b;
  std::size_t max_len = 0;
  for (auto r : rows) max_len = std::max(max_len, ds.sequences.at(r).size());
  const auto B = static_cast<Eigen::Index>(rows.size());
  const auto L = static_cast<Eigen::Index>(max_len);
  b.ids = IdMatrix::Constant(B, L, ds.pad_id);
  b.mask = MaskMatrix::Constant(B, L, true);
  for (Eigen::Index i = 0; i < B; ++i) {
    const auto& seq = ds.sequences[rows[static_cast<std::size_t>(i)]];
    for (std::size_t c = 0; c < seq.size(); ++c) {
      b.ids(i, static_cast<Eigen::Index>(c)) = seq[c];
      b.mask(i, static_cast<Eigen::Index>(c)) = false;
    }
    b.labels.push_back(ds.labels[rows[static_cast<std::size_t>(i)]]);
    if (ds.encoder) {
      nn::Mat<double> f = nn::Mat<double>::Zero(L, ds.encoder->feature_dim());
      f.topRows(static_cast<Eigen::Index>(seq.size())) = ds.encoder->features(seq);
      b.features.push_back(std::move(f));
    }
  }
  return b;
}

// The dataset in order, split into batches of at most batch_size rows.
inline std::vector<PaddedBatch> batches(const EncodedDataset& ds, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<PaddedBatch> out;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    rows.push_back(i);
    if (rows.size() == static_cast<std::size_t>(batch_size) || i + 1 == ds.size()) {
      out.push_back(make_batch(ds, rows));
      rows.clear();
    }
  }
  return out;
}

}  // namespace actlang::classifier
