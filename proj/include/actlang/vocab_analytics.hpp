#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "actlang/bpe.hpp"

namespace actlang::analytics {

struct VocabStats {
  std::size_t vocab_size = 0;
  std::size_t length_min = 0;
  std::size_t length_median = 0;
  std::size_t length_max = 0;
  std::map<std::size_t, std::size_t> length_histogram;  // length -> entries
};

// Activity lengths over every entry but the end-of-trial marker. The median is
// the lower median.
inline VocabStats vocab_stats(const bpe::Vocabulary& vocab) {
  VocabStats s;
  s.vocab_size = vocab.size();
  std::vector<std::size_t> lengths;
  for (int id = 0; id < static_cast<int>(vocab.size()); ++id) {
    if (id == vocab.end_of_trial_id()) continue;
    lengths.push_back(vocab.expansion(id).size());
  }
  if (lengths.empty()) return s;
  std::sort(lengths.begin(), lengths.end());
  s.length_min = lengths.front();
  s.length_max = lengths.back();
  s.length_median = lengths[(lengths.size() - 1) / 2];
  for (auto len : lengths) ++s.length_histogram[len];
  return s;
}

struct FrequentActivity {
  int activity_id = 0;
  std::string rendered;
  std::size_t count = 0;
};

inline std::string short_form(const std::string& atom_text) {
  auto key_glyph = [](const std::string& key) -> std::string {
    if (key == "Space") return "␣";
    if (key == "Backspace") return "⇐";
    return key;
  };
  const auto token = token_from_text(atom_text);
  if (const auto* k = std::get_if<KeyToken>(&token))
    return key_glyph(k->key) + (k->action == KeyAction::Down ? "↓" : "↑");
  return atom_text;
}

// Comma-joined short forms of an activity's atoms, e.g. "Ctrl↓,s↓,s↑,Ctrl↑".
inline std::string render_activity(int activity_id, const bpe::Vocabulary& vocab) {
  std::string out;
  for (int atom : vocab.expansion(activity_id)) {
    if (!out.empty()) out += ',';
    out += short_form(vocab.atoms().text(atom));
  }
  return out;
}

// Counts activities as emitted by encoding the corpus; ties go to the smaller id.
inline std::vector<FrequentActivity> top_frequent(const bpe::Corpus& corpus, const bpe::Vocabulary& vocab, int n,
                                                  bool merged_only = false) {
  if (n <= 0) throw std::invalid_argument("n must be positive");
  std::vector<std::size_t> counts(vocab.size(), 0);
  for (const auto& seq : corpus)
    for (int id : bpe::encode(std::span<const int>(seq), vocab))
      if (id != vocab.end_of_trial_id()) ++counts[static_cast<std::size_t>(id)];
  std::vector<int> ids;
  for (int id = 0; id < static_cast<int>(counts.size()); ++id) {
    if (!counts[static_cast<std::size_t>(id)]) continue;
    if (merged_only && vocab.is_atomic(id)) continue;
    ids.push_back(id);
  }
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
  });
  if (ids.size() > static_cast<std::size_t>(n)) ids.resize(static_cast<std::size_t>(n));
  std::vector<FrequentActivity> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back({id, render_activity(id, vocab), counts[static_cast<std::size_t>(id)]});
  return out;
}

}  // namespace actlang::analytics
