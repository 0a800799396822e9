#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "actlang/errors.hpp"
#include "actlang/tokenizer.hpp"

namespace actlang::bpe {

inline constexpr int kVocabFormatVersion = 1;

using Sequence = std::vector<int>;
using Corpus = std::vector<Sequence>;
using Merge = std::pair<int, int>;

// Atomic tokens plus the ordered merge list learnt from a corpus. Entry ids
// 0..atoms-1 are atoms; each merge i defines entry atoms+i.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(Alphabet atoms, int k_requested = 0) : atoms_(std::move(atoms)), k_requested_(k_requested) {
    expansions_.clear();
    expansions_.reserve(atoms_.size());
    for (std::size_t i = 0; i < atoms_.size(); ++i) expansions_.push_back({static_cast<int>(i)});
  }

  const Alphabet& atoms() const { return atoms_; }
  const std::vector<Merge>& merges() const { return merges_; }
  int k_requested() const { return k_requested_; }
  std::size_t size() const { return expansions_.size(); }
  int end_of_trial_id() const { return 0; }
  bool is_atomic(int id) const { return id >= 0 && static_cast<std::size_t>(id) < atoms_.size(); }

  // Atomic-token expansion of any entry.
  const Sequence& expansion(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= expansions_.size())
      throw EncodingError("unknown activity id " + std::to_string(id));
    return expansions_[static_cast<std::size_t>(id)];
  }

  int add_merge(int left, int right) {
    const auto n = static_cast<int>(expansions_.size());
    if (left < 0 || right < 0 || left >= n || right >= n)
      throw std::invalid_argument("merge references an undefined id");
    if (left == end_of_trial_id() || right == end_of_trial_id())
      throw std::invalid_argument("end-of-trial marker cannot be merged");
    merges_.emplace_back(left, right);
    Sequence e = expansions_[static_cast<std::size_t>(left)];
    const auto& r = expansions_[static_cast<std::size_t>(right)];
    e.insert(e.end(), r.begin(), r.end());
    expansions_.push_back(std::move(e));
    return n;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.atoms_ == b.atoms_ && a.merges_ == b.merges_ && a.k_requested_ == b.k_requested_;
  }

 private:
  Alphabet atoms_;
  std::vector<Merge> merges_;
  std::vector<Sequence> expansions_{{0}};
  int k_requested_ = 0;
};

namespace detail {

inline std::uint64_t pair_key(int l, int r) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(l)) << 32) | static_cast<std::uint32_t>(r);
}

// Replaces (left,right) by `merged` left to right without overlap. Returns the
// number of replacements.
inline std::size_t apply_merge(Sequence& seq, int left, int right, int merged) {
  if (seq.size() < 2) return 0;
  std::size_t out = 0;
  std::size_t replaced = 0;
  std::size_t i = 0;
  while (i < seq.size()) {
    if (i + 1 < seq.size() && seq[i] == left && seq[i + 1] == right) {
      seq[out++] = merged;
      i += 2;
      ++replaced;
    } else {
      seq[out++] = seq[i++];
    }
  }
  seq.resize(out);
  return replaced;
}

}  // namespace detail

struct LearnTrace {
  Corpus rewritten;                        // corpus after the last merge
  std::vector<std::size_t> corpus_tokens;  // total tokens before merge 0, after merge 1, ...
  std::vector<std::size_t> pair_counts;    // frequency of each chosen pair
};

// Runs up to k merge iterations. Each picks the most frequent adjacent pair
// (ties: smallest (left,right)), never pairing across sequences or with the
// end-of-trial marker, and stops once no pair occurs at least twice.
inline Vocabulary learn(const Corpus& corpus, const Alphabet& atoms, int k, LearnTrace* trace = nullptr) {
  if (corpus.empty()) throw std::invalid_argument("cannot learn a vocabulary from an empty corpus");
  if (k < 1) throw std::invalid_argument("iteration budget k must be >= 1");
  Vocabulary vocab(atoms, k);
  const int eot = vocab.end_of_trial_id();
  Corpus work = corpus;
  std::size_t total = 0;
  for (const auto& s : work) {
    for (int id : s)
      if (!vocab.is_atomic(id)) throw EncodingError("corpus id " + std::to_string(id) + " is not an atom");
    total += s.size();
  }
  if (trace) trace->corpus_tokens.push_back(total);

  std::unordered_map<std::uint64_t, std::size_t> counts;
  for (int it = 0; it < k; ++it) {
    counts.clear();
    for (const auto& s : work)
      for (std::size_t i = 0; i + 1 < s.size(); ++i)
        if (s[i] != eot && s[i + 1] != eot) ++counts[detail::pair_key(s[i], s[i + 1])];
    std::uint64_t best_key = 0;
    std::size_t best = 0;
    for (const auto& [key, c] : counts)
      if (c > best || (c == best && key < best_key)) {
        best = c;
        best_key = key;
      }
    if (best < 2) break;
    const int left = static_cast<int>(best_key >> 32);
    const int right = static_cast<int>(best_key & 0xffffffffu);
    const int merged = vocab.add_merge(left, right);
    std::size_t replaced = 0;
    for (auto& s : work) replaced += detail::apply_merge(s, left, right, merged);
    total -= replaced;
    if (trace) {
      trace->corpus_tokens.push_back(total);
      trace->pair_counts.push_back(best);
    }
  }
  if (trace) trace->rewritten = std::move(work);
  return vocab;
}

// Applies the learnt merges in order to a sequence of atom ids.
inline Sequence encode(std::span<const int> tokens, const Vocabulary& vocab) {
  Sequence seq(tokens.begin(), tokens.end());
  std::vector<std::uint32_t> present(vocab.size(), 0);
  for (int id : seq) {
    if (!vocab.is_atomic(id)) throw EncodingError("id " + std::to_string(id) + " is not an atomic token");
    ++present[static_cast<std::size_t>(id)];
  }
  const auto base = static_cast<int>(vocab.atoms().size());
  const auto& merges = vocab.merges();
  for (std::size_t m = 0; m < merges.size() && seq.size() > 1; ++m) {
    const auto [l, r] = merges[m];
    if (!present[static_cast<std::size_t>(l)] || !present[static_cast<std::size_t>(r)]) continue;
    const int merged = base + static_cast<int>(m);
    const auto n = detail::apply_merge(seq, l, r, merged);
    if (n) {
      present[static_cast<std::size_t>(l)] -= static_cast<std::uint32_t>(n);
      present[static_cast<std::size_t>(r)] -= static_cast<std::uint32_t>(n);
      present[static_cast<std::size_t>(merged)] += static_cast<std::uint32_t>(n);
    }
  }
  return seq;
}

inline Sequence encode(std::span<const ActionToken> tokens, const Vocabulary& vocab) {
  Sequence ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    const auto text = to_text(t);
    const auto id = vocab.atoms().find(text);
    if (!id) throw EncodingError("token '" + text + "' is not in the vocabulary");
    ids.push_back(*id);
  }
  return encode(std::span<const int>(ids), vocab);
}

inline Corpus encode_corpus(const Corpus& corpus, const Vocabulary& vocab) {
  Corpus out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) out.push_back(encode(std::span<const int>(s), vocab));
  return out;
}

inline Sequence decode(std::span<const int> activities, const Vocabulary& vocab) {
  Sequence out;
  for (int id : activities) {
    const auto& e = vocab.expansion(id);
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

inline void save_vocab(const Vocabulary& vocab, std::ostream& out) {
  nlohmann::ordered_json j;
  j["version"] = kVocabFormatVersion;
  j["atoms"] = vocab.atoms().texts();
  auto merges = nlohmann::ordered_json::array();
  for (const auto& [l, r] : vocab.merges()) merges.push_back({l, r});
  j["merges"] = std::move(merges);
  j["k_requested"] = vocab.k_requested();
  out << j.dump(1) << '\n';
}

inline std::string save_vocab(const Vocabulary& vocab) {
  std::ostringstream out;
  save_vocab(vocab, out);
  return out.str();
}

inline Vocabulary load_vocab(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("vocabulary is not valid JSON: ") + e.what());
  }
  try {
    if (!j.is_object()) throw LoadError("vocabulary must be a JSON object");
    if (!j.contains("version") || j["version"] != kVocabFormatVersion)
      throw LoadError("unsupported vocabulary version " + (j.contains("version") ? j["version"].dump() : "<missing>"));
    for (const char* field : {"atoms", "merges", "k_requested"})
      if (!j.contains(field)) throw LoadError(std::string("vocabulary is missing '") + field + "'");
    const auto texts = j["atoms"].get<std::vector<std::string>>();
    Vocabulary v(Alphabet(texts), j["k_requested"].get<int>());
    for (const auto& m : j["merges"]) {
      if (!m.is_array() || m.size() != 2) throw LoadError("merge entries must be [left, right]");
      v.add_merge(m[0].get<int>(), m[1].get<int>());
    }
    return v;
  } catch (const LoadError&) {
    throw;
  } catch (const std::exception& e) {
    throw LoadError(std::string("invalid vocabulary: ") + e.what());
  }
}

inline Vocabulary load_vocab(const std::string& text) {
  std::istringstream in(text);
  return load_vocab(in);
}

}  // namespace actlang::bpe
