#include "actlang/vocab_analytics.hpp"

#include <gtest/gtest.h>

#include <random>
#include <string>
#include <vector>

namespace
{
using actlang::Alphabet;
using actlang::bpe::Corpus;
using actlang::bpe::Sequence;
using actlang::bpe::Vocabulary;

Alphabet atoms(std::vector<std::string> texts)
{
  texts.insert(texts.begin(), "<EOT>");
  return Alphabet(texts);
}
}  // namespace

TEST(vocab_analytics, atoms_only_vocabulary)
{
  const auto s = actlang::analytics::vocab_stats(Vocabulary(atoms({"KeyDown_a", "KeyUp_a", "KeyDown_b"})));
  EXPECT_EQ(s.vocab_size, 4u);
  EXPECT_EQ(s.length_min, 1u);
  EXPECT_EQ(s.length_median, 1u);
  EXPECT_EQ(s.length_max, 1u);
  EXPECT_EQ(s.length_histogram.at(1), 3u);
}

TEST(vocab_analytics, one_merge_lengths)
{
  Vocabulary v(atoms({"KeyDown_a", "KeyDown_b"}));
  v.add_merge(1, 2);
  const auto s = actlang::analytics::vocab_stats(v);
  EXPECT_EQ(s.length_min, 1u);
  EXPECT_EQ(s.length_median, 1u);
  EXPECT_EQ(s.length_max, 2u);
  EXPECT_EQ(s.length_histogram.at(1), 2u);
  EXPECT_EQ(s.length_histogram.at(2), 1u);
}

TEST(vocab_analytics, histogram_covers_all_entries_but_the_end_marker)
{
  std::mt19937_64 rng(4);
  Corpus corpus;
  for (int s = 0; s < 20; ++s) {
    Sequence seq;
    for (int i = 0; i < 80; ++i) seq.push_back(1 + static_cast<int>(rng() % 4));
    seq.push_back(0);
    corpus.push_back(seq);
  }
  const auto v = actlang::bpe::learn(corpus, atoms({"KeyDown_a", "KeyDown_b", "KeyDown_c", "KeyDown_d"}), 30);
  const auto s = actlang::analytics::vocab_stats(v);
  std::size_t total = 0;
  for (const auto & [len, n] : s.length_histogram) total += n;
  EXPECT_EQ(total, s.vocab_size - 1);
  EXPECT_LE(s.length_min, s.length_median);
  EXPECT_LE(s.length_median, s.length_max);
}

TEST(vocab_analytics, top_frequent_counts_encoded_activities)
{
  Vocabulary v(atoms({"KeyDown_a", "KeyDown_b"}));
  const int ab = v.add_merge(1, 2);
  const auto top = actlang::analytics::top_frequent({{1, 2, 1, 2, 1, 2, 0}}, v, 5);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].activity_id, ab);
  EXPECT_EQ(top[0].count, 3u);
  EXPECT_EQ(top[0].rendered, "a↓,b↓");
}

TEST(vocab_analytics, top_frequent_edge_cases)
{
  const Vocabulary v(atoms({"KeyDown_a", "KeyDown_b"}));
  EXPECT_TRUE(actlang::analytics::top_frequent({}, v, 3).empty());
  EXPECT_EQ(actlang::analytics::top_frequent({{1, 2, 2, 0}}, v, 100).size(), 2u);
  EXPECT_THROW(actlang::analytics::top_frequent({{1}}, v, 0), std::invalid_argument);
  EXPECT_TRUE(actlang::analytics::top_frequent({{1, 2}}, v, 5, true).empty());
}

TEST(vocab_analytics, top_frequent_ties_prefer_smaller_ids)
{
  const Vocabulary v(atoms({"KeyDown_a", "KeyDown_b", "KeyDown_c"}));
  const auto top = actlang::analytics::top_frequent({{3, 2, 1, 0}}, v, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].activity_id, 1);
  EXPECT_EQ(top[1].activity_id, 2);
}

TEST(vocab_analytics, rendering)
{
  Vocabulary v(atoms({"KeyDown_Space", "KeyUp_Space", "KeyDown_e", "KeyDown_Ctrl", "KeyDown_s", "KeyUp_s",
                      "KeyUp_Ctrl", "Move_Pinpoint_Area1"}));
  const int space = v.add_merge(1, 2);
  const int ctrl_s = v.add_merge(v.add_merge(4, 5), v.add_merge(6, 7));
  EXPECT_EQ(actlang::analytics::render_activity(space, v), "␣↓,␣↑");
  EXPECT_EQ(actlang::analytics::render_activity(3, v), "e↓");
  EXPECT_EQ(actlang::analytics::render_activity(ctrl_s, v), "Ctrl↓,s↓,s↑,Ctrl↑");
  EXPECT_EQ(actlang::analytics::render_activity(8, v), "Move_Pinpoint_Area1");
}

TEST(vocab_analytics, property_counts_times_lengths_equal_corpus_atoms)
{
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    Corpus corpus;
    std::size_t atom_total = 0;
    for (int s = 0; s < 10; ++s) {
      Sequence seq;
      const int n = static_cast<int>(rng() % 60);
      for (int i = 0; i < n; ++i) seq.push_back(1 + static_cast<int>(rng() % 3));
      atom_total += seq.size();
      seq.push_back(0);
      corpus.push_back(seq);
    }
    const auto v = actlang::bpe::learn(corpus, atoms({"KeyDown_a", "KeyDown_b", "KeyDown_c"}), 20);
    std::size_t covered = 0;
    for (const auto & a : actlang::analytics::top_frequent(corpus, v, static_cast<int>(v.size())))
      covered += a.count * v.expansion(a.activity_id).size();
    EXPECT_EQ(covered, atom_total);
  }
}
