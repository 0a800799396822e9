#include "actlang/io.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef ACTLANG_CLI
#error "ACTLANG_CLI must name the actlang executable"
#endif

namespace
{
namespace fs = std::filesystem;

class Cli : public ::testing::Test
{
protected:
  fs::path dir;

  void SetUp() override
  {
    const auto * info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("actlang_cli_") + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  // Runs the tool inside the scratch dir and returns its exit code.
  int run(const std::string & args) const
  {
    const std::string cmd =
      "cd '" + dir.string() + "' && '" ACTLANG_CLI "' " + args + " > cli.log 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string file(const std::string & name) const { return actlang::io::read_file(dir / name); }

  void synth_and_tokenize(const std::string & extra = "") const
  {
    ASSERT_EQ(run("synth --out ev.jsonl --participants 3 --trials 1 --events 300 --seed 5 " + extra), 0);
    ASSERT_EQ(run("tokenize --in ev.jsonl --out tok.txt --modality joint"), 0);
  }
};
}  // namespace

TEST_F(Cli, rerun_reproduces_outputs_byte_for_byte)
{
  synth_and_tokenize();
  ASSERT_EQ(run("learn-vocab --tokens tok.txt --out vocab.json --k 30"), 0);
  ASSERT_EQ(run("cross-validate --tokens tok.txt --method bpe --k 10 --folds 3 --epochs 1 --layers 1 "
                "--window 60 --out cv.csv"),
            0);
  const auto cv = file("cv.csv");
  const auto vocab = file("vocab.json");
  EXPECT_EQ(run("rerun cv.csv.manifest.json"), 0);
  EXPECT_EQ(run("rerun vocab.json.manifest.json"), 0);
  EXPECT_EQ(file("cv.csv"), cv);
  EXPECT_EQ(file("vocab.json"), vocab);

  // A recorded hash that the regenerated output cannot match is a mismatch.
  auto m = nlohmann::json::parse(file("vocab.json.manifest.json"));
  m["outputs"][0]["fnv1a64"] = "0000000000000000";
  std::ofstream(dir / "vocab.json.manifest.json") << m.dump();
  EXPECT_EQ(run("rerun vocab.json.manifest.json"), 3);

  // A changed input is refused before anything runs.
  std::ofstream(dir / "tok.txt", std::ios::app) << "\n";
  EXPECT_EQ(run("rerun cv.csv.manifest.json"), 2);
}

TEST_F(Cli, manifest_records_inputs_and_outputs)
{
  synth_and_tokenize();
  const auto m = nlohmann::json::parse(file("tok.txt.manifest.json"));
  EXPECT_EQ(m.at("command"), "tokenize");
  EXPECT_EQ(m.at("tool"), "actlang");
  EXPECT_FALSE(m.at("inputs").empty());
  EXPECT_FALSE(m.at("outputs").empty());
}

TEST_F(Cli, emaki_mouse_alphabet_has_25_atoms)
{
  ASSERT_EQ(run("synth --out ev.jsonl --participants 2 --trials 1 --events 200 --dataset-profile emaki"), 0);
  ASSERT_EQ(run("tokenize --in ev.jsonl --out tok.txt --modality mouse"), 0);
  ASSERT_EQ(run("learn-vocab --tokens tok.txt --out vocab.json --k 5"), 0);
  const auto v = nlohmann::json::parse(file("vocab.json"));
  EXPECT_EQ(v.at("atoms").size(), 25u);
}

TEST_F(Cli, csv_outputs_have_expected_headers)
{
  synth_and_tokenize();
  ASSERT_EQ(run("learn-vocab --tokens tok.txt --out vocab.json --k 20"), 0);
  ASSERT_EQ(run("vocab-stats --vocab vocab.json --out stats.csv"), 0);
  EXPECT_EQ(file("stats.csv").substr(0, 44), "modality,dataset_profile,k,size,min,median,m");
  ASSERT_EQ(run("top-activities --tokens tok.txt --vocab vocab.json --out top.json --n 5"), 0);
  EXPECT_TRUE(nlohmann::json::parse(file("top.json")).is_object() ||
              nlohmann::json::parse(file("top.json")).is_array());
  ASSERT_EQ(run("task-distance --in ev.jsonl --out dist.csv"), 0);
  ASSERT_EQ(run("proficiency --in ev.jsonl --out prof.csv"), 0);
  EXPECT_FALSE(file("dist.csv").empty());
  EXPECT_FALSE(file("prof.csv").empty());
}

TEST_F(Cli, exit_codes)
{
  EXPECT_EQ(run("no-such-command"), 1);
  EXPECT_EQ(run("tokenize --in x.jsonl --out y.txt --bogus"), 1);
  EXPECT_EQ(run("tokenize --in missing.jsonl --out y.txt"), 2);
  synth_and_tokenize();
  EXPECT_EQ(run("evaluate --model missing.json --tokens tok.txt --out e.json"), 2);
  std::ofstream(dir / "bad.txt") << "not a token file\n";
  EXPECT_EQ(run("learn-vocab --tokens bad.txt --out v.json"), 2);
  EXPECT_FALSE(fs::exists(dir / "v.json"));
}

TEST_F(Cli, train_then_evaluate)
{
  synth_and_tokenize();
  ASSERT_EQ(run("train --tokens tok.txt --out model.json --method bpe --k 10 --epochs 1 --layers 1 --window 60 "
                "--participants P01,P02"),
            0);
  ASSERT_EQ(run("evaluate --model model.json --tokens tok.txt --participants P03 --out eval.json"), 0);
  const auto e = nlohmann::json::parse(file("eval.json"));
  ASSERT_TRUE(e.contains("macro_f1"));
  EXPECT_GE(e.at("macro_f1").get<double>(), 0.0);
  EXPECT_LE(e.at("macro_f1").get<double>(), 1.0);
}
