#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "npad/experiment.hpp"
#include "npad/records.hpp"
#include "support.hpp"

using npad::testing::read_file;
using npad::testing::TempDir;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = npad::cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    const std::string d = dir().string();
    const CliRun g = run({"gen-data", "--task", "reverse", "--src-content", "4", "--tgt-content", "4",
                       "--min-len", "2", "--max-len", "4", "--train", "60", "--valid", "8",
                       "--test", "6", "--seed", "3", "--output", d});
    ASSERT_EQ(g.code, 0) << g.err;
    const CliRun t = run({"train", "--train", d + "/train.tsv", "--valid", d + "/valid.tsv",
                       "--vocab-src", d + "/src.vocab", "--vocab-tgt", d + "/tgt.vocab", "--d-emb",
                       "4", "--d-hid", "6", "--epochs", "2", "--seed", "1", "--output",
                       d + "/model.bin", "--trace", d + "/trace.csv"});
    ASSERT_EQ(t.code, 0) << t.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::filesystem::path dir() { return dir_->path(); }
  static std::string file(const std::string& name) { return (dir() / name).string(); }
  static std::vector<std::string> model_flags() {
    return {"--model", file("model.bin"), "--vocab-src", file("src.vocab"), "--vocab-tgt",
            file("tgt.vocab")};
  }
  static std::vector<std::string> decode_args(std::vector<std::string> extra) {
    std::vector<std::string> a{"decode"};
    for (auto& s : model_flags()) a.push_back(s);
    a.push_back("--input");
    a.push_back(file("test.tsv"));
    for (auto& s : extra) a.push_back(std::move(s));
    return a;
  }

 private:
  static TempDir* dir_;
};

TempDir* CliTest::dir_ = nullptr;

}  // namespace

TEST_F(CliTest, GenDataAndTrainWriteTheirFiles) {
  for (const char* f : {"src.vocab", "tgt.vocab", "train.tsv", "valid.tsv", "test.tsv", "model.bin",
                        "trace.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir() / f)) << f;
  }
  EXPECT_EQ(line_count(read_file(dir() / "test.tsv")), 6u);
  EXPECT_EQ(line_count(read_file(dir() / "trace.csv")), 3u);
}

TEST_F(CliTest, GreedyDecodeEmitsJsonLines) {
  const CliRun r = run(decode_args({"--strategy", "greedy"}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(r.out), 6u);
  std::istringstream in(r.out);
  std::size_t i = 0;
  for (std::string line; std::getline(in, line); ++i) {
    const npad::DecodeRecord rec = npad::parse_decode_record(line);
    EXPECT_EQ(rec.input_id, i);
    EXPECT_EQ(rec.strategy, "greedy");
    EXPECT_FALSE(rec.seed.has_value());
    EXPECT_LE(rec.logp, 0.0);
  }
}

TEST_F(CliTest, NpadDecodeIsSeededAndTraced) {
  const auto args = decode_args({"--strategy", "npad", "--sigma0", "0.5", "--chains", "4", "--seed",
                                 "9", "--trace", file("chains.jsonl")});
  const CliRun a = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  const std::string trace = read_file(dir() / "chains.jsonl");
  EXPECT_EQ(line_count(trace), 24u);
  const CliRun b = run(args);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(trace, read_file(dir() / "chains.jsonl"));
  EXPECT_NE(a.out.find("\"seed\":"), std::string::npos);
  EXPECT_EQ(a.out.find("\"seed\":null"), std::string::npos);
}

TEST_F(CliTest, FlagValidationErrors) {
  CliRun r = run(decode_args({"--strategy", "npad", "--chains", "0", "--seed", "1"}));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("chains"), std::string::npos) << r.err;
  EXPECT_EQ(line_count(r.err), 1u);

  r = run(decode_args({"--strategy", "npad", "--chains", "3"}));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("--seed"), std::string::npos) << r.err;

  r = run(decode_args({"--strategy", "viterbi"}));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("viterbi"), std::string::npos) << r.err;

  r = run(decode_args({"--frobnicate", "1"}));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("usage error"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("frobnicate"), std::string::npos) << r.err;

  r = run({"gen-data", "--output", file("nope")});
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(std::filesystem::exists(dir() / "nope"));
}

TEST_F(CliTest, MissingAndMismatchedFiles) {
  CliRun r = run({"decode", "--model", file("absent.bin"), "--vocab-src", file("src.vocab"),
               "--vocab-tgt", file("tgt.vocab"), "--input", file("test.tsv")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("absent.bin"), std::string::npos) << r.err;

  {
    std::ofstream(dir() / "big.vocab") << read_file(dir() / "tgt.vocab") << "extra\n";
  }
  r = run({"decode", "--model", file("model.bin"), "--vocab-src", file("src.vocab"), "--vocab-tgt",
           file("big.vocab"), "--input", file("test.tsv")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("do not match"), std::string::npos) << r.err;

  r = run({"report", "--input", file("trace.csv")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("header"), std::string::npos) << r.err;
}

TEST_F(CliTest, ScoreMatchesDecodedLogp) {
  std::vector<std::string> a{"score"};
  for (auto& s : model_flags()) a.push_back(s);
  a.push_back("--input");
  a.push_back(file("test.tsv"));
  const CliRun r = run(a);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(r.out), 6u);
  EXPECT_NE(r.out.find("\"logp\":"), std::string::npos);
}

TEST_F(CliTest, ExperimentIsByteIdenticalAcrossRunsAndWorkers) {
  {
    std::ofstream spec(dir() / "chains.cfg");
    spec << "model = model.bin\nvocab_src = src.vocab\nvocab_tgt = tgt.vocab\ntest = test.tsv\n"
            "layout = chains\n"
            "cell greedy\ncell sample chains=5\n"
            "cell npad sigma0=0.5 chains=5\ncell npad sigma0=0.5 chains=10\n"
            "cell npad inner=beam beam_width=2 sigma0=0.2 chains=3\n";
  }
  auto experiment = [&](const std::string& out, const std::string& workers) {
    return run({"experiment", "--spec", file("chains.cfg"), "--seed", "7", "--workers", workers,
                "--output", file(out)});
  };
  const CliRun a = experiment("a.csv", "1");
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(experiment("b.csv", "1").code, 0);
  ASSERT_EQ(experiment("c.csv", "3").code, 0);
  const std::string csv = read_file(dir() / "a.csv");
  EXPECT_EQ(csv, read_file(dir() / "b.csv"));
  EXPECT_EQ(csv, read_file(dir() / "c.csv"));
  EXPECT_EQ(line_count(csv), 6u);
  EXPECT_FALSE(std::filesystem::exists(dir() / "a.csv.tmp"));

  const CliRun rep = run({"report", "--input", file("a.csv")});
  ASSERT_EQ(rep.code, 0) << rep.err;
  for (const char* label : {"greedy", "sample", "npad+beam"}) {
    EXPECT_NE(rep.out.find(label), std::string::npos) << label;
  }
  std::istringstream csv_in(csv);
  const auto rows = npad::read_results_csv(csv_in);
  EXPECT_EQ(rows.size(), 5u);

  const CliRun no_seed = run({"experiment", "--spec", file("chains.cfg")});
  EXPECT_NE(no_seed.code, 0);
  EXPECT_NE(no_seed.err.find("seed"), std::string::npos) << no_seed.err;
}

TEST_F(CliTest, FailedCellStillWritesOthers) {
  {
    std::ofstream spec(dir() / "mixed.cfg");
    spec << "model = model.bin\nvocab_src = src.vocab\nvocab_tgt = tgt.vocab\ntest = test.tsv\n"
            "seed = 1\nmax_len = 12\ncell exact\ncell greedy\n";
  }
  const CliRun r = run({"experiment", "--spec", file("mixed.cfg"), "--output", file("mixed.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("cell failed: exact"), std::string::npos) << r.err;
  EXPECT_EQ(line_count(read_file(dir() / "mixed.csv")), 2u);
}

TEST_F(CliTest, ReportHeaderOnly) {
  {
    std::ofstream(dir() / "empty.csv") << npad::kResultsHeader << '\n';
  }
  const CliRun r = run({"report", "--input", file("empty.csv")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(r.out), 2u);
}

TEST_F(CliTest, FailedCommandLeavesExistingOutputUntouched) {
  {
    std::ofstream(dir() / "keep.jsonl") << "previous\n";
  }
  const CliRun r = run(decode_args({"--strategy", "exact", "--max-len", "12", "--output",
                                 file("keep.jsonl")}));
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(read_file(dir() / "keep.jsonl"), "previous\n");
}

TEST(Cli, HelpAndMissingSubcommand) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_NE(run({}).code, 0);
  EXPECT_NE(run({"translate"}).code, 0);
}
