#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "chaosrom/io.hpp"

namespace fs = std::filesystem;

namespace {

// One scratch directory shared by the suite; the data file is generated once.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "chaosrom_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ASSERT_EQ(run("gen-data --n-points 100 --rollout 1 --out data.csv"), 0);
    ASSERT_EQ(run("train --method syco --data data.csv --r 4 --hidden 16 --epochs 1 --out syco.txt"), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static int run(const std::string& args) {
    const std::string cmd = "cd '" + dir_.string() + "' && '" CHAOSROM_CLI "' " + args +
                            " > last_stdout.txt 2> last_stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string read(const std::string& name) {
    std::ifstream in(dir_ / name, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  static std::vector<std::string> lines(const std::string& name) {
    std::istringstream in(read(name));
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
  }

  static bool exists(const std::string& name) { return fs::exists(dir_ / name); }

  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, IndivisibleRolloutIsAConfigError) {
  EXPECT_EQ(run("gen-data --n-points 100 --rollout 2 --out bad.csv"), 1);
  EXPECT_NE(read("last_stderr.txt").find("divisible"), std::string::npos);
  EXPECT_FALSE(exists("bad.csv"));
  EXPECT_FALSE(exists("bad.csv.tmp"));
}

TEST_F(Cli, GenDataWritesFiftyBlocksOfTwo) {
  const auto rows = lines("data.csv");
  ASSERT_EQ(rows.size(), 1u + 50 * 2 + 49);
  EXPECT_EQ(rows[0], chaosrom::csv_header(40));
  for (int i = 0; i < 50; ++i) {
    const std::size_t first = 1 + static_cast<std::size_t>(i) * 3;
    EXPECT_FALSE(rows[first].empty());
    EXPECT_FALSE(rows[first + 1].empty());
    if (i < 49) {
      EXPECT_TRUE(rows[first + 2].empty());
    }
  }
  EXPECT_EQ(rows[1].substr(0, 2), "0,");
  EXPECT_EQ(rows[2].substr(0, 21), "0.050000000000000003,");
  EXPECT_EQ(rows[4].substr(0, 2), "6,");
}

TEST_F(Cli, GenDataIsByteIdenticalAcrossRuns) {
  ASSERT_EQ(run("gen-data --n-points 100 --rollout 1 --seed 3 --out again.csv"), 0);
  EXPECT_EQ(read("last_stdout.txt"), "trajectories 50\npoints 100\n");
  EXPECT_EQ(read("again.csv"), read("data.csv"));
}

TEST_F(Cli, ConfigFileWithOverride) {
  std::ofstream(dir_ / "run.cfg") << "# protocol\nn-points = 100\nrollout = 9  # ten per block\n";
  ASSERT_EQ(run("gen-data --config run.cfg --out cfg.csv"), 0);
  EXPECT_EQ(lines("cfg.csv").size(), 1u + 10 * 10 + 9);
  ASSERT_EQ(run("gen-data --config run.cfg --rollout 1 --out cfg.csv"), 0);
  EXPECT_EQ(read("cfg.csv"), read("data.csv"));
  std::ofstream(dir_ / "bad.cfg") << "n-points 100\n";
  EXPECT_EQ(run("gen-data --config bad.cfg --out cfg2.csv"), 1);
  std::ofstream(dir_ / "unknown.cfg") << "no-such-flag = 1\n";
  EXPECT_EQ(run("gen-data --config unknown.cfg --out cfg2.csv"), 1);
}

TEST_F(Cli, HelpListsDefaults) {
  ASSERT_EQ(run("train --help"), 0);
  const std::string help = read("last_stdout.txt");
  for (const char* item : {"--r INT [28]", "--hidden INT [2000]", "--epochs INT [1000]",
                           "--lambda FLOAT [1.6852]", "--omega FLOAT [100]", "--upsilon FLOAT [1]",
                           "--rollout-substeps INT [5]"}) {
    EXPECT_NE(help.find(item), std::string::npos) << item;
  }
  ASSERT_EQ(run("evaluate --help"), 0);
  EXPECT_NE(read("last_stdout.txt").find("--samples INT [10000]"), std::string::npos);
  ASSERT_EQ(run("gen-data --help"), 0);
  EXPECT_NE(read("last_stdout.txt").find("--n-points INT [1000]"), std::string::npos);
}

TEST_F(Cli, OneEpochSycoTraining) {
  const auto log = lines("syco.txt.loss.csv");
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[0], "epoch,lr,loss_total,loss_ae,loss_rinv,loss_full,loss_latent");
  EXPECT_EQ(log[1].substr(0, 2), "1,");
  EXPECT_EQ(lines("syco.txt").front(), "CHAOSROM v1 syco");
}

TEST_F(Cli, AeAndSycoFilesShareLayout) {
  ASSERT_EQ(run("train --method ae --data data.csv --r 4 --hidden 16 --epochs 1 --out ae.txt"), 0);
  const auto ae = lines("ae.txt");
  const auto syco = lines("syco.txt");
  ASSERT_EQ(ae.size(), syco.size());
  EXPECT_EQ(ae[0], "CHAOSROM v1 ae");
  EXPECT_EQ(ae[2], "0");
  EXPECT_EQ(syco[2], "1");
  for (std::size_t i = 0; i < ae.size(); ++i) {
    if (ae[i].rfind("dim ", 0) == 0) {
      EXPECT_EQ(ae[i], syco[i]);
    }
  }
}

TEST_F(Cli, LinearAndQuadraticTraining) {
  ASSERT_EQ(run("train --method dmd --data data.csv --r 28 --out dmd.txt"), 0);
  EXPECT_EQ(lines("dmd.txt").front(), "CHAOSROM v1 dmd");
  ASSERT_EQ(run("train --method quad --data data.csv --r 6 --out quad.txt"), 0);
  EXPECT_EQ(lines("quad.txt").front(), "CHAOSROM v1 quad");
  EXPECT_FALSE(exists("dmd.txt.loss.csv"));
}

TEST_F(Cli, TrainingDivergenceExitsTwo) {
  EXPECT_EQ(run("train --method ae --data data.csv --r 4 --hidden 8 --epochs 30 "
                "--base-lr 1e8 --max-lr 1e8 --out blown.txt"),
            2);
  EXPECT_NE(read("last_stderr.txt").find("epoch"), std::string::npos);
  EXPECT_FALSE(exists("blown.txt"));
  EXPECT_FALSE(exists("blown.txt.loss.csv"));
}

TEST_F(Cli, MissingDataIsAnIoError) {
  EXPECT_EQ(run("train --method dmd --data nowhere.csv --out m.txt"), 1);
  EXPECT_EQ(run("train --method cubic --data data.csv --out m.txt"), 1);
}

TEST_F(Cli, ForecastGridRowCounts) {
  ASSERT_EQ(run("forecast --model syco.txt --data data.csv --init 0 --days 0.25 --out f1.csv"), 0);
  EXPECT_EQ(lines("f1.csv").size(), 1u + 2);
  ASSERT_EQ(run("forecast --model syco.txt --data data.csv --init 5 --days 60 --out f60.csv"), 0);
  const auto rows = lines("f60.csv");
  ASSERT_EQ(rows.size(), 1u + 241);
  EXPECT_EQ(rows.back().substr(0, 3), "60,");
  EXPECT_EQ(read("f60.csv").find('#'), std::string::npos);
}

TEST_F(Cli, TruthForecastStaysOnAttractor) {
  ASSERT_EQ(run("forecast --model truth --data data.csv --init 0 --days 60 --out truth.csv"), 0);
  std::ifstream in(dir_ / "truth.csv");
  const auto traj = chaosrom::read_trajectories(in);
  ASSERT_EQ(traj.size(), 1u);
  ASSERT_EQ(traj[0].size(), 241u);
  for (const auto& x : traj[0].states) EXPECT_LT(x.cwiseAbs().maxCoeff(), 20.0);
}

TEST_F(Cli, ForecastInlineStateAndBadInit) {
  ASSERT_EQ(run("forecast --model truth --init 8,8,8,8.01,8 --days 1 --out inline.csv"), 0);
  EXPECT_EQ(lines("inline.csv").size(), 1u + 5);
  EXPECT_EQ(run("forecast --model truth --data data.csv --init 100 --days 1 --out x.csv"), 1);
  EXPECT_EQ(run("forecast --model truth --init 1,abc --days 1 --out x.csv"), 1);
  EXPECT_FALSE(exists("x.csv"));
}

TEST_F(Cli, ForecastRejectsWrongKindAndCorruptFiles) {
  EXPECT_EQ(run("forecast --model syco.txt --kind dmd --data data.csv --init 0 --days 1 --out k.csv"), 1);
  EXPECT_NE(read("last_stderr.txt").find("syco"), std::string::npos);
  const std::string model = read("syco.txt");
  std::ofstream(dir_ / "cut.txt") << model.substr(0, model.size() / 2);
  EXPECT_EQ(run("forecast --model cut.txt --data data.csv --init 0 --days 1 --out k.csv"), 1);
  EXPECT_NE(read("last_stderr.txt").find("line "), std::string::npos);
  EXPECT_FALSE(exists("k.csv"));
}

TEST_F(Cli, EvaluateTruthIsZero) {
  ASSERT_EQ(run("evaluate --models truth --n-points 100 --samples 40 --days 3 --out kl.csv"), 0);
  const auto rows = lines("kl.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "day,method,kl,excluded,M");
  for (int d = 1; d <= 3; ++d) EXPECT_EQ(rows[d], std::to_string(d) + ",truth,0,0,40");
}

TEST_F(Cli, EvaluateSingleSampleGivesErrorRows) {
  ASSERT_EQ(run("evaluate --models truth --n-points 100 --samples 1 --days 2 --out kl1.csv"), 0);
  const auto rows = lines("kl1.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1], "1,truth,error,0,1");
  EXPECT_EQ(rows[2], "2,truth,error,0,1");
}

TEST_F(Cli, EvaluateFourModelsTenDays) {
  ASSERT_EQ(run("train --method dmd --data data.csv --r 28 --out dmd4.txt"), 0);
  ASSERT_EQ(run("train --method quad --data data.csv --r 6 --out quad4.txt"), 0);
  ASSERT_EQ(run("evaluate --models truth dmd=dmd4.txt quad=quad4.txt syco.txt missing.txt "
                "--n-points 100 --samples 20 --days 10 --out kl4.csv"),
            0);
  const auto rows = lines("kl4.csv");
  ASSERT_EQ(rows.size(), 41u);
  EXPECT_EQ(rows[1].substr(0, 8), "1,truth,");
  EXPECT_EQ(rows[11].substr(0, 6), "1,dmd,");
  EXPECT_EQ(rows[31].substr(0, 7), "1,syco,");
  EXPECT_NE(read("last_stderr.txt").find("missing.txt"), std::string::npos);
  EXPECT_EQ(run("evaluate --models missing.txt --samples 20 --out kl5.csv"), 1);
  EXPECT_FALSE(exists("kl5.csv"));
}
