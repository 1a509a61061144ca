/*
 * Copyright 2026 The cset Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cset/cli.h"

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "cset/conformal.h"
#include "cset/score_store.h"
#include "test_util.h"

namespace cset {
namespace {

namespace fs = std::filesystem;
using testing::Probs;
using testing::TempDir;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cset");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

TEST(Cli, HelpListsFlags) {
  const CliRun r = Cli({"experiment", "--help"});
  EXPECT_EQ(r.code, kExitOk);
  for (const char* flag :
       {"--alpha", "--method", "--lambda", "--k-reg", "--seed", "--deterministic",
        "--trials", "--cal-size", "--eval-size", "--tune-size", "--out",
        "--tune-objective", "--lambda-grid", "--strata", "--t-lo", "--t-hi",
        "--t-tol", "--temperature"}) {
    EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
  }
  EXPECT_EQ(Cli({}).code, kExitUsage);
  EXPECT_EQ(Cli({"bogus"}).code, kExitUsage);
}

TEST(Cli, ExitCodes) {
  const std::string dir = TempDir("cli_codes");
  // Usage errors are caught before the missing file is touched.
  EXPECT_EQ(Cli({"calibrate", "--scores", "/nope.csv", "--alpha", "1.5"}).code,
            kExitUsage);
  const CliRun io = Cli({"calibrate", "--scores", "/nope/missing.csv", "--out", dir});
  EXPECT_EQ(io.code, kExitIo);
  EXPECT_NE(io.err.find("/nope/missing.csv"), std::string::npos);
  std::ofstream(dir + "/bad.csv") << "scores,K=2\n0.5,0.5,7\n";
  EXPECT_EQ(Cli({"calibrate", "--scores", dir + "/bad.csv", "--out", dir}).code,
            kExitData);
  EXPECT_EQ(Cli({"calibrate", "--scores", dir + "/bad.csv", "--method", "x",
                 "--out", dir})
                .code,
            kExitUsage);
}

std::string FourRowFixture(const std::string& dir) {
  const auto row = [](double top) {
    std::vector<double> r = {top};
    for (int j = 0; j < 8; ++j) r.push_back((1.0 - top) / 8);
    return r;
  };
  const std::string path = dir + "/cal.csv";
  SaveScores(Probs({row(0.2), row(0.5), row(0.7), row(0.9)}, {0, 0, 0, 0}), path,
             ScoreFormat::kCsv);
  return path;
}

TEST(Cli, CalibrateWritesModel) {
  const std::string dir = TempDir("cli_cal");
  const CliRun r = Cli({"calibrate", "--scores", FourRowFixture(dir), "--method",
                     "raps", "--alpha", "0.5", "--deterministic", "--out", dir});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out, "method=raps tau_hat=0.7 n_cal=4\n");
  const ConformalModel m = LoadModel(dir + "/model.txt");
  EXPECT_EQ(m.tau_hat, 0.7);
  EXPECT_NE(Slurp(dir + "/model.txt").find("tau_hat = 0.7\n"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir + "/config.ini"));
}

TEST(Cli, PredictHandExampleAndInfinity) {
  const std::string dir = TempDir("cli_pred");
  SaveScores(Probs({{0.5, 0.3, 0.2}, {0.1, 0.2, 0.7}}, {0, 2}), dir + "/s.csv",
             ScoreFormat::kCsv);
  ConformalModel m;
  m.spec.method = Method::kAps;
  m.spec.randomized = false;
  m.tau_hat = 0.85;
  m.num_classes = 3;
  SaveModel(m, dir + "/m.txt");
  CliRun r = Cli({"predict", "--model", dir + "/m.txt", "--scores", dir + "/s.csv",
               "--out", dir});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto lines = Lines(Slurp(dir + "/predictions.txt"));
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], "0 2 0,1");

  m.tau_hat = std::numeric_limits<double>::infinity();
  SaveModel(m, dir + "/inf.txt");
  r = Cli({"predict", "--model", dir + "/inf.txt", "--scores", dir + "/s.csv",
           "--out", dir});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  lines = Lines(Slurp(dir + "/predictions.txt"));
  EXPECT_EQ(lines[0], "0 3 0,1,2");
  EXPECT_EQ(lines[1], "1 3 2,1,0");

  m.num_classes = 4;
  SaveModel(m, dir + "/k4.txt");
  EXPECT_EQ(Cli({"predict", "--model", dir + "/k4.txt", "--scores",
                 dir + "/s.csv", "--out", dir})
                .code,
            kExitData);
}

TEST(Cli, DeterministicPredictIgnoresSeed) {
  const std::string dir = TempDir("cli_det");
  ASSERT_EQ(Cli({"synth", "--n", "600", "--k", "10", "--seed", "3", "--out",
                 dir + "/syn"})
                .code,
            kExitOk);
  ASSERT_EQ(Cli({"calibrate", "--scores", dir + "/syn/scores.cset", "--method",
                 "aps", "--out", dir + "/cal"})
                .code,
            kExitOk);
  std::string first;
  for (const char* seed : {"1", "2"}) {
    const CliRun r = Cli({"predict", "--model", dir + "/cal/model.txt", "--scores",
                       dir + "/syn/scores.cset", "--deterministic", "--seed",
                       seed, "--out", dir + "/p" + seed});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const std::string text = Slurp(dir + "/p" + seed + "/predictions.txt");
    if (first.empty()) first = text;
    EXPECT_EQ(text, first);
  }
  const CliRun ev = Cli({"evaluate", "--model", dir + "/cal/model.txt", "--scores",
                      dir + "/syn/scores.cset", "--out", dir + "/ev"});
  ASSERT_EQ(ev.code, kExitOk) << ev.err;
  EXPECT_NE(ev.out.find("coverage="), std::string::npos);
  EXPECT_TRUE(fs::exists(dir + "/ev/strata.csv"));
}

TEST(Cli, LogitWorkflow) {
  const std::string dir = TempDir("cli_logits");
  std::ofstream(dir + "/l.csv") << "scores,K=3,kind=logits\n"
                                << "2,0,-1,0\n0,1.5,0,1\n1,1,3,2\n0.5,0,0,0\n"
                                << "-1,2,0,1\n0,0,1,0\n";
  const CliRun fit = Cli({"fit-temp", "--scores", dir + "/l.csv", "--out", dir});
  ASSERT_EQ(fit.code, kExitOk) << fit.err;
  EXPECT_NE(Slurp(dir + "/temperature.txt").find("temperature = "),
            std::string::npos);
  ASSERT_EQ(Cli({"calibrate", "--scores", dir + "/l.csv", "--method", "lac",
                 "--alpha", "0.3", "--out", dir})
                .code,
            kExitOk);
  EXPECT_TRUE(LoadModel(dir + "/model.txt").temperature.has_value());
  EXPECT_EQ(Cli({"predict", "--model", dir + "/model.txt", "--scores",
                 dir + "/l.csv", "--out", dir})
                .code,
            kExitOk);
}

TEST(Cli, IngestSplitsAndTunes) {
  const std::string dir = TempDir("cli_ingest");
  ASSERT_EQ(Cli({"synth", "--n", "1000", "--k", "20", "--corruption",
                 "tail_permute:2", "--out", dir})
                .code,
            kExitOk);
  const auto manifest = Slurp(dir + "/manifest.json");
  EXPECT_NE(manifest.find("\"tail_permute:2\""), std::string::npos);
  const CliRun r = Cli({"ingest", "--scores", dir + "/scores.cset", "--tune-size",
                     "300", "--cal-size", "300", "--eval-size", "400",
                     "--output-format", "csv", "--out", dir + "/split"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(LoadScores(dir + "/split/tuning.csv", ScoreFormat::kCsv).rows(), 300u);
  const CliRun t = Cli({"tune", "--scores", dir + "/split/tuning.csv",
                     "--tune-objective", "adaptiveness", "--lambda-grid",
                     "0.001,0.1", "--out", dir + "/tune"});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  EXPECT_EQ(Lines(Slurp(dir + "/tune/tune_grid.csv")).size(), 3u);
}

TEST(Cli, ExperimentEmitsAllArtifacts) {
  const std::string dir = TempDir("cli_exp");
  const CliRun r = Cli({"experiment", "--n", "3000", "--k", "50", "--corruption",
                     "tail_permute:3", "--trials", "1", "--tune-size", "500",
                     "--cal-size", "1000", "--eval-size", "1500", "--out", dir});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f :
       {"summary.txt", "summary.csv", "trials.csv", "hist_top_k.csv",
        "hist_naive.csv", "hist_aps.csv", "hist_raps.csv", "hist_lac.csv",
        "strata.txt", "strata.csv", "difficulty.txt", "difficulty.csv",
        "sweep.txt", "sweep.csv", "config.ini"}) {
    EXPECT_TRUE(fs::exists(dir + "/" + f)) << f;
  }
  const auto summary = Lines(Slurp(dir + "/summary.csv"));
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_EQ(summary[0],
            "model,top1,top5,coverage_top_k,coverage_naive,coverage_aps,"
            "coverage_raps,coverage_lac,size_top_k,size_naive,size_aps,"
            "size_raps,size_lac");
  const auto sweep = Lines(Slurp(dir + "/sweep.csv"));
  ASSERT_EQ(sweep.size(), 6u);
  EXPECT_EQ(sweep[0],
            "k_reg,lambda_0,lambda_0.0001,lambda_0.001,lambda_0.01,"
            "lambda_0.02,lambda_0.05,lambda_0.2,lambda_0.5,lambda_0.7,lambda_1");
  EXPECT_EQ(sweep[1].substr(0, 2), "1,");
  EXPECT_EQ(sweep[5].substr(0, 3), "50,");
  const auto strata = Lines(Slurp(dir + "/strata.csv"));
  EXPECT_EQ(strata.size(), 6u);
  EXPECT_EQ(strata[1].substr(0, 7), "0 to 1,");
  const auto difficulty = Lines(Slurp(dir + "/difficulty.csv"));
  EXPECT_EQ(difficulty.size(), 7u);

  const CliRun one = Cli({"experiment", "--n", "2000", "--k", "20", "--methods",
                       "aps", "--trials", "1", "--no-sweep", "--out",
                       dir + "/one"});
  ASSERT_EQ(one.code, kExitOk) << one.err;
  EXPECT_TRUE(fs::exists(dir + "/one/hist_aps.csv"));
}

TEST(Cli, ConfigFileAndPrecedence) {
  const std::string dir = TempDir("cli_config");
  std::ofstream(dir + "/c.ini") << "[synth]\nn=321\nk=7\nseed=5\n";
  ASSERT_EQ(Cli({"--config", dir + "/c.ini", "synth", "--k", "9", "--out", dir})
                .code,
            kExitOk);
  const ScoreMatrix m = LoadScores(dir + "/scores.cset", ScoreFormat::kBinary);
  EXPECT_EQ(m.rows(), 321u);
  EXPECT_EQ(m.classes(), 9u);
  const std::string echo = Slurp(dir + "/config.ini");
  EXPECT_NE(echo.find("n=321"), std::string::npos);
  EXPECT_NE(echo.find("k=9"), std::string::npos);
}

}  // namespace
}  // namespace cset
