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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cset/conformal.h"
#include "cset/error.h"
#include "cset/eval.h"
#include "cset/platt.h"
#include "cset/random.h"
#include "cset/report.h"
#include "cset/score_store.h"
#include "cset/synth.h"
#include "cset/trials.h"
#include "cset/tuning.h"

namespace cset {
namespace {

namespace fs = std::filesystem;

struct Options {
  // Common.
  double alpha = 0.1;
  std::string method = "raps";
  double lambda = 0.01;
  int k_reg = 5;
  uint64_t seed = 0;
  bool deterministic = false;
  size_t trials = 1;
  std::optional<size_t> cal_size;
  std::optional<size_t> eval_size;
  std::optional<size_t> tune_size;
  std::string out = ".";

  // Inputs.
  std::string scores;
  std::string format;
  std::string model;

  // Temperature.
  std::optional<double> temperature;
  double t_lo = TemperatureBracket{}.lo;
  double t_hi = TemperatureBracket{}.hi;
  double t_tol = TemperatureBracket{}.tol;
  bool nested_platt = false;

  // Tuning and evaluation.
  std::string tune_objective = "size";
  std::vector<double> lambda_grid;
  std::string strata = FormatRanges(DefaultSizeStrata());
  std::string difficulty_bins = FormatRanges(DefaultDifficultyBins());
  bool boundary_inclusive = false;

  // Synthetic data.
  size_t n = 10000;
  size_t k = 100;
  std::optional<double> concentration;
  std::string corruption = "none";

  // ingest.
  std::string output_format = "binary";

  // experiment.
  std::vector<std::string> methods = {"fixed_k", "naive", "aps", "raps", "lac"};
  std::vector<double> study_lambdas = {0, 0.001, 0.01, 0.1, 1};
  std::vector<double> sweep_lambdas = {0,    1e-4, 1e-3, 0.01, 0.02,
                                       0.05, 0.2,  0.5,  0.7,  1.0};
  std::vector<int> sweep_k_regs = {1, 2, 5, 10, 50};
  bool no_sweep = false;
  std::string name;
};

// --- option registration -------------------------------------------------

const CLI::Validator kOpenUnit(
    [](std::string& s) -> std::string {
      try {
        const double v = std::stod(s);
        if (v > 0 && v < 1) return {};
      } catch (const std::exception&) {
      }
      return "must be a number strictly between 0 and 1";
    },
    "(0,1)");

void AddCommon(CLI::App* cmd, Options& o) {
  cmd->add_option("--alpha", o.alpha, "Miscoverage level in (0,1)")
      ->check(kOpenUnit)
      ->capture_default_str();
  cmd->add_option("--method", o.method,
                  "naive, aps, raps, lac or fixed_k")
      ->capture_default_str();
  cmd->add_option("--lambda", o.lambda, "RAPS rank penalty")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--k-reg", o.k_reg, "RAPS penalty-free ranks")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  cmd->add_flag("--deterministic", o.deterministic,
                "Use u = 1 instead of random boundary inclusion");
  cmd->add_option("--trials", o.trials, "Number of random-split trials")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--cal-size", o.cal_size, "Calibration rows per trial");
  cmd->add_option("--eval-size", o.eval_size, "Evaluation rows per trial");
  cmd->add_option("--tune-size", o.tune_size, "Tuning rows per trial");
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
}

void AddScoresInput(CLI::App* cmd, Options& o, bool required) {
  auto* opt = cmd->add_option("--scores", o.scores,
                              "Score file (.csv, anything else is binary)");
  if (required) opt->required();
  cmd->add_option("--format", o.format, "Override the input format")
      ->check(CLI::IsMember({"csv", "binary"}));
}

void AddTemperature(CLI::App* cmd, Options& o) {
  cmd->add_option("--temperature", o.temperature,
                  "Fixed softmax temperature for logit inputs")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--t-lo", o.t_lo, "Temperature search lower bound")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--t-hi", o.t_hi, "Temperature search upper bound")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--t-tol", o.t_tol, "Temperature search tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void AddTuning(CLI::App* cmd, Options& o, bool allow_none) {
  std::vector<std::string> choices = {"size", "adaptiveness"};
  if (allow_none) choices.push_back("none");
  cmd->add_option("--tune-objective", o.tune_objective,
                  allow_none ? "RAPS tuning: size, adaptiveness or none"
                             : "Tuning objective: size or adaptiveness")
      ->check(CLI::IsMember(choices))
      ->capture_default_str();
  cmd->add_option("--lambda-grid", o.lambda_grid,
                  "Comma-separated lambda values (default depends on the "
                  "objective)")
      ->delimiter(',');
}

void AddStrata(CLI::App* cmd, Options& o) {
  cmd->add_option("--strata", o.strata, "Set-size strata, e.g. 0-1,2-3,4-10")
      ->capture_default_str();
  cmd->add_option("--difficulty-bins", o.difficulty_bins,
                  "Label-rank bins for the difficulty table")
      ->capture_default_str();
}

void AddSynth(CLI::App* cmd, Options& o) {
  cmd->add_option("--n", o.n, "Synthetic rows")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--k", o.k, "Synthetic classes")
      ->check(CLI::Range(size_t{2}, size_t{1} << 20))
      ->capture_default_str();
  cmd->add_option("--concentration", o.concentration,
                  "Dirichlet concentration (default 0.05 * K)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--corruption", o.corruption,
                  "none, temperature:<t> or tail_permute:<m>")
      ->capture_default_str();
}

// --- helpers --------------------------------------------------------------

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir);
  }
}

std::string OutPath(const Options& o, const std::string& file) {
  return (fs::path(o.out) / file).string();
}

void WriteFile(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

ScoreMatrix LoadInput(const Options& o) {
  const ScoreFormat format =
      o.format.empty() ? FormatFromPath(o.scores) : ParseScoreFormat(o.format);
  return LoadScores(o.scores, format);
}

TemperatureBracket Bracket(const Options& o) {
  if (!(o.t_lo < o.t_hi)) throw UsageError("--t-lo must be below --t-hi");
  return {o.t_lo, o.t_hi, o.t_tol};
}

MethodSpec SpecFromOptions(const Options& o) {
  MethodSpec spec;
  spec.method = ParseMethod(o.method);
  spec.alpha = o.alpha;
  spec.lambda = o.lambda;
  spec.k_reg = o.k_reg;
  spec.randomized = !o.deterministic;
  spec.boundary_inclusive = o.boundary_inclusive;
  spec.Validate();
  return spec;
}

// Sorted probabilities. Logits are softmaxed at `temperature`, or at a
// temperature fitted on the same rows when none is given; the temperature
// used is returned through `used`.
SortedScores SortedProbabilities(const ScoreMatrix& scores, uint64_t seed,
                                 std::optional<double> temperature,
                                 const TemperatureBracket& bracket,
                                 std::optional<double>* used) {
  const uint64_t tie_seed = DeriveSeed(seed, streams::kTieBreak);
  if (scores.kind() == ScoreKind::kProbabilities) {
    if (used) used->reset();
    return SortScores(scores, tie_seed);
  }
  const double t =
      temperature ? *temperature : FitTemperature(scores, bracket).temperature;
  if (used) *used = t;
  return ApplyTemperature(SortAnyScores(scores, tie_seed), t);
}

// The active subcommand's options, in a form --config reads back. Unset
// optional values are left out.
std::string EchoConfig(const CLI::App& app) {
  std::string text = "# cset configuration\n";
  for (const CLI::App* sub : app.get_subcommands()) {
    text += "[" + sub->get_name() + "]\n";
    std::istringstream lines(sub->config_to_str(true, false));
    std::string line;
    while (std::getline(lines, line)) {
      if (line.size() >= 3 && line.compare(line.size() - 3, 3, "=\"\"") == 0) {
        continue;
      }
      text += line + "\n";
    }
  }
  return text;
}

void CheckClasses(const ConformalModel& model, const ScoreMatrix& scores) {
  if (model.num_classes != 0 && model.num_classes != scores.classes()) {
    throw DataError("model was calibrated with K=" +
                    std::to_string(model.num_classes) +
                    " but the scores have K=" +
                    std::to_string(scores.classes()));
  }
}

// Scores ready for a stored model: logits use the model's temperature unless
// --temperature overrides it.
SortedScores ScoresForModel(const ConformalModel& model, const ScoreMatrix& s,
                            const Options& o) {
  CheckClasses(model, s);
  std::optional<double> t = o.temperature ? o.temperature : model.temperature;
  if (s.kind() == ScoreKind::kLogits && !t) {
    throw UsageError("logit scores need a temperature: the model has none, "
                     "pass --temperature");
  }
  return SortedProbabilities(s, o.seed, t, Bracket(o), nullptr);
}

std::string EvalSummaryCsv(const EvalReport& r, size_t n) {
  std::ostringstream out;
  out << "n,coverage,avg_size,sscv\n"
      << n << ',' << ShortDouble(r.coverage) << ',' << ShortDouble(r.avg_size)
      << ',' << ShortDouble(r.sscv) << '\n';
  return out.str();
}

// --- subcommands -----------------------------------------------------------

int CmdIngest(const Options& o, const CLI::App& app, std::ostream& out) {
  const ScoreFormat to = ParseScoreFormat(o.output_format);
  const std::string ext = to == ScoreFormat::kCsv ? ".csv" : ".cset";
  const ScoreMatrix scores = LoadInput(o);
  EnsureDir(o.out);
  out << "rows=" << scores.rows() << " classes=" << scores.classes()
      << " kind=" << ScoreKindName(scores.kind()) << '\n';
  if (o.tune_size || o.cal_size || o.eval_size) {
    SplitSpec spec;
    spec.seed = o.seed;
    spec.tuning = o.tune_size.value_or(0);
    spec.calibration = o.cal_size.value_or(0);
    spec.evaluation = o.eval_size.value_or(0);
    const ScoreSplit split = Split(scores, spec);
    const auto save = [&](const std::optional<ScoreMatrix>& m,
                          const std::string& stem) {
      if (!m) return;
      SaveScores(*m, OutPath(o, stem + ext), to);
      out << stem << ext << ": " << m->rows() << " rows\n";
    };
    save(split.tuning, "tuning");
    save(split.calibration, "calibration");
    save(split.evaluation, "evaluation");
  } else {
    SaveScores(scores, OutPath(o, "scores" + ext), to);
  }
  WriteFile(OutPath(o, "config.ini"), EchoConfig(app));
  return kExitOk;
}

SynthSpec SynthFromOptions(const Options& o) {
  SynthSpec spec;
  spec.n = o.n;
  spec.k = o.k;
  spec.concentration =
      o.concentration.value_or(SynthSpec::DefaultConcentration(o.k));
  spec.corruption = Corruption::Parse(o.corruption);
  spec.seed = o.seed;
  spec.Validate();
  return spec;
}

int CmdSynth(const Options& o, const CLI::App& app, std::ostream& out) {
  const SynthSpec spec = SynthFromOptions(o);
  EnsureDir(o.out);
  const SynthData data = Generate(spec);
  SaveScores(data.true_probs, OutPath(o, "true_probs.cset"), ScoreFormat::kBinary);
  SaveScores(data.observed, OutPath(o, "scores.cset"), ScoreFormat::kBinary);
  WriteFile(OutPath(o, "manifest.json"), SynthManifest(spec));
  WriteFile(OutPath(o, "config.ini"), EchoConfig(app));
  out << "wrote " << spec.n << " x " << spec.k << " ("
      << spec.corruption.ToString() << ") to " << o.out << '\n';
  return kExitOk;
}

int CmdFitTemp(const Options& o, const CLI::App& app, std::ostream& out) {
  const TemperatureBracket bracket = Bracket(o);
  const ScoreMatrix scores = LoadInput(o);
  if (scores.kind() != ScoreKind::kLogits) {
    throw DataError(o.scores + " holds probabilities; temperature fitting "
                    "needs logits");
  }
  EnsureDir(o.out);
  const TemperatureFit fit = FitTemperature(scores, bracket);
  std::ostringstream text;
  text << "temperature = " << ShortDouble(fit.temperature) << '\n'
       << "nll_before = " << ShortDouble(fit.nll_before) << '\n'
       << "nll_after = " << ShortDouble(fit.nll_after) << '\n'
       << "iterations = " << fit.iterations << '\n';
  WriteFile(OutPath(o, "temperature.txt"), text.str());
  WriteFile(OutPath(o, "config.ini"), EchoConfig(app));
  out << "temperature=" << ShortDouble(fit.temperature)
      << " nll_before=" << ShortDouble(fit.nll_before)
      << " nll_after=" << ShortDouble(fit.nll_after) << '\n';
  return kExitOk;
}

int CmdTune(const Options& o, const CLI::App& app, std::ostream& out) {
  const TuneObjective objective = ParseTuneObjective(o.tune_objective);
  const std::vector<SizeRange> strata = ParseRanges(o.strata);
  const TemperatureBracket bracket = Bracket(o);
  const ScoreMatrix scores = LoadInput(o);
  EnsureDir(o.out);
  const SortedScores tuning =
      SortedProbabilities(scores, o.seed, o.temperature, bracket, nullptr);
  TuneResult r;
  if (objective == TuneObjective::kSize) {
    const auto grid = o.lambda_grid.empty() ? DefaultSizeLambdaGrid() : o.lambda_grid;
    r = TuneForSize(tuning, o.alpha, grid, o.seed, !o.deterministic);
  } else {
    const auto grid =
        o.lambda_grid.empty() ? DefaultAdaptivenessLambdaGrid() : o.lambda_grid;
    r = TuneForAdaptiveness(tuning, o.alpha, grid, strata, o.seed,
                            !o.deterministic);
  }
  std::ostringstream grid;
  grid << "lambda," << (objective == TuneObjective::kSize ? "avg_size" : "sscv")
       << '\n';
  for (const GridPoint& p : r.grid) {
    grid << ShortDouble(p.lambda) << ',' << ShortDouble(p.objective) << '\n';
  }
  std::ostringstream summary;
  summary << "objective = " << TuneObjectiveName(objective) << '\n'
          << "k_star = " << r.k_star << '\n'
          << "k_reg = " << r.k_reg << '\n'
          << "lambda = " << ShortDouble(r.lambda) << '\n';
  WriteFile(OutPath(o, "tune.txt"), summary.str());
  WriteFile(OutPath(o, "tune_grid.csv"), grid.str());
  WriteFile(OutPath(o, "config.ini"), EchoConfig(app));
  out << "k_reg=" << r.k_reg << " lambda=" << ShortDouble(r.lambda)
      << " objective=" << TuneObjectiveName(objective) << '\n';
  return kExitOk;
}

int CmdCalibrate(const Options& o, const CLI::App& app, std::ostream& out) {
  const MethodSpec spec = SpecFromOptions(o);
  const TemperatureBracket bracket = Bracket(o);
  const ScoreMatrix scores = LoadInput(o);
  EnsureDir(o.out);
  std::optional<double> used;
  const SortedScores cal =
      SortedProbabilities(scores, o.seed, o.temperature, bracket, &used);
  ConformalModel model;
  switch (spec.method) {
    case Method::kNaive:
      model = MakeNaiveModel(spec, cal.classes());
      model.n_cal = cal.rows();
      model.seed = o.seed;
      break;
    case Method::kFixedK:
      model = MakeFixedKModel(cal, spec.alpha, spec.randomized, o.seed);
      break;
    default:
      model = Calibrate(cal, spec, o.seed);
      break;
  }
  model.temperature = used;
  const std::string path = OutPath(o, "model.txt");
  SaveModel(model, path);
  WriteFile(OutPath(o, "config.ini"), EchoConfig(app));
  out << "method=" << MethodName(model.spec.method)
      << " tau_hat=" << ShortDouble(model.tau_hat) << " n_cal=" << model.n_cal
      << '\n';
  return kExitOk;
}

int CmdPredict(const Options& o, const CLI::App& app, std::ostream& out) {
  if (o.model.empty()) throw UsageError("--model is required");
  ConformalModel model = LoadModel(o.model);
  if (o.deterministic) model.spec.randomized = false;
  const ScoreMatrix scores = LoadInput(o);
  const SortedScores sorted = ScoresForModel(model, scores, o);
  EnsureDir(o.out);
  std::ostringstream text;
  const auto sets = PredictAll(model, sorted, o.seed);
  for (size_t i = 0; i < sets.size(); ++i) {
    text << i << ' ' << sets[i].size() << ' ';
    for (size_t j = 0; j < sets[i].classes.size(); ++j) {
      text << (j ? "," : "") << sets[i].classes[j];
    }
    text << '\n';
  }
  WriteFile(OutPath(o, "predictions.txt"), text.str());
  WriteFile(OutPath(o, "config.ini"), EchoConfig(app));
  const CoverageSize cs = CoverageAndSize(sets, sorted.labels());
  out << "rows=" << sets.size() << " avg_size=" << ShortDouble(cs.avg_size)
      << '\n';
  return kExitOk;
}

int CmdEvaluate(const Options& o, const CLI::App& app, std::ostream& out) {
  if (o.model.empty()) throw UsageError("--model is required");
  const std::vector<SizeRange> strata = ParseRanges(o.strata);
  const std::vector<SizeRange> bins = ParseRanges(o.difficulty_bins);
  ConformalModel model = LoadModel(o.model);
  if (o.deterministic) model.spec.randomized = false;
  const ScoreMatrix scores = LoadInput(o);
  const SortedScores sorted = ScoresForModel(model, scores, o);
  ValidatePartition(strata, sorted.classes());
  EnsureDir(o.out);
  const auto outcomes = EvaluateModel(model, sorted, o.seed);
  const EvalReport r =
      Evaluate(outcomes, sorted.label_ranks(), model.spec.alpha, strata, bins);

  TrialAggregate agg;
  agg.methods.resize(1);
  MethodSummary& s = agg.methods[0];
  s.label = MethodName(model.spec.method);
  s.size_hist = r.size_hist;
  s.per_stratum = r.per_stratum;
  s.per_difficulty = r.per_difficulty;
  const ReportTable strata_table = StrataTable(agg);
  const ReportTable difficulty = DifficultyReport(agg);
  WriteFile(OutPath(o, "eval.csv"), EvalSummaryCsv(r, outcomes.size()));
  WriteFile(OutPath(o, "strata.txt"), strata_table.ToText());
  WriteFile(OutPath(o, "strata.csv"), strata_table.ToCsv());
  WriteFile(OutPath(o, "difficulty.txt"), difficulty.ToText());
  WriteFile(OutPath(o, "difficulty.csv"), difficulty.ToCsv());
  WriteFile(OutPath(o, "hist.csv"), HistogramCsv(s));
  WriteFile(OutPath(o, "config.ini"), EchoConfig(app));
  out << "coverage=" << ShortDouble(r.coverage)
      << " avg_size=" << ShortDouble(r.avg_size)
      << " sscv=" << ShortDouble(r.sscv) << '\n';
  return kExitOk;
}

std::string MethodLabel(Method m) {
  switch (m) {
    case Method::kFixedK:
      return "Top K";
    case Method::kNaive:
      return "Naive";
    case Method::kAps:
      return "APS";
    case Method::kRaps:
      return "RAPS";
    case Method::kLac:
      return "LAC";
  }
  return "?";
}

// Split sizes for experiments. Unset sizes share the rows left over by the
// given ones: tuning gets a fifth of n (when any method tunes), calibration
// and evaluation split the rest evenly.
void ResolveSizes(const Options& o, size_t n, bool wants_tuning,
                  TrialProtocol& p) {
  p.tuning_size = o.tune_size.value_or(wants_tuning ? n / 5 : 0);
  if (p.tuning_size > n) throw UsageError("--tune-size exceeds the data");
  const size_t rest = n - p.tuning_size;
  p.calibration_size = o.cal_size.value_or(
      o.eval_size && *o.eval_size <= rest ? rest - *o.eval_size : rest / 2);
  if (p.calibration_size > rest) {
    throw UsageError("--cal-size and --tune-size exceed the data");
  }
  p.evaluation_size = o.eval_size.value_or(rest - p.calibration_size);
}

int CmdExperiment(const Options& o, const CLI::App& app, std::ostream& out) {
  const std::vector<SizeRange> strata = ParseRanges(o.strata);
  const std::vector<SizeRange> bins = ParseRanges(o.difficulty_bins);
  const TemperatureBracket bracket = Bracket(o);
  std::vector<Method> methods;
  for (const std::string& m : o.methods) methods.push_back(ParseMethod(m));
  if (methods.empty()) throw UsageError("--methods is empty");
  const bool tune_raps = o.tune_objective != "none";
  const bool wants_tuning =
      tune_raps && std::find(methods.begin(), methods.end(), Method::kRaps) !=
                       methods.end();

  std::optional<ScoreMatrix> loaded;
  std::string model_name = o.name;
  if (!o.scores.empty()) {
    loaded = LoadInput(o);
    if (model_name.empty()) model_name = fs::path(o.scores).stem().string();
  } else {
    loaded = Generate(SynthFromOptions(o)).observed;
    if (model_name.empty()) model_name = "synthetic";
  }
  const ScoreMatrix& scores = *loaded;

  TrialProtocol p;
  p.n_trials = o.trials;
  p.seed = o.seed;
  p.alpha = o.alpha;
  p.strata = strata;
  p.difficulty_bins = bins;
  p.bracket = bracket;
  p.temperature = o.temperature;
  p.nested_platt = o.nested_platt;
  ResolveSizes(o, scores.rows(), wants_tuning, p);

  std::vector<MethodPolicy> main;
  for (const Method m : methods) {
    MethodPolicy policy;
    policy.label = MethodLabel(m);
    policy.spec.method = m;
    policy.spec.alpha = o.alpha;
    policy.spec.randomized = !o.deterministic;
    policy.spec.boundary_inclusive = o.boundary_inclusive;
    if (m == Method::kRaps) {
      policy.spec.lambda = o.lambda;
      policy.spec.k_reg = o.k_reg;
      if (tune_raps) {
        policy.lambda_policy = o.tune_objective == "size"
                                   ? LambdaPolicy::kTuneSize
                                   : LambdaPolicy::kTuneAdaptiveness;
        policy.lambda_grid = o.lambda_grid;
      }
    }
    main.push_back(std::move(policy));
  }

  const auto raps_at = [&](double lambda, int k_reg, std::string label) {
    MethodPolicy policy;
    policy.label = std::move(label);
    policy.spec.method = Method::kRaps;
    policy.spec.alpha = o.alpha;
    policy.spec.lambda = lambda;
    policy.spec.k_reg = k_reg;
    policy.spec.randomized = !o.deterministic;
    policy.spec.boundary_inclusive = o.boundary_inclusive;
    return policy;
  };
  std::vector<MethodPolicy> study;
  for (const double l : o.study_lambdas) {
    study.push_back(raps_at(l, o.k_reg, "lambda=" + ShortDouble(l)));
  }
  std::vector<MethodPolicy> sweep;
  if (!o.no_sweep) {
    for (const int k : o.sweep_k_regs) {
      for (const double l : o.sweep_lambdas) {
        sweep.push_back(raps_at(l, k,
                                "k_reg=" + std::to_string(k) +
                                    " lambda=" + ShortDouble(l)));
      }
    }
  }

  EnsureDir(o.out);
  const TrialAggregate agg = RunTrials(scores, p, main);
  const ReportTable summary = SummaryTable(agg, model_name);
  WriteFile(OutPath(o, "summary.txt"), summary.ToText());
  WriteFile(OutPath(o, "summary.csv"), summary.ToCsv());
  WriteFile(OutPath(o, "trials.csv"), TrialTable(agg).ToCsv());
  for (const MethodSummary& s : agg.methods) {
    WriteFile(OutPath(o, "hist_" + Slug(s.label) + ".csv"), HistogramCsv(s));
  }

  if (!study.empty()) {
    // The lambda study never tunes, so it needs no tuning rows.
    TrialProtocol sp = p;
    const TrialAggregate s = RunTrials(scores, sp, study);
    const ReportTable strata_table = StrataTable(s);
    const ReportTable difficulty = DifficultyReport(s);
    WriteFile(OutPath(o, "strata.txt"), strata_table.ToText());
    WriteFile(OutPath(o, "strata.csv"), strata_table.ToCsv());
    WriteFile(OutPath(o, "difficulty.txt"), difficulty.ToText());
    WriteFile(OutPath(o, "difficulty.csv"), difficulty.ToCsv());
  }
  if (!sweep.empty()) {
    const TrialAggregate s = RunTrials(scores, p, sweep);
    const ReportTable table = SweepTable(s, o.sweep_k_regs, o.sweep_lambdas);
    WriteFile(OutPath(o, "sweep.txt"), table.ToText());
    WriteFile(OutPath(o, "sweep.csv"), table.ToCsv());
  }
  WriteFile(OutPath(o, "config.ini"), EchoConfig(app));
  out << summary.ToText();
  return kExitOk;
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  Options o;
  CLI::App app{"Conformal prediction sets for classifiers", "cset"};
  app.set_config("--config", "", "INI/TOML file with option values");
  app.require_subcommand(1);

  auto* ingest = app.add_subcommand(
      "ingest", "Validate a score file; convert or split it into --out");
  AddCommon(ingest, o);
  AddScoresInput(ingest, o, true);
  ingest->add_option("--output-format", o.output_format, "csv or binary")
      ->check(CLI::IsMember({"csv", "binary"}))
      ->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Write a synthetic problem");
  AddCommon(synth, o);
  AddSynth(synth, o);

  auto* fit = app.add_subcommand("fit-temp", "Fit a softmax temperature");
  AddCommon(fit, o);
  AddScoresInput(fit, o, true);
  AddTemperature(fit, o);

  auto* tune = app.add_subcommand("tune", "Choose k_reg and lambda for RAPS");
  AddCommon(tune, o);
  AddScoresInput(tune, o, true);
  AddTemperature(tune, o);
  AddTuning(tune, o, false);
  AddStrata(tune, o);

  auto* calibrate = app.add_subcommand("calibrate", "Fit a conformal model");
  AddCommon(calibrate, o);
  AddScoresInput(calibrate, o, true);
  AddTemperature(calibrate, o);
  calibrate->add_flag("--boundary-inclusive", o.boundary_inclusive,
                      "Deterministic mode: also keep the first class past "
                      "the threshold");

  auto* predict = app.add_subcommand("predict", "Write prediction sets");
  AddCommon(predict, o);
  AddScoresInput(predict, o, true);
  predict->add_option("--model", o.model, "Model file from calibrate")
      ->required();
  predict->add_option("--temperature", o.temperature,
                      "Override the model's temperature")
      ->check(CLI::PositiveNumber);

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a model");
  AddCommon(evaluate, o);
  AddScoresInput(evaluate, o, true);
  AddStrata(evaluate, o);
  evaluate->add_option("--model", o.model, "Model file from calibrate")
      ->required();
  evaluate->add_option("--temperature", o.temperature,
                       "Override the model's temperature")
      ->check(CLI::PositiveNumber);

  auto* experiment = app.add_subcommand(
      "experiment", "Random-split trials; writes every report table");
  AddCommon(experiment, o);
  experiment->get_option("--trials")->default_val(10);
  AddScoresInput(experiment, o, false);
  AddTemperature(experiment, o);
  AddTuning(experiment, o, true);
  AddStrata(experiment, o);
  AddSynth(experiment, o);
  experiment->add_flag("--nested-platt", o.nested_platt,
                       "Fit the temperature on the tuning split");
  experiment->add_flag("--boundary-inclusive", o.boundary_inclusive,
                       "Deterministic mode: also keep the first class past "
                       "the threshold");
  experiment->add_option("--methods", o.methods, "Methods to compare")
      ->delimiter(',')
      ->capture_default_str();
  experiment->add_option("--study-lambdas", o.study_lambdas,
                         "RAPS lambdas (at --k-reg) for the strata and "
                         "difficulty tables")
      ->delimiter(',')
      ->capture_default_str();
  experiment->add_option("--sweep-lambdas", o.sweep_lambdas,
                         "Lambda columns of the size sweep")
      ->delimiter(',')
      ->capture_default_str();
  experiment->add_option("--sweep-k-regs", o.sweep_k_regs,
                         "k_reg rows of the size sweep")
      ->delimiter(',')
      ->capture_default_str();
  experiment->add_flag("--no-sweep", o.no_sweep, "Skip the size sweep");
  experiment->add_option("--name", o.name,
                         "Row label of the summary table (default: input "
                         "file stem)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest) return CmdIngest(o, app, out);
    if (*synth) return CmdSynth(o, app, out);
    if (*fit) return CmdFitTemp(o, app, out);
    if (*tune) return CmdTune(o, app, out);
    if (*calibrate) return CmdCalibrate(o, app, out);
    if (*predict) return CmdPredict(o, app, out);
    if (*evaluate) return CmdEvaluate(o, app, out);
    if (*experiment) return CmdExperiment(o, app, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::kUsage:
        return kExitUsage;
      case ErrorKind::kIo:
        return kExitIo;
      case ErrorKind::kData:
        return kExitData;
    }
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace cset
