// Copyright 2026 The CDVM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "cli.h"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "cdvm/attribution.h"
#include "cdvm/bench.h"
#include "cdvm/cdvm.h"
#include "cdvm/dataset.h"
#include "cdvm/error.h"
#include "cdvm/games.h"
#include "cdvm/learner.h"
#include "cdvm/rng.h"
#include "cdvm/semivalues.h"
#include "json.hpp"

namespace cdvm::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Converts a config value into an option target. Strings accept any scalar;
// lists accept a single scalar.
template <typename T>
void AssignFromJson(const json& j, T* target) {
  *target = j.get<T>();
}

void AssignFromJson(const json& j, std::string* target) {
  if (j.is_string()) {
    *target = j.get<std::string>();
  } else if (j.is_array()) {
    // Nested arrays become "a,b;c,d", flat arrays "a,b".
    std::string s;
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) s += j[i].is_array() ? ";" : ",";
      if (j[i].is_array()) {
        for (std::size_t k = 0; k < j[i].size(); ++k) s += (k ? "," : "") + j[i][k].dump();
      } else {
        s += j[i].dump();
      }
    }
    *target = s;
  } else {
    *target = j.dump();
  }
}

template <typename T>
void AssignFromJson(const json& j, std::vector<T>* target) {
  if (j.is_array()) {
    target->clear();
    for (const auto& e : j) {
      T v;
      AssignFromJson(e, &v);
      target->push_back(v);
    }
  } else {
    T v;
    AssignFromJson(j, &v);
    *target = {v};
  }
}

// Options that may also be given in the JSON config. A config value applies
// only when the flag itself was absent.
class Bindings {
 public:
  template <typename T>
  CLI::Option* Add(CLI::App* app, const std::string& name, T* target, const std::string& help) {
    CLI::Option* opt = app->add_option("--" + name, *target, help);
    entries_[app].push_back({name, opt, [target](const json& j) { AssignFromJson(j, target); }});
    return opt;
  }

  CLI::Option* AddFlag(CLI::App* app, const std::string& name, bool* target,
                       const std::string& help) {
    CLI::Option* opt = app->add_flag("--" + name, *target, help);
    entries_[app].push_back({name, opt, [target](const json& j) { *target = j.get<bool>(); }});
    return opt;
  }

  bool Knows(const std::string& key) const {
    for (const auto& [app, list] : entries_) {
      for (const auto& e : list) {
        if (e.name == key) return true;
      }
    }
    return false;
  }

  void Apply(CLI::App* app, const json& scope, const std::string& where) const {
    const auto it = entries_.find(app);
    for (const auto& [raw_key, value] : scope.items()) {
      std::string key = raw_key;
      std::replace(key.begin(), key.end(), '_', '-');
      if (value.is_object()) continue;
      bool found = false;
      if (it != entries_.end()) {
        for (const auto& e : it->second) {
          if (e.name != key) continue;
          found = true;
          if (e.option->count() == 0) {
            try {
              e.assign(value);
            } catch (const json::exception& ex) {
              throw std::invalid_argument("config key '" + raw_key + "': " + ex.what());
            }
          }
        }
      }
      if (!found && !Knows(key)) {
        throw std::invalid_argument("unknown config key '" + raw_key + "' in " + where);
      }
    }
  }

 private:
  struct Entry {
    std::string name;
    CLI::Option* option;
    std::function<void(const json&)> assign;
  };
  std::map<const CLI::App*, std::vector<Entry>> entries_;
};

std::string FormatDouble(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string JoinIndices(std::span<const std::size_t> v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? " " : "") + std::to_string(v[k]);
  return s;
}

double ParseNumber(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw std::invalid_argument(what + ": expected a number, got '" + s + "'");
  }
  return v;
}

std::vector<std::vector<double>> ParseCenters(const std::string& text) {
  std::vector<std::vector<double>> centers;
  std::stringstream points(text);
  std::string point;
  while (std::getline(points, point, ';')) {
    std::vector<double> c;
    std::stringstream coords(point);
    std::string coord;
    while (std::getline(coords, coord, ',')) {
      coord.erase(0, coord.find_first_not_of(" \t"));
      coord.erase(coord.find_last_not_of(" \t") + 1);
      c.push_back(ParseNumber(coord, "--centers"));
    }
    centers.push_back(std::move(c));
  }
  return centers;
}

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir + "'");
}

std::string Join(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

struct LearnerArgs {
  std::string kind = "nearest-neighbor";
  double learning_rate = 0.5;
  int iterations = 200;

  void Register(Bindings& b, CLI::App* app) {
    b.Add(app, "learner", &kind, "nearest-neighbor | nearest-centroid | multinomial-logistic");
    b.Add(app, "learning-rate", &learning_rate, "Logistic learning rate");
    b.Add(app, "iterations", &iterations, "Logistic gradient steps");
  }

  LearnerSpec Build(std::uint64_t seed) const {
    LearnerSpec spec;
    spec.kind = ParseLearnerKind(kind);
    spec.learning_rate = learning_rate;
    spec.iterations = iterations;
    spec.seed = DeriveSeed(seed, "learner");
    spec.Validate();
    return spec;
  }
};

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string preset = "none";
  std::string centers;
  std::vector<std::size_t> sizes;
  std::vector<int> labels;
  double sigma = 0.1;
  std::vector<std::size_t> test_sizes;
  std::vector<std::size_t> val_sizes;
  std::uint64_t seed = 0;
  std::string out;
};

ClusteredSpec BuildClusteredSpec(const GenArgs& a) {
  ClusteredSpec spec;
  if (a.preset == "fig1") {
    spec = Fig1Spec(a.sigma);
  } else if (a.preset != "none") {
    throw std::invalid_argument("unknown preset '" + a.preset + "'");
  }
  spec.sigma = a.sigma;
  if (!a.centers.empty()) spec.centers = ParseCenters(a.centers);
  if (!a.sizes.empty()) spec.sizes = a.sizes;
  if (!a.labels.empty()) spec.labels = a.labels;
  if (!a.test_sizes.empty()) spec.test_sizes = a.test_sizes;
  if (!a.val_sizes.empty()) spec.val_sizes = a.val_sizes;
  for (std::size_t s : spec.sizes) {
    if (s == 0) throw std::invalid_argument("every cluster needs at least one training point");
  }
  return spec;
}

LabeledDataset GenerateFromArgs(const GenArgs& a) {
  return GenerateClustered(BuildClusteredSpec(a), DeriveSeed(a.seed, "gen"));
}

void RegisterGen(Bindings& b, CLI::App* app, GenArgs& a, bool with_out) {
  b.Add(app, "preset", &a.preset, "Named dataset layout: fig1 or none");
  b.Add(app, "centers", &a.centers, "Cluster centers as 'x,y;x,y;...'");
  b.Add(app, "sizes", &a.sizes, "Training points per cluster")->delimiter(',');
  b.Add(app, "labels", &a.labels, "Class label per cluster")->delimiter(',');
  b.Add(app, "sigma", &a.sigma, "Isotropic standard deviation");
  b.Add(app, "test-sizes", &a.test_sizes, "Test points per cluster")->delimiter(',');
  b.Add(app, "val-sizes", &a.val_sizes, "Validation points per cluster (default: test sizes)")
      ->delimiter(',');
  if (with_out) {
    b.Add(app, "seed", &a.seed, "Master seed");
    b.Add(app, "out", &a.out, "Output dataset CSV");
  }
}

int CmdGen(const GenArgs& a, std::ostream& out) {
  if (a.out.empty()) throw std::invalid_argument("--out is required");
  const LabeledDataset data = GenerateFromArgs(a);
  SaveDatasetCsv(data, a.out);
  out << "n=" << data.num_train() << " m=" << data.rows_of(Split::kValidation).size()
      << " test=" << data.rows_of(Split::kTest).size() << " K=" << data.num_clusters() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- attribute

struct AttributeArgs {
  std::string data;
  double p = 0.03;
  std::size_t models = 5000;
  std::uint64_t seed = 0;
  LearnerArgs learner;
  std::string out;
};

MsrConfig BuildMsrConfig(double p, std::size_t models, std::uint64_t seed, const LearnerSpec& spec,
                         int threads) {
  MsrConfig cfg;
  cfg.p = p;
  cfg.num_models = models;
  cfg.seed = DeriveSeed(seed, "msr");
  cfg.learner = spec;
  cfg.threads = threads;
  cfg.Validate();
  return cfg;
}

int CmdAttribute(const AttributeArgs& a, int threads, std::ostream& out) {
  if (a.data.empty()) throw std::invalid_argument("--data is required");
  if (a.out.empty()) throw std::invalid_argument("--out is required");
  const MsrConfig cfg = BuildMsrConfig(a.p, a.models, a.seed, a.learner.Build(a.seed), threads);
  const LabeledDataset data = LoadDatasetCsv(a.data);
  const AttributionMatrix t = MsrEstimate(data, cfg);
  SaveT(t, a.out);
  if (!(LoadT(a.out) == t)) throw IoError("round-trip check failed for '" + a.out + "'");
  out << "n=" << t.rows() << " m=" << t.cols() << " num_models=" << t.num_models
      << " p=" << FormatDouble(t.p) << " nnz=" << t.nnz()
      << " undefined=" << t.num_undefined_rows() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- prune

struct PruneArgs {
  std::string t_path;
  std::string data;
  std::vector<double> budgets;
  std::vector<std::size_t> budget_counts;
  double alpha = 0.5;
  std::string kappa = "default";
  std::vector<double> alpha_grid;
  std::vector<std::string> kappa_grid;
  bool default_grid = false;
  LearnerArgs learner;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

double ResolveKappa(const std::string& text, const AttributionMatrix& t, std::size_t budget) {
  if (text == "default") return DefaultKappa(t, budget);
  return ParseNumber(text, "kappa");
}

int CmdPrune(const PruneArgs& a, std::ostream& out) {
  if (a.t_path.empty()) throw std::invalid_argument("--T is required");
  for (double f : a.budgets) {
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("budgets must lie in (0, 1]");
  }
  if (a.alpha_grid.empty() != a.kappa_grid.empty()) {
    throw std::invalid_argument("--alpha-grid and --kappa-grid must be given together");
  }
  if (a.default_grid && !a.alpha_grid.empty()) {
    throw std::invalid_argument("--default-grid cannot be combined with explicit grids");
  }
  const bool grid = a.default_grid || !a.alpha_grid.empty();
  const AttributionMatrix t = LoadT(a.t_path);
  const std::size_t n = t.rows();
  std::optional<LabeledDataset> data;
  if (!a.data.empty()) {
    data = LoadDatasetCsv(a.data);
    if (data->num_train() != n) {
      throw std::invalid_argument("dataset has " + std::to_string(data->num_train()) +
                                  " training points but T has " + std::to_string(n) + " rows");
    }
  }
  if (grid && !data) throw std::invalid_argument("grid search needs --data for validation scoring");

  std::vector<std::size_t> budgets;
  const std::vector<double> fractions =
      a.budgets.empty() && a.budget_counts.empty() ? DefaultRetentionLevels() : a.budgets;
  for (double f : fractions) budgets.push_back(BudgetForLevel(f, n));
  for (std::size_t s : a.budget_counts) {
    if (s < 1 || s > n) {
      throw std::invalid_argument("budget " + std::to_string(s) + " outside [1, " +
                                  std::to_string(n) + "]");
    }
    budgets.push_back(s);
  }
  EnsureDir(a.out_dir);
  const LearnerSpec spec = a.learner.Build(a.seed);

  for (std::size_t budget : budgets) {
    CdvmSolution sol;
    double alpha = a.alpha;
    double kappa = 0.0;
    if (grid) {
      std::vector<double> alphas = a.alpha_grid;
      std::vector<double> kappas;
      if (a.default_grid) {
        alphas = DefaultAlphaGrid();
        kappas = DefaultKappaGrid(t, budget);
      } else {
        for (const auto& k : a.kappa_grid) kappas.push_back(ResolveKappa(k, t, budget));
      }
      const SubsetScorer scorer = [&](std::span<const std::size_t> selected) {
        return SubsetAccuracy(*data, selected, spec, Split::kValidation);
      };
      GridResult best = GridSearch(t, budget, alphas, kappas, scorer);
      alpha = best.alpha;
      kappa = best.kappa;
      sol = std::move(best.solution);
    } else {
      kappa = ResolveKappa(a.kappa, t, budget);
      sol = SolveLp(BuildProblem(t, budget, alpha, kappa));
    }
    const std::string file = Join(a.out_dir, "solution_S" + std::to_string(budget) + ".json");
    std::ofstream f(file);
    if (!f) throw IoError("cannot open '" + file + "' for writing");
    f << SolutionToJson(sol, budget, alpha, kappa) << '\n';
    if (!f) throw IoError("write to '" + file + "' failed");

    out << "S=" << budget << " alpha=" << FormatDouble(alpha) << " kappa=" << FormatDouble(kappa)
        << " objective=" << FormatDouble(sol.objective)
        << " fractional=" << sol.fractional_count << " selected=[" << JoinIndices(sol.selected)
        << "]";
    if (data && data->cluster_of()) {
      const auto cov = VerifyClusterCoverage(sol.selected, *data->cluster_of(),
                                             static_cast<std::size_t>(data->num_clusters()));
      std::size_t hit = 0;
      for (std::size_t c : cov.counts) hit += c > 0;
      out << " coverage=" << hit << '/' << cov.counts.size()
          << (cov.all_covered ? " all-covered" : " missing-clusters");
    }
    out << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- analysis outputs

void WriteAnalysis(const RetentionReport& report, std::size_t n, OverlapPairing pairing,
                   const std::string& dir, std::ostream& out) {
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    const auto& sets = report.retained[m];
    const auto overlap = OverlapMatrix(sets, pairing);
    WriteOverlapCsv(overlap, report.levels, Join(dir, "overlap_" + report.methods[m] + ".csv"));
    const auto spectrum = FrequencySpectrum(SelectionFrequencies(sets, n));
    WriteSpectrumCsv(spectrum, Join(dir, "spectrum_" + report.methods[m] + ".csv"));
    std::map<std::string, std::size_t> counts;
    for (const auto& e : spectrum) ++counts[std::string(SpectrumClassName(e.cls))];
    out << "spectrum " << report.methods[m] << ':';
    for (const auto& [cls, c] : counts) out << ' ' << cls << '=' << c;
    out << '\n';
  }
}

OverlapPairing ParsePairing(const std::string& s) {
  if (s == "same-seed") return OverlapPairing::kSameSeed;
  if (s == "cross-seed") return OverlapPairing::kCrossSeed;
  throw std::invalid_argument("unknown pairing '" + s + "' (same-seed | cross-seed)");
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string data;
  GenArgs gen;
  std::string t_path;
  std::size_t seeds = 25;
  std::uint64_t seed = 0;
  std::vector<double> levels;
  std::vector<std::string> methods;
  double p = 0.03;
  std::size_t models = 5000;
  std::size_t bootstraps = 1000;
  double alpha = 0.5;
  std::string kappa = "default";
  std::vector<double> alpha_grid;
  std::vector<double> kappa_grid;
  bool default_grid = false;
  std::string pairing = "same-seed";
  LearnerArgs learner;
  std::string out_dir = ".";
};

const std::vector<std::string>& DefaultRoster() {
  static const std::vector<std::string> roster = {"random", "loo",     "shapley",
                                                   "banzhaf-t", "dataoob", "cdvm"};
  return roster;
}

int CmdBench(const BenchArgs& a, int threads, std::ostream& out, std::ostream& err) {
  if (a.seeds == 0) throw std::invalid_argument("--seeds must be at least 1");
  if (a.alpha_grid.empty() != a.kappa_grid.empty()) {
    throw std::invalid_argument("--alpha-grid and --kappa-grid must be given together");
  }
  GenArgs gen = a.gen;
  gen.seed = a.seed;
  if (a.data.empty() && gen.preset == "none" && gen.centers.empty()) {
    throw std::invalid_argument("bench needs --data or a generated layout (e.g. --preset fig1)");
  }
  const LabeledDataset data = a.data.empty() ? GenerateFromArgs(gen) : LoadDatasetCsv(a.data);
  const std::size_t n = data.num_train();
  const LearnerSpec spec = a.learner.Build(a.seed);

  std::shared_ptr<const AttributionMatrix> fixed_t;
  if (!a.t_path.empty()) {
    fixed_t = std::make_shared<const AttributionMatrix>(LoadT(a.t_path));
    if (fixed_t->rows() != n || fixed_t->cols() != data.rows_of(Split::kValidation).size()) {
      throw std::invalid_argument("T dimensions do not match the dataset");
    }
  }
  const double p = a.p;
  const std::size_t models = a.models;
  // Validate once up front so errors surface as configuration errors.
  BuildMsrConfig(p, models, a.seed, spec, 1);
  const AttributionSource source = [fixed_t, p, models, spec](const LabeledDataset& d,
                                                              std::uint64_t seed) {
    if (fixed_t) return *fixed_t;
    return MsrEstimate(d, BuildMsrConfig(p, models, seed, spec, 1));
  };

  CdvmStrategyOptions cdvm_opts;
  cdvm_opts.alpha = a.alpha;
  cdvm_opts.use_default_kappa = a.kappa == "default";
  if (!cdvm_opts.use_default_kappa) cdvm_opts.kappa = ParseNumber(a.kappa, "--kappa");
  cdvm_opts.alpha_grid = a.alpha_grid;
  cdvm_opts.kappa_grid = a.kappa_grid;
  cdvm_opts.default_grid = a.default_grid;
  if (a.default_grid && !a.alpha_grid.empty()) {
    throw std::invalid_argument("--default-grid cannot be combined with explicit grids");
  }
  cdvm_opts.learner = spec;
  if (!(a.alpha >= 0.0 && a.alpha <= 1.0)) throw std::invalid_argument("alpha outside [0, 1]");
  if (!(cdvm_opts.kappa >= 0.0)) throw std::invalid_argument("kappa must be non-negative");

  const bool explicit_roster = !a.methods.empty();
  std::vector<SelectionStrategy> strategies;
  for (const auto& name : explicit_roster ? a.methods : DefaultRoster()) {
    if (name == "random") {
      strategies.push_back(RandomStrategy());
    } else if (name == "loo") {
      strategies.push_back(ValueOrderStrategy("loo", [spec](const LabeledDataset& d, std::uint64_t) {
        return Loo(LearnerGame(d, spec), 1);
      }));
    } else if (name == "shapley") {
      if (n > kMaxExactPlayers) {
        if (explicit_roster) {
          throw std::invalid_argument("shapley needs n <= " + std::to_string(kMaxExactPlayers) +
                                      ", dataset has " + std::to_string(n));
        }
        err << "skipping shapley: n = " << n << " exceeds the enumeration bound\n";
        continue;
      }
      strategies.push_back(
          ValueOrderStrategy("shapley", [spec](const LabeledDataset& d, std::uint64_t) {
            LearnerGame game(d, spec);
            MemoizedGame memo(game);
            return ExactShapley(memo, 1);
          }));
    } else if (name == "banzhaf-t") {
      strategies.push_back(
          ValueOrderStrategy("banzhaf-t", [source](const LabeledDataset& d, std::uint64_t seed) {
            return BanzhafFromT(source(d, seed));
          }));
    } else if (name == "dataoob") {
      const std::size_t boots = a.bootstraps;
      if (boots == 0) throw std::invalid_argument("--bootstraps must be at least 1");
      strategies.push_back(ValueOrderStrategy(
          "dataoob", [spec, boots](const LabeledDataset& d, std::uint64_t seed) {
            return DataOob(d, spec, DataOobOptions{boots, DeriveSeed(seed, "oob"), 1});
          }));
    } else if (name == "cdvm") {
      strategies.push_back(CdvmStrategy("cdvm", source, cdvm_opts));
    } else {
      throw std::invalid_argument("unknown method '" + name + "'");
    }
  }
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (strategies[i].name == strategies[k].name) {
        throw std::invalid_argument("method '" + strategies[i].name + "' listed twice");
      }
    }
  }
  const OverlapPairing pairing = ParsePairing(a.pairing);
  const std::vector<double> levels = a.levels.empty() ? DefaultRetentionLevels() : a.levels;
  std::vector<std::uint64_t> seeds;
  for (std::size_t s = 0; s < a.seeds; ++s) seeds.push_back(DeriveSeed(a.seed, s));

  const auto start = std::chrono::steady_clock::now();
  const RetentionReport report = RetentionEval(data, spec, strategies, levels, seeds, threads);
  EnsureDir(a.out_dir);
  WriteReportCsv(report, Join(a.out_dir, "report.csv"));
  WriteRetainedCsv(report, Join(a.out_dir, "retained.csv"));
  {
    const std::string path = Join(a.out_dir, "summary.csv");
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "method,level,mean,sd,count\n";
    for (const auto& c : report.summary) {
      f << c.method << ',' << FormatDouble(c.level) << ',' << FormatDouble(c.mean) << ','
        << FormatDouble(c.sd) << ',' << c.count << '\n';
    }
    if (!f) throw IoError("write to '" + path + "' failed");
  }
  WriteAnalysis(report, n, pairing, a.out_dir, out);

  out << "method";
  for (double l : levels) out << '\t' << FormatDouble(l);
  out << '\n';
  for (const auto& m : report.methods) {
    out << m;
    for (double l : levels) {
      const auto& c = report.Summary(m, l);
      out << '\t' << FormatDouble(c.mean) << "+-" << FormatDouble(c.sd);
    }
    out << '\n';
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  err << "bench: " << report.methods.size() << " methods x " << levels.size() << " levels x "
      << seeds.size() << " seeds in " << FormatDouble(secs) << " s\n";
  return kExitOk;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string retained;
  std::string data;
  std::size_t n = 0;
  std::string pairing = "same-seed";
  std::string out_dir = ".";
};

int CmdAnalyze(const AnalyzeArgs& a, std::ostream& out) {
  if (a.retained.empty()) throw std::invalid_argument("--retained is required");
  const OverlapPairing pairing = ParsePairing(a.pairing);
  std::size_t n = a.n;
  if (!a.data.empty()) n = LoadDatasetCsv(a.data).num_train();
  if (n == 0) throw std::invalid_argument("analyze needs --data or --n");
  const RetentionReport report = ReadRetainedCsv(a.retained);
  EnsureDir(a.out_dir);
  WriteAnalysis(report, n, pairing, a.out_dir, out);
  return kExitOk;
}

json LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  return j;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Constraint data-value maximization: attribution, pruning and benchmarks",
               args.empty() ? "cdvm" : args[0]};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cdvm 0.1.0");

  std::string config_path;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config; flags override its values");
  app.add_option("--threads", threads, "Worker threads (default: CDVM_THREADS or 1)");

  Bindings b;
  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a clustered dataset CSV");
  RegisterGen(b, gen_cmd, gen, true);

  AttributeArgs att;
  auto* att_cmd = app.add_subcommand("attribute", "Estimate the attribution matrix T");
  b.Add(att_cmd, "data", &att.data, "Dataset CSV");
  b.Add(att_cmd, "p", &att.p, "Inclusion probability per training point");
  b.Add(att_cmd, "models", &att.models, "Number of subset models");
  b.Add(att_cmd, "seed", &att.seed, "Master seed");
  b.Add(att_cmd, "out", &att.out, "Output T file");
  att.learner.Register(b, att_cmd);

  PruneArgs pr;
  auto* prune_cmd = app.add_subcommand("prune", "Solve CDVM for one or more budgets");
  b.Add(prune_cmd, "T", &pr.t_path, "Attribution matrix file");
  b.Add(prune_cmd, "data", &pr.data, "Dataset CSV (cluster coverage, grid scoring)");
  b.Add(prune_cmd, "budgets", &pr.budgets, "Retention fractions in (0, 1]")->delimiter(',');
  b.Add(prune_cmd, "budget-counts", &pr.budget_counts, "Absolute budgets")->delimiter(',');
  b.Add(prune_cmd, "alpha", &pr.alpha, "Trade-off weight in [0, 1]");
  b.Add(prune_cmd, "kappa", &pr.kappa, "Slack threshold or 'default'");
  b.Add(prune_cmd, "alpha-grid", &pr.alpha_grid, "Grid of alpha values")->delimiter(',');
  b.Add(prune_cmd, "kappa-grid", &pr.kappa_grid, "Grid of kappa values ('default' allowed)")
      ->delimiter(',');
  b.AddFlag(prune_cmd, "default-grid", &pr.default_grid,
        "Grid search over alpha {0.5,0.75,1} x kappa = default * {1/32..1}");
  b.Add(prune_cmd, "seed", &pr.seed, "Master seed");
  b.Add(prune_cmd, "out-dir", &pr.out_dir, "Directory for solution JSON files");
  pr.learner.Register(b, prune_cmd);

  BenchArgs be;
  auto* bench_cmd = app.add_subcommand("bench", "Retention benchmark over a method roster");
  b.Add(bench_cmd, "data", &be.data, "Dataset CSV (otherwise generated from layout flags)");
  RegisterGen(b, bench_cmd, be.gen, false);
  b.Add(bench_cmd, "T", &be.t_path, "Attribution matrix file (otherwise estimated per seed)");
  b.Add(bench_cmd, "seeds", &be.seeds, "Number of seeds");
  b.Add(bench_cmd, "seed", &be.seed, "Master seed");
  b.Add(bench_cmd, "levels", &be.levels, "Strictly decreasing retention fractions")
      ->delimiter(',');
  b.Add(bench_cmd, "methods", &be.methods,
        "Subset of random,loo,shapley,banzhaf-t,dataoob,cdvm")
      ->delimiter(',');
  b.Add(bench_cmd, "p", &be.p, "Inclusion probability for on-the-fly estimation");
  b.Add(bench_cmd, "models", &be.models, "Subset models for on-the-fly estimation");
  b.Add(bench_cmd, "bootstraps", &be.bootstraps, "DataOob bootstrap count");
  b.Add(bench_cmd, "alpha", &be.alpha, "CDVM trade-off weight");
  b.Add(bench_cmd, "kappa", &be.kappa, "CDVM slack threshold or 'default'");
  b.Add(bench_cmd, "alpha-grid", &be.alpha_grid, "CDVM alpha grid")->delimiter(',');
  b.Add(bench_cmd, "kappa-grid", &be.kappa_grid, "CDVM kappa grid")->delimiter(',');
  b.AddFlag(bench_cmd, "default-grid", &be.default_grid,
        "CDVM grid search over alpha {0.5,0.75,1} x kappa = default * {1/32..1}");
  b.Add(bench_cmd, "pairing", &be.pairing, "Overlap seed pairing: same-seed | cross-seed");
  b.Add(bench_cmd, "out-dir", &be.out_dir, "Output directory");
  be.learner.Register(b, bench_cmd);

  AnalyzeArgs an;
  auto* analyze_cmd = app.add_subcommand("analyze", "Overlap and spectrum of saved selections");
  b.Add(analyze_cmd, "retained", &an.retained, "retained.csv written by bench");
  b.Add(analyze_cmd, "data", &an.data, "Dataset CSV (for the number of training points)");
  b.Add(analyze_cmd, "n", &an.n, "Number of training points");
  b.Add(analyze_cmd, "pairing", &an.pairing, "Overlap seed pairing: same-seed | cross-seed");
  b.Add(analyze_cmd, "out-dir", &an.out_dir, "Output directory");

  try {
    std::vector<std::string> rest(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    if (!config_path.empty()) {
      const json config = LoadConfig(config_path);
      if (config.contains("threads") && app.get_option("--threads")->count() == 0) {
        threads = config["threads"].get<int>();
      }
      json top = config;
      top.erase("threads");
      for (const auto* sub : {gen_cmd, att_cmd, prune_cmd, bench_cmd, analyze_cmd}) {
        top.erase(sub->get_name());
      }
      b.Apply(cmd, top, "config");
      if (config.contains(cmd->get_name())) {
        const json& scoped = config[cmd->get_name()];
        if (!scoped.is_object()) throw std::invalid_argument("config section must be an object");
        b.Apply(cmd, scoped, "config section '" + cmd->get_name() + "'");
      }
    }
    if (threads < 0) throw std::invalid_argument("--threads must be non-negative");
    if (cmd == gen_cmd) return CmdGen(gen, out);
    if (cmd == att_cmd) return CmdAttribute(att, threads, out);
    if (cmd == prune_cmd) return CmdPrune(pr, out);
    if (cmd == bench_cmd) return CmdBench(be, threads, out, err);
    return CmdAnalyze(an, out);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace cdvm::cli
