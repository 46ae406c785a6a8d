#pragma once

// Experiment harness: configuration, seeded runs over a worker pool, trace
// persistence and per-checkpoint summaries.
//
// Output layout under `out`:
//   config.txt                  effective configuration
//   seed_<s>/<variant>.csv      one trace per seed and variant
//   summary_<variant>.csv       median, p10, p90 across seeds per checkpoint
//   failures.csv                only when a seed failed

#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mirror_sinkhorn/csv_io.hpp"
#include "mirror_sinkhorn/solver.hpp"

namespace mirror_sinkhorn {

enum class ExperimentKind { ot_synthetic, ot_images, strongly_convex, procrustes, tensor_demo, online_demo };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::ot_synthetic;

  Index m = 20;
  Index n = 20;
  Index image_size = 10;
  std::string source_image;  // optional matrix CSV grids for ot-images
  std::string target_image;
  Index dim = 10;  // procrustes point dimension
  int k_nn = 5;
  double noise = 0.1;
  double lambda = 3.0;
  double threshold_c = 0.5;
  Index tensor_rank = 3;
  Index mode_size = 5;

  std::int64_t horizon = 10000;
  std::vector<std::uint64_t> seeds;
  std::vector<double> sigmas;    // one stochastic variant per value
  std::string oracle = "noisy";  // noisy | subsampled
  Index sample_size = 0;         // subsampled oracle; 0 -> mn / 10
  std::vector<double> alphas;    // entropic Sinkhorn comparisons
  double alpha = 1.0;            // strongly-convex regularization
  std::vector<int> normalizations{1};  // k_S values
  // Schedule keys: kind, B, delta, ell, epsilon, value. B and ell default
  // to the objective's own constants, delta to the instance radius.
  std::map<std::string, std::string> schedule;
  Averaging averaging = Averaging::mean;
  std::int64_t checkpoint_stride = 0;
  bool record_timing = false;
  int workers = 1;
  std::filesystem::path out;  // empty: nothing is written

  // Desk-scale defaults for a kind.
  static ExperimentConfig defaults(ExperimentKind kind);

  // Throws ConfigError on an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);

  // Every key accepted by set(), in a fixed order.
  static const std::vector<std::string>& keys();

  // Throws ConfigError.
  void validate() const;

  // key = value lines that set() reads back to the same configuration.
  std::string to_text() const;
};

// Flat "key = value" lines; '#' starts a comment, blank lines are skipped.
// Throws ParseError on a line without '='.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text);

struct SeedFailure {
  std::uint64_t seed = 0;
  std::string message;
  std::exception_ptr error;
};

struct ExperimentResult {
  std::vector<std::string> variants;
  std::vector<std::uint64_t> completed_seeds;
  // variant -> one trace per completed seed, in seed order
  std::map<std::string, std::vector<CsvTable>> traces;
  std::map<std::string, CsvTable> summaries;
  std::vector<SeedFailure> failures;
};

// Runs every seed (in parallel up to config.workers). When a seed fails,
// the others still complete and their files are written along with
// failures.csv; the first failure is then rethrown.
ExperimentResult run_experiment(const ExperimentConfig& config);

// One seed, every variant. Deterministic in (config, seed).
std::map<std::string, CsvTable> run_seed(const ExperimentConfig& config, std::uint64_t seed);

// Columns t and normalizations from the first trace, then name_median,
// name_p10, name_p90 for every other numeric column (elapsed_ns
// excluded). Traces must share their checkpoints; throws ParseError
// otherwise.
CsvTable summarize(const std::vector<CsvTable>& traces);

// Values of a column as doubles; empty fields become NaN.
std::vector<double> column_values(const CsvTable& table, std::string_view name);

// Variant names carry their parameter, e.g. "sigma_0.1", "alpha_0.01".
std::string variant_name(std::string_view prefix, double value);

}  // namespace mirror_sinkhorn
