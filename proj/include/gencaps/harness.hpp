#pragma once

// Experiment plumbing behind the gencaps command line: dataset files,
// result tables, per-scene outcome files, the markdown report and plots.
//
// Layout of an output directory:
//
//   dataset_sigma_<s>.jsonl             one scene per line
//   results.csv                         one row per (method, sigma, lambda, mask)
//   timings.csv                         wall time per cell (not deterministic)
//   outcomes/<cell>.jsonl               per-scene predictions and metrics
//   run.cfg                             effective settings, key=value
//   report.md
//   plots/<cell>_scene_<id>.svg

#include "gencaps/experiment.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gencaps {

namespace fs = std::filesystem;

struct RunOptions {
  std::vector<Method> methods{Method::gcm_ds, Method::gcm_gmm, Method::ransac};
  std::vector<double> sigmas{0.0};
  std::vector<double> lambdas{500.0};
  std::vector<MaskConvention> masks{MaskConvention::full};
  std::size_t draws = 512;
  std::uint64_t seed = 7;
  int restarts = 5;
  fs::path out = "results";
  /// CSV of published reference values juxtaposed in report.md.
  std::optional<fs::path> reference;
  /// Use the OpenMP scene loop (the serial loop gives identical output).
  bool parallel = true;

  /// Throws std::invalid_argument on empty lists or out-of-range values.
  void validate() const;
};

/// One evaluated (method, sigma, lambda) cell. lambda is empty for RANSAC.
struct Cell {
  Method method = Method::gcm_ds;
  double sigma = 0.0;
  std::optional<double> lambda;
  std::vector<SceneOutcome> outcomes;
  double wall_seconds = 0.0;
};

struct ResultRow {
  Method method = Method::gcm_ds;
  double sigma = 0.0;
  std::optional<double> lambda;
  MaskConvention mask = MaskConvention::full;
  DatasetSummary summary;
  std::size_t degenerate = 0;
};

/// Shortest decimal form used in file names and tables ("0", "0.1", "500").
std::string number_tag(double v);
std::string_view to_string(MaskConvention mask);
MaskConvention parse_mask(std::string_view name);

/// Comma-separated lists. Throw std::invalid_argument on malformed items.
std::vector<double> parse_number_list(const std::string& text);
std::vector<Method> parse_method_list(const std::string& text);
std::vector<MaskConvention> parse_mask_list(const std::string& text);
std::vector<std::size_t> parse_index_list(const std::string& text);

fs::path dataset_path(const fs::path& out, double sigma);
std::string cell_name(Method method, double sigma, std::optional<double> lambda);
fs::path outcomes_path(const fs::path& out, Method method, double sigma,
                       std::optional<double> lambda);

/// Reads the dataset file for `sigma` from `out`, or generates it from
/// (draws, seed) and writes it when absent.
std::vector<Scene> load_or_generate(const fs::path& out, double sigma, std::size_t draws,
                                    std::uint64_t seed, bool* generated = nullptr);

/// Evaluates every cell, writes results.csv, timings.csv, outcomes/*,
/// run.cfg and report.md under opts.out, and returns the rows.
std::vector<ResultRow> run_experiment(const RunOptions& opts, std::ostream* log = nullptr);

std::vector<ResultRow> summarize(const Cell& cell, std::span<const MaskConvention> masks);

void write_results_csv(std::ostream& os, std::span<const ResultRow> rows);
std::vector<ResultRow> read_results_csv(const fs::path& path);

void write_outcomes(const fs::path& path, std::span<const SceneOutcome> outcomes);
std::vector<SceneOutcome> read_outcomes(const fs::path& path);

/// Rebuilds report.md from the files of a finished run.
void write_report(const fs::path& out, const std::optional<fs::path>& reference);

struct PlotRequest {
  fs::path out;
  std::vector<std::size_t> scenes;
  std::vector<Method> methods;
  std::vector<double> sigmas;
  std::vector<double> lambdas;
};

/// Writes one SVG per (cell, scene) and returns the paths. Throws
/// std::invalid_argument for a scene id beyond the dataset and
/// std::runtime_error when a requested cell has no outcome file.
std::vector<fs::path> write_plots(const PlotRequest& req);

}  // namespace gencaps
