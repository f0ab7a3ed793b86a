#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "olar/pipeline.hpp"

namespace olar::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

/// Maps a library error to the documented exit code.
int exit_code_for(ErrorCode code);

struct SweepSpec {
  std::vector<std::string> methods = {"active-online", "uniform"};
  std::vector<std::size_t> budgets;
  int trials = 20;
  double p = 2.0;
  std::string data;
  std::uint64_t seed = 0;
  /// Online weights: exact oracle instead of the compression tree.
  bool exact_weights = false;

  void validate() const;
};

struct SweepRow {
  std::string method;
  std::size_t budget = 0;
  int trial = 0;
  double relative_error = 0.0;
  std::size_t queries_used = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";
};

/// Seed for one trial; shared by every method and budget so comparisons
/// are paired.
std::uint64_t trial_seed(std::uint64_t master, int trial);

/// Runs every (method, budget, trial) cell; trials run in parallel and the
/// rows come back in (method, budget, trial) order.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

/// Data rows, then "# aggregate" and one mean,std line per (method, budget)
/// over the rows with status ok. std is the sample standard deviation.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Resolves a dataset argument: a stream file, or a directory written by
/// `gen` (then its stream.olar).
std::string resolve_data_path(const std::string& path);

/// key=value lines, '#' comments. Keys mirror PipelineConfig field names.
void apply_config_file(const std::string& path, PipelineConfig& cfg);

/// Entire command line (argv[0] is the program name). Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace olar::cli
