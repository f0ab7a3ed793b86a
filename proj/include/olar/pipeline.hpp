#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "olar/compression.hpp"
#include "olar/data_io.hpp"
#include "olar/lewis.hpp"
#include "olar/sampling.hpp"
#include "olar/solvers.hpp"

namespace olar {

enum class WeightMode { ExactOracle, CompressionTree, LeverageFast };

const char* to_string(WeightMode m);
WeightMode parse_weight_mode(const std::string& s);

/// Multipliers inside the asymptotic oversampling rates. Only the shapes
/// (which logs, which powers of eps) come from the analysis; the numbers are
/// desk-scale choices.
struct ThetaConstants {
  double beta = 4.0;         // beta = max(beta_floor, beta * ln d), also beta2
  double beta_floor = 8.0;
  double beta1 = 4.0;        // beta1 * d * ln(1/(eps delta)) / eps^{2+p}
  double beta3 = 0.08;       // beta3 * ln^2 d * ln(d/eps) * ln(1/delta) / eps^2
  double beta_p1 = 0.35;     // p = 1: beta_p1 * ln d * ln(d/(eps delta)) / eps^2
  double tree_beta = CompressionConfig::kDefaultBetaScale;
};

struct Betas {
  double beta = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 0.0;
};

struct PipelineConfig {
  double p = 2.0;
  double epsilon = 0.5;
  double delta = 0.01;
  /// Upper bound on the stream length; 0 takes it from the stream.
  std::size_t n_declared = 0;
  ThetaConstants theta;
  /// Explicit values win over the Theta-constant formulas.
  std::optional<double> beta, beta1, beta2, beta3;
  WeightMode weight_mode = WeightMode::CompressionTree;
  double tree_eta = 0.5;
  std::size_t tree_refresh = 32;
  /// Independent runs stepped together over one pass; one is selected.
  int boost_runs = 1;
  /// Independent S3 sketches; the final correction is picked among them.
  int s3_copies = 1;
  std::uint64_t seed = 0;
  SolverOptions solver;
  LewisOptions lewis;
  /// Keep x~ after every row (p = 2, and the general-p intermediate mode).
  bool record_steps = false;
  /// General p: re-solve after every sampled row, not just at the end.
  bool intermediate = false;

  /// Throws InvalidArgument on out-of-range fields.
  void validate() const;
  Betas betas(Index d) const;
};

struct StageSamples {
  std::size_t s = 0, s1 = 0, s2 = 0, s3 = 0;
};

struct PipelineResult {
  Vector x;
  QueryLedger ledger;
  StageSamples samples;
  Betas betas;
  std::size_t rows = 0;
  /// Rows retained unconditionally before sampling began.
  std::size_t init_rows = 0;
  /// Largest number of rows held at once (sketches plus weight structures).
  std::size_t peak_stored_rows = 0;
  int chosen_run = 0;
  std::size_t weight_solves_unconverged = 0;
  /// p = 2: worst relative Frobenius gap between a maintained inverse and a
  /// direct re-inversion of its sketch Gram, over up to 20 checkpoints.
  double inverse_drift = 0.0;
  double wall_seconds = 0.0;
  /// x~ after row t (index t - 1); rows before sampling begins get zeros.
  std::vector<Vector> steps;
  /// Final sketches of the chosen run, for the debug dump.
  std::vector<std::pair<std::string, WeightedSketch>> sketches;
};

/// Dispatches on p: 1 -> single-stage l1 sampling, 2 -> maintained-inverse
/// pipeline, otherwise the four-sketch general-p pipeline. Boosting and S3
/// copies apply where the algorithm has them.
PipelineResult run_pipeline(RowStream& stream, LabelOracle& oracle, const PipelineConfig& cfg);

PipelineResult run_general_p(RowStream& stream, LabelOracle& oracle, const PipelineConfig& cfg);
/// run_general_p with record_steps and intermediate forced on.
PipelineResult run_general_p_intermediate(RowStream& stream, LabelOracle& oracle, PipelineConfig cfg);
PipelineResult run_p2(RowStream& stream, LabelOracle& oracle, const PipelineConfig& cfg);
PipelineResult run_p1(RowStream& stream, LabelOracle& oracle, const PipelineConfig& cfg);

// ---- budget mode (experiments protocol) ----

struct BudgetResult {
  Vector x;
  std::size_t queries = 0;
  /// Rows skipped because the cap was reached.
  std::size_t forced_skips = 0;
  QueryLedger ledger;
};

/// Online weights of every row in stream order, computed from features
/// only: exact online leverage scores for p = 2, the compression tree
/// otherwise (or the exact prefix oracle with `exact`). Rewinds the stream.
std::vector<double> stream_online_weights(RowStream& stream, double p, std::uint64_t seed, bool exact = false,
                                          double tree_eta = 0.5);

/// Keep row t with probability B_t / (n - t + 1) (t 1-based, B_t budget
/// left); first d rows always kept. Unweighted final solve.
BudgetResult uniform_baseline(RowStream& stream, LabelOracle& oracle, std::size_t budget, double p,
                              std::uint64_t seed);

/// p_t = min(1, B_t w_t / S_t), S_t = mean(w_1..w_t) * (n - t + 1); first
/// d rows always kept. Rescaled rows, single-stage final solve.
BudgetResult budgeted_active(RowStream& stream, LabelOracle& oracle, std::size_t budget, double p,
                             std::uint64_t seed, const std::vector<double>& weights);
BudgetResult budgeted_active(RowStream& stream, LabelOracle& oracle, std::size_t budget, double p,
                             std::uint64_t seed);

/// Non-online reference: Lewis weights of the whole matrix, probabilities
/// min(1, c w_i) with c set by bisection so that they sum to the budget.
BudgetResult offline_lewis_reference(RowStream& stream, LabelOracle& oracle, std::size_t budget, double p,
                                     std::uint64_t seed);

}  // namespace olar
