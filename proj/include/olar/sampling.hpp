#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "olar/label_oracle.hpp"
#include "olar/linalg.hpp"

namespace olar {

/// Independent random streams. Each sampler draws from its own stream, keyed
/// by (seed, stream id, stream position), so the samplers never share draws
/// and any decision can be reproduced in isolation.
enum class StreamId : std::uint64_t {
  S = 0,
  S1 = 1,
  S2 = 2,
  S3 = 3,  // copies use S3 + 16 * copy
  Compression = 100,
  Uniform = 101,
  Budget = 102,
  Offline = 103,
  Synthetic = 104,
  Jl = 105,
};

inline std::uint64_t stream_id(StreamId s, std::uint64_t copy = 0) {
  return static_cast<std::uint64_t>(s) + 16 * copy;
}

std::uint64_t splitmix64(std::uint64_t z);

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t bits(std::uint64_t stream, std::uint64_t position) const;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform(std::uint64_t stream, std::uint64_t position) const;
  /// A new generator whose streams are independent of this one's.
  CounterRng derive(std::uint64_t salt) const { return CounterRng(splitmix64(seed_ ^ splitmix64(salt))); }

 private:
  std::uint64_t seed_;
};

struct SamplingDecision {
  std::size_t row_index = 0;
  double probability = 0.0;
  bool sampled = false;
  /// Row scale p^{-1/p_norm} when sampled, +inf otherwise.
  double scale = 0.0;
};

/// Keep row `row_index` with probability `prob`. prob = 1 always keeps,
/// prob = 0 never does.
SamplingDecision decide(const CounterRng& rng, std::uint64_t stream, std::size_t row_index,
                        double prob, double p_norm);

/// Oversampling for a one-shot (1 +- eps) embedding from exact Lewis
/// weights: 8 ln d / eps^2 (ln d floored at 1).
inline double embedding_beta(Index d, double eps) {
  return 8.0 * std::max(std::log(static_cast<double>(d)), 1.0) / (eps * eps);
}

struct ComposedProbability {
  double probability;
  double scale;
};

/// Second-stage rows carry the first-stage rescaling: the stored scale is
/// (p_outer * p_inner)^{-1/p_norm}.
ComposedProbability composed_probability(double p_outer, double p_inner, double p_norm);

enum class LedgerStage : std::size_t { S = 0, S1 = 1, S2 = 2, S3 = 3 };

/// Counts revealed labels, attributed to the stage that first asked for
/// them. An optional cap turns the ledger into a hard budget.
class QueryLedger {
 public:
  explicit QueryLedger(std::optional<std::size_t> budget = std::nullopt) : budget_(budget) {}

  /// Throws BudgetExhausted (and records nothing) if the cap is reached.
  void charge(LedgerStage stage);

  std::size_t total() const { return total_; }
  std::size_t per_stage(LedgerStage s) const { return per_stage_[static_cast<std::size_t>(s)]; }
  std::optional<std::size_t> budget() const { return budget_; }
  std::size_t remaining() const;
  bool exhausted() const { return budget_ && total_ >= *budget_; }

  /// Fold another ledger's counts into this one (boosting runs).
  void absorb(const QueryLedger& other);

 private:
  std::optional<std::size_t> budget_;
  std::array<std::size_t, 4> per_stage_{};
  std::size_t total_ = 0;
};

/// One row's label, revealed at most once no matter how many samplers keep
/// the row. The first `get` queries the oracle and charges the ledger.
class RowLabel {
 public:
  RowLabel(LabelOracle& oracle, QueryLedger& ledger, std::size_t row)
      : oracle_(&oracle), ledger_(&ledger), row_(row) {}

  double get(LedgerStage stage);
  bool revealed() const { return value_.has_value(); }
  std::size_t row() const { return row_; }

 private:
  LabelOracle* oracle_;
  QueryLedger* ledger_;
  std::size_t row_;
  std::optional<double> value_;
};

/// Rescaled row-sampled submatrix S*A (and S*b when labels are tracked),
/// stored as a growable row list.
class WeightedSketch {
 public:
  WeightedSketch() = default;
  WeightedSketch(double p_norm, Index dim, bool track_labels);

  double p() const { return p_; }
  Index dim() const { return dim_; }
  Index rows() const { return static_cast<Index>(decisions_.size()); }
  bool tracks_labels() const { return track_labels_; }

  Eigen::Map<const Matrix> matrix() const;
  Eigen::Map<const Vector> labels() const;
  Eigen::Map<const Vector> row(Index i) const;
  const std::vector<SamplingDecision>& decisions() const { return decisions_; }

  /// Appends `row * decision.scale` (and `label * decision.scale`).
  void append(const VectorRef& row, const SamplingDecision& decision,
              std::optional<double> label = std::nullopt);

 private:
  double p_ = 2.0;
  Index dim_ = 0;
  bool track_labels_ = false;
  std::vector<double> data_;
  std::vector<double> labels_;
  std::vector<SamplingDecision> decisions_;
};

struct SampleStep {
  SamplingDecision decision;
  bool queried = false;
};

/// Draws the keep/drop decision for `row` at probability `prob` and, if
/// kept, appends it with scale (p_outer * prob)^{-1/p}. The label is fetched
/// only for kept rows of a label-tracking sketch. `label` may be null for
/// sketches that hold no labels.
SampleStep sample_step(WeightedSketch& sketch, const VectorRef& row, std::size_t row_index,
                       double prob, const CounterRng& rng, std::uint64_t stream, RowLabel* label,
                       LedgerStage stage, double p_outer = 1.0);

/// Debug dump: stage,row_index,probability,scale,queried
void write_sketch_csv(std::ostream& out, std::string_view stage, const WeightedSketch& sketch,
                      bool header = true);

}  // namespace olar
