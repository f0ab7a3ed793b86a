#include "olar/sampling.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace olar {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t CounterRng::bits(std::uint64_t stream, std::uint64_t position) const {
  return splitmix64(splitmix64(splitmix64(seed_) ^ (stream * 0xd1b54a32d192ed03ULL)) ^ position);
}

double CounterRng::uniform(std::uint64_t stream, std::uint64_t position) const {
  return static_cast<double>(bits(stream, position) >> 11) * 0x1.0p-53;
}

SamplingDecision decide(const CounterRng& rng, std::uint64_t stream, std::size_t row_index,
                        double prob, double p_norm) {
  if (!(prob >= 0.0 && prob <= 1.0)) fail(ErrorCode::InvalidProbability, "probability outside [0,1]");
  if (!(p_norm > 0.0)) fail(ErrorCode::InvalidArgument, "norm exponent must be positive");
  SamplingDecision d;
  d.row_index = row_index;
  d.probability = prob;
  if (prob >= 1.0) {
    d.sampled = true;
  } else if (prob > 0.0) {
    d.sampled = rng.uniform(stream, row_index) < prob;
  }
  d.scale = d.sampled ? std::pow(prob, -1.0 / p_norm) : std::numeric_limits<double>::infinity();
  return d;
}

ComposedProbability composed_probability(double p_outer, double p_inner, double p_norm) {
  if (!(p_outer > 0.0 && p_outer <= 1.0 && p_inner > 0.0 && p_inner <= 1.0))
    fail(ErrorCode::InvalidProbability, "composed probabilities must lie in (0,1]");
  const double prob = p_outer * p_inner;
  return {prob, std::pow(prob, -1.0 / p_norm)};
}

void QueryLedger::charge(LedgerStage stage) {
  if (exhausted()) fail(ErrorCode::BudgetExhausted, "label budget of " + std::to_string(*budget_) + " used up");
  ++per_stage_[static_cast<std::size_t>(stage)];
  ++total_;
}

std::size_t QueryLedger::remaining() const {
  if (!budget_) return std::numeric_limits<std::size_t>::max();
  return *budget_ > total_ ? *budget_ - total_ : 0;
}

void QueryLedger::absorb(const QueryLedger& other) {
  for (std::size_t i = 0; i < per_stage_.size(); ++i) per_stage_[i] += other.per_stage_[i];
  total_ += other.total_;
}

double RowLabel::get(LedgerStage stage) {
  if (!value_) {
    ledger_->charge(stage);
    value_ = oracle_->query(row_);
  }
  return *value_;
}

WeightedSketch::WeightedSketch(double p_norm, Index dim, bool track_labels)
    : p_(p_norm), dim_(dim), track_labels_(track_labels) {
  if (dim < 1) fail(ErrorCode::InvalidArgument, "sketch dimension must be positive");
}

Eigen::Map<const Matrix> WeightedSketch::matrix() const {
  return {data_.data(), rows(), dim_};
}

Eigen::Map<const Vector> WeightedSketch::labels() const {
  return {labels_.data(), static_cast<Index>(labels_.size())};
}

Eigen::Map<const Vector> WeightedSketch::row(Index i) const {
  return {data_.data() + i * dim_, dim_};
}

void WeightedSketch::append(const VectorRef& row, const SamplingDecision& decision,
                            std::optional<double> label) {
  if (row.size() != dim_) fail(ErrorCode::DimensionMismatch, "sketch row length");
  if (!decision.sampled || !std::isfinite(decision.scale))
    fail(ErrorCode::InvalidArgument, "only sampled rows enter a sketch");
  if (track_labels_ && !label) fail(ErrorCode::InvalidArgument, "sketch tracks labels but none given");
  for (Index j = 0; j < dim_; ++j) data_.push_back(row[j] * decision.scale);
  if (track_labels_) labels_.push_back(*label * decision.scale);
  decisions_.push_back(decision);
}

SampleStep sample_step(WeightedSketch& sketch, const VectorRef& row, std::size_t row_index,
                       double prob, const CounterRng& rng, std::uint64_t stream, RowLabel* label,
                       LedgerStage stage, double p_outer) {
  SampleStep step;
  step.decision = decide(rng, stream, row_index, prob, sketch.p());
  if (!step.decision.sampled) return step;
  if (p_outer != 1.0) step.decision.scale = composed_probability(p_outer, prob, sketch.p()).scale;
  std::optional<double> y;
  if (sketch.tracks_labels()) {
    if (label == nullptr) fail(ErrorCode::InvalidArgument, "label-tracking sketch needs a label source");
    step.queried = !label->revealed();
    y = label->get(stage);
  }
  sketch.append(row, step.decision, y);
  return step;
}

void write_sketch_csv(std::ostream& out, std::string_view stage, const WeightedSketch& sketch,
                      bool header) {
  if (header) out << "stage,row_index,probability,scale,queried\n";
  char buf[160];
  for (const SamplingDecision& d : sketch.decisions()) {
    std::snprintf(buf, sizeof buf, ",%zu,%.17g,%.17g,%d\n", d.row_index, d.probability, d.scale,
                  sketch.tracks_labels() ? 1 : 0);
    out << stage << buf;
  }
}

}  // namespace olar
