#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "olar/lewis.hpp"
#include "olar/sampling.hpp"

namespace olar {

/// Approximate online Lewis weights. `weigh_and_add` returns the weight of
/// `row` as the last row of (everything added so far) + row, then adds it.
class OnlineWeigher {
 public:
  virtual ~OnlineWeigher() = default;
  virtual double weigh_and_add(const VectorRef& row) = 0;
  /// Rows currently held in memory.
  virtual std::size_t stored_rows() const = 0;
};

struct CompressionConfig {
  double p = 2.0;
  Index dim = 1;
  std::size_t n_max = 1;
  double eta = 0.5;
  double delta = 0.01;
  /// Buffer capacity Q; B0 is compressed once it holds more than this.
  std::size_t capacity = std::numeric_limits<std::size_t>::max();
  double beta_c = 1.0;
  LewisOptions lewis{1e-6, 200, kDefaultPinvTol};
  /// Start each Lewis solve from the weights found by the previous one.
  bool warm_start = true;
  /// 0: every query runs the full Lewis iteration on the blocks plus the
  /// query row. k > 0: the stored weights are re-solved every
  /// min(k, stored/kRefreshFraction) ingests (at least every ingest, and
  /// after each compression); in between a query holds them fixed and only
  /// solves the scalar equation for the new row.
  std::size_t refresh_interval = 32;
  std::uint64_t seed = 0;

  /// beta_c = beta_scale * ln(n/delta) / eta^2, Q = max(2 ceil(beta_c d), 4d),
  /// capped at n_max (at which point the tree never compresses).
  static CompressionConfig defaults(double p, Index dim, std::size_t n_max, double eta = 0.5,
                                    double delta = 0.01, std::uint64_t seed = 0,
                                    double beta_scale = kDefaultBetaScale);

  /// Row bound R for one compressed block (ceil(beta_c * d)).
  std::size_t row_bound() const;

  static constexpr double kDefaultBetaScale = 1.0;
  static constexpr std::size_t kRefreshFraction = 16;
};

/// Merge-and-reduce blocks B_0..B_L. New rows land in B_0; when it
/// overflows, the lowest blocks are merged and subsampled by their Lewis
/// weights into the first empty block above them.
class CompressionTree final : public OnlineWeigher {
 public:
  explicit CompressionTree(CompressionConfig cfg);

  const CompressionConfig& config() const { return cfg_; }
  std::size_t levels() const { return blocks_.size(); }
  std::size_t rows_seen() const { return rows_seen_; }
  std::size_t compressions() const { return compressions_; }
  /// Lewis solves (queries and compressions) that hit max_iter.
  std::size_t unconverged_solves() const { return unconverged_; }
  std::size_t stored_rows() const override;
  std::size_t block_rows(std::size_t level) const { return blocks_.at(level).rows(); }
  Matrix block(std::size_t level) const;

  /// B_L o ... o B_0 as one matrix.
  Matrix concatenated() const;

  /// Lewis weight of `row` appended virtually after all stored rows. The
  /// tree itself is unchanged apart from its warm-start cache.
  double approx_online_weight(const VectorRef& row);

  /// Append to B_0 and compress if B_0 now exceeds Q.
  void ingest(const VectorRef& row);

  double weigh_and_add(const VectorRef& row) override;

  /// Versioned binary blob of the full tree state.
  std::vector<std::uint8_t> snapshot() const;
  static CompressionTree restore(std::span<const std::uint8_t> blob);

 private:
  struct Block {
    std::vector<double> data;
    std::vector<double> cache;  // warm-start weights
    std::size_t rows() const { return cache.size(); }
    void clear() {
      data.clear();
      cache.clear();
    }
  };

  void append_to_b0(const VectorRef& row, double cached_weight);
  void compress();
  // Concatenation of blocks [0, top] in B_top o ... o B_0 order, with an
  // optional extra last row; fills the matching warm-start vector.
  Matrix stack(std::size_t top, const VectorRef* extra, std::vector<double>& warm) const;
  void store_cache(std::size_t top, std::span<const double> w);
  // Full solve over the stored rows; rebuilds k_inv_.
  void refresh();
  double scalar_weight(const VectorRef& row) const;
  static constexpr std::size_t kRefreshFraction = CompressionConfig::kRefreshFraction;
  double gram_exponent() const { return 1.0 - 2.0 / cfg_.p; }

  CompressionConfig cfg_;
  CounterRng rng_;
  std::vector<Block> blocks_;
  std::size_t rows_seen_ = 0;
  std::size_t compressions_ = 0;
  std::size_t unconverged_ = 0;
  std::uint64_t draws_ = 0;
  // pinv of sum_i w_i^{1-2/p} b_i b_i^T over stored rows, valid only while
  // that matrix has full rank
  Square k_inv_;
  bool k_valid_ = false;
  std::size_t since_refresh_ = 0;
};

/// Reference weigher: keeps every row and recomputes full Lewis weights of
/// the prefix. O(t) memory and work per step.
class ExactOnlineWeigher final : public OnlineWeigher {
 public:
  ExactOnlineWeigher(double p, Index dim, LewisOptions opt = {}, bool warm_start = true);
  double weigh_and_add(const VectorRef& row) override;
  std::size_t stored_rows() const override { return weights_.size(); }

 private:
  double p_;
  Index dim_;
  LewisOptions opt_;
  bool warm_start_;
  std::vector<double> data_;
  std::vector<double> weights_;
};

}  // namespace olar
