#include "olar/compression.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bytes.hpp"
#include "olar/kernels.hpp"

namespace olar {
namespace {

constexpr std::uint16_t kSnapshotVersion = 1;

std::size_t level_count(std::size_t n_max) {
  std::size_t l = 0;
  while ((std::size_t{1} << l) < n_max) ++l;
  return std::max<std::size_t>(l, 1) + 1;
}

}  // namespace

CompressionConfig CompressionConfig::defaults(double p, Index dim, std::size_t n_max, double eta,
                                              double delta, std::uint64_t seed, double beta_scale) {
  if (!(eta > 0.0 && eta < 1.0)) fail(ErrorCode::InvalidArgument, "eta must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) fail(ErrorCode::InvalidArgument, "delta must lie in (0,1)");
  if (dim < 1 || n_max < 1) fail(ErrorCode::InvalidArgument, "tree needs d >= 1 and n_max >= 1");
  CompressionConfig c;
  c.p = p;
  c.dim = dim;
  c.n_max = n_max;
  c.eta = eta;
  c.delta = delta;
  c.seed = seed;
  c.beta_c = beta_scale * std::log(static_cast<double>(n_max) / delta) / (eta * eta);
  const std::size_t q = std::max(2 * c.row_bound(), static_cast<std::size_t>(4 * dim));
  c.capacity = q >= n_max ? std::numeric_limits<std::size_t>::max() : q;
  return c;
}

std::size_t CompressionConfig::row_bound() const {
  return static_cast<std::size_t>(std::ceil(beta_c * static_cast<double>(dim)));
}

CompressionTree::CompressionTree(CompressionConfig cfg) : cfg_(cfg), rng_(cfg.seed) {
  if (!(cfg_.p >= 1.0 && cfg_.p <= 2.0)) fail(ErrorCode::InvalidArgument, "tree needs p in [1,2]");
  if (cfg_.dim < 1) fail(ErrorCode::InvalidArgument, "tree dimension must be positive");
  if (!(cfg_.beta_c > 0.0)) fail(ErrorCode::InvalidArgument, "beta_c must be positive");
  if (cfg_.capacity < 1) fail(ErrorCode::InvalidArgument, "capacity must be positive");
  blocks_.resize(level_count(cfg_.n_max));
}

std::size_t CompressionTree::stored_rows() const {
  std::size_t s = 0;
  for (const Block& b : blocks_) s += b.rows();
  return s;
}

Matrix CompressionTree::block(std::size_t level) const {
  const Block& b = blocks_.at(level);
  return Eigen::Map<const Matrix>(b.data.data(), static_cast<Index>(b.rows()), cfg_.dim);
}

Matrix CompressionTree::stack(std::size_t top, const VectorRef* extra, std::vector<double>& warm) const {
  std::size_t total = extra ? 1 : 0;
  for (std::size_t i = 0; i <= top; ++i) total += blocks_[i].rows();
  Matrix m(static_cast<Index>(total), cfg_.dim);
  warm.clear();
  warm.reserve(total);
  Index r = 0;
  for (std::size_t i = top + 1; i-- > 0;) {
    const Block& b = blocks_[i];
    if (b.rows() == 0) continue;
    m.middleRows(r, static_cast<Index>(b.rows())) =
        Eigen::Map<const Matrix>(b.data.data(), static_cast<Index>(b.rows()), cfg_.dim);
    r += static_cast<Index>(b.rows());
    warm.insert(warm.end(), b.cache.begin(), b.cache.end());
  }
  if (extra) {
    m.row(r) = extra->transpose();
    warm.push_back(1.0);
  }
  return m;
}

void CompressionTree::store_cache(std::size_t top, std::span<const double> w) {
  std::size_t k = 0;
  for (std::size_t i = top + 1; i-- > 0;) {
    for (double& c : blocks_[i].cache) c = w[k++];
  }
}

Matrix CompressionTree::concatenated() const {
  std::vector<double> warm;
  return stack(blocks_.size() - 1, nullptr, warm);
}

void CompressionTree::refresh() {
  const std::size_t top = blocks_.size() - 1;
  std::vector<double> warm;
  const Matrix m = stack(top, nullptr, warm);
  since_refresh_ = 0;
  k_valid_ = false;
  if (m.rows() < cfg_.dim) return;
  const LewisWeights lw = lewis_weights(m, cfg_.p, cfg_.lewis, cfg_.warm_start ? std::span<const double>(warm)
                                                                                 : std::span<const double>());
  if (!lw.converged) ++unconverged_;
  store_cache(top, lw.weights);
  const double e = gram_exponent();
  std::vector<double> c(lw.weights.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    c[i] = lw.weights[i] > 0.0 ? (e == 0.0 ? 1.0 : std::pow(lw.weights[i], e)) : 0.0;
  const Square k = kernels::weighted_gram(m, c);
  Eigen::SelfAdjointEigenSolver<Square> es(k, Eigen::EigenvaluesOnly);
  const double top_ev = es.eigenvalues().maxCoeff();
  if (!(top_ev > 0.0) || es.eigenvalues().minCoeff() <= 1e-10 * top_ev) return;
  k_inv_ = k.llt().solve(Square::Identity(cfg_.dim, cfg_.dim));
  k_inv_ = 0.5 * (k_inv_ + k_inv_.transpose());
  k_valid_ = true;
}

double CompressionTree::scalar_weight(const VectorRef& row) const {
  const double g = row.dot(k_inv_ * row);
  if (!(g > 0.0)) return 0.0;
  const double e = gram_exponent();
  if (e == 0.0) return g / (1.0 + g);
  // w = (g / (1 + w^e g))^{p/2}; the map contracts by at most |1 - p/2|
  const double half_p = 0.5 * cfg_.p;
  double w = std::pow(g / (1.0 + g), half_p);
  for (int it = 0; it < 200; ++it) {
    const double next = std::pow(g / (1.0 + std::pow(w, e) * g), half_p);
    const bool done = std::abs(next - w) <= 1e-13 * next;
    w = next;
    if (done) break;
  }
  return w;
}

double CompressionTree::approx_online_weight(const VectorRef& row) {
  if (row.size() != cfg_.dim) fail(ErrorCode::DimensionMismatch, "tree row length");
  if (!row.allFinite()) fail(ErrorCode::NonFinite, "tree row");
  if (cfg_.refresh_interval > 0) {
    // few stored rows means each new one moves the others a lot
    const std::size_t due = std::clamp<std::size_t>(stored_rows() / kRefreshFraction, 1, cfg_.refresh_interval);
    if (!k_valid_ || since_refresh_ >= due) refresh();
    if (k_valid_) return scalar_weight(row);
  }
  const std::size_t top = blocks_.size() - 1;
  std::vector<double> warm;
  const Matrix m = stack(top, &row, warm);
  const LewisWeights lw = lewis_weights(m, cfg_.p, cfg_.lewis, cfg_.warm_start ? std::span<const double>(warm)
                                                                                 : std::span<const double>());
  if (!lw.converged) ++unconverged_;
  if (cfg_.warm_start) store_cache(top, lw.weights);
  return lw.last();
}

void CompressionTree::append_to_b0(const VectorRef& row, double cached_weight) {
  Block& b0 = blocks_[0];
  for (Index j = 0; j < cfg_.dim; ++j) b0.data.push_back(row[j]);
  b0.cache.push_back(cached_weight);
}

void CompressionTree::ingest(const VectorRef& row) {
  if (row.size() != cfg_.dim) fail(ErrorCode::DimensionMismatch, "tree row length");
  if (!row.allFinite()) fail(ErrorCode::NonFinite, "tree row");
  append_to_b0(row, 1.0);
  ++rows_seen_;
  k_valid_ = false;
  if (blocks_[0].rows() > cfg_.capacity) compress();
}

double CompressionTree::weigh_and_add(const VectorRef& row) {
  const double w = approx_online_weight(row);
  append_to_b0(row, w > 0.0 ? w : 1.0);
  ++rows_seen_;
  if (k_valid_ && w > 0.0) {
    const double e = gram_exponent();
    const double c = e == 0.0 ? 1.0 : std::pow(w, e);
    rank_one_inverse_update_inplace(k_inv_, row, std::min(1.0, 1.0 / c));
    ++since_refresh_;
  }
  if (blocks_[0].rows() > cfg_.capacity) {
    compress();
    k_valid_ = false;
  }
  return w;
}

void CompressionTree::compress() {
  // smallest empty level above B_0; if all are full, fold everything into B_L
  std::size_t j = 1;
  while (j < blocks_.size() && blocks_[j].rows() != 0) ++j;
  const std::size_t top = j < blocks_.size() ? j - 1 : blocks_.size() - 1;
  const std::size_t target = j < blocks_.size() ? j : blocks_.size() - 1;

  std::vector<double> warm;
  const Matrix m = stack(top, nullptr, warm);
  const LewisWeights lw = lewis_weights(m, cfg_.p, cfg_.lewis, cfg_.warm_start ? std::span<const double>(warm)
                                                                                 : std::span<const double>());
  if (!lw.converged) ++unconverged_;

  Block out;
  for (Index i = 0; i < m.rows(); ++i) {
    const double w = lw.weights[static_cast<std::size_t>(i)];
    const double prob = std::min(cfg_.beta_c * w, 1.0);
    const SamplingDecision d = decide(rng_, stream_id(StreamId::Compression), draws_++, prob, cfg_.p);
    if (!d.sampled) continue;
    for (Index k = 0; k < cfg_.dim; ++k) out.data.push_back(m(i, k) * d.scale);
    out.cache.push_back(std::min(1.0, w / prob));
  }
  const std::size_t cap = 4 * std::max(cfg_.row_bound(), static_cast<std::size_t>(cfg_.dim));
  if (out.rows() > cap)
    fail(ErrorCode::CapacityOverflow, "compressed block holds " + std::to_string(out.rows()) +
                                          " rows, cap " + std::to_string(cap));
  for (std::size_t i = 0; i <= top; ++i) blocks_[i].clear();
  blocks_[target] = std::move(out);
  ++compressions_;
}

std::vector<std::uint8_t> CompressionTree::snapshot() const {
  std::vector<std::uint8_t> out;
  for (char c : {'O', 'L', 'C', 'T'}) out.push_back(static_cast<std::uint8_t>(c));
  bytes::put<std::uint16_t>(out, kSnapshotVersion);
  bytes::put<double>(out, cfg_.p);
  bytes::put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg_.dim));
  bytes::put<std::uint64_t>(out, cfg_.n_max);
  bytes::put<double>(out, cfg_.eta);
  bytes::put<double>(out, cfg_.delta);
  bytes::put<std::uint64_t>(out, cfg_.capacity);
  bytes::put<double>(out, cfg_.beta_c);
  bytes::put<double>(out, cfg_.lewis.tol);
  bytes::put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg_.lewis.max_iter));
  bytes::put<double>(out, cfg_.lewis.pinv_tol);
  bytes::put<std::uint8_t>(out, cfg_.warm_start ? 1 : 0);
  bytes::put<std::uint64_t>(out, cfg_.refresh_interval);
  bytes::put<std::uint64_t>(out, cfg_.seed);
  bytes::put<std::uint64_t>(out, rows_seen_);
  bytes::put<std::uint64_t>(out, compressions_);
  bytes::put<std::uint64_t>(out, unconverged_);
  bytes::put<std::uint64_t>(out, draws_);
  bytes::put<std::uint32_t>(out, static_cast<std::uint32_t>(blocks_.size()));
  for (const Block& b : blocks_) {
    bytes::put<std::uint64_t>(out, b.rows());
    for (double v : b.data) bytes::put<double>(out, v);
    for (double v : b.cache) bytes::put<double>(out, v);
  }
  bytes::put<std::uint8_t>(out, k_valid_ ? 1 : 0);
  bytes::put<std::uint64_t>(out, since_refresh_);
  if (k_valid_)
    for (Index i = 0; i < k_inv_.size(); ++i) bytes::put<double>(out, k_inv_.data()[i]);
  return out;
}

CompressionTree CompressionTree::restore(std::span<const std::uint8_t> blob) {
  bytes::Reader in(blob);
  in.expect_magic("OLCT");
  const auto version = in.get<std::uint16_t>();
  if (version != kSnapshotVersion)
    throw DataError(ErrorCode::BadHeader, "unsupported tree snapshot version " + std::to_string(version), -1, 4);
  CompressionConfig c;
  c.p = in.get<double>();
  c.dim = static_cast<Index>(in.get<std::uint32_t>());
  c.n_max = in.get<std::uint64_t>();
  c.eta = in.get<double>();
  c.delta = in.get<double>();
  c.capacity = in.get<std::uint64_t>();
  c.beta_c = in.get<double>();
  c.lewis.tol = in.get<double>();
  c.lewis.max_iter = static_cast<int>(in.get<std::uint32_t>());
  c.lewis.pinv_tol = in.get<double>();
  c.warm_start = in.get<std::uint8_t>() != 0;
  c.refresh_interval = in.get<std::uint64_t>();
  c.seed = in.get<std::uint64_t>();
  CompressionTree t(c);
  t.rows_seen_ = in.get<std::uint64_t>();
  t.compressions_ = in.get<std::uint64_t>();
  t.unconverged_ = in.get<std::uint64_t>();
  t.draws_ = in.get<std::uint64_t>();
  const auto levels = in.get<std::uint32_t>();
  if (levels != t.blocks_.size()) throw DataError(ErrorCode::BadHeader, "tree level count mismatch");
  for (Block& b : t.blocks_) {
    const auto rows = in.get<std::uint64_t>();
    b.data.resize(rows * static_cast<std::size_t>(c.dim));
    b.cache.resize(rows);
    for (double& v : b.data) v = in.get<double>();
    for (double& v : b.cache) v = in.get<double>();
  }
  t.k_valid_ = in.get<std::uint8_t>() != 0;
  t.since_refresh_ = in.get<std::uint64_t>();
  if (t.k_valid_) {
    t.k_inv_.resize(c.dim, c.dim);
    for (Index i = 0; i < t.k_inv_.size(); ++i) t.k_inv_.data()[i] = in.get<double>();
  }
  if (!in.done()) throw DataError(ErrorCode::BadHeader, "trailing bytes in tree snapshot");
  return t;
}

ExactOnlineWeigher::ExactOnlineWeigher(double p, Index dim, LewisOptions opt, bool warm_start)
    : p_(p), dim_(dim), opt_(opt), warm_start_(warm_start) {
  if (dim < 1) fail(ErrorCode::InvalidArgument, "weigher dimension must be positive");
}

double ExactOnlineWeigher::weigh_and_add(const VectorRef& row) {
  if (row.size() != dim_) fail(ErrorCode::DimensionMismatch, "weigher row length");
  for (Index j = 0; j < dim_; ++j) data_.push_back(row[j]);
  weights_.push_back(1.0);
  const Index n = static_cast<Index>(weights_.size());
  const Eigen::Map<const Matrix> a(data_.data(), n, dim_);
  const LewisWeights lw =
      lewis_weights(a, p_, opt_, warm_start_ ? std::span<const double>(weights_) : std::span<const double>());
  if (warm_start_) weights_ = lw.weights;
  return lw.last();
}

}  // namespace olar
