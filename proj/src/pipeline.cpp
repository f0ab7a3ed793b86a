#include "olar/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>

#include "olar/jl.hpp"
#include "olar/kernels.hpp"

namespace olar {
namespace {

double log_d(Index d) { return std::max(std::log(static_cast<double>(d)), 1.0); }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  return v[mid];
}

CounterRng run_rng(std::uint64_t seed, int run) {
  const CounterRng base(seed);
  return run == 0 ? base : base.derive(static_cast<std::uint64_t>(run));
}

std::unique_ptr<OnlineWeigher> make_weigher(const PipelineConfig& cfg, Index d, std::size_t n, std::uint64_t seed) {
  if (cfg.weight_mode == WeightMode::ExactOracle) return std::make_unique<ExactOnlineWeigher>(cfg.p, d, cfg.lewis);
  CompressionConfig tc = CompressionConfig::defaults(cfg.p, d, n, cfg.tree_eta, cfg.delta, seed, cfg.theta.tree_beta);
  tc.refresh_interval = cfg.tree_refresh;
  return std::make_unique<CompressionTree>(tc);
}

std::size_t tree_unconverged(const OnlineWeigher* w) {
  const auto* t = dynamic_cast<const CompressionTree*>(w);
  return t ? t->unconverged_solves() : 0;
}

/// Tracks whether the retained prefix has reached full column rank.
class PrefixRank {
 public:
  explicit PrefixRank(Index d) : gram_(Square::Zero(d, d)) {}
  void add(const VectorRef& a) {
    gram_.selfadjointView<Eigen::Lower>().rankUpdate(a);
    ++rows_;
    if (rows_ >= gram_.rows()) {
      Square g = gram_;
      g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
      Eigen::SelfAdjointEigenSolver<Square> es(g, Eigen::EigenvaluesOnly);
      const double top = es.eigenvalues().maxCoeff();
      full_ = top > 0.0 && es.eigenvalues().minCoeff() > 1e-10 * top;
    }
  }
  bool full() const { return full_; }

 private:
  Square gram_;
  Index rows_ = 0;
  bool full_ = false;
};

// ---------------------------------------------------------------- general p

class GeneralRunner {
 public:
  GeneralRunner(const PipelineConfig& cfg, const Betas& betas, Index d, std::size_t n, CounterRng rng)
      : cfg_(cfg), betas_(betas), rng_(rng) {
    w_a_ = make_weigher(cfg, d, n, rng.derive(0x7ee0).seed());
    w_a1_ = make_weigher(cfg, d, n, rng.derive(0x7ee1).seed());
    s_ = WeightedSketch(cfg.p, d, true);
    s1_ = WeightedSketch(cfg.p, d, false);
    s2_ = WeightedSketch(cfg.p, d, true);
    for (int k = 0; k < cfg.s3_copies; ++k) s3_.emplace_back(cfg.p, d, true);
  }

  // returns true when some label-carrying sketch changed
  bool step(const VectorRef& a, std::size_t t, RowLabel& label, bool init) {
    const double p = cfg_.p;
    const double w = w_a_->weigh_and_add(a);
    const double pt = init ? 1.0 : std::min(betas_.beta * w, 1.0);
    bool changed = sample_step(s_, a, t, pt, rng_, stream_id(StreamId::S), &label, LedgerStage::S).decision.sampled;
    samples_.s += changed ? 1 : 0;

    const double p1 = init ? 1.0 : std::min(betas_.beta1 * w, 1.0);
    const SampleStep st1 = sample_step(s1_, a, t, p1, rng_, stream_id(StreamId::S1), nullptr, LedgerStage::S1);
    if (!st1.decision.sampled) return changed;
    ++samples_.s1;
    const Vector scaled = a * std::pow(p1, -1.0 / p);
    const double w1 = w_a1_->weigh_and_add(scaled);
    const double p2 = init ? 1.0 : std::min(betas_.beta2 * w1, 1.0);
    const double p3 = init ? 1.0 : std::min(betas_.beta3 * w1, 1.0);
    if (sample_step(s2_, a, t, p2, rng_, stream_id(StreamId::S2), &label, LedgerStage::S2, p1).decision.sampled) {
      ++samples_.s2;
      changed = true;
    }
    for (std::size_t k = 0; k < s3_.size(); ++k) {
      if (sample_step(s3_[k], a, t, p3, rng_, stream_id(StreamId::S3, k), &label, LedgerStage::S3, p1)
              .decision.sampled) {
        ++samples_.s3;
        changed = true;
      }
    }
    return changed;
  }

  // x_c, x^_c, then one correction per S3 copy
  Vector solve(const std::optional<Vector>& warm) {
    const double p = cfg_.p;
    const auto a = s_.matrix();
    const Vector xc = olar::solve(a, s_.labels(), p, cfg_.solver, warm_xc(warm)).x;
    const auto a2 = s2_.matrix();
    const Vector z2 = s2_.labels() - a2 * xc;
    const std::optional<Vector> wh = warm && last_xh_.size() ? std::optional<Vector>(last_xh_) : std::nullopt;
    const Vector xh = olar::solve(a2, z2, p, cfg_.solver, wh).x;
    const Vector base = xc + xh;
    std::vector<Vector> cands;
    for (std::size_t k = 0; k < s3_.size(); ++k) {
      const auto a3 = s3_[k].matrix();
      const Vector z3 = s3_[k].labels() - a3 * base;
      const std::optional<Vector> w3 =
          warm && k < last_xbar_.size() ? std::optional<Vector>(last_xbar_[k]) : std::nullopt;
      cands.push_back(olar::solve(a3, z3, p, cfg_.solver, w3).x);
    }
    last_xc_ = xc;
    last_xh_ = xh;
    last_xbar_ = cands;
    return base + cands[pick_copy(base, cands)];
  }

  double sketch_objective_pow(const VectorRef& x) const {
    if (s_.rows() == 0) return 0.0;
    return lp_norm_pow(s_.matrix() * x - s_.labels(), cfg_.p);
  }

  std::size_t stored_rows() const {
    std::size_t r = s_.rows() + s1_.rows() + s2_.rows() + w_a_->stored_rows() + w_a1_->stored_rows();
    for (const auto& s : s3_) r += s.rows();
    return r;
  }
  const StageSamples& samples() const { return samples_; }
  std::size_t unconverged() const { return tree_unconverged(w_a_.get()) + tree_unconverged(w_a1_.get()); }
  std::vector<std::pair<std::string, WeightedSketch>> sketches() const {
    std::vector<std::pair<std::string, WeightedSketch>> out{{"S", s_}, {"S1", s1_}, {"S2", s2_}};
    for (std::size_t k = 0; k < s3_.size(); ++k) out.emplace_back(k ? "S3." + std::to_string(k) : "S3", s3_[k]);
    return out;
  }

 private:
  std::optional<Vector> warm_xc(const std::optional<Vector>& warm) const {
    return warm && last_xc_.size() ? std::optional<Vector>(last_xc_) : std::nullopt;
  }

  // Each copy's correction is scored by the median, over the other copies'
  // sketches, of ||S3 (A z - b)||_p^p. The top 10% of scores are discarded
  // and the median of the rest is taken.
  std::size_t pick_copy(const Vector& base, const std::vector<Vector>& cands) const {
    const std::size_t k = cands.size();
    if (k == 1) return 0;
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < k; ++i) {
      const Vector z = base + cands[i];
      std::vector<double> vals;
      for (std::size_t j = 0; j < k; ++j)
        if (j != i) vals.push_back(lp_norm_pow(s3_[j].matrix() * z - s3_[j].labels(), cfg_.p));
      scored.emplace_back(median(vals), i);
    }
    std::sort(scored.begin(), scored.end());
    const std::size_t keep = k - k / 10;
    return scored[(keep - 1) / 2].second;
  }

  const PipelineConfig& cfg_;
  Betas betas_;
  CounterRng rng_;
  std::unique_ptr<OnlineWeigher> w_a_, w_a1_;
  WeightedSketch s_, s1_, s2_;
  std::vector<WeightedSketch> s3_;
  StageSamples samples_;
  Vector last_xc_, last_xh_;
  std::vector<Vector> last_xbar_;
};

// -------------------------------------------------------------------- p = 2

struct P2Stage {
  WeightedSketch sk;
  Square k;
  Vector c;
  Square ginv;
  std::optional<SparseJL> jl;
  Matrix f, h;

  P2Stage(Index d, bool labels, bool fast, std::size_t n, double delta, std::uint64_t seed)
      : sk(2.0, d, labels), k(Square::Zero(d, d)), c(Vector::Zero(d)) {
    if (fast) {
      jl = SparseJL::constant_factor(n, delta, seed);
      f = Matrix::Zero(jl->rows(), d);
    }
  }

  // `row` is the stored (already rescaled) sketch row
  void absorb(const VectorRef& row, std::optional<double> y, bool ready) {
    k.selfadjointView<Eigen::Lower>().rankUpdate(row);
    if (y) c += *y * row;
    if (jl) jl_apply_append(f, *jl, sk.rows(), row);
    if (!ready) return;
    try {
      rank_one_inverse_update_inplace(ginv, row, 1.0);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NumericBreakdown) throw;
      rebuild();
    }
    if (jl) h = f * ginv;
  }

  Square gram() const {
    Square g = k;
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    return g;
  }

  void rebuild() {
    ginv = pseudo_inverse(gram()).matrix();
    if (jl) h = f * ginv;
  }

  // stage leverage of a against the state before this row: g = a^T G a
  double prior_g(const VectorRef& a) const { return jl ? jl_norm_estimate(h, a) : a.dot(ginv * a); }
};

class P2Runner {
 public:
  P2Runner(const PipelineConfig& cfg, const Betas& betas, Index d, std::size_t n, CounterRng rng)
      : cfg_(cfg), betas_(betas), rng_(rng), d_(d) {
    const bool fast = cfg.weight_mode == WeightMode::LeverageFast;
    s_ = std::make_unique<P2Stage>(d, true, fast, n, cfg.delta, rng.derive(0x51).seed());
    s1_ = std::make_unique<P2Stage>(d, false, fast, n, cfg.delta, rng.derive(0x52).seed());
    s2_ = std::make_unique<P2Stage>(d, true, fast, n, cfg.delta, rng.derive(0x53).seed());
    for (int k = 0; k < cfg.s3_copies; ++k)
      s3_.push_back(std::make_unique<P2Stage>(d, true, fast, n, cfg.delta, rng.derive(0x54 + 16 * k).seed()));
    if (cfg.weight_mode == WeightMode::CompressionTree) {
      PipelineConfig tcfg = cfg;
      w_a_ = make_weigher(tcfg, d, n, rng.derive(0x7ee0).seed());
      w_a1_ = make_weigher(tcfg, d, n, rng.derive(0x7ee1).seed());
    }
    full_k_ = Square::Zero(d, d);
  }

  void end_init() {
    for (P2Stage* st : stages()) {
      const Square g = st->gram();
      Eigen::SelfAdjointEigenSolver<Square> es(g, Eigen::EigenvaluesOnly);
      const double top = es.eigenvalues().maxCoeff();
      if (!(top > 0.0) || es.eigenvalues().minCoeff() <= 1e-10 * top)
        fail(ErrorCode::SingularPrefix, "first d rows are singular");
      st->ginv = g.llt().solve(Square::Identity(d_, d_));
      st->ginv = 0.5 * (st->ginv + st->ginv.transpose());
      if (st->jl) st->h = st->f * st->ginv;
    }
    Square g = full_k_;
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    full_ginv_ = g.llt().solve(Square::Identity(d_, d_));
    ready_ = true;
    refresh_solution(true, true, true);
  }

  bool step(const VectorRef& a, std::size_t t, RowLabel& label, bool init) {
    // weights read from state before row t is absorbed
    double w = 1.0;
    double w1 = 1.0;
    if (!init) {
      switch (cfg_.weight_mode) {
        case WeightMode::ExactOracle: {
          const double g = a.dot(full_ginv_ * a);
          w = w1 = g / (1.0 + g);
          break;
        }
        case WeightMode::LeverageFast:
          w = s_->prior_g(a);
          w1 = s1_->prior_g(a);
          break;
        case WeightMode::CompressionTree:
          w = w1 = w_a_->weigh_and_add(a);
          break;
      }
    } else if (w_a_) {
      w_a_->weigh_and_add(a);
    }
    if (cfg_.weight_mode == WeightMode::ExactOracle || init) {
      full_k_.selfadjointView<Eigen::Lower>().rankUpdate(a);
      if (ready_) rank_one_inverse_update_inplace(full_ginv_, a, 1.0);
    }

    bool ch_s = false, ch_2 = false, ch_3 = false;
    const double pt = init ? 1.0 : std::min(betas_.beta * w, 1.0);
    ch_s = take(*s_, a, t, pt, 1.0, StreamId::S, 0, &label, LedgerStage::S);
    samples_.s += ch_s;

    const double p1 = init ? 1.0 : std::min(betas_.beta1 * w1, 1.0);
    const double g1_prior = ready_ ? s1_->prior_g(a / std::sqrt(p1)) : 0.0;
    if (take(*s1_, a, t, p1, 1.0, StreamId::S1, 0, nullptr, LedgerStage::S1)) {
      ++samples_.s1;
      const Vector scaled = a / std::sqrt(p1);
      double wl = 1.0;
      if (w_a1_) {
        wl = w_a1_->weigh_and_add(scaled);
      } else if (ready_) {
        wl = g1_prior / (1.0 + g1_prior);
      }
      const double p2 = init ? 1.0 : std::min(betas_.beta2 * wl, 1.0);
      const double p3 = init ? 1.0 : std::min(betas_.beta3 * wl, 1.0);
      ch_2 = take(*s2_, a, t, p2, p1, StreamId::S2, 0, &label, LedgerStage::S2);
      samples_.s2 += ch_2;
      for (std::size_t k = 0; k < s3_.size(); ++k) {
        const bool got = take(*s3_[k], a, t, p3, p1, StreamId::S3, k, &label, LedgerStage::S3);
        samples_.s3 += got;
        ch_3 = ch_3 || got;
      }
    }
    if (ready_) refresh_solution(ch_s, ch_2, ch_3);
    return ch_s || ch_2 || ch_3;
  }

  const Vector& current() const { return x_; }

  Vector finish() {
    if (s3_.size() == 1) return x_;
    std::vector<Vector> cands;
    for (auto& st : s3_) cands.push_back(st->ginv * (st->c - st->gram() * (xc_ + xh_)));
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const Vector z = xc_ + xh_ + cands[i];
      std::vector<double> vals;
      for (std::size_t j = 0; j < cands.size(); ++j)
        if (j != i) vals.push_back((s3_[j]->sk.matrix() * z - s3_[j]->sk.labels()).squaredNorm());
      scored.emplace_back(median(vals), i);
    }
    std::sort(scored.begin(), scored.end());
    const std::size_t keep = cands.size() - cands.size() / 10;
    return xc_ + xh_ + cands[scored[(keep - 1) / 2].second];
  }

  double inverse_drift() const {
    double worst = 0.0;
    for (const P2Stage* st : const_cast<P2Runner*>(this)->stages()) {
      const Square direct = pseudo_inverse(st->gram()).matrix();
      worst = std::max(worst, relative_frobenius(st->ginv, direct));
    }
    return worst;
  }

  double sketch_objective_pow(const VectorRef& x) const {
    return (s_->sk.matrix() * x - s_->sk.labels()).squaredNorm();
  }
  std::size_t stored_rows() const {
    std::size_t r = 0;
    for (const P2Stage* st : const_cast<P2Runner*>(this)->stages()) r += st->sk.rows();
    if (w_a_) r += w_a_->stored_rows() + w_a1_->stored_rows();
    return r;
  }
  const StageSamples& samples() const { return samples_; }
  std::size_t unconverged() const { return tree_unconverged(w_a_.get()) + tree_unconverged(w_a1_.get()); }
  std::vector<std::pair<std::string, WeightedSketch>> sketches() const {
    std::vector<std::pair<std::string, WeightedSketch>> out{{"S", s_->sk}, {"S1", s1_->sk}, {"S2", s2_->sk}};
    for (std::size_t k = 0; k < s3_.size(); ++k) out.emplace_back(k ? "S3." + std::to_string(k) : "S3", s3_[k]->sk);
    return out;
  }

 private:
  std::vector<P2Stage*> stages() {
    std::vector<P2Stage*> v{s_.get(), s1_.get(), s2_.get()};
    for (auto& s : s3_) v.push_back(s.get());
    return v;
  }

  bool take(P2Stage& st, const VectorRef& a, std::size_t t, double prob, double p_outer, StreamId sid,
            std::size_t copy, RowLabel* label, LedgerStage ls) {
    const SampleStep step = sample_step(st.sk, a, t, prob, rng_, stream_id(sid, copy), label, ls, p_outer);
    if (!step.decision.sampled) return false;
    const Index last = st.sk.rows() - 1;
    std::optional<double> y;
    if (st.sk.tracks_labels()) y = st.sk.labels()[last];
    st.absorb(st.sk.row(last), y, ready_);
    return true;
  }

  // x_c = G c, x^_c = G2 (c2 - K2 x_c), x' = G3 (c3 - K3 (x_c + x^_c)); a
  // stage is re-solved when it or anything upstream changed
  void refresh_solution(bool ch_s, bool ch_2, bool ch_3) {
    if (ch_s) xc_ = s_->ginv * s_->c;
    if (ch_s || ch_2) xh_ = s2_->ginv * (s2_->c - s2_->gram() * xc_);
    if (ch_s || ch_2 || ch_3) {
      P2Stage& st = *s3_[0];
      xbar_ = st.ginv * (st.c - st.gram() * (xc_ + xh_));
    }
    x_ = xc_ + xh_ + xbar_;
  }

  const PipelineConfig& cfg_;
  Betas betas_;
  CounterRng rng_;
  Index d_;
  std::unique_ptr<P2Stage> s_, s1_, s2_;
  std::vector<std::unique_ptr<P2Stage>> s3_;
  std::unique_ptr<OnlineWeigher> w_a_, w_a1_;
  Square full_k_, full_ginv_;
  bool ready_ = false;
  Vector xc_, xh_, xbar_, x_;
  StageSamples samples_;
};

// -------------------------------------------------------------------- p = 1

class P1Runner {
 public:
  P1Runner(const PipelineConfig& cfg, const Betas& betas, Index d, std::size_t n, CounterRng rng)
      : cfg_(cfg), betas_(betas), rng_(rng), s_(cfg.p, d, true) {
    w_ = make_weigher(cfg, d, n, rng.derive(0x7ee0).seed());
  }

  bool step(const VectorRef& a, std::size_t t, RowLabel& label, bool init) {
    const double w = w_->weigh_and_add(a);
    const double pt = init ? 1.0 : std::min(betas_.beta * w, 1.0);
    const bool got = sample_step(s_, a, t, pt, rng_, stream_id(StreamId::S), &label, LedgerStage::S).decision.sampled;
    samples_.s += got;
    return got;
  }

  Vector solve(const std::optional<Vector>& warm) {
    last_ = olar::solve(s_.matrix(), s_.labels(), cfg_.p, cfg_.solver,
                        warm && last_.size() ? std::optional<Vector>(last_) : std::nullopt)
                .x;
    return last_;
  }

  double sketch_objective_pow(const VectorRef& x) const {
    return s_.rows() ? lp_norm_pow(s_.matrix() * x - s_.labels(), cfg_.p) : 0.0;
  }
  std::size_t stored_rows() const { return s_.rows() + w_->stored_rows(); }
  const StageSamples& samples() const { return samples_; }
  std::size_t unconverged() const { return tree_unconverged(w_.get()); }
  std::vector<std::pair<std::string, WeightedSketch>> sketches() const { return {{"S", s_}}; }

 private:
  const PipelineConfig& cfg_;
  Betas betas_;
  CounterRng rng_;
  WeightedSketch s_;
  std::unique_ptr<OnlineWeigher> w_;
  StageSamples samples_;
  Vector last_;
};

// ------------------------------------------------------------------- driver

enum class Kind { General, P2, P1 };

template <class Runner>
PipelineResult drive(RowStream& stream, LabelOracle& oracle, const PipelineConfig& cfg, Kind kind) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Index d = stream.dim();
  const std::size_t n = cfg.n_declared ? cfg.n_declared : stream.size();
  PipelineResult res;
  res.betas = cfg.betas(d);

  std::vector<std::unique_ptr<Runner>> runs;
  for (int r = 0; r < cfg.boost_runs; ++r)
    runs.push_back(std::make_unique<Runner>(cfg, res.betas, d, n, run_rng(cfg.seed, r)));

  const bool steps = cfg.record_steps;
  const bool resolve_each = kind == Kind::General && cfg.intermediate;
  PrefixRank rank(d);
  bool init = true;
  Vector row(d);
  Vector last_x = Vector::Zero(d);
  std::vector<std::size_t> checkpoints;
  if constexpr (std::is_same_v<Runner, P2Runner>) {
    for (int c = 1; c <= 20; ++c) checkpoints.push_back(std::max<std::size_t>(1, stream.size() * c / 20));
  }
  stream.rewind();
  std::size_t t = 0;
  while (stream.next(row)) {
    if (!row.allFinite()) fail(ErrorCode::NonFinite, "stream row " + std::to_string(t));
    RowLabel label(oracle, res.ledger, t);
    if (init) rank.add(row);
    bool changed = false;
    for (auto& r : runs) changed = r->step(row, t, label, init) || changed;
    if (init) {
      ++res.init_rows;
      const bool done = kind == Kind::P2 ? res.init_rows == static_cast<std::size_t>(d) : rank.full();
      if (done) {
        init = false;
        if constexpr (std::is_same_v<Runner, P2Runner>) {
          for (auto& r : runs) r->end_init();
        }
      }
    }
    std::size_t stored = 0;
    for (auto& r : runs) stored += r->stored_rows();
    res.peak_stored_rows = std::max(res.peak_stored_rows, stored);
    ++t;
    if constexpr (std::is_same_v<Runner, P2Runner>) {
      if (!init && std::find(checkpoints.begin(), checkpoints.end(), t) != checkpoints.end())
        res.inverse_drift = std::max(res.inverse_drift, runs[0]->inverse_drift());
      if (steps) res.steps.push_back(init ? Vector::Zero(d) : runs[0]->current());
    } else {
      if (resolve_each && changed && !init) last_x = runs[0]->solve(std::optional<Vector>(last_x));
      if (steps) res.steps.push_back(last_x);
    }
  }
  res.rows = t;
  if (init) {
    if (kind == Kind::P2) fail(ErrorCode::SingularPrefix, "stream ended before d rows arrived");
    fail(ErrorCode::RankDeficientPrefix, "stream never reached rank d");
  }

  std::vector<Vector> cands;
  for (auto& r : runs) {
    if constexpr (std::is_same_v<Runner, P2Runner>) {
      cands.push_back(r->finish());
    } else {
      cands.push_back(r->solve(std::nullopt));
    }
  }
  std::size_t chosen = 0;
  if (cands.size() > 1) {
    // each candidate is scored by the median of the other runs' stage-S
    // sketch objectives
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      std::vector<double> vals;
      for (std::size_t j = 0; j < cands.size(); ++j)
        if (j != i) vals.push_back(runs[j]->sketch_objective_pow(cands[i]));
      const double m = median(vals);
      if (m < best) {
        best = m;
        chosen = i;
      }
    }
  }
  res.chosen_run = static_cast<int>(chosen);
  res.x = cands[chosen];
  if (steps && kind == Kind::General && !res.steps.empty()) res.steps.back() = res.x;
  for (auto& r : runs) {
    const StageSamples& s = r->samples();
    res.samples.s += s.s;
    res.samples.s1 += s.s1;
    res.samples.s2 += s.s2;
    res.samples.s3 += s.s3;
    res.weight_solves_unconverged += r->unconverged();
  }
  res.sketches = runs[chosen]->sketches();
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// ------------------------------------------------------------- budget mode

Vector finish_budget(const WeightedSketch& sk, double p, Index d) {
  if (sk.rows() == 0) return Vector::Zero(d);
  return solve(sk.matrix(), sk.labels(), p).x;
}

}  // namespace

const char* to_string(WeightMode m) {
  switch (m) {
    case WeightMode::ExactOracle:
      return "exact-oracle";
    case WeightMode::CompressionTree:
      return "compression-tree";
    case WeightMode::LeverageFast:
      return "leverage-fast";
  }
  return "?";
}

WeightMode parse_weight_mode(const std::string& s) {
  if (s == "exact-oracle" || s == "exact") return WeightMode::ExactOracle;
  if (s == "compression-tree" || s == "tree") return WeightMode::CompressionTree;
  if (s == "leverage-fast" || s == "fast") return WeightMode::LeverageFast;
  fail(ErrorCode::InvalidArgument, "unknown weight mode '" + s + "'");
}

void PipelineConfig::validate() const {
  if (!(p >= 1.0 && p <= 2.0)) fail(ErrorCode::InvalidArgument, "p must lie in [1,2]");
  if (!(epsilon > 0.0 && epsilon < 1.0)) fail(ErrorCode::InvalidArgument, "epsilon must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) fail(ErrorCode::InvalidArgument, "delta must lie in (0,1)");
  if (weight_mode == WeightMode::LeverageFast && p != 2.0)
    fail(ErrorCode::InvalidArgument, "leverage-fast weights exist only for p = 2");
  if (boost_runs < 1) fail(ErrorCode::InvalidArgument, "boost_runs must be >= 1");
  if (s3_copies < 1) fail(ErrorCode::InvalidArgument, "s3_copies must be >= 1");
  for (const auto& b : {beta, beta1, beta2, beta3})
    if (b && !(*b > 0.0)) fail(ErrorCode::InvalidArgument, "oversampling parameters must be positive");
  if (!(tree_eta > 0.0 && tree_eta < 1.0)) fail(ErrorCode::InvalidArgument, "tree_eta must lie in (0,1)");
}

Betas PipelineConfig::betas(Index d) const {
  const double ld = log_d(d);
  const double e = epsilon;
  Betas b;
  if (p == 1.0) {
    b.beta = theta.beta_p1 * ld * std::log(static_cast<double>(d) / (e * delta)) / (e * e);
  } else {
    b.beta = std::max(theta.beta_floor, theta.beta * ld);
    b.beta2 = b.beta;
    b.beta1 = theta.beta1 * static_cast<double>(d) * std::log(1.0 / (e * delta)) / std::pow(e, 2.0 + p);
    b.beta3 = theta.beta3 * ld * ld * std::max(std::log(static_cast<double>(d) / e), 1.0) * std::log(1.0 / delta) /
              (e * e);
  }
  if (beta) b.beta = *beta;
  if (beta1) b.beta1 = *beta1;
  if (beta2) b.beta2 = *beta2;
  if (beta3) b.beta3 = *beta3;
  return b;
}

PipelineResult run_general_p(RowStream& stream, LabelOracle& oracle, const PipelineConfig& cfg) {
  return drive<GeneralRunner>(stream, oracle, cfg, Kind::General);
}

PipelineResult run_general_p_intermediate(RowStream& stream, LabelOracle& oracle, PipelineConfig cfg) {
  cfg.intermediate = true;
  cfg.record_steps = true;
  return drive<GeneralRunner>(stream, oracle, cfg, Kind::General);
}

PipelineResult run_p2(RowStream& stream, LabelOracle& oracle, const PipelineConfig& cfg) {
  if (cfg.p != 2.0) fail(ErrorCode::InvalidArgument, "run_p2 needs p = 2");
  return drive<P2Runner>(stream, oracle, cfg, Kind::P2);
}

PipelineResult run_p1(RowStream& stream, LabelOracle& oracle, const PipelineConfig& cfg) {
  if (cfg.p != 1.0) fail(ErrorCode::InvalidArgument, "run_p1 needs p = 1");
  return drive<P1Runner>(stream, oracle, cfg, Kind::P1);
}

PipelineResult run_pipeline(RowStream& stream, LabelOracle& oracle, const PipelineConfig& cfg) {
  if (cfg.p == 2.0) return run_p2(stream, oracle, cfg);
  if (cfg.p == 1.0) return run_p1(stream, oracle, cfg);
  return run_general_p(stream, oracle, cfg);
}

std::vector<double> stream_online_weights(RowStream& stream, double p, std::uint64_t seed, bool exact,
                                          double tree_eta) {
  const Index d = stream.dim();
  const std::size_t n = stream.size();
  std::vector<double> out;
  out.reserve(n);
  Vector row(d);
  stream.rewind();
  if (p == 2.0) {
    // exact online leverage: pinv path until the prefix has full rank, then
    // Sherman-Morrison on the running inverse
    ExactOnlineWeigher early(2.0, d);
    PrefixRank rank(d);
    Square k = Square::Zero(d, d);
    Square ginv;
    bool ready = false;
    while (stream.next(row)) {
      if (!ready) {
        out.push_back(early.weigh_and_add(row));
        k.selfadjointView<Eigen::Lower>().rankUpdate(row);
        rank.add(row);
        if (rank.full()) {
          k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
          ginv = k.llt().solve(Square::Identity(d, d));
          ready = true;
        }
      } else {
        const double g = row.dot(ginv * row);
        out.push_back(g / (1.0 + g));
        rank_one_inverse_update_inplace(ginv, row, 1.0);
      }
    }
  } else {
    std::unique_ptr<OnlineWeigher> w;
    if (exact) {
      w = std::make_unique<ExactOnlineWeigher>(p, d);
    } else {
      w = std::make_unique<CompressionTree>(CompressionConfig::defaults(p, d, n, tree_eta, 0.01, seed));
    }
    while (stream.next(row)) out.push_back(w->weigh_and_add(row));
  }
  stream.rewind();
  return out;
}

BudgetResult uniform_baseline(RowStream& stream, LabelOracle& oracle, std::size_t budget, double p,
                              std::uint64_t seed) {
  const Index d = stream.dim();
  const std::size_t n = stream.size();
  if (budget > n) fail(ErrorCode::InvalidArgument, "budget exceeds stream length");
  BudgetResult res;
  res.ledger = QueryLedger(budget);
  const CounterRng rng(seed);
  std::vector<double> rows;
  std::vector<double> labels;
  Vector row(d);
  stream.rewind();
  for (std::size_t t = 0; stream.next(row); ++t) {
    const double prob =
        t < static_cast<std::size_t>(d) ? 1.0 : std::min(1.0, static_cast<double>(res.ledger.remaining()) / static_cast<double>(n - t));
    if (!decide(rng, stream_id(StreamId::Uniform), t, prob, p).sampled) continue;
    if (res.ledger.exhausted()) {
      ++res.forced_skips;
      continue;
    }
    RowLabel label(oracle, res.ledger, t);
    labels.push_back(label.get(LedgerStage::S));
    rows.insert(rows.end(), row.data(), row.data() + d);
  }
  stream.rewind();
  res.queries = res.ledger.total();
  const Eigen::Map<const Matrix> a(rows.data(), static_cast<Index>(labels.size()), d);
  const Eigen::Map<const Vector> b(labels.data(), static_cast<Index>(labels.size()));
  res.x = labels.empty() ? Vector::Zero(d) : solve(a, b, p).x;
  return res;
}

BudgetResult budgeted_active(RowStream& stream, LabelOracle& oracle, std::size_t budget, double p,
                             std::uint64_t seed, const std::vector<double>& weights) {
  const Index d = stream.dim();
  const std::size_t n = stream.size();
  if (budget > n) fail(ErrorCode::InvalidArgument, "budget exceeds stream length");
  if (budget <= static_cast<std::size_t>(d)) fail(ErrorCode::InvalidArgument, "budget must exceed d");
  if (weights.size() != n) fail(ErrorCode::DimensionMismatch, "one weight per row");
  BudgetResult res;
  res.ledger = QueryLedger(budget);
  const CounterRng rng(seed);
  WeightedSketch sk(p, d, true);
  Vector row(d);
  double wsum = 0.0;
  stream.rewind();
  for (std::size_t t = 0; stream.next(row); ++t) {
    const double w = weights[t];
    wsum += w;
    double prob = 1.0;
    if (t >= static_cast<std::size_t>(d)) {
      const double mass = wsum / static_cast<double>(t + 1) * static_cast<double>(n - t);
      prob = mass > 0.0 ? std::min(1.0, static_cast<double>(res.ledger.remaining()) * w / mass) : 0.0;
    }
    const SamplingDecision dec = decide(rng, stream_id(StreamId::Budget), t, prob, p);
    if (!dec.sampled) continue;
    if (res.ledger.exhausted()) {
      ++res.forced_skips;
      continue;
    }
    RowLabel label(oracle, res.ledger, t);
    sk.append(row, dec, label.get(LedgerStage::S));
  }
  stream.rewind();
  res.queries = res.ledger.total();
  res.x = finish_budget(sk, p, d);
  return res;
}

BudgetResult budgeted_active(RowStream& stream, LabelOracle& oracle, std::size_t budget, double p,
                             std::uint64_t seed) {
  const std::vector<double> w = stream_online_weights(stream, p, seed);
  return budgeted_active(stream, oracle, budget, p, seed, w);
}

BudgetResult offline_lewis_reference(RowStream& stream, LabelOracle& oracle, std::size_t budget, double p,
                                     std::uint64_t seed) {
  const Index d = stream.dim();
  const std::size_t n = stream.size();
  if (budget > n) fail(ErrorCode::InvalidArgument, "budget exceeds stream length");
  Matrix a(static_cast<Index>(n), d);
  Vector row(d);
  stream.rewind();
  for (Index i = 0; stream.next(row); ++i) a.row(i) = row.transpose();
  stream.rewind();
  const LewisWeights lw = p == 2.0 ? leverage_scores(a) : lewis_weights(a, p);
  auto total = [&](double c) {
    double s = 0.0;
    for (double w : lw.weights) s += std::min(1.0, c * w);
    return s;
  };
  double lo = 0.0, hi = 1.0;
  while (total(hi) < static_cast<double>(budget) && hi < 1e18) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) < static_cast<double>(budget) ? lo : hi) = mid;
  }
  BudgetResult res;
  res.ledger = QueryLedger(budget);
  const CounterRng rng(seed);
  WeightedSketch sk(p, d, true);
  for (Index i = 0; i < a.rows(); ++i) {
    const double prob = std::min(1.0, lo * lw.weights[static_cast<std::size_t>(i)]);
    const SamplingDecision dec = decide(rng, stream_id(StreamId::Offline), static_cast<std::size_t>(i), prob, p);
    if (!dec.sampled) continue;
    if (res.ledger.exhausted()) {
      ++res.forced_skips;
      continue;
    }
    RowLabel label(oracle, res.ledger, static_cast<std::size_t>(i));
    sk.append(a.row(i).transpose(), dec, label.get(LedgerStage::S));
  }
  res.queries = res.ledger.total();
  res.x = finish_budget(sk, p, d);
  return res;
}

}  // namespace olar
