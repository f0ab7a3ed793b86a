#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "olar/compression.hpp"
#include "olar/error.hpp"
#include "test_util.hpp"

using namespace olar;
using namespace olar::testing;

namespace {

CompressionConfig never_compress(double p, Index d) {
  CompressionConfig c = CompressionConfig::defaults(p, d, 1000);
  c.capacity = std::numeric_limits<std::size_t>::max();
  c.refresh_interval = 0;
  c.warm_start = false;
  return c;
}

}  // namespace

TEST_CASE("first row has weight one") {
  for (double p : {1.0, 1.5, 2.0}) {
    CompressionTree tree(CompressionConfig::defaults(p, 3, 100));
    CHECK(tree.weigh_and_add(vec({0.3, -2.0, 1.0})) == doctest::Approx(1.0));
  }
}

TEST_CASE("without compression the tree is the prefix and weights are exact") {
  std::mt19937_64 gen(1);
  for (double p : {1.0, 1.5, 2.0}) {
    const Matrix a = gaussian_matrix(60, 3, gen);
    const CompressionConfig cfg = never_compress(p, 3);
    CompressionTree tree(cfg);
    for (Index t = 0; t < a.rows(); ++t) {
      const double w = tree.weigh_and_add(a.row(t).transpose());
      const double exact = lewis_weights(a.topRows(t + 1), p, cfg.lewis).last();
      CHECK(w == exact);
    }
    CHECK(tree.concatenated() == a);
    CHECK(tree.compressions() == 0);
  }
}

TEST_CASE("refresh path stays close to the exact online weights") {
  std::mt19937_64 gen(2);
  for (double p : {1.0, 1.5, 2.0}) {
    const Matrix a = gaussian_matrix(300, 4, gen);
    CompressionConfig cfg = never_compress(p, 4);
    cfg.refresh_interval = 16;
    CompressionTree tree(cfg);
    const OnlineLewisWeights exact = online_lewis_weights_exact(a, p);
    double worst = 0.0;
    for (Index t = 0; t < a.rows(); ++t) {
      const double w = tree.weigh_and_add(a.row(t).transpose());
      worst = std::max(worst, std::abs(w / exact.weights[static_cast<std::size_t>(t)] - 1.0));
    }
    CHECK(worst < 0.25);
  }
}

TEST_CASE("exact weigher reproduces the online oracle") {
  std::mt19937_64 gen(3);
  const Matrix a = gaussian_matrix(40, 3, gen);
  for (double p : {1.0, 1.5, 2.0}) {
    ExactOnlineWeigher w(p, 3);
    const OnlineLewisWeights exact = online_lewis_weights_exact(a, p);
    for (Index t = 0; t < a.rows(); ++t)
      CHECK(w.weigh_and_add(a.row(t).transpose()) ==
            doctest::Approx(exact.weights[static_cast<std::size_t>(t)]).epsilon(1e-5));
    CHECK(w.stored_rows() == 40);
  }
}

TEST_CASE("duplicate rows collapse") {
  CompressionConfig cfg = CompressionConfig::defaults(2.0, 2, 1 << 14);
  const std::size_t q = cfg.capacity;
  REQUIRE(q < (1u << 12));
  CompressionTree tree(cfg);
  const Vector e1 = vec({1.0, 0.0});
  int off = 0;
  for (std::size_t t = 1; t <= 4 * q; ++t) {
    const double w = tree.weigh_and_add(e1);
    off += w < 0.5 / static_cast<double>(t) || w > 1.5 / static_cast<double>(t);
    CHECK(tree.block_rows(0) <= q);
  }
  CHECK(off == 0);
  CHECK(tree.compressions() > 0);
  CHECK(tree.stored_rows() <= q + 4 * cfg.row_bound());
}

TEST_CASE("stored rows stay within the block bound and grow slowly") {
  std::vector<std::size_t> stored;
  for (std::size_t n : {1u << 10, 1u << 13}) {
    std::mt19937_64 gen(4);
    const CompressionConfig cfg = CompressionConfig::defaults(1.5, 4, n);
    CompressionTree tree(cfg);
    const std::size_t bound = cfg.capacity + tree.levels() * cfg.row_bound();
    std::size_t peak = 0;
    for (std::size_t t = 0; t < n; ++t) {
      tree.weigh_and_add(gaussian_vector(4, gen));
      peak = std::max(peak, tree.stored_rows());
    }
    CHECK(peak <= bound);
    stored.push_back(peak);
  }
  // 8x the rows; linear growth would be 8x the storage
  CHECK(static_cast<double>(stored[1]) <= 3.0 * static_cast<double>(stored[0]));
}

TEST_CASE("one compression round preserves the weights of the newer rows") {
  // C (100 rows) is compressed into B1, then 10 fresh rows land in B0
  const Index d = 4;
  for (double p : {1.0, 1.5, 2.0}) {
    for (double eta : {0.5, 0.5 / (2.0 * std::log(110.0))}) {
      int ok = 0;
      for (int trial = 0; trial < 40; ++trial) {
        std::mt19937_64 gen(static_cast<std::uint64_t>(100 + trial));
        const Matrix m = gaussian_matrix(110, d, gen);
        CompressionConfig cfg = CompressionConfig::defaults(p, d, 110, eta, 0.01, static_cast<std::uint64_t>(trial));
        cfg.capacity = 99;
        CompressionTree tree(cfg);
        for (Index i = 0; i < 110; ++i) tree.ingest(m.row(i).transpose());
        REQUIRE(tree.compressions() == 1);
        REQUIRE(tree.block_rows(0) == 10);
        const Matrix compressed = tree.concatenated();
        const LewisWeights before = lewis_weights(m, p);
        const LewisWeights after = lewis_weights(compressed, p);
        bool good = true;
        for (Index j = 0; j < 10; ++j) {
          const double r = after.weights[static_cast<std::size_t>(compressed.rows() - 10 + j)] /
                           before.weights[static_cast<std::size_t>(100 + j)];
          good = good && r >= 1.0 - eta && r <= 1.0 + eta;
        }
        ok += good;
      }
      CHECK(ok >= 38);
    }
  }
}

TEST_CASE("tree weights approximate the online oracle") {
  const Index d = 5;
  const std::size_t n = 512;
  for (double p : {1.0, 2.0}) {
    int ok = 0;
    for (int trial = 0; trial < 10; ++trial) {
      std::mt19937_64 gen(static_cast<std::uint64_t>(trial));
      const Matrix a = gaussian_matrix(static_cast<Index>(n), d, gen);
      CompressionTree tree(CompressionConfig::defaults(p, d, n, 0.5, 0.01, static_cast<std::uint64_t>(trial)));
      const OnlineLewisWeights exact = online_lewis_weights_exact(a, p);
      bool good = true;
      for (std::size_t t = 0; t < n; ++t) {
        const double r = tree.weigh_and_add(a.row(static_cast<Index>(t)).transpose()) / exact.weights[t];
        good = good && r >= 0.5 && r <= 1.5;
      }
      CHECK(tree.compressions() > 0);
      ok += good;
    }
    CHECK(ok >= 9);
  }
}

TEST_CASE("snapshot and restore continue identically") {
  std::mt19937_64 gen(5);
  const Matrix a = gaussian_matrix(700, 3, gen);
  CompressionTree tree(CompressionConfig::defaults(1.5, 3, 700, 0.5, 0.01, 9));
  for (Index t = 0; t < 400; ++t) tree.weigh_and_add(a.row(t).transpose());
  const std::vector<std::uint8_t> blob = tree.snapshot();
  CompressionTree copy = CompressionTree::restore(blob);
  CHECK(copy.snapshot() == blob);
  for (Index t = 400; t < 700; ++t)
    CHECK(copy.weigh_and_add(a.row(t).transpose()) == tree.weigh_and_add(a.row(t).transpose()));
  CHECK(copy.concatenated() == tree.concatenated());

  std::vector<std::uint8_t> bad = blob;
  bad[0] = 'X';
  CHECK_THROWS_AS(CompressionTree::restore(bad), Error);
  std::vector<std::uint8_t> cut(blob.begin(), blob.begin() + static_cast<std::ptrdiff_t>(blob.size() / 2));
  CHECK_THROWS_AS(CompressionTree::restore(cut), Error);
  std::vector<std::uint8_t> extra = blob;
  extra.push_back(0);
  CHECK_THROWS_AS(CompressionTree::restore(extra), Error);
}

TEST_CASE("bad configuration is rejected") {
  CHECK_THROWS_AS(CompressionConfig::defaults(1.5, 3, 100, 1.5), Error);
  CHECK_THROWS_AS(CompressionConfig::defaults(1.5, 0, 100), Error);
}
