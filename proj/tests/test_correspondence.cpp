#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "vda/correspondence.h"

using namespace vda;

namespace {

FlowField constant_flow(int w, int h, float u, float v, int src = 0,
                        int dst = 1) {
  FlowField f(w, h);
  f.src = src;
  f.dst = dst;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.u.at(x, y) = u;
      f.v.at(x, y) = v;
    }
  }
  return f;
}

// Brute-force enumeration of the pair predicate: |i-j| = k, i mod k = 0,
// k a power of two.
std::set<std::pair<int, int>> brute_force_pairs(int n) {
  std::set<std::pair<int, int>> out;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int k = j - i;
      const bool pow2 = (k & (k - 1)) == 0;
      if (pow2 && i % k == 0) out.insert({i, j});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("pair set for 5 frames") {
  const auto pairs = build_pair_set(5);
  std::set<std::pair<int, int>> got;
  for (const FramePair& p : pairs) got.insert({p.i, p.j});
  const std::set<std::pair<int, int>> expect{{0, 1}, {1, 2}, {2, 3}, {3, 4},
                                             {0, 2}, {2, 4}, {0, 4}};
  CHECK(got == expect);
}

TEST_CASE("pair set edge cases") {
  const auto two = build_pair_set(2);
  REQUIRE(two.size() == 1);
  CHECK(two[0].i == 0);
  CHECK(two[0].j == 1);
  CHECK_THROWS_AS(build_pair_set(1), std::invalid_argument);

  const auto nine = build_pair_set(9);
  std::set<std::pair<int, int>> got;
  for (const FramePair& p : nine) got.insert({p.i, p.j});
  CHECK(got.count({0, 8}) == 1);
  for (const auto& [i, j] : got) CHECK(j - i != 3);
}

TEST_CASE("pair set matches brute-force enumeration up to 64 frames") {
  for (int n = 2; n <= 64; ++n) {
    const auto pairs = build_pair_set(n);
    std::set<std::pair<int, int>> got;
    for (const FramePair& p : pairs) {
      CHECK(p.i < p.j);
      got.insert({p.i, p.j});
    }
    CHECK(got.size() == pairs.size());  // no duplicates
    CHECK(got == brute_force_pairs(n));

    size_t expect_size = 0;
    for (int k = 1; k < n; k *= 2) expect_size += size_t((n - 1) / k);
    CHECK(pairs.size() == expect_size);
  }
}

TEST_CASE("fb mask: exactly inverse constant flows set interior pixels") {
  const int W = 16, H = 12;
  FlowField fwd = constant_flow(W, H, 1.f, 0.f);
  FlowField bwd = constant_flow(W, H, -1.f, 0.f, 1, 0);
  BinaryMask mask = fb_consistency_mask(fwd, bwd, 1.0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const bool interior = x + 1 <= W - 1;
      CHECK(mask.get(x, y) == interior);
    }
  }
}

TEST_CASE("fb mask: zero reverse flow fails the default threshold") {
  FlowField fwd = constant_flow(16, 12, 5.f, 0.f);
  FlowField bwd = constant_flow(16, 12, 0.f, 0.f, 1, 0);
  BinaryMask mask = fb_consistency_mask(fwd, bwd, 1.0);
  CHECK(mask.count_set() == 0);
}

TEST_CASE("fb mask symmetry for exact-inverse flows") {
  const int W = 20, H = 14;
  FlowField fwd = constant_flow(W, H, 2.f, 1.f);
  FlowField bwd = constant_flow(W, H, -2.f, -1.f, 1, 0);
  BinaryMask m_ij = fb_consistency_mask(fwd, bwd, 0.5);
  BinaryMask m_ji = fb_consistency_mask(bwd, fwd, 0.5);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (!m_ij.get(x, y)) continue;
      const int qx = x + 2, qy = y + 1;
      CHECK(m_ji.get(qx, qy));
    }
  }
}

TEST_CASE("chain flow: zero and constant hops") {
  const int W = 16, H = 12;
  FlowField zero = constant_flow(W, H, 0.f, 0.f);
  ChainedFlow chained = chain_flow({&zero, &zero}, {nullptr, nullptr});
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      CHECK(chained.flow.u.at(x, y) == 0.f);
      CHECK(chained.flow.v.at(x, y) == 0.f);
      CHECK(chained.valid.get(x, y));
    }
  }

  FlowField step = constant_flow(W, H, 1.f, 0.f);
  ChainedFlow two = chain_flow({&step, &step}, {nullptr, nullptr});
  CHECK(two.flow.u.at(3, 3) == doctest::Approx(2.f));
  CHECK(two.flow.v.at(3, 3) == doctest::Approx(0.f));
  // Pixels whose intermediate position leaves the raster are invalid.
  CHECK_FALSE(two.valid.get(W - 1, 3));
}

TEST_CASE("chain flow: hop mask gates validity") {
  const int W = 8, H = 8;
  FlowField step = constant_flow(W, H, 1.f, 0.f);
  BinaryMask ok(W, H, true);
  ok.set(4, 4, false);
  ChainedFlow chained = chain_flow({&step}, {&ok});
  CHECK_FALSE(chained.valid.get(4, 4));
  CHECK(chained.valid.get(3, 4));
}

TEST_CASE("chain flow rejects missing hops") {
  FlowField step = constant_flow(4, 4, 1.f, 0.f);
  CHECK_THROWS_AS(chain_flow({&step, nullptr}, {nullptr, nullptr}),
                  std::invalid_argument);
  CHECK_THROWS_AS(chain_flow({}, {}), std::invalid_argument);
}

TEST_CASE("chained validity never exceeds the AND of per-hop validity") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> uf(-1.5f, 1.5f);
  const int W = 24, H = 18;
  FlowField a(W, H), b(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      a.u.at(x, y) = uf(rng);
      a.v.at(x, y) = uf(rng);
      b.u.at(x, y) = uf(rng);
      b.v.at(x, y) = uf(rng);
    }
  }
  std::bernoulli_distribution coin(0.8);
  BinaryMask ma(W, H), mb(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      ma.set(x, y, coin(rng));
      mb.set(x, y, coin(rng));
    }
  }
  ChainedFlow chained = chain_flow({&a, &b}, {&ma, &mb});
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (chained.valid.get(x, y)) {
        CHECK(ma.get(x, y));  // first hop mask is sampled at the origin
      }
    }
  }
}

TEST_CASE("sample_matches: fully dynamic frame yields empty set") {
  const int W = 50, H = 50;
  FlowField flow = constant_flow(W, H, 0.5f, 0.f);
  BinaryMask m_flow(W, H, true);
  BinaryMask m_dyn(W, H, true);
  MatchStats stats;
  const auto matches = sample_matches(flow, m_flow, m_dyn, 10.0, 1, &stats);
  CHECK(matches.empty());
  CHECK(stats.accepted == 0);
  CHECK(stats.rejected_mask > 0);
}

TEST_CASE("sample_matches: density and exhaustive spacing on 100x100") {
  const int W = 100, H = 100;
  FlowField flow = constant_flow(W, H, 0.25f, -0.5f);
  BinaryMask m_flow(W, H, true);
  BinaryMask m_dyn(W, H, false);
  const auto matches = sample_matches(flow, m_flow, m_dyn, 10.0, 42);
  CHECK(matches.size() >= 60);
  CHECK(matches.size() <= 100);
  for (size_t a = 0; a < matches.size(); ++a) {
    for (size_t b = a + 1; b < matches.size(); ++b) {
      const double dx = matches[a].p.x - matches[b].p.x;
      const double dy = matches[a].p.y - matches[b].p.y;
      CHECK(dx * dx + dy * dy >= 100.0 - 1e-9);
    }
    CHECK(matches[a].q.x == doctest::Approx(matches[a].p.x + 0.25));
    CHECK(matches[a].q.y == doctest::Approx(matches[a].p.y - 0.5));
  }
}

TEST_CASE("sample_matches: deterministic for a fixed seed") {
  const int W = 64, H = 64;
  FlowField flow = constant_flow(W, H, 1.f, 1.f);
  BinaryMask m_flow(W, H, true);
  BinaryMask m_dyn(W, H, false);
  const auto a = sample_matches(flow, m_flow, m_dyn, 8.0, 7);
  const auto b = sample_matches(flow, m_flow, m_dyn, 8.0, 7);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].p.x == b[i].p.x);
    CHECK(a[i].p.y == b[i].p.y);
  }
  const auto c = sample_matches(flow, m_flow, m_dyn, 8.0, 8);
  bool identical = a.size() == c.size();
  if (identical) {
    for (size_t i = 0; i < a.size(); ++i) {
      identical = identical && a[i].p.x == c[i].p.x && a[i].p.y == c[i].p.y;
    }
  }
  CHECK_FALSE(identical);  // different seed, different sampling
}

TEST_CASE("sample_matches honors masks") {
  const int W = 60, H = 60;
  FlowField flow = constant_flow(W, H, 0.f, 0.f);
  BinaryMask m_flow(W, H, false);
  BinaryMask m_dyn(W, H, false);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W / 2; ++x) m_flow.set(x, y, true);
    for (int x = 10; x < 20; ++x) m_dyn.set(x, y, true);
  }
  const auto matches = sample_matches(flow, m_flow, m_dyn, 6.0, 3);
  CHECK(!matches.empty());
  for (const Match& m : matches) {
    const int x = int(m.p.x), y = int(m.p.y);
    CHECK(m_flow.get(x, y));
    CHECK_FALSE(m_dyn.get(x, y));
  }
}
