#include <doctest.h>

#include <random>

#include "dbmc/splitting.hpp"
#include "support.hpp"

using namespace dbmc;
using testing::site;

TEST_CASE("the worked figure picks the heavier subtree") {
  // foo holds one uc member below it, bar holds three.
  CallTree tree{DynamicCallsite::root(), site("main/L1.foo"), site("main/L2.bar"), site("main/L1.foo/A.x"),
                site("main/L2.bar/B.y"), site("main/L2.bar/C.z")};
  std::set<DynamicCallsite> uc{DynamicCallsite::root(), site("main/L1.foo"), site("main/L1.foo/A.x"),
                               site("main/L2.bar"), site("main/L2.bar/B.y"), site("main/L2.bar/C.z"),
                               site("main/L2.bar/C.z/D.w")};
  CHECK(split_score(site("main/L1.foo"), uc) == 2);
  CHECK(split_score(site("main/L2.bar"), uc) == 4);
  CHECK(choose_split_proof_guided(tree, uc) == site("main/L2.bar"));
  CHECK(choose_split_proof_guided(tree, uc, {site("main/L2.bar")}) == site("main/L1.foo"));
}

TEST_CASE("main alone yields no candidate") {
  CallTree tree{DynamicCallsite::root(), site("main/L1.foo")};
  CHECK_FALSE(choose_split_proof_guided(tree, {DynamicCallsite::root()}).has_value());
  CHECK_FALSE(choose_split_proof_guided(tree, {}).has_value());
  // an open uc member outside the tree is not a candidate
  CHECK_FALSE(choose_split_proof_guided(tree, {site("main/L2.bar")}).has_value());
  std::mt19937_64 rng(1);
  CHECK_FALSE(choose_split_random({DynamicCallsite::root()}, rng).has_value());
  CHECK(choose_split_random(tree, rng) == site("main/L1.foo"));
  CHECK_FALSE(choose_split_random(tree, rng, {site("main/L1.foo")}).has_value());
}

TEST_CASE("ties go to the canonical order") {
  CallTree tree{DynamicCallsite::root(), site("main/A.f"), site("main/B.f")};
  std::set<DynamicCallsite> uc{site("main/B.f"), site("main/A.f")};
  CHECK(choose_split_proof_guided(tree, uc) == site("main/A.f"));
}

TEST_CASE("random choice is reproducible and uniform-ish") {
  CallTree tree{DynamicCallsite::root()};
  for (int i = 0; i < 5; ++i) tree.insert(site("main/L" + std::to_string(i) + ".g"));
  std::mt19937_64 a(42), b(42);
  std::map<DynamicCallsite, int> hits;
  for (int i = 0; i < 500; ++i) {
    auto x = choose_split_random(tree, a);
    CHECK(x == choose_split_random(tree, b));
    ++hits[*x];
  }
  CHECK(hits.size() == 5);
  for (const auto& [c, n] : hits) CHECK(n > 50);
}

TEST_CASE("split interval") {
  CHECK(compute_delta(4, 2, 0.5) == 1.0);
  CHECK(compute_delta(0, 0, 0.5, 20) == 10.0);
  CHECK(compute_delta(7, 0) == 10.0);
  CHECK(compute_delta(0, 3, 0.5) == kMinDelta);
  CHECK(compute_delta(1, 100, 0.5) == kMinDelta);
  for (std::size_t idle = 1; idle < 6; ++idle)
    for (std::size_t q = 0; q < 10; ++q) {
      CHECK(compute_delta(q, idle) <= compute_delta(q + 1, idle));
      CHECK(compute_delta(q, idle) >= compute_delta(q, idle + 1));
    }
}

TEST_CASE("split timer boundary is inclusive") {
  SplitPolicy p;
  p.delta = 0.5;
  CHECK_FALSE(p.time_to_split(0.4));
  CHECK(p.time_to_split(0.5));
  p.delta = 10.0;
  CHECK_FALSE(p.time_to_split(1.0));
  p.last_split_at = 3.0;
  p.delta = 0.5;
  CHECK_FALSE(p.time_to_split(3.4));
  CHECK(p.time_to_split(3.5));
}

TEST_CASE("strategy names") {
  CHECK(parse_strategy("proof-guided") == Strategy::ProofGuided);
  CHECK(parse_strategy("random") == Strategy::Random);
  CHECK(strategy_name(Strategy::Random) == "random");
  CHECK_THROWS_AS(parse_strategy("greedy"), std::invalid_argument);
}
