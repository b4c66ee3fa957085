#include <doctest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "riskcal/errors.hpp"
#include "riskcal/model_space.hpp"
#include "riskcal/numeric.hpp"

using namespace riskcal;

namespace {

// Every label assignment in [1, p]^p, canonicalized and deduplicated.
std::set<Partition> brute_force_partitions(int p) {
  std::set<Partition> out;
  std::vector<int> labels(p, 1);
  while (true) {
    out.insert(canonicalize(labels));
    int i = p - 1;
    while (i >= 0 && labels[i] == p) labels[i--] = 1;
    if (i < 0) break;
    ++labels[i];
  }
  return out;
}

// Bell triangle recurrence.
std::vector<long long> bell_triangle(int n) {
  std::vector<long long> bell{1};
  std::vector<long long> row{1};
  for (int i = 1; i <= n; ++i) {
    std::vector<long long> next{row.back()};
    for (long long v : row) next.push_back(next.back() + v);
    bell.push_back(next.front());
    row = next;
  }
  return bell;
}

// Refinement by brute force: every block of `fine` inside one block of `coarse`.
bool refines(const Partition& fine, const Partition& coarse) {
  for (int i = 0; i < fine.p(); ++i) {
    for (int j = 0; j < fine.p(); ++j) {
      if (fine.together(i, j) && !coarse.together(i, j)) return false;
    }
  }
  return true;
}

template <class M>
std::vector<M> all_models(int p);
template <>
std::vector<GammaVector> all_models<GammaVector>(int p) {
  return all_gammas(p);
}
template <>
std::vector<Partition> all_models<Partition>(int p) {
  return all_partitions(p);
}

template <class M>
void check_strict_partial_order(int p) {
  const auto ms = all_models<M>(p);
  for (const auto& a : ms) {
    CHECK(compare(a, a) == OrderRelation::equal);
    for (const auto& b : ms) {
      const auto ab = compare(a, b);
      const auto ba = compare(b, a);
      if (ab == OrderRelation::simpler) CHECK(ba == OrderRelation::more_complex);
      if (ab == OrderRelation::incomparable) CHECK(ba == OrderRelation::incomparable);
      if (ab != OrderRelation::simpler) continue;
      for (const auto& c : ms) {
        if (compare(b, c) == OrderRelation::simpler) CHECK(compare(a, c) == OrderRelation::simpler);
      }
    }
  }
}

template <class M>
void check_covers_are_covering_pairs(int p) {
  const auto ms = all_models<M>(p);
  for (const auto& m : ms) {
    const auto cs = covers(m);
    std::size_t expected = 0;
    for (const auto& c : ms) {
      if (compare(m, c) != OrderRelation::simpler) continue;
      bool between = false;
      for (const auto& x : ms) {
        if (compare(m, x) == OrderRelation::simpler && compare(x, c) == OrderRelation::simpler) {
          between = true;
          break;
        }
      }
      if (!between) {
        ++expected;
        CHECK(std::find(cs.begin(), cs.end(), c) != cs.end());
      }
    }
    CHECK(cs.size() == expected);
  }
}

}  // namespace

TEST_SUITE("model_space") {
  TEST_CASE("gamma enumeration is lexicographic with 2^p elements") {
    const auto one = all_gammas(1);
    REQUIRE(one.size() == 2);
    CHECK(one[0].to_string() == "0");
    CHECK(one[1].to_string() == "1");
    CHECK(all_gammas(3).size() == 8);
    std::uint64_t count = 0;
    for (const auto& g : enumerate_gamma(14)) {
      CHECK(g.lex_index() == count);
      ++count;
    }
    CHECK(count == 16384);
    const auto three = all_gammas(3);
    for (std::size_t i = 1; i < three.size(); ++i) CHECK(lex_less(three[i - 1], three[i]));
    CHECK(three[1].to_string() == "001");
  }

  TEST_CASE("enumeration guards raise capacity errors") {
    CHECK_THROWS_AS(enumerate_gamma(0), CapacityError);
    CHECK_THROWS_AS(enumerate_gamma(25), CapacityError);
    CHECK_THROWS_AS(enumerate_partitions(13), CapacityError);
    CHECK_THROWS_AS(enumerate_partitions(0), CapacityError);
  }

  TEST_CASE("partition counts match brute force and the Bell triangle") {
    const auto bell = bell_triangle(8);
    for (int p = 1; p <= 6; ++p) {
      const auto brute = brute_force_partitions(p);
      const auto listed = all_partitions(p);
      CHECK(listed.size() == brute.size());
      CHECK(std::set<Partition>(listed.begin(), listed.end()) == brute);
    }
    CHECK(all_partitions(3).size() == 5);
    CHECK(all_partitions(4).size() == 15);
    for (int p = 1; p <= 8; ++p) CHECK(static_cast<long long>(all_partitions(p).size()) == bell[p]);
    CHECK(all_partitions(8).size() == 4140);
    const auto bn = bell_numbers(8);
    for (int p = 0; p <= 8; ++p) CHECK(bn[p] == doctest::Approx(static_cast<double>(bell[p])));
  }

  TEST_CASE("partition enumeration is lexicographic and canonical") {
    const auto ps = all_partitions(5);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      CHECK(canonicalize(ps[i].labels()) == ps[i]);
      if (i > 0) CHECK(ps[i - 1] < ps[i]);
    }
    CHECK(ps.front() == Partition::one_block(5));
    CHECK(ps.back() == Partition::singletons(5));
  }

  TEST_CASE("canonicalize relabels by first appearance") {
    CHECK(canonicalize({2, 2, 1, 3}).to_string() == "1,1,2,3");
    CHECK(canonicalize({1, 1, 1}).to_string() == "1,1,1");
    CHECK(canonicalize({5, 9, 5, 9}).to_string() == "1,2,1,2");
    CHECK_THROWS_AS(canonicalize(std::vector<int>{}), ArgumentError);
    CHECK_THROWS_AS(canonicalize({1, 0, 2}), ArgumentError);
  }

  TEST_CASE("canonicalize is idempotent and permutation invariant") {
    const std::vector<int> perm{4, 1, 3, 2};
    for (const auto& z : all_partitions(5)) {
      CHECK(canonicalize(z.labels()) == z);
      std::vector<int> relabeled;
      for (int l : z.labels()) relabeled.push_back(perm[(l - 1) % 4] + 10 * ((l - 1) / 4));
      CHECK(canonicalize(relabeled) == z);
    }
  }

  TEST_CASE("partition accessors") {
    const auto z = Partition::parse("1,1,2,3,2");
    CHECK(z.k() == 3);
    CHECK(z.sizes() == std::vector<int>{2, 2, 1});
    CHECK(z.size_profile() == std::vector<int>{2, 2, 1});
    CHECK(z.blocks() == std::vector<std::vector<int>>{{0, 1}, {2, 4}, {3}});
    CHECK(Partition::parse("3,3,1").to_string() == "1,1,2");
  }

  TEST_CASE("gamma text form round-trips") {
    const auto g = GammaVector::parse("0101");
    CHECK(g.p() == 4);
    CHECK(g.size() == 2);
    CHECK(!g[0]);
    CHECK(g[1]);
    CHECK(g.to_string() == "0101");
    CHECK(GammaVector::from_lex_index(4, g.lex_index()) == g);
    CHECK_THROWS_AS(GammaVector::parse("012"), ArgumentError);
  }

  TEST_CASE("compare examples") {
    CHECK(compare(Partition::parse("1,1,2,2"), Partition::parse("1,2,3,3")) == OrderRelation::simpler);
    CHECK(compare(Partition::parse("1,2,3,3"), Partition::parse("1,1,2,2")) == OrderRelation::more_complex);
    CHECK(compare(GammaVector::parse("010"), GammaVector::parse("101")) == OrderRelation::incomparable);
    CHECK(compare(GammaVector::parse("00"), GammaVector::parse("11")) == OrderRelation::simpler);
    CHECK(compare(Partition::parse("1,1,2"), Partition::parse("1,2,2")) == OrderRelation::incomparable);
    CHECK_THROWS_AS(compare(GammaVector::parse("00"), GammaVector::parse("000")), ArgumentError);
    CHECK_THROWS_AS(compare(Partition::parse("1,1"), Partition::parse("1,1,1")), ArgumentError);
  }

  TEST_CASE("partition compare agrees with brute-force refinement") {
    const auto ms = all_partitions(5);
    for (const auto& a : ms) {
      for (const auto& b : ms) {
        const bool simpler = a != b && refines(b, a);
        CHECK((compare(a, b) == OrderRelation::simpler) == simpler);
      }
    }
  }

  TEST_CASE("compare is a strict partial order") {
    for (int p = 1; p <= 5; ++p) {
      check_strict_partial_order<GammaVector>(p);
      check_strict_partial_order<Partition>(p);
    }
  }

  TEST_CASE("covers examples") {
    const auto c = covers(GammaVector::parse("00"));
    REQUIRE(c.size() == 2);
    CHECK(std::find(c.begin(), c.end(), GammaVector::parse("10")) != c.end());
    CHECK(std::find(c.begin(), c.end(), GammaVector::parse("01")) != c.end());
    const auto s = covers(Partition::one_block(3));
    CHECK(s.size() == 3);
    for (const auto& z : s) CHECK(z.k() == 2);
    CHECK(covers(Partition::singletons(4)).empty());
    CHECK(covers(GammaVector::parse("111")).empty());
  }

  TEST_CASE("covers are exactly the covering pairs") {
    for (int p = 1; p <= 5; ++p) {
      check_covers_are_covering_pairs<GammaVector>(p);
      check_covers_are_covering_pairs<Partition>(p);
    }
  }

  TEST_CASE("refinement chains are maximal covering chains") {
    for (auto strategy : {ChainStrategy::balanced_split, ChainStrategy::singleton_peel, ChainStrategy::random}) {
      const auto two = refinement_chain(2, strategy, 5);
      REQUIRE(two.size() == 2);
      CHECK(two[0] == Partition::one_block(2));
      CHECK(two[1] == Partition::singletons(2));
      for (int p : {3, 5, 8}) {
        const auto chain = refinement_chain(p, strategy, 17);
        REQUIRE(static_cast<int>(chain.size()) == p);
        CHECK(chain.front() == Partition::one_block(p));
        CHECK(chain.back() == Partition::singletons(p));
        for (std::size_t i = 1; i < chain.size(); ++i) {
          CHECK(compare(chain[i - 1], chain[i]) == OrderRelation::simpler);
          const auto cs = covers(chain[i - 1]);
          CHECK(std::find(cs.begin(), cs.end(), chain[i]) != cs.end());
        }
      }
    }
    const auto peel = refinement_chain(4, ChainStrategy::singleton_peel);
    CHECK(peel[0].size_profile() == std::vector<int>{4});
    CHECK(peel[1].size_profile() == std::vector<int>{3, 1});
    CHECK(peel[2].size_profile() == std::vector<int>{2, 1, 1});
    CHECK(peel[3].size_profile() == std::vector<int>{1, 1, 1, 1});
    CHECK(refinement_chain(8, ChainStrategy::random, 3) == refinement_chain(8, ChainStrategy::random, 3));
    CHECK(parse_chain_strategy("balanced-split") == ChainStrategy::balanced_split);
    CHECK(!parse_chain_strategy("zigzag"));
  }

  TEST_CASE("simpler_first orders by size then lexicographically") {
    CHECK(simpler_first(GammaVector::parse("100"), GammaVector::parse("011")));
    CHECK(simpler_first(GammaVector::parse("010"), GammaVector::parse("100")));
    CHECK(simpler_first(Partition::parse("1,1,2"), Partition::parse("1,2,3")));
    CHECK(!simpler_first(Partition::parse("1,2,3"), Partition::parse("1,1,2")));
  }
}
