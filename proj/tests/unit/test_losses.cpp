#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "riskcal/csv.hpp"
#include "riskcal/errors.hpp"
#include "riskcal/losses.hpp"
#include "riskcal/model_space.hpp"
#include "riskcal/rng.hpp"

using namespace riskcal;

namespace {

// Contingency-table oracle: H(z1) + H(z2) - 2 I(z1, z2), in bits.
double vi_oracle(const Partition& z1, const Partition& z2) {
  const double n = z1.p();
  std::map<int, double> a;
  std::map<int, double> b;
  std::map<std::pair<int, int>, double> ab;
  for (int i = 0; i < z1.p(); ++i) {
    a[z1.label(i)] += 1;
    b[z2.label(i)] += 1;
    ab[{z1.label(i), z2.label(i)}] += 1;
  }
  double ha = 0.0;
  double hb = 0.0;
  double mi = 0.0;
  for (const auto& [k, v] : a) ha -= v / n * std::log2(v / n);
  for (const auto& [k, v] : b) hb -= v / n * std::log2(v / n);
  for (const auto& [k, v] : ab) mi += v / n * std::log2((v / n) / ((a[k.first] / n) * (b[k.second] / n)));
  return ha + hb - 2.0 * mi;
}

Partition random_partition(int p, Rng& rng) {
  std::uniform_int_distribution<int> lab(1, p);
  std::vector<int> labels(p);
  for (auto& l : labels) l = lab(rng);
  return canonicalize(labels);
}

const char* kL1 = "00,01,10,11\n0,1,1,2\n1,0,3,4\n1,3,0,4\n2,4,4,0\n";
const char* kL2 = "00,01,10,11\n0,1,1,3\n1,0,1,2\n1,1,0,2\n3,2,2,0\n";

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("generalized Hamming examples") {
    const auto g = GammaVector::parse("101");
    CHECK(gh_loss(g, g, 0.7) == 0.0);
    CHECK(gh_loss(GammaVector::parse("101"), GammaVector::parse("001"), 1.0) == doctest::Approx(1.0));
    CHECK(gh_loss(GammaVector::parse("00"), GammaVector::parse("11"), 1.5) == doctest::Approx(3.0));
    CHECK_THROWS_AS(gh_loss(GammaVector::parse("00"), GammaVector::parse("000"), 1.0), ArgumentError);
    CHECK_THROWS_AS(gh_loss(g, g, 2.0), ArgumentError);
    CHECK_THROWS_AS(gh_loss(g, g, 0.0), ArgumentError);
  }

  TEST_CASE("generalized Binder examples") {
    const auto one = Partition::one_block(3);
    const auto sing = Partition::singletons(3);
    CHECK(gb_loss(one, one, 1.3) == 0.0);
    CHECK(gb_loss(one, sing, 1.0) == doctest::Approx(3.0));
    CHECK(gb_loss(sing, one, 0.5) == doctest::Approx(4.5));
    CHECK_THROWS_AS(gb_loss(one, Partition::one_block(4), 1.0), ArgumentError);
  }

  TEST_CASE("variation of information examples") {
    const auto z = Partition::parse("1,1,2,2");
    CHECK(vi_loss(z, z) == 0.0);
    CHECK(vi_loss(Partition::one_block(4), Partition::singletons(4)) == doctest::Approx(2.0).epsilon(1e-14));
    auto rng = make_rng(42);
    for (int t = 0; t < 200; ++t) {
      const auto a = random_partition(6, rng);
      const auto b = random_partition(6, rng);
      CHECK(vi_loss(a, b) == doctest::Approx(vi_oracle(a, b)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(vi_loss(z, Partition::one_block(3)), ArgumentError);
  }

  TEST_CASE("check function") {
    CHECK(check(0.5, -0.3) == doctest::Approx(0.3));
    CHECK(check(0.37, 0.0) == 0.0);
    CHECK(check(0.25, 1.0) == doctest::Approx(0.5));
    CHECK(check(0.25, -1.0) == doctest::Approx(1.5));
    auto rng = make_rng(3);
    std::normal_distribution<double> x(0.0, 5.0);
    for (int i = 0; i < 100; ++i) {
      const double v = x(rng);
      CHECK(check(0.5, v) == doctest::Approx(std::abs(v)));
    }
  }

  TEST_CASE("dispatch and matrix losses") {
    const auto l1 = LossSpec::from_matrix(LossMatrix::parse_csv(kL1));
    const auto l2 = LossSpec::from_matrix(LossMatrix::parse_csv(kL2));
    CHECK(loss(l1, GammaVector::parse("00"), GammaVector::parse("11")) == 2.0);
    CHECK(loss(l2, GammaVector::parse("01"), GammaVector::parse("10")) == 1.0);
    CHECK(loss(LossSpec::zero_one(), GammaVector::parse("01"), GammaVector::parse("01")) == 0.0);
    CHECK(loss(LossSpec::zero_one(), Partition::parse("1,2"), Partition::parse("1,1")) == 1.0);
    CHECK_THROWS_AS(loss(l1, GammaVector::parse("000"), GammaVector::parse("11")), ArgumentError);
    CHECK_THROWS_AS(loss(LossSpec::vi_lower_bound(), Partition::parse("1,2"), Partition::parse("1,1")), ArgumentError);
    CHECK_THROWS_AS(loss(LossSpec::generalized_binder(1.0), GammaVector::parse("01"), GammaVector::parse("01")),
                    ArgumentError);
  }

  TEST_CASE("matrix validation") {
    CHECK_THROWS_AS(LossMatrix::parse_csv("a,b\n0,1\n1,1\n"), ArgumentError);  // nonzero diagonal
    CHECK_THROWS_AS(LossMatrix::parse_csv("a,b\n0,0\n1,0\n"), ArgumentError);  // zero off-diagonal
    CHECK_THROWS_AS(LossMatrix::parse_csv("a,b\n0,1\n"), ArgumentError);       // ragged
    const auto m = LossMatrix::parse_csv(kL1);
    const auto again = LossMatrix::parse_csv(m.to_csv());
    CHECK(again.ids() == m.ids());
    CHECK(again.values() == m.values());
    const auto pm = partition_loss_matrix(LossSpec::generalized_binder(1.0), 3);
    const auto pm2 = LossMatrix::parse_csv(pm.to_csv());
    CHECK(pm2.ids() == pm.ids());
    CHECK(pm2.values().isApprox(pm.values()));
  }

  TEST_CASE("loss spec parsing and names") {
    CHECK(LossSpec::parse("GH:0.7").name() == "GH(0.7)");
    CHECK(LossSpec::parse("GB", 1.3).name() == "GB(1.3)");
    CHECK(LossSpec::parse("GB(1.3)").name() == "GB(1.3)");
    CHECK(LossSpec::parse("01").kind == LossKind::zero_one);
    CHECK(LossSpec::parse("VI").kind == LossKind::vi);
    CHECK(LossSpec::parse("VI-LB").kind == LossKind::vi_lower_bound);
    CHECK_THROWS_AS(LossSpec::parse("GH:2.5"), ArgumentError);
    CHECK_THROWS_AS(LossSpec::parse("hinge"), ArgumentError);
  }

  TEST_CASE("nonnegativity and identity of indiscernibles") {
    for (int p = 1; p <= 5; ++p) {
      const auto gs = all_gammas(p);
      for (const auto& x : gs) {
        for (const auto& y : gs) {
          for (double a : {0.3, 1.0, 1.6}) {
            const double l = gh_loss(x, y, a);
            CHECK(l >= 0.0);
            CHECK((l == 0.0) == (x == y));
          }
        }
      }
      const auto zs = all_partitions(p);
      for (const auto& x : zs) {
        for (const auto& y : zs) {
          for (double a : {0.3, 1.0, 1.6}) {
            const double l = gb_loss(x, y, a);
            CHECK(l >= 0.0);
            CHECK((l == 0.0) == (x == y));
          }
          const double v = vi_loss(x, y);
          CHECK(v >= -1e-15);
          CHECK((std::abs(v) < 1e-12) == (x == y));
        }
      }
    }
  }

  TEST_CASE("weight-swap duality and symmetry") {
    for (const auto& x : all_gammas(4)) {
      for (const auto& y : all_gammas(4)) {
        CHECK(gh_loss(x, y, 1.0) == gh_loss(y, x, 1.0));
        CHECK(gh_loss(x, y, 0.6) == doctest::Approx(gh_loss(y, x, 1.4)));
      }
    }
    for (const auto& x : all_partitions(4)) {
      for (const auto& y : all_partitions(4)) {
        CHECK(gb_loss(x, y, 1.0) == gb_loss(y, x, 1.0));
        CHECK(gb_loss(x, y, 0.6) == doctest::Approx(gb_loss(y, x, 1.4)));
        CHECK(vi_loss(x, y) == doctest::Approx(vi_loss(y, x)));
      }
    }
  }

  TEST_CASE("VI triangle inequality on four items") {
    const auto zs = all_partitions(4);
    for (const auto& x : zs) {
      for (const auto& y : zs) {
        for (const auto& z : zs) CHECK(vi_loss(x, z) <= vi_loss(x, y) + vi_loss(y, z) + 1e-12);
      }
    }
  }

  TEST_CASE("tabulated structured losses") {
    const auto m = gamma_loss_matrix(LossSpec::generalized_hamming(0.8), 3);
    REQUIRE(m.size() == 8);
    CHECK(m.ids()[0] == "000");
    CHECK(m(0, 7) == doctest::Approx(3 * 0.8));
    CHECK(m(7, 0) == doctest::Approx(3 * 1.2));
  }
}
