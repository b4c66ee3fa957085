#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/QR>

#include "riskcal/errors.hpp"
#include "riskcal/losses.hpp"
#include "riskcal/model_space.hpp"
#include "riskcal/priors.hpp"
#include "riskcal/risk.hpp"
#include "riskcal/rng.hpp"

using namespace riskcal;

namespace {

// Direct double sum over truth and action.
template <class M>
std::vector<double> brute_risk(const PriorSpec& prior, const LossSpec& l, const std::vector<M>& space) {
  std::vector<double> out;
  for (const auto& action : space) {
    double r = 0.0;
    for (const auto& truth : space) r += loss(l, truth, action) * pmf(prior, truth);
    out.push_back(r);
  }
  return out;
}

LossMatrix matrix_from(std::vector<std::string> ids, std::initializer_list<double> values) {
  const int m = static_cast<int>(ids.size());
  Eigen::MatrixXd v(m, m);
  auto it = values.begin();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) v(i, j) = *it++;
  }
  return LossMatrix(std::move(ids), v);
}

const LossMatrix kL1 = matrix_from({"00", "01", "10", "11"}, {0, 1, 1, 2, 1, 0, 3, 4, 1, 3, 0, 4, 2, 4, 4, 0});
const LossMatrix kL2 = matrix_from({"00", "01", "10", "11"}, {0, 1, 1, 3, 1, 0, 1, 2, 1, 1, 0, 2, 3, 2, 2, 0});

}  // namespace

TEST_SUITE("risk") {
  TEST_CASE("prior risk examples") {
    const auto r = prior_risk(PriorSpec::uniform_partition(), LossSpec::generalized_binder(1.0), 3);
    REQUIRE(r.values.size() == 5);
    const std::vector<double> expected{9.0 / 5, 7.0 / 5, 7.0 / 5, 7.0 / 5, 6.0 / 5};
    for (int i = 0; i < 5; ++i) CHECK(r.values[i] == doctest::Approx(expected[i]).epsilon(1e-12));

    const auto crp = prior_risk(PriorSpec::crp(1.0), LossSpec::generalized_binder(1.0), 8);
    CHECK(crp.values.size() == 4140);
    for (double v : crp.values) CHECK(v == doctest::Approx(14.0).epsilon(1e-10));

    const auto z = prior_risk(PriorSpec::uniform_gamma(), LossSpec::zero_one(), 3);
    for (double v : z.values) CHECK(v == doctest::Approx(7.0 / 8.0));
  }

  TEST_CASE("exact risk matches direct summation") {
    for (const auto& prior : {PriorSpec::crp(0.5), PriorSpec::crp2(0.3, 1.0), PriorSpec::uniform_partition()}) {
      for (const auto& l : {LossSpec::generalized_binder(0.7), LossSpec::vi(), LossSpec::zero_one()}) {
        const auto r = prior_risk(prior, l, 4);
        const auto b = brute_risk(prior, l, all_partitions(4));
        for (std::size_t i = 0; i < b.size(); ++i) CHECK(r.values[i] == doctest::Approx(b[i]).epsilon(1e-12));
      }
    }
    for (const auto& prior : {PriorSpec::beta_binomial(0.8, 1.5), PriorSpec::trunc_exp_decay(2.0)}) {
      for (const auto& l : {LossSpec::generalized_hamming(1.3), LossSpec::zero_one()}) {
        const auto r = prior_risk(prior, l, 4);
        const auto b = brute_risk(prior, l, all_gammas(4));
        for (std::size_t i = 0; i < b.size(); ++i) CHECK(r.values[i] == doctest::Approx(b[i]).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("closed-form Binder risk equals enumeration") {
    RiskOptions cf;
    cf.method = RiskMethod::closed_form;
    for (int p = 2; p <= 6; ++p) {
      for (double theta : {0.5, 1.0, 2.0}) {
        for (double a : {0.6, 1.0, 1.5}) {
          const auto exact = prior_risk(PriorSpec::crp(theta), LossSpec::generalized_binder(a), p);
          const auto closed = prior_risk(PriorSpec::crp(theta), LossSpec::generalized_binder(a), p, cf);
          for (std::size_t i = 0; i < exact.values.size(); ++i)
            CHECK(closed.values[i] == doctest::Approx(exact.values[i]).epsilon(1e-10));
        }
      }
    }
    const auto gh = prior_risk(PriorSpec::beta_binomial(1.5, 1.0), LossSpec::generalized_hamming(0.8), 5);
    const auto ghc = prior_risk(PriorSpec::beta_binomial(1.5, 1.0), LossSpec::generalized_hamming(0.8), 5, cf);
    for (std::size_t i = 0; i < gh.values.size(); ++i) CHECK(ghc.values[i] == doctest::Approx(gh.values[i]));
    CHECK_THROWS_AS(prior_risk(PriorSpec::crp(1.0), LossSpec::vi(), 4, cf), UnsupportedMethodError);
  }

  TEST_CASE("closed-form VI-LB flags the omitted constant") {
    RiskOptions cf;
    cf.method = RiskMethod::closed_form;
    const auto r = prior_risk(PriorSpec::crp(1.0), LossSpec::vi_lower_bound(), 4, cf);
    CHECK(r.constant_omitted);
    const auto e = prior_risk(PriorSpec::crp(1.0), LossSpec::vi_lower_bound(), 4);
    // Exact includes h, so the two differ by a model-independent shift.
    const double shift = e.values[0] - r.values[0];
    for (std::size_t i = 0; i < r.values.size(); ++i) CHECK(e.values[i] - r.values[i] == doctest::Approx(shift));
  }

  TEST_CASE("Monte Carlo risk converges") {
    RiskOptions mc;
    mc.method = RiskMethod::monte_carlo;
    mc.samples = 100'000;
    mc.seed = 9;
    for (const auto& l : {LossSpec::generalized_binder(1.2), LossSpec::vi()}) {
      const auto exact = prior_risk(PriorSpec::crp(0.8), l, 4);
      const auto est = prior_risk(PriorSpec::crp(0.8), l, 4, mc);
      REQUIRE(est.mc_se.size() == exact.values.size());
      for (std::size_t i = 0; i < exact.values.size(); ++i)
        CHECK(std::abs(est.values[i] - exact.values[i]) <= 4 * est.mc_se[i] + 1e-12);
    }
    const auto exact = prior_risk(PriorSpec::beta_binomial(1, 2), LossSpec::generalized_hamming(1.0), 4);
    const auto est = prior_risk(PriorSpec::beta_binomial(1, 2), LossSpec::generalized_hamming(1.0), 4, mc);
    for (std::size_t i = 0; i < exact.values.size(); ++i)
      CHECK(std::abs(est.values[i] - exact.values[i]) <= 4 * est.mc_se[i] + 1e-12);
  }

  TEST_CASE("equilibrium examples") {
    const auto bb = check_equilibrium(PriorSpec::beta_binomial(1, 1), LossSpec::generalized_hamming(1.0), 6);
    CHECK(bb.equilibrium);
    const auto up = check_equilibrium(PriorSpec::uniform_partition(), LossSpec::generalized_binder(1.0), 3, 1e-9,
                                      Route::enumeration);
    CHECK(!up.equilibrium);
    CHECK(up.max_spread == doctest::Approx(0.6));
    CHECK(up.witness.first == "1,2,3");
    CHECK(up.witness.second == "1,1,1");
    const double a = 1.2;
    const auto cert = certify_equilibrium(PriorSpec::crp(a / (2 - a)), LossSpec::generalized_binder(a), 5);
    REQUIRE(cert.characterization);
    CHECK(cert.characterization->equilibrium);
    CHECK(cert.enumeration.equilibrium);
    CHECK(cert.agree);
    CHECK(check_equilibrium(PriorSpec::uniform_gamma(), LossSpec::zero_one(), 4).equilibrium);
    CHECK(!check_equilibrium(PriorSpec::beta_binomial(1, 1), LossSpec::zero_one(), 3).equilibrium);
    CHECK_THROWS_AS(check_equilibrium(PriorSpec::crp(1), LossSpec::generalized_binder(1), 3, 0.0), ArgumentError);
  }

  TEST_CASE("penalization examples") {
    const auto t = certify_penalization(PriorSpec::trunc_exp_decay(2.0), LossSpec::generalized_hamming(1.0), 5);
    CHECK(t.penalization());
    CHECK(t.agree);
    // Exchangeable table prior with co-clustering 0.40 at p = 4.
    const auto c40 = calibrate({hierarchical_uniform_geometric(4, 1.0), "r", 0.40, 4});
    const auto bad = check_penalization(c40.prior, LossSpec::vi_lower_bound(), 4, 1e-9, Route::enumeration);
    CHECK(!bad.penalization);
    REQUIRE(bad.violating_pair);
    const auto simpler = Partition::parse(bad.violating_pair->first);
    const auto complex = Partition::parse(bad.violating_pair->second);
    CHECK(compare(simpler, complex) == OrderRelation::simpler);
    CHECK(complex.k() == simpler.k() + 1);
    const auto fine = complex.sizes();
    const auto coarse = simpler.sizes();
    CHECK(std::count(fine.begin(), fine.end(), 1) == std::count(coarse.begin(), coarse.end(), 1) + 2);
    const auto crp = certify_penalization(PriorSpec::crp(1.0), LossSpec::vi_lower_bound(), 8);
    CHECK(crp.penalization());
    CHECK(crp.agree);
  }

  TEST_CASE("VI-LB penalization threshold over covering pairs") {
    for (int p = 2; p <= 7; ++p) {
      for (double c : {0.42, 0.5, 0.8}) {
        const auto prior = PriorSpec::crp(1.0 / c - 1.0);
        CHECK(check_penalization(prior, LossSpec::vi_lower_bound(), p, 1e-9, Route::enumeration).penalization);
      }
    }
    const auto low = PriorSpec::crp(1.0 / 0.40 - 1.0);
    const auto r = check_penalization(low, LossSpec::vi_lower_bound(), 6, 1e-9, Route::enumeration);
    CHECK(!r.penalization);
    CHECK(r.violating_pair.has_value());
  }

  TEST_CASE("characterization and enumeration agree on random configurations") {
    auto rng = make_rng(2718);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
      const int p = 2 + static_cast<int>(u(rng) * 4);
      const double a = 0.2 + 1.6 * u(rng);
      const int pick = t % 4;
      PriorSpec prior = PriorSpec::crp(1.0);
      LossSpec l = LossSpec::generalized_binder(a);
      if (pick == 0) {
        // Often exactly on the boundary.
        prior = PriorSpec::crp(u(rng) < 0.5 ? a / (2 - a) : 0.1 + 3 * u(rng));
      } else if (pick == 1) {
        const double s = 0.9 * u(rng);
        prior = PriorSpec::crp2(s, u(rng) < 0.5 ? (a - 2 * s) / (2 - a) + 1e-3 : 0.5 + u(rng));
        if (prior.get<Crp2Prior>()->theta <= -s) prior = PriorSpec::crp2(s, 1.0);
      } else if (pick == 2) {
        const double aw = 0.2 + 1.6 * u(rng);
        prior = PriorSpec::beta_binomial(aw, u(rng) < 0.5 ? 2 - aw : 0.3 + u(rng));
        l = LossSpec::generalized_hamming(a);
      } else {
        prior = PriorSpec::crp(0.1 + 3 * u(rng));
        l = LossSpec::vi_lower_bound();
      }
      CAPTURE(prior.label());
      CAPTURE(l.name());
      CAPTURE(p);
      if (l.kind != LossKind::vi_lower_bound) {
        const auto e = certify_equilibrium(prior, l, p);
        CHECK(e.agree);
      }
      const auto q = certify_penalization(prior, l, p);
      CHECK(q.agree);
    }
  }

  TEST_CASE("weight-swap symmetry of the Hamming condition") {
    for (double a : {0.5, 0.9, 1.0, 1.4}) {
      for (const auto& [aw, bw] : std::vector<std::pair<double, double>>{{a, 2 - a}, {1.0, 1.0}, {0.7, 0.4}}) {
        const auto lhs = check_equilibrium(PriorSpec::beta_binomial(aw, bw), LossSpec::generalized_hamming(a), 4, 1e-9,
                                           Route::enumeration);
        const auto rhs = check_equilibrium(PriorSpec::beta_binomial(bw, aw), LossSpec::generalized_hamming(2 - a), 4,
                                           1e-9, Route::enumeration);
        CHECK(lhs.equilibrium == rhs.equilibrium);
      }
    }
  }

  TEST_CASE("solve equilibrium examples") {
    const auto s1 = solve_equilibrium(kL1);
    CHECK(s1.status == SolutionStatus::none);
    CHECK(s1.prior.empty());
    const auto s2 = solve_equilibrium(kL2);
    REQUIRE(s2.status == SolutionStatus::unique);
    const std::vector<double> want{0.5, 0.0, 0.0, 0.5};
    for (int i = 0; i < 4; ++i) CHECK(s2.prior[i] == doctest::Approx(want[i]).epsilon(1e-10));
    CHECK(s2.risk == doctest::Approx(1.5));

    const auto z = solve_equilibrium(partition_loss_matrix(LossSpec::zero_one(), 3));
    REQUIRE(z.status == SolutionStatus::unique);
    for (double v : z.prior) CHECK(v == doctest::Approx(0.2));

    const auto gh = solve_equilibrium(gamma_loss_matrix(LossSpec::generalized_hamming(1.0), 2));
    REQUIRE(gh.status == SolutionStatus::underdetermined);
    CHECK(gh.basis.cols() >= 1);
    // Uniform lies in the affine solution set: particular + basis * t.
    Eigen::VectorXd diff = Eigen::VectorXd::Constant(4, 0.25);
    for (int i = 0; i < 4; ++i) diff[i] -= gh.prior[i];
    const Eigen::VectorXd t = gh.basis.colPivHouseholderQr().solve(diff);
    CHECK((gh.basis * t - diff).norm() <= 1e-9);

    CHECK_THROWS_AS(solve_equilibrium(LossSpec::generalized_binder(1.0)), ArgumentError);
  }

  TEST_CASE("point mass properness") {
    CHECK(point_mass_properness_check(kL1));
    CHECK(point_mass_properness_check(kL2));
    CHECK(point_mass_properness_check(partition_loss_matrix(LossSpec::vi(), 4)));
  }

  TEST_CASE("nnls matches a hand solution") {
    Eigen::MatrixXd A(3, 2);
    A << 1, 0, 0, 1, 1, 1;
    Eigen::VectorXd b(3);
    b << 1, -1, 0;
    const auto x = nnls(A, b);
    CHECK(x[0] >= 0.0);
    CHECK(x[1] == doctest::Approx(0.0));
    CHECK(x[0] == doctest::Approx(0.5));
  }

  TEST_CASE("chain risk") {
    const auto chain = refinement_chain(8, ChainStrategy::balanced_split);
    const auto rows = chain_risk(PriorSpec::crp(1.0), chain,
                                 {LossSpec::generalized_binder(1.0), LossSpec::vi_lower_bound()}, 2000, 1);
    REQUIRE(rows.size() == 16);
    double prev = -1e300;
    for (const auto& r : rows) {
      if (r.loss_name == "GB(1)") CHECK(r.risk == doctest::Approx(14.0));
      if (r.loss_name == "VI-LB") {
        CHECK(r.risk >= prev - 1e-12);
        prev = r.risk;
      }
    }
    const auto two = chain_risk(PriorSpec::crp(1.0), refinement_chain(2, ChainStrategy::singleton_peel),
                                {LossSpec::vi()}, 500, 3);
    CHECK(two.size() == 2);
    CHECK(chain_risk_csv(two).rfind("chain_index,partition,loss_name,risk,method\n", 0) == 0);
  }

  TEST_CASE("subadditivity function") {
    CHECK(subadditivity_g(1, 0.3) == 0.0);
    CHECK(std::abs(subadditivity_g(2, std::sqrt(2.0) - 1.0)) <= 1e-12);
    CHECK(subadditivity_g(2, 0.40) == doctest::Approx(2 * std::log2(2 / 1.96)));
    CHECK(subadditivity_g(2, 0.40) > 0.0);
    CHECK_THROWS_AS(subadditivity_g(0, 0.5), ArgumentError);
  }
}
