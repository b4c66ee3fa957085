#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "riskcal/errors.hpp"
#include "riskcal/model_space.hpp"
#include "riskcal/prior_io.hpp"
#include "riskcal/priors.hpp"
#include "riskcal/rng.hpp"

using namespace riskcal;

namespace {

double rising(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x + i;
  return r;
}

double falling(int k, int j) {
  double r = 1.0;
  for (int i = 0; i < j; ++i) r *= k - i;
  return r;
}

// Pitman two-parameter EPPF written from the product form.
double pitman_eppf(const Partition& z, double sigma, double theta) {
  const auto sizes = z.sizes();
  double num = 1.0;
  for (int l = 1; l < z.k(); ++l) num *= theta + l * sigma;
  for (int n : sizes) num *= rising(1.0 - sigma, n - 1);
  return num / rising(theta + 1.0, z.p() - 1);
}

// Finite symmetric Dirichlet-multinomial mixture over K.
double dir_mult_eppf(const Partition& z, double alpha, const KDistribution& k) {
  const auto sizes = z.sizes();
  return k.expect([&](int kk) {
    if (kk < z.k()) return 0.0;
    double v = falling(kk, z.k()) / rising(kk * alpha, z.p());
    for (int n : sizes) v *= rising(alpha, n);
    return v;
  });
}

double balance_neutral_eppf(const Partition& z, const KDistribution& k) {
  return k.expect([&](int kk) { return kk < z.k() ? 0.0 : falling(kk, z.k()) / std::pow(kk, z.p()); });
}

double binom(int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); }

std::vector<PriorSpec> gamma_families() {
  return {PriorSpec::uniform_gamma(), PriorSpec::beta_binomial(1.0, 1.0), PriorSpec::beta_binomial(1.3, 0.7),
          PriorSpec::trunc_exp_decay(2.0), PriorSpec::trunc_exp_decay(2.5, 2)};
}

std::vector<PriorSpec> partition_families() {
  return {PriorSpec::uniform_partition(),
          PriorSpec::crp(1.0),
          PriorSpec::crp(0.4),
          PriorSpec::crp2(0.3, 0.5),
          PriorSpec::dir_mult(1.0, KDistribution::shifted_poisson(2.5)),
          PriorSpec::dir_mult(0.5, KDistribution::geometric(0.4)),
          PriorSpec::balance_neutral(KDistribution::geometric(0.2847)),
          hierarchical_uniform_geometric(5, 0.7)};
}

}  // namespace

TEST_SUITE("priors") {
  TEST_CASE("marginal inclusion examples") {
    CHECK(marginal_inclusion(PriorSpec::beta_binomial(1, 1), 6) == doctest::Approx(0.5));
    CHECK(marginal_inclusion(PriorSpec::beta_binomial(1.3, 0.7), 6) == doctest::Approx(0.65));
    CHECK(marginal_inclusion(PriorSpec::uniform_gamma(), 4) == doctest::Approx(0.5));
    const double t = marginal_inclusion(PriorSpec::trunc_exp_decay(2.0, 3), 5);
    CHECK(t > 0.0);
    CHECK(t <= 0.5);
    // Size-representation oracle.
    double z = 0.0;
    double s1 = 0.0;
    for (int s = 0; s <= 3; ++s) {
      const double w = binom(5, s) * std::pow(5.0, -2.0 * s);
      z += w;
      s1 += s / 5.0 * w;
    }
    CHECK(t == doctest::Approx(s1 / z).epsilon(1e-12));
    CHECK_THROWS_AS(marginal_inclusion(PriorSpec::crp(1.0), 4), ArgumentError);
  }

  TEST_CASE("co-clustering examples") {
    CHECK(coclustering(PriorSpec::crp(1.0)) == doctest::Approx(0.5));
    CHECK(coclustering(PriorSpec::crp2(0.5, 1.0)) == doctest::Approx(0.25));
    CHECK(coclustering(PriorSpec::balance_neutral(KDistribution::geometric(0.2847))) ==
          doctest::Approx(0.5).epsilon(1e-3));
    CHECK_THROWS_AS(coclustering(PriorSpec::beta_binomial(1, 1)), ArgumentError);
    // Exhaustive oracle at p = 5.
    for (const auto& prior : partition_families()) {
      double c = 0.0;
      for (const auto& z : all_partitions(5)) c += z.together(0, 1) ? pmf(prior, z) : 0.0;
      CHECK(coclustering(prior, 5) == doctest::Approx(c).epsilon(1e-9));
      const auto m = coclustering_matrix(prior, 5);
      CHECK(m(2, 4) == doctest::Approx(c).epsilon(1e-9));
    }
  }

  TEST_CASE("pmf examples") {
    const auto crp = PriorSpec::crp(1.0);
    CHECK(pmf(crp, Partition::one_block(3)) == doctest::Approx(1.0 / 3.0));
    double total = 0.0;
    for (const auto& z : all_partitions(3)) total += pmf(crp, z);
    CHECK(total == doctest::Approx(1.0));
    CHECK(pmf(PriorSpec::beta_binomial(1, 1), GammaVector::parse("10")) == doctest::Approx(1.0 / 6.0));
    CHECK(pmf(PriorSpec::trunc_exp_decay(2.0, 1), GammaVector::parse("11")) == 0.0);
    CHECK(std::isinf(log_pmf(PriorSpec::trunc_exp_decay(2.0, 1), GammaVector::parse("11"))));
  }

  TEST_CASE("hyperparameter validation") {
    CHECK_THROWS_AS(PriorSpec::beta_binomial(0.0, 1.0), ArgumentError);
    CHECK_THROWS_AS(PriorSpec::trunc_exp_decay(1.5), ArgumentError);
    CHECK_THROWS_AS(PriorSpec::crp(0.0), ArgumentError);
    CHECK_THROWS_AS(PriorSpec::crp2(1.0, 1.0), ArgumentError);
    CHECK_THROWS_AS(PriorSpec::crp2(0.5, -0.6), ArgumentError);
    CHECK_THROWS_AS(PriorSpec::dir_mult(-1.0, KDistribution::geometric(0.5)), ArgumentError);
    CHECK_THROWS_AS(KDistribution::explicit_pmf({0.5, 0.4}), ArgumentError);
    CHECK_THROWS_AS(PriorSpec::table(ModelSpace::hypercube, 1, {{"0", 0.5}, {"1", 0.4}}), ArgumentError);
  }

  TEST_CASE("pmf matches closed-form oracles") {
    for (const auto& z : all_partitions(6)) {
      CHECK(pmf(PriorSpec::crp(0.7), z) == doctest::Approx(pitman_eppf(z, 0.0, 0.7)).epsilon(1e-12));
      CHECK(pmf(PriorSpec::crp2(0.3, 0.5), z) == doctest::Approx(pitman_eppf(z, 0.3, 0.5)).epsilon(1e-12));
      const auto k = KDistribution::shifted_poisson(2.5);
      CHECK(pmf(PriorSpec::dir_mult(1.0, k), z) == doctest::Approx(dir_mult_eppf(z, 1.0, k)).epsilon(1e-10));
      const auto g = KDistribution::geometric(0.3);
      CHECK(pmf(PriorSpec::balance_neutral(g), z) == doctest::Approx(balance_neutral_eppf(z, g)).epsilon(1e-10));
    }
    for (const auto& g : all_gammas(5)) {
      const int s = g.size();
      const double bb = std::exp(std::lgamma(1.3 + s) + std::lgamma(0.7 + 5 - s) - std::lgamma(7.0) -
                                 std::lgamma(1.3) - std::lgamma(0.7) + std::lgamma(2.0));
      CHECK(pmf(PriorSpec::beta_binomial(1.3, 0.7), g) == doctest::Approx(bb).epsilon(1e-12));
    }
  }

  TEST_CASE("pmf sums to one") {
    for (int p = 1; p <= 6; ++p) {
      for (const auto& prior : gamma_families()) {
        const auto* t = prior.get<TruncExpDecayPrior>();
        if (t && t->s_max && *t->s_max > p) continue;
        double total = 0.0;
        for (const auto& g : enumerate_gamma(p)) total += pmf(prior, g);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
      }
      for (const auto& prior : partition_families()) {
        if (prior.get<TablePrior>()) continue;
        double total = 0.0;
        for (const auto& z : enumerate_partitions(p)) total += pmf(prior, z);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("partition pmf is exchangeable") {
    for (int p = 2; p <= 5; ++p) {
      std::vector<int> perm(p);
      std::iota(perm.begin(), perm.end(), 0);
      std::vector<std::vector<int>> perms;
      do perms.push_back(perm);
      while (std::next_permutation(perm.begin(), perm.end()));
      for (const auto& prior : partition_families()) {
        if (prior.get<TablePrior>()) continue;
        for (const auto& z : all_partitions(p)) {
          const double base = pmf(prior, z);
          for (const auto& pi : perms) {
            std::vector<int> lab(p);
            for (int i = 0; i < p; ++i) lab[i] = z.label(pi[i]);
            CHECK(pmf(prior, canonicalize(lab)) == doctest::Approx(base).epsilon(1e-12));
          }
        }
      }
    }
  }

  TEST_CASE("crp2 approaches crp as sigma vanishes") {
    for (int p = 1; p <= 5; ++p) {
      for (const auto& z : all_partitions(p)) {
        CHECK(std::abs(pmf(PriorSpec::crp2(1e-8, 1.5), z) - pmf(PriorSpec::crp(1.5), z)) <= 1e-6);
      }
    }
  }

  TEST_CASE("hierarchical uniform is uniform given the cluster count") {
    const std::vector<double> q{0.1, 0.2, 0.3, 0.4};
    const auto prior = hierarchical_uniform(4, q);
    std::map<int, int> count;
    for (const auto& z : all_partitions(4)) ++count[z.k()];
    double total = 0.0;
    for (const auto& z : all_partitions(4)) {
      CHECK(pmf(prior, z) == doctest::Approx(q[z.k() - 1] / count[z.k()]).epsilon(1e-12));
      total += pmf(prior, z);
    }
    CHECK(total == doctest::Approx(1.0));
    CHECK_THROWS_AS(hierarchical_uniform(4, std::vector<double>{0.5, 0.5}), ArgumentError);
  }

  TEST_CASE("samplers match summaries") {
    constexpr int kDraws = 100'000;
    auto rng = make_rng(11);
    for (const auto& prior : {PriorSpec::beta_binomial(1.0, 1.0), PriorSpec::beta_binomial(0.5, 2.0),
                              PriorSpec::trunc_exp_decay(2.0), PriorSpec::trunc_exp_decay(2.0, 2)}) {
      const double q = marginal_inclusion(prior, 6);
      double hits = 0.0;
      for (int t = 0; t < kDraws; ++t) hits += sample_gamma(prior, 6, rng)[2] ? 1.0 : 0.0;
      const double se = std::sqrt(q * (1 - q) / kDraws);
      CHECK(std::abs(hits / kDraws - q) <= 3 * se + 1e-12);
    }
    for (const auto& prior : {PriorSpec::crp(1.0), PriorSpec::crp(3.0), PriorSpec::crp2(0.5, 1.0),
                              PriorSpec::crp2(0.2, 0.1),
                              PriorSpec::dir_mult(1.0, KDistribution::shifted_poisson(2.556929)),
                              PriorSpec::dir_mult(2.0, KDistribution::geometric(0.3)),
                              PriorSpec::balance_neutral(KDistribution::geometric(0.284668)),
                              PriorSpec::balance_neutral(KDistribution::shifted_poisson(1.0))}) {
      const double c = coclustering(prior, 6);
      double hits = 0.0;
      for (int t = 0; t < kDraws; ++t) hits += sample_partition(prior, 6, rng).together(1, 4) ? 1.0 : 0.0;
      const double se = std::sqrt(c * (1 - c) / kDraws);
      CHECK(std::abs(hits / kDraws - c) <= 3 * se);
    }
  }

  TEST_CASE("sampler examples") {
    auto rng = make_rng(5);
    int one = 0;
    for (int t = 0; t < 10'000; ++t) one += sample_partition(PriorSpec::crp(1e-9), 4, rng).k() == 1;
    CHECK(one > 9990);

    int together = 0;
    for (int t = 0; t < 100'000; ++t) together += sample_partition(PriorSpec::crp(1.0), 8, rng).together(0, 1);
    CHECK(together / 1e5 == doctest::Approx(0.5).epsilon(0.02));

    std::map<std::string, int> freq;
    const auto two = PriorSpec::balance_neutral(KDistribution::explicit_pmf({0.0, 1.0}));
    for (int t = 0; t < 10'000; ++t) ++freq[sample_partition(two, 3, rng).to_string()];
    CHECK(freq.count("1,2,3") == 0);
    for (const auto& z : all_partitions(3)) {
      if (z.k() <= 2) CHECK(freq[z.to_string()] > 0);
    }
  }

  TEST_CASE("calibration examples") {
    CalibrationRequest crp{PriorSpec::crp(2.0), "theta", 0.5, std::nullopt};
    const auto r = calibrate(crp);
    CHECK(r.value == doctest::Approx(1.0));
    CHECK(r.closed_form);

    CalibrationRequest dm{PriorSpec::dir_mult(1.0, KDistribution::shifted_poisson(1.0)), "lambda", 0.5,
                          std::nullopt};
    CHECK(std::abs(calibrate(dm).value - 2.5569) <= 1e-3);

    CalibrationRequest bn{PriorSpec::balance_neutral(KDistribution::geometric(0.5)), "s", 0.5, std::nullopt};
    CHECK(std::abs(calibrate(bn).value - 0.2847) <= 1e-3);

    CalibrationRequest bb{PriorSpec::beta_binomial(1.0, 1.0), "ab", 0.65, 6};
    const auto b = calibrate(bb);
    CHECK(b.value == doctest::Approx(1.3));
    CHECK(b.prior.get<BetaBinomialPrior>()->b == doctest::Approx(0.7));

    CalibrationRequest bad{PriorSpec::crp2(0.5, 1.0), "sigma", 0.8, std::nullopt};
    CHECK_THROWS_AS(calibrate(bad), InfeasibleError);
    CHECK_THROWS_AS(calibrate({PriorSpec::crp(1.0), "theta", 1.5, std::nullopt}), ArgumentError);
  }

  TEST_CASE("calibrate then summarize is the identity") {
    const std::vector<std::pair<PriorSpec, std::string>> cases{
        {PriorSpec::crp(1.0), "theta"},
        {PriorSpec::dir_mult(1.0, KDistribution::shifted_poisson(1.0)), "lambda"},
        {PriorSpec::dir_mult(1.0, KDistribution::geometric(0.5)), "s"},
        {PriorSpec::balance_neutral(KDistribution::geometric(0.5)), "s"},
        {PriorSpec::balance_neutral(KDistribution::shifted_poisson(1.0)), "lambda"},
        {PriorSpec::beta_binomial(1.0, 1.0), "ab"},
        {PriorSpec::beta_binomial(1.0, 1.0), "a"},
    };
    for (const auto& [base, free] : cases) {
      for (int i = 1; i <= 9; ++i) {
        const double target = 0.1 * i;
        CAPTURE(base.label());
        CAPTURE(target);
        const auto r = calibrate({base, free, target, 6});
        CHECK(std::abs(calibration_summary(r.prior, 6) - target) <= 1e-9);
      }
    }
  }

  TEST_CASE("weibull hyperprior co-clustering") {
    const double q = weibull_crp_coclustering(2.0, 1.3115);
    CHECK(std::abs(q - 0.5) <= 1e-4);
    // Midpoint rule on the Weibull density.
    double acc = 0.0;
    const double h = 1e-4;
    for (double t = h / 2; t < 12.0; t += h) {
      const double x = t / 1.3115;
      acc += h * (2.0 / 1.3115) * x * std::exp(-x * x) / (t + 1.0);
    }
    CHECK(q == doctest::Approx(acc).epsilon(1e-6));
  }

  TEST_CASE("k distributions truncate with bounded tail") {
    for (const auto& k : {KDistribution::shifted_poisson(2.5), KDistribution::geometric(0.05)}) {
      CHECK(k.retained_mass() >= 1.0 - kTailTolerance);
      CHECK(k.truncation() > 1);
    }
    const auto g = KDistribution::geometric(0.25);
    CHECK(g.pmf(3) == doctest::Approx(0.25 * 0.75 * 0.75));
    const auto sp = KDistribution::shifted_poisson(2.0);
    CHECK(sp.pmf(1) == doctest::Approx(std::exp(-2.0)));
    CHECK(sp.expect([](int k) { return double(k); }) == doctest::Approx(3.0).epsilon(1e-9));
  }

  TEST_CASE("json and short forms round-trip") {
    for (const auto& prior : {PriorSpec::uniform_gamma(), PriorSpec::beta_binomial(1.3, 0.7),
                              PriorSpec::trunc_exp_decay(2.0, 3), PriorSpec::crp(0.5), PriorSpec::crp2(0.3, 0.5),
                              PriorSpec::dir_mult(1.0, KDistribution::shifted_poisson(2.5)),
                              PriorSpec::balance_neutral(KDistribution::geometric(0.3)),
                              hierarchical_uniform_geometric(4, 0.5)}) {
      const auto back = prior_from_json(prior_to_json(prior));
      CHECK(back.label() == prior.label());
      CHECK(prior_to_json(back) == prior_to_json(prior));
    }
    CHECK(parse_prior("crp:2").label() == PriorSpec::crp(2.0).label());
    CHECK(parse_prior("beta-binomial:1,1").label() == PriorSpec::beta_binomial(1, 1).label());
    CHECK(parse_prior(R"({"family":"crp","params":{"theta":3}})").label() == PriorSpec::crp(3.0).label());
    CHECK(coclustering(parse_prior("balance-neutral:geometric:0.2847")) == doctest::Approx(0.5).epsilon(1e-3));
    CHECK_THROWS_AS(parse_prior("nonsense:1"), ArgumentError);
    const auto t = parse_table_prior("00,0.25\n01,0.25\n10,0.25\n11,0.25\n");
    CHECK(t.space() == ModelSpace::hypercube);
    CHECK(pmf(t, GammaVector::parse("01")) == doctest::Approx(0.25));
    const auto tp = parse_table_prior("1,1,0.5\n1,2,0.5\n");
    CHECK(tp.space() == ModelSpace::partition);
    CHECK(coclustering(tp, 2) == doctest::Approx(0.5));
  }
}
