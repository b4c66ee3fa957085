#include "riskcal/priors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>

#include "riskcal/csv.hpp"
#include "riskcal/errors.hpp"
#include "riskcal/numeric.hpp"

namespace riskcal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<double> truncate_tail(const std::function<double(int)>& pmf, int mode_hint) {
  std::vector<double> out;
  double cum = 0.0;
  for (int k = 1;; ++k) {
    const double v = pmf(k);
    out.push_back(v);
    cum += v;
    if (k >= mode_hint && 1.0 - cum <= kTailTolerance) break;
    if (k > 50'000'000) throw CapacityError("KDistribution: tail does not vanish fast enough");
  }
  return out;
}

int s_max_for(const TruncExpDecayPrior& t, int p) {
  const int s = t.s_max.value_or(p);
  if (s < 1 || s > p) {
    throw ArgumentError("trunc-exp-decay: s_max must lie in [1, p], got " + std::to_string(s));
  }
  return s;
}

// log of sum_{s=0}^{s_max} C(p, s) p^(-kappa s).
double trunc_exp_log_normalizer(const TruncExpDecayPrior& t, int p) {
  const int smax = s_max_for(t, p);
  std::vector<double> terms;
  for (int s = 0; s <= smax; ++s) terms.push_back(log_binomial(p, s) - t.kappa * s * std::log(p));
  return log_sum_exp(terms);
}

void require_space(const PriorSpec& prior, ModelSpace s, std::string_view where) {
  if (prior.space() != s) {
    throw ArgumentError(std::string(where) + ": prior " + prior.family_name() + " lives on the " +
                        std::string(to_string(prior.space())) + " space");
  }
}

const TablePrior& require_table_p(const TablePrior& t, int p, std::string_view where) {
  if (t.p != p) {
    throw ArgumentError(std::string(where) + ": table prior is over p=" + std::to_string(t.p) +
                        ", model has p=" + std::to_string(p));
  }
  return t;
}

// log of the number of labelled assignments K!/(K-k)! of k blocks.
double log_falling(int K, int k) { return std::lgamma(K + 1.0) - std::lgamma(K - k + 1.0); }

double lookup_table(const TablePrior& t, const std::string& key) {
  auto it = t.probs.find(key);
  return it == t.probs.end() ? 0.0 : it->second;
}

template <class Sampler>
int categorical(const std::vector<double>& weights, Sampler& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::uniform_real_distribution<double> u(0.0, total);
  double x = u(rng);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (x < weights[i]) return static_cast<int>(i);
    x -= weights[i];
  }
  // Rounding at the upper end: last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

}  // namespace

std::string_view to_string(ModelSpace s) { return s == ModelSpace::hypercube ? "hypercube" : "partition"; }

// -------------------------------------------------------------- KDistribution

KDistribution::KDistribution(Kind kind, double param, std::vector<double> pmf)
    : kind_(kind), param_(param), pmf_(std::move(pmf)) {
  mass_ = std::accumulate(pmf_.begin(), pmf_.end(), 0.0);
  if (!(mass_ >= 1.0 - kTailTolerance - 1e-12)) {
    throw ArgumentError("KDistribution: retained mass " + format_number(mass_) + " below 1 - 1e-10");
  }
  // Renormalize so the truncated law is itself a distribution.
  for (double& v : pmf_) v /= mass_;
}

KDistribution KDistribution::shifted_poisson(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ArgumentError("shifted-poisson: lambda must be positive");
  auto f = [lambda](int k) {
    const int n = k - 1;
    return std::exp(-lambda + n * std::log(lambda) - std::lgamma(n + 1.0));
  };
  return KDistribution(Kind::shifted_poisson, lambda, truncate_tail(f, static_cast<int>(lambda) + 2));
}

KDistribution KDistribution::geometric(double success) {
  if (!(success > 0.0 && success <= 1.0)) throw ArgumentError("geometric: success probability must lie in (0, 1]");
  if (success == 1.0) return KDistribution(Kind::geometric, 1.0, {1.0});
  auto f = [success](int k) { return success * std::pow(1.0 - success, k - 1); };
  return KDistribution(Kind::geometric, success, truncate_tail(f, 1));
}

KDistribution KDistribution::explicit_pmf(std::vector<double> pmf) {
  if (pmf.empty()) throw ArgumentError("explicit K pmf: empty");
  for (double v : pmf) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("explicit K pmf: entries must be nonnegative");
  }
  const double mass = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  if (std::abs(mass - 1.0) > kTailTolerance) throw ArgumentError("explicit K pmf: mass must be 1 within 1e-10");
  while (pmf.size() > 1 && pmf.back() == 0.0) pmf.pop_back();
  return KDistribution(Kind::explicit_pmf, 0.0, std::move(pmf));
}

double KDistribution::pmf(int k) const {
  if (k < 1 || k > truncation()) return 0.0;
  return pmf_[k - 1];
}

int KDistribution::sample(Rng& rng) const { return categorical(pmf_, rng) + 1; }

std::string KDistribution::name() const {
  switch (kind_) {
    case Kind::shifted_poisson: return "shifted-poisson(" + format_number(param_) + ")";
    case Kind::geometric: return "geometric(" + format_number(param_) + ")";
    case Kind::explicit_pmf: return "explicit(K<=" + std::to_string(truncation()) + ")";
  }
  return "?";
}

// ------------------------------------------------------------------ PriorSpec

PriorSpec PriorSpec::uniform_gamma() { return PriorSpec(UniformGammaPrior{}); }

PriorSpec PriorSpec::beta_binomial(double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw ArgumentError("beta-binomial: shape parameters must be positive");
  return PriorSpec(BetaBinomialPrior{a, b});
}

PriorSpec PriorSpec::trunc_exp_decay(double kappa, std::optional<int> s_max) {
  if (!(kappa >= 2.0)) throw ArgumentError("trunc-exp-decay: kappa must be at least 2");
  if (s_max && *s_max < 1) throw ArgumentError("trunc-exp-decay: s_max must be at least 1");
  return PriorSpec(TruncExpDecayPrior{kappa, s_max});
}

PriorSpec PriorSpec::uniform_partition() { return PriorSpec(UniformPartitionPrior{}); }

PriorSpec PriorSpec::crp(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw ArgumentError("crp: theta must be positive");
  return PriorSpec(CrpPrior{theta});
}

PriorSpec PriorSpec::crp2(double sigma, double theta) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw ArgumentError("crp2: sigma must lie in (0, 1)");
  if (!(theta > -sigma) || !std::isfinite(theta)) throw ArgumentError("crp2: theta must exceed -sigma");
  return PriorSpec(Crp2Prior{sigma, theta});
}

PriorSpec PriorSpec::dir_mult(double alpha, KDistribution k) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ArgumentError("dir-mult: alpha must be positive");
  return PriorSpec(DirMultPrior{alpha, std::move(k)});
}

PriorSpec PriorSpec::balance_neutral(KDistribution k) { return PriorSpec(BalanceNeutralPrior{std::move(k)}); }

PriorSpec PriorSpec::table(ModelSpace space, int p, std::map<std::string, double> probs) {
  if (p < 1) throw ArgumentError("table prior: p must be positive");
  TablePrior t{space, p, {}};
  double total = 0.0;
  for (const auto& [key, prob] : probs) {
    if (!(prob >= 0.0) || !std::isfinite(prob)) throw ArgumentError("table prior: probabilities must be nonnegative");
    std::string canon;
    int model_p = 0;
    if (space == ModelSpace::hypercube) {
      const auto g = GammaVector::parse(key);
      canon = g.to_string();
      model_p = g.p();
    } else {
      const auto z = Partition::parse(key);
      canon = z.to_string();
      model_p = z.p();
    }
    if (model_p != p) throw ArgumentError("table prior: model '" + key + "' does not have p=" + std::to_string(p));
    if (t.probs.contains(canon)) throw ArgumentError("table prior: duplicate model '" + canon + "'");
    t.probs.emplace(canon, prob);
    total += prob;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ArgumentError("table prior: probabilities sum to " + format_number(total) + ", expected 1");
  }
  return PriorSpec(std::move(t));
}

ModelSpace PriorSpec::space() const noexcept {
  return std::visit(overloaded{
                        [](const UniformGammaPrior&) { return ModelSpace::hypercube; },
                        [](const BetaBinomialPrior&) { return ModelSpace::hypercube; },
                        [](const TruncExpDecayPrior&) { return ModelSpace::hypercube; },
                        [](const TablePrior& t) { return t.space; },
                        [](const auto&) { return ModelSpace::partition; },
                    },
                    family_);
}

std::string PriorSpec::family_name() const {
  return std::visit(overloaded{
                        [](const UniformGammaPrior&) { return std::string("uniform-gamma"); },
                        [](const BetaBinomialPrior&) { return std::string("beta-binomial"); },
                        [](const TruncExpDecayPrior&) { return std::string("trunc-exp-decay"); },
                        [](const UniformPartitionPrior&) { return std::string("uniform-partition"); },
                        [](const CrpPrior&) { return std::string("crp"); },
                        [](const Crp2Prior&) { return std::string("crp2"); },
                        [](const DirMultPrior&) { return std::string("dir-mult"); },
                        [](const BalanceNeutralPrior&) { return std::string("balance-neutral"); },
                        [](const TablePrior&) { return std::string("table"); },
                    },
                    family_);
}

std::string PriorSpec::label() const {
  return std::visit(
      overloaded{
          [](const UniformGammaPrior&) { return std::string("uniform-gamma"); },
          [](const BetaBinomialPrior& b) {
            return "beta-binomial(" + format_number(b.a) + "," + format_number(b.b) + ")";
          },
          [](const TruncExpDecayPrior& t) {
            return "trunc-exp-decay(kappa=" + format_number(t.kappa) +
                   (t.s_max ? ",s_max=" + std::to_string(*t.s_max) : std::string()) + ")";
          },
          [](const UniformPartitionPrior&) { return std::string("uniform-partition"); },
          [](const CrpPrior& c) { return "crp(" + format_number(c.theta) + ")"; },
          [](const Crp2Prior& c) { return "crp2(" + format_number(c.sigma) + "," + format_number(c.theta) + ")"; },
          [](const DirMultPrior& d) { return "dir-mult(" + format_number(d.alpha) + "," + d.k.name() + ")"; },
          [](const BalanceNeutralPrior& b) { return "balance-neutral(" + b.k.name() + ")"; },
          [](const TablePrior& t) { return "table(" + std::to_string(t.probs.size()) + " models)"; },
      },
      family_);
}

// ------------------------------------------------------------------------ pmf

double log_pmf(const PriorSpec& prior, const GammaVector& gamma) {
  const int p = gamma.p();
  const int s = gamma.size();
  return std::visit(overloaded{
                        [p](const UniformGammaPrior&) { return -p * std::log(2.0); },
                        [p, s](const BetaBinomialPrior& b) { return log_beta(b.a + s, b.b + p - s) - log_beta(b.a, b.b); },
                        [p, s](const TruncExpDecayPrior& t) {
                          if (s > s_max_for(t, p)) return kNegInf;
                          return -t.kappa * s * std::log(p) - trunc_exp_log_normalizer(t, p);
                        },
                        [&gamma, p](const TablePrior& t) {
                          if (t.space != ModelSpace::hypercube) {
                            throw ArgumentError("pmf: partition table prior evaluated on an inclusion vector");
                          }
                          require_table_p(t, p, "pmf");
                          const double v = lookup_table(t, gamma.to_string());
                          return v > 0.0 ? std::log(v) : kNegInf;
                        },
                        [&prior](const auto&) -> double {
                          throw ArgumentError("pmf: " + prior.family_name() + " is a partition prior");
                        },
                    },
                    prior.family());
}

double pmf(const PriorSpec& prior, const GammaVector& gamma) { return std::exp(log_pmf(prior, gamma)); }

double log_pmf(const PriorSpec& prior, const Partition& z) {
  const int p = z.p();
  const int k = z.k();
  const auto n = z.sizes();
  return std::visit(
      overloaded{
          [p](const UniformPartitionPrior&) {
            const double bell = bell_numbers(p)[p];
            if (!std::isfinite(bell)) throw CapacityError("uniform-partition: Bell number overflows");
            return -std::log(bell);
          },
          [&](const CrpPrior& c) {
            double lp = (k - 1) * std::log(c.theta) + std::lgamma(c.theta + 1.0) - std::lgamma(c.theta + p);
            for (int nl : n) lp += std::lgamma(static_cast<double>(nl));
            return lp;
          },
          [&](const Crp2Prior& c) {
            double lp = std::lgamma(c.theta + 1.0) - std::lgamma(c.theta + p);
            for (int l = 1; l < k; ++l) lp += std::log(c.theta + l * c.sigma);
            for (int nl : n) lp += std::lgamma(nl - c.sigma) - std::lgamma(1.0 - c.sigma);
            return lp;
          },
          [&](const DirMultPrior& d) {
            double block = 0.0;
            for (int nl : n) block += std::lgamma(d.alpha + nl) - std::lgamma(d.alpha);
            std::vector<double> terms;
            for (int K = k; K <= d.k.truncation(); ++K) {
              const double q = d.k.pmf(K);
              if (q <= 0.0) continue;
              terms.push_back(std::log(q) + log_falling(K, k) + std::lgamma(K * d.alpha) -
                              std::lgamma(K * d.alpha + p) + block);
            }
            return log_sum_exp(terms);
          },
          [&](const BalanceNeutralPrior& b) {
            std::vector<double> terms;
            for (int K = k; K <= b.k.truncation(); ++K) {
              const double q = b.k.pmf(K);
              if (q <= 0.0) continue;
              terms.push_back(std::log(q) + log_falling(K, k) - p * std::log(static_cast<double>(K)));
            }
            return log_sum_exp(terms);
          },
          [&](const TablePrior& t) {
            if (t.space != ModelSpace::partition) {
              throw ArgumentError("pmf: inclusion-vector table prior evaluated on a partition");
            }
            require_table_p(t, p, "pmf");
            const double v = lookup_table(t, z.to_string());
            return v > 0.0 ? std::log(v) : kNegInf;
          },
          [&prior](const auto&) -> double {
            throw ArgumentError("pmf: " + prior.family_name() + " is an inclusion-vector prior");
          },
      },
      prior.family());
}

double pmf(const PriorSpec& prior, const Partition& z) { return std::exp(log_pmf(prior, z)); }

// ------------------------------------------------------------------ summaries

std::vector<double> inclusion_probabilities(const PriorSpec& prior, int p) {
  require_space(prior, ModelSpace::hypercube, "inclusion_probabilities");
  if (p < 1) throw ArgumentError("inclusion_probabilities: p must be positive");
  if (const auto* t = prior.get<TablePrior>()) {
    require_table_p(*t, p, "inclusion_probabilities");
    std::vector<double> q(p, 0.0);
    for (const auto& [key, prob] : t->probs) {
      const auto g = GammaVector::parse(key);
      for (int i = 0; i < p; ++i) {
        if (g[i]) q[i] += prob;
      }
    }
    return q;
  }
  return std::vector<double>(p, marginal_inclusion(prior, p));
}

double marginal_inclusion(const PriorSpec& prior, int p) {
  require_space(prior, ModelSpace::hypercube, "marginal_inclusion");
  if (p < 1) throw ArgumentError("marginal_inclusion: p must be positive");
  return std::visit(overloaded{
                        [](const UniformGammaPrior&) { return 0.5; },
                        [](const BetaBinomialPrior& b) { return b.a / (b.a + b.b); },
                        [p](const TruncExpDecayPrior& t) {
                          // Hierarchical size representation: sum_s (s/p) q(s).
                          const int smax = s_max_for(t, p);
                          const double logz = trunc_exp_log_normalizer(t, p);
                          double acc = 0.0;
                          for (int s = 1; s <= smax; ++s) {
                            acc += (static_cast<double>(s) / p) *
                                   std::exp(log_binomial(p, s) - t.kappa * s * std::log(p) - logz);
                          }
                          return acc;
                        },
                        [&prior, p](const TablePrior&) {
                          const auto q = inclusion_probabilities(prior, p);
                          for (double v : q) {
                            if (std::abs(v - q.front()) > 1e-12) {
                              throw ArgumentError("marginal_inclusion: table prior is not exchangeable");
                            }
                          }
                          return q.front();
                        },
                        [](const auto&) -> double { throw ArgumentError("marginal_inclusion: not a hypercube prior"); },
                    },
                    prior.family());
}

double coclustering(const PriorSpec& prior, std::optional<int> p) {
  require_space(prior, ModelSpace::partition, "coclustering");
  return std::visit(
      overloaded{
          [p](const UniformPartitionPrior&) {
            if (!p) throw ArgumentError("coclustering: uniform-partition needs p");
            if (*p < 2) throw ArgumentError("coclustering: p must be at least 2");
            const auto bell = bell_numbers(*p);
            return bell[*p - 1] / bell[*p];
          },
          [](const CrpPrior& c) { return 1.0 / (c.theta + 1.0); },
          [](const Crp2Prior& c) { return (1.0 - c.sigma) / (c.theta + 1.0); },
          [](const DirMultPrior& d) {
            return d.k.expect([&d](int K) { return (1.0 + d.alpha) / (d.alpha * K + 1.0); });
          },
          [](const BalanceNeutralPrior& b) { return b.k.expect([](int K) { return 1.0 / K; }); },
          [&prior, p](const TablePrior& t) {
            if (p) require_table_p(t, *p, "coclustering");
            if (t.p < 2) throw ArgumentError("coclustering: p must be at least 2");
            const auto c = coclustering_matrix(prior, t.p);
            double first = c(0, 1);
            for (int i = 0; i < t.p; ++i) {
              for (int j = i + 1; j < t.p; ++j) {
                if (std::abs(c(i, j) - first) > 1e-12) {
                  throw ArgumentError("coclustering: table prior does not have a common co-clustering probability");
                }
              }
            }
            return first;
          },
          [](const auto&) -> double { throw ArgumentError("coclustering: not a partition prior"); },
      },
      prior.family());
}

Eigen::MatrixXd coclustering_matrix(const PriorSpec& prior, int p) {
  require_space(prior, ModelSpace::partition, "coclustering_matrix");
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(p, p);
  if (const auto* t = prior.get<TablePrior>()) {
    require_table_p(*t, p, "coclustering_matrix");
    c.setZero();
    for (const auto& [key, prob] : t->probs) {
      const auto z = Partition::parse(key);
      for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
          if (z.together(i, j)) c(i, j) += prob;
        }
      }
    }
    return c;
  }
  const double v = coclustering(prior, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i != j) c(i, j) = v;
    }
  }
  return c;
}

// ------------------------------------------------------------------- sampling

GammaVector sample_gamma(const PriorSpec& prior, int p, Rng& rng) {
  require_space(prior, ModelSpace::hypercube, "sample_gamma");
  if (p < 1 || p > kMaxGammaP) throw ArgumentError("sample_gamma: p out of range");
  auto bernoulli_bits = [&](double w) {
    std::bernoulli_distribution coin(w);
    GammaVector g(p);
    std::uint64_t mask = 0;
    for (int i = 0; i < p; ++i) {
      if (coin(rng)) mask |= 1ULL << i;
    }
    return GammaVector(p, mask);
  };
  return std::visit(
      overloaded{
          [&](const UniformGammaPrior&) { return bernoulli_bits(0.5); },
          [&](const BetaBinomialPrior& b) {
            std::gamma_distribution<double> ga(b.a, 1.0);
            std::gamma_distribution<double> gb(b.b, 1.0);
            const double x = ga(rng);
            const double y = gb(rng);
            return bernoulli_bits(x / (x + y));
          },
          [&](const TruncExpDecayPrior& t) {
            const int smax = s_max_for(t, p);
            std::vector<double> w;
            const double logz = trunc_exp_log_normalizer(t, p);
            for (int s = 0; s <= smax; ++s) w.push_back(std::exp(log_binomial(p, s) - t.kappa * s * std::log(p) - logz));
            const int s = categorical(w, rng);
            std::vector<int> idx(p);
            std::iota(idx.begin(), idx.end(), 0);
            std::uint64_t mask = 0;
            // Partial Fisher-Yates for a uniform s-subset.
            for (int i = 0; i < s; ++i) {
              std::uniform_int_distribution<int> pick(i, p - 1);
              std::swap(idx[i], idx[pick(rng)]);
              mask |= 1ULL << idx[i];
            }
            return GammaVector(p, mask);
          },
          [&](const TablePrior& t) {
            require_table_p(t, p, "sample_gamma");
            std::vector<double> w;
            std::vector<const std::string*> keys;
            for (const auto& [key, prob] : t.probs) {
              keys.push_back(&key);
              w.push_back(prob);
            }
            return GammaVector::parse(*keys[categorical(w, rng)]);
          },
          [](const auto&) -> GammaVector { throw ArgumentError("sample_gamma: not a hypercube prior"); },
      },
      prior.family());
}

Partition sample_partition(const PriorSpec& prior, int p, Rng& rng) {
  require_space(prior, ModelSpace::partition, "sample_partition");
  if (p < 1) throw ArgumentError("sample_partition: p must be positive");
  std::vector<int> labels(p, 1);
  std::visit(
      overloaded{
          [&](const UniformPartitionPrior&) {
            // completions[r][m]: restricted growth completions of r more
            // entries when the running maximum is m.
            std::vector<std::vector<double>> completions(p, std::vector<double>(p + 2, 0.0));
            for (int m = 0; m <= p + 1; ++m) completions[0][m] = 1.0;
            for (int r = 1; r < p; ++r) {
              for (int m = 1; m + 1 <= p + 1; ++m) completions[r][m] = m * completions[r - 1][m] + completions[r - 1][m + 1];
            }
            int maxl = 1;
            for (int i = 1; i < p; ++i) {
              const int rest = p - 1 - i;
              std::vector<double> w(maxl + 1, completions[rest][maxl]);
              w[maxl] = completions[rest][maxl + 1];
              const int choice = categorical(w, rng);
              labels[i] = choice + 1;
              if (labels[i] > maxl) maxl = labels[i];
            }
          },
          [&](const CrpPrior& c) {
            std::vector<double> counts{1.0};
            for (int i = 1; i < p; ++i) {
              std::vector<double> w = counts;
              w.push_back(c.theta);
              const int choice = categorical(w, rng);
              if (choice == static_cast<int>(counts.size())) counts.push_back(0.0);
              counts[choice] += 1.0;
              labels[i] = choice + 1;
            }
          },
          [&](const Crp2Prior& c) {
            std::vector<double> counts{1.0};
            for (int i = 1; i < p; ++i) {
              std::vector<double> w;
              for (double n : counts) w.push_back(n - c.sigma);
              w.push_back(c.theta + static_cast<double>(counts.size()) * c.sigma);
              const int choice = categorical(w, rng);
              if (choice == static_cast<int>(counts.size())) counts.push_back(0.0);
              counts[choice] += 1.0;
              labels[i] = choice + 1;
            }
          },
          [&](const DirMultPrior& d) {
            const int K = d.k.sample(rng);
            std::gamma_distribution<double> g(d.alpha, 1.0);
            std::vector<double> w(K);
            for (double& v : w) v = g(rng);
            // Tiny alpha can underflow every draw; fall back to one atom.
            if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) w[0] = 1.0;
            for (int i = 0; i < p; ++i) labels[i] = categorical(w, rng) + 1;
          },
          [&](const BalanceNeutralPrior& b) {
            const int K = b.k.sample(rng);
            std::uniform_int_distribution<int> u(1, K);
            for (int i = 0; i < p; ++i) labels[i] = u(rng);
          },
          [&](const TablePrior& t) {
            require_table_p(t, p, "sample_partition");
            std::vector<double> w;
            std::vector<const std::string*> keys;
            for (const auto& [key, prob] : t.probs) {
              keys.push_back(&key);
              w.push_back(prob);
            }
            const auto z = Partition::parse(*keys[categorical(w, rng)]);
            std::copy(z.labels().begin(), z.labels().end(), labels.begin());
          },
          [](const auto&) { throw ArgumentError("sample_partition: not a partition prior"); },
      },
      prior.family());
  return canonicalize(labels);
}

// ------------------------------------------------------- hierarchical uniform

PriorSpec hierarchical_uniform(int p, std::span<const double> q) {
  if (p < 1 || p > 8) throw CapacityError("hierarchical_uniform: explicit construction supports 1 <= p <= 8");
  if (static_cast<int>(q.size()) != p) throw ArgumentError("hierarchical_uniform: q must have p entries");
  const double total = std::accumulate(q.begin(), q.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) throw ArgumentError("hierarchical_uniform: q must sum to 1");
  const auto stirling = stirling2_row(p);
  std::map<std::string, double> probs;
  for (const auto& z : enumerate_partitions(p)) {
    const double w = q[z.k() - 1] / stirling[z.k()];
    if (w > 0.0) probs.emplace(z.to_string(), w);
  }
  // Re-normalize away the rounding of q / S(p, k) sums.
  double mass = 0.0;
  for (const auto& [key, w] : probs) mass += w;
  for (auto& [key, w] : probs) w /= mass;
  return PriorSpec::table(ModelSpace::partition, p, std::move(probs));
}

PriorSpec hierarchical_uniform_geometric(int p, double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw ArgumentError("hierarchical_uniform: r must be positive");
  std::vector<double> q(p);
  for (int k = 1; k <= p; ++k) q[k - 1] = std::pow(r, k - 1);
  const double total = std::accumulate(q.begin(), q.end(), 0.0);
  for (double& v : q) v /= total;
  return hierarchical_uniform(p, q);
}

// ----------------------------------------------------------------- calibrate

double calibration_summary(const PriorSpec& prior, std::optional<int> p) {
  if (prior.space() == ModelSpace::hypercube) {
    if (!p) throw ArgumentError("calibrate: hypercube priors need p");
    return marginal_inclusion(prior, *p);
  }
  return coclustering(prior, p);
}

std::string default_free_parameter(const PriorSpec& prior) {
  return std::visit(overloaded{
                        [](const BetaBinomialPrior&) { return std::string("ab"); },
                        [](const TruncExpDecayPrior&) { return std::string("kappa"); },
                        [](const CrpPrior&) { return std::string("theta"); },
                        [](const Crp2Prior&) { return std::string("theta"); },
                        [](const DirMultPrior& d) {
                          return std::string(d.k.kind() == KDistribution::Kind::geometric ? "s" : "lambda");
                        },
                        [](const BalanceNeutralPrior& b) {
                          return std::string(b.k.kind() == KDistribution::Kind::geometric ? "s" : "lambda");
                        },
                        [](const TablePrior&) { return std::string("r"); },
                        [](const auto&) { return std::string(); },
                    },
                    prior.family());
}

namespace {

KDistribution rebuild_k(const KDistribution& k, double value) {
  switch (k.kind()) {
    case KDistribution::Kind::shifted_poisson: return KDistribution::shifted_poisson(value);
    case KDistribution::Kind::geometric: return KDistribution::geometric(value);
    case KDistribution::Kind::explicit_pmf: break;
  }
  throw ArgumentError("calibrate: explicit K distributions have no free parameter");
}

struct Search {
  std::function<PriorSpec(double)> build;
  double lo;
  double hi;
  bool log_scale;
};

CalibrationResult bisect(const Search& s, const std::string& free, double target, std::optional<int> p) {
  auto f = [&](double x) { return calibration_summary(s.build(x), p); };
  const double flo = f(s.lo);
  const double fhi = f(s.hi);
  const double range_lo = std::min(flo, fhi);
  const double range_hi = std::max(flo, fhi);
  if (target < range_lo || target > range_hi) {
    throw InfeasibleError("calibrate: target " + format_number(target) + " unreachable by free parameter '" + free + "'",
                          range_lo, range_hi);
  }
  const bool increasing = fhi > flo;
  double lo = s.lo;
  double hi = s.hi;
  double mid = lo;
  double fm = flo;
  for (int iter = 0; iter < 400; ++iter) {
    mid = s.log_scale ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    fm = f(mid);
    if (fm == target) break;
    if ((fm < target) == increasing) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid))) break;
  }
  return CalibrationResult{s.build(mid), free, mid, fm, false};
}

CalibrationResult closed(PriorSpec prior, const std::string& free, double value, std::optional<int> p) {
  const double achieved = calibration_summary(prior, p);
  return CalibrationResult{std::move(prior), free, value, achieved, true};
}

}  // namespace

CalibrationResult calibrate(const CalibrationRequest& req) {
  const double t = req.target;
  if (!(t > 0.0 && t < 1.0)) throw ArgumentError("calibrate: target must lie in (0, 1)");
  const std::string free = req.free.empty() ? default_free_parameter(req.base) : req.free;
  if (free.empty()) {
    throw ArgumentError("calibrate: family " + req.base.family_name() + " has no free hyperparameter");
  }
  const auto& base = req.base;
  auto bad_free = [&]() {
    return ArgumentError("calibrate: '" + free + "' is not a free hyperparameter of " + base.family_name());
  };

  if (const auto* b = base.get<BetaBinomialPrior>()) {
    if (free == "ab") return closed(PriorSpec::beta_binomial(2.0 * t, 2.0 - 2.0 * t), free, 2.0 * t, req.p);
    if (free == "a") return closed(PriorSpec::beta_binomial(t * b->b / (1.0 - t), b->b), free, t * b->b / (1.0 - t), req.p);
    if (free == "b") return closed(PriorSpec::beta_binomial(b->a, b->a * (1.0 - t) / t), free, b->a * (1.0 - t) / t, req.p);
    throw bad_free();
  }
  if (const auto* e = base.get<TruncExpDecayPrior>()) {
    if (free != "kappa") throw bad_free();
    if (!req.p) throw ArgumentError("calibrate: trunc-exp-decay needs p");
    const auto smax = e->s_max;
    return bisect({[smax](double k) { return PriorSpec::trunc_exp_decay(k, smax); }, 2.0, 200.0, true}, free, t, req.p);
  }
  if (base.get<CrpPrior>()) {
    if (free != "theta") throw bad_free();
    const double theta = (1.0 - t) / t;
    return closed(PriorSpec::crp(theta), free, theta, req.p);
  }
  if (const auto* c = base.get<Crp2Prior>()) {
    if (free == "theta") {
      const double theta = (1.0 - c->sigma) / t - 1.0;
      return closed(PriorSpec::crp2(c->sigma, theta), free, theta, req.p);
    }
    if (free == "sigma") {
      const double sigma = 1.0 - t * (c->theta + 1.0);
      const double smin = std::max(0.0, -c->theta);
      if (!(sigma > smin && sigma < 1.0)) {
        throw InfeasibleError("calibrate: crp2 sigma cannot reach target " + format_number(t), 0.0,
                              (1.0 - smin) / (c->theta + 1.0));
      }
      return closed(PriorSpec::crp2(sigma, c->theta), free, sigma, req.p);
    }
    throw bad_free();
  }
  if (const auto* d = base.get<DirMultPrior>()) {
    const double alpha = d->alpha;
    const KDistribution k = d->k;
    if (free == "alpha") {
      return bisect({[k](double a) { return PriorSpec::dir_mult(a, k); }, 1e-6, 1e6, true}, free, t, req.p);
    }
    if (free == "lambda" && k.kind() == KDistribution::Kind::shifted_poisson) {
      return bisect({[alpha, k](double x) { return PriorSpec::dir_mult(alpha, rebuild_k(k, x)); }, 1e-6, 1e3, true}, free,
                    t, req.p);
    }
    if (free == "s" && k.kind() == KDistribution::Kind::geometric) {
      return bisect({[alpha, k](double x) { return PriorSpec::dir_mult(alpha, rebuild_k(k, x)); }, 1e-3, 1.0, true}, free,
                    t, req.p);
    }
    throw bad_free();
  }
  if (const auto* bn = base.get<BalanceNeutralPrior>()) {
    const KDistribution k = bn->k;
    if (free == "lambda" && k.kind() == KDistribution::Kind::shifted_poisson) {
      return bisect({[k](double x) { return PriorSpec::balance_neutral(rebuild_k(k, x)); }, 1e-6, 1e3, true}, free, t,
                    req.p);
    }
    if (free == "s" && k.kind() == KDistribution::Kind::geometric) {
      return bisect({[k](double x) { return PriorSpec::balance_neutral(rebuild_k(k, x)); }, 1e-3, 1.0, true}, free, t,
                    req.p);
    }
    throw bad_free();
  }
  if (const auto* tab = base.get<TablePrior>()) {
    if (free != "r" || tab->space != ModelSpace::partition) throw bad_free();
    const int p = req.p.value_or(tab->p);
    return bisect({[p](double r) { return hierarchical_uniform_geometric(p, r); }, 1e-6, 1e6, true}, free, t, p);
  }
  throw bad_free();
}

double weibull_crp_coclustering(double shape, double scale, int nodes) {
  if (!(shape > 0.0 && scale > 0.0)) throw ArgumentError("weibull: shape and scale must be positive");
  // theta = scale * s, s has density shape s^(shape-1) exp(-s^shape);
  // the mass beyond s^shape = 40 is below e^-40.
  const double upper = std::pow(40.0, 1.0 / shape);
  const auto rule = gauss_legendre(nodes);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double s = 0.5 * upper * (rule.nodes[i] + 1.0);
    const double density = shape * std::pow(s, shape - 1.0) * std::exp(-std::pow(s, shape));
    acc += rule.weights[i] * density / (scale * s + 1.0);
  }
  return 0.5 * upper * acc;
}

}  // namespace riskcal
