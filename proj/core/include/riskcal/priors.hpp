#pragma once

#include <Eigen/Core>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "riskcal/model_space.hpp"
#include "riskcal/rng.hpp"

namespace riskcal {

enum class ModelSpace { hypercube, partition };

std::string_view to_string(ModelSpace s);

// Tail mass left out of every truncated expectation over K.
inline constexpr double kTailTolerance = 1e-10;

// Distribution of the number of mixture components K on {1, 2, ...}.
class KDistribution {
 public:
  enum class Kind { shifted_poisson, geometric, explicit_pmf };

  // K - 1 ~ Poisson(lambda).
  static KDistribution shifted_poisson(double lambda);
  // P(K = k) = s (1 - s)^(k - 1).
  static KDistribution geometric(double success);
  // pmf[k - 1] = P(K = k); must carry mass >= 1 - kTailTolerance.
  static KDistribution explicit_pmf(std::vector<double> pmf);

  Kind kind() const noexcept { return kind_; }
  double parameter() const noexcept { return param_; }
  const std::vector<double>& table() const noexcept { return pmf_; }

  double pmf(int k) const;
  // Largest K kept in truncated sums; the mass beyond it is at most
  // kTailTolerance.
  int truncation() const noexcept { return static_cast<int>(pmf_.size()); }
  double retained_mass() const noexcept { return mass_; }

  template <class F>
  double expect(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < pmf_.size(); ++i) acc += pmf_[i] * f(static_cast<int>(i) + 1);
    return acc;
  }

  int sample(Rng& rng) const;
  std::string name() const;

 private:
  KDistribution(Kind kind, double param, std::vector<double> pmf);
  Kind kind_;
  double param_;
  std::vector<double> pmf_;  // truncated
  double mass_;
};

struct UniformGammaPrior {};
struct BetaBinomialPrior {
  double a = 1.0;
  double b = 1.0;
};
// pi(gamma) proportional to p^(-kappa |gamma|) 1(|gamma| <= s_max).
struct TruncExpDecayPrior {
  double kappa = 2.0;
  std::optional<int> s_max;  // defaults to p
};
struct UniformPartitionPrior {};
struct CrpPrior {
  double theta = 1.0;
};
struct Crp2Prior {
  double sigma = 0.5;
  double theta = 1.0;
};
struct DirMultPrior {
  double alpha = 1.0;
  KDistribution k = KDistribution::geometric(0.5);
};
struct BalanceNeutralPrior {
  KDistribution k = KDistribution::geometric(0.5);
};
// Explicit model -> probability map keyed by canonical text form.
struct TablePrior {
  ModelSpace space = ModelSpace::hypercube;
  int p = 1;
  std::map<std::string, double> probs;
};

class PriorSpec {
 public:
  using Family = std::variant<UniformGammaPrior, BetaBinomialPrior, TruncExpDecayPrior, UniformPartitionPrior,
                              CrpPrior, Crp2Prior, DirMultPrior, BalanceNeutralPrior, TablePrior>;

  static PriorSpec uniform_gamma();
  static PriorSpec beta_binomial(double a, double b);
  static PriorSpec trunc_exp_decay(double kappa, std::optional<int> s_max = std::nullopt);
  static PriorSpec uniform_partition();
  static PriorSpec crp(double theta);
  static PriorSpec crp2(double sigma, double theta);
  static PriorSpec dir_mult(double alpha, KDistribution k);
  static PriorSpec balance_neutral(KDistribution k);
  static PriorSpec table(ModelSpace space, int p, std::map<std::string, double> probs);

  const Family& family() const noexcept { return family_; }
  template <class T>
  const T* get() const noexcept {
    return std::get_if<T>(&family_);
  }

  ModelSpace space() const noexcept;
  // Family tag used in JSON: "beta-binomial", "crp", ...
  std::string family_name() const;
  // Human-readable tag with hyperparameters, e.g. "crp(theta=1)".
  std::string label() const;

 private:
  explicit PriorSpec(Family f) : family_(std::move(f)) {}
  Family family_;
};

// Exact prior probability. Models outside the support get 0.
double pmf(const PriorSpec& prior, const GammaVector& gamma);
double pmf(const PriorSpec& prior, const Partition& z);
double log_pmf(const PriorSpec& prior, const GammaVector& gamma);
double log_pmf(const PriorSpec& prior, const Partition& z);

// P(gamma_i = 1) for every i.
std::vector<double> inclusion_probabilities(const PriorSpec& prior, int p);
// Common inclusion probability of an exchangeable hypercube prior.
double marginal_inclusion(const PriorSpec& prior, int p);

// Prior co-clustering P(z_i = z_j), i != j. p is needed only by families
// whose value depends on it (uniform-partition, table).
double coclustering(const PriorSpec& prior, std::optional<int> p = std::nullopt);
// Pairwise co-clustering probabilities; exact enumeration for tables.
Eigen::MatrixXd coclustering_matrix(const PriorSpec& prior, int p);

GammaVector sample_gamma(const PriorSpec& prior, int p, Rng& rng);
Partition sample_partition(const PriorSpec& prior, int p, Rng& rng);

// Casella-style hierarchical uniform prior: q over the number of clusters,
// uniform over partitions given the count. q[k - 1] = P(k clusters).
PriorSpec hierarchical_uniform(int p, std::span<const double> q);
// q(k) proportional to r^(k - 1).
PriorSpec hierarchical_uniform_geometric(int p, double r);

struct CalibrationRequest {
  // Family and fixed hyperparameters; the free one is overwritten.
  PriorSpec base = PriorSpec::crp(1.0);
  // "theta", "sigma", "alpha", "a", "b", "ab" (b = 2 - a), "kappa",
  // "lambda" / "s" (parameter of K), "r" (hierarchical uniform).
  std::string free;
  double target = 0.5;
  std::optional<int> p;
};

struct CalibrationResult {
  PriorSpec prior;
  std::string free;
  double value;
  double achieved;  // summary at the calibrated value
  bool closed_form;
};

// Solve summary(prior) = target, where the summary is the inclusion
// probability (hypercube) or co-clustering probability (partitions).
CalibrationResult calibrate(const CalibrationRequest& request);

// Default free hyperparameter of a family.
std::string default_free_parameter(const PriorSpec& prior);

// Co-clustering summary of the prior the request calibrates.
double calibration_summary(const PriorSpec& prior, std::optional<int> p);

// E[1 / (theta + 1)] for theta ~ Weibull(shape, scale), by Gauss-Legendre
// quadrature in the standardized variable.
double weibull_crp_coclustering(double shape, double scale, int nodes = 64);

}  // namespace riskcal
