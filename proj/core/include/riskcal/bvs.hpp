#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "riskcal/estimators.hpp"
#include "riskcal/losses.hpp"
#include "riskcal/model_space.hpp"
#include "riskcal/priors.hpp"
#include "riskcal/rng.hpp"

namespace riskcal {

struct LinearDataset {
  Eigen::MatrixXd X;  // n x p
  Eigen::VectorXd y;

  int n() const noexcept { return static_cast<int>(X.rows()); }
  int p() const noexcept { return static_cast<int>(X.cols()); }
  void validate() const;
};

enum class LikelihoodKind { g_prior, zellner_siow };

struct LikelihoodConfig {
  LikelihoodKind kind = LikelihoodKind::g_prior;
  std::optional<double> g;  // g-prior; defaults to n
  int nodes = 64;           // Zellner-Siow quadrature nodes per panel
};

// Precomputes the centered Gram matrix so every model costs one small
// factorization.
class MarginalLikelihood {
 public:
  MarginalLikelihood(const LinearDataset& data, LikelihoodConfig cfg);

  // log Bayes factor against the null model; -inf when |gamma| > n - 3.
  double log_bf(const GammaVector& gamma) const;
  // Centered R^2 of the least-squares fit on the selected columns.
  double r_squared(const GammaVector& gamma, bool* rank_deficient = nullptr) const;

  int n() const noexcept { return n_; }
  int p() const noexcept { return static_cast<int>(gram_.rows()); }

 private:
  double g_prior_log_bf(int k, double r2) const;
  double zs_log_bf(int k, double r2) const;

  LikelihoodConfig cfg_;
  int n_;
  double g_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd xty_;
  double yty_;
};

double log_marginal(const LinearDataset& data, const GammaVector& gamma, const LikelihoodConfig& cfg = {});

// Log Bayes factors of every model in lexicographic order.
std::vector<double> all_log_marginals(const LinearDataset& data, const LikelihoodConfig& cfg = {});

GammaPosterior posterior_from_log_marginals(const std::vector<double>& log_bf, const std::vector<double>& log_prior,
                                            int p);
GammaPosterior enumerate_posterior(const LinearDataset& data, const PriorSpec& prior, const LikelihoodConfig& cfg = {});

LinearDataset simulate_dataset(int n, int p, const std::vector<double>& beta, double sigma2, Rng& rng);

struct NamedPrior {
  std::string name;
  PriorSpec prior;
};

struct SimulationConfig {
  std::vector<int> n{20, 60, 1000};
  int p = 10;
  std::vector<double> beta{1, 1, 1, -1, -1, -1, 0, 0, 0, 0};
  double sigma2 = 9.0;
  int replicates = 200;
  std::vector<NamedPrior> priors;
  std::vector<LossSpec> losses;
  std::string reference_prior = "pi_1.0";
  std::string reference_loss = "GH(1)";
  std::uint64_t seed = 20240601;
  LikelihoodConfig likelihood;
  int threads = 1;

  void validate() const;
};

// Beta-binomial(a, 2 - a) for a = 0.7..1.3 plus the uniform prior;
// GH(0.7..1.3) plus zero-one.
SimulationConfig default_simulation_config();

struct ReportTable {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  Eigen::MatrixXd mean;
  Eigen::MatrixXd se;

  double at(const std::string& row, const std::string& col) const;
  std::string mean_csv() const;
  std::string se_csv() const;
};

struct ScenarioReport {
  int n = 0;
  ReportTable distance;  // Hamming distance to the reference estimator
  ReportTable size;      // model size
};

struct SimulationReport {
  std::vector<ScenarioReport> scenarios;
};

SimulationReport run_simulation(const SimulationConfig& cfg);

nlohmann::json simulation_config_to_json(const SimulationConfig& cfg);
SimulationConfig simulation_config_from_json(const nlohmann::json& j);

}  // namespace riskcal
