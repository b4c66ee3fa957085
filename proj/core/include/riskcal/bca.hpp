#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "riskcal/bvs.hpp"
#include "riskcal/estimators.hpp"
#include "riskcal/model_space.hpp"

namespace riskcal {

// Normal-inverse-gamma base: mu | s2 ~ N(m0, s2 / k0), s2 ~ IG(a0, b0).
struct NigBase {
  double m0 = 0.0;
  double k0 = 0.01;
  double a0 = 2.0;
  double b0 = 1.0;

  // m0 = mean, b0 = variance of the data; k0 = 0.01, a0 = 2.
  static NigBase empirical(std::span<const double> data);
  void validate() const;
};

// Log Student-t posterior predictive density of x given sufficient
// statistics (count, sum, sum of squares) of a cluster.
double nig_log_predictive(const NigBase& base, double x, int count, double sum, double sumsq);

struct DPMMConfig {
  double theta = 1.0;
  std::optional<NigBase> base;  // empirical defaults when absent
  int iterations = 20'000;
  int burn_in = 5'000;
  int thin = 5;
  std::uint64_t seed = 0;
  bool prior_only = false;  // drop the likelihood terms

  void validate() const;
};

struct PartitionDrawSet {
  std::vector<Partition> draws;
  std::string provenance;
};

// Collapsed Gibbs sampler for a DP mixture of normals.
PartitionDrawSet dpmm_sample(std::span<const double> data, const DPMMConfig& cfg);

Eigen::MatrixXd coclustering_matrix(const PartitionDrawSet& draws);

struct GalaxyConfig {
  std::vector<double> prior_a{0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3};  // theta = a / (2 - a)
  std::vector<double> loss_a{0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3};
  bool include_vi = true;
  bool include_vi_lb = true;
  DPMMConfig mcmc;
  SearchConfig search;
  int repeats = 5;
  std::uint64_t seed = 20240601;
  int threads = 1;
};

struct GalaxyReport {
  std::vector<std::string> rows;  // "GB(0.7)", ..., "VI", "VI-LB"
  std::vector<std::string> cols;  // "pi_0.7", ...
  std::vector<Eigen::MatrixXd> distance;  // per repeat, Binder distance to the reference
  std::vector<Eigen::MatrixXd> clusters;  // per repeat, cluster counts
  std::vector<std::vector<std::vector<Partition>>> estimates;  // [repeat][row][col]

  Eigen::MatrixXd mean_distance() const;
  Eigen::MatrixXd mean_clusters() const;
  std::string distance_csv() const;
  std::string clusters_csv() const;
  int row(const std::string& name) const;
  int col(const std::string& name) const;
};

GalaxyReport galaxy_pipeline(std::span<const double> data, const GalaxyConfig& cfg);

}  // namespace riskcal
