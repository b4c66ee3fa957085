#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "riskcal/model_space.hpp"

namespace riskcal {

// Exact posterior over {0,1}^p; probs[i] belongs to the model with lex
// index i.
struct GammaPosterior {
  int p = 0;
  std::vector<double> probs;
  std::vector<double> inclusion;  // q_i = P(gamma_i = 1 | data)

  static GammaPosterior from_table(int p, std::vector<double> probs);
  double prob(const GammaVector& g) const { return probs[g.lex_index()]; }
};

// Posterior partition draws and their co-clustering matrix.
struct PartitionPosterior {
  std::vector<Partition> draws;
  Eigen::MatrixXd coclustering;

  static PartitionPosterior from_draws(std::vector<Partition> draws);
};

// C_ij = fraction of draws with z_i = z_j.
Eigen::MatrixXd coclustering_from_draws(std::span<const Partition> draws);
// Symmetric, unit diagonal, entries in [0, 1].
void validate_coclustering(const Eigen::MatrixXd& c);

// gamma_i = 1 iff q_i > a / 2.
GammaVector quantile_probability_model(std::span<const double> q, double a);
inline GammaVector median_probability_model(std::span<const double> q) { return quantile_probability_model(q, 1.0); }
// Posterior mode; ties go to the simpler model, then lexicographic.
GammaVector highest_probability_model(const GammaPosterior& post);

// Posterior GH(a) risk through the marginal inclusion probabilities.
double gh_risk_posterior(std::span<const double> q, const GammaVector& action, double a);

// Check-function form sum_{i<j} rho_{(2-a)/2}(1(zhat_i = zhat_j) - C_ij).
double gb_risk_posterior(const Eigen::MatrixXd& c, const Partition& zhat, double a);
// Direct form sum_{i<j} a C_ij 1(split) + (2 - a)(1 - C_ij) 1(merged).
double gb_risk_posterior_direct(const Eigen::MatrixXd& c, const Partition& zhat, double a);

// Sample mean of vi_loss(draw, zhat).
double vi_risk_posterior(std::span<const Partition> draws, const Partition& zhat);
// H = mean over draws of (1/p) sum_i log2 |cluster of i|.
double vi_entropy_term(std::span<const Partition> draws);
// Jensen lower bound; h is added when given, otherwise it is omitted.
double vi_lb_risk_posterior(const Eigen::MatrixXd& c, const Partition& zhat, std::optional<double> h = std::nullopt);

// Incremental view of a partial allocation used by the greedy search.
// Slots are cluster ids in [0, p); an empty slot stands for a new cluster.
class AllocationState {
 public:
  explicit AllocationState(int p);
  virtual ~AllocationState() = default;

  int p() const noexcept { return static_cast<int>(slot_.size()); }
  int slot_of(int item) const { return slot_[item]; }
  int slot_size(int slot) const { return size_[slot]; }
  int clusters() const noexcept { return clusters_; }
  Partition partition() const;  // requires every item allocated

  // Change of the partial risk if item joined slot. Only differences
  // between slots for the same item are meaningful.
  virtual double join_cost(int item, int slot) const = 0;

  void add(int item, int slot);
  void remove(int item);

 protected:
  virtual void on_add(int item, int slot) = 0;
  virtual void on_remove(int item, int slot) = 0;
  const std::vector<int>& members(int slot) const { return members_[slot]; }
  const std::vector<int>& slots() const { return slot_; }

 private:
  std::vector<int> slot_;  // -1 while unallocated
  std::vector<int> size_;
  std::vector<std::vector<int>> members_;
  int clusters_ = 0;
};

class PartitionObjective {
 public:
  virtual ~PartitionObjective() = default;
  virtual int p() const = 0;
  virtual double risk(const Partition& z) const = 0;
  virtual std::unique_ptr<AllocationState> start() const = 0;
};

// Posterior GB(a) risk from a co-clustering matrix.
class GbObjective final : public PartitionObjective {
 public:
  GbObjective(Eigen::MatrixXd c, double a);
  int p() const override { return static_cast<int>(c_.rows()); }
  double risk(const Partition& z) const override;
  std::unique_ptr<AllocationState> start() const override;

 private:
  Eigen::MatrixXd c_;
  double a_;
};

// VI lower bound from a co-clustering matrix (h omitted).
class ViLbObjective final : public PartitionObjective {
 public:
  explicit ViLbObjective(Eigen::MatrixXd c);
  int p() const override { return static_cast<int>(c_.rows()); }
  double risk(const Partition& z) const override;
  std::unique_ptr<AllocationState> start() const override;

 private:
  Eigen::MatrixXd c_;
};

// Monte Carlo VI risk from posterior draws.
class ViObjective final : public PartitionObjective {
 public:
  explicit ViObjective(std::vector<Partition> draws);
  int p() const override { return p_; }
  double risk(const Partition& z) const override;
  std::unique_ptr<AllocationState> start() const override;

 private:
  std::vector<Partition> draws_;
  int p_;
};

// Arbitrary risk; partial allocations are completed with singletons.
class CallableObjective final : public PartitionObjective {
 public:
  CallableObjective(int p, std::function<double(const Partition&)> fn);
  int p() const override { return p_; }
  double risk(const Partition& z) const override { return fn_(z); }
  std::unique_ptr<AllocationState> start() const override;

 private:
  int p_;
  std::function<double(const Partition&)> fn_;
};

struct SearchConfig {
  int restarts = 16;
  int max_sweeps = 100;
  std::uint64_t seed = 0;
  std::optional<int> candidate_k_max;
  int threads = 1;
};

struct SearchResult {
  Partition estimate;
  double risk = 0.0;
  int best_restart = 0;
};

SearchResult greedy_minimizer(const PartitionObjective& objective, const SearchConfig& cfg = {});
Partition greedy_minimizer(const std::function<double(const Partition&)>& risk, int p, const SearchConfig& cfg = {});

// Global argmin with ties toward the simpler model, then lexicographic.
Partition exhaustive_minimizer(const std::function<double(const Partition&)>& risk, int p);
GammaVector exhaustive_minimizer(const std::function<double(const GammaVector&)>& risk, int p);

// Draw files: one canonical label vector per line.
std::vector<Partition> load_draws(const std::filesystem::path& path);
std::vector<Partition> parse_draws(std::string_view text);
std::string draws_to_csv(std::span<const Partition> draws);

}  // namespace riskcal
