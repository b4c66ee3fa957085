#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "riskcal/losses.hpp"
#include "riskcal/model_space.hpp"
#include "riskcal/priors.hpp"

namespace riskcal {

enum class RiskMethod { exact, closed_form, monte_carlo };

std::string_view to_string(RiskMethod m);
std::optional<RiskMethod> parse_risk_method(std::string_view s);

struct RiskOptions {
  RiskMethod method = RiskMethod::exact;
  std::size_t samples = 100'000;  // Monte Carlo only
  std::uint64_t seed = 0;
};

struct RiskProfile {
  ModelSpace space = ModelSpace::partition;
  int p = 0;
  std::string prior;
  std::string loss;
  std::vector<std::string> models;  // enumeration order
  std::vector<double> values;
  RiskMethod method = RiskMethod::exact;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::vector<double> mc_se;       // Monte Carlo only
  bool constant_omitted = false;   // VI-LB closed form drops h

  double spread() const;
};

// Prior risk R(M) = E[L(truth, M)] for every M in the enumerated space.
RiskProfile prior_risk(const PriorSpec& prior, const LossSpec& loss, int p, const RiskOptions& options = {});

// Risk at a single action. Closed-form VI-LB omits h; Monte Carlo writes
// the standard error to *se when given.
double prior_risk_at(const PriorSpec& prior, const LossSpec& loss, const Partition& action,
                     const RiskOptions& options = {}, double* se = nullptr);
double prior_risk_at(const PriorSpec& prior, const LossSpec& loss, const GammaVector& action,
                     const RiskOptions& options = {}, double* se = nullptr);

enum class Route { characterization, enumeration };

std::string_view to_string(Route r);

struct EquilibriumReport {
  bool equilibrium = false;
  double max_spread = 0.0;
  std::pair<std::string, std::string> witness;  // (lowest risk, highest risk)
  Route route = Route::enumeration;
  double tolerance = 1e-9;
};

struct PenalizationReport {
  bool penalization = false;
  // Covering pair (simpler, more complex) whose risk decreases by the
  // largest amount.
  std::optional<std::pair<std::string, std::string>> violating_pair;
  double worst_decrease = 0.0;
  Route route = Route::enumeration;
  double tolerance = 1e-9;
};

inline constexpr double kDefaultTolerance = 1e-9;

// Default route: characterization when the (loss, prior) pair has one,
// otherwise enumeration.
EquilibriumReport check_equilibrium(const PriorSpec& prior, const LossSpec& loss, int p,
                                    double tol = kDefaultTolerance, std::optional<Route> route = std::nullopt);
PenalizationReport check_penalization(const PriorSpec& prior, const LossSpec& loss, int p,
                                      double tol = kDefaultTolerance, std::optional<Route> route = std::nullopt);

bool has_characterization(const PriorSpec& prior, const LossSpec& loss);

// Both routes where available; agree is false only if they disagree.
struct EquilibriumCertificate {
  std::optional<EquilibriumReport> characterization;
  EquilibriumReport enumeration;
  bool agree = true;
  bool equilibrium() const { return enumeration.equilibrium; }
};
struct PenalizationCertificate {
  std::optional<PenalizationReport> characterization;
  PenalizationReport enumeration;
  bool agree = true;
  bool penalization() const { return enumeration.penalization; }
};

EquilibriumCertificate certify_equilibrium(const PriorSpec& prior, const LossSpec& loss, int p,
                                           double tol = kDefaultTolerance);
PenalizationCertificate certify_penalization(const PriorSpec& prior, const LossSpec& loss, int p,
                                             double tol = kDefaultTolerance);

enum class SolutionStatus { unique, none, underdetermined };

std::string_view to_string(SolutionStatus s);

struct EquilibriumSolution {
  SolutionStatus status = SolutionStatus::none;
  std::vector<std::string> models;
  // A feasible prior (unique or particular), empty when none exists.
  std::vector<double> prior;
  double risk = 0.0;  // the common risk value r
  int rank = 0;
  int unknowns = 0;
  double residual = 0.0;
  // Columns span the directions in prior space preserving constant risk
  // and total mass (underdetermined only).
  Eigen::MatrixXd basis;
  std::string diagnostic;
};

// Solve L^T pi = r 1, sum(pi) = 1, pi >= 0 jointly in (pi, r).
EquilibriumSolution solve_equilibrium(const LossMatrix& loss);
EquilibriumSolution solve_equilibrium(const LossSpec& loss);

// Point-mass priors: R(M2) = L(M1, M2) is uniquely minimized at M1.
bool point_mass_properness_check(const LossMatrix& loss);

// Nonnegative least squares min ||A x - b||, x >= 0 (Lawson-Hanson).
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iter = 0);

struct ChainRiskRow {
  int chain_index = 0;
  std::string partition;
  std::string loss_name;
  double risk = 0.0;
  std::string method;  // "closed-form", "exact", "monte-carlo(n=...,seed=...)"
};

// One row per (chain element, loss). VI uses Monte Carlo prior samples
// with the given size and seed; GB and VI-LB use closed forms when the
// prior is exchangeable.
std::vector<ChainRiskRow> chain_risk(const PriorSpec& prior, const std::vector<Partition>& chain,
                                     const std::vector<LossSpec>& losses, std::size_t vi_samples = 20'000,
                                     std::uint64_t seed = 0);
std::string chain_risk_csv(const std::vector<ChainRiskRow>& rows);

// g(m) = m log2(m / (1 + c(m - 1))^2).
double subadditivity_g(int m, double c);

void to_json(nlohmann::json& j, const RiskProfile& r);
void to_json(nlohmann::json& j, const EquilibriumReport& r);
void to_json(nlohmann::json& j, const PenalizationReport& r);
void to_json(nlohmann::json& j, const EquilibriumCertificate& r);
void to_json(nlohmann::json& j, const PenalizationCertificate& r);
void to_json(nlohmann::json& j, const EquilibriumSolution& s);

std::string risk_profile_csv(const RiskProfile& r);

}  // namespace riskcal
