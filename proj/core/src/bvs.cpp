#include "riskcal/bvs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "riskcal/csv.hpp"
#include "riskcal/errors.hpp"
#include "riskcal/numeric.hpp"
#include "riskcal/parallel.hpp"
#include "riskcal/prior_io.hpp"

namespace riskcal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

std::vector<int> selected(const GammaVector& g) {
  std::vector<int> idx;
  for (int i = 0; i < g.p(); ++i) {
    if (g[i]) idx.push_back(i);
  }
  return idx;
}

}  // namespace

void LinearDataset::validate() const {
  if (X.rows() != y.size()) throw ArgumentError("dataset: X has " + std::to_string(X.rows()) + " rows, y has " +
                                                std::to_string(y.size()) + " entries");
  if (n() < 3) throw ArgumentError("dataset: need n >= 3");
  if (p() < 1) throw ArgumentError("dataset: need p >= 1");
  if (!X.allFinite() || !y.allFinite()) throw ArgumentError("dataset: non-finite entries");
}

// ------------------------------------------------------- marginal likelihood

MarginalLikelihood::MarginalLikelihood(const LinearDataset& data, LikelihoodConfig cfg) : cfg_(cfg), n_(data.n()) {
  data.validate();
  if (cfg_.kind == LikelihoodKind::zellner_siow && cfg_.nodes < 32) {
    throw ArgumentError("Zellner-Siow quadrature needs at least 32 nodes");
  }
  g_ = cfg_.g.value_or(static_cast<double>(n_));
  if (!(g_ > 0.0)) throw ArgumentError("g must be positive");
  const Eigen::RowVectorXd xbar = data.X.colwise().mean();
  const Eigen::MatrixXd xc = data.X.rowwise() - xbar;
  const Eigen::VectorXd yc = data.y.array() - data.y.mean();
  gram_ = xc.transpose() * xc;
  xty_ = xc.transpose() * yc;
  yty_ = yc.squaredNorm();
}

double MarginalLikelihood::r_squared(const GammaVector& gamma, bool* rank_deficient) const {
  if (gamma.p() != p()) throw ArgumentError("model has p=" + std::to_string(gamma.p()) + ", data has p=" + std::to_string(p()));
  if (rank_deficient) *rank_deficient = false;
  const auto idx = selected(gamma);
  if (idx.empty() || yty_ <= 0.0) return 0.0;
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd g(k, k);
  Eigen::VectorXd b(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    b(a) = xty_(idx[a]);
    for (Eigen::Index c = 0; c < k; ++c) g(a, c) = gram_(idx[a], idx[c]);
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(g);
  cod.setThreshold(1e-10);
  if (rank_deficient && cod.rank() < k) *rank_deficient = true;
  const Eigen::VectorXd beta = cod.solve(b);
  return std::clamp(b.dot(beta) / yty_, 0.0, 1.0);
}

double MarginalLikelihood::g_prior_log_bf(int k, double r2) const {
  return 0.5 * (n_ - 1.0 - k) * std::log1p(g_) - 0.5 * (n_ - 1.0) * std::log1p(g_ * (1.0 - r2));
}

double MarginalLikelihood::zs_log_bf(int k, double r2) const {
  const double n = n_;
  const double alpha = 0.5;
  const double beta = 0.5 * n;
  const double log_norm = alpha * std::log(beta) - std::lgamma(alpha);
  // Integrand over t = log g, including the Jacobian e^t.
  auto ell = [&](double t) {
    const double log1pg = softplus(t);
    const double inner = 1.0 - r2 > 0.0 ? softplus(t + std::log(1.0 - r2)) : 0.0;
    return 0.5 * (n - 1.0 - k) * log1pg - 0.5 * (n - 1.0) * inner + log_norm - (alpha + 1.0) * t - beta * std::exp(-t) + t;
  };
  double t_mode = -40.0;
  double best = ell(t_mode);
  for (double t = -40.0; t <= 60.0; t += 0.25) {
    const double v = ell(t);
    if (v > best) {
      best = v;
      t_mode = t;
    }
  }
  // Golden-section refinement inside the bracketing grid cell.
  double lo = t_mode - 0.25;
  double hi = t_mode + 0.25;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 60; ++it) {
    const double a = hi - phi * (hi - lo);
    const double b = lo + phi * (hi - lo);
    if (ell(a) > ell(b)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  t_mode = 0.5 * (lo + hi);
  const double peak = std::max(best, ell(t_mode));
  constexpr double kDrop = 60.0;
  double left = t_mode;
  while (left > -200.0 && ell(left) > peak - kDrop) left -= 0.5;
  double right = t_mode;
  while (right < 200.0 && ell(right) > peak - kDrop) right += 0.5;

  const auto rule = gauss_legendre(cfg_.nodes);
  constexpr int kPanels = 16;
  const double width = (right - left) / kPanels;
  double acc = 0.0;
  for (int panel = 0; panel < kPanels; ++panel) {
    const double a = left + panel * width;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double t = a + 0.5 * width * (rule.nodes[i] + 1.0);
      acc += 0.5 * width * rule.weights[i] * std::exp(ell(t) - peak);
    }
  }
  return peak + std::log(acc);
}

double MarginalLikelihood::log_bf(const GammaVector& gamma) const {
  const int k = gamma.size();
  if (gamma.p() != p()) throw ArgumentError("model has p=" + std::to_string(gamma.p()) + ", data has p=" + std::to_string(p()));
  if (k == 0) return 0.0;
  if (k > n_ - 3) return kNegInf;
  const double r2 = r_squared(gamma);
  return cfg_.kind == LikelihoodKind::g_prior ? g_prior_log_bf(k, r2) : zs_log_bf(k, r2);
}

double log_marginal(const LinearDataset& data, const GammaVector& gamma, const LikelihoodConfig& cfg) {
  return MarginalLikelihood(data, cfg).log_bf(gamma);
}

std::vector<double> all_log_marginals(const LinearDataset& data, const LikelihoodConfig& cfg) {
  const MarginalLikelihood ml(data, cfg);
  if (data.p() > 20) throw CapacityError("posterior enumeration supports p <= 20");
  std::vector<double> out;
  out.reserve(std::size_t{1} << data.p());
  for (const auto& g : enumerate_gamma(data.p())) out.push_back(ml.log_bf(g));
  return out;
}

GammaPosterior posterior_from_log_marginals(const std::vector<double>& log_bf, const std::vector<double>& log_prior,
                                            int p) {
  if (log_bf.size() != log_prior.size() || log_bf.size() != (std::size_t{1} << p)) {
    throw ArgumentError("posterior: expected 2^p log marginals and prior terms");
  }
  std::vector<double> lp(log_bf.size());
  for (std::size_t i = 0; i < lp.size(); ++i) lp[i] = log_bf[i] + log_prior[i];
  const double z = log_sum_exp(lp);
  if (!std::isfinite(z)) throw DegeneratePosteriorError("posterior: every model was excluded");
  std::vector<double> probs(lp.size());
  double total = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    probs[i] = std::exp(lp[i] - z);
    total += probs[i];
  }
  for (double& v : probs) v /= total;
  return GammaPosterior::from_table(p, std::move(probs));
}

GammaPosterior enumerate_posterior(const LinearDataset& data, const PriorSpec& prior, const LikelihoodConfig& cfg) {
  const auto lbf = all_log_marginals(data, cfg);
  std::vector<double> lprior;
  lprior.reserve(lbf.size());
  for (const auto& g : enumerate_gamma(data.p())) lprior.push_back(log_pmf(prior, g));
  return posterior_from_log_marginals(lbf, lprior, data.p());
}

LinearDataset simulate_dataset(int n, int p, const std::vector<double>& beta, double sigma2, Rng& rng) {
  if (n < 1 || p < 1) throw ArgumentError("simulate_dataset: n and p must be positive");
  if (static_cast<int>(beta.size()) != p) throw ArgumentError("simulate_dataset: beta must have p entries");
  if (!(sigma2 >= 0.0)) throw ArgumentError("simulate_dataset: sigma2 must be nonnegative");
  std::normal_distribution<double> z(0.0, 1.0);
  LinearDataset d{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.X(i, j) = z(rng);
  }
  const Eigen::Map<const Eigen::VectorXd> b(beta.data(), p);
  const double sd = std::sqrt(sigma2);
  d.y = d.X * b;
  for (int i = 0; i < n; ++i) d.y(i) += sd * z(rng);
  return d;
}

// ---------------------------------------------------------------- study

void SimulationConfig::validate() const {
  if (n.empty()) throw ArgumentError("simulation: no sample sizes");
  for (int v : n) {
    if (v < 3) throw ArgumentError("simulation: every n must be at least 3");
  }
  if (p < 1 || p > 20) throw ArgumentError("simulation: p must lie in [1, 20]");
  if (static_cast<int>(beta.size()) != p) throw ArgumentError("simulation: beta must have p entries");
  if (!(sigma2 > 0.0)) throw ArgumentError("simulation: sigma2 must be positive");
  if (replicates < 1) throw ArgumentError("simulation: replicates must be at least 1");
  if (priors.empty() || losses.empty()) throw ArgumentError("simulation: prior and loss grids must be nonempty");
  bool ref_prior = false;
  for (const auto& np : priors) {
    if (np.prior.space() != ModelSpace::hypercube) throw ArgumentError("simulation: prior " + np.name + " is not a hypercube prior");
    ref_prior = ref_prior || np.name == reference_prior;
  }
  bool ref_loss = false;
  for (const auto& l : losses) {
    if (l.kind != LossKind::generalized_hamming && l.kind != LossKind::zero_one) {
      throw ArgumentError("simulation: losses must be GH(a) or zero-one, got " + l.name());
    }
    ref_loss = ref_loss || l.name() == reference_loss;
  }
  if (!ref_prior) throw ArgumentError("simulation: reference prior '" + reference_prior + "' is not in the grid");
  if (!ref_loss) throw ArgumentError("simulation: reference loss '" + reference_loss + "' is not in the grid");
}

SimulationConfig default_simulation_config() {
  SimulationConfig cfg;
  for (int i = 7; i <= 13; ++i) {
    const double a = i / 10.0;
    cfg.priors.push_back({"pi_" + format_number(a) + (i == 10 ? ".0" : ""), PriorSpec::beta_binomial(a, 2.0 - a)});
    cfg.losses.push_back(LossSpec::generalized_hamming(a));
  }
  cfg.priors.push_back({"pi_unif", PriorSpec::uniform_gamma()});
  cfg.losses.push_back(LossSpec::zero_one());
  return cfg;
}

double ReportTable::at(const std::string& row, const std::string& col) const {
  const auto r = std::find(rows.begin(), rows.end(), row);
  const auto c = std::find(cols.begin(), cols.end(), col);
  if (r == rows.end() || c == cols.end()) throw ArgumentError("report table: no cell (" + row + ", " + col + ")");
  return mean(r - rows.begin(), c - cols.begin());
}

namespace {

std::string table_csv(const ReportTable& t, const Eigen::MatrixXd& m) {
  std::string out = "loss";
  for (const auto& c : t.cols) out += "," + c;
  out += "\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out += t.rows[r];
    for (std::size_t c = 0; c < t.cols.size(); ++c) out += "," + format_number(m(r, c));
    out += "\n";
  }
  return out;
}

}  // namespace

std::string ReportTable::mean_csv() const { return table_csv(*this, mean); }
std::string ReportTable::se_csv() const { return table_csv(*this, se); }

SimulationReport run_simulation(const SimulationConfig& cfg) {
  cfg.validate();
  const int p = cfg.p;
  const std::size_t models = std::size_t{1} << p;
  const std::size_t np = cfg.priors.size();
  const std::size_t nl = cfg.losses.size();

  std::vector<std::vector<double>> log_priors(np);
  for (std::size_t j = 0; j < np; ++j) {
    log_priors[j].reserve(models);
    for (const auto& g : enumerate_gamma(p)) log_priors[j].push_back(log_pmf(cfg.priors[j].prior, g));
  }
  std::size_t ref_prior = 0;
  std::size_t ref_loss = 0;
  for (std::size_t j = 0; j < np; ++j) {
    if (cfg.priors[j].name == cfg.reference_prior) ref_prior = j;
  }
  for (std::size_t i = 0; i < nl; ++i) {
    if (cfg.losses[i].name() == cfg.reference_loss) ref_loss = i;
  }

  auto estimator = [&](const GammaPosterior& post, const LossSpec& l) {
    return l.kind == LossKind::zero_one ? highest_probability_model(post) : quantile_probability_model(post.inclusion, l.a);
  };

  SimulationReport report;
  for (std::size_t s = 0; s < cfg.n.size(); ++s) {
    const int n = cfg.n[s];
    const std::uint64_t scenario_seed = split_seed(cfg.seed, s);
    // distance / size per replicate, [loss][prior] flattened.
    std::vector<std::vector<double>> dist(cfg.replicates, std::vector<double>(nl * np));
    std::vector<std::vector<double>> size(cfg.replicates, std::vector<double>(nl * np));
    parallel_for(static_cast<std::size_t>(cfg.replicates), cfg.threads, [&](std::size_t r) {
      try {
        auto rng = child_rng(scenario_seed, r);
        const auto data = simulate_dataset(n, p, cfg.beta, cfg.sigma2, rng);
        const auto lbf = all_log_marginals(data, cfg.likelihood);
        std::vector<std::vector<GammaVector>> est(np);
        for (std::size_t j = 0; j < np; ++j) {
          const auto post = posterior_from_log_marginals(lbf, log_priors[j], p);
          for (std::size_t i = 0; i < nl; ++i) est[j].push_back(estimator(post, cfg.losses[i]));
        }
        const GammaVector& ref = est[ref_prior][ref_loss];
        for (std::size_t i = 0; i < nl; ++i) {
          for (std::size_t j = 0; j < np; ++j) {
            dist[r][i * np + j] = gh_loss(est[j][i], ref, 1.0);
            size[r][i * np + j] = est[j][i].size();
          }
        }
      } catch (const Error& e) {
        throw Error("simulation n=" + std::to_string(n) + " replicate " + std::to_string(r) + ": " + e.what());
      }
    });

    auto reduce = [&](const std::vector<std::vector<double>>& v) {
      ReportTable t;
      for (const auto& l : cfg.losses) t.rows.push_back(l.name());
      for (const auto& pr : cfg.priors) t.cols.push_back(pr.name);
      t.mean = Eigen::MatrixXd::Zero(nl, np);
      t.se = Eigen::MatrixXd::Zero(nl, np);
      const double R = cfg.replicates;
      for (std::size_t cell = 0; cell < nl * np; ++cell) {
        double m = 0.0;
        for (const auto& rep : v) m += rep[cell];
        m /= R;
        double ss = 0.0;
        for (const auto& rep : v) ss += (rep[cell] - m) * (rep[cell] - m);
        const auto i = static_cast<Eigen::Index>(cell / np);
        const auto j = static_cast<Eigen::Index>(cell % np);
        t.mean(i, j) = m;
        t.se(i, j) = cfg.replicates > 1 ? std::sqrt(ss / (R - 1.0) / R) : 0.0;
      }
      return t;
    };
    report.scenarios.push_back({n, reduce(dist), reduce(size)});
  }
  return report;
}

nlohmann::json simulation_config_to_json(const SimulationConfig& cfg) {
  nlohmann::json priors = nlohmann::json::array();
  for (const auto& np : cfg.priors) priors.push_back({{"name", np.name}, {"prior", prior_to_json(np.prior)}});
  std::vector<std::string> losses;
  for (const auto& l : cfg.losses) losses.push_back(l.name());
  nlohmann::json lik = {{"kind", cfg.likelihood.kind == LikelihoodKind::g_prior ? "g-prior" : "zellner-siow"},
                        {"nodes", cfg.likelihood.nodes}};
  lik["g"] = cfg.likelihood.g ? nlohmann::json(*cfg.likelihood.g) : nlohmann::json(nullptr);
  return {{"n", cfg.n},
          {"p", cfg.p},
          {"beta", cfg.beta},
          {"sigma2", cfg.sigma2},
          {"replicates", cfg.replicates},
          {"priors", priors},
          {"losses", losses},
          {"reference", {{"prior", cfg.reference_prior}, {"loss", cfg.reference_loss}}},
          {"seed", cfg.seed},
          {"likelihood", lik}};
}

SimulationConfig simulation_config_from_json(const nlohmann::json& j) {
  SimulationConfig cfg = default_simulation_config();
  try {
    if (j.contains("n")) cfg.n = j.at("n").get<std::vector<int>>();
    if (j.contains("p")) cfg.p = j.at("p").get<int>();
    if (j.contains("beta")) {
      cfg.beta = j.at("beta").get<std::vector<double>>();
    } else if (cfg.p != 10) {
      cfg.beta.assign(cfg.p, 0.0);
      for (int i = 0; i < std::min(6, cfg.p); ++i) cfg.beta[i] = i < 3 ? 1.0 : -1.0;
    }
    if (j.contains("sigma2")) cfg.sigma2 = j.at("sigma2").get<double>();
    if (j.contains("replicates")) cfg.replicates = j.at("replicates").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("priors")) {
      cfg.priors.clear();
      for (const auto& e : j.at("priors")) cfg.priors.push_back({e.at("name").get<std::string>(), prior_from_json(e.at("prior"))});
    }
    if (j.contains("losses")) {
      cfg.losses.clear();
      for (const auto& e : j.at("losses")) cfg.losses.push_back(LossSpec::parse(e.get<std::string>()));
    }
    if (j.contains("reference")) {
      const auto& r = j.at("reference");
      cfg.reference_prior = r.value("prior", cfg.reference_prior);
      cfg.reference_loss = LossSpec::parse(r.value("loss", cfg.reference_loss)).name();
    }
    if (j.contains("likelihood")) {
      const auto& l = j.at("likelihood");
      const auto kind = l.value("kind", std::string("g-prior"));
      if (kind == "g-prior") {
        cfg.likelihood.kind = LikelihoodKind::g_prior;
      } else if (kind == "zellner-siow") {
        cfg.likelihood.kind = LikelihoodKind::zellner_siow;
      } else {
        throw ArgumentError("simulation config: unknown likelihood '" + kind + "'");
      }
      if (l.contains("g") && !l.at("g").is_null()) cfg.likelihood.g = l.at("g").get<double>();
      cfg.likelihood.nodes = l.value("nodes", cfg.likelihood.nodes);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("simulation config: ") + e.what());
  }
  return cfg;
}

}  // namespace riskcal
