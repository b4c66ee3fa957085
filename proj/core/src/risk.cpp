#include "riskcal/risk.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <unordered_map>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "riskcal/csv.hpp"
#include "riskcal/errors.hpp"
#include "riskcal/estimators.hpp"
#include "riskcal/numeric.hpp"

namespace riskcal {

namespace {

bool exchangeable_partition(const PriorSpec& prior) {
  return prior.space() == ModelSpace::partition && prior.get<TablePrior>() == nullptr;
}

bool exchangeable_gamma(const PriorSpec& prior) {
  return prior.space() == ModelSpace::hypercube && prior.get<TablePrior>() == nullptr;
}

double pairs(int n) { return 0.5 * n * (n - 1.0); }

void require_tolerance(double tol) {
  if (!(tol > 0.0)) throw ArgumentError("tolerance must be positive");
}

void require_loss_space(const LossSpec& loss, ModelSpace space) {
  const bool ok = space == ModelSpace::hypercube ? loss.defined_on_gamma() : loss.defined_on_partition();
  if (!ok) {
    throw ArgumentError("loss " + loss.name() + " is not defined on the " + std::string(to_string(space)) + " space");
  }
}

void require_same_space(const PriorSpec& prior, ModelSpace space) {
  if (prior.space() != space) {
    throw ArgumentError("prior " + prior.family_name() + " does not live on the " + std::string(to_string(space)) +
                        " space");
  }
}

// Exact VI-LB ingredients from an enumerated partition prior.
struct ViLbTerms {
  Eigen::MatrixXd c;
  double h = 0.0;
};

ViLbTerms exact_vi_lb_terms(const PriorSpec& prior, int p) {
  ViLbTerms t{Eigen::MatrixXd::Zero(p, p), 0.0};
  for (const auto& z : enumerate_partitions(p)) {
    const double w = pmf(prior, z);
    if (w == 0.0) continue;
    const auto sizes = z.sizes();
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < p; ++j) {
        if (z.together(i, j)) t.c(i, j) += w;
      }
    }
    double hz = 0.0;
    for (int n : sizes) hz += n * std::log2(static_cast<double>(n));
    t.h += w * hz / p;
  }
  return t;
}

double closed_gb(double c, double a, const Partition& z) {
  double together = 0.0;
  for (int n : z.sizes()) together += pairs(n);
  return a * c * pairs(z.p()) + (2.0 - a - 2.0 * c) * together;
}

double closed_vi_lb(double c, const Partition& z) {
  double acc = 0.0;
  for (int n : z.sizes()) acc += subadditivity_g(n, c);
  return acc / z.p();
}

double closed_gh(const std::vector<double>& q, double a, const GammaVector& g) {
  double acc = 0.0;
  for (int i = 0; i < g.p(); ++i) acc += g[i] ? a * (1.0 - q[i]) : (2.0 - a) * q[i];
  return acc;
}

struct MeanSe {
  double mean;
  double se;
};

MeanSe mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double se = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return {mean, se};
}

// Integer partitions of n in nonincreasing order.
void integer_partitions(int n, int max_part, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (n == 0) {
    out.push_back(cur);
    return;
  }
  for (int part = std::min(n, max_part); part >= 1; --part) {
    cur.push_back(part);
    integer_partitions(n - part, part, cur, out);
    cur.pop_back();
  }
}

Partition from_profile(const std::vector<int>& profile) {
  std::vector<int> labels;
  int label = 1;
  for (int n : profile) {
    labels.insert(labels.end(), n, label);
    ++label;
  }
  return canonicalize(labels);
}

// Representative of profile with the part at position idx split as
// (m1, n - m1); the result covers from_profile(profile).
Partition split_profile(const std::vector<int>& profile, std::size_t idx, int m1) {
  std::vector<int> labels;
  const int fresh = static_cast<int>(profile.size()) + 1;
  for (std::size_t l = 0; l < profile.size(); ++l) {
    for (int t = 0; t < profile[l]; ++t) {
      labels.push_back(l == idx && t >= m1 ? fresh : static_cast<int>(l) + 1);
    }
  }
  return canonicalize(labels);
}

GammaVector first_k_bits(int p, int s) {
  std::uint64_t mask = 0;
  for (int i = 0; i < s; ++i) mask |= 1ULL << i;
  return GammaVector(p, mask);
}

EquilibriumReport spread_report(const std::vector<std::string>& models, const std::vector<double>& values, double tol,
                                Route route) {
  EquilibriumReport r;
  r.route = route;
  r.tolerance = tol;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  r.max_spread = *hi - *lo;
  r.witness = {models[lo - values.begin()], models[hi - values.begin()]};
  r.equilibrium = r.max_spread <= tol;
  return r;
}

void note_decrease(PenalizationReport& r, double decrease, const std::string& simple, const std::string& complex) {
  if (!r.violating_pair || decrease > r.worst_decrease) {
    r.worst_decrease = decrease;
    r.violating_pair = std::make_pair(simple, complex);
  }
}

void finish_penalization(PenalizationReport& r) {
  r.penalization = !(r.worst_decrease > r.tolerance);
  if (r.penalization) r.violating_pair.reset();
}

// ------------------------------------------------------ characterizations

EquilibriumReport characterize_equilibrium(const PriorSpec& prior, const LossSpec& loss, int p, double tol) {
  if (prior.space() == ModelSpace::hypercube) {
    if (loss.kind == LossKind::generalized_hamming) {
      const auto q = inclusion_probabilities(prior, p);
      std::uint64_t lo = 0;
      std::uint64_t hi = 0;
      double spread = 0.0;
      for (int i = 0; i < p; ++i) {
        const double d = loss.a - 2.0 * q[i];
        spread += std::abs(d);
        if (d < 0.0) lo |= 1ULL << i;
        if (d > 0.0) hi |= 1ULL << i;
      }
      return EquilibriumReport{spread <= tol, spread,
                               {GammaVector(p, lo).to_string(), GammaVector(p, hi).to_string()},
                               Route::characterization, tol};
    }
    if (loss.kind == LossKind::zero_one && exchangeable_gamma(prior)) {
      std::vector<std::string> models;
      std::vector<double> risks;
      for (int s = 0; s <= p; ++s) {
        const auto g = first_k_bits(p, s);
        models.push_back(g.to_string());
        risks.push_back(1.0 - pmf(prior, g));
      }
      return spread_report(models, risks, tol, Route::characterization);
    }
  } else if (exchangeable_partition(prior)) {
    if (loss.kind == LossKind::generalized_binder) {
      const double kappa = 2.0 - loss.a - 2.0 * coclustering(prior, p);
      const double spread = std::abs(kappa) * pairs(p);
      const auto one = Partition::one_block(p).to_string();
      const auto single = Partition::singletons(p).to_string();
      return EquilibriumReport{spread <= tol, spread, kappa > 0.0 ? std::make_pair(single, one) : std::make_pair(one, single),
                               Route::characterization, tol};
    }
    if (loss.kind == LossKind::zero_one || loss.kind == LossKind::vi_lower_bound) {
      std::vector<std::vector<int>> profiles;
      std::vector<int> cur;
      integer_partitions(p, p, cur, profiles);
      const double c = loss.kind == LossKind::vi_lower_bound ? coclustering(prior, p) : 0.0;
      std::vector<std::string> models;
      std::vector<double> risks;
      for (const auto& prof : profiles) {
        const auto z = from_profile(prof);
        models.push_back(z.to_string());
        risks.push_back(loss.kind == LossKind::zero_one ? 1.0 - pmf(prior, z) : closed_vi_lb(c, z));
      }
      return spread_report(models, risks, tol, Route::characterization);
    }
  }
  throw UnsupportedMethodError("no closed-form characterization for " + loss.name() + " under " + prior.family_name());
}

PenalizationReport characterize_penalization(const PriorSpec& prior, const LossSpec& loss, int p, double tol) {
  PenalizationReport r;
  r.route = Route::characterization;
  r.tolerance = tol;
  if (prior.space() == ModelSpace::hypercube) {
    if (loss.kind == LossKind::generalized_hamming) {
      const auto q = inclusion_probabilities(prior, p);
      for (int i = 0; i < p; ++i) {
        const double decrease = 2.0 * q[i] - loss.a;
        note_decrease(r, decrease, GammaVector(p).to_string(), GammaVector(p).with(i, true).to_string());
      }
      finish_penalization(r);
      return r;
    }
    if (loss.kind == LossKind::zero_one && exchangeable_gamma(prior)) {
      for (int s = 0; s < p; ++s) {
        const double decrease = pmf(prior, first_k_bits(p, s + 1)) - pmf(prior, first_k_bits(p, s));
        note_decrease(r, decrease, first_k_bits(p, s).to_string(), first_k_bits(p, s + 1).to_string());
      }
      finish_penalization(r);
      return r;
    }
  } else if (exchangeable_partition(prior)) {
    if (p < 2) {
      r.penalization = true;
      return r;
    }
    if (loss.kind == LossKind::generalized_binder) {
      const double kappa = 2.0 - loss.a - 2.0 * coclustering(prior, p);
      const int half = p / 2;
      std::vector<int> labels(p, 1);
      for (int i = p - half; i < p; ++i) labels[i] = 2;
      note_decrease(r, kappa * half * (p - half), Partition::one_block(p).to_string(), canonicalize(labels).to_string());
      finish_penalization(r);
      return r;
    }
    if (loss.kind == LossKind::vi_lower_bound) {
      const double c = coclustering(prior, p);
      std::vector<int> labels(p);
      for (int i = 0; i < p; ++i) labels[i] = i == 0 ? 1 : i;
      note_decrease(r, subadditivity_g(2, c) / p, canonicalize(labels).to_string(), Partition::singletons(p).to_string());
      finish_penalization(r);
      return r;
    }
    if (loss.kind == LossKind::zero_one) {
      std::vector<std::vector<int>> profiles;
      std::vector<int> cur;
      integer_partitions(p, p, cur, profiles);
      for (const auto& prof : profiles) {
        const auto parent = from_profile(prof);
        const double pp = pmf(prior, parent);
        for (std::size_t idx = 0; idx < prof.size(); ++idx) {
          if (idx > 0 && prof[idx] == prof[idx - 1]) continue;
          for (int m1 = prof[idx] - 1; m1 >= (prof[idx] + 1) / 2; --m1) {
            const auto child = split_profile(prof, idx, m1);
            note_decrease(r, pmf(prior, child) - pp, parent.to_string(), child.to_string());
          }
        }
      }
      finish_penalization(r);
      return r;
    }
  }
  throw UnsupportedMethodError("no closed-form characterization for " + loss.name() + " under " + prior.family_name());
}

// ------------------------------------------------------------ enumeration

template <class Model>
PenalizationReport enumerate_penalization(const std::vector<Model>& models, const std::vector<double>& values,
                                          double tol) {
  PenalizationReport r;
  r.route = Route::enumeration;
  r.tolerance = tol;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> names;
  names.reserve(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    names.push_back(models[i].to_string());
    index.emplace(names.back(), i);
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (const auto& child : covers(models[i])) {
      const std::size_t j = index.at(child.to_string());
      note_decrease(r, values[i] - values[j], names[i], names[j]);
    }
  }
  if (models.size() < 2) r.worst_decrease = 0.0;
  finish_penalization(r);
  return r;
}

}  // namespace

std::string_view to_string(RiskMethod m) {
  switch (m) {
    case RiskMethod::exact: return "exact-enumeration";
    case RiskMethod::closed_form: return "closed-form";
    case RiskMethod::monte_carlo: return "monte-carlo";
  }
  return "?";
}

std::optional<RiskMethod> parse_risk_method(std::string_view s) {
  if (s == "exact" || s == "exact-enumeration") return RiskMethod::exact;
  if (s == "closed-form" || s == "closed") return RiskMethod::closed_form;
  if (s == "monte-carlo" || s == "mc") return RiskMethod::monte_carlo;
  return std::nullopt;
}

std::string_view to_string(Route r) { return r == Route::characterization ? "characterization" : "enumeration"; }

std::string_view to_string(SolutionStatus s) {
  switch (s) {
    case SolutionStatus::unique: return "unique";
    case SolutionStatus::none: return "none";
    case SolutionStatus::underdetermined: return "underdetermined";
  }
  return "?";
}

double RiskProfile::spread() const {
  if (values.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *hi - *lo;
}

double subadditivity_g(int m, double c) {
  if (m < 1) throw ArgumentError("subadditivity_g: m must be at least 1");
  if (!(c > 0.0 && c < 1.0 + 1e-15)) throw ArgumentError("subadditivity_g: c must lie in (0, 1]");
  const double denom = 1.0 + c * (m - 1.0);
  return m * std::log2(m / (denom * denom));
}

// --------------------------------------------------------------- prior risk

RiskProfile prior_risk(const PriorSpec& prior, const LossSpec& loss, int p, const RiskOptions& options) {
  const ModelSpace space = prior.space();
  require_loss_space(loss, space);
  RiskProfile out;
  out.space = space;
  out.p = p;
  out.prior = prior.label();
  out.loss = loss.name();
  out.method = options.method;

  if (space == ModelSpace::hypercube) {
    const auto actions = all_gammas(p);
    for (const auto& g : actions) out.models.push_back(g.to_string());
    if (loss.kind == LossKind::vi_lower_bound) throw ArgumentError("VI-LB is a partition loss");
    switch (options.method) {
      case RiskMethod::closed_form: {
        if (loss.kind == LossKind::generalized_hamming) {
          const auto q = inclusion_probabilities(prior, p);
          for (const auto& g : actions) out.values.push_back(closed_gh(q, loss.a, g));
        } else if (loss.kind == LossKind::zero_one) {
          for (const auto& g : actions) out.values.push_back(1.0 - pmf(prior, g));
        } else {
          throw UnsupportedMethodError("no closed-form prior risk for " + loss.name() + " under " + prior.family_name());
        }
        break;
      }
      case RiskMethod::exact: {
        std::vector<double> w;
        for (const auto& g : actions) w.push_back(pmf(prior, g));
        for (const auto& act : actions) {
          double acc = 0.0;
          for (std::size_t t = 0; t < actions.size(); ++t) {
            if (w[t] != 0.0) acc += w[t] * riskcal::loss(loss, actions[t], act);
          }
          out.values.push_back(acc);
        }
        break;
      }
      case RiskMethod::monte_carlo: {
        if (options.samples < 2) throw ArgumentError("Monte Carlo risk needs at least 2 samples");
        auto rng = make_rng(options.seed);
        std::vector<GammaVector> draws;
        draws.reserve(options.samples);
        for (std::size_t s = 0; s < options.samples; ++s) draws.push_back(sample_gamma(prior, p, rng));
        std::vector<double> buf(draws.size());
        for (const auto& act : actions) {
          for (std::size_t s = 0; s < draws.size(); ++s) buf[s] = riskcal::loss(loss, draws[s], act);
          const auto ms = mean_se(buf);
          out.values.push_back(ms.mean);
          out.mc_se.push_back(ms.se);
        }
        out.samples = options.samples;
        out.seed = options.seed;
        break;
      }
    }
    return out;
  }

  const auto actions = all_partitions(p);
  for (const auto& z : actions) out.models.push_back(z.to_string());
  switch (options.method) {
    case RiskMethod::closed_form: {
      if (!exchangeable_partition(prior) && loss.kind != LossKind::zero_one) {
        throw UnsupportedMethodError("closed-form partition risks need an exchangeable family, got " +
                                     prior.family_name());
      }
      if (loss.kind == LossKind::generalized_binder) {
        const double c = coclustering(prior, p);
        for (const auto& z : actions) out.values.push_back(closed_gb(c, loss.a, z));
      } else if (loss.kind == LossKind::vi_lower_bound) {
        const double c = coclustering(prior, p);
        for (const auto& z : actions) out.values.push_back(closed_vi_lb(c, z));
        out.constant_omitted = true;
      } else if (loss.kind == LossKind::zero_one) {
        for (const auto& z : actions) out.values.push_back(1.0 - pmf(prior, z));
      } else {
        throw UnsupportedMethodError("no closed-form prior risk for " + loss.name() + " under " + prior.family_name());
      }
      break;
    }
    case RiskMethod::exact: {
      if (loss.kind == LossKind::vi_lower_bound) {
        const auto t = exact_vi_lb_terms(prior, p);
        for (const auto& z : actions) out.values.push_back(t.h + vi_lb_risk_posterior(t.c, z));
        break;
      }
      std::vector<double> w;
      for (const auto& z : actions) w.push_back(pmf(prior, z));
      for (const auto& act : actions) {
        double acc = 0.0;
        for (std::size_t t = 0; t < actions.size(); ++t) {
          if (w[t] != 0.0) acc += w[t] * riskcal::loss(loss, actions[t], act);
        }
        out.values.push_back(acc);
      }
      break;
    }
    case RiskMethod::monte_carlo: {
      if (loss.kind == LossKind::vi_lower_bound) {
        throw UnsupportedMethodError("VI-LB prior risk has no Monte Carlo route; use exact or closed-form");
      }
      if (options.samples < 2) throw ArgumentError("Monte Carlo risk needs at least 2 samples");
      auto rng = make_rng(options.seed);
      std::vector<Partition> draws;
      draws.reserve(options.samples);
      for (std::size_t s = 0; s < options.samples; ++s) draws.push_back(sample_partition(prior, p, rng));
      std::vector<double> buf(draws.size());
      for (const auto& act : actions) {
        for (std::size_t s = 0; s < draws.size(); ++s) buf[s] = riskcal::loss(loss, draws[s], act);
        const auto ms = mean_se(buf);
        out.values.push_back(ms.mean);
        out.mc_se.push_back(ms.se);
      }
      out.samples = options.samples;
      out.seed = options.seed;
      break;
    }
  }
  return out;
}

double prior_risk_at(const PriorSpec& prior, const LossSpec& loss, const Partition& action, const RiskOptions& options,
                     double* se) {
  require_same_space(prior, ModelSpace::partition);
  require_loss_space(loss, ModelSpace::partition);
  const int p = action.p();
  if (se) *se = 0.0;
  switch (options.method) {
    case RiskMethod::closed_form:
      if (loss.kind == LossKind::zero_one) return 1.0 - pmf(prior, action);
      if (!exchangeable_partition(prior)) {
        throw UnsupportedMethodError("closed-form partition risks need an exchangeable family");
      }
      if (loss.kind == LossKind::generalized_binder) return closed_gb(coclustering(prior, p), loss.a, action);
      if (loss.kind == LossKind::vi_lower_bound) return closed_vi_lb(coclustering(prior, p), action);
      throw UnsupportedMethodError("no closed-form prior risk for " + loss.name());
    case RiskMethod::exact: {
      if (loss.kind == LossKind::vi_lower_bound) {
        const auto t = exact_vi_lb_terms(prior, p);
        return t.h + vi_lb_risk_posterior(t.c, action);
      }
      double acc = 0.0;
      for (const auto& z : enumerate_partitions(p)) {
        const double w = pmf(prior, z);
        if (w != 0.0) acc += w * riskcal::loss(loss, z, action);
      }
      return acc;
    }
    case RiskMethod::monte_carlo: {
      if (loss.kind == LossKind::vi_lower_bound) throw UnsupportedMethodError("VI-LB prior risk has no Monte Carlo route");
      if (options.samples < 2) throw ArgumentError("Monte Carlo risk needs at least 2 samples");
      auto rng = make_rng(options.seed);
      std::vector<double> buf(options.samples);
      for (auto& v : buf) v = riskcal::loss(loss, sample_partition(prior, p, rng), action);
      const auto ms = mean_se(buf);
      if (se) *se = ms.se;
      return ms.mean;
    }
  }
  return 0.0;
}

double prior_risk_at(const PriorSpec& prior, const LossSpec& loss, const GammaVector& action, const RiskOptions& options,
                     double* se) {
  require_same_space(prior, ModelSpace::hypercube);
  require_loss_space(loss, ModelSpace::hypercube);
  const int p = action.p();
  if (se) *se = 0.0;
  switch (options.method) {
    case RiskMethod::closed_form:
      if (loss.kind == LossKind::generalized_hamming) return closed_gh(inclusion_probabilities(prior, p), loss.a, action);
      if (loss.kind == LossKind::zero_one) return 1.0 - pmf(prior, action);
      throw UnsupportedMethodError("no closed-form prior risk for " + loss.name());
    case RiskMethod::exact: {
      double acc = 0.0;
      for (const auto& g : enumerate_gamma(p)) {
        const double w = pmf(prior, g);
        if (w != 0.0) acc += w * riskcal::loss(loss, g, action);
      }
      return acc;
    }
    case RiskMethod::monte_carlo: {
      if (options.samples < 2) throw ArgumentError("Monte Carlo risk needs at least 2 samples");
      auto rng = make_rng(options.seed);
      std::vector<double> buf(options.samples);
      for (auto& v : buf) v = riskcal::loss(loss, sample_gamma(prior, p, rng), action);
      const auto ms = mean_se(buf);
      if (se) *se = ms.se;
      return ms.mean;
    }
  }
  return 0.0;
}

// ------------------------------------------------------------ certification

bool has_characterization(const PriorSpec& prior, const LossSpec& loss) {
  if (prior.space() == ModelSpace::hypercube) {
    return loss.kind == LossKind::generalized_hamming || (loss.kind == LossKind::zero_one && exchangeable_gamma(prior));
  }
  return exchangeable_partition(prior) &&
         (loss.kind == LossKind::generalized_binder || loss.kind == LossKind::vi_lower_bound ||
          loss.kind == LossKind::zero_one);
}

EquilibriumReport check_equilibrium(const PriorSpec& prior, const LossSpec& loss, int p, double tol,
                                    std::optional<Route> route) {
  require_tolerance(tol);
  require_loss_space(loss, prior.space());
  if (p < 1) throw ArgumentError("p must be positive");
  const Route r = route.value_or(has_characterization(prior, loss) ? Route::characterization : Route::enumeration);
  if (r == Route::characterization) return characterize_equilibrium(prior, loss, p, tol);
  const auto profile = prior_risk(prior, loss, p, {RiskMethod::exact});
  return spread_report(profile.models, profile.values, tol, Route::enumeration);
}

PenalizationReport check_penalization(const PriorSpec& prior, const LossSpec& loss, int p, double tol,
                                      std::optional<Route> route) {
  require_tolerance(tol);
  require_loss_space(loss, prior.space());
  if (p < 1) throw ArgumentError("p must be positive");
  const Route r = route.value_or(has_characterization(prior, loss) ? Route::characterization : Route::enumeration);
  if (r == Route::characterization) return characterize_penalization(prior, loss, p, tol);
  const auto profile = prior_risk(prior, loss, p, {RiskMethod::exact});
  if (prior.space() == ModelSpace::hypercube) return enumerate_penalization(all_gammas(p), profile.values, tol);
  return enumerate_penalization(all_partitions(p), profile.values, tol);
}

EquilibriumCertificate certify_equilibrium(const PriorSpec& prior, const LossSpec& loss, int p, double tol) {
  EquilibriumCertificate cert;
  cert.enumeration = check_equilibrium(prior, loss, p, tol, Route::enumeration);
  if (has_characterization(prior, loss)) {
    cert.characterization = check_equilibrium(prior, loss, p, tol, Route::characterization);
    cert.agree = cert.characterization->equilibrium == cert.enumeration.equilibrium;
  }
  return cert;
}

PenalizationCertificate certify_penalization(const PriorSpec& prior, const LossSpec& loss, int p, double tol) {
  PenalizationCertificate cert;
  cert.enumeration = check_penalization(prior, loss, p, tol, Route::enumeration);
  if (has_characterization(prior, loss)) {
    cert.characterization = check_penalization(prior, loss, p, tol, Route::characterization);
    cert.agree = cert.characterization->penalization == cert.enumeration.penalization;
  }
  return cert;
}

// ----------------------------------------------------------- equilibrium LP

Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iter) {
  const Eigen::Index n = A.cols();
  if (A.rows() != b.size()) throw ArgumentError("nnls: dimension mismatch");
  if (max_iter <= 0) max_iter = static_cast<int>(3 * n + 10);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(n, false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * A.cwiseAbs().colwise().sum().maxCoeff() *
                     static_cast<double>(std::max(A.rows(), n));

  auto solve_passive = [&](Eigen::VectorXd& s) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[j]) cols.push_back(j);
    }
    Eigen::MatrixXd ap(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) ap.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
    const Eigen::VectorXd sp = ap.completeOrthogonalDecomposition().solve(b);
    s.setZero(n);
    for (std::size_t k = 0; k < cols.size(); ++k) s(cols[k]) = sp(static_cast<Eigen::Index>(k));
  };

  Eigen::VectorXd w = A.transpose() * (b - A * x);
  for (int outer = 0; outer < max_iter; ++outer) {
    Eigen::Index best = -1;
    double wmax = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[j] && w(j) > wmax) {
        wmax = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[best] = true;
    Eigen::VectorXd s;
    for (int inner = 0; inner < max_iter; ++inner) {
      solve_passive(s);
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && s(j) <= tol) alpha = std::min(alpha, x(j) / (x(j) - s(j)));
      }
      if (!std::isfinite(alpha)) break;
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[j] && x(j) <= tol) {
          passive[j] = false;
          x(j) = 0.0;
        }
      }
    }
    x = s;
    w = A.transpose() * (b - A * x);
  }
  return x;
}

EquilibriumSolution solve_equilibrium(const LossMatrix& loss) {
  const int m = loss.size();
  if (m > 4096) throw CapacityError("solve_equilibrium: at most 4096 models");
  EquilibriumSolution sol;
  sol.models = loss.ids();
  sol.unknowns = m + 1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + 1, m + 1);
  A.topLeftCorner(m, m) = loss.values().transpose();
  A.topRightCorner(m, 1).setConstant(-1.0);
  A.bottomLeftCorner(1, m).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m + 1);
  b(m) = 1.0;

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  cod.setThreshold(1e-10);
  sol.rank = static_cast<int>(cod.rank());
  const Eigen::VectorXd x = cod.solve(b);
  sol.residual = (A * x - b).norm();
  constexpr double kResidualTol = 1e-9;
  constexpr double kNegTol = 1e-10;

  if (sol.residual > kResidualTol) {
    sol.status = SolutionStatus::none;
    sol.diagnostic = "inconsistent system: least-squares residual " + format_number(sol.residual);
    return sol;
  }
  if (sol.rank == m + 1) {
    if (x.head(m).minCoeff() < -kNegTol) {
      sol.status = SolutionStatus::none;
      sol.diagnostic = "the unique solution of the equality system has negative probabilities";
      return sol;
    }
    sol.status = SolutionStatus::unique;
    sol.prior.resize(m);
    for (int i = 0; i < m; ++i) sol.prior[i] = std::max(0.0, x(i));
    sol.risk = x(m);
    sol.diagnostic = "full-rank system with a nonnegative solution";
    return sol;
  }
  // Rank deficient: look for a nonnegative point in the affine solution set.
  const Eigen::VectorXd xn = nnls(A, b);
  const double res = (A * xn - b).norm();
  if (res > kResidualTol) {
    sol.status = SolutionStatus::none;
    sol.residual = res;
    sol.diagnostic = "no nonnegative solution: best nonnegative residual " + format_number(res);
    return sol;
  }
  sol.status = SolutionStatus::underdetermined;
  sol.residual = res;
  sol.prior.assign(xn.data(), xn.data() + m);
  sol.risk = xn(m);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  lu.setThreshold(1e-10);
  const Eigen::MatrixXd kernel = lu.kernel();
  sol.basis = kernel.topRows(m);
  sol.diagnostic = "rank " + std::to_string(sol.rank) + " of " + std::to_string(m + 1) +
                   "; solution set has dimension " + std::to_string(m + 1 - sol.rank);
  return sol;
}

EquilibriumSolution solve_equilibrium(const LossSpec& loss) {
  if (loss.kind != LossKind::matrix || !loss.matrix) throw ArgumentError("solve_equilibrium: needs a matrix loss");
  return solve_equilibrium(*loss.matrix);
}

bool point_mass_properness_check(const LossMatrix& loss) {
  for (int t = 0; t < loss.size(); ++t) {
    for (int a = 0; a < loss.size(); ++a) {
      const double r = loss(t, a);
      if (r < 0.0) return false;
      if ((r == 0.0) != (t == a)) return false;
    }
  }
  return true;
}

// --------------------------------------------------------------- chain risk

std::vector<ChainRiskRow> chain_risk(const PriorSpec& prior, const std::vector<Partition>& chain,
                                     const std::vector<LossSpec>& losses, std::size_t vi_samples, std::uint64_t seed) {
  require_same_space(prior, ModelSpace::partition);
  if (chain.empty()) return {};
  const int p = chain.front().p();
  for (const auto& z : chain) {
    if (z.p() != p) throw ArgumentError("chain_risk: chain members have different p");
  }
  std::vector<Partition> draws;
  const bool need_vi = std::any_of(losses.begin(), losses.end(), [](const LossSpec& l) { return l.kind == LossKind::vi; });
  if (need_vi) {
    if (vi_samples < 2) throw ArgumentError("chain_risk: VI needs at least 2 prior samples");
    auto rng = make_rng(seed);
    draws.reserve(vi_samples);
    for (std::size_t s = 0; s < vi_samples; ++s) draws.push_back(sample_partition(prior, p, rng));
  }
  const bool exch = exchangeable_partition(prior);
  std::vector<ChainRiskRow> rows;
  for (std::size_t idx = 0; idx < chain.size(); ++idx) {
    const auto& z = chain[idx];
    for (const auto& l : losses) {
      require_loss_space(l, ModelSpace::partition);
      ChainRiskRow row{static_cast<int>(idx), z.to_string(), l.name(), 0.0, ""};
      switch (l.kind) {
        case LossKind::generalized_binder:
        case LossKind::vi_lower_bound:
          if (exch) {
            row.risk = prior_risk_at(prior, l, z, {RiskMethod::closed_form});
            row.method = l.kind == LossKind::vi_lower_bound ? "closed-form(h omitted)" : "closed-form";
          } else {
            row.risk = prior_risk_at(prior, l, z, {RiskMethod::exact});
            row.method = "exact";
          }
          break;
        case LossKind::zero_one:
          row.risk = 1.0 - pmf(prior, z);
          row.method = "closed-form";
          break;
        case LossKind::vi: {
          double acc = 0.0;
          for (const auto& d : draws) acc += vi_loss(d, z);
          row.risk = acc / static_cast<double>(draws.size());
          row.method = "monte-carlo(n=" + std::to_string(vi_samples) + ";seed=" + std::to_string(seed) + ")";
          break;
        }
        case LossKind::matrix:
          row.risk = prior_risk_at(prior, l, z, {RiskMethod::exact});
          row.method = "exact";
          break;
        case LossKind::generalized_hamming: break;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string chain_risk_csv(const std::vector<ChainRiskRow>& rows) {
  std::string out = "chain_index,partition,loss_name,risk,method\n";
  for (const auto& r : rows) {
    out += std::to_string(r.chain_index) + ",\"" + r.partition + "\"," + r.loss_name + "," + format_number(r.risk) + "," +
           r.method + "\n";
  }
  return out;
}

std::string risk_profile_csv(const RiskProfile& r) {
  const bool mc = !r.mc_se.empty();
  std::string out = mc ? "model,risk,mc_se\n" : "model,risk\n";
  for (std::size_t i = 0; i < r.models.size(); ++i) {
    out += r.space == ModelSpace::partition ? "\"" + r.models[i] + "\"" : r.models[i];
    out += "," + format_number(r.values[i]);
    if (mc) out += "," + format_number(r.mc_se[i]);
    out += "\n";
  }
  return out;
}

// --------------------------------------------------------------------- JSON

void to_json(nlohmann::json& j, const RiskProfile& r) {
  j = {{"space", std::string(to_string(r.space))},
       {"p", r.p},
       {"prior", r.prior},
       {"loss", r.loss},
       {"method", std::string(to_string(r.method))},
       {"models", r.models},
       {"values", r.values},
       {"constant_omitted", r.constant_omitted}};
  if (r.method == RiskMethod::monte_carlo) {
    j["samples"] = r.samples;
    j["seed"] = r.seed;
    j["mc_se"] = r.mc_se;
  }
}

void to_json(nlohmann::json& j, const EquilibriumReport& r) {
  j = {{"verdict", r.equilibrium ? "equilibrium" : "not-equilibrium"},
       {"max_spread", r.max_spread},
       {"witness", {r.witness.first, r.witness.second}},
       {"route", std::string(to_string(r.route))},
       {"tolerance", r.tolerance}};
}

void to_json(nlohmann::json& j, const PenalizationReport& r) {
  j = {{"verdict", r.penalization ? "penalization" : "not-penalization"},
       {"worst_decrease", r.worst_decrease},
       {"route", std::string(to_string(r.route))},
       {"tolerance", r.tolerance}};
  if (r.violating_pair) {
    j["violating_pair"] = {r.violating_pair->first, r.violating_pair->second};
  } else {
    j["violating_pair"] = nullptr;
  }
}

void to_json(nlohmann::json& j, const EquilibriumCertificate& r) {
  j = {{"verdict", r.equilibrium() ? "equilibrium" : "not-equilibrium"}, {"enumeration", r.enumeration}, {"agree", r.agree}};
  j["characterization"] = r.characterization ? nlohmann::json(*r.characterization) : nlohmann::json(nullptr);
}

void to_json(nlohmann::json& j, const PenalizationCertificate& r) {
  j = {{"verdict", r.penalization() ? "penalization" : "not-penalization"},
       {"enumeration", r.enumeration},
       {"agree", r.agree}};
  j["characterization"] = r.characterization ? nlohmann::json(*r.characterization) : nlohmann::json(nullptr);
}

void to_json(nlohmann::json& j, const EquilibriumSolution& s) {
  j = {{"status", std::string(to_string(s.status))},
       {"models", s.models},
       {"rank", s.rank},
       {"unknowns", s.unknowns},
       {"residual", s.residual},
       {"diagnostic", s.diagnostic}};
  if (s.status == SolutionStatus::none) {
    j["prior"] = nullptr;
  } else {
    j["prior"] = s.prior;
    j["risk"] = s.risk;
  }
  if (s.status == SolutionStatus::underdetermined) {
    nlohmann::json basis = nlohmann::json::array();
    for (Eigen::Index c = 0; c < s.basis.cols(); ++c) {
      std::vector<double> col(s.basis.rows());
      for (Eigen::Index r = 0; r < s.basis.rows(); ++r) col[r] = s.basis(r, c);
      basis.push_back(col);
    }
    j["basis"] = basis;
  }
}

}  // namespace riskcal
