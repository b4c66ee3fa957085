#include "riskcal/bca.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "riskcal/csv.hpp"
#include "riskcal/errors.hpp"
#include "riskcal/losses.hpp"
#include "riskcal/numeric.hpp"
#include "riskcal/parallel.hpp"
#include "riskcal/rng.hpp"

namespace riskcal {

NigBase NigBase::empirical(std::span<const double> data) {
  if (data.size() < 2) throw ArgumentError("empirical base: need at least two observations");
  const double n = static_cast<double>(data.size());
  const double mean = std::accumulate(data.begin(), data.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : data) ss += (x - mean) * (x - mean);
  NigBase b;
  b.m0 = mean;
  b.b0 = ss / (n - 1.0);
  if (!(b.b0 > 0.0)) b.b0 = 1.0;
  return b;
}

void NigBase::validate() const {
  if (!(k0 > 0.0 && a0 > 0.0 && b0 > 0.0) || !std::isfinite(m0)) {
    throw ArgumentError("normal-inverse-gamma base: k0, a0, b0 must be positive");
  }
}

double nig_log_predictive(const NigBase& base, double x, int count, double sum, double sumsq) {
  const double n = count;
  const double kn = base.k0 + n;
  const double xbar = count > 0 ? sum / n : 0.0;
  const double ss = count > 0 ? std::max(0.0, sumsq - n * xbar * xbar) : 0.0;
  const double mn = (base.k0 * base.m0 + sum) / kn;
  const double an = base.a0 + 0.5 * n;
  const double bn = base.b0 + 0.5 * ss + base.k0 * n * (xbar - base.m0) * (xbar - base.m0) / (2.0 * kn);
  const double nu = 2.0 * an;
  const double scale2 = bn * (kn + 1.0) / (an * kn);
  const double z = (x - mn) * (x - mn) / (nu * scale2);
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi * scale2) -
         0.5 * (nu + 1.0) * std::log1p(z);
}

void DPMMConfig::validate() const {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw ArgumentError("DPMM: theta must be positive");
  if (burn_in < 0 || iterations <= burn_in) throw ArgumentError("DPMM: need iterations > burn_in >= 0");
  if (thin < 1) throw ArgumentError("DPMM: thinning must be at least 1");
  if (base) base->validate();
}

PartitionDrawSet dpmm_sample(std::span<const double> data, const DPMMConfig& cfg) {
  cfg.validate();
  if (data.size() < 2) throw ArgumentError("DPMM: need at least two observations");
  for (double x : data) {
    if (!std::isfinite(x)) throw ArgumentError("DPMM: non-finite observation");
  }
  const NigBase base = cfg.base.value_or(NigBase::empirical(data));
  const int p = static_cast<int>(data.size());
  auto rng = make_rng(cfg.seed);

  // Cluster slots with sufficient statistics; start from one block.
  std::vector<int> label(p, 0);
  std::vector<int> count{p};
  std::vector<double> sum{std::accumulate(data.begin(), data.end(), 0.0)};
  std::vector<double> sumsq{0.0};
  for (double x : data) sumsq[0] += x * x;
  std::vector<int> free_slots;

  const double log_theta = std::log(cfg.theta);
  std::vector<double> logw;
  std::vector<int> slot_of;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  PartitionDrawSet out;
  out.draws.reserve(static_cast<std::size_t>((cfg.iterations - cfg.burn_in) / cfg.thin + 1));
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int i = 0; i < p; ++i) {
      const double x = data[i];
      const int c = label[i];
      --count[c];
      sum[c] -= x;
      sumsq[c] -= x * x;
      if (count[c] == 0) {
        sum[c] = 0.0;
        sumsq[c] = 0.0;
        free_slots.push_back(c);
      }
      logw.clear();
      slot_of.clear();
      for (int s = 0; s < static_cast<int>(count.size()); ++s) {
        if (count[s] == 0) continue;
        double w = std::log(static_cast<double>(count[s]));
        if (!cfg.prior_only) w += nig_log_predictive(base, x, count[s], sum[s], sumsq[s]);
        logw.push_back(w);
        slot_of.push_back(s);
      }
      double wnew = log_theta;
      if (!cfg.prior_only) wnew += nig_log_predictive(base, x, 0, 0.0, 0.0);
      logw.push_back(wnew);
      slot_of.push_back(-1);

      const double mx = *std::max_element(logw.begin(), logw.end());
      double total = 0.0;
      for (double& w : logw) {
        w = std::exp(w - mx);
        total += w;
      }
      double u = unif(rng) * total;
      std::size_t pick = logw.size() - 1;
      for (std::size_t k = 0; k < logw.size(); ++k) {
        if (u < logw[k]) {
          pick = k;
          break;
        }
        u -= logw[k];
      }
      int s = slot_of[pick];
      if (s < 0) {
        if (!free_slots.empty()) {
          s = free_slots.back();
          free_slots.pop_back();
        } else {
          s = static_cast<int>(count.size());
          count.push_back(0);
          sum.push_back(0.0);
          sumsq.push_back(0.0);
        }
      }
      label[i] = s;
      ++count[s];
      sum[s] += x;
      sumsq[s] += x * x;
    }
    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      std::vector<int> lab(p);
      for (int i = 0; i < p; ++i) lab[i] = label[i] + 1;
      out.draws.push_back(canonicalize(lab));
    }
  }
  out.provenance = "sampler(theta=" + format_number(cfg.theta) + ",iterations=" + std::to_string(cfg.iterations) +
                   ",burn_in=" + std::to_string(cfg.burn_in) + ",thin=" + std::to_string(cfg.thin) +
                   ",seed=" + std::to_string(cfg.seed) + (cfg.prior_only ? ",prior-only" : "") + ")";
  return out;
}

Eigen::MatrixXd coclustering_matrix(const PartitionDrawSet& draws) { return coclustering_from_draws(draws.draws); }

// ------------------------------------------------------------------ pipeline

Eigen::MatrixXd GalaxyReport::mean_distance() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows.size(), cols.size());
  for (const auto& d : distance) m += d;
  return distance.empty() ? m : m / static_cast<double>(distance.size());
}

Eigen::MatrixXd GalaxyReport::mean_clusters() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows.size(), cols.size());
  for (const auto& d : clusters) m += d;
  return clusters.empty() ? m : m / static_cast<double>(clusters.size());
}

namespace {

std::string galaxy_csv(const GalaxyReport& r, const Eigen::MatrixXd& m) {
  std::string out = "loss";
  for (const auto& c : r.cols) out += "," + c;
  out += "\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    out += r.rows[i];
    for (std::size_t j = 0; j < r.cols.size(); ++j) out += "," + format_number(m(i, j));
    out += "\n";
  }
  return out;
}

std::string prior_column(double a) {
  std::string s = format_number(a);
  if (s.find('.') == std::string::npos) s += ".0";
  return "pi_" + s;
}

}  // namespace

std::string GalaxyReport::distance_csv() const { return galaxy_csv(*this, mean_distance()); }
std::string GalaxyReport::clusters_csv() const { return galaxy_csv(*this, mean_clusters()); }

int GalaxyReport::row(const std::string& name) const {
  const auto it = std::find(rows.begin(), rows.end(), name);
  if (it == rows.end()) throw ArgumentError("galaxy report: no row " + name);
  return static_cast<int>(it - rows.begin());
}

int GalaxyReport::col(const std::string& name) const {
  const auto it = std::find(cols.begin(), cols.end(), name);
  if (it == cols.end()) throw ArgumentError("galaxy report: no column " + name);
  return static_cast<int>(it - cols.begin());
}

GalaxyReport galaxy_pipeline(std::span<const double> data, const GalaxyConfig& cfg) {
  if (cfg.prior_a.empty() || cfg.loss_a.empty()) throw ArgumentError("galaxy pipeline: grids must be nonempty");
  if (cfg.repeats < 1) throw ArgumentError("galaxy pipeline: repeats must be at least 1");
  for (double a : cfg.prior_a) validate_weight(a, "galaxy prior grid");
  std::vector<LossSpec> losses;
  for (double a : cfg.loss_a) losses.push_back(LossSpec::generalized_binder(a));
  if (cfg.include_vi) losses.push_back(LossSpec::vi());
  if (cfg.include_vi_lb) losses.push_back(LossSpec::vi_lower_bound());

  GalaxyReport report;
  for (const auto& l : losses) report.rows.push_back(l.name());
  for (double a : cfg.prior_a) report.cols.push_back(prior_column(a));
  const int ref_row = report.row("GB(1)");
  const int ref_col = report.col("pi_1.0");

  const std::size_t ncol = cfg.prior_a.size();
  const std::size_t jobs = static_cast<std::size_t>(cfg.repeats) * ncol;
  std::vector<std::vector<Partition>> est(jobs);  // [job][row]
  parallel_for(jobs, cfg.threads, [&](std::size_t job) {
    const std::size_t rep = job / ncol;
    const std::size_t col = job % ncol;
    const std::uint64_t job_seed = split_seed(split_seed(cfg.seed, rep), col);
    DPMMConfig mc = cfg.mcmc;
    const double a = cfg.prior_a[col];
    mc.theta = a / (2.0 - a);
    mc.seed = split_seed(job_seed, 0);
    const auto draws = dpmm_sample(data, mc);
    const Eigen::MatrixXd c = coclustering_matrix(draws);
    SearchConfig sc = cfg.search;
    sc.threads = 1;
    sc.seed = split_seed(job_seed, 1);
    for (const auto& l : losses) {
      switch (l.kind) {
        case LossKind::generalized_binder:
          est[job].push_back(greedy_minimizer(GbObjective(c, l.a), sc).estimate);
          break;
        case LossKind::vi:
          est[job].push_back(greedy_minimizer(ViObjective(draws.draws), sc).estimate);
          break;
        case LossKind::vi_lower_bound:
          est[job].push_back(greedy_minimizer(ViLbObjective(c), sc).estimate);
          break;
        default: break;
      }
    }
  });

  for (int rep = 0; rep < cfg.repeats; ++rep) {
    Eigen::MatrixXd dist(report.rows.size(), ncol);
    Eigen::MatrixXd clus(report.rows.size(), ncol);
    std::vector<std::vector<Partition>> grid(report.rows.size(), std::vector<Partition>(ncol));
    const Partition& ref = est[rep * ncol + ref_col][ref_row];
    for (std::size_t col = 0; col < ncol; ++col) {
      for (std::size_t row = 0; row < report.rows.size(); ++row) {
        const Partition& z = est[rep * ncol + col][row];
        dist(row, col) = gb_loss(z, ref, 1.0);
        clus(row, col) = z.k();
        grid[row][col] = z;
      }
    }
    report.distance.push_back(dist);
    report.clusters.push_back(clus);
    report.estimates.push_back(std::move(grid));
  }
  return report;
}

}  // namespace riskcal
