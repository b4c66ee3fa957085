#include "riskcal/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "riskcal/csv.hpp"
#include "riskcal/errors.hpp"
#include "riskcal/losses.hpp"
#include "riskcal/numeric.hpp"
#include "riskcal/parallel.hpp"
#include "riskcal/rng.hpp"

namespace riskcal {

namespace {

void require_square(const Eigen::MatrixXd& c, int p, std::string_view where) {
  if (c.rows() != c.cols() || c.rows() != p) {
    throw ArgumentError(std::string(where) + ": co-clustering matrix is " + std::to_string(c.rows()) + "x" +
                        std::to_string(c.cols()) + ", partition has p=" + std::to_string(p));
  }
}

bool better(double risk, const Partition& z, double best_risk, const Partition& best) {
  const double eps = 1e-12 * std::max(1.0, std::abs(best_risk));
  if (risk < best_risk - eps) return true;
  if (risk > best_risk + eps) return false;
  return simpler_first(z, best);
}

// ------------------------------------------------------------------ states

class GbState final : public AllocationState {
 public:
  GbState(const Eigen::MatrixXd& c, double a) : AllocationState(static_cast<int>(c.rows())), c_(c), a_(a) {}

  double join_cost(int item, int slot) const override {
    double cost = 0.0;
    for (int j = 0; j < p(); ++j) {
      const int s = slot_of(j);
      if (s < 0 || j == item) continue;
      cost += s == slot ? (2.0 - a_) * (1.0 - c_(item, j)) : a_ * c_(item, j);
    }
    return cost;
  }

 protected:
  void on_add(int, int) override {}
  void on_remove(int, int) override {}

 private:
  const Eigen::MatrixXd& c_;
  double a_;
};

class ViLbState final : public AllocationState {
 public:
  explicit ViLbState(const Eigen::MatrixXd& c)
      : AllocationState(static_cast<int>(c.rows())), c_(c), t_(static_cast<std::size_t>(c.rows()), 0.0) {}

  double join_cost(int item, int slot) const override {
    const auto& s = members(slot);
    const double n = static_cast<double>(s.size());
    double inner = 1.0;
    double others = 0.0;
    for (int j : s) {
      inner += c_(item, j);
      others += std::log2(t_[j] + c_(item, j)) - std::log2(t_[j]);
    }
    return (xlog2x(n + 1.0) - xlog2x(n) - 2.0 * (std::log2(inner) + others)) / p();
  }

 protected:
  void on_add(int item, int slot) override {
    double ti = 1.0;
    for (int j : members(slot)) {
      if (j == item) continue;
      ti += c_(item, j);
      t_[j] += c_(item, j);
    }
    t_[item] = ti;
  }
  void on_remove(int item, int slot) override {
    for (int j : members(slot)) {
      if (j != item) t_[j] -= c_(item, j);
    }
    t_[item] = 0.0;
  }

 private:
  const Eigen::MatrixXd& c_;
  std::vector<double> t_;  // sum_{j in cluster(i)} C_ij for allocated i
};

class ViState final : public AllocationState {
 public:
  ViState(const std::vector<Partition>& draws, int p) : AllocationState(p), draws_(draws), f_(p + 2) {
    for (int x = 0; x <= p + 1; ++x) f_[x] = xlog2x(x);
    counts_.resize(draws.size());
    for (std::size_t d = 0; d < draws.size(); ++d) counts_[d].assign(static_cast<std::size_t>(draws[d].k()) * p, 0);
  }

  double join_cost(int item, int slot) const override {
    const int n = slot_size(slot);
    double cross = 0.0;
    for (std::size_t d = 0; d < draws_.size(); ++d) {
      const int c = counts_[d][index(d, item, slot)];
      cross += f_[c + 1] - f_[c];
    }
    return (f_[n + 1] - f_[n] - 2.0 * cross / static_cast<double>(draws_.size())) / p();
  }

 protected:
  void on_add(int item, int slot) override {
    for (std::size_t d = 0; d < draws_.size(); ++d) ++counts_[d][index(d, item, slot)];
  }
  void on_remove(int item, int slot) override {
    for (std::size_t d = 0; d < draws_.size(); ++d) --counts_[d][index(d, item, slot)];
  }

 private:
  std::size_t index(std::size_t d, int item, int slot) const {
    return static_cast<std::size_t>(draws_[d].label(item) - 1) * p() + slot;
  }
  const std::vector<Partition>& draws_;
  std::vector<double> f_;
  std::vector<std::vector<int>> counts_;  // per draw: [truth label][slot]
};

class CallableState final : public AllocationState {
 public:
  CallableState(int p, const std::function<double(const Partition&)>& fn) : AllocationState(p), fn_(fn) {}

  double join_cost(int item, int slot) const override {
    std::vector<int> labels(p());
    for (int j = 0; j < p(); ++j) {
      const int s = j == item ? slot : slot_of(j);
      labels[j] = s >= 0 ? s + 1 : p() + 1 + j;
    }
    return fn_(canonicalize(labels));
  }

 protected:
  void on_add(int, int) override {}
  void on_remove(int, int) override {}

 private:
  const std::function<double(const Partition&)>& fn_;
};

int first_empty_slot(const AllocationState& s) {
  for (int slot = 0; slot < s.p(); ++slot) {
    if (s.slot_size(slot) == 0) return slot;
  }
  return -1;
}

struct RestartOutcome {
  Partition z;
  double risk;
};

RestartOutcome run_restart(const PartitionObjective& obj, const SearchConfig& cfg, std::size_t restart) {
  const int p = obj.p();
  auto rng = child_rng(cfg.seed, restart);
  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int k_max = cfg.candidate_k_max.value_or(p);

  auto state = obj.start();
  auto choose = [&](int item, int keep) {
    int best = keep;
    double best_cost = keep >= 0 ? state->join_cost(item, keep) : 0.0;
    auto consider = [&](int slot) {
      if (slot == keep) return;
      const double cost = state->join_cost(item, slot);
      const double eps = 1e-12 * std::max(1.0, std::abs(best_cost));
      if (best < 0 || cost < best_cost - eps) {
        best = slot;
        best_cost = cost;
      }
    };
    for (int slot = 0; slot < p; ++slot) {
      if (state->slot_size(slot) > 0) consider(slot);
    }
    if (state->clusters() < k_max) {
      const int fresh = (keep >= 0 && state->slot_size(keep) == 0) ? keep : first_empty_slot(*state);
      if (fresh >= 0) consider(fresh);
    }
    return best;
  };

  auto descend = [&] {
    for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
      bool moved = false;
      for (int item : order) {
        const int from = state->slot_of(item);
        state->remove(item);
        const int to = choose(item, from);
        state->add(item, to);
        moved = moved || to != from;
      }
      if (!moved) break;
    }
    Partition z = state->partition();
    const double r = obj.risk(z);
    return RestartOutcome{std::move(z), r};
  };

  // Sequential allocation, then a second descent from random labels.
  for (int item : order) state->add(item, choose(item, -1));
  RestartOutcome best = descend();
  state = obj.start();
  std::uniform_int_distribution<int> label(0, k_max - 1);
  for (int item : order) state->add(item, label(rng));
  RestartOutcome second = descend();
  if (better(second.risk, second.z, best.risk, best.z)) best = std::move(second);
  return best;
}

}  // namespace

// ----------------------------------------------------------------- summaries

GammaPosterior GammaPosterior::from_table(int p, std::vector<double> probs) {
  if (p < 1 || p > kMaxEnumerableGammaP) throw CapacityError("posterior table: p out of range");
  if (probs.size() != (std::size_t{1} << p)) throw ArgumentError("posterior table: expected 2^p probabilities");
  double total = 0.0;
  for (double v : probs) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("posterior table: probabilities must be nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-10) throw ArgumentError("posterior table: probabilities sum to " + format_number(total));
  GammaPosterior post{p, std::move(probs), std::vector<double>(p, 0.0)};
  for (std::uint64_t idx = 0; idx < post.probs.size(); ++idx) {
    const auto g = GammaVector::from_lex_index(p, idx);
    for (int i = 0; i < p; ++i) {
      if (g[i]) post.inclusion[i] += post.probs[idx];
    }
  }
  for (double& q : post.inclusion) q = std::clamp(q, 0.0, 1.0);
  return post;
}

PartitionPosterior PartitionPosterior::from_draws(std::vector<Partition> draws) {
  PartitionPosterior post;
  post.coclustering = coclustering_from_draws(draws);
  post.draws = std::move(draws);
  return post;
}

Eigen::MatrixXd coclustering_from_draws(std::span<const Partition> draws) {
  if (draws.empty()) throw ArgumentError("co-clustering: no draws");
  const int p = draws.front().p();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p, p);
  for (const auto& z : draws) {
    if (z.p() != p) throw ArgumentError("co-clustering: draws have different p");
    for (const auto& block : z.blocks()) {
      for (int i : block) {
        for (int j : block) c(i, j) += 1.0;
      }
    }
  }
  return c / static_cast<double>(draws.size());
}

void validate_coclustering(const Eigen::MatrixXd& c) {
  if (c.rows() != c.cols() || c.rows() == 0) throw ArgumentError("co-clustering matrix must be square and nonempty");
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    if (std::abs(c(i, i) - 1.0) > 1e-12) throw ArgumentError("co-clustering matrix needs a unit diagonal");
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      const double v = c(i, j);
      if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) throw ArgumentError("co-clustering entries must lie in [0, 1]");
      if (std::abs(v - c(j, i)) > 1e-12) throw ArgumentError("co-clustering matrix must be symmetric");
    }
  }
}

// ------------------------------------------------------------- hypercube

GammaVector quantile_probability_model(std::span<const double> q, double a) {
  validate_weight(a, "quantile_probability_model");
  if (q.empty() || q.size() > static_cast<std::size_t>(kMaxGammaP)) throw ArgumentError("quantile model: bad p");
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!(q[i] >= 0.0 && q[i] <= 1.0)) throw ArgumentError("quantile model: probabilities must lie in [0, 1]");
    if (q[i] > 0.5 * a) mask |= 1ULL << i;
  }
  return GammaVector(static_cast<int>(q.size()), mask);
}

GammaVector highest_probability_model(const GammaPosterior& post) {
  GammaVector best = GammaVector::from_lex_index(post.p, 0);
  double best_p = post.probs[0];
  for (std::uint64_t idx = 1; idx < post.probs.size(); ++idx) {
    const double v = post.probs[idx];
    if (v < best_p) continue;
    const auto g = GammaVector::from_lex_index(post.p, idx);
    if (v > best_p || simpler_first(g, best)) {
      best = g;
      best_p = v;
    }
  }
  return best;
}

double gh_risk_posterior(std::span<const double> q, const GammaVector& action, double a) {
  validate_weight(a, "gh_risk_posterior");
  if (static_cast<int>(q.size()) != action.p()) throw ArgumentError("gh_risk_posterior: dimension mismatch");
  double r = 0.0;
  for (int i = 0; i < action.p(); ++i) r += action[i] ? a * (1.0 - q[i]) : (2.0 - a) * q[i];
  return r;
}

// ------------------------------------------------------------ partitions

double gb_risk_posterior(const Eigen::MatrixXd& c, const Partition& zhat, double a) {
  validate_weight(a, "gb_risk_posterior");
  require_square(c, zhat.p(), "gb_risk_posterior");
  const double tau = (2.0 - a) / 2.0;
  double r = 0.0;
  for (int i = 0; i < zhat.p(); ++i) {
    for (int j = i + 1; j < zhat.p(); ++j) r += check(tau, (zhat.together(i, j) ? 1.0 : 0.0) - c(i, j));
  }
  return r;
}

double gb_risk_posterior_direct(const Eigen::MatrixXd& c, const Partition& zhat, double a) {
  validate_weight(a, "gb_risk_posterior_direct");
  require_square(c, zhat.p(), "gb_risk_posterior_direct");
  double r = 0.0;
  for (int i = 0; i < zhat.p(); ++i) {
    for (int j = i + 1; j < zhat.p(); ++j) {
      r += zhat.together(i, j) ? (2.0 - a) * (1.0 - c(i, j)) : a * c(i, j);
    }
  }
  return r;
}

double vi_risk_posterior(std::span<const Partition> draws, const Partition& zhat) {
  if (draws.empty()) throw ArgumentError("vi_risk_posterior: no draws");
  double acc = 0.0;
  for (const auto& z : draws) acc += vi_loss(z, zhat);
  return acc / static_cast<double>(draws.size());
}

double vi_entropy_term(std::span<const Partition> draws) {
  if (draws.empty()) throw ArgumentError("vi_entropy_term: no draws");
  double acc = 0.0;
  for (const auto& z : draws) {
    double h = 0.0;
    for (int n : z.sizes()) h += xlog2x(n);
    acc += h / z.p();
  }
  return acc / static_cast<double>(draws.size());
}

double vi_lb_risk_posterior(const Eigen::MatrixXd& c, const Partition& zhat, std::optional<double> h) {
  const int p = zhat.p();
  require_square(c, p, "vi_lb_risk_posterior");
  const auto sizes = zhat.sizes();
  double r = 0.0;
  for (int i = 0; i < p; ++i) {
    double inner = 0.0;
    for (int j = 0; j < p; ++j) {
      if (zhat.together(i, j)) inner += c(i, j);
    }
    r += std::log2(static_cast<double>(sizes[zhat.label(i) - 1])) - 2.0 * std::log2(inner);
  }
  return r / p + h.value_or(0.0);
}

// ------------------------------------------------------------ allocation

AllocationState::AllocationState(int p) : slot_(p, -1), size_(p, 0), members_(p) {}

Partition AllocationState::partition() const {
  std::vector<int> labels(slot_.size());
  for (std::size_t i = 0; i < slot_.size(); ++i) {
    if (slot_[i] < 0) throw ArgumentError("allocation incomplete");
    labels[i] = slot_[i] + 1;
  }
  return canonicalize(labels);
}

void AllocationState::add(int item, int slot) {
  slot_[item] = slot;
  if (size_[slot]++ == 0) ++clusters_;
  members_[slot].push_back(item);
  on_add(item, slot);
}

void AllocationState::remove(int item) {
  const int slot = slot_[item];
  on_remove(item, slot);
  auto& m = members_[slot];
  m.erase(std::find(m.begin(), m.end(), item));
  if (--size_[slot] == 0) --clusters_;
  slot_[item] = -1;
}

GbObjective::GbObjective(Eigen::MatrixXd c, double a) : c_(std::move(c)), a_(a) {
  validate_weight(a, "GB objective");
  validate_coclustering(c_);
}
double GbObjective::risk(const Partition& z) const { return gb_risk_posterior(c_, z, a_); }
std::unique_ptr<AllocationState> GbObjective::start() const { return std::make_unique<GbState>(c_, a_); }

ViLbObjective::ViLbObjective(Eigen::MatrixXd c) : c_(std::move(c)) { validate_coclustering(c_); }
double ViLbObjective::risk(const Partition& z) const { return vi_lb_risk_posterior(c_, z); }
std::unique_ptr<AllocationState> ViLbObjective::start() const { return std::make_unique<ViLbState>(c_); }

ViObjective::ViObjective(std::vector<Partition> draws) : draws_(std::move(draws)) {
  if (draws_.empty()) throw ArgumentError("VI objective: no draws");
  p_ = draws_.front().p();
  for (const auto& z : draws_) {
    if (z.p() != p_) throw ArgumentError("VI objective: draws have different p");
  }
}
double ViObjective::risk(const Partition& z) const { return vi_risk_posterior(draws_, z); }
std::unique_ptr<AllocationState> ViObjective::start() const { return std::make_unique<ViState>(draws_, p_); }

CallableObjective::CallableObjective(int p, std::function<double(const Partition&)> fn) : p_(p), fn_(std::move(fn)) {
  if (p < 1) throw ArgumentError("callable objective: p must be positive");
}
std::unique_ptr<AllocationState> CallableObjective::start() const { return std::make_unique<CallableState>(p_, fn_); }

// ---------------------------------------------------------------- search

SearchResult greedy_minimizer(const PartitionObjective& objective, const SearchConfig& cfg) {
  if (cfg.restarts < 1) throw ArgumentError("greedy search: restarts must be at least 1");
  if (cfg.max_sweeps < 0) throw ArgumentError("greedy search: max_sweeps must be nonnegative");
  if (cfg.candidate_k_max && *cfg.candidate_k_max < 1) throw ArgumentError("greedy search: k_max must be positive");
  std::vector<std::optional<RestartOutcome>> outcomes(cfg.restarts);
  parallel_for(static_cast<std::size_t>(cfg.restarts), cfg.threads,
               [&](std::size_t r) { outcomes[r] = run_restart(objective, cfg, r); });
  SearchResult best{outcomes[0]->z, outcomes[0]->risk, 0};
  for (int r = 1; r < cfg.restarts; ++r) {
    if (better(outcomes[r]->risk, outcomes[r]->z, best.risk, best.estimate)) {
      best = {outcomes[r]->z, outcomes[r]->risk, r};
    }
  }
  return best;
}

Partition greedy_minimizer(const std::function<double(const Partition&)>& risk, int p, const SearchConfig& cfg) {
  return greedy_minimizer(CallableObjective(p, risk), cfg).estimate;
}

Partition exhaustive_minimizer(const std::function<double(const Partition&)>& risk, int p) {
  std::optional<Partition> best;
  double best_risk = 0.0;
  for (const auto& z : enumerate_partitions(p)) {
    const double r = risk(z);
    if (!best || better(r, z, best_risk, *best)) {
      best = z;
      best_risk = r;
    }
  }
  return *best;
}

GammaVector exhaustive_minimizer(const std::function<double(const GammaVector&)>& risk, int p) {
  std::optional<GammaVector> best;
  double best_risk = 0.0;
  for (const auto& g : enumerate_gamma(p)) {
    const double r = risk(g);
    const double eps = 1e-12 * std::max(1.0, std::abs(best_risk));
    if (!best || r < best_risk - eps || (r <= best_risk + eps && simpler_first(g, *best))) {
      best = g;
      best_risk = r;
    }
  }
  return *best;
}

// ----------------------------------------------------------------- draws

std::vector<Partition> parse_draws(std::string_view text) {
  std::vector<Partition> draws;
  for (const auto& line : split_lines(text)) {
    std::string s = line;
    s.erase(std::remove(s.begin(), s.end(), '"'), s.end());
    draws.push_back(Partition::parse(s));
    if (draws.back().p() != draws.front().p()) throw ArgumentError("draws: lines have different lengths");
  }
  if (draws.empty()) throw ArgumentError("draws: no partitions");
  return draws;
}

std::vector<Partition> load_draws(const std::filesystem::path& path) { return parse_draws(read_text(path)); }

std::string draws_to_csv(std::span<const Partition> draws) {
  std::string out;
  for (const auto& z : draws) out += z.to_string() + "\n";
  return out;
}

}  // namespace riskcal
