#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "riskcal/bca.hpp"
#include "riskcal/bvs.hpp"
#include "riskcal/csv.hpp"
#include "riskcal/errors.hpp"
#include "riskcal/estimators.hpp"
#include "riskcal/losses.hpp"
#include "riskcal/model_space.hpp"
#include "riskcal/parallel.hpp"
#include "riskcal/prior_io.hpp"
#include "riskcal/priors.hpp"
#include "riskcal/risk.hpp"
#include "riskcal/version.hpp"

#ifndef RISKCAL_DEFAULT_DATA_DIR
#define RISKCAL_DEFAULT_DATA_DIR "data"
#endif

namespace riskcal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out_dir;
  std::string format;
};

class Context {
 public:
  Context(std::string command, const std::vector<std::string>& args, const Common& common, std::ostream& out,
          std::ostream& err)
      : command_(std::move(command)), args_(args), common_(common), out_(out), err_(err) {}

  const Common& common() const { return common_; }
  std::ostream& log() const { return err_; }
  int threads() const { return resolve_threads(common_.threads); }

  std::string format(std::string_view natural) const {
    return common_.format.empty() ? std::string(natural) : common_.format;
  }

  json metadata(std::uint64_t seed) const {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return {{"tool", "riskcal"}, {"version", kVersion}, {"command", command_},
            {"args", args_},     {"seed", seed},        {"timestamp", stamp}};
  }
  json metadata() const { return metadata(common_.seed); }

  // One artifact: a file under --out, or stdout.
  void emit(const std::string& name, std::string_view content) const {
    if (common_.out_dir.empty()) {
      out_ << content;
      if (!content.empty() && content.back() != '\n') out_ << '\n';
      return;
    }
    const fs::path dir(common_.out_dir);
    fs::create_directories(dir);
    write_text(dir / name, content);
    err_ << "wrote " << (dir / name).string() << '\n';
  }

  // Several artifacts: files under --out, or "# name" sections on stdout.
  void emit_all(const std::vector<std::pair<std::string, std::string>>& artifacts) const {
    if (!common_.out_dir.empty()) {
      for (const auto& [name, content] : artifacts) emit(name, content);
      return;
    }
    for (std::size_t i = 0; i < artifacts.size(); ++i) {
      if (i > 0) out_ << '\n';
      out_ << "# " << artifacts[i].first << '\n' << artifacts[i].second;
    }
  }

  void emit_json(const std::string& name, json body, std::uint64_t seed) const {
    body["metadata"] = metadata(seed);
    emit(name, body.dump(2) + "\n");
  }
  void emit_json(const std::string& name, json body) const { emit_json(name, std::move(body), common_.seed); }

  // Sidecar written next to CSV artifacts.
  void emit_metadata(std::uint64_t seed, json extra = json::object()) const {
    if (common_.out_dir.empty()) return;
    json meta = metadata(seed);
    for (auto& [k, v] : extra.items()) meta[k] = v;
    emit("metadata.json", meta.dump(2) + "\n");
  }
  void emit_metadata() const { emit_metadata(common_.seed); }

 private:
  std::string command_;
  std::vector<std::string> args_;
  Common common_;
  std::ostream& out_;
  std::ostream& err_;
};

bool looks_like_file(const std::string& text) {
  const fs::path p(text);
  const auto ext = p.extension().string();
  return ext == ".csv" || ext == ".json" || ext == ".txt" || fs::exists(p);
}

PriorSpec read_prior(const std::string& text) {
  if (text.ends_with(".json")) return parse_prior(resolve_input(text).string());
  if (text.starts_with("table:")) return load_table_prior(resolve_input(text.substr(6)));
  return parse_prior(text);
}

LossSpec read_loss(const std::string& text, double a) {
  if (looks_like_file(text)) return LossSpec::from_matrix(LossMatrix::load_csv(resolve_input(text)));
  return LossSpec::parse(text, a);
}

std::vector<LossSpec> read_losses(const std::vector<std::string>& texts, double a) {
  std::vector<LossSpec> out;
  for (const auto& t : texts) out.push_back(LossSpec::parse(t, a));
  return out;
}

ModelSpace space_of(const LossSpec& loss, const std::string& space) {
  if (space == "hypercube") return ModelSpace::hypercube;
  if (space == "partition") return ModelSpace::partition;
  if (loss.kind == LossKind::zero_one) throw ArgumentError("zero-one loss needs --space hypercube|partition");
  return loss.defined_on_gamma() ? ModelSpace::hypercube : ModelSpace::partition;
}

std::string verdict_word(bool ok, std::string_view yes) {
  return ok ? std::string(yes) : "not-" + std::string(yes);
}

// ----------------------------------------------------------------- risk

struct RiskArgs {
  std::string prior;
  std::string loss;
  double a = 1.0;
  int p = 0;
  std::string method = "exact-enumeration";
  std::size_t samples = 100'000;
};

void add_risk(CLI::App& app, RiskArgs& r) {
  app.add_option("--prior", r.prior, "Prior: short form, JSON object or JSON file")->required();
  app.add_option("--loss", r.loss, "Loss: 01, GH[:a], GB[:a], VI, VI-LB or a loss-matrix CSV")->required();
  app.add_option("--a", r.a, "Weight for bare GH / GB")->capture_default_str();
  app.add_option("--p", r.p, "Number of variables / items")->required()->check(CLI::PositiveNumber);
  app.add_option("--method", r.method, "Risk method")
      ->check(CLI::IsMember({"exact-enumeration", "exact", "closed-form", "monte-carlo"}))
      ->capture_default_str();
  app.add_option("--samples", r.samples, "Monte Carlo sample size")->capture_default_str();
}

int run_risk(const Context& ctx, const RiskArgs& r) {
  const auto prior = read_prior(r.prior);
  const auto loss = read_loss(r.loss, r.a);
  RiskOptions opts;
  opts.method = *parse_risk_method(r.method);
  opts.samples = r.samples;
  opts.seed = ctx.common().seed;
  const auto profile = prior_risk(prior, loss, r.p, opts);
  if (ctx.format("csv") == "json") {
    json j = profile;
    j["prior_spec"] = prior_to_json(prior);
    j["spread"] = profile.spread();
    ctx.emit_json("risk.json", j);
  } else {
    ctx.emit("risk.csv", risk_profile_csv(profile));
    ctx.emit_metadata();
  }
  return kExitOk;
}

// ---------------------------------------------------------------- check

struct CheckArgs {
  std::string prior;
  std::string loss;
  double a = 1.0;
  int p = 0;
  std::string property = "both";
  std::string route = "auto";
  double tol = kDefaultTolerance;
};

void add_check(CLI::App& app, CheckArgs& c) {
  app.add_option("--prior", c.prior, "Prior: short form, JSON object or JSON file")->required();
  app.add_option("--loss", c.loss, "Loss: 01, GH[:a], GB[:a], VI, VI-LB")->required();
  app.add_option("--a", c.a, "Weight for bare GH / GB")->capture_default_str();
  app.add_option("--p", c.p, "Number of variables / items")->required()->check(CLI::PositiveNumber);
  app.add_option("--property", c.property, "Property to check")
      ->check(CLI::IsMember({"equilibrium", "penalization", "both"}))
      ->capture_default_str();
  app.add_option("--route", c.route, "Certification route; 'both' runs every available route")
      ->check(CLI::IsMember({"auto", "characterization", "enumeration", "both"}))
      ->capture_default_str();
  app.add_option("--tol", c.tol, "Tolerance on risk differences")->capture_default_str();
}

int run_check(const Context& ctx, const CheckArgs& c) {
  const auto prior = read_prior(c.prior);
  const auto loss = read_loss(c.loss, c.a);
  std::optional<Route> route;
  if (c.route == "characterization") route = Route::characterization;
  if (c.route == "enumeration") route = Route::enumeration;

  json j{{"prior", prior_to_json(prior)}, {"loss", loss.name()}, {"p", c.p}};
  std::vector<std::vector<std::string>> rows;
  auto add_rows = [&](std::string_view property, const json& report) {
    rows.push_back({std::string(property), report.at("route").get<std::string>(), report.at("verdict").get<std::string>(),
                    format_number(report.contains("max_spread") ? report.at("max_spread").get<double>()
                                                                : report.at("worst_decrease").get<double>())});
  };

  std::optional<bool> eq;
  std::optional<bool> pen;
  if (c.property != "penalization") {
    if (c.route == "both") {
      const auto cert = certify_equilibrium(prior, loss, c.p, c.tol);
      eq = cert.equilibrium();
      j["equilibrium"] = cert;
      if (cert.characterization) add_rows("equilibrium", *cert.characterization);
      add_rows("equilibrium", cert.enumeration);
    } else {
      const auto rep = check_equilibrium(prior, loss, c.p, c.tol, route);
      eq = rep.equilibrium;
      j["equilibrium"] = rep;
      add_rows("equilibrium", rep);
    }
  }
  if (c.property != "equilibrium") {
    if (c.route == "both") {
      const auto cert = certify_penalization(prior, loss, c.p, c.tol);
      pen = cert.penalization();
      j["penalization"] = cert;
      if (cert.characterization) add_rows("penalization", *cert.characterization);
      add_rows("penalization", cert.enumeration);
    } else {
      const auto rep = check_penalization(prior, loss, c.p, c.tol, route);
      pen = rep.penalization;
      j["penalization"] = rep;
      add_rows("penalization", rep);
    }
  }
  if (eq && pen) {
    j["verdict"] = *eq ? "equilibrium" : (*pen ? "penalization" : "neither");
  } else if (eq) {
    j["verdict"] = verdict_word(*eq, "equilibrium");
  } else {
    j["verdict"] = verdict_word(*pen, "penalization");
  }

  if (ctx.format("json") == "csv") {
    std::string out = "property,route,verdict,measure\n";
    for (const auto& r : rows) out += r[0] + "," + r[1] + "," + r[2] + "," + r[3] + "\n";
    ctx.emit("check.csv", out);
    ctx.emit_metadata();
  } else {
    ctx.emit_json("check.json", j);
  }
  return kExitOk;
}

// ---------------------------------------------------------- solve-prior

struct SolveArgs {
  std::string loss;
  double a = 1.0;
  int p = 0;
  std::string space;
};

void add_solve(CLI::App& app, SolveArgs& s) {
  app.add_option("--loss", s.loss, "Loss-matrix CSV, or a structured loss with --p")->required();
  app.add_option("--a", s.a, "Weight for bare GH / GB")->capture_default_str();
  app.add_option("--p", s.p, "Dimension for structured losses");
  app.add_option("--space", s.space, "Model space for zero-one loss")->check(CLI::IsMember({"hypercube", "partition"}));
}

int run_solve(const Context& ctx, const SolveArgs& s) {
  auto loss = read_loss(s.loss, s.a);
  if (loss.kind != LossKind::matrix) {
    if (s.p < 1) throw ArgumentError("solve-prior: structured losses need --p");
    loss = LossSpec::from_matrix(space_of(loss, s.space) == ModelSpace::hypercube ? gamma_loss_matrix(loss, s.p)
                                                                                   : partition_loss_matrix(loss, s.p));
  }
  const auto sol = solve_equilibrium(*loss.matrix);
  if (ctx.format("json") == "csv") {
    std::string out = "model,probability\n";
    for (std::size_t i = 0; i < sol.prior.size(); ++i) {
      out += "\"" + sol.models[i] + "\"," + format_number(sol.prior[i]) + "\n";
    }
    ctx.emit("solution.csv", out);
    ctx.emit_metadata(ctx.common().seed, {{"status", std::string(to_string(sol.status))}});
  } else {
    ctx.emit_json("solution.json", json(sol));
  }
  return kExitOk;
}

// ------------------------------------------------------------ calibrate

struct CalibrateArgs {
  std::string prior;
  std::string free;
  double target = 0.5;
  int p = 0;
};

void add_calibrate(CLI::App& app, CalibrateArgs& c) {
  app.add_option("--prior", c.prior, "Base prior; the free hyperparameter is overwritten")->required();
  app.add_option("--free", c.free, "Hyperparameter to solve for (family default when omitted)");
  app.add_option("--target", c.target, "Target inclusion / co-clustering probability")->capture_default_str();
  app.add_option("--p", c.p, "Dimension, for families whose summary depends on it");
}

int run_calibrate(const Context& ctx, const CalibrateArgs& c) {
  CalibrationRequest req;
  req.base = read_prior(c.prior);
  req.free = c.free.empty() ? default_free_parameter(req.base) : c.free;
  req.target = c.target;
  if (c.p > 0) req.p = c.p;
  const auto res = calibrate(req);
  json j{{"prior", prior_to_json(res.prior)}, {"label", res.prior.label()}, {"free", res.free},
         {"value", res.value},                {"target", c.target},       {"achieved", res.achieved},
         {"closed_form", res.closed_form}};
  if (ctx.format("json") == "csv") {
    ctx.emit("calibration.csv", "free,value,target,achieved,closed_form\n" + res.free + "," + format_number(res.value) +
                                    "," + format_number(c.target) + "," + format_number(res.achieved) + "," +
                                    (res.closed_form ? "true" : "false") + "\n");
    ctx.emit_metadata();
  } else {
    ctx.emit_json("calibration.json", j);
  }
  return kExitOk;
}

// ------------------------------------------------------------- estimate

struct SearchArgs {
  int restarts = 16;
  int max_sweeps = 100;
  int k_max = 0;
};

void add_search(CLI::App& app, SearchArgs& s) {
  app.add_option("--restarts", s.restarts, "Greedy restarts")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--max-sweeps", s.max_sweeps, "Reallocation sweeps per restart")->capture_default_str();
  app.add_option("--k-max", s.k_max, "Cap on clusters considered (0: none)");
}

SearchConfig search_config(const SearchArgs& s, std::uint64_t seed, int threads) {
  SearchConfig cfg;
  cfg.restarts = s.restarts;
  cfg.max_sweeps = s.max_sweeps;
  cfg.seed = seed;
  cfg.threads = threads;
  if (s.k_max > 0) cfg.candidate_k_max = s.k_max;
  return cfg;
}

struct EstimateArgs {
  std::string loss;
  double a = 1.0;
  std::string posterior;
  std::string inclusion;
  std::string draws;
  std::string coclustering;
  std::string search = "greedy";
  SearchArgs search_args;
};

void add_estimate(CLI::App& app, EstimateArgs& e) {
  app.add_option("--loss", e.loss, "Loss: 01, GH[:a], GB[:a], VI, VI-LB")->required();
  app.add_option("--a", e.a, "Weight for bare GH / GB")->capture_default_str();
  auto* group = app.add_option_group("posterior", "Posterior summary (exactly one)");
  group->add_option("--posterior", e.posterior, "Full posterior table CSV: model,probability");
  group->add_option("--inclusion", e.inclusion, "Marginal inclusion probabilities, one per line");
  group->add_option("--draws", e.draws, "Partition draws CSV, one label vector per line");
  group->add_option("--coclustering", e.coclustering, "Co-clustering matrix CSV");
  group->require_option(1);
  app.add_option("--search", e.search, "Partition search")
      ->check(CLI::IsMember({"greedy", "exhaustive"}))
      ->capture_default_str();
  add_search(app, e.search_args);
}

int run_estimate(const Context& ctx, const EstimateArgs& e) {
  const auto loss = LossSpec::parse(e.loss, e.a);
  json j{{"loss", loss.name()}};
  std::string estimate;
  double risk = 0.0;

  if (!e.posterior.empty() || !e.inclusion.empty()) {
    if (!loss.defined_on_gamma()) throw ArgumentError("estimate: " + loss.name() + " needs a partition posterior");
    GammaVector g;
    if (!e.posterior.empty()) {
      const auto table = load_table_prior(resolve_input(e.posterior));
      const auto* t = table.get<TablePrior>();
      if (t->space != ModelSpace::hypercube) throw ArgumentError("estimate: --posterior expects inclusion vectors");
      std::vector<double> probs(std::size_t{1} << t->p, 0.0);
      for (const auto& [model, prob] : t->probs) probs[GammaVector::parse(model).lex_index()] = prob;
      const auto post = GammaPosterior::from_table(t->p, std::move(probs));
      if (loss.kind == LossKind::zero_one) {
        g = highest_probability_model(post);
        risk = 1.0 - post.prob(g);
      } else {
        g = quantile_probability_model(post.inclusion, loss.a);
        risk = gh_risk_posterior(post.inclusion, g, loss.a);
      }
      j["inclusion"] = post.inclusion;
    } else {
      if (loss.kind != LossKind::generalized_hamming) {
        throw ArgumentError("estimate: inclusion probabilities only determine GH estimators");
      }
      const auto q = load_real_sequence(resolve_input(e.inclusion));
      g = quantile_probability_model(q, loss.a);
      risk = gh_risk_posterior(q, g, loss.a);
    }
    estimate = g.to_string();
    j["size"] = g.size();
    j["method"] = loss.kind == LossKind::zero_one ? "highest-probability" : "quantile-threshold";
  } else {
    if (!loss.defined_on_partition() && loss.kind != LossKind::vi_lower_bound) {
      throw ArgumentError("estimate: " + loss.name() + " needs an inclusion-vector posterior");
    }
    std::vector<Partition> draws;
    Eigen::MatrixXd c;
    if (!e.draws.empty()) {
      draws = load_draws(resolve_input(e.draws));
      c = coclustering_from_draws(draws);
    } else {
      c = parse_matrix_csv(read_text(resolve_input(e.coclustering)));
      validate_coclustering(c);
    }
    std::unique_ptr<PartitionObjective> objective;
    switch (loss.kind) {
      case LossKind::generalized_binder:
        objective = std::make_unique<GbObjective>(c, loss.a);
        break;
      case LossKind::vi_lower_bound:
        objective = std::make_unique<ViLbObjective>(c);
        j["constant_omitted"] = true;
        break;
      case LossKind::vi:
        if (draws.empty()) throw ArgumentError("estimate: VI needs --draws");
        objective = std::make_unique<ViObjective>(draws);
        break;
      case LossKind::zero_one: {
        if (draws.empty()) throw ArgumentError("estimate: zero-one loss needs --draws");
        const auto counts = std::make_shared<std::map<Partition, double>>();
        for (const auto& z : draws) (*counts)[z] += 1.0 / static_cast<double>(draws.size());
        objective = std::make_unique<CallableObjective>(static_cast<int>(c.rows()), [counts](const Partition& z) {
          const auto it = counts->find(z);
          return 1.0 - (it == counts->end() ? 0.0 : it->second);
        });
        break;
      }
      default:
        throw ArgumentError("estimate: unsupported loss " + loss.name());
    }
    Partition z;
    if (e.search == "exhaustive") {
      z = exhaustive_minimizer([&](const Partition& m) { return objective->risk(m); }, objective->p());
      risk = objective->risk(z);
    } else {
      const auto res = greedy_minimizer(*objective, search_config(e.search_args, ctx.common().seed, ctx.threads()));
      z = res.estimate;
      risk = res.risk;
      j["best_restart"] = res.best_restart;
    }
    estimate = z.to_string();
    j["clusters"] = z.k();
    j["method"] = e.search;
  }
  j["estimate"] = estimate;
  j["risk"] = risk;
  if (ctx.format("json") == "csv") {
    ctx.emit("estimate.csv", "estimate,risk\n\"" + estimate + "\"," + format_number(risk) + "\n");
    ctx.emit_metadata();
  } else {
    ctx.emit_json("estimate.json", j);
  }
  return kExitOk;
}

// -------------------------------------------------------------- bvs-sim

struct BvsArgs {
  std::string config;
  std::vector<int> n;
  int p = 0;
  std::vector<double> beta;
  std::optional<double> sigma2;
  int replicates = 0;
  std::vector<std::string> priors;
  std::vector<std::string> losses;
  std::string reference_prior;
  std::string reference_loss;
  std::string likelihood;
  std::optional<double> g;
  int nodes = 0;
  bool dump_config = false;
};

void add_bvs(CLI::App& app, BvsArgs& b) {
  app.add_option("--config", b.config, "SimulationConfig JSON; flags override its fields");
  app.add_option("--n", b.n, "Sample sizes, one scenario each")->delimiter(',');
  app.add_option("--p", b.p, "Number of candidate variables");
  app.add_option("--beta", b.beta, "True coefficients (p values)")->delimiter(',')->allow_extra_args(false);
  app.add_option("--sigma2", b.sigma2, "Noise variance");
  app.add_option("--replicates", b.replicates, "Replicates per scenario");
  app.add_option("--prior", b.priors, "Named prior name=spec (repeatable, replaces the default grid)");
  app.add_option("--losses", b.losses, "Losses, comma separated (replaces the default grid)")->delimiter(',');
  app.add_option("--reference-prior", b.reference_prior, "Name of the reference prior column");
  app.add_option("--reference-loss", b.reference_loss, "Name of the reference loss row");
  app.add_option("--likelihood", b.likelihood, "Marginal likelihood")->check(CLI::IsMember({"g-prior", "zellner-siow"}));
  app.add_option("--g", b.g, "g for the g-prior (default n)");
  app.add_option("--nodes", b.nodes, "Zellner-Siow quadrature nodes per panel");
  app.add_flag("--dump-config", b.dump_config, "Print the resolved configuration and exit");
}

int run_bvs(const Context& ctx, const BvsArgs& b, bool seed_given) {
  auto cfg = b.config.empty() ? default_simulation_config()
                              : simulation_config_from_json(json::parse(read_text(resolve_input(b.config))));
  if (!b.n.empty()) cfg.n = b.n;
  if (b.p > 0) {
    cfg.p = b.p;
    if (b.beta.empty() && static_cast<int>(cfg.beta.size()) != b.p) {
      cfg.beta.resize(b.p, 0.0);  // pad with null effects, keep the leading signal
    }
  }
  if (!b.beta.empty()) cfg.beta = b.beta;
  if (b.sigma2) cfg.sigma2 = *b.sigma2;
  if (b.replicates > 0) cfg.replicates = b.replicates;
  if (!b.priors.empty()) {
    cfg.priors.clear();
    for (const auto& item : b.priors) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ArgumentError("bvs-sim: --prior expects name=spec, got '" + item + "'");
      cfg.priors.push_back({item.substr(0, eq), read_prior(item.substr(eq + 1))});
    }
  }
  if (!b.losses.empty()) cfg.losses = read_losses(b.losses, 1.0);
  if (!b.reference_prior.empty()) cfg.reference_prior = b.reference_prior;
  if (!b.reference_loss.empty()) cfg.reference_loss = b.reference_loss;
  if (b.likelihood == "g-prior") cfg.likelihood.kind = LikelihoodKind::g_prior;
  if (b.likelihood == "zellner-siow") cfg.likelihood.kind = LikelihoodKind::zellner_siow;
  if (b.g) cfg.likelihood.g = *b.g;
  if (b.nodes > 0) cfg.likelihood.nodes = b.nodes;
  if (seed_given) cfg.seed = ctx.common().seed;
  cfg.threads = ctx.threads();
  cfg.validate();

  const json cfg_json = simulation_config_to_json(cfg);
  if (b.dump_config) {
    ctx.emit("config.json", cfg_json.dump(2) + "\n");
    return kExitOk;
  }
  ctx.log() << "bvs-sim: " << cfg.n.size() << " scenarios x " << cfg.replicates << " replicates, p=" << cfg.p << '\n';
  const auto rep = run_simulation(cfg);

  if (ctx.format("csv") == "json") {
    json j{{"config", cfg_json}, {"scenarios", json::array()}};
    for (const auto& s : rep.scenarios) {
      auto table = [](const ReportTable& t) {
        json tj{{"rows", t.rows}, {"cols", t.cols}, {"mean", json::array()}, {"se", json::array()}};
        for (Eigen::Index r = 0; r < t.mean.rows(); ++r) {
          std::vector<double> m(t.mean.cols());
          std::vector<double> e(t.se.cols());
          for (Eigen::Index c = 0; c < t.mean.cols(); ++c) {
            m[c] = t.mean(r, c);
            e[c] = t.se(r, c);
          }
          tj["mean"].push_back(m);
          tj["se"].push_back(e);
        }
        return tj;
      };
      j["scenarios"].push_back({{"n", s.n}, {"distance", table(s.distance)}, {"size", table(s.size)}});
    }
    ctx.emit_json("bvs-sim.json", j, cfg.seed);
    return kExitOk;
  }
  std::vector<std::pair<std::string, std::string>> artifacts;
  for (const auto& s : rep.scenarios) {
    const std::string tag = "_n" + std::to_string(s.n) + ".csv";
    artifacts.emplace_back("distance" + tag, s.distance.mean_csv());
    artifacts.emplace_back("distance_se" + tag, s.distance.se_csv());
    artifacts.emplace_back("size" + tag, s.size.mean_csv());
    artifacts.emplace_back("size_se" + tag, s.size.se_csv());
  }
  ctx.emit_all(artifacts);
  if (!ctx.common().out_dir.empty()) ctx.emit("config.json", cfg_json.dump(2) + "\n");
  ctx.emit_metadata(cfg.seed);
  return kExitOk;
}

// ---------------------------------------------------------- bca-fit/report

struct McmcArgs {
  std::string data = "galaxies.txt";
  int iterations = 20'000;
  int burn_in = 5'000;
  int thin = 5;
  std::optional<double> m0;
  std::optional<double> k0;
  std::optional<double> a0;
  std::optional<double> b0;
};

void add_mcmc(CLI::App& app, McmcArgs& m) {
  app.add_option("--data", m.data, "Newline-separated reals (bare names resolve in the data directory)")
      ->capture_default_str();
  app.add_option("--iterations", m.iterations, "Gibbs sweeps")->capture_default_str();
  app.add_option("--burn-in", m.burn_in, "Discarded sweeps")->capture_default_str();
  app.add_option("--thin", m.thin, "Thinning stride")->capture_default_str();
  app.add_option("--m0", m.m0, "Base mean (default: data mean)");
  app.add_option("--k0", m.k0, "Base precision scale (default 0.01)");
  app.add_option("--a0", m.a0, "Inverse-gamma shape (default 2)");
  app.add_option("--b0", m.b0, "Inverse-gamma scale (default: data variance)");
}

DPMMConfig mcmc_config(const McmcArgs& m, const std::vector<double>& data) {
  DPMMConfig cfg;
  cfg.iterations = m.iterations;
  cfg.burn_in = m.burn_in;
  cfg.thin = m.thin;
  if (m.m0 || m.k0 || m.a0 || m.b0) {
    auto base = NigBase::empirical(data);
    if (m.m0) base.m0 = *m.m0;
    if (m.k0) base.k0 = *m.k0;
    if (m.a0) base.a0 = *m.a0;
    if (m.b0) base.b0 = *m.b0;
    cfg.base = base;
  }
  return cfg;
}

struct FitArgs {
  McmcArgs mcmc;
  double theta = 1.0;
  bool prior_only = false;
  int p = 0;
};

void add_fit(CLI::App& app, FitArgs& f) {
  add_mcmc(app, f.mcmc);
  app.add_option("--theta", f.theta, "CRP concentration")->capture_default_str();
  app.add_flag("--prior-only", f.prior_only, "Drop the likelihood (sampler check)");
  app.add_option("--p", f.p, "Item count for --prior-only runs without data");
}

int run_fit(const Context& ctx, const FitArgs& f) {
  std::vector<double> data;
  if (f.prior_only && f.p > 0) {
    data.assign(f.p, 0.0);
  } else {
    data = load_real_sequence(resolve_input(f.mcmc.data));
  }
  auto cfg = mcmc_config(f.mcmc, data);
  cfg.theta = f.theta;
  cfg.prior_only = f.prior_only;
  cfg.seed = ctx.common().seed;
  const auto set = dpmm_sample(data, cfg);
  ctx.log() << "bca-fit: " << set.draws.size() << " draws (" << set.provenance << ")\n";
  if (ctx.format("csv") == "json") {
    std::vector<std::string> draws;
    for (const auto& z : set.draws) draws.push_back(z.to_string());
    ctx.emit_json("draws.json", {{"provenance", set.provenance}, {"draws", draws}});
    return kExitOk;
  }
  ctx.emit("draws.csv", draws_to_csv(set.draws));
  if (!ctx.common().out_dir.empty()) ctx.emit("coclustering.csv", matrix_to_csv(coclustering_matrix(set)));
  ctx.emit_metadata(cfg.seed, {{"provenance", set.provenance}});
  return kExitOk;
}

struct ReportArgs {
  McmcArgs mcmc;
  SearchArgs search;
  std::vector<double> prior_a;
  std::vector<double> loss_a;
  bool no_vi = false;
  bool no_vi_lb = false;
  int repeats = 5;
};

void add_report(CLI::App& app, ReportArgs& r) {
  add_mcmc(app, r.mcmc);
  add_search(app, r.search);
  app.add_option("--prior-a", r.prior_a, "Prior grid a; theta = a / (2 - a)")->delimiter(',');
  app.add_option("--loss-a", r.loss_a, "Binder weights")->delimiter(',');
  app.add_flag("--no-vi", r.no_vi, "Skip the VI estimator");
  app.add_flag("--no-vi-lb", r.no_vi_lb, "Skip the VI lower-bound estimator");
  app.add_option("--repeats", r.repeats, "Independent repeats")->capture_default_str();
}

int run_report(const Context& ctx, const ReportArgs& r) {
  const auto data = load_real_sequence(resolve_input(r.mcmc.data));
  GalaxyConfig cfg;
  if (!r.prior_a.empty()) cfg.prior_a = r.prior_a;
  if (!r.loss_a.empty()) cfg.loss_a = r.loss_a;
  cfg.include_vi = !r.no_vi;
  cfg.include_vi_lb = !r.no_vi_lb;
  cfg.mcmc = mcmc_config(r.mcmc, data);
  cfg.search = search_config(r.search, 0, 1);
  cfg.repeats = r.repeats;
  cfg.seed = ctx.common().seed;
  cfg.threads = ctx.threads();
  ctx.log() << "bca-report: " << cfg.repeats << " repeats x " << cfg.prior_a.size() << " chains\n";
  const auto rep = galaxy_pipeline(data, cfg);
  if (ctx.format("csv") == "json") {
    auto matrix = [](const Eigen::MatrixXd& m) {
      json rows = json::array();
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(m.cols());
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(i, c);
        rows.push_back(row);
      }
      return rows;
    };
    json j{{"rows", rep.rows}, {"cols", rep.cols}, {"distance", matrix(rep.mean_distance())},
           {"clusters", matrix(rep.mean_clusters())}};
    json per = json::array();
    for (std::size_t k = 0; k < rep.clusters.size(); ++k) per.push_back(matrix(rep.clusters[k]));
    j["clusters_by_repeat"] = per;
    ctx.emit_json("bca-report.json", j);
    return kExitOk;
  }
  ctx.emit_all({{"distance.csv", rep.distance_csv()}, {"clusters.csv", rep.clusters_csv()}});
  ctx.emit_metadata();
  return kExitOk;
}

// ---------------------------------------------------------------- chain

struct ChainArgs {
  std::string prior;
  int p = 0;
  std::vector<std::string> losses{"GB:1", "VI", "VI-LB"};
  std::string strategy = "balanced-split";
  std::size_t vi_samples = 20'000;
};

void add_chain(CLI::App& app, ChainArgs& c) {
  app.add_option("--prior", c.prior, "Partition prior")->required();
  app.add_option("--p", c.p, "Number of items")->required()->check(CLI::PositiveNumber);
  app.add_option("--losses", c.losses, "Losses, comma separated")->delimiter(',')->capture_default_str();
  app.add_option("--strategy", c.strategy, "Refinement chain; 'all' adds a leading strategy column")
      ->check(CLI::IsMember({"balanced-split", "singleton-peel", "random", "all"}))
      ->capture_default_str();
  app.add_option("--vi-samples", c.vi_samples, "Prior samples for the VI column")->capture_default_str();
}

int run_chain(const Context& ctx, const ChainArgs& c) {
  const auto prior = read_prior(c.prior);
  const auto losses = read_losses(c.losses, 1.0);
  std::vector<ChainStrategy> strategies;
  if (c.strategy == "all") {
    strategies = {ChainStrategy::balanced_split, ChainStrategy::singleton_peel, ChainStrategy::random};
  } else {
    strategies = {*parse_chain_strategy(c.strategy)};
  }
  const std::uint64_t seed = ctx.common().seed;
  std::string csv;
  json j = json::array();
  for (const auto s : strategies) {
    const auto chain = refinement_chain(c.p, s, seed);
    const auto rows = chain_risk(prior, chain, losses, c.vi_samples, seed);
    if (strategies.size() == 1) {
      csv = chain_risk_csv(rows);
    } else {
      const auto body = chain_risk_csv(rows);
      std::istringstream in(body);
      std::string line;
      std::getline(in, line);
      if (csv.empty()) csv = "strategy," + line + "\n";
      while (std::getline(in, line)) csv += std::string(to_string(s)) + "," + line + "\n";
    }
    for (const auto& r : rows) {
      j.push_back({{"strategy", std::string(to_string(s))},
                   {"chain_index", r.chain_index},
                   {"partition", r.partition},
                   {"loss_name", r.loss_name},
                   {"risk", r.risk},
                   {"method", r.method}});
    }
  }
  if (ctx.format("csv") == "json") {
    ctx.emit_json("chain.json", {{"prior", prior_to_json(prior)}, {"p", c.p}, {"rows", j}});
  } else {
    ctx.emit("chain.csv", csv);
    ctx.emit_metadata();
  }
  return kExitOk;
}

void add_common(CLI::App& app, Common& c) {
  app.add_option("--seed", c.seed, "Master RNG seed")->capture_default_str();
  app.add_option("--threads", c.threads, "Worker threads (0: available parallelism)")->capture_default_str();
  app.add_option("--out", c.out_dir, "Directory for artifacts (default: stdout)");
  app.add_option("--format", c.format, "Output format (default depends on the command)")
      ->check(CLI::IsMember({"csv", "json"}));
}

}  // namespace

fs::path data_dir() {
  if (const char* env = std::getenv("RISKCAL_DATA_DIR"); env != nullptr && *env != '\0') return fs::path(env);
  return fs::path(RISKCAL_DEFAULT_DATA_DIR);
}

fs::path resolve_input(const std::string& name) {
  const fs::path p(name);
  if (fs::exists(p)) return p;
  if (!p.has_parent_path()) {
    const auto candidate = data_dir() / p;
    if (fs::exists(candidate)) return candidate;
  }
  return p;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Loss-calibrated prior analysis for Bayesian model selection", "riskcal"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Common common;
  RiskArgs risk_args;
  CheckArgs check_args;
  SolveArgs solve_args;
  CalibrateArgs calibrate_args;
  EstimateArgs estimate_args;
  BvsArgs bvs_args;
  FitArgs fit_args;
  ReportArgs report_args;
  ChainArgs chain_args;

  std::vector<CLI::App*> subs;
  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    add_common(*s, common);
    subs.push_back(s);
    return s;
  };
  auto* risk_cmd = sub("risk", "Prior risk profile over the enumerated model space");
  add_risk(*risk_cmd, risk_args);
  auto* check_cmd = sub("check", "Certify risk equilibrium / penalization");
  add_check(*check_cmd, check_args);
  auto* solve_cmd = sub("solve-prior", "Solve for an equilibrium prior of a loss matrix");
  add_solve(*solve_cmd, solve_args);
  auto* calibrate_cmd = sub("calibrate", "Calibrate a hyperparameter to a target summary");
  add_calibrate(*calibrate_cmd, calibrate_args);
  auto* estimate_cmd = sub("estimate", "Bayes estimator from a posterior summary");
  add_estimate(*estimate_cmd, estimate_args);
  auto* bvs_cmd = sub("bvs-sim", "Variable-selection simulation tables");
  add_bvs(*bvs_cmd, bvs_args);
  auto* fit_cmd = sub("bca-fit", "DP mixture Gibbs sampler; writes partition draws");
  add_fit(*fit_cmd, fit_args);
  auto* report_cmd = sub("bca-report", "Galaxy clustering tables");
  add_report(*report_cmd, report_args);
  auto* chain_cmd = sub("chain", "Prior risks along refinement chains");
  add_chain(*chain_cmd, chain_args);

  std::vector<const char*> argv{"riskcal"};
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    CLI::App* target = &app;
    for (auto* s : subs) {
      if (s->parsed()) target = s;
    }
    out << target->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    CLI::App* target = &app;
    for (auto* s : subs) {
      if (s->parsed()) target = s;
    }
    err << "riskcal: " << e.what() << "\n\n" << target->help();
    return kExitUsageError;
  }

  std::string command;
  for (auto* s : subs) {
    if (s->parsed()) command = s->get_name();
  }
  const Context ctx(command, args, common, out, err);
  try {
    if (command == "risk") return run_risk(ctx, risk_args);
    if (command == "check") return run_check(ctx, check_args);
    if (command == "solve-prior") return run_solve(ctx, solve_args);
    if (command == "calibrate") return run_calibrate(ctx, calibrate_args);
    if (command == "estimate") return run_estimate(ctx, estimate_args);
    if (command == "bvs-sim") return run_bvs(ctx, bvs_args, bvs_cmd->count("--seed") > 0);
    if (command == "bca-fit") return run_fit(ctx, fit_args);
    if (command == "bca-report") return run_report(ctx, report_args);
    if (command == "chain") return run_chain(ctx, chain_args);
  } catch (const Error& e) {
    err << "riskcal " << command << ": " << e.what() << '\n';
    return kExitDomainError;
  } catch (const json::exception& e) {
    err << "riskcal " << command << ": invalid JSON: " << e.what() << '\n';
    return kExitDomainError;
  } catch (const fs::filesystem_error& e) {
    err << "riskcal " << command << ": " << e.what() << '\n';
    return kExitDomainError;
  }
  err << "riskcal: no command\n" << app.help();
  return kExitUsageError;
}

}  // namespace riskcal::cli
