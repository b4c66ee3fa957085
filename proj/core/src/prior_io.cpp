#include "riskcal/prior_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "riskcal/csv.hpp"
#include "riskcal/errors.hpp"

namespace riskcal {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double number_at(const nlohmann::json& params, const char* key) {
  if (!params.contains(key)) throw ArgumentError(std::string("prior JSON: missing parameter '") + key + "'");
  const auto& v = params.at(key);
  if (!v.is_number()) throw ArgumentError(std::string("prior JSON: parameter '") + key + "' must be a number");
  return v.get<double>();
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string unquote(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<double> numbers(std::string_view csv, std::string_view family) {
  std::vector<double> out;
  if (trim(csv).empty()) return out;
  for (const auto& tok : split_csv_line(csv)) {
    try {
      out.push_back(parse_double(trim(tok)));
    } catch (const Error&) {
      throw ArgumentError("prior '" + std::string(family) + "': bad number '" + tok + "'");
    }
  }
  return out;
}

void expect_count(const std::vector<double>& v, std::size_t n, std::string_view family) {
  if (v.size() != n) {
    throw ArgumentError("prior '" + std::string(family) + "': expected " + std::to_string(n) + " parameter(s)");
  }
}

}  // namespace

nlohmann::json k_to_json(const KDistribution& k) {
  switch (k.kind()) {
    case KDistribution::Kind::shifted_poisson: return {{"kind", "shifted-poisson"}, {"lambda", k.parameter()}};
    case KDistribution::Kind::geometric: return {{"kind", "geometric"}, {"s", k.parameter()}};
    case KDistribution::Kind::explicit_pmf: return {{"kind", "explicit"}, {"pmf", k.table()}};
  }
  return {};
}

KDistribution k_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ArgumentError("K distribution JSON: expected an object with 'kind'");
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "shifted-poisson") return KDistribution::shifted_poisson(number_at(j, "lambda"));
  if (kind == "geometric") return KDistribution::geometric(number_at(j, "s"));
  if (kind == "explicit") return KDistribution::explicit_pmf(j.at("pmf").get<std::vector<double>>());
  throw ArgumentError("K distribution JSON: unknown kind '" + kind + "'");
}

nlohmann::json prior_to_json(const PriorSpec& prior) {
  nlohmann::json params = nlohmann::json::object();
  std::visit(overloaded{
                 [](const UniformGammaPrior&) {},
                 [](const UniformPartitionPrior&) {},
                 [&](const BetaBinomialPrior& b) {
                   params["a"] = b.a;
                   params["b"] = b.b;
                 },
                 [&](const TruncExpDecayPrior& t) {
                   params["kappa"] = t.kappa;
                   if (t.s_max) params["s_max"] = *t.s_max;
                 },
                 [&](const CrpPrior& c) { params["theta"] = c.theta; },
                 [&](const Crp2Prior& c) {
                   params["sigma"] = c.sigma;
                   params["theta"] = c.theta;
                 },
                 [&](const DirMultPrior& d) {
                   params["alpha"] = d.alpha;
                   params["K"] = k_to_json(d.k);
                 },
                 [&](const BalanceNeutralPrior& b) { params["K"] = k_to_json(b.k); },
                 [&](const TablePrior& t) {
                   params["space"] = std::string(to_string(t.space));
                   params["p"] = t.p;
                   params["probs"] = t.probs;
                 },
             },
             prior.family());
  return {{"family", prior.family_name()}, {"params", params}};
}

PriorSpec prior_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family")) throw ArgumentError("prior JSON: expected an object with 'family'");
  const auto family = j.at("family").get<std::string>();
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  if (family == "uniform-gamma") return PriorSpec::uniform_gamma();
  if (family == "uniform-partition") return PriorSpec::uniform_partition();
  if (family == "beta-binomial") return PriorSpec::beta_binomial(number_at(params, "a"), number_at(params, "b"));
  if (family == "trunc-exp-decay") {
    std::optional<int> smax;
    if (params.contains("s_max") && !params.at("s_max").is_null()) smax = params.at("s_max").get<int>();
    return PriorSpec::trunc_exp_decay(number_at(params, "kappa"), smax);
  }
  if (family == "crp") return PriorSpec::crp(number_at(params, "theta"));
  if (family == "crp2") return PriorSpec::crp2(number_at(params, "sigma"), number_at(params, "theta"));
  if (family == "dir-mult") {
    if (!params.contains("K")) throw ArgumentError("prior JSON: dir-mult needs 'K'");
    return PriorSpec::dir_mult(number_at(params, "alpha"), k_from_json(params.at("K")));
  }
  if (family == "balance-neutral") {
    if (!params.contains("K")) throw ArgumentError("prior JSON: balance-neutral needs 'K'");
    return PriorSpec::balance_neutral(k_from_json(params.at("K")));
  }
  if (family == "table") {
    const auto space_name = params.value("space", std::string("hypercube"));
    ModelSpace space;
    if (space_name == "hypercube") {
      space = ModelSpace::hypercube;
    } else if (space_name == "partition") {
      space = ModelSpace::partition;
    } else {
      throw ArgumentError("prior JSON: table space must be 'hypercube' or 'partition'");
    }
    return PriorSpec::table(space, params.at("p").get<int>(), params.at("probs").get<std::map<std::string, double>>());
  }
  throw ArgumentError("prior JSON: unknown family '" + family + "'");
}

KDistribution parse_k(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ArgumentError("K distribution '" + std::string(text) + "': expected kind:value");
  const auto kind = trim(text.substr(0, colon));
  const double v = parse_double(trim(text.substr(colon + 1)));
  if (kind == "shifted-poisson" || kind == "poisson") return KDistribution::shifted_poisson(v);
  if (kind == "geometric") return KDistribution::geometric(v);
  throw ArgumentError("K distribution: unknown kind '" + kind + "'");
}

PriorSpec parse_prior(std::string_view raw) {
  const std::string text = trim(raw);
  if (text.empty()) throw ArgumentError("prior: empty specification");
  if (text.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ArgumentError(std::string("prior JSON: ") + e.what());
    }
    return prior_from_json(j);
  }
  if (text.size() > 5 && text.ends_with(".json")) {
    try {
      return prior_from_json(nlohmann::json::parse(read_text(text)));
    } catch (const nlohmann::json::exception& e) {
      throw ArgumentError("prior JSON file '" + text + "': " + e.what());
    }
  }
  const auto colon = text.find(':');
  const std::string family = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? std::string() : text.substr(colon + 1);

  if (family == "uniform-gamma" || family == "uniform") return PriorSpec::uniform_gamma();
  if (family == "uniform-partition") return PriorSpec::uniform_partition();
  if (family == "beta-binomial" || family == "bb") {
    const auto v = numbers(rest, family);
    expect_count(v, 2, family);
    return PriorSpec::beta_binomial(v[0], v[1]);
  }
  if (family == "trunc-exp-decay") {
    const auto v = numbers(rest, family);
    if (v.size() == 1) return PriorSpec::trunc_exp_decay(v[0]);
    expect_count(v, 2, family);
    return PriorSpec::trunc_exp_decay(v[0], static_cast<int>(v[1]));
  }
  if (family == "crp") {
    const auto v = numbers(rest, family);
    expect_count(v, 1, family);
    return PriorSpec::crp(v[0]);
  }
  if (family == "crp2") {
    const auto v = numbers(rest, family);
    expect_count(v, 2, family);
    return PriorSpec::crp2(v[0], v[1]);
  }
  if (family == "dir-mult") {
    const auto comma = rest.find(',');
    if (comma == std::string::npos) throw ArgumentError("prior 'dir-mult': expected alpha,kind:value");
    return PriorSpec::dir_mult(parse_double(trim(rest.substr(0, comma))), parse_k(rest.substr(comma + 1)));
  }
  if (family == "balance-neutral") return PriorSpec::balance_neutral(parse_k(rest));
  if (family == "hier-uniform") {
    const auto v = numbers(rest, family);
    expect_count(v, 2, family);
    return hierarchical_uniform_geometric(static_cast<int>(v[0]), v[1]);
  }
  if (family == "table") return load_table_prior(rest);
  throw ArgumentError("prior: unknown family '" + family + "'");
}

PriorSpec parse_table_prior(std::string_view text) {
  std::map<std::string, double> probs;
  std::optional<ModelSpace> space;
  int p = 0;
  for (const auto& line : split_lines(text)) {
    const auto cut = line.rfind(',');
    if (cut == std::string::npos) throw ArgumentError("table prior: line '" + line + "' lacks a probability");
    const std::string model = unquote(line.substr(0, cut));
    const std::string prob = trim(line.substr(cut + 1));
    double v = 0.0;
    try {
      v = parse_double(prob);
    } catch (const Error&) {
      if (probs.empty() && !space) continue;  // header
      throw ArgumentError("table prior: bad probability '" + prob + "'");
    }
    const ModelSpace s = model.find(',') != std::string::npos ? ModelSpace::partition : ModelSpace::hypercube;
    if (space && *space != s) throw ArgumentError("table prior: mixed model spaces");
    space = s;
    if (s == ModelSpace::hypercube) {
      // A single-item partition and a one-bit vector look alike; "1" and
      // "0" are read as inclusion vectors.
      p = GammaVector::parse(model).p();
    } else {
      p = Partition::parse(model).p();
    }
    if (probs.contains(model)) throw ArgumentError("table prior: duplicate model '" + model + "'");
    probs.emplace(model, v);
  }
  if (!space) throw ArgumentError("table prior: no entries");
  return PriorSpec::table(*space, p, std::move(probs));
}

PriorSpec load_table_prior(const std::filesystem::path& path) { return parse_table_prior(read_text(path)); }

std::string table_prior_to_csv(const TablePrior& t) {
  std::string out = "model,probability\n";
  for (const auto& [model, prob] : t.probs) {
    out += t.space == ModelSpace::partition ? "\"" + model + "\"" : model;
    out += "," + format_number(prob) + "\n";
  }
  return out;
}

}  // namespace riskcal
