#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "riskcal/priors.hpp"

namespace riskcal {

// {"family": "...", "params": {...}}. K distributions nest as
// {"kind": "shifted-poisson", "lambda": x} or {"kind": "geometric", "s": x}
// or {"kind": "explicit", "pmf": [...]}.
nlohmann::json prior_to_json(const PriorSpec& prior);
PriorSpec prior_from_json(const nlohmann::json& j);

nlohmann::json k_to_json(const KDistribution& k);
KDistribution k_from_json(const nlohmann::json& j);

// Short command-line form:
//   uniform-gamma | uniform-partition
//   beta-binomial:a,b | trunc-exp-decay:kappa[,s_max]
//   crp:theta | crp2:sigma,theta
//   dir-mult:alpha,shifted-poisson:lambda | dir-mult:alpha,geometric:s
//   balance-neutral:geometric:s | balance-neutral:shifted-poisson:lambda
//   hier-uniform:p,r | table:<csv path>
KDistribution parse_k(std::string_view text);

// Accepts a JSON object, the short form, or a path to a JSON file.
PriorSpec parse_prior(std::string_view text);

// Lines "model,probability"; for partitions the probability follows the
// last comma. The space is inferred from the first model.
PriorSpec load_table_prior(const std::filesystem::path& path);
PriorSpec parse_table_prior(std::string_view text);
std::string table_prior_to_csv(const TablePrior& t);

}  // namespace riskcal
