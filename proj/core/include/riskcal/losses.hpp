#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "riskcal/model_space.hpp"

namespace riskcal {

// Explicit loss over a finite model list, rows = true model, columns =
// chosen model. Construction enforces a zero diagonal and strictly positive
// off-diagonal entries.
class LossMatrix {
 public:
  LossMatrix(std::vector<std::string> ids, Eigen::MatrixXd values);

  // Header row of model identifiers followed by a square numeric body.
  static LossMatrix parse_csv(std::string_view text);
  static LossMatrix load_csv(const std::filesystem::path& path);
  std::string to_csv() const;

  int size() const noexcept { return static_cast<int>(ids_.size()); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  double operator()(int truth, int action) const { return values_(truth, action); }
  std::optional<int> index_of(std::string_view id) const;

 private:
  std::vector<std::string> ids_;
  Eigen::MatrixXd values_;
};

enum class LossKind { zero_one, generalized_hamming, generalized_binder, vi, vi_lower_bound, matrix };

struct LossSpec {
  LossKind kind = LossKind::zero_one;
  double a = 1.0;  // GH / GB weight in (0, 2)
  std::shared_ptr<const LossMatrix> matrix;

  static LossSpec zero_one();
  static LossSpec generalized_hamming(double a);
  static LossSpec generalized_binder(double a);
  static LossSpec vi();
  static LossSpec vi_lower_bound();
  static LossSpec from_matrix(LossMatrix m);

  // "01", "GH:0.7", "GB:1", "VI", "VI-LB"; bare "GH"/"GB" take default_a.
  static LossSpec parse(std::string_view text, double default_a = 1.0);

  // Short display name: "01", "GH(0.7)", "GB(1)", "VI", "VI-LB", "matrix".
  std::string name() const;

  bool defined_on_gamma() const noexcept;
  bool defined_on_partition() const noexcept;
};

// Asymmetric check function 2x(tau - 1(x < 0)).
double check(double tau, double x);

double gh_loss(const GammaVector& truth, const GammaVector& action, double a);
double gb_loss(const Partition& truth, const Partition& action, double a);
// Variation of information in bits.
double vi_loss(const Partition& z1, const Partition& z2);

// Dispatch on spec. VI-LB is a risk functional, not a pairwise loss, and is
// rejected here; matrix kind looks models up by their text form.
double loss(const LossSpec& spec, const GammaVector& truth, const GammaVector& action);
double loss(const LossSpec& spec, const Partition& truth, const Partition& action);

// Tabulate a structured loss over the enumerated space.
LossMatrix gamma_loss_matrix(const LossSpec& spec, int p);
LossMatrix partition_loss_matrix(const LossSpec& spec, int p);

void validate_weight(double a, std::string_view where);

}  // namespace riskcal
