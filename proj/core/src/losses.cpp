#include "riskcal/losses.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>

#include "riskcal/csv.hpp"
#include "riskcal/errors.hpp"

namespace riskcal {

namespace {
double xlog2x_int(int n) { return n > 1 ? n * std::log2(static_cast<double>(n)) : 0.0; }
}  // namespace

void validate_weight(double a, std::string_view where) {
  if (!(a > 0.0 && a < 2.0)) {
    throw ArgumentError(std::string(where) + ": weight a must lie in (0, 2), got " + format_number(a));
  }
}

// ---------------------------------------------------------------- LossMatrix

LossMatrix::LossMatrix(std::vector<std::string> ids, Eigen::MatrixXd values)
    : ids_(std::move(ids)), values_(std::move(values)) {
  const auto m = static_cast<Eigen::Index>(ids_.size());
  if (m == 0) throw ArgumentError("LossMatrix: empty model list");
  if (values_.rows() != m || values_.cols() != m) throw ArgumentError("LossMatrix: matrix must be square over the ids");
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double v = values_(i, j);
      if (!std::isfinite(v)) throw ArgumentError("LossMatrix: non-finite entry");
      if (i == j && v != 0.0) throw ArgumentError("LossMatrix: diagonal must be zero (model " + ids_[i] + ")");
      if (i != j && !(v > 0.0)) {
        throw ArgumentError("LossMatrix: off-diagonal entries must be positive (" + ids_[i] + ", " + ids_[j] + ")");
      }
    }
    for (Eigen::Index j = 0; j < i; ++j) {
      if (ids_[i] == ids_[j]) throw ArgumentError("LossMatrix: duplicate model id " + ids_[i]);
    }
  }
}

LossMatrix LossMatrix::parse_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ArgumentError("LossMatrix: empty CSV");
  auto ids = split_csv_line(lines[0]);
  // Tolerate a leading corner cell when every body row carries a row label.
  const bool row_labels = lines.size() >= 2 && split_csv_line(lines[1]).size() == ids.size() &&
                          lines.size() == ids.size();
  if (row_labels) ids.erase(ids.begin());
  const auto m = static_cast<Eigen::Index>(ids.size());
  if (static_cast<Eigen::Index>(lines.size()) - 1 != m) {
    throw ArgumentError("LossMatrix: expected " + std::to_string(m) + " body rows, found " +
                        std::to_string(lines.size() - 1));
  }
  Eigen::MatrixXd values(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    auto cells = split_csv_line(lines[i + 1]);
    if (row_labels) {
      if (cells.front() != ids[i]) throw ArgumentError("LossMatrix: row label does not match header");
      cells.erase(cells.begin());
    }
    if (static_cast<Eigen::Index>(cells.size()) != m) throw ArgumentError("LossMatrix: ragged row");
    for (Eigen::Index j = 0; j < m; ++j) values(i, j) = parse_double(cells[j]);
  }
  return LossMatrix(std::move(ids), std::move(values));
}

LossMatrix LossMatrix::load_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

std::string LossMatrix::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (i) out += ',';
    out += ids_[i].find(',') == std::string::npos ? ids_[i] : "\"" + ids_[i] + "\"";
  }
  out += '\n';
  out += matrix_to_csv(values_);
  return out;
}

std::optional<int> LossMatrix::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == id) return static_cast<int>(i);
  }
  return std::nullopt;
}

// ------------------------------------------------------------------ LossSpec

LossSpec LossSpec::zero_one() { return {LossKind::zero_one, 1.0, nullptr}; }

LossSpec LossSpec::generalized_hamming(double a) {
  validate_weight(a, "GH loss");
  return {LossKind::generalized_hamming, a, nullptr};
}

LossSpec LossSpec::generalized_binder(double a) {
  validate_weight(a, "GB loss");
  return {LossKind::generalized_binder, a, nullptr};
}

LossSpec LossSpec::vi() { return {LossKind::vi, 1.0, nullptr}; }
LossSpec LossSpec::vi_lower_bound() { return {LossKind::vi_lower_bound, 1.0, nullptr}; }

LossSpec LossSpec::from_matrix(LossMatrix m) {
  return {LossKind::matrix, 1.0, std::make_shared<const LossMatrix>(std::move(m))};
}

LossSpec LossSpec::parse(std::string_view text, double default_a) {
  std::string_view head = text;
  std::optional<double> weight;
  if (auto colon = text.find(':'); colon != std::string_view::npos) {
    head = text.substr(0, colon);
    weight = parse_double(text.substr(colon + 1));
  } else if (auto open = text.find('('); open != std::string_view::npos && text.back() == ')') {
    // Display form, e.g. "GH(0.7)".
    head = text.substr(0, open);
    weight = parse_double(text.substr(open + 1, text.size() - open - 2));
  }
  auto upper = std::string(head);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "01" || upper == "ZERO-ONE" || upper == "ZERO_ONE") return zero_one();
  if (upper == "GH" || upper == "H" || upper == "HAMMING") {
    return generalized_hamming(weight.value_or(upper == "GH" ? default_a : 1.0));
  }
  if (upper == "GB" || upper == "B" || upper == "BINDER") {
    return generalized_binder(weight.value_or(upper == "GB" ? default_a : 1.0));
  }
  if (upper == "VI") return vi();
  if (upper == "VI-LB" || upper == "VILB" || upper == "VI_LB") return vi_lower_bound();
  throw ArgumentError("unknown loss '" + std::string(text) + "'");
}

std::string LossSpec::name() const {
  switch (kind) {
    case LossKind::zero_one: return "01";
    case LossKind::generalized_hamming: return "GH(" + format_number(a) + ")";
    case LossKind::generalized_binder: return "GB(" + format_number(a) + ")";
    case LossKind::vi: return "VI";
    case LossKind::vi_lower_bound: return "VI-LB";
    case LossKind::matrix: return "matrix";
  }
  return "?";
}

bool LossSpec::defined_on_gamma() const noexcept {
  return kind == LossKind::zero_one || kind == LossKind::generalized_hamming || kind == LossKind::matrix;
}

bool LossSpec::defined_on_partition() const noexcept {
  return kind == LossKind::zero_one || kind == LossKind::generalized_binder || kind == LossKind::vi ||
         kind == LossKind::vi_lower_bound || kind == LossKind::matrix;
}

// -------------------------------------------------------------- elementwise

double check(double tau, double x) { return 2.0 * x * (tau - (x < 0.0 ? 1.0 : 0.0)); }

double gh_loss(const GammaVector& truth, const GammaVector& action, double a) {
  if (truth.p() != action.p()) throw ArgumentError("gh_loss: models have different p");
  validate_weight(a, "gh_loss");
  const int false_pos = std::popcount(~truth.mask() & action.mask());
  const int false_neg = std::popcount(truth.mask() & ~action.mask());
  return a * false_pos + (2.0 - a) * false_neg;
}

double gb_loss(const Partition& truth, const Partition& action, double a) {
  if (truth.p() != action.p()) throw ArgumentError("gb_loss: partitions have different p");
  validate_weight(a, "gb_loss");
  const int p = truth.p();
  double split = 0.0;
  double merged = 0.0;
  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j) {
      const bool t = truth.together(i, j);
      const bool h = action.together(i, j);
      if (t && !h) split += 1.0;
      if (!t && h) merged += 1.0;
    }
  }
  return a * split + (2.0 - a) * merged;
}

double vi_loss(const Partition& z1, const Partition& z2) {
  if (z1.p() != z2.p()) throw ArgumentError("vi_loss: partitions have different p");
  const int p = z1.p();
  const int k1 = z1.k();
  const int k2 = z2.k();
  const auto n1 = z1.sizes();
  const auto n2 = z2.sizes();
  std::vector<int> joint(static_cast<std::size_t>(k1) * k2, 0);
  for (int i = 0; i < p; ++i) ++joint[(z1.label(i) - 1) * k2 + (z2.label(i) - 1)];
  // Sum over items of log2 counts equals sum over cells of n log2 n; every
  // count involved is at least 1 because item i counts itself.
  double acc = 0.0;
  for (int n : n1) acc += xlog2x_int(n);
  for (int n : n2) acc += xlog2x_int(n);
  for (int n : joint) acc -= 2.0 * xlog2x_int(n);
  return std::max(0.0, acc / p);
}

double loss(const LossSpec& spec, const GammaVector& truth, const GammaVector& action) {
  switch (spec.kind) {
    case LossKind::zero_one:
      if (truth.p() != action.p()) throw ArgumentError("loss: models have different p");
      return truth == action ? 0.0 : 1.0;
    case LossKind::generalized_hamming: return gh_loss(truth, action, spec.a);
    case LossKind::matrix: {
      const auto i = spec.matrix->index_of(truth.to_string());
      const auto j = spec.matrix->index_of(action.to_string());
      if (!i || !j) throw ArgumentError("loss: model not in the loss-matrix index");
      return (*spec.matrix)(*i, *j);
    }
    default: throw ArgumentError("loss: " + spec.name() + " is not defined on inclusion vectors");
  }
}

double loss(const LossSpec& spec, const Partition& truth, const Partition& action) {
  switch (spec.kind) {
    case LossKind::zero_one:
      if (truth.p() != action.p()) throw ArgumentError("loss: partitions have different p");
      return truth == action ? 0.0 : 1.0;
    case LossKind::generalized_binder: return gb_loss(truth, action, spec.a);
    case LossKind::vi: return vi_loss(truth, action);
    case LossKind::matrix: {
      const auto i = spec.matrix->index_of(truth.to_string());
      const auto j = spec.matrix->index_of(action.to_string());
      if (!i || !j) throw ArgumentError("loss: model not in the loss-matrix index");
      return (*spec.matrix)(*i, *j);
    }
    case LossKind::vi_lower_bound:
      throw ArgumentError("loss: VI-LB is a risk functional of co-clustering probabilities, not a pairwise loss");
    default: throw ArgumentError("loss: " + spec.name() + " is not defined on partitions");
  }
}

LossMatrix gamma_loss_matrix(const LossSpec& spec, int p) {
  const auto models = all_gammas(p);
  const auto m = static_cast<Eigen::Index>(models.size());
  Eigen::MatrixXd v(m, m);
  std::vector<std::string> ids;
  for (Eigen::Index i = 0; i < m; ++i) {
    ids.push_back(models[i].to_string());
    for (Eigen::Index j = 0; j < m; ++j) v(i, j) = loss(spec, models[i], models[j]);
  }
  return LossMatrix(std::move(ids), std::move(v));
}

LossMatrix partition_loss_matrix(const LossSpec& spec, int p) {
  const auto models = all_partitions(p);
  const auto m = static_cast<Eigen::Index>(models.size());
  Eigen::MatrixXd v(m, m);
  std::vector<std::string> ids;
  for (Eigen::Index i = 0; i < m; ++i) {
    ids.push_back(models[i].to_string());
    for (Eigen::Index j = 0; j < m; ++j) v(i, j) = loss(spec, models[i], models[j]);
  }
  return LossMatrix(std::move(ids), std::move(v));
}

}  // namespace riskcal
