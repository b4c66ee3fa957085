#include "riskcal/errors.hpp"

#include <sstream>

namespace riskcal {

namespace {
std::string with_range(const std::string& what, double lo, double hi) {
  std::ostringstream os;
  os << what << " (attainable range [" << lo << ", " << hi << "])";
  return os.str();
}
}  // namespace

InfeasibleError::InfeasibleError(const std::string& what, double lo, double hi)
    : Error(with_range(what, lo, hi)), lo_(lo), hi_(hi) {}

}  // namespace riskcal
