#include "riskcal/model_space.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <numeric>
#include <random>

#include "riskcal/errors.hpp"
#include "riskcal/rng.hpp"

namespace riskcal {

namespace {

void check_gamma_p(int p) {
  if (p < 0 || p > kMaxGammaP) {
    throw ArgumentError("GammaVector: p must be in [0, 64], got " + std::to_string(p));
  }
}

std::uint64_t low_bits(int p) { return p >= 64 ? ~0ULL : ((1ULL << p) - 1ULL); }

}  // namespace

// ---------------------------------------------------------------- GammaVector

GammaVector::GammaVector(int p) : p_(p) { check_gamma_p(p); }

GammaVector::GammaVector(int p, std::uint64_t mask) : p_(p), mask_(mask) {
  check_gamma_p(p);
  if ((mask & ~low_bits(p)) != 0) throw ArgumentError("GammaVector: mask has bits beyond p");
}

GammaVector GammaVector::from_bits(std::span<const int> bits) {
  GammaVector g(static_cast<int>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != 0 && bits[i] != 1) throw ArgumentError("GammaVector: entries must be 0 or 1");
    if (bits[i]) g.mask_ |= 1ULL << i;
  }
  return g;
}

GammaVector GammaVector::parse(std::string_view text) {
  std::vector<int> bits;
  for (char c : text) {
    if (c == '0' || c == '1') {
      bits.push_back(c - '0');
    } else if (c != ' ' && c != '\r' && c != '\n' && c != '\t') {
      throw ArgumentError("GammaVector: invalid character in '" + std::string(text) + "'");
    }
  }
  if (bits.empty()) throw ArgumentError("GammaVector: empty bit string");
  return from_bits(bits);
}

int GammaVector::size() const noexcept { return std::popcount(mask_); }

GammaVector GammaVector::with(int i, bool included) const {
  if (i < 0 || i >= p_) throw ArgumentError("GammaVector::with: index out of range");
  GammaVector g = *this;
  if (included) {
    g.mask_ |= 1ULL << i;
  } else {
    g.mask_ &= ~(1ULL << i);
  }
  return g;
}

std::uint64_t GammaVector::lex_index() const noexcept {
  std::uint64_t idx = 0;
  for (int i = 0; i < p_; ++i) idx = (idx << 1) | ((mask_ >> i) & 1ULL);
  return idx;
}

GammaVector GammaVector::from_lex_index(int p, std::uint64_t index) {
  GammaVector g(p);
  for (int i = 0; i < p; ++i) {
    if ((index >> (p - 1 - i)) & 1ULL) g.mask_ |= 1ULL << i;
  }
  return g;
}

std::string GammaVector::to_string() const {
  std::string s(p_, '0');
  for (int i = 0; i < p_; ++i) {
    if ((*this)[i]) s[i] = '1';
  }
  return s;
}

bool lex_less(const GammaVector& a, const GammaVector& b) noexcept {
  if (a.p() != b.p()) return a.p() < b.p();
  return a.lex_index() < b.lex_index();
}

// ------------------------------------------------------------------ Partition

Partition canonicalize(std::span<const int> labels) {
  if (labels.empty()) throw ArgumentError("canonicalize: empty label sequence");
  std::vector<std::pair<int, int>> seen;  // (raw label, canonical label)
  std::vector<int> out(labels.size());
  int next = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int raw = labels[i];
    if (raw <= 0) throw ArgumentError("canonicalize: labels must be positive");
    auto it = std::find_if(seen.begin(), seen.end(), [raw](const auto& e) { return e.first == raw; });
    if (it == seen.end()) {
      seen.emplace_back(raw, ++next);
      out[i] = next;
    } else {
      out[i] = it->second;
    }
  }
  return Partition(std::move(out), next);
}

Partition canonicalize(std::initializer_list<int> labels) {
  return canonicalize(std::span<const int>(labels.begin(), labels.size()));
}

Partition Partition::one_block(int p) {
  if (p < 1) throw ArgumentError("Partition::one_block: p must be positive");
  return Partition(std::vector<int>(p, 1), 1);
}

Partition Partition::singletons(int p) {
  if (p < 1) throw ArgumentError("Partition::singletons: p must be positive");
  std::vector<int> l(p);
  std::iota(l.begin(), l.end(), 1);
  return Partition(std::move(l), p);
}

Partition Partition::parse(std::string_view text) {
  std::vector<int> labels;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    std::string_view tok = text.substr(pos, comma - pos);
    while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\r' || tok.back() == '\n' ||
                            tok.back() == '\t')) {
      tok.remove_suffix(1);
    }
    int value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ArgumentError("Partition: cannot parse label '" + std::string(tok) + "'");
    }
    labels.push_back(value);
    pos = comma + 1;
  }
  return canonicalize(labels);
}

std::vector<int> Partition::sizes() const {
  std::vector<int> n(k_, 0);
  for (int l : labels_) ++n[l - 1];
  return n;
}

std::vector<int> Partition::size_profile() const {
  auto n = sizes();
  std::sort(n.begin(), n.end(), std::greater<>());
  return n;
}

std::vector<std::vector<int>> Partition::blocks() const {
  std::vector<std::vector<int>> b(k_);
  for (int i = 0; i < p(); ++i) b[labels_[i] - 1].push_back(i);
  return b;
}

std::string Partition::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(labels_[i]);
  }
  return s;
}

// ----------------------------------------------------------------- ordering

std::string_view to_string(OrderRelation r) {
  switch (r) {
    case OrderRelation::simpler: return "simpler";
    case OrderRelation::more_complex: return "more-complex";
    case OrderRelation::equal: return "equal";
    case OrderRelation::incomparable: return "incomparable";
  }
  return "?";
}

OrderRelation compare(const GammaVector& a, const GammaVector& b) {
  if (a.p() != b.p()) throw ArgumentError("compare: models have different p");
  if (a.mask() == b.mask()) return OrderRelation::equal;
  if ((a.mask() & ~b.mask()) == 0) return OrderRelation::simpler;
  if ((b.mask() & ~a.mask()) == 0) return OrderRelation::more_complex;
  return OrderRelation::incomparable;
}

namespace {
// True when every cluster of fine lies inside a cluster of coarse.
bool refines(const Partition& fine, const Partition& coarse) {
  // Map each fine cluster to the coarse label of its first member.
  std::vector<int> image(fine.k(), 0);
  for (int i = 0; i < fine.p(); ++i) {
    int& img = image[fine.label(i) - 1];
    if (img == 0) {
      img = coarse.label(i);
    } else if (img != coarse.label(i)) {
      return false;
    }
  }
  return true;
}
}  // namespace

OrderRelation compare(const Partition& a, const Partition& b) {
  if (a.p() != b.p()) throw ArgumentError("compare: partitions have different p");
  if (a == b) return OrderRelation::equal;
  if (refines(b, a)) return OrderRelation::simpler;
  if (refines(a, b)) return OrderRelation::more_complex;
  return OrderRelation::incomparable;
}

std::vector<GammaVector> covers(const GammaVector& m) {
  std::vector<GammaVector> out;
  for (int i = 0; i < m.p(); ++i) {
    if (!m[i]) out.push_back(m.with(i, true));
  }
  std::sort(out.begin(), out.end(), lex_less);
  return out;
}

std::vector<Partition> covers(const Partition& m) {
  std::vector<Partition> out;
  const auto blocks = m.blocks();
  const auto labels = m.labels();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& members = blocks[b];
    const int n = static_cast<int>(members.size());
    if (n < 2) continue;
    if (n > 31) throw CapacityError("covers: cluster too large to enumerate its splits");
    // Bipartitions with the first member fixed on the kept side:
    // masks over members[1..n-1], excluding the empty move-set.
    const std::uint64_t count = 1ULL << (n - 1);
    for (std::uint64_t mask = 1; mask < count; ++mask) {
      std::vector<int> l(labels.begin(), labels.end());
      for (int t = 1; t < n; ++t) {
        if ((mask >> (t - 1)) & 1ULL) l[members[t]] = m.k() + 1;
      }
      out.push_back(canonicalize(l));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool simpler_first(const GammaVector& a, const GammaVector& b) noexcept {
  if (a.size() != b.size()) return a.size() < b.size();
  return lex_less(a, b);
}

bool simpler_first(const Partition& a, const Partition& b) noexcept {
  if (a.k() != b.k()) return a.k() < b.k();
  return a < b;
}

// -------------------------------------------------------------- enumeration

GammaEnumerator::GammaEnumerator(int p) : p_(p), count_(0), current_() {
  if (p < 1 || p > kMaxEnumerableGammaP) {
    throw CapacityError("enumerate_gamma: p must be in [1, " +
                        std::to_string(kMaxEnumerableGammaP) + "], got " + std::to_string(p));
  }
  count_ = 1ULL << p;
  current_ = GammaVector(p);
}

void GammaEnumerator::advance() {
  if (done()) return;
  ++index_;
  if (!done()) current_ = GammaVector::from_lex_index(p_, index_);
}

PartitionEnumerator::PartitionEnumerator(int p) {
  if (p < 1 || p > kMaxEnumerablePartitionP) {
    throw CapacityError("enumerate_partitions: p must be in [1, " +
                        std::to_string(kMaxEnumerablePartitionP) + "], got " + std::to_string(p));
  }
  labels_.assign(p, 0);
  prefix_max_.assign(p, 0);
  current_ = Partition::one_block(p);
}

void PartitionEnumerator::advance() {
  if (done_) return;
  const int p = static_cast<int>(labels_.size());
  // prefix_max_[i] = max(labels_[0..i-1]) for i >= 1.
  int i = p - 1;
  while (i >= 1 && labels_[i] > prefix_max_[i]) --i;
  if (i < 1) {
    done_ = true;
    return;
  }
  ++labels_[i];
  for (int j = i + 1; j < p; ++j) {
    labels_[j] = 0;
    prefix_max_[j] = std::max(prefix_max_[j - 1], labels_[j - 1]);
  }
  std::vector<int> l(p);
  for (int j = 0; j < p; ++j) l[j] = labels_[j] + 1;
  current_ = canonicalize(l);
}

EnumerationRange<GammaEnumerator> enumerate_gamma(int p) { return EnumerationRange<GammaEnumerator>(p); }

EnumerationRange<PartitionEnumerator> enumerate_partitions(int p) {
  return EnumerationRange<PartitionEnumerator>(p);
}

std::vector<GammaVector> all_gammas(int p) {
  std::vector<GammaVector> out;
  for (const auto& g : enumerate_gamma(p)) out.push_back(g);
  return out;
}

std::vector<Partition> all_partitions(int p) {
  std::vector<Partition> out;
  for (const auto& z : enumerate_partitions(p)) out.push_back(z);
  return out;
}

// ------------------------------------------------------------------- chains

std::string_view to_string(ChainStrategy s) {
  switch (s) {
    case ChainStrategy::balanced_split: return "balanced-split";
    case ChainStrategy::singleton_peel: return "singleton-peel";
    case ChainStrategy::random: return "random";
  }
  return "?";
}

std::optional<ChainStrategy> parse_chain_strategy(std::string_view s) {
  if (s == "balanced-split") return ChainStrategy::balanced_split;
  if (s == "singleton-peel") return ChainStrategy::singleton_peel;
  if (s == "random") return ChainStrategy::random;
  return std::nullopt;
}

std::vector<Partition> refinement_chain(int p, ChainStrategy strategy, std::uint64_t seed) {
  if (p < 2) throw ArgumentError("refinement_chain: p must be at least 2");
  Rng rng = make_rng(seed);
  std::vector<Partition> chain{Partition::one_block(p)};
  while (chain.back().k() < p) {
    const Partition& cur = chain.back();
    auto blocks = cur.blocks();
    std::vector<int> l(cur.labels().begin(), cur.labels().end());
    const int fresh = cur.k() + 1;

    // Largest cluster, first by label on ties.
    auto largest = [&blocks]() {
      std::size_t best = 0;
      for (std::size_t b = 1; b < blocks.size(); ++b) {
        if (blocks[b].size() > blocks[best].size()) best = b;
      }
      return best;
    };

    switch (strategy) {
      case ChainStrategy::balanced_split: {
        const auto& members = blocks[largest()];
        const std::size_t half = members.size() / 2;
        for (std::size_t t = members.size() - half; t < members.size(); ++t) l[members[t]] = fresh;
        break;
      }
      case ChainStrategy::singleton_peel: {
        const auto& members = blocks[largest()];
        l[members.back()] = fresh;
        break;
      }
      case ChainStrategy::random: {
        std::vector<std::size_t> candidates;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
          if (blocks[b].size() >= 2) candidates.push_back(b);
        }
        std::uniform_int_distribution<std::size_t> pick_block(0, candidates.size() - 1);
        const auto& members = blocks[candidates[pick_block(rng)]];
        // Uniform over nonempty move-sets of members[1..]: fair coins with
        // rejection of the empty set.
        std::bernoulli_distribution coin(0.5);
        std::vector<bool> move(members.size(), false);
        bool any = false;
        while (!any) {
          for (std::size_t t = 1; t < members.size(); ++t) {
            move[t] = coin(rng);
            any = any || move[t];
          }
        }
        for (std::size_t t = 1; t < members.size(); ++t) {
          if (move[t]) l[members[t]] = fresh;
        }
        break;
      }
    }
    chain.push_back(canonicalize(l));
  }
  return chain;
}

}  // namespace riskcal
