#pragma once

#include <compare>
#include <cstdint>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace riskcal {

// Enumeration guards: 2^24 inclusion vectors, B_12 = 4,213,597 partitions.
inline constexpr int kMaxEnumerableGammaP = 24;
inline constexpr int kMaxEnumerablePartitionP = 12;
// GammaVector packs its bits into one machine word.
inline constexpr int kMaxGammaP = 64;

// A variable-selection model: inclusion indicator per candidate variable.
// Text form is a contiguous bit string, index 0 first ("0101").
class GammaVector {
 public:
  GammaVector() = default;
  explicit GammaVector(int p);  // null model
  GammaVector(int p, std::uint64_t mask);

  static GammaVector from_bits(std::span<const int> bits);
  static GammaVector parse(std::string_view text);

  int p() const noexcept { return p_; }
  int size() const noexcept;  // |gamma|
  bool operator[](int i) const noexcept { return (mask_ >> i) & 1U; }
  std::uint64_t mask() const noexcept { return mask_; }
  GammaVector with(int i, bool included) const;

  // Position in enumerate_gamma order (lexicographic on bits).
  std::uint64_t lex_index() const noexcept;
  static GammaVector from_lex_index(int p, std::uint64_t index);

  std::string to_string() const;

  bool operator==(const GammaVector&) const = default;

 private:
  int p_ = 0;
  std::uint64_t mask_ = 0;
};

// Lexicographic order on the bit sequence.
bool lex_less(const GammaVector& a, const GammaVector& b) noexcept;

// A set partition of {1..p} as a restricted growth string: labels are
// 1-based, labels[0] = 1 and each label is at most one more than the
// running maximum. The canonical form is unique per set partition.
class Partition {
 public:
  Partition() = default;

  static Partition one_block(int p);
  static Partition singletons(int p);
  // "1,1,2,3"; labels need not be canonical.
  static Partition parse(std::string_view text);

  int p() const noexcept { return static_cast<int>(labels_.size()); }
  int k() const noexcept { return k_; }
  std::span<const int> labels() const noexcept { return labels_; }
  int label(int i) const { return labels_[i]; }
  bool together(int i, int j) const { return labels_[i] == labels_[j]; }

  // Cluster sizes indexed by label - 1.
  std::vector<int> sizes() const;
  // Cluster sizes sorted descending.
  std::vector<int> size_profile() const;
  // Members of each cluster, ordered by label.
  std::vector<std::vector<int>> blocks() const;

  std::string to_string() const;

  bool operator==(const Partition&) const = default;
  std::strong_ordering operator<=>(const Partition& o) const { return labels_ <=> o.labels_; }

 private:
  friend Partition canonicalize(std::span<const int> labels);
  Partition(std::vector<int> labels, int k) : labels_(std::move(labels)), k_(k) {}

  std::vector<int> labels_;
  int k_ = 0;
};

// Relabel by first appearance. Throws ArgumentError on empty input or
// non-positive labels.
Partition canonicalize(std::span<const int> labels);
Partition canonicalize(std::initializer_list<int> labels);

enum class OrderRelation { simpler, more_complex, equal, incomparable };

std::string_view to_string(OrderRelation r);

OrderRelation compare(const GammaVector& a, const GammaVector& b);
OrderRelation compare(const Partition& a, const Partition& b);

// Models covering m: one 0 -> 1 flip, or one cluster split in two.
// Output is canonical, deduplicated and sorted lexicographically.
std::vector<GammaVector> covers(const GammaVector& m);
std::vector<Partition> covers(const Partition& m);

// Simplicity order used for tie-breaking: fewer variables / clusters
// first, then lexicographic.
bool simpler_first(const GammaVector& a, const GammaVector& b) noexcept;
bool simpler_first(const Partition& a, const Partition& b) noexcept;

// Lazy lexicographic stream of {0,1}^p.
class GammaEnumerator {
 public:
  explicit GammaEnumerator(int p);
  bool done() const noexcept { return index_ >= count_; }
  const GammaVector& value() const noexcept { return current_; }
  void advance();
  std::uint64_t count() const noexcept { return count_; }

 private:
  int p_;
  std::uint64_t index_ = 0;
  std::uint64_t count_;
  GammaVector current_;
};

// Lazy lexicographic stream of restricted growth strings of length p.
class PartitionEnumerator {
 public:
  explicit PartitionEnumerator(int p);
  bool done() const noexcept { return done_; }
  const Partition& value() const noexcept { return current_; }
  void advance();

 private:
  std::vector<int> labels_;   // 0-based working labels
  std::vector<int> prefix_max_;
  Partition current_;
  bool done_ = false;
};

// Input range adaptor so enumerators work with range-for.
template <class Enumerator>
class EnumerationRange {
 public:
  class iterator {
   public:
    using value_type = std::remove_cvref_t<decltype(std::declval<Enumerator>().value())>;
    using difference_type = std::ptrdiff_t;
    explicit iterator(Enumerator* e) : e_(e) {}
    const value_type& operator*() const { return e_->value(); }
    iterator& operator++() {
      e_->advance();
      return *this;
    }
    void operator++(int) { e_->advance(); }
    bool operator==(std::default_sentinel_t) const { return e_->done(); }

   private:
    Enumerator* e_;
  };

  explicit EnumerationRange(int p) : e_(p) {}
  iterator begin() { return iterator(&e_); }
  std::default_sentinel_t end() const { return {}; }

 private:
  Enumerator e_;
};

// enumerate_gamma / enumerate_partitions. Throw CapacityError outside
// 1 <= p <= guard.
EnumerationRange<GammaEnumerator> enumerate_gamma(int p);
EnumerationRange<PartitionEnumerator> enumerate_partitions(int p);

std::vector<GammaVector> all_gammas(int p);
std::vector<Partition> all_partitions(int p);

enum class ChainStrategy { balanced_split, singleton_peel, random };

std::string_view to_string(ChainStrategy s);
std::optional<ChainStrategy> parse_chain_strategy(std::string_view s);

// Maximal chain one-block -> singletons of covering pairs (length p).
std::vector<Partition> refinement_chain(int p, ChainStrategy strategy, std::uint64_t seed = 0);

}  // namespace riskcal
