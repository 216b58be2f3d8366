#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace plr {

/// An ordering of the items {0, ..., n-1}. Position r holds the item placed at
/// rank r; rank 0 is the first demonstration in the prompt.
class Permutation {
 public:
  /// Validates that `order` is a permutation of {0, ..., n-1} with n >= 1.
  explicit Permutation(std::vector<int> order);

  static Permutation identity(std::size_t n);

  std::size_t size() const noexcept { return order_.size(); }
  int operator[](std::size_t rank) const { return order_[rank]; }
  std::span<const int> items() const noexcept { return order_; }
  const std::vector<int>& vector() const noexcept { return order_; }

  /// ranks()[i] is the position of item i.
  std::vector<int> ranks() const;

  Permutation reversed() const;

  std::string to_string() const;

  friend bool operator==(const Permutation&, const Permutation&) = default;
  friend auto operator<=>(const Permutation&, const Permutation&) = default;

 private:
  std::vector<int> order_;
};

/// True iff `order` is a valid permutation of {0, ..., order.size()-1}, size >= 1.
bool is_permutation_of_range(std::span<const int> order);

/// Items sorted by descending key; equal keys keep the lower item first.
Permutation argsort_descending(std::span<const double> keys);

}  // namespace plr

template <>
struct std::hash<plr::Permutation> {
  std::size_t operator()(const plr::Permutation& p) const noexcept {
    std::size_t h = 1469598103934665603ULL;
    for (int v : p.items()) {
      h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ULL;
      h *= 1099511628211ULL;
    }
    return h;
  }
};
