#include "plr/permutation.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "plr/errors.hpp"

namespace plr {

bool is_permutation_of_range(std::span<const int> order) {
  if (order.empty()) return false;
  std::vector<char> seen(order.size(), 0);
  for (int v : order) {
    if (v < 0 || static_cast<std::size_t>(v) >= order.size() || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

Permutation::Permutation(std::vector<int> order) : order_(std::move(order)) {
  if (!is_permutation_of_range(order_)) {
    throw InvalidArgument("not a permutation of 0..n-1: " + to_string());
  }
}

Permutation Permutation::identity(std::size_t n) {
  if (n == 0) throw InvalidArgument("permutation size must be >= 1");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  return Permutation(std::move(order));
}

std::vector<int> Permutation::ranks() const {
  std::vector<int> r(order_.size());
  for (std::size_t pos = 0; pos < order_.size(); ++pos) r[order_[pos]] = static_cast<int>(pos);
  return r;
}

Permutation Permutation::reversed() const {
  return Permutation(std::vector<int>(order_.rbegin(), order_.rend()));
}

std::string Permutation::to_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < order_.size(); ++i) {
    if (i) os << ',';
    os << order_[i];
  }
  os << ')';
  return os.str();
}

Permutation argsort_descending(std::span<const double> keys) {
  std::vector<int> idx(keys.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (keys[a] != keys[b]) return keys[a] > keys[b];
    return a < b;
  });
  return Permutation(std::move(idx));
}

}  // namespace plr
