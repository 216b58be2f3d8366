#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "plr/estimation.hpp"

namespace plr {

/// One oracle-backed property and its measured value.
struct PropertyCheck {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  /// "<" or ">=": how measured must relate to threshold.
  std::string relation;
  bool passed = false;
};

using GradientFn = std::function<std::vector<double>(const PLParams&, const EliteSet&)>;

struct VerifyOptions {
  /// Gradient under test; defaults to pl_grad. Swapping in a broken gradient
  /// is how the verifier's own sensitivity is checked.
  GradientFn gradient;
};

std::vector<PropertyCheck> run_property_checks(const VerifyOptions& options);

void print_checks(const std::vector<PropertyCheck>& checks, std::ostream& out);

}  // namespace plr
