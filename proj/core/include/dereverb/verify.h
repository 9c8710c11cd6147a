// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DEREVERB_VERIFY_H_
#define DEREVERB_VERIFY_H_

#include <functional>
#include <string>
#include <vector>

#include "dereverb/gradcheck.h"

namespace dereverb {

struct GradientCheckResult {
  std::string name;
  GradCheckReport report;
};

// Finite-difference checks in double of every layer (linear, conv2d, GRU
// sequence with initial state, masked MSE) and of each tiny model variant
// (against long double differences). Tolerance 1e-6 relative. `progress`,
// when set, is called after each check.
std::vector<GradientCheckResult> RunGradientSuite(
    const std::function<void(const GradientCheckResult&)>& progress = {});

}  // namespace dereverb

#endif  // DEREVERB_VERIFY_H_
