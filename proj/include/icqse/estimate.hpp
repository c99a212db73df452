// Copyright 2026 The icqse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace icqse {

/// A reported quantity with its statistical error.
struct EnergyEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t n_samples = 0;
  bool feasible = false;
};

/// Sample mean and standard error of the mean (n-1 normalization).
inline EnergyEstimate mean_and_sem(std::span<const double> xs) {
  EnergyEstimate e;
  e.n_samples = static_cast<std::int64_t>(xs.size());
  if (xs.empty()) return e;
  double m = 0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0;
  for (double x : xs) v += (x - m) * (x - m);
  e.value = m;
  if (xs.size() > 1) e.std_error = std::sqrt(v / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  e.feasible = true;
  return e;
}

}  // namespace icqse
