#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cfl/model.hpp"

namespace cfl {

struct GradcheckOptions {
  std::size_t input = 12;
  std::size_t hidden = 32;
  std::size_t embed = 16;
  std::size_t batch = 8;
  double step = 1e-5;
  double threshold = 1e-4;
  // Relative errors are taken against max(|analytic|, |numeric|, floor) so
  // that entries which are zero up to round-off do not dominate.
  double floor = 1e-6;
  std::uint64_t seed = 42;
  // Test hook: runs on every analytic gradient before comparison.
  std::function<void(MlpParams&)> tamper;
};

struct GradcheckCase {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // perturbation crossed a leaky-ReLU kink
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Central finite differences over every parameter of a random small network
/// for reconstruction, contrastive (dot and cosine), distance and total loss.
GradcheckReport run_gradcheck(const GradcheckOptions& opt = {});

}  // namespace cfl
