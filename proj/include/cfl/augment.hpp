#pragma once

#include <utility>

#include "cfl/matrix.hpp"
#include "cfl/rng.hpp"

namespace cfl {

struct AugmentConfig {
  double noise_level = 0.1;  // Gaussian scale for the second view
  double mask_prob = 0.2;
  bool second_view_gaussian = true;
  // Replace masked entries with the same column from a random row instead of 0.
  bool swap_noise = false;

  void validate() const;
};

Matrix binomial_mask(const Matrix& m, double p, RngStream& rng);
Matrix gaussian_noise(const Matrix& m, double sigma, RngStream& rng);
Matrix swap_mask(const Matrix& m, double p, RngStream& rng);

/// Two full-width noisy copies of a clean batch: the first masked, the second
/// masked independently and then perturbed with Gaussian noise.
std::pair<Matrix, Matrix> make_views(const Matrix& batch, const AugmentConfig& cfg, RngStream& rng);

}  // namespace cfl
