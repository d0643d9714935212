#include "cfl/augment.hpp"

#include "cfl/error.hpp"

namespace cfl {

void AugmentConfig::validate() const {
  if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) throw ConfigError("mask_prob must lie in [0, 1]");
  if (!(noise_level >= 0.0)) throw ConfigError("noise_level must be >= 0");
}

Matrix binomial_mask(const Matrix& m, double p, RngStream& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("binomial_mask: p must lie in [0, 1]");
  Matrix out = m;
  for (double& v : out.data())
    if (rng.bernoulli(p)) v = 0.0;
  return out;
}

Matrix gaussian_noise(const Matrix& m, double sigma, RngStream& rng) {
  if (!(sigma >= 0.0)) throw ConfigError("gaussian_noise: sigma must be >= 0");
  Matrix out = m;
  if (sigma == 0.0) return out;
  for (double& v : out.data()) v += sigma * rng.normal();
  return out;
}

Matrix swap_mask(const Matrix& m, double p, RngStream& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("swap_mask: p must lie in [0, 1]");
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (rng.bernoulli(p)) out(r, c) = m(rng.below(m.rows()), c);
  return out;
}

std::pair<Matrix, Matrix> make_views(const Matrix& batch, const AugmentConfig& cfg, RngStream& rng) {
  auto corrupt = [&](const Matrix& b) {
    return cfg.swap_noise ? swap_mask(b, cfg.mask_prob, rng) : binomial_mask(b, cfg.mask_prob, rng);
  };
  Matrix first = corrupt(batch);
  Matrix second = corrupt(batch);
  if (cfg.second_view_gaussian) second = gaussian_noise(second, cfg.noise_level, rng);
  return {std::move(first), std::move(second)};
}

}  // namespace cfl
