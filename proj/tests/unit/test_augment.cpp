#include "doctest.h"

#include <cmath>

#include "cfl/augment.hpp"
#include "cfl/error.hpp"

using namespace cfl;

namespace {

Matrix ones(std::size_t r, std::size_t c) { return Matrix(r, c, 1.0); }

}  // namespace

TEST_CASE("binomial mask extremes") {
  RngStream rng(1, {});
  const Matrix m = ones(10, 10);
  CHECK(binomial_mask(m, 0.0, rng) == m);
  CHECK(binomial_mask(m, 1.0, rng) == Matrix(10, 10));
  CHECK_THROWS_AS(binomial_mask(m, 1.5, rng), ConfigError);
}

TEST_CASE("binomial mask zeroes the expected fraction and keeps survivors") {
  RngStream rng(2, {});
  Matrix m(100, 100);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = 1.0 + static_cast<double>(i);
  const Matrix out = binomial_mask(m, 0.2, rng);
  std::size_t zeroed = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (out.data()[i] == 0.0)
      ++zeroed;
    else
      CHECK(out.data()[i] == m.data()[i]);
  }
  const double frac = static_cast<double>(zeroed) / 1e4;
  CHECK(std::abs(frac - 0.2) <= 3 * std::sqrt(0.2 * 0.8 / 1e4));
}

TEST_CASE("gaussian noise statistics") {
  RngStream rng(3, {});
  const Matrix z(100, 1000);
  CHECK(gaussian_noise(z, 0.0, rng) == z);
  const double sigma = 0.1;
  const Matrix n = gaussian_noise(z, sigma, rng);
  double s = 0, ss = 0;
  for (double v : n.data()) s += v, ss += v * v;
  const double count = 1e5, mean = s / count;
  const double sd = std::sqrt(ss / count - mean * mean);
  CHECK(std::abs(mean) <= 3 * sigma / std::sqrt(count));
  CHECK(std::abs(sd - sigma) <= 0.05 * sigma);
  CHECK_THROWS_AS(gaussian_noise(z, -1.0, rng), ConfigError);
}

TEST_CASE("views keep the full row and leave the batch untouched") {
  RngStream rng(4, {});
  Matrix b(7, 5);
  for (double& v : b.data()) v = rng.uniform();
  const Matrix copy = b;
  AugmentConfig cfg;
  auto [v1, v2] = make_views(b, cfg, rng);
  CHECK(b == copy);
  CHECK(v1.rows() == 7);
  CHECK(v1.cols() == 5);
  CHECK(v2.rows() == 7);
  CHECK(v2.cols() == 5);
  cfg.mask_prob = 0.0;
  cfg.noise_level = 0.0;
  auto [w1, w2] = make_views(b, cfg, rng);
  CHECK(w1 == b);
  CHECK(w2 == b);
}

TEST_CASE("view 1 is only masked, view 2 also gets noise") {
  RngStream rng(5, {});
  const Matrix b = ones(50, 20);
  auto [v1, v2] = make_views(b, AugmentConfig{}, rng);
  std::size_t off_grid = 0;
  for (double v : v1.data()) CHECK((v == 0.0 || v == 1.0));
  for (double v : v2.data()) off_grid += (v != 0.0 && v != 1.0);
  CHECK(off_grid == v2.size());
}

TEST_CASE("masks are independent across views") {
  RngStream rng(6, {});
  const Matrix b = ones(200, 100);
  AugmentConfig cfg;
  cfg.noise_level = 0.0;
  const auto [v1, v2] = make_views(b, cfg, rng);
  std::size_t both = 0;
  for (std::size_t i = 0; i < b.size(); ++i) both += (v1.data()[i] == 0.0 && v2.data()[i] == 0.0);
  const double p2 = cfg.mask_prob * cfg.mask_prob, n = static_cast<double>(b.size());
  CHECK(std::abs(static_cast<double>(both) / n - p2) <= 3 * std::sqrt(p2 * (1 - p2) / n));
}

TEST_CASE("views are deterministic per stream key") {
  const Matrix b = ones(8, 8);
  RngStream a(9, {1, 2, StreamPurpose::augment}), c(9, {1, 2, StreamPurpose::augment});
  CHECK(make_views(b, AugmentConfig{}, a) == make_views(b, AugmentConfig{}, c));
}

TEST_CASE("swap noise draws replacements from the same column") {
  RngStream rng(7, {});
  Matrix b(30, 3);
  for (std::size_t r = 0; r < 30; ++r)
    for (std::size_t c = 0; c < 3; ++c) b(r, c) = static_cast<double>(c * 100 + r);
  const Matrix s = swap_mask(b, 0.5, rng);
  for (std::size_t r = 0; r < 30; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(s(r, c) >= c * 100.0);
      CHECK(s(r, c) < c * 100.0 + 30);
    }
}

TEST_CASE("augment config validation") {
  AugmentConfig cfg;
  cfg.mask_prob = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = AugmentConfig{};
  cfg.noise_level = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
