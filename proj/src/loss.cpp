#include "cfl/loss.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "cfl/error.hpp"
#include "cfl/rng.hpp"

namespace cfl {

namespace {

// Softmax terms below exp(-700) relative to the largest are dropped. They
// vanish in the sum anyway; kept as weights they would be subnormal and slow
// down every product they reach.
constexpr double kExpFloor = -700.0;

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shapes " + a.shape_string() + " and " + b.shape_string() +
                     " differ");
}

Matrix vstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

// Fills `weights` with d loss / d similarity for every (anchor, other) pair and
// returns the mean loss.
double nt_xent_from_similarity(const Matrix& sim, std::size_t k, double temperature, Matrix& weights) {
  const std::size_t n = 2 * k;
  weights = Matrix(n, n);
  double total = 0.0;
  const double scale = 1.0 / (static_cast<double>(n) * temperature);
  std::vector<double> logits(n), expd(n);
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t pos = a < k ? a + k : a - k;
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      logits[j] = sim(a, j) / temperature;
      max_logit = std::max(max_logit, logits[j]);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      const double x = logits[j] - max_logit;
      expd[j] = x > kExpFloor ? std::exp(x) : 0.0;
      denom += expd[j];
    }
    total += max_logit + std::log(denom) - logits[pos];
    const double inv = 1.0 / denom;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      weights(a, j) = scale * (expd[j] * inv - (j == pos ? 1.0 : 0.0));
    }
  }
  return total / static_cast<double>(n);
}

std::pair<Matrix, Matrix> split_rows(const Matrix& z, std::size_t k) {
  Matrix a(k, z.cols()), b(k, z.cols());
  std::copy(z.data().begin(), z.data().begin() + static_cast<std::ptrdiff_t>(a.size()), a.data().begin());
  std::copy(z.data().begin() + static_cast<std::ptrdiff_t>(a.size()), z.data().end(), b.data().begin());
  return {std::move(a), std::move(b)};
}

}  // namespace

void LossConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  for (double w : {recon_weight, contrastive_weight, distance_weight})
    if (!(w >= 0.0)) throw ConfigError("loss weights must be >= 0");
}

LossTerm recon_loss(const Matrix& recon1, const Matrix& recon2, const Matrix& target) {
  require_same_shape("recon_loss", recon1, target);
  require_same_shape("recon_loss", recon2, target);
  const auto count = static_cast<double>(target.size());
  LossTerm out;
  out.grad_first = recon1 - target;
  out.grad_second = recon2 - target;
  double s1 = 0.0, s2 = 0.0;
  for (double v : out.grad_first.data()) s1 += v * v;
  for (double v : out.grad_second.data()) s2 += v * v;
  out.value = count > 0 ? 0.5 * (s1 / count + s2 / count) : 0.0;
  if (count > 0) {
    out.grad_first = (1.0 / count) * out.grad_first;
    out.grad_second = (1.0 / count) * out.grad_second;
  }
  return out;
}

LossTerm distance_loss(const Matrix& embed1, const Matrix& embed2) {
  require_same_shape("distance_loss", embed1, embed2);
  const auto count = static_cast<double>(embed1.size());
  LossTerm out;
  Matrix diff = embed1 - embed2;
  double s = 0.0;
  for (double v : diff.data()) s += v * v;
  out.value = count > 0 ? s / count : 0.0;
  out.grad_first = count > 0 ? (2.0 / count) * diff : diff;
  out.grad_second = -1.0 * out.grad_first;
  return out;
}

LossTerm contrastive_loss(const Matrix& embed1, const Matrix& embed2, double temperature,
                          Similarity similarity) {
  require_same_shape("contrastive_loss", embed1, embed2);
  if (!(temperature > 0.0)) throw ConfigError("contrastive_loss: temperature must be > 0");
  const std::size_t k = embed1.rows();
  if (k < 2)
    throw DegenerateError("contrastive_loss: need at least 2 rows per view for negatives, got " +
                          std::to_string(k));
  const Matrix z = vstack(embed1, embed2);
  const std::size_t n = z.rows();
  const Matrix gram = matmul_nt(z, z);
  Matrix weights;
  LossTerm out;

  if (similarity == Similarity::dot) {
    out.value = nt_xent_from_similarity(gram, k, temperature, weights);
    Matrix sym = weights + transpose(weights);
    auto [g1, g2] = split_rows(matmul(sym, z), k);
    out.grad_first = std::move(g1);
    out.grad_second = std::move(g2);
    return out;
  }

  std::vector<double> norm(n);
  for (std::size_t a = 0; a < n; ++a) {
    norm[a] = std::sqrt(gram(a, a));
    if (!(norm[a] > 0.0))
      throw DegenerateError("contrastive_loss: zero-norm embedding row " + std::to_string(a) +
                            " under cosine similarity");
  }
  Matrix sim(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t j = 0; j < n; ++j) sim(a, j) = gram(a, j) / (norm[a] * norm[j]);
  out.value = nt_xent_from_similarity(sim, k, temperature, weights);

  // Chain rule through s_aj = g_aj / (r_a r_j) and r_a = sqrt(g_aa).
  Matrix d_gram(n, n);
  std::vector<double> d_norm(n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t j = 0; j < n; ++j) {
      const double w = weights(a, j);
      if (w == 0.0) continue;
      d_gram(a, j) = w / (norm[a] * norm[j]);
      d_norm[a] -= w * sim(a, j) / norm[a];
      d_norm[j] -= w * sim(a, j) / norm[j];
    }
  Matrix dz = matmul(d_gram + transpose(d_gram), z);
  for (std::size_t a = 0; a < n; ++a) {
    const double f = d_norm[a] / norm[a];
    auto dst = dz.row(a);
    auto src = z.row(a);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += f * src[c];
  }
  auto [g1, g2] = split_rows(dz, k);
  out.grad_first = std::move(g1);
  out.grad_second = std::move(g2);
  return out;
}

LossBreakdown total_loss(const ForwardTrace& trace, const Matrix& clean_batch, const LossConfig& cfg) {
  cfg.validate();
  const auto& v1 = trace.views[0];
  const auto& v2 = trace.views[1];
  LossBreakdown out;
  const LossTerm r = recon_loss(v1.reconstruction(), v2.reconstruction(), clean_batch);
  const LossTerm c = contrastive_loss(v1.embedding(), v2.embedding(), cfg.temperature, cfg.similarity);
  const LossTerm d = distance_loss(v1.embedding(), v2.embedding());
  out.recon = r.value;
  out.contrastive = c.value;
  out.distance = d.value;
  out.total = cfg.recon_weight * r.value + cfg.contrastive_weight * c.value + cfg.distance_weight * d.value;
  out.grads.reconstruction[0] = cfg.recon_weight * r.grad_first;
  out.grads.reconstruction[1] = cfg.recon_weight * r.grad_second;
  out.grads.embedding[0] = cfg.contrastive_weight * c.grad_first + cfg.distance_weight * d.grad_first;
  out.grads.embedding[1] = cfg.contrastive_weight * c.grad_second + cfg.distance_weight * d.grad_second;
  return out;
}

SimilarityBench bench_similarity(std::size_t embed_dim, std::size_t batch, std::size_t iterations,
                                 std::uint64_t seed, std::size_t warmup) {
  if (iterations < 1) throw ConfigError("bench_similarity: need at least one iteration");
  RngStream rng(seed, {0, 0, StreamPurpose::bench});
  Matrix e1(batch, embed_dim), e2(batch, embed_dim);
  for (double& v : e1.data()) v = rng.normal();
  for (double& v : e2.data()) v = rng.normal();

  double sink = 0.0;
  auto run = [&](Similarity s) {
    const auto t0 = std::chrono::steady_clock::now();
    const LossTerm t = contrastive_loss(e1, e2, 0.1, s);
    const auto t1 = std::chrono::steady_clock::now();
    sink += t.value + t.grad_first(0, 0);
    return std::chrono::duration<double>(t1 - t0).count();
  };
  for (std::size_t i = 0; i < warmup; ++i) {
    run(Similarity::dot);
    run(Similarity::cosine);
  }
  SimilarityBench b{embed_dim, batch, iterations};
  for (std::size_t i = 0; i < iterations; ++i) {
    b.seconds_dot += run(Similarity::dot);
    b.seconds_cosine += run(Similarity::cosine);
  }
  if (!std::isfinite(sink)) throw DivergenceError("bench_similarity: non-finite loss");
  b.seconds_dot /= static_cast<double>(iterations);
  b.seconds_cosine /= static_cast<double>(iterations);
  b.ratio = b.seconds_cosine / b.seconds_dot;
  return b;
}

std::string to_string(Similarity s) { return s == Similarity::dot ? "dot" : "cosine"; }

Similarity similarity_from_string(const std::string& s) {
  if (s == "dot") return Similarity::dot;
  if (s == "cosine") return Similarity::cosine;
  throw ConfigError("unknown similarity '" + s + "' (expected dot or cosine)");
}

}  // namespace cfl
