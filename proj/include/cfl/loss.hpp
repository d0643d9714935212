#pragma once

#include <cstddef>
#include <string>

#include "cfl/matrix.hpp"
#include "cfl/model.hpp"

namespace cfl {

enum class Similarity { dot, cosine };

struct LossConfig {
  double temperature = 0.1;
  Similarity similarity = Similarity::dot;
  double recon_weight = 1.0;
  double contrastive_weight = 1.0;
  double distance_weight = 1.0;

  void validate() const;
};

// A scalar loss and its gradients with respect to its two matrix arguments.
struct LossTerm {
  double value = 0.0;
  Matrix grad_first;
  Matrix grad_second;
};

/// 0.5 * (MSE(recon1, target) + MSE(recon2, target)); MSE averages over all
/// entries.
LossTerm recon_loss(const Matrix& recon1, const Matrix& recon2, const Matrix& target);

// Mean squared entrywise difference of the two embedding matrices.
LossTerm distance_loss(const Matrix& embed1, const Matrix& embed2);

/// NT-Xent over the 2K stacked embeddings. Row k of view 1 and row k of view
/// 2 are positives; every other row is a negative. Averaged over all 2K
/// anchors. Throws DegenerateError for K < 2 or, under cosine similarity, a
/// zero-norm row.
LossTerm contrastive_loss(const Matrix& embed1, const Matrix& embed2, double temperature,
                          Similarity similarity);

struct LossBreakdown {
  double total = 0.0;
  double recon = 0.0;
  double contrastive = 0.0;
  double distance = 0.0;
  OutputGrads grads;
};

// Weighted sum of the three terms with gradients routed to each network output.
LossBreakdown total_loss(const ForwardTrace& trace, const Matrix& clean_batch, const LossConfig& cfg);

struct SimilarityBench {
  std::size_t embed_dim = 0;
  std::size_t batch = 0;
  std::size_t iterations = 0;
  double seconds_dot = 0.0;     // mean per batch
  double seconds_cosine = 0.0;  // mean per batch
  double ratio = 0.0;           // seconds_cosine / seconds_dot
};

/// Times contrastive loss plus gradient for both similarities on identical
/// random embeddings. The first `warmup` iterations of each are untimed; timed
/// iterations alternate between the two kernels.
SimilarityBench bench_similarity(std::size_t embed_dim, std::size_t batch, std::size_t iterations,
                                 std::uint64_t seed, std::size_t warmup = 3);

std::string to_string(Similarity s);
Similarity similarity_from_string(const std::string& s);

}  // namespace cfl
