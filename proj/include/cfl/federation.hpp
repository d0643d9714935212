#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cfl/augment.hpp"
#include "cfl/loss.hpp"
#include "cfl/model.hpp"
#include "cfl/rng.hpp"
#include "cfl/silo.hpp"

namespace cfl {

/// What a silo sends to the server: parameters only. There is deliberately no
/// field able to carry rows of data.
struct ParamMessage {
  int silo_id = 0;
  std::uint32_t round = 0;
  std::vector<double> params;
  double sample_weight = 1.0;

  std::size_t count() const { return params.size(); }
};

// Wire form: wire::Frame with magic "CFLPMSG1", header
// {"silo_id", "round", "count", "sample_weight"} and the flat parameters.
std::vector<std::uint8_t> encode_message(const ParamMessage& m);
ParamMessage decode_message(std::span<const std::uint8_t> bytes);

struct TrainConfig {
  std::size_t hidden = 256;
  std::size_t embed = 256;
  std::size_t epochs = 10;
  std::size_t local_epochs_per_round = 1;
  std::size_t batch_size = 256;
  // 0 = whole epoch. Used by the privacy audit to keep probe rounds short.
  std::size_t max_batches_per_epoch = 0;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  AugmentConfig augment;
  LossConfig loss;
  bool weight_by_samples = false;
  bool parallel_clients = true;
  std::uint64_t seed = 42;

  void validate() const;
};

struct ClientState {
  int silo_id = 0;
  SiloView view;
  MlpParams params;
  OptState opt;
};

struct RoundLogEntry {
  std::uint32_t round = 0;
  int silo_id = 0;
  double total = 0.0;
  double recon = 0.0;
  double contrastive = 0.0;
  double distance = 0.0;
  double seconds = 0.0;
};

struct RoundLog {
  std::uint32_t round = 0;
  std::vector<RoundLogEntry> entries;
  double seconds = 0.0;
};

struct ClientResult {
  ParamMessage message;
  RoundLogEntry log;
};

/// One call = local_epochs_per_round passes over the silo's rows starting
/// from state.params. Row order is reshuffled per epoch with stream
/// (silo, epoch, shuffle); augmentation uses (silo, epoch, augment).
/// Throws DivergenceError if the loss becomes non-finite.
ClientResult client_update(ClientState& state, const TrainConfig& cfg, std::uint32_t round);

/// Coordinatewise mean (or sample-weighted mean) of the messages. Each
/// coordinate is reduced over the sorted contributions, so the result does not
/// depend on message order.
std::vector<double> server_aggregate(std::span<const ParamMessage> messages, bool weight_by_samples = false);

struct ExchangeRecord {
  int silo_id = 0;
  std::uint32_t round = 0;
  std::size_t count = 0;
  std::size_t bytes = 0;
};

struct CflResult {
  Encoder encoder;
  MlpParams global;  // final aggregated encoder + decoder
  std::vector<RoundLog> logs;
  std::vector<ExchangeRecord> exchanges;
  std::size_t parameter_count = 0;
};

ModelShape model_shape_for(const std::vector<SiloView>& views, const TrainConfig& cfg);

/// FedAvg over contrastive pretraining. Requires every silo to have the same
/// width. For each round all clients start from the broadcast parameters,
/// train locally and the server averages their messages.
CflResult run_cfl(const std::vector<SiloView>& views, const TrainConfig& cfg);

struct PrivacyReport {
  bool passed = true;
  std::size_t expected_count = 0;
  std::size_t messages_checked = 0;
  std::vector<std::string> failures;
};

// Every payload must hold exactly `expected_count` values and every encoded
// message the same number of bytes.
PrivacyReport privacy_audit(std::span<const ExchangeRecord> exchanges, std::size_t expected_count);
PrivacyReport privacy_audit(std::span<const ParamMessage> messages, std::size_t expected_count);

/// Runs one short client update per silo on the original and on a row-doubled
/// copy of each view and checks the encoded message sizes are identical.
PrivacyReport audit_row_invariance(const std::vector<SiloView>& views, const TrainConfig& cfg);

}  // namespace cfl
