#include "cfl/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "json.hpp"

#include "cfl/error.hpp"
#include "cfl/wire.hpp"

namespace cfl {

namespace {

constexpr std::string_view kMessageMagic = "CFLPMSG1";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

SiloView doubled(const SiloView& v) {
  SiloView out = v;
  const std::size_t m = v.rows();
  std::vector<std::size_t> rows(2 * m);
  for (std::size_t r = 0; r < 2 * m; ++r) rows[r] = r % m;
  out.features = select_rows(v.features, rows);
  out.labels.clear();
  out.row_ids.clear();
  out.present.clear();
  for (std::size_t r : rows) {
    out.labels.push_back(v.labels[r]);
    out.row_ids.push_back(v.row_ids[r]);
    out.present.push_back(v.present[r]);
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_message(const ParamMessage& m) {
  const nlohmann::json header = {{"silo_id", m.silo_id},
                                 {"round", m.round},
                                 {"count", m.count()},
                                 {"sample_weight", m.sample_weight}};
  return wire::encode(kMessageMagic, header.dump(), m.params);
}

ParamMessage decode_message(std::span<const std::uint8_t> bytes) {
  auto frame = wire::decode(kMessageMagic, bytes);
  const auto header = nlohmann::json::parse(frame.header);
  ParamMessage m;
  m.silo_id = header.at("silo_id").get<int>();
  m.round = header.at("round").get<std::uint32_t>();
  m.sample_weight = header.value("sample_weight", 1.0);
  if (header.at("count").get<std::size_t>() != frame.payload.size())
    throw DataError("decode_message: header count disagrees with payload length");
  m.params = std::move(frame.payload);
  return m;
}

void TrainConfig::validate() const {
  if (hidden == 0 || embed == 0) throw ConfigError("encoder and embedding sizes must be >= 1");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2 for in-batch negatives");
  if (local_epochs_per_round == 0) throw ConfigError("local_epochs_per_round must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  augment.validate();
  loss.validate();
}

ClientResult client_update(ClientState& state, const TrainConfig& cfg, std::uint32_t round) {
  const auto t0 = Clock::now();
  const std::size_t m = state.view.rows();
  ClientResult result;
  result.log.round = round;
  result.log.silo_id = state.silo_id;
  std::size_t batches = 0;

  for (std::size_t local = 0; local < cfg.local_epochs_per_round; ++local) {
    const auto epoch = static_cast<std::uint32_t>(round * cfg.local_epochs_per_round + local);
    const auto silo = static_cast<std::uint32_t>(state.silo_id);
    RngStream shuffle_rng(cfg.seed, {silo, epoch, StreamPurpose::shuffle});
    RngStream augment_rng(cfg.seed, {silo, epoch, StreamPurpose::augment});
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span(order));

    std::size_t done = 0;
    for (std::size_t start = 0; start + 1 < m; start += cfg.batch_size) {
      if (cfg.max_batches_per_epoch != 0 && done == cfg.max_batches_per_epoch) break;
      const std::size_t end = std::min(m, start + cfg.batch_size);
      if (end - start < 2) break;
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const Matrix clean = select_rows(state.view.features, rows);
      const auto [view1, view2] = make_views(clean, cfg.augment, augment_rng);
      const ForwardTrace trace = forward(state.params, view1, view2);
      const LossBreakdown loss = total_loss(trace, clean, cfg.loss);
      if (!std::isfinite(loss.total))
        throw DivergenceError("silo " + std::to_string(state.silo_id) + " round " +
                              std::to_string(round) + ": non-finite loss");
      const MlpParams grads = backward(state.params, trace, loss.grads);
      opt_step(state.params, grads, state.opt);
      result.log.total += loss.total;
      result.log.recon += loss.recon;
      result.log.contrastive += loss.contrastive;
      result.log.distance += loss.distance;
      ++batches;
      ++done;
    }
  }
  if (batches > 0) {
    const auto n = static_cast<double>(batches);
    result.log.total /= n;
    result.log.recon /= n;
    result.log.contrastive /= n;
    result.log.distance /= n;
  }
  result.message.silo_id = state.silo_id;
  result.message.round = round;
  result.message.params = flatten(state.params);
  // Left at 1 unless weighting is on, so the header never reveals n_i by default.
  if (cfg.weight_by_samples) result.message.sample_weight = static_cast<double>(state.view.present_count());
  result.log.seconds = seconds_since(t0);
  return result;
}

std::vector<double> server_aggregate(std::span<const ParamMessage> messages, bool weight_by_samples) {
  if (messages.empty()) throw ConfigError("server_aggregate: no messages");
  const std::size_t n = messages.front().count();
  for (const auto& m : messages)
    if (m.count() != n)
      throw ShapeError("server_aggregate: message from silo " + std::to_string(m.silo_id) + " has " +
                       std::to_string(m.count()) + " values, expected " + std::to_string(n));
  double weight_total = 0.0;
  std::vector<double> weights(messages.size(), 1.0);
  if (weight_by_samples) {
    for (std::size_t i = 0; i < messages.size(); ++i) weights[i] = messages[i].sample_weight;
    std::vector<double> sorted = weights;
    std::sort(sorted.begin(), sorted.end());
    weight_total = std::accumulate(sorted.begin(), sorted.end(), 0.0);
    if (!(weight_total > 0.0)) throw ConfigError("server_aggregate: sample weights sum to zero");
  } else {
    weight_total = static_cast<double>(messages.size());
  }

  std::vector<double> out(n);
  std::vector<double> column(messages.size());
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < messages.size(); ++i)
      column[i] = weight_by_samples ? weights[i] * messages[i].params[j] : messages[i].params[j];
    std::sort(column.begin(), column.end());
    double s = 0.0;
    for (double v : column) s += v;
    out[j] = s / weight_total;
  }
  return out;
}

ModelShape model_shape_for(const std::vector<SiloView>& views, const TrainConfig& cfg) {
  if (views.empty()) throw ConfigError("run_cfl: no silos");
  const std::size_t width = views.front().width();
  for (const auto& v : views)
    if (v.width() != width)
      throw ConfigError("run_cfl: silo " + std::to_string(v.silo_id) + " has " + std::to_string(v.width()) +
                        " features but silo " + std::to_string(views.front().silo_id) + " has " +
                        std::to_string(width) + "; FedAvg needs equal widths");
  return ModelShape{width, cfg.hidden, cfg.embed};
}

CflResult run_cfl(const std::vector<SiloView>& views, const TrainConfig& cfg) {
  cfg.validate();
  const ModelShape shape = model_shape_for(views, cfg);
  RngStream init_rng(cfg.seed, {0, 0, StreamPurpose::init});
  MlpParams global = init_params(shape, init_rng);

  std::vector<ClientState> clients;
  clients.reserve(views.size());
  for (const auto& v : views)
    clients.push_back({v.silo_id, v, global, make_opt_state(global, cfg.optimizer, cfg.learning_rate)});

  CflResult out;
  out.parameter_count = global.parameter_count();
  for (std::uint32_t round = 0; round < cfg.epochs; ++round) {
    const auto t0 = Clock::now();
    for (auto& c : clients) c.params = global;

    std::vector<ClientResult> results(clients.size());
    std::vector<std::exception_ptr> errors(clients.size());
    auto work = [&](std::size_t i) {
      try {
        results[i] = client_update(clients[i], cfg, round);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    };
    if (cfg.parallel_clients && clients.size() > 1) {
      std::vector<std::jthread> threads;
      threads.reserve(clients.size());
      for (std::size_t i = 0; i < clients.size(); ++i) threads.emplace_back(work, i);
    } else {
      for (std::size_t i = 0; i < clients.size(); ++i) work(i);
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);

    std::vector<ParamMessage> messages;
    RoundLog log;
    log.round = round;
    for (auto& r : results) {
      out.exchanges.push_back({r.message.silo_id, round, r.message.count(), encode_message(r.message).size()});
      log.entries.push_back(r.log);
      messages.push_back(std::move(r.message));
    }
    global = unflatten(server_aggregate(messages, cfg.weight_by_samples), shape);
    log.seconds = seconds_since(t0);
    out.logs.push_back(std::move(log));
  }
  out.encoder = encoder_of(global);
  out.global = std::move(global);
  return out;
}

PrivacyReport privacy_audit(std::span<const ExchangeRecord> exchanges, std::size_t expected_count) {
  PrivacyReport rep;
  rep.expected_count = expected_count;
  const std::size_t expected_bytes = exchanges.empty() ? 0 : exchanges.front().bytes;
  for (const auto& e : exchanges) {
    ++rep.messages_checked;
    if (e.count != expected_count)
      rep.failures.push_back("silo " + std::to_string(e.silo_id) + " round " + std::to_string(e.round) +
                             ": payload holds " + std::to_string(e.count) + " values, model has " +
                             std::to_string(expected_count));
    if (e.bytes != expected_bytes)
      rep.failures.push_back("silo " + std::to_string(e.silo_id) + " round " + std::to_string(e.round) +
                             ": encoded size " + std::to_string(e.bytes) + " differs from " +
                             std::to_string(expected_bytes));
  }
  rep.passed = rep.failures.empty();
  return rep;
}

PrivacyReport privacy_audit(std::span<const ParamMessage> messages, std::size_t expected_count) {
  std::vector<ExchangeRecord> records;
  for (const auto& m : messages)
    records.push_back({m.silo_id, m.round, m.count(), encode_message(m).size()});
  return privacy_audit(records, expected_count);
}

PrivacyReport audit_row_invariance(const std::vector<SiloView>& views, const TrainConfig& cfg) {
  TrainConfig quick = cfg;
  quick.max_batches_per_epoch = 1;
  quick.local_epochs_per_round = 1;
  const ModelShape shape = model_shape_for(views, quick);
  RngStream init_rng(cfg.seed, {0, 0, StreamPurpose::init});
  const MlpParams init = init_params(shape, init_rng);

  std::vector<ExchangeRecord> records;
  for (const auto& v : views) {
    for (const SiloView& candidate : {v, doubled(v)}) {
      ClientState state{v.silo_id, candidate, init, make_opt_state(init, quick.optimizer, quick.learning_rate)};
      const auto r = client_update(state, quick, 0);
      records.push_back({r.message.silo_id, 0, r.message.count(), encode_message(r.message).size()});
    }
  }
  return privacy_audit(records, init.parameter_count());
}

}  // namespace cfl
