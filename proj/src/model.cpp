#include "cfl/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "json.hpp"

#include "cfl/error.hpp"
#include "cfl/wire.hpp"

namespace cfl {

namespace {

constexpr std::string_view kCheckpointMagic = "CFLCKPT1";

DenseLayer make_layer(std::size_t in, std::size_t out, Activation act, RngStream* rng) {
  DenseLayer l{Matrix(in, out), std::vector<double>(out, 0.0), act};
  if (rng != nullptr) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& w : l.weight.data()) w = (2.0 * rng->uniform() - 1.0) * limit;
  }
  return l;
}

std::vector<DenseLayer> make_encoder(const ModelShape& s, RngStream* rng) {
  std::vector<DenseLayer> layers;
  layers.push_back(make_layer(s.input, s.hidden, Activation::leaky_relu, rng));
  layers.push_back(make_layer(s.hidden, s.embed, Activation::linear, rng));
  return layers;
}

std::vector<DenseLayer> make_decoder(const ModelShape& s, RngStream* rng) {
  std::vector<DenseLayer> layers;
  layers.push_back(make_layer(s.embed, s.hidden, Activation::leaky_relu, rng));
  layers.push_back(make_layer(s.hidden, s.input, Activation::linear, rng));
  return layers;
}

void check_shape(const ModelShape& s) {
  if (s.input == 0 || s.hidden == 0 || s.embed == 0)
    throw ConfigError("model dimensions must all be >= 1");
}

Matrix affine(const DenseLayer& l, const Matrix& x) {
  if (x.cols() != l.inputs())
    throw ShapeError("layer expects " + std::to_string(l.inputs()) + " inputs, got batch " +
                     x.shape_string());
  Matrix z = matmul(x, l.weight);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += l.bias[c];
  }
  return z;
}

Matrix activate(const Matrix& z, Activation act) {
  if (act == Activation::linear) return z;
  Matrix a = z;
  for (double& v : a.data())
    if (v < 0.0) v *= kLeakySlope;
  return a;
}

Matrix run_stack(const std::vector<DenseLayer>& layers, const Matrix& x, StackTrace* trace) {
  Matrix h = x;
  for (const auto& l : layers) {
    Matrix z = affine(l, h);
    Matrix a = activate(z, l.activation);
    if (trace != nullptr) {
      trace->inputs.push_back(std::move(h));
      trace->pre.push_back(std::move(z));
    }
    h = std::move(a);
  }
  if (trace != nullptr) trace->output = h;
  return h;
}

// Accumulates layer gradients into `grads` and returns d loss / d input.
Matrix backprop_stack(const std::vector<DenseLayer>& layers, const StackTrace& trace,
                      Matrix upstream, std::vector<DenseLayer>& grads, bool need_input_grad) {
  for (std::size_t li = layers.size(); li-- > 0;) {
    const DenseLayer& l = layers[li];
    Matrix delta = std::move(upstream);
    if (l.activation == Activation::leaky_relu) {
      auto pre = trace.pre[li].data();
      auto d = delta.data();
      for (std::size_t i = 0; i < d.size(); ++i)
        if (!(pre[i] > 0.0)) d[i] *= kLeakySlope;
    }
    Matrix dw = matmul_tn(trace.inputs[li], delta);
    auto gw = grads[li].weight.data();
    auto dwd = dw.data();
    for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += dwd[i];
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      auto row = delta.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) grads[li].bias[c] += row[c];
    }
    if (li > 0 || need_input_grad) upstream = matmul_nt(delta, l.weight);
  }
  return upstream;
}

template <typename F>
void for_each_tensor(MlpParams& p, F&& f) {
  for (auto* stack : {&p.encoder, &p.decoder})
    for (auto& l : *stack) {
      f(l.weight.data());
      f(std::span<double>(l.bias));
    }
}

template <typename F>
void for_each_tensor(const MlpParams& p, F&& f) {
  for (const auto* stack : {&p.encoder, &p.decoder})
    for (const auto& l : *stack) {
      f(l.weight.data());
      f(std::span<const double>(l.bias));
    }
}

nlohmann::json shape_json(const ModelShape& s) {
  return {{"input", s.input}, {"hidden", s.hidden}, {"embed", s.embed}};
}

}  // namespace

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor(*this, [&](std::span<const double> t) { n += t.size(); });
  return n;
}

Matrix Encoder::encode(const Matrix& x) const { return run_stack(layers, x, nullptr); }

MlpParams init_params(const ModelShape& shape, RngStream& rng) {
  check_shape(shape);
  MlpParams p;
  p.shape = shape;
  p.encoder = make_encoder(shape, &rng);
  p.decoder = make_decoder(shape, &rng);
  return p;
}

MlpParams zeros_like(const MlpParams& p) {
  MlpParams z;
  z.shape = p.shape;
  z.encoder = make_encoder(p.shape, nullptr);
  z.decoder = make_decoder(p.shape, nullptr);
  return z;
}

Matrix encode(const MlpParams& p, const Matrix& x) { return run_stack(p.encoder, x, nullptr); }

Matrix decode(const MlpParams& p, const Matrix& e) {
  if (p.decoder.empty()) throw Error("decode: model has no decoder");
  return run_stack(p.decoder, e, nullptr);
}

Encoder encoder_of(const MlpParams& p) { return Encoder{p.shape, p.encoder}; }

std::uint64_t fingerprint(const MlpParams& p) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for_each_tensor(p, [&](std::span<const double> t) {
    for (double v : t) {
      h ^= std::bit_cast<std::uint64_t>(v);
      h *= 0x100000001B3ULL;
    }
  });
  return h;
}

ForwardTrace forward(const MlpParams& p, const Matrix& view1, const Matrix& view2) {
  ForwardTrace trace;
  trace.params_fingerprint = fingerprint(p);
  const Matrix* inputs[2] = {&view1, &view2};
  for (int v = 0; v < 2; ++v) {
    auto& vt = trace.views[static_cast<std::size_t>(v)];
    const Matrix e = run_stack(p.encoder, *inputs[v], &vt.encoder);
    run_stack(p.decoder, e, &vt.decoder);
  }
  return trace;
}

MlpParams backward(const MlpParams& p, const ForwardTrace& trace, const OutputGrads& grads) {
  if (trace.params_fingerprint != fingerprint(p))
    throw Error("backward: trace was produced by different parameters (stale trace)");
  MlpParams g = zeros_like(p);
  for (std::size_t v = 0; v < 2; ++v) {
    const auto& vt = trace.views[v];
    if (grads.reconstruction[v].rows() != vt.reconstruction().rows() ||
        grads.reconstruction[v].cols() != vt.reconstruction().cols() ||
        grads.embedding[v].rows() != vt.embedding().rows() ||
        grads.embedding[v].cols() != vt.embedding().cols())
      throw ShapeError("backward: output gradient shapes do not match the trace");
    Matrix d_embed = backprop_stack(p.decoder, vt.decoder, grads.reconstruction[v], g.decoder, true);
    d_embed = d_embed + grads.embedding[v];
    backprop_stack(p.encoder, vt.encoder, std::move(d_embed), g.encoder, false);
  }
  return g;
}

OptState make_opt_state(const MlpParams& p, OptimizerKind kind, double learning_rate) {
  OptState s;
  s.kind = kind;
  s.learning_rate = learning_rate;
  if (kind == OptimizerKind::adam) {
    s.first_moment.assign(p.parameter_count(), 0.0);
    s.second_moment.assign(p.parameter_count(), 0.0);
  }
  return s;
}

void opt_step(MlpParams& params, const MlpParams& grads, OptState& opt) {
  if (!(params.shape == grads.shape))
    throw ShapeError("opt_step: gradient shape does not match parameters");
  bool finite = true;
  for_each_tensor(grads, [&](std::span<const double> t) {
    for (double v : t) finite = finite && std::isfinite(v);
  });
  if (!finite) throw DivergenceError("opt_step: non-finite gradient");

  const auto flat_grads = flatten(grads);
  ++opt.step;
  std::size_t offset = 0;
  if (opt.kind == OptimizerKind::sgd) {
    for_each_tensor(params, [&](std::span<double> t) {
      for (double& w : t) w -= opt.learning_rate * flat_grads[offset++];
    });
    return;
  }
  if (opt.first_moment.size() != flat_grads.size())
    throw ShapeError("opt_step: optimizer state does not match parameter count");
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for_each_tensor(params, [&](std::span<double> t) {
    for (double& w : t) {
      const double g = flat_grads[offset];
      double& m = opt.first_moment[offset];
      double& v = opt.second_moment[offset];
      m = opt.beta1 * m + (1.0 - opt.beta1) * g;
      v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
      w -= opt.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + opt.epsilon);
      ++offset;
    }
  });
}

std::vector<double> flatten(const MlpParams& p) {
  std::vector<double> flat;
  flat.reserve(p.parameter_count());
  for_each_tensor(p, [&](std::span<const double> t) { flat.insert(flat.end(), t.begin(), t.end()); });
  return flat;
}

MlpParams unflatten(std::span<const double> flat, const ModelShape& shape) {
  check_shape(shape);
  MlpParams p;
  p.shape = shape;
  p.encoder = make_encoder(shape, nullptr);
  p.decoder = make_decoder(shape, nullptr);
  const std::size_t expected = p.parameter_count();
  if (flat.size() != expected)
    throw ShapeError("unflatten: got " + std::to_string(flat.size()) + " values, shape needs " +
                     std::to_string(expected));
  std::size_t offset = 0;
  for_each_tensor(p, [&](std::span<double> t) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
              flat.begin() + static_cast<std::ptrdiff_t>(offset + t.size()), t.begin());
    offset += t.size();
  });
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& p) {
  nlohmann::json header = {{"format", "cfl-mlp"},
                           {"shape", shape_json(p.shape)},
                           {"count", p.parameter_count()}};
  const auto flat = flatten(p);
  const auto bytes = wire::encode(kCheckpointMagic, header.dump(), flat);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto frame = wire::decode(kCheckpointMagic, bytes);
  const auto header = nlohmann::json::parse(frame.header);
  ModelShape shape{header.at("shape").at("input").get<std::size_t>(),
                   header.at("shape").at("hidden").get<std::size_t>(),
                   header.at("shape").at("embed").get<std::size_t>()};
  if (header.at("count").get<std::size_t>() != frame.payload.size())
    throw DataError("checkpoint " + path.string() + ": header count disagrees with payload");
  return unflatten(frame.payload, shape);
}

}  // namespace cfl
