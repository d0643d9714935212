#include "cfl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cfl/loss.hpp"

namespace cfl {

namespace {

enum class Term { recon, contrastive, distance, total };

struct Case {
  std::string name;
  Term term;
  Similarity similarity;
};

struct Eval {
  double value = 0.0;
  OutputGrads grads;
};

const double kTemperature = LossConfig{}.temperature;

Eval evaluate(const Case& c, const ForwardTrace& tr, const Matrix& clean) {
  const Matrix& e1 = tr.views[0].embedding();
  const Matrix& e2 = tr.views[1].embedding();
  const Matrix& r1 = tr.views[0].reconstruction();
  const Matrix& r2 = tr.views[1].reconstruction();
  Eval out;
  out.grads.embedding = {Matrix(e1.rows(), e1.cols()), Matrix(e2.rows(), e2.cols())};
  out.grads.reconstruction = {Matrix(r1.rows(), r1.cols()), Matrix(r2.rows(), r2.cols())};
  switch (c.term) {
    case Term::recon: {
      auto t = recon_loss(r1, r2, clean);
      out.value = t.value;
      out.grads.reconstruction = {std::move(t.grad_first), std::move(t.grad_second)};
      break;
    }
    case Term::contrastive: {
      auto t = contrastive_loss(e1, e2, kTemperature, c.similarity);
      out.value = t.value;
      out.grads.embedding = {std::move(t.grad_first), std::move(t.grad_second)};
      break;
    }
    case Term::distance: {
      auto t = distance_loss(e1, e2);
      out.value = t.value;
      out.grads.embedding = {std::move(t.grad_first), std::move(t.grad_second)};
      break;
    }
    case Term::total: {
      LossConfig cfg;
      cfg.temperature = kTemperature;
      cfg.similarity = c.similarity;
      auto b = total_loss(tr, clean, cfg);
      out.value = b.total;
      out.grads = std::move(b.grads);
      break;
    }
  }
  return out;
}

// Sign pattern of every leaky-ReLU pre-activation in the trace.
std::vector<bool> kink_pattern(const MlpParams& p, const ForwardTrace& tr) {
  std::vector<bool> bits;
  for (const auto& view : tr.views) {
    for (int stack = 0; stack < 2; ++stack) {
      const auto& layers = stack == 0 ? p.encoder : p.decoder;
      const auto& pre = stack == 0 ? view.encoder.pre : view.decoder.pre;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].activation != Activation::leaky_relu) continue;
        const auto& m = pre[l];
        for (std::size_t i = 0; i < m.rows() * m.cols(); ++i) bits.push_back(m.data()[i] > 0.0);
      }
    }
  }
  return bits;
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& opt) {
  const ModelShape shape{opt.input, opt.hidden, opt.embed};
  RngStream init_rng(opt.seed, {0, 0, StreamPurpose::gradcheck});
  const MlpParams params = init_params(shape, init_rng);

  RngStream data_rng = init_rng.derive({1, 0, StreamPurpose::gradcheck});
  Matrix clean(opt.batch, opt.input), v1(opt.batch, opt.input), v2(opt.batch, opt.input);
  for (std::size_t i = 0; i < opt.batch; ++i)
    for (std::size_t j = 0; j < opt.input; ++j) {
      clean(i, j) = data_rng.uniform();
      v1(i, j) = clean(i, j) + 0.1 * data_rng.normal();
      v2(i, j) = clean(i, j) + 0.1 * data_rng.normal();
    }

  const std::vector<Case> cases = {
      {"recon", Term::recon, Similarity::dot},
      {"contrastive-dot", Term::contrastive, Similarity::dot},
      {"contrastive-cosine", Term::contrastive, Similarity::cosine},
      {"distance", Term::distance, Similarity::dot},
      {"total-dot", Term::total, Similarity::dot},
      {"total-cosine", Term::total, Similarity::cosine},
  };

  const std::vector<double> base_flat = flatten(params);
  const ForwardTrace base_trace = forward(params, v1, v2);
  const std::vector<bool> base_kinks = kink_pattern(params, base_trace);

  // Perturbed traces do not depend on the case; cache the values per case.
  std::vector<std::vector<double>> numeric(cases.size(), std::vector<double>(base_flat.size(), 0.0));
  std::vector<bool> skip(base_flat.size(), false);
  std::vector<double> flat = base_flat;
  for (std::size_t k = 0; k < flat.size(); ++k) {
    double plus_val[16] = {}, minus_val[16] = {};
    for (int sign : {1, -1}) {
      flat[k] = base_flat[k] + sign * opt.step;
      const MlpParams p = unflatten(flat, shape);
      const ForwardTrace tr = forward(p, v1, v2);
      if (kink_pattern(p, tr) != base_kinks) skip[k] = true;
      for (std::size_t c = 0; c < cases.size(); ++c)
        (sign > 0 ? plus_val : minus_val)[c] = evaluate(cases[c], tr, clean).value;
    }
    flat[k] = base_flat[k];
    for (std::size_t c = 0; c < cases.size(); ++c)
      numeric[c][k] = (plus_val[c] - minus_val[c]) / (2.0 * opt.step);
  }

  GradcheckReport report;
  report.passed = true;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const Eval e = evaluate(cases[c], base_trace, clean);
    MlpParams g = backward(params, base_trace, e.grads);
    if (opt.tamper) opt.tamper(g);
    const std::vector<double> analytic = flatten(g);
    GradcheckCase res;
    res.name = cases[c].name;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      if (skip[k]) {
        ++res.skipped_kinks;
        continue;
      }
      const double a = analytic[k], n = numeric[c][k];
      const double abs_err = std::abs(a - n);
      const double rel = abs_err / std::max({std::abs(a), std::abs(n), opt.floor});
      res.max_abs_error = std::max(res.max_abs_error, abs_err);
      res.max_rel_error = std::max(res.max_rel_error, std::isfinite(rel) ? rel : INFINITY);
      ++res.checked;
    }
    res.passed = res.checked > 0 && res.max_rel_error < opt.threshold;
    report.max_rel_error = std::max(report.max_rel_error, res.max_rel_error);
    report.passed = report.passed && res.passed;
    report.cases.push_back(std::move(res));
  }
  return report;
}

}  // namespace cfl
