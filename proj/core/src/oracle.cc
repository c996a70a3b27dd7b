#include "amfsl/oracle.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amfsl::oracle {

namespace {

Layer copy_layer(const Tensor& weight, const Tensor& bias) {
  Layer l;
  const std::size_t in = weight.shape()[0], out = weight.shape()[1];
  l.weight.assign(in, std::vector<double>(out));
  for (std::size_t i = 0; i < in; ++i)
    for (std::size_t j = 0; j < out; ++j) l.weight[i][j] = weight.values()[i * out + j];
  l.bias.assign(bias.values().begin(), bias.values().end());
  return l;
}

std::vector<double> copy(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

std::vector<double> affine(const Layer& l, const std::vector<double>& x) {
  std::vector<double> y = l.bias;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) y[j] += x[i] * l.weight[i][j];
  return y;
}

std::vector<double> relu(std::vector<double> v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
  return v;
}

std::vector<double> embed(const Params& p, const std::vector<double>& x) {
  std::vector<double> h = x;
  for (std::size_t l = 0; l < p.embed.size(); ++l) {
    h = affine(p.embed[l], h);
    if (l + 1 < p.embed.size()) h = relu(h);
  }
  return h;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

std::vector<double> as_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

// Column-wise batch normalization over the rows of `rows`.
void batch_norm(std::vector<std::vector<double>>& rows, const std::vector<double>& scale,
                const std::vector<double>& shift) {
  const double eps = 1e-5;
  const std::size_t m = rows.size();
  for (std::size_t j = 0; j < scale.size(); ++j) {
    double mu = 0.0;
    for (const auto& r : rows) mu += r[j];
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (const auto& r : rows) var += (r[j] - mu) * (r[j] - mu);
    var /= static_cast<double>(m);
    for (auto& r : rows) r[j] = scale[j] * (r[j] - mu) / std::sqrt(var + eps) + shift[j];
  }
}

// margins[y][k] for every ordered pair of episode positions.
std::vector<std::vector<double>> margins(const LossKind& kind, const Episode& ep,
                                         const SemanticStore& store, const Params& p) {
  const std::size_t n = ep.classes.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  auto sim = [&](std::size_t a, std::size_t b) {
    return cosine(as_vector(store.vector(ep.classes[a])), as_vector(store.vector(ep.classes[b])));
  };
  switch (kind.type) {
    case LossType::kPlain:
      return m;
    case LossType::kNaive:
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t k = 0; k < n; ++k) m[y][k] = kind.margin;
      return m;
    case LossType::kClassRelevant:
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t k = 0; k < n; ++k) m[y][k] = p.alpha * sim(y, k) + p.beta;
      return m;
    case LossType::kTaskRelevant:
      break;
  }
  // One generator input row per target: similarities to the other classes,
  // sorted by their class ids.
  std::vector<std::vector<std::size_t>> order(n);
  std::vector<std::vector<double>> hidden(n);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t k = 0; k < n; ++k)
      if (k != y) order[y].push_back(k);
    std::stable_sort(order[y].begin(), order[y].end(),
                     [&](std::size_t a, std::size_t b) { return ep.classes[a] < ep.classes[b]; });
    std::vector<double> x;
    for (std::size_t k : order[y]) x.push_back(sim(y, k));
    hidden[y] = affine(p.gen_hidden, x);
  }
  if (p.gen_batch_norm) batch_norm(hidden, p.bn_hidden_scale, p.bn_hidden_shift);
  std::vector<std::vector<double>> out(n);
  for (std::size_t y = 0; y < n; ++y) out[y] = affine(p.gen_output, relu(hidden[y]));
  if (p.gen_batch_norm) {
    batch_norm(out, p.bn_output_scale, p.bn_output_shift);
    for (auto& r : out) r = relu(r);
  }
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t j = 0; j < order[y].size(); ++j) m[y][order[y][j]] = out[y][j];
  return m;
}

}  // namespace

Params snapshot(const ModelParams& params) {
  Params p;
  for (const auto& l : params.embed.layers()) p.embed.push_back(copy_layer(l.weight, l.bias));
  p.cosine = params.metric.kind == MetricKind::kCosine;
  p.gamma = params.metric.gamma.values()[0];
  p.alpha = params.class_relevant.alpha.values()[0];
  p.beta = params.class_relevant.beta.values()[0];
  if (params.task_relevant.defined()) {
    const auto& g = params.task_relevant;
    p.gen_hidden = copy_layer(g.hidden().weight, g.hidden().bias);
    p.gen_output = copy_layer(g.output().weight, g.output().bias);
    p.gen_batch_norm = g.config().batch_norm;
    for (const auto& [name, t] : g.tensors()) {
      if (name == "bn0.scale") p.bn_hidden_scale = copy(t);
      if (name == "bn0.shift") p.bn_hidden_shift = copy(t);
      if (name == "bn1.scale") p.bn_output_scale = copy(t);
      if (name == "bn1.shift") p.bn_output_shift = copy(t);
    }
  }
  return p;
}

Result episode_loss(const LossKind& kind, const Episode& ep, const Dataset& dataset,
                    const SemanticStore& store, const Params& p) {
  const std::size_t n = ep.classes.size();
  std::vector<std::vector<double>> protos(n);
  std::vector<std::size_t> counts(n, 0);
  for (const auto& s : ep.support) {
    const auto z = embed(p, as_vector(dataset.features(s.sample)));
    if (protos[s.label].empty()) protos[s.label].assign(z.size(), 0.0);
    for (std::size_t i = 0; i < z.size(); ++i) protos[s.label][i] += z[i];
    ++counts[s.label];
  }
  for (std::size_t k = 0; k < n; ++k)
    for (double& v : protos[k]) v /= static_cast<double>(counts[k]);

  const auto m = margins(kind, ep, store, p);
  Result r;
  for (const auto& q : ep.query) {
    const auto z = embed(p, as_vector(dataset.features(q.sample)));
    std::vector<double> logit(n);
    for (std::size_t k = 0; k < n; ++k) {
      if (p.cosine) {
        logit[k] = p.gamma * cosine(z, protos[k]);
      } else {
        double d2 = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) d2 += (z[i] - protos[k][i]) * (z[i] - protos[k][i]);
        logit[k] = -p.gamma * d2;
      }
    }
    const std::size_t y = q.label;
    // p = 1 / (1 + s), s = sum_{k != y} e^{l_k + m_yk} / e^{l_y}
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (k != y) s += std::exp(logit[k] + m[y][k]) / std::exp(logit[y]);
    r.p.push_back(1.0 / (1.0 + s));
    r.loss.push_back(std::log1p(s));
  }
  double sum = 0.0;
  for (double l : r.loss) sum += l;
  r.total = sum / static_cast<double>(r.loss.size());
  return r;
}

}  // namespace amfsl::oracle
