#include <algorithm>
#include <cmath>
#include <set>

#include "bcareid/errors.hpp"
#include "bcareid/probe.hpp"

namespace bcareid {

namespace {

Matrix activate(const Matrix& x, double slope) {
  return x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

std::size_t packed_size(const ProbeParams& p) {
  return 1 + static_cast<std::size_t>(p.weight.size() + p.bias.size());
}

void pack(const ProbeParams& p, std::vector<double>& out) {
  out.resize(packed_size(p));
  out[0] = p.slope;
  std::copy(p.weight.data(), p.weight.data() + p.weight.size(), out.begin() + 1);
  std::copy(p.bias.data(), p.bias.data() + p.bias.size(), out.begin() + 1 + p.weight.size());
}

void unpack(std::span<const double> in, ProbeParams& p) {
  p.slope = in[0];
  std::copy(in.begin() + 1, in.begin() + 1 + p.weight.size(), p.weight.data());
  std::copy(in.begin() + 1 + p.weight.size(), in.end(), p.bias.data());
}

}  // namespace

Matrix probe_scores(const ProbeParams& probe, const Matrix& features) {
  if (features.cols() != probe.weight.cols()) throw ConfigError("probe: feature width mismatch");
  Matrix z = activate(features, probe.slope) * probe.weight.transpose();
  z.rowwise() += probe.bias.transpose();
  return z;
}

double probe_loss(const ProbeParams& probe, const Matrix& x, std::span<const int> labels,
                  std::vector<double>* grad) {
  const Eigen::Index n = x.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw ConfigError("probe: label count mismatch");
  if (n == 0) throw ConfigError("probe: no samples");
  const Matrix h = activate(x, probe.slope);
  Matrix z = h * probe.weight.transpose();
  z.rowwise() += probe.bias.transpose();

  double loss = 0.0;
  Matrix dz(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double top = z.row(i).maxCoeff();
    const Eigen::RowVectorXd ex = (z.row(i).array() - top).exp().matrix();
    const double sum = ex.sum();
    const auto y = labels[static_cast<std::size_t>(i)];
    loss += std::log(sum) - (z(i, y) - top);
    dz.row(i) = ex / sum;
    dz(i, y) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  loss *= inv_n;
  if (grad) {
    dz *= inv_n;
    ProbeParams g;
    g.weight = dz.transpose() * h;
    g.bias = dz.colwise().sum().transpose();
    const Matrix dh = dz * probe.weight;
    g.slope = (dh.array() * x.unaryExpr([](double v) { return v > 0.0 ? 0.0 : v; }).array()).sum();
    pack(g, *grad);
  }
  return loss;
}

ProbeParams train_probe(const Matrix& features, std::span<const int> labels, int n_classes,
                        const ProbeConfig& cfg) {
  if (n_classes < 2) throw ConfigError("probe needs at least two classes");
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw ConfigError("probe: label count mismatch");
  std::set<int> present;
  for (int y : labels) {
    if (y < 0 || y >= n_classes) throw ConfigError("probe: label outside class range");
    present.insert(y);
  }
  if (present.size() < 2) throw ConfigError("probe training data holds a single class");

  Rng rng = derive_rng(cfg.seed, "probe-init");
  std::normal_distribution<double> normal(0.0, 1.0);
  ProbeParams p;
  p.weight.resize(n_classes, features.cols());
  const double scale = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, features.cols())));
  for (Eigen::Index i = 0; i < p.weight.size(); ++i) p.weight.data()[i] = scale * normal(rng);
  p.bias = Vector::Zero(n_classes);

  std::vector<double> flat, grad;
  pack(p, flat);
  FlatAdam adam(flat.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    probe_loss(p, features, labels, &grad);
    adam.step(flat, grad, cfg.rate);
    unpack(flat, p);
  }
  return p;
}

double probe_accuracy(const ProbeParams& probe, const Matrix& features, std::span<const int> labels) {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw ConfigError("probe: label count mismatch");
  if (labels.empty()) throw EvaluationError("probe: no test samples");
  const Matrix z = probe_scores(probe, features);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index best = 0;
    z.row(i).maxCoeff(&best);  // first maximum on ties
    correct += best == labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

ProbeReport probe_embeddings(const EmbeddingSet& emb, std::string_view channel,
                             const ProbeConfig& cfg) {
  const std::size_t c = emb.meta.require_channel(channel);
  const auto& labels = emb.meta.bias[c];
  std::vector<std::size_t> fit, test;
  for (std::size_t i = 0; i < emb.size(); ++i)
    (emb.meta.splits[i] == Split::kTrain ? fit : test).push_back(i);
  if (fit.empty() || test.empty()) {
    fit.clear();
    test.clear();
    for (std::size_t i = 0; i < emb.size(); ++i) (i % 2 == 0 ? fit : test).push_back(i);
  }
  auto gather = [&](const std::vector<std::size_t>& rows, Matrix& x, std::vector<int>& y) {
    x.resize(static_cast<Eigen::Index>(rows.size()), emb.dim());
    y.clear();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      x.row(static_cast<Eigen::Index>(r)) = emb.embeddings.row(static_cast<Eigen::Index>(rows[r]));
      y.push_back(labels[rows[r]]);
    }
  };
  Matrix xf, xt;
  std::vector<int> yf, yt;
  gather(fit, xf, yf);
  gather(test, xt, yt);
  if (yt.empty()) throw EvaluationError("probe: no test rows");

  const int n_classes = static_cast<int>(emb.meta.channels[c].classes.size());
  const auto probe = train_probe(xf, yf, n_classes, cfg);
  ProbeReport r;
  r.channel = std::string(channel);
  r.accuracy = probe_accuracy(probe, xt, yt);
  r.train_rows = fit.size();
  r.test_rows = test.size();
  r.classes = n_classes;
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
  for (int y : yt) ++counts[static_cast<std::size_t>(y)];
  r.chance = static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
             static_cast<double>(yt.size());
  return r;
}

}  // namespace bcareid
