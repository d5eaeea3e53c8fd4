#include "haptigrasp/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "haptigrasp/error.hpp"
#include "haptigrasp/nn/adam.hpp"

namespace hg {

using TensorD = nn::Tensor<double>;

void ActionBins::validate() const {
  for (int k = 0; k < kRegraspDims; ++k)
    if (!(hi[k] > lo[k])) throw ValidationError("action bin range must have hi > lo");
}

ExecutedBins ActionBins::encode(const RegraspDelta& delta, bool* clamped) const {
  ExecutedBins out{};
  bool any = false;
  for (int k = 0; k < kRegraspDims; ++k) {
    const double v = delta[k];
    const double c = std::clamp(v, lo[k], hi[k]);
    any = any || c != v;
    const int bin = static_cast<int>(std::floor((c - lo[k]) / width(k)));
    out[k] = std::clamp(bin, 0, kBinsPerDim - 1);
  }
  if (clamped) *clamped = any;
  return out;
}

RegraspDelta ActionBins::decode(const ExecutedBins& bins) const {
  RegraspDelta d;
  for (int k = 0; k < kRegraspDims; ++k) {
    if (bins[k] < 0 || bins[k] >= kBinsPerDim) throw ArgumentError("bin index " + std::to_string(bins[k]) + " out of range");
    d[k] = center(k, bins[k]);
  }
  return d;
}

RegraspDelta ActionBins::sample_uniform(Rng& rng) const {
  RegraspDelta d;
  for (int k = 0; k < kRegraspDims; ++k) d[k] = uniform(rng, lo[k], hi[k]);
  return d;
}

bool ActionBins::contains(const RegraspDelta& delta) const {
  for (int k = 0; k < kRegraspDims; ++k)
    if (delta[k] < lo[k] || delta[k] > hi[k]) return false;
  return true;
}

std::string_view to_string(ClassifierKind k) { return k == ClassifierKind::deep ? "deep" : "linear_hinge"; }

ClassifierKind classifier_kind_from_string(std::string_view s) {
  if (s == "deep") return ClassifierKind::deep;
  if (s == "linear_hinge") return ClassifierKind::linear_hinge;
  throw ValidationError("unknown classifier kind '" + std::string(s) + "'");
}

void ClassifierConfig::validate() const {
  if (learning_rate < 0.0 || epochs < 0 || batch_size < 1 || l2 < 0.0)
    throw ValidationError("classifier needs learning_rate >= 0, epochs >= 0, batch_size >= 1, l2 >= 0");
  for (int h : hidden)
    if (h < 1) throw ValidationError("classifier hidden sizes must be positive");
}

void PolicyConfig::validate() const {
  if (learning_rate < 0.0 || epochs < 0 || batch_size < 1)
    throw ValidationError("policy needs learning_rate >= 0, epochs >= 0, batch_size >= 1");
  for (int h : hidden)
    if (h < 1) throw ValidationError("policy hidden sizes must be positive");
}

namespace {

bool binary_deep(const Classifier& c) { return c.kind == ClassifierKind::deep && c.num_classes == 2; }

using BatchLoss = std::function<nn::LossResult<double>(const TensorD& out, const std::vector<int>& idx)>;

// Minibatch ADAM over the columns of `x`. Returns the mean batch loss of
// each epoch.
std::vector<double> fit(nn::Mlp<double>& net, const Eigen::MatrixXd& x, double lr, int epochs, int batch_size,
                        double l2, const BatchLoss& loss_fn, Rng& rng) {
  auto params = net.params("net");
  nn::AdamState<double> adam(params, lr);
  std::vector<int> order(x.cols());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> curve;
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    int batches = 0;
    for (std::size_t from = 0; from < order.size(); from += batch_size) {
      const std::size_t to = std::min(order.size(), from + static_cast<std::size_t>(batch_size));
      std::vector<int> idx(order.begin() + from, order.begin() + to);
      TensorD xb(x.rows(), idx.size());
      for (std::size_t j = 0; j < idx.size(); ++j) xb.col(j) = x.col(idx[j]);
      const auto cache = nn::mlp_forward_cached(net, xb);
      auto loss = loss_fn(cache.output(), idx);
      if (!std::isfinite(loss.value)) throw TrainingError("loss diverged in epoch " + std::to_string(e));
      auto grads = nn::mlp_backward(net, cache, loss.grad);
      if (l2 > 0.0)
        for (std::size_t k = 0; k < net.layers.size(); ++k) {
          grads.params[2 * k] += l2 * net.layers[k].W;
          loss.value += 0.5 * l2 * net.layers[k].W.squaredNorm();
        }
      adam.step(params, grads.params);
      total += loss.value;
      ++batches;
    }
    curve.push_back(batches ? total / batches : 0.0);
  }
  return curve;
}

void require_all_classes(const std::vector<int>& labels, int num_classes, const std::string& what) {
  std::vector<int> count(num_classes, 0);
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw ArgumentError(what + ": label " + std::to_string(y) + " out of range");
    ++count[y];
  }
  for (int k = 0; k < num_classes; ++k)
    if (count[k] == 0) throw TrainingError(what + ": class " + std::to_string(k) + " has no examples");
}

nlohmann::json mlp_json(const nn::Mlp<double>& net) {
  std::vector<int> hidden;
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) hidden.push_back(net.layers[k].out());
  return {{"in", net.in()}, {"hidden", hidden}, {"out", net.out()}};
}

void restore_mlp(nn::Mlp<double>& net, FeatureScaler& scaler, const WeightFile& file) {
  WeightFile params_only;
  for (const auto& b : file.blocks)
    if (b.name.rfind("scaler.", 0) != 0) params_only.blocks.push_back(b);
  auto p = net.params("net");
  restore(p, params_only);
  scaler.mean = file.block("scaler.mean");
  scaler.scale = file.block("scaler.scale");
  if (scaler.mean.size() != net.in() || scaler.scale.size() != net.in())
    throw FingerprintError("scaler blocks do not match the network input");
}

}  // namespace

Eigen::MatrixXd Classifier::scores(const Eigen::MatrixXd& features) const {
  return nn::mlp_forward<double>(net, scaler.apply(features));
}

std::vector<int> Classifier::predict(const Eigen::MatrixXd& features) const {
  const Eigen::MatrixXd s = scores(features);
  std::vector<int> out(s.cols());
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    if (binary_deep(*this)) {
      out[j] = s(0, j) > 0.0 ? 1 : 0;
    } else {
      Eigen::Index best = 0;
      s.col(j).maxCoeff(&best);
      out[j] = static_cast<int>(best);
    }
  }
  return out;
}

Eigen::RowVectorXd Classifier::probability(const Eigen::MatrixXd& features) const {
  if (!binary_deep(*this)) throw StateError("probability needs a deep binary classifier");
  const Eigen::MatrixXd s = scores(features);
  return s.row(0).unaryExpr([](double z) { return std::clamp(nn::sigmoid(z), nn::kProbClamp, 1.0 - nn::kProbClamp); });
}

std::string Classifier::fingerprint() const {
  return "classifier/" + std::string(to_string(kind)) + "/k" + std::to_string(num_classes) + "/" + net.fingerprint();
}

ClassificationMetrics classification_metrics(const std::vector<int>& truth, const std::vector<int>& predicted,
                                             int num_classes) {
  if (truth.size() != predicted.size()) throw ShapeError("metrics: truth and prediction lengths differ");
  ClassificationMetrics m;
  m.num_classes = num_classes;
  m.n = static_cast<int>(truth.size());
  m.counts = Eigen::MatrixXi::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 || predicted[i] >= num_classes)
      throw ArgumentError("metrics: label out of range");
    ++m.counts(truth[i], predicted[i]);
  }
  m.confusion = Eigen::MatrixXd::Zero(num_classes, num_classes);
  int correct = 0, present = 0, majority = 0;
  double class_acc = 0.0;
  for (int k = 0; k < num_classes; ++k) {
    const int row = m.counts.row(k).sum();
    correct += m.counts(k, k);
    majority = std::max(majority, row);
    if (row == 0) continue;
    m.confusion.row(k) = m.counts.row(k).cast<double>() / row;
    class_acc += m.confusion(k, k);
    ++present;
  }
  if (m.n > 0) {
    m.accuracy = static_cast<double>(correct) / m.n;
    m.majority_rate = static_cast<double>(majority) / m.n;
  }
  if (present > 0) m.average_class_accuracy = class_acc / present;
  return m;
}

Classifier train_classifier(const Eigen::MatrixXd& features, const std::vector<int>& labels, int num_classes,
                            ClassifierKind kind, const ClassifierConfig& config, Rng& rng,
                            std::vector<double>* loss_curve) {
  config.validate();
  if (num_classes < 2) throw ArgumentError("classifier needs at least two classes");
  if (features.cols() != static_cast<Eigen::Index>(labels.size()))
    throw ShapeError("classifier: " + std::to_string(features.cols()) + " samples, " + std::to_string(labels.size()) +
                     " labels");
  require_all_classes(labels, num_classes, "classifier");
  Classifier c;
  c.kind = kind;
  c.num_classes = num_classes;
  c.scaler = FeatureScaler::fit(features);
  const Eigen::MatrixXd x = c.scaler.apply(features);
  const int in = static_cast<int>(features.rows());
  double l2 = 0.0;
  BatchLoss loss;
  if (kind == ClassifierKind::linear_hinge) {
    c.net = nn::Mlp<double>(in, {}, num_classes, nn::Activation::relu, nn::Activation::identity);
    l2 = config.l2;
    loss = [&](const TensorD& out, const std::vector<int>& idx) {
      std::vector<int> y(idx.size());
      for (std::size_t j = 0; j < idx.size(); ++j) y[j] = labels[idx[j]];
      return nn::loss_hinge_ovr(out, y);
    };
  } else {
    const int out = num_classes == 2 ? 1 : num_classes;
    c.net = nn::Mlp<double>(in, config.hidden, out, nn::Activation::relu, nn::Activation::identity);
    loss = [&](const TensorD& o, const std::vector<int>& idx) {
      std::vector<int> y(idx.size());
      for (std::size_t j = 0; j < idx.size(); ++j) y[j] = labels[idx[j]];
      return num_classes == 2 ? nn::loss_bce(o, y) : nn::loss_softmax_ce(o, y);
    };
  }
  c.net.init(rng);
  auto curve = fit(c.net, x, config.learning_rate, config.epochs, config.batch_size, l2, loss, rng);
  if (loss_curve) *loss_curve = std::move(curve);
  return c;
}

Classifier train_stability(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                           const ClassifierConfig& config, Rng& rng, std::vector<double>* loss_curve) {
  return train_classifier(features, labels, 2, ClassifierKind::deep, config, rng, loss_curve);
}

SplitIndices stratified_split(const std::vector<int>& labels, int num_classes, double train_fraction, Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ArgumentError("train_fraction must lie in (0, 1)");
  std::vector<std::vector<int>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw ArgumentError("label out of range");
    by_class[labels[i]].push_back(static_cast<int>(i));
  }
  SplitIndices s;
  for (int k = 0; k < num_classes; ++k) {
    auto& v = by_class[k];
    std::shuffle(v.begin(), v.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * v.size()));
    if (n_train == 0) throw StratificationError("class " + std::to_string(k) + " has no training examples");
    s.train.insert(s.train.end(), v.begin(), v.begin() + n_train);
    s.test.insert(s.test.end(), v.begin() + n_train, v.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

namespace {

Eigen::MatrixXd take_columns(const Eigen::MatrixXd& x, const std::vector<int>& idx) {
  Eigen::MatrixXd out(x.rows(), idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(j) = x.col(idx[j]);
  return out;
}

std::vector<int> take(const std::vector<int>& v, const std::vector<int>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) out[j] = v[idx[j]];
  return out;
}

}  // namespace

MaterialResult train_material(const Eigen::MatrixXd& features, const std::vector<int>& labels, int num_classes,
                              ClassifierKind kind, const ClassifierConfig& config, Rng& rng, double train_fraction) {
  const SplitIndices split = stratified_split(labels, num_classes, train_fraction, rng);
  const auto y_train = take(labels, split.train);
  MaterialResult r{train_classifier(take_columns(features, split.train), y_train, num_classes, kind, config, rng), {}};
  const auto y_test = take(labels, split.test);
  r.metrics = classification_metrics(y_test, r.classifier.predict(take_columns(features, split.test)), num_classes);
  return r;
}

Eigen::MatrixXd RegraspPolicy::logits(const Eigen::MatrixXd& features) const {
  return nn::mlp_forward<double>(net, scaler.apply(features));
}

std::string RegraspPolicy::fingerprint() const { return "policy/" + net.fingerprint(); }

RegraspPolicy train_policy(const Eigen::MatrixXd& features, const std::vector<PolicyExample>& examples,
                           const PolicyConfig& config, const ActionBins& bins, Rng& rng,
                           std::vector<double>* loss_curve) {
  config.validate();
  bins.validate();
  if (features.cols() != static_cast<Eigen::Index>(examples.size()))
    throw ShapeError("policy: " + std::to_string(features.cols()) + " samples, " + std::to_string(examples.size()) +
                     " examples");
  if (examples.empty()) throw TrainingError("policy needs at least one example");
  RegraspPolicy p;
  p.bins = bins;
  p.scaler = FeatureScaler::fit(features);
  const Eigen::MatrixXd x = p.scaler.apply(features);
  p.net = nn::Mlp<double>(static_cast<int>(features.rows()), config.hidden, nn::kRegraspLogits, nn::Activation::relu,
                          nn::Activation::identity);
  p.net.init(rng);
  const BatchLoss loss = [&](const TensorD& out, const std::vector<int>& idx) {
    std::vector<ExecutedBins> executed(idx.size());
    std::vector<int> y(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      executed[j] = examples[idx[j]].executed;
      y[j] = examples[idx[j]].label;
    }
    return nn::loss_regrasp(out, executed, y);
  };
  auto curve = fit(p.net, x, config.learning_rate, config.epochs, config.batch_size, 0.0, loss, rng);
  if (loss_curve) *loss_curve = std::move(curve);
  return p;
}

ExecutedBins select_bins(const Eigen::VectorXd& logits) {
  if (logits.size() != nn::kRegraspLogits) throw ShapeError("select_bins expects 20 logits");
  ExecutedBins out{};
  for (int k = 0; k < kRegraspDims; ++k) {
    int best = 0;
    for (int j = 1; j < kBinsPerDim; ++j)
      if (logits[k * kBinsPerDim + j] > logits[k * kBinsPerDim + best]) best = j;
    out[k] = best;
  }
  return out;
}

RegraspDelta select_regrasp(const RegraspPolicy& policy, const Eigen::VectorXd& features) {
  return policy.bins.decode(select_bins(policy.logits(features).col(0)));
}

WeightFile to_weight_file(Classifier& c, const std::string& provenance_json) {
  nlohmann::json meta;
  meta["kind"] = std::string(to_string(c.kind));
  meta["num_classes"] = c.num_classes;
  meta["net"] = mlp_json(c.net);
  meta["provenance"] = nlohmann::json::parse(provenance_json);
  WeightFile f = capture(c.net.params("net"), c.fingerprint(), meta.dump());
  f.blocks.push_back({"scaler.mean", c.scaler.mean});
  f.blocks.push_back({"scaler.scale", c.scaler.scale});
  return f;
}

Classifier classifier_from_weight_file(const WeightFile& file) {
  Classifier c;
  try {
    const auto meta = nlohmann::json::parse(file.metadata);
    c.kind = classifier_kind_from_string(meta.at("kind").get<std::string>());
    c.num_classes = meta.at("num_classes");
    const auto& n = meta.at("net");
    c.net = nn::Mlp<double>(n.at("in"), n.at("hidden").get<std::vector<int>>(), n.at("out"), nn::Activation::relu,
                            nn::Activation::identity);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("classifier metadata: ") + e.what());
  }
  if (c.fingerprint() != file.fingerprint)
    throw FingerprintError("classifier fingerprint '" + file.fingerprint + "' disagrees with its metadata");
  restore_mlp(c.net, c.scaler, file);
  return c;
}

WeightFile to_weight_file(RegraspPolicy& p, const std::string& provenance_json) {
  nlohmann::json meta;
  meta["net"] = mlp_json(p.net);
  meta["bins"] = {{"lo", p.bins.lo}, {"hi", p.bins.hi}};
  meta["provenance"] = nlohmann::json::parse(provenance_json);
  WeightFile f = capture(p.net.params("net"), p.fingerprint(), meta.dump());
  f.blocks.push_back({"scaler.mean", p.scaler.mean});
  f.blocks.push_back({"scaler.scale", p.scaler.scale});
  return f;
}

RegraspPolicy policy_from_weight_file(const WeightFile& file) {
  RegraspPolicy p;
  try {
    const auto meta = nlohmann::json::parse(file.metadata);
    const auto& n = meta.at("net");
    p.net = nn::Mlp<double>(n.at("in"), n.at("hidden").get<std::vector<int>>(), n.at("out"), nn::Activation::relu,
                            nn::Activation::identity);
    p.bins.lo = meta.at("bins").at("lo").get<std::array<double, kRegraspDims>>();
    p.bins.hi = meta.at("bins").at("hi").get<std::array<double, kRegraspDims>>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("policy metadata: ") + e.what());
  }
  if (p.fingerprint() != file.fingerprint)
    throw FingerprintError("policy fingerprint '" + file.fingerprint + "' disagrees with its metadata");
  restore_mlp(p.net, p.scaler, file);
  return p;
}

}  // namespace hg
