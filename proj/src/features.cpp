#include "haptigrasp/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "haptigrasp/error.hpp"
#include "haptigrasp/nn/adam.hpp"
#include "haptigrasp/nn/loss.hpp"

namespace hg {

using nn::Tensor;
using TensorD = Tensor<double>;

void EncoderConfig::validate() const {
  if (latent_dim < 1 || lstm_hidden < 1) throw ValidationError("encoder sizes must be positive");
  if (latent_dim > lstm_hidden) throw ValidationError("latent_dim must not exceed lstm_hidden");
  if (!(window_s > 0.0) || !(training_rate_hz > 0.0)) throw ValidationError("window_s and training_rate_hz must be positive");
  const double steps = window_s * training_rate_hz;
  if (std::abs(steps - std::round(steps)) > 1e-9) throw ValidationError("window_s * training_rate_hz must be an integer");
  if (window_after_close_s < 0.0 || window_after_close_s > window_s)
    throw ValidationError("window_after_close_s must lie in [0, window_s]");
  if (learning_rate < 0.0) throw ValidationError("encoder learning_rate must be non-negative");
  if (epochs < 0 || batch_size < 1) throw ValidationError("encoder epochs >= 0 and batch_size >= 1 required");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ValidationError("validation_fraction must lie in (0, 1)");
  if (!(clip_norm > 0.0)) throw ValidationError("clip_norm must be positive");
  if (min_episodes < 2 || max_episodes < min_episodes) throw ValidationError("need 2 <= min_episodes <= max_episodes");
}

int EncoderConfig::window_steps() const { return static_cast<int>(std::lround(window_s * training_rate_hz)); }

std::string EncoderConfig::fingerprint() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "in%d-lstm%d-z%d-steps%d-rate%g-after%g", kInputDim, lstm_hidden, latent_dim,
                window_steps(), training_rate_hz, window_after_close_s);
  return buf;
}

InputSequence raw_input(const HapticEpisode& ep, const EncoderConfig& config, double f_max) {
  const int n = ep.length();
  if (n == 0) throw ArgumentError("empty haptic episode");
  const double ratio = ep.rate_hz / config.training_rate_hz;
  const long k = std::lround(ratio);
  if (k < 1 || std::abs(ratio - k) > 1e-9)
    throw ValidationError("episode rate must be an integer multiple of training_rate_hz");
  const int steps = config.window_steps();
  const long end = ep.close_event_index + std::lround(config.window_after_close_s * ep.rate_hz);
  const long start = end - steps * k;
  InputSequence seq = InputSequence::Zero(steps, kInputDim);
  for (int s = 0; s < steps; ++s) {
    double f = 0.0;
    for (long j = 0; j < k; ++j) {
      const long idx = std::clamp<long>(start + s * k + j, 0, n - 1);
      seq.row(s).head<kForceChannels>() += ep.frames.row(idx);
      f += ep.f_trace[idx];
    }
    seq.row(s).head<kForceChannels>() /= static_cast<double>(k);
    seq(s, kForceChannels) = f / k / f_max;
    seq(s, kForceChannels + 1 + static_cast<int>(ep.mode)) = 1.0;
  }
  return seq;
}

Standardizer Standardizer::fit(const std::vector<InputSequence>& train) {
  Standardizer st;
  long rows = 0;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kForceChannels);
  for (const auto& s : train) {
    sum += s.leftCols<kForceChannels>().colwise().sum().transpose();
    rows += s.rows();
  }
  if (rows == 0) throw ArgumentError("standardizer needs at least one frame");
  st.mean = sum / static_cast<double>(rows);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(kForceChannels);
  for (const auto& s : train)
    sq += (s.leftCols<kForceChannels>().rowwise() - st.mean.transpose()).array().square().colwise().sum().matrix().transpose();
  st.scale = (sq / static_cast<double>(rows)).cwiseSqrt();
  for (int c = 0; c < kForceChannels; ++c)
    if (!(st.scale[c] > 1e-12)) st.scale[c] = 1.0;
  return st;
}

InputSequence Standardizer::apply(const InputSequence& raw) const {
  InputSequence out = raw;
  out.leftCols<kForceChannels>() =
      ((raw.leftCols<kForceChannels>().rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array())
          .matrix();
  return out;
}

Eigen::RowVectorXd Standardizer::apply_forces(const Eigen::RowVectorXd& forces) const {
  return ((forces - mean.transpose()).array() / scale.transpose().array()).matrix();
}

FeatureScaler FeatureScaler::fit(const Eigen::MatrixXd& x) {
  if (x.cols() == 0) throw ArgumentError("feature scaler needs at least one sample");
  FeatureScaler s;
  s.mean = x.rowwise().mean();
  s.scale = ((x.colwise() - s.mean).array().square().rowwise().mean()).sqrt().matrix();
  for (Eigen::Index i = 0; i < s.scale.size(); ++i)
    if (!(s.scale[i] > 1e-12)) s.scale[i] = 1.0;
  return s;
}

Eigen::MatrixXd FeatureScaler::apply(const Eigen::MatrixXd& x) const {
  if (x.rows() != mean.size()) throw ShapeError("feature scaler fitted on " + std::to_string(mean.size()) + " dims, got " + std::to_string(x.rows()));
  return ((x.colwise() - mean).array().colwise() / scale.array()).matrix();
}

Autoencoder::Autoencoder(const EncoderConfig& c)
    : config(c),
      encoder(kInputDim, c.lstm_hidden),
      to_latent(c.lstm_hidden, c.latent_dim, nn::Activation::tanh),
      decoder(c.latent_dim + kControlDim, c.lstm_hidden),
      to_forces(c.lstm_hidden, kForceChannels, nn::Activation::identity) {
  c.validate();
}

void Autoencoder::init(Rng& rng) {
  encoder.init(rng);
  to_latent.init(rng);
  decoder.init(rng);
  to_forces.init(rng);
}

nn::ParamList<double> Autoencoder::params() {
  nn::ParamList<double> p;
  for (auto&& part : {encoder.params("encoder"), to_latent.params("latent"), decoder.params("decoder"),
                      to_forces.params("reconstruction")})
    p.insert(p.end(), part.begin(), part.end());
  return p;
}

namespace {

struct Batch {
  std::vector<TensorD> xs;        // steps of 16 x B
  std::vector<TensorD> controls;  // steps of 4 x B
  TensorD targets;                // 12 x (steps * B), column t * B + b
};

Batch make_batch(const std::vector<InputSequence>& seqs, const std::vector<int>& idx, std::size_t from,
                 std::size_t to) {
  const auto B = static_cast<Eigen::Index>(to - from);
  const int T = static_cast<int>(seqs[idx[from]].rows());
  Batch b;
  b.xs.assign(T, TensorD(kInputDim, B));
  b.controls.assign(T, TensorD(kControlDim, B));
  b.targets.resize(kForceChannels, T * B);
  for (Eigen::Index j = 0; j < B; ++j) {
    const InputSequence& s = seqs[idx[from + j]];
    if (s.rows() != T) throw ShapeError("autoencoder batch mixes sequence lengths");
    for (int t = 0; t < T; ++t) {
      b.xs[t].col(j) = s.row(t).transpose();
      b.controls[t].col(j) = s.row(t).tail<kControlDim>().transpose();
      b.targets.col(t * B + j) = s.row(t).head<kForceChannels>().transpose();
    }
  }
  return b;
}

struct Forward {
  nn::LstmSequenceCache<double> enc;
  nn::DenseCache<double> latent;
  nn::LstmSequenceCache<double> dec;
  TensorD dec_hidden;  // hidden x (steps * B)
  nn::DenseCache<double> out;
};

Forward forward(const Autoencoder& m, const Batch& b) {
  Forward f;
  f.enc = nn::lstm_forward(m.encoder, b.xs);
  f.latent = nn::dense_forward_cached(m.to_latent, f.enc.back().h);
  const int T = static_cast<int>(b.xs.size());
  const Eigen::Index B = b.xs.front().cols();
  const int z = m.config.latent_dim;
  std::vector<TensorD> dec_in(T, TensorD(z + kControlDim, B));
  for (int t = 0; t < T; ++t) {
    dec_in[t].topRows(z) = f.latent.y;
    dec_in[t].bottomRows(kControlDim) = b.controls[t];
  }
  f.dec = nn::lstm_forward(m.decoder, dec_in);
  f.dec_hidden.resize(m.config.lstm_hidden, T * B);
  for (int t = 0; t < T; ++t) f.dec_hidden.middleCols(t * B, B) = f.dec[t].h;
  f.out = nn::dense_forward_cached(m.to_forces, f.dec_hidden);
  return f;
}

nn::GradList<double> backward(const Autoencoder& m, const Batch& b, const Forward& f, const TensorD& d_out) {
  const int T = static_cast<int>(b.xs.size());
  const Eigen::Index B = b.xs.front().cols();
  const int z = m.config.latent_dim;
  auto g_out = nn::dense_backward(m.to_forces, f.dec_hidden, f.out, d_out);
  std::vector<TensorD> dhs(T);
  for (int t = 0; t < T; ++t) dhs[t] = g_out.dx.middleCols(t * B, B);
  auto g_dec = nn::lstm_backward(m.decoder, f.dec, dhs, TensorD());
  TensorD d_latent = TensorD::Zero(z, B);
  for (int t = 0; t < T; ++t) d_latent += g_dec.dxs[t].topRows(z);
  auto g_lat = nn::dense_backward(m.to_latent, f.enc.back().h, f.latent, d_latent);
  auto g_enc = nn::lstm_backward(m.encoder, f.enc, {}, g_lat.dx);
  return {std::move(g_enc.dW), std::move(g_enc.db), std::move(g_lat.dW), std::move(g_lat.db),
          std::move(g_dec.dW), std::move(g_dec.db), std::move(g_out.dW), std::move(g_out.db)};
}

// Sum of squared errors and element count over `seqs`, evaluated in batches.
std::pair<double, double> sse(const Autoencoder& m, const std::vector<InputSequence>& seqs) {
  std::vector<int> idx(seqs.size());
  std::iota(idx.begin(), idx.end(), 0);
  double total = 0.0, count = 0.0;
  const auto bs = static_cast<std::size_t>(std::max(m.config.batch_size, 64));
  for (std::size_t from = 0; from < idx.size(); from += bs) {
    const Batch b = make_batch(seqs, idx, from, std::min(idx.size(), from + bs));
    const Forward f = forward(m, b);
    total += (f.out.y - b.targets).squaredNorm();
    count += static_cast<double>(b.targets.size());
  }
  return {total, count};
}

double constant_baseline(const std::vector<InputSequence>& seqs, const Eigen::VectorXd& channel_mean) {
  double total = 0.0, count = 0.0;
  for (const auto& s : seqs) {
    total += (s.leftCols<kForceChannels>().rowwise() - channel_mean.transpose()).squaredNorm();
    count += static_cast<double>(s.rows()) * kForceChannels;
  }
  return total / count;
}

}  // namespace

AutoencoderGradients autoencoder_gradients(const Autoencoder& model, const std::vector<InputSequence>& standardized) {
  if (standardized.empty()) throw ArgumentError("autoencoder gradients of an empty batch");
  std::vector<int> idx(standardized.size());
  std::iota(idx.begin(), idx.end(), 0);
  const Batch b = make_batch(standardized, idx, 0, idx.size());
  const Forward f = forward(model, b);
  const auto loss = nn::loss_l2(f.out.y, b.targets);
  return {loss.value, backward(model, b, f, loss.grad)};
}

double reconstruction_loss(const Autoencoder& model, const std::vector<InputSequence>& standardized) {
  if (standardized.empty()) throw ArgumentError("reconstruction loss of an empty set");
  const auto [total, count] = sse(model, standardized);
  return total / count;
}

AutoencoderResult train_autoencoder(const std::vector<InputSequence>& inputs, const EncoderConfig& config, Rng& rng) {
  config.validate();
  if (static_cast<int>(inputs.size()) < config.min_episodes)
    throw TrainingError("autoencoder needs at least " + std::to_string(config.min_episodes) + " episodes, got " +
                        std::to_string(inputs.size()));
  std::vector<int> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min<std::size_t>(order.size(), config.max_episodes));
  const auto n_val = std::max<std::size_t>(1, std::lround(config.validation_fraction * order.size()));
  std::vector<InputSequence> train, val;
  for (std::size_t i = 0; i < order.size(); ++i) (i < order.size() - n_val ? train : val).push_back(inputs[order[i]]);

  AutoencoderResult r;
  r.model = Autoencoder(config);
  r.model.standardizer = Standardizer::fit(train);
  for (auto& s : train) s = r.model.standardizer.apply(s);
  for (auto& s : val) s = r.model.standardizer.apply(s);
  r.model.init(rng);
  r.curve.train_episodes = static_cast<int>(train.size());
  r.curve.validation_episodes = static_cast<int>(val.size());
  Eigen::VectorXd train_mean = Eigen::VectorXd::Zero(kForceChannels);
  for (const auto& s : train) train_mean += s.leftCols<kForceChannels>().colwise().sum().transpose();
  train_mean /= static_cast<double>(train.size() * train.front().rows());
  r.curve.baseline_train = constant_baseline(train, train_mean);
  r.curve.baseline_validation = constant_baseline(val, train_mean);

  auto params = r.model.params();
  nn::AdamState<double> adam(params, config.learning_rate);
  const auto record = [&]() {
    const double tl = reconstruction_loss(r.model, train);
    const double vl = reconstruction_loss(r.model, val);
    if (!std::isfinite(tl) || !std::isfinite(vl)) throw TrainingError("autoencoder loss diverged");
    r.curve.train_loss.push_back(tl);
    r.curve.validation_loss.push_back(vl);
  };
  record();
  std::vector<int> idx(train.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t from = 0; from < idx.size(); from += config.batch_size) {
      const Batch b = make_batch(train, idx, from, std::min(idx.size(), from + config.batch_size));
      const Forward f = forward(r.model, b);
      const auto loss = nn::loss_l2(f.out.y, b.targets);
      if (!std::isfinite(loss.value)) throw TrainingError("autoencoder loss diverged in epoch " + std::to_string(epoch));
      auto grads = backward(r.model, b, f, loss.grad);
      nn::clip_global_norm(grads, config.clip_norm);
      adam.step(params, grads);
    }
    record();
  }
  return r;
}

Eigen::MatrixXd encode_batch(const Autoencoder& model, const std::vector<InputSequence>& raw) {
  Eigen::MatrixXd out(model.config.latent_dim, raw.size());
  const std::size_t bs = 256;
  std::vector<InputSequence> chunk;
  for (std::size_t from = 0; from < raw.size(); from += bs) {
    const std::size_t to = std::min(raw.size(), from + bs);
    chunk.clear();
    for (std::size_t i = from; i < to; ++i) chunk.push_back(model.standardizer.apply(raw[i]));
    std::vector<int> idx(chunk.size());
    std::iota(idx.begin(), idx.end(), 0);
    const Batch b = make_batch(chunk, idx, 0, chunk.size());
    const auto enc = nn::lstm_forward(model.encoder, b.xs);
    out.middleCols(from, to - from) = nn::dense_forward(model.to_latent, enc.back().h);
  }
  return out;
}

Eigen::VectorXd encode(const Autoencoder& model, const HapticEpisode& episode, const EncoderConfig& config,
                       double f_max) {
  if (config.fingerprint() != model.config.fingerprint())
    throw FingerprintError("encoder trained as '" + model.config.fingerprint() + "', requested '" +
                           config.fingerprint() + "'");
  return encode_batch(model, {raw_input(episode, config, f_max)}).col(0);
}

Eigen::VectorXd handcrafted_features(const HapticEpisode& ep) {
  if (ep.length() == 0) throw ArgumentError("empty haptic episode");
  Eigen::VectorXd v(kHandcraftedDim);
  const int idx[3] = {0, std::clamp(ep.close_event_index, 0, ep.length() - 1), ep.length() - 1};
  for (int k = 0; k < 3; ++k) v.segment<kForceChannels>(k * kForceChannels) = ep.frames.row(idx[k]).transpose();
  return v;
}

namespace {

nlohmann::json config_json(const EncoderConfig& c) {
  return {{"latent_dim", c.latent_dim},       {"lstm_hidden", c.lstm_hidden},
          {"window_s", c.window_s},           {"training_rate_hz", c.training_rate_hz},
          {"window_after_close_s", c.window_after_close_s}, {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},               {"batch_size", c.batch_size},
          {"validation_fraction", c.validation_fraction}, {"clip_norm", c.clip_norm},
          {"min_episodes", c.min_episodes},   {"max_episodes", c.max_episodes}};
}

}  // namespace

WeightFile to_weight_file(Autoencoder& model, const std::string& provenance_json) {
  nlohmann::json meta;
  meta["encoder"] = config_json(model.config);
  meta["provenance"] = nlohmann::json::parse(provenance_json);
  WeightFile f = capture(model.params(), "autoencoder/" + model.config.fingerprint(), meta.dump());
  f.blocks.push_back({"standardizer.mean", model.standardizer.mean});
  f.blocks.push_back({"standardizer.scale", model.standardizer.scale});
  return f;
}

Autoencoder autoencoder_from_weight_file(const WeightFile& file) {
  EncoderConfig c;
  try {
    const auto j = nlohmann::json::parse(file.metadata).at("encoder");
    c.latent_dim = j.at("latent_dim");
    c.lstm_hidden = j.at("lstm_hidden");
    c.window_s = j.at("window_s");
    c.training_rate_hz = j.at("training_rate_hz");
    c.window_after_close_s = j.at("window_after_close_s");
    c.learning_rate = j.at("learning_rate");
    c.epochs = j.at("epochs");
    c.batch_size = j.at("batch_size");
    c.validation_fraction = j.at("validation_fraction");
    c.clip_norm = j.at("clip_norm");
    c.min_episodes = j.at("min_episodes");
    c.max_episodes = j.at("max_episodes");
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("autoencoder metadata: ") + e.what());
  }
  if (file.fingerprint != "autoencoder/" + c.fingerprint())
    throw FingerprintError("autoencoder fingerprint '" + file.fingerprint + "' disagrees with its metadata");
  Autoencoder m(c);
  WeightFile params_only;
  for (const auto& b : file.blocks)
    if (b.name.rfind("standardizer.", 0) != 0) params_only.blocks.push_back(b);
  auto p = m.params();
  restore(p, params_only);
  m.standardizer.mean = file.block("standardizer.mean");
  m.standardizer.scale = file.block("standardizer.scale");
  if (m.standardizer.mean.size() != kForceChannels || m.standardizer.scale.size() != kForceChannels)
    throw FingerprintError("standardizer blocks have the wrong size");
  return m;
}

void write_latents_tsv(const std::string& path, const std::vector<std::string>& ids, const Eigen::MatrixXd& latents) {
  if (static_cast<Eigen::Index>(ids.size()) != latents.cols())
    throw ShapeError("latent export: " + std::to_string(ids.size()) + " ids for " + std::to_string(latents.cols()) +
                     " vectors");
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  char buf[32];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i];
    for (Eigen::Index k = 0; k < latents.rows(); ++k) {
      std::snprintf(buf, sizeof buf, "\t%.17g", latents(k, static_cast<Eigen::Index>(i)));
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace hg
