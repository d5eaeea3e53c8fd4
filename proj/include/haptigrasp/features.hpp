#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "haptigrasp/haptics.hpp"
#include "haptigrasp/nn/dense.hpp"
#include "haptigrasp/nn/lstm.hpp"
#include "haptigrasp/weights.hpp"

namespace hg {

inline constexpr int kControlDim = 1 + kNumModes;           // f_t, one-hot mode
inline constexpr int kInputDim = kForceChannels + kControlDim;  // 16
inline constexpr int kHandcraftedDim = 3 * kForceChannels;  // 36

struct EncoderConfig {
  int latent_dim = 64;
  int lstm_hidden = 128;
  double window_s = 3.0;
  double training_rate_hz = 25.0;
  double window_after_close_s = 0.5;  // window ends this long after the stall
  double learning_rate = 1e-5;
  int epochs = 20;
  int batch_size = 32;
  double validation_fraction = 0.2;
  double clip_norm = 5.0;
  int min_episodes = 500;
  int max_episodes = 2000;

  void validate() const;
  int window_steps() const;
  /// Architecture identity; two configs with equal fingerprints produce
  /// interchangeable weights.
  std::string fingerprint() const;
};

/// One row per resampled step: 12 force channels, f_t / f_max, one-hot mode.
using InputSequence = Eigen::Matrix<double, Eigen::Dynamic, kInputDim, Eigen::RowMajor>;

/// Window ending window_after_close_s past the stall, block-averaged from
/// the episode rate down to training_rate_hz. Missing frames past the end
/// repeat the last frame, frames before the start repeat the first.
InputSequence raw_input(const HapticEpisode& episode, const EncoderConfig& config, double f_max);

/// Per-channel affine map fitted on training windows. Only the force
/// channels are standardized; controls already lie in [0, 1].
struct Standardizer {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(kForceChannels);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(kForceChannels);

  static Standardizer fit(const std::vector<InputSequence>& train);
  InputSequence apply(const InputSequence& raw) const;
  /// Forward map on a row vector of force channels.
  Eigen::RowVectorXd apply_forces(const Eigen::RowVectorXd& forces) const;
};

/// Feature vector reuse of the standardizer for 36-D handcrafted input.
struct FeatureScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static FeatureScaler fit(const Eigen::MatrixXd& columns);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& columns) const;
};

/// Conditional recurrent autoencoder. The encoder LSTM reads the 16-D
/// sequence; H = tanh(W h_T + b). The decoder LSTM reads [H, f_t, mode]
/// at every step and a dense head reconstructs the 12 force channels.
struct Autoencoder {
  EncoderConfig config;
  Standardizer standardizer;
  nn::Lstm<double> encoder;
  nn::Dense<double> to_latent;
  nn::Lstm<double> decoder;
  nn::Dense<double> to_forces;

  Autoencoder() = default;
  explicit Autoencoder(const EncoderConfig& config);
  void init(Rng& rng);
  nn::ParamList<double> params();
};

struct TrainingCurve {
  std::vector<double> train_loss;  // full pass after each epoch, index 0 = before training
  std::vector<double> validation_loss;
  double baseline_train = 0.0;  // constant predictor at the per-channel training mean
  double baseline_validation = 0.0;
  int train_episodes = 0;
  int validation_episodes = 0;
};

struct AutoencoderResult {
  Autoencoder model;
  TrainingCurve curve;
};

/// Splits `inputs` (raw, unstandardized) into train/validation with `rng`,
/// fits the standardizer on train, then runs ADAM on the L2 reconstruction
/// loss with global-norm clipping.
AutoencoderResult train_autoencoder(const std::vector<InputSequence>& inputs, const EncoderConfig& config, Rng& rng);

/// Mean reconstruction loss of standardized sequences.
double reconstruction_loss(const Autoencoder& model, const std::vector<InputSequence>& standardized);

struct AutoencoderGradients {
  double loss = 0.0;
  nn::GradList<double> grads;  // ordered as Autoencoder::params()
};

/// L2 reconstruction loss of one batch of equal-length standardized
/// sequences and its gradient; the quantity each training step descends.
AutoencoderGradients autoencoder_gradients(const Autoencoder& model, const std::vector<InputSequence>& standardized);

/// Single-episode encoding. `config` must match the trained architecture.
Eigen::VectorXd encode(const Autoencoder& model, const HapticEpisode& episode, const EncoderConfig& config,
                       double f_max);

/// Encodes raw input sequences into a latent_dim x n matrix.
Eigen::MatrixXd encode_batch(const Autoencoder& model, const std::vector<InputSequence>& raw);

/// Frames at pre-contact (index 0), stall (close_event_index) and
/// equilibrium (last index), concatenated.
Eigen::VectorXd handcrafted_features(const HapticEpisode& episode);

WeightFile to_weight_file(Autoencoder& model, const std::string& provenance_json);
Autoencoder autoencoder_from_weight_file(const WeightFile& file);

/// Tab-separated rows: episode_id then latent values.
void write_latents_tsv(const std::string& path, const std::vector<std::string>& ids, const Eigen::MatrixXd& latents);

}  // namespace hg
