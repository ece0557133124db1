#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "motive/motion_data.hpp"

namespace motive {

struct TokenizerShape {
  int codebook_size = 512;  // N, number of discrete motion tokens
  int latent_dim = 128;     // d
  int window = 4;           // frames folded into one token
  int frame_dim = 6;        // D, channels per frame
};

struct VqForward {
  Eigen::MatrixXd latents;    // windows x d, encoder output
  std::vector<int> indices;   // nearest code per window
  Eigen::MatrixXd quantized;  // windows x d, selected codebook rows
  Eigen::MatrixXd decoded;    // T x D, trimmed to the input frame count
};

struct VqLoss {
  double total = 0, reconstruct = 0, commit = 0, embed = 0;
};

struct VqLossWeights {
  double commit_beta = 0.25;
  double velocity_weight = 1.0;
  double smooth_l1_beta = 1.0;
};

/// Parameter gradients for the reconstruction + commitment objective. The
/// quantization step is bridged straight-through: the decoder input gradient
/// is handed to the encoder unchanged. Codebook rows learn by EMA, not here.
struct TokenizerGrads {
  Eigen::MatrixXd encoder_w, decoder_w;
  Eigen::VectorXd encoder_b, decoder_b;
  VqLoss loss;
  // Forward-pass byproducts the EMA codebook update needs.
  Eigen::MatrixXd latents;
  std::vector<int> indices;
};

/// Strided affine encoder, nearest-neighbor codebook, affine decoder.
/// Frame windows of `window` frames map to one latent; a trailing partial
/// window is padded by repeating the final frame. Parameters are held in
/// double precision; checkpoints store f32.
class MotionTokenizer {
 public:
  MotionTokenizer(TokenizerShape shape, uint64_t seed);

  const TokenizerShape& shape() const { return shape_; }

  /// Index of the codebook row minimizing squared distance; exact distance
  /// ties resolve to the lowest index.
  int quantize(const Eigen::VectorXd& latent) const;

  /// One latent per (padded) window.
  Eigen::MatrixXd encode_windows(const MotionSequence& seq) const;

  std::vector<int> tokenize(const MotionSequence& seq) const;

  /// Rejects empty token lists and ids outside [0, N). Output has
  /// tokens.size() * window frames.
  MotionSequence decode(std::span<const int> tokens, float fps = 30.f) const;

  /// decode(tokenize(seq)) trimmed back to the input frame count.
  MotionSequence reconstruct(const MotionSequence& seq) const;

  VqForward forward(const MotionSequence& seq) const;
  VqLoss loss(const MotionSequence& seq, const VqLossWeights& weights = {}) const;

  TokenizerGrads compute_gradients(const MotionSequence& seq,
                                   const VqLossWeights& weights = {}) const;

  /// Differentiable stand-in for the quantized objective: the decoder reads
  /// E(x) + (frozen_quantized - frozen_latents) and the commitment term pulls
  /// E(x) toward frozen_quantized, both captured at a fixed point. Its exact
  /// gradient at that point equals compute_gradients, which makes the
  /// straight-through estimator checkable by finite differences.
  double surrogate_loss(const MotionSequence& seq, const Eigen::MatrixXd& frozen_latents,
                        const Eigen::MatrixXd& frozen_quantized,
                        const VqLossWeights& weights = {}) const;

  void save(const std::filesystem::path& path) const;
  static MotionTokenizer load(const std::filesystem::path& path);

  // Mutable access for the trainer and for gradient checks.
  Eigen::MatrixXd& encoder_w() { return encoder_w_; }
  Eigen::VectorXd& encoder_b() { return encoder_b_; }
  Eigen::MatrixXd& decoder_w() { return decoder_w_; }
  Eigen::VectorXd& decoder_b() { return decoder_b_; }
  Eigen::MatrixXd& codebook() { return codebook_; }
  const Eigen::MatrixXd& encoder_w() const { return encoder_w_; }
  const Eigen::VectorXd& encoder_b() const { return encoder_b_; }
  const Eigen::MatrixXd& decoder_w() const { return decoder_w_; }
  const Eigen::VectorXd& decoder_b() const { return decoder_b_; }
  const Eigen::MatrixXd& codebook() const { return codebook_; }

  /// EMA accumulators, exposed so training can resume from a checkpointed
  /// tokenizer without a cold restart of the cluster statistics.
  Eigen::VectorXd& ema_cluster_size() { return ema_cluster_size_; }
  Eigen::MatrixXd& ema_embed_sum() { return ema_embed_sum_; }

 private:
  TokenizerShape shape_;
  Eigen::MatrixXd encoder_w_;  // d x (window * D)
  Eigen::VectorXd encoder_b_;  // d
  Eigen::MatrixXd decoder_w_;  // (window * D) x d
  Eigen::VectorXd decoder_b_;  // window * D
  Eigen::MatrixXd codebook_;   // N x d
  Eigen::VectorXd ema_cluster_size_;
  Eigen::MatrixXd ema_embed_sum_;

  Eigen::MatrixXd window_matrix(const MotionSequence& seq) const;
  Eigen::MatrixXd decode_latents(const Eigen::MatrixXd& latents, int frame_count) const;
};

inline constexpr char kMtokMagic[4] = {'M', 'T', 'O', 'K'};
inline constexpr uint8_t kMtokVersion = 1;

struct TokenizerTrainConfig {
  double lr = 1e-3;
  int epochs = 10;
  double ema_decay = 0.99;
  VqLossWeights weights;
  uint64_t seed = 0;
  /// Seed codebook rows from encoder outputs over the corpus before the
  /// first epoch, so every cluster starts inside the data support.
  bool init_codebook_from_data = true;
};

struct TokenizerTrainReport {
  std::vector<VqLoss> trace;  // one entry per epoch, mean over the corpus
};

/// SGD on encoder/decoder with straight-through gradients plus EMA codebook
/// updates, one sequence at a time in a seeded shuffled order. lr == 0 turns
/// the call into a pure evaluation: parameters, codebook and EMA state stay
/// untouched and the trace is flat.
TokenizerTrainReport train_tokenizer(MotionTokenizer& tok,
                                     std::span<const MotionSequence> corpus,
                                     const TokenizerTrainConfig& config);

}  // namespace motive
