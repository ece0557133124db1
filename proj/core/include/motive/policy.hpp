#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "motive/error.hpp"
#include "motive/rng.hpp"

namespace motive {

/// Token id layout: [<unk>=0, text words][motion tokens m_0..m_{N-1}]
/// [<think>, </think>, <answer>, </answer>, <bos>, <eos>]. The layout is a
/// pure function of the word list and the motion code count, so saving only
/// those two reproduces the vocabulary exactly.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> words, int motion_codes);

  /// Sorted unique lowercase words across the given texts.
  static Vocabulary build(std::span<const std::string> texts, int motion_codes);

  int size() const { return total_; }
  int unk_id() const { return 0; }
  int text_count() const { return n_text_; }
  int motion_code_count() const { return motion_codes_; }

  int motion_token_id(int code) const;
  /// Inverse of motion_token_id; nullopt for non-motion ids.
  std::optional<int> motion_code(int id) const;

  int think_open_id() const { return n_text_ + motion_codes_ + 0; }
  int think_close_id() const { return n_text_ + motion_codes_ + 1; }
  int answer_open_id() const { return n_text_ + motion_codes_ + 2; }
  int answer_close_id() const { return n_text_ + motion_codes_ + 3; }
  int bos_id() const { return n_text_ + motion_codes_ + 4; }
  int eos_id() const { return n_text_ + motion_codes_ + 5; }

  /// Unknown words map to <unk>.
  int word_id(std::string_view word) const;
  const std::string& token_string(int id) const;

  /// Lowercase word ids for free text; tags never come out of this.
  std::vector<int> encode_text(std::string_view text) const;

  /// Space-joined token strings with <bos>/<eos> dropped, so the result can
  /// be handed straight to the tag parser.
  std::string decode(std::span<const int> ids) const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> strings_;  // one per id
  std::unordered_map<std::string, int> word_ids_;
  int n_text_ = 0;
  int motion_codes_ = 0;
  int total_ = 0;
};

/// <bos> context <think> think </think> <answer> answer </answer> <eos>
std::vector<int> wrap_sequence(const Vocabulary& vocab, std::span<const int> context_ids,
                               std::span<const int> think_ids, std::span<const int> answer_ids);

/// <bos> context <think> ; sampling continues inside the reasoning block.
std::vector<int> wrap_prompt(const Vocabulary& vocab, std::span<const int> context_ids);

struct PolicyShape {
  int features = 4096;  // hashed feature buckets
  int vocab = 0;
  int context = 3;  // longest n-gram context feeding the features
};

struct PolicyGrad {
  Eigen::MatrixXd w;  // vocab x features
  Eigen::VectorXd b;

  explicit PolicyGrad(const PolicyShape& s)
      : w(Eigen::MatrixXd::Zero(s.vocab, s.features)), b(Eigen::VectorXd::Zero(s.vocab)) {}
  void set_zero() {
    w.setZero();
    b.setZero();
  }
  double norm() const { return std::sqrt(w.squaredNorm() + b.squaredNorm()); }
  bool all_finite() const { return w.allFinite() && b.allFinite(); }
};

struct SampleResult {
  std::vector<int> ids;  // prompt followed by the continuation
  std::size_t prompt_len = 0;
  double continuation_logprob = 0;  // at temperature 1 regardless of the sampling temperature
};

/// Linear softmax language model over hashed n-gram context features.
/// Logits(t) = b + sum of W columns for the active features of position t;
/// position 0 has no context, so its logits are the bias alone. Parameters
/// are double precision and gradients are exact, which keeps every training
/// step verifiable by finite differences.
class Policy {
 public:
  Policy(PolicyShape shape, uint64_t seed);

  const PolicyShape& shape() const { return shape_; }

  /// Active feature buckets for predicting position t: one hashed tuple per
  /// context length 1..min(context, t).
  std::vector<int> active_features(std::span<const int> ids, std::size_t t) const;

  Eigen::VectorXd logits_at(std::span<const int> ids, std::size_t t) const;

  /// Sum of log p(ids[t] | ids[<t]) over every position from `from` on.
  double logprob_from(std::span<const int> ids, std::size_t from) const;
  double logprob(std::span<const int> ids) const { return logprob_from(ids, 0); }

  /// Adds coeff * d logprob_from / d theta into grad and returns the
  /// logprob value itself.
  double accumulate_logprob_grad(std::span<const int> ids, std::size_t from, double coeff,
                                 PolicyGrad& grad) const;

  /// Ancestral sampling until <eos> or max_new_tokens. temperature == 0
  /// takes the argmax (lowest id on ties) and ignores the rng.
  SampleResult sample(std::span<const int> prompt, int max_new_tokens, double temperature,
                      Rng& rng) const;

  void apply_update(const PolicyGrad& grad, double scale);

  void save(const std::filesystem::path& path) const;
  static Policy load(const std::filesystem::path& path);

  Eigen::MatrixXd& weights() { return w_; }
  Eigen::VectorXd& bias() { return b_; }
  const Eigen::MatrixXd& weights() const { return w_; }
  const Eigen::VectorXd& bias() const { return b_; }

 private:
  PolicyShape shape_;
  Eigen::MatrixXd w_;  // vocab x features
  Eigen::VectorXd b_;
};

inline constexpr char kMpolMagic[4] = {'M', 'P', 'O', 'L'};
inline constexpr uint8_t kMpolVersion = 1;

struct SftConfig {
  double lr = 1e-5;
  int epochs = 3;
  uint64_t seed = 0;
};

struct SftReport {
  std::vector<double> loss_trace;  // mean per-token negative log likelihood per epoch
};

/// Per-sequence SGD on the mean-per-token NLL, seeded shuffle each epoch.
SftReport train_sft(Policy& policy, std::span<const std::vector<int>> sequences,
                    const SftConfig& config);

}  // namespace motive
