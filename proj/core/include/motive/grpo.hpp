#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "motive/policy.hpp"
#include "motive/rewards.hpp"
#include "motive/tokenizer.hpp"

namespace motive {

/// Turns one sampled id sequence into a scoreable candidate: detokenized
/// text always, plus the decoded motion for generation rollouts.
using RealizeFn = std::function<Candidate(Task, std::span<const int> ids)>;

/// The returned candidate carries the given channel map on decoded motion so
/// physical plausibility has limits to check. Decode failures (no closed
/// answer span, no motion tokens, non-finite frames) leave the motion empty,
/// which the scorer counts as malformed.
RealizeFn make_realizer(const Vocabulary& vocab, const MotionTokenizer* tokenizer, float fps,
                        ChannelMap channel_map);

/// One training or evaluation prompt: the wrapped prompt ids plus everything
/// the reward engine needs to judge completions.
struct PromptCase {
  std::vector<int> prompt_ids;
  ScoringContext ctx;
};

struct GrpoConfig {
  int group_size = 8;
  double lr = 5e-6;
  double beta_kl = 0.05;
  int epochs = 3;
  int max_new_tokens = 64;
  double temperature = 1.0;
  double eps = 1e-8;  // advantage normalization
  uint64_t seed = 0;
};

/// Rollouts with everything but the policy frozen; the objective is then an
/// ordinary differentiable function of the policy parameters.
struct FrozenRollouts {
  std::vector<std::vector<int>> ids;
  std::vector<std::size_t> from;  // continuation start per rollout
  std::vector<double> advantages;
};

/// mean_i [ A_i * logprob_i - beta_kl * (logprob_i - ref_logprob_i) / len_i ].
/// The KL term is the mean per-token log ratio against the frozen reference.
double grpo_objective(const Policy& policy, const Policy& ref, const FrozenRollouts& rollouts,
                      double beta_kl);

/// Exact gradient of grpo_objective in the policy parameters. The reference
/// term contributes no gradient, so it is not needed here.
PolicyGrad grpo_gradient(const Policy& policy, const FrozenRollouts& rollouts, double beta_kl);

struct GrpoStepStats {
  double mean_reward = 0;  // mean raw component score across the group
  double mean_kl = 0;      // mean per-token log ratio to the reference
  double grad_norm = 0;
  double objective = 0;
  std::size_t malformed = 0;
};

/// Sample a group, score it, normalize composites into advantages, take one
/// ascent step. Everything downstream of step_seed is deterministic.
GrpoStepStats grpo_step(Policy& policy, const Policy& ref, const PromptCase& prompt,
                        const RewardEngine& engine, const RealizeFn& realize,
                        const GrpoConfig& config, uint64_t step_seed);

struct GrpoEpochStats {
  int epoch = 0;
  double mean_reward = 0;
  double mean_kl = 0;
  double grad_norm = 0;
};

struct GrpoReport {
  std::vector<GrpoEpochStats> trace;
};

/// One grpo_step per prompt per epoch, prompts visited in a seeded shuffled
/// order. The reference stays frozen throughout.
GrpoReport train_rl(Policy& policy, const Policy& ref, std::span<const PromptCase> prompts,
                    const RewardEngine& engine, const RealizeFn& realize,
                    const GrpoConfig& config);

}  // namespace motive
