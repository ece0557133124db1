#include "motive/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace motive {

RealizeFn make_realizer(const Vocabulary& vocab, const MotionTokenizer* tokenizer, float fps,
                        ChannelMap channel_map) {
  return [vocab, tokenizer, fps, channel_map](Task task,
                                              std::span<const int> ids) -> Candidate {
    Candidate cand;
    cand.text = vocab.decode(ids);
    if (task != Task::Generation || tokenizer == nullptr) return cand;

    // Motion tokens inside the first closed answer span; stray word tokens
    // in there are ignored rather than fatal.
    std::vector<int> codes;
    bool in_answer = false;
    bool closed = false;
    for (int id : ids) {
      if (!closed && !in_answer && id == vocab.answer_open_id()) {
        in_answer = true;
        continue;
      }
      if (in_answer && id == vocab.answer_close_id()) {
        in_answer = false;
        closed = true;
        continue;
      }
      if (in_answer)
        if (const auto code = vocab.motion_code(id)) codes.push_back(*code);
    }
    if (!closed || codes.empty()) return cand;

    try {
      MotionSequence motion = tokenizer->decode(codes, fps);
      motion.channel_map = channel_map;
      motion.validate();
      cand.motion = std::move(motion);
    } catch (const Error&) {
      // Undecodable output scores as malformed instead of aborting training.
    }
    return cand;
  };
}

namespace {

void check_rollouts(const FrozenRollouts& rollouts) {
  if (rollouts.ids.empty()) throw EmptyGroup("no rollouts");
  if (rollouts.ids.size() != rollouts.from.size() ||
      rollouts.ids.size() != rollouts.advantages.size())
    throw DimensionMismatch("rollout fields disagree on the group size");
  for (std::size_t i = 0; i < rollouts.ids.size(); ++i)
    if (rollouts.from[i] >= rollouts.ids[i].size())
      throw DimensionMismatch("rollout " + std::to_string(i) + " has an empty continuation");
}

}  // namespace

double grpo_objective(const Policy& policy, const Policy& ref, const FrozenRollouts& rollouts,
                      double beta_kl) {
  check_rollouts(rollouts);
  const auto m = static_cast<double>(rollouts.ids.size());
  double acc = 0;
  for (std::size_t i = 0; i < rollouts.ids.size(); ++i) {
    const auto len = static_cast<double>(rollouts.ids[i].size() - rollouts.from[i]);
    const double lp = policy.logprob_from(rollouts.ids[i], rollouts.from[i]);
    const double lp_ref = ref.logprob_from(rollouts.ids[i], rollouts.from[i]);
    acc += rollouts.advantages[i] * lp - beta_kl * (lp - lp_ref) / len;
  }
  return acc / m;
}

PolicyGrad grpo_gradient(const Policy& policy, const FrozenRollouts& rollouts, double beta_kl) {
  check_rollouts(rollouts);
  const auto m = static_cast<double>(rollouts.ids.size());
  PolicyGrad grad(policy.shape());
  for (std::size_t i = 0; i < rollouts.ids.size(); ++i) {
    const auto len = static_cast<double>(rollouts.ids[i].size() - rollouts.from[i]);
    const double coeff = (rollouts.advantages[i] - beta_kl / len) / m;
    policy.accumulate_logprob_grad(rollouts.ids[i], rollouts.from[i], coeff, grad);
  }
  return grad;
}

GrpoStepStats grpo_step(Policy& policy, const Policy& ref, const PromptCase& prompt,
                        const RewardEngine& engine, const RealizeFn& realize,
                        const GrpoConfig& config, uint64_t step_seed) {
  if (config.group_size < 1) throw ConfigError("group_size must be at least 1");
  if (config.lr < 0) throw ConfigError("learning rate must be nonnegative");
  if (prompt.prompt_ids.empty()) throw ConfigError("empty prompt");

  Rng rng = make_rng(derive_seed(step_seed, "grpo_rollouts"));
  FrozenRollouts rollouts;
  std::vector<Candidate> candidates;
  for (int i = 0; i < config.group_size; ++i) {
    SampleResult s =
        policy.sample(prompt.prompt_ids, config.max_new_tokens, config.temperature, rng);
    candidates.push_back(realize(prompt.ctx.task, s.ids));
    rollouts.ids.push_back(std::move(s.ids));
    rollouts.from.push_back(s.prompt_len);
  }

  const GroupScore group = engine.score_group(candidates, prompt.ctx);
  std::vector<double> composites;
  GrpoStepStats stats;
  for (const auto& score : group.scores) {
    composites.push_back(score.composite);
    stats.mean_reward += score.raw_mean;
    if (!score.components.well_formed) ++stats.malformed;
  }
  stats.mean_reward /= static_cast<double>(group.scores.size());
  rollouts.advantages = group_normalize(composites, config.eps);

  PolicyGrad grad(policy.shape());
  const auto m = static_cast<double>(rollouts.ids.size());
  for (std::size_t i = 0; i < rollouts.ids.size(); ++i) {
    const auto len = static_cast<double>(rollouts.ids[i].size() - rollouts.from[i]);
    const double coeff = (rollouts.advantages[i] - config.beta_kl / len) / m;
    const double lp =
        policy.accumulate_logprob_grad(rollouts.ids[i], rollouts.from[i], coeff, grad);
    const double lp_ref = ref.logprob_from(rollouts.ids[i], rollouts.from[i]);
    stats.mean_kl += (lp - lp_ref) / len / m;
    stats.objective +=
        (rollouts.advantages[i] * lp - config.beta_kl * (lp - lp_ref) / len) / m;
  }
  if (!grad.all_finite()) throw NonFiniteGradient("grpo gradient is not finite");
  stats.grad_norm = grad.norm();
  policy.apply_update(grad, config.lr);
  return stats;
}

GrpoReport train_rl(Policy& policy, const Policy& ref, std::span<const PromptCase> prompts,
                    const RewardEngine& engine, const RealizeFn& realize,
                    const GrpoConfig& config) {
  if (prompts.empty()) throw ConfigError("no rl prompts");
  if (config.epochs < 1) throw ConfigError("epochs must be at least 1");

  GrpoReport report;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(prompts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(derive_seed(config.seed, "rl_epoch", static_cast<uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    GrpoEpochStats epoch_stats;
    epoch_stats.epoch = epoch;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const uint64_t step_seed =
          derive_seed(config.seed, "rl_step", static_cast<uint64_t>(epoch), step);
      const GrpoStepStats s =
          grpo_step(policy, ref, prompts[order[step]], engine, realize, config, step_seed);
      epoch_stats.mean_reward += s.mean_reward;
      epoch_stats.mean_kl += s.mean_kl;
      epoch_stats.grad_norm += s.grad_norm;
    }
    const auto n = static_cast<double>(order.size());
    epoch_stats.mean_reward /= n;
    epoch_stats.mean_kl /= n;
    epoch_stats.grad_norm /= n;
    report.trace.push_back(epoch_stats);
  }
  return report;
}

}  // namespace motive
