#include "motive/com.hpp"

#include <algorithm>
#include <cmath>

namespace motive {

GroupScoreFn make_raw_scorer(const RewardEngine& engine, const ScoringContext& ctx) {
  return [&engine, ctx](std::span<const Candidate> candidates) {
    std::vector<CandidateScore> out;
    out.reserve(candidates.size());
    for (const auto& cand : candidates) out.push_back(engine.score_single(cand, ctx));
    return out;
  };
}

namespace {

struct PoolEntry {
  std::vector<int> ids;
  Candidate candidate;
  CandidateScore score;
  int round = 0;
  int origin = -1;
  int index = 0;  // global creation order, the tie breaker everywhere
};

/// Descending score, creation order on ties.
bool better(const PoolEntry& a, const PoolEntry& b) {
  if (a.score.raw_mean != b.score.raw_mean) return a.score.raw_mean > b.score.raw_mean;
  return a.index < b.index;
}

std::vector<std::size_t> rank_pool(const std::vector<PoolEntry>& pool) {
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return better(pool[a], pool[b]); });
  return order;
}

}  // namespace

ComResult com_search(const Policy& policy, const PromptCase& prompt, const RealizeFn& realize,
                     const GroupScoreFn& score, const Vocabulary& vocab,
                     const ComConfig& config) {
  if (config.k < 1) throw ConfigError("com needs at least one candidate");
  if (config.t < 0) throw ConfigError("refinement rounds must be nonnegative");
  if (!(config.keep_fraction > 0) || config.keep_fraction > 1)
    throw ConfigError("keep_fraction must lie in (0, 1]");
  if (prompt.prompt_ids.empty()) throw ConfigError("empty prompt");

  ComResult result;
  std::vector<PoolEntry> pool;
  int next_index = 0;

  const auto add_entry = [&](std::vector<int> ids, int round, int origin) {
    PoolEntry e;
    e.ids = std::move(ids);
    e.candidate = realize(prompt.ctx.task, e.ids);
    e.round = round;
    e.origin = origin;
    e.index = next_index++;
    pool.push_back(std::move(e));
    ++result.decode_calls;
  };

  {
    Rng rng = make_rng(derive_seed(config.seed, "com_round", 0));
    for (int i = 0; i < config.k; ++i) {
      SampleResult s =
          policy.sample(prompt.prompt_ids, config.max_new_tokens, config.temperature, rng);
      add_entry(std::move(s.ids), 0, -1);
    }
    std::vector<Candidate> fresh;
    for (const auto& e : pool) fresh.push_back(e.candidate);
    const std::vector<CandidateScore> scores = score(fresh);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i].score = scores[i];
    for (const auto& e : pool)
      result.trace.push_back({e.round, e.origin, e.index, e.score.raw_mean,
                              e.score.components.well_formed, false, e.candidate.text});
  }

  for (int round = 1; round <= config.t; ++round) {
    const std::vector<std::size_t> order = rank_pool(pool);
    const auto keep = static_cast<std::size_t>(
        std::ceil(config.keep_fraction * static_cast<double>(pool.size())));
    std::vector<PoolEntry> survivors;
    for (std::size_t i = 0; i < std::min(keep, order.size()); ++i)
      survivors.push_back(pool[order[i]]);
    for (auto& s : survivors) {
      for (auto& t : result.trace)
        if (t.index == s.index) t.survivor = true;
    }

    // Survivors carry over untouched; each also spawns one refinement that
    // keeps the reasoning prefix and resamples everything after it.
    Rng rng = make_rng(derive_seed(config.seed, "com_round", static_cast<uint64_t>(round)));
    std::vector<PoolEntry> next_pool = survivors;
    const std::size_t first_fresh = next_pool.size();
    for (const auto& s : survivors) {
      std::span<const int> ids(s.ids);
      std::size_t prefix_len = prompt.prompt_ids.size();
      for (std::size_t p = prompt.prompt_ids.size(); p < ids.size(); ++p)
        if (ids[p] == vocab.think_close_id()) {
          prefix_len = p + 1;
          break;
        }
      const std::span<const int> prefix = ids.subspan(0, prefix_len);
      SampleResult r =
          policy.sample(prefix, config.max_new_tokens, config.refine_temperature, rng);
      PoolEntry e;
      e.ids = std::move(r.ids);
      e.candidate = realize(prompt.ctx.task, e.ids);
      e.round = round;
      e.origin = s.index;
      e.index = next_index++;
      next_pool.push_back(std::move(e));
      ++result.decode_calls;
    }
    std::vector<Candidate> fresh;
    for (std::size_t i = first_fresh; i < next_pool.size(); ++i)
      fresh.push_back(next_pool[i].candidate);
    if (!fresh.empty()) {
      const std::vector<CandidateScore> scores = score(fresh);
      for (std::size_t i = 0; i < scores.size(); ++i)
        next_pool[first_fresh + i].score = scores[i];
    }
    pool = std::move(next_pool);
    for (std::size_t i = first_fresh; i < pool.size(); ++i) {
      const auto& e = pool[i];
      result.trace.push_back({e.round, e.origin, e.index, e.score.raw_mean,
                              e.score.components.well_formed, false, e.candidate.text});
    }
  }

  const std::vector<std::size_t> final_order = rank_pool(pool);
  const PoolEntry& winner = pool[final_order.front()];
  result.best = winner.candidate;
  result.best_score = winner.score;
  result.best_ids = winner.ids;
  result.best_prompt_len = prompt.prompt_ids.size();
  result.degraded = !winner.score.components.well_formed;
  for (auto& t : result.trace)
    if (t.index == winner.index) t.survivor = true;
  return result;
}

ComResult single_pass(const Policy& policy, const PromptCase& prompt, const RealizeFn& realize,
                      const GroupScoreFn& score, int max_new_tokens, double temperature,
                      uint64_t seed) {
  if (prompt.prompt_ids.empty()) throw ConfigError("empty prompt");
  Rng rng = make_rng(derive_seed(seed, "single_pass"));
  SampleResult s = policy.sample(prompt.prompt_ids, max_new_tokens, temperature, rng);

  ComResult result;
  result.best_ids = s.ids;
  result.best_prompt_len = s.prompt_len;
  result.best = realize(prompt.ctx.task, result.best_ids);
  std::vector<Candidate> one{result.best};
  result.best_score = score(one).front();
  result.degraded = !result.best_score.components.well_formed;
  result.decode_calls = 1;
  result.trace.push_back({0, -1, 0, result.best_score.raw_mean,
                          result.best_score.components.well_formed, true, result.best.text});
  return result;
}

}  // namespace motive
