#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "motive/grpo.hpp"

namespace motive {

struct ComConfig {
  int k = 8;                  // initial candidate count
  int t = 2;                  // refinement rounds
  double keep_fraction = 0.5;
  int max_new_tokens = 64;
  double temperature = 1.0;
  double refine_temperature = 1.0;
  uint64_t seed = 0;
};

/// Raw score per candidate; injectable so search behavior is testable with
/// scripted scores. Production use wraps RewardEngine::score_single.
using GroupScoreFn = std::function<std::vector<CandidateScore>(std::span<const Candidate>)>;

GroupScoreFn make_raw_scorer(const RewardEngine& engine, const ScoringContext& ctx);

struct ComCandidateTrace {
  int round = 0;        // 0 = initial sampling, >0 = refinement rounds
  int origin = -1;      // creation index of the refined survivor, -1 for fresh samples
  int index = 0;        // global creation order
  double raw_score = 0;
  bool well_formed = false;
  bool survivor = false;  // advanced out of its round
  std::string text;
};

struct ComResult {
  Candidate best;
  CandidateScore best_score;
  std::vector<int> best_ids;
  std::size_t best_prompt_len = 0;
  bool degraded = false;  // the winner itself is malformed
  int decode_calls = 0;   // total sampling passes spent
  std::vector<ComCandidateTrace> trace;
};

/// Sample k candidates, keep the top ceil(keep_fraction * pool), then for t
/// rounds extend the pool with one refinement per survivor: the reasoning
/// prefix (through its close tag) is kept and the rest is resampled. Ranking
/// uses raw scores so values stay comparable across rounds and against a
/// plain single sample. Ties resolve to the earliest creation index.
ComResult com_search(const Policy& policy, const PromptCase& prompt, const RealizeFn& realize,
                     const GroupScoreFn& score, const Vocabulary& vocab,
                     const ComConfig& config);

/// One sample, realized and raw-scored; the baseline the search must beat.
ComResult single_pass(const Policy& policy, const PromptCase& prompt, const RealizeFn& realize,
                      const GroupScoreFn& score, int max_new_tokens, double temperature,
                      uint64_t seed);

}  // namespace motive
