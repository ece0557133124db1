#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "motive/com.hpp"
#include "motive/grpo.hpp"
#include "motive/metrics.hpp"
#include "motive/policy.hpp"
#include "motive/rewards.hpp"
#include "motive/synth.hpp"
#include "motive/tokenizer.hpp"

namespace motive {

struct EvalConfig {
  int pool_size = 32;        // retrieval pool for the R@k ranking
  int diversity_pairs = 64;
  int mmodality_prompts = 4;   // generation prompts resampled for modality
  int mmodality_samples = 4;   // generations per such prompt
  int mmodality_pair_cap = 16;
  int max_new_tokens = 64;
  double temperature = 1.0;
};

/// Desk-scale end-to-end settings. Individual module structs default to the
/// full-scale values; this config narrows them so the whole pipeline runs in
/// minutes on one core.
struct PipelineConfig {
  uint64_t seed = 0;
  SynthConfig synth;
  double train_ratio = 0.8, valid_ratio = 0.15, test_ratio = 0.05;
  TokenizerShape tok_shape{64, 16, 4, 6};
  TokenizerTrainConfig tok_train{1e-3, 10, 0.99, {}, 0, true};
  // The context window spans the reasoning span plus the prompt tail so the
  // hashed features can resolve tag roles; order-3 contexts alias them and
  // greedy decoding degenerates into unclosed spans.
  int policy_features = 16384;
  int policy_context = 24;
  SftConfig sft{0.4, 8, 0};
  // rl.epochs == 0 skips the tuning stage and its report row entirely.
  // Rollouts at 0.8 keep samples near the greedy mode; the 0.1 advantage
  // floor stops near-uniform groups from amplifying reward noise.
  GrpoConfig rl{8, 0.05, 0.05, 3, 64, 0.8, 0.1, 0};
  ComConfig com{8, 2, 0.5, 64, 1.0, 1.0, 0};
  // When false the search evaluation row is omitted from the report.
  bool com_enabled = true;
  ScorerConfig scorer;
  EvalConfig eval;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void save_pipeline_config(const PipelineConfig& cfg, const std::filesystem::path& path);

/// Context ids for a record: motion tokens when describing a motion, caption
/// words when generating one. The motion argument may be null only for
/// generation records.
std::vector<int> context_ids_for(const CoTRecord& rec, const Vocabulary& vocab,
                                 const MotionTokenizer& tokenizer, const MotionSequence* motion);

/// Fully supervised id sequence for cold-start training.
std::vector<int> sft_sequence_for(const CoTRecord& rec, const Vocabulary& vocab,
                                  const MotionTokenizer& tokenizer,
                                  const MotionSequence* motion);

/// Prompt plus scoring context. with_reference controls whether the recorded
/// answer text is available to the scorer (training and evaluation yes,
/// blind inference no).
PromptCase prompt_case_for(const CoTRecord& rec, const Vocabulary& vocab,
                           const MotionTokenizer& tokenizer, const MotionSequence* motion,
                           bool with_reference);

enum class GenMode { Single, Com };

struct EvalReport {
  std::optional<double> r1, r2, r3;
  std::optional<double> fid, mmdist, diversity_gen, diversity_ref, mmodality;
  std::optional<double> bleu1, bleu4, rouge_l, cider;
  double mean_reward = 0;
  int prompts = 0;
  int malformed = 0;
  int decode_calls = 0;

  nlohmann::json to_json() const;
};

struct EvalInputs {
  const Policy* policy = nullptr;
  const Vocabulary* vocab = nullptr;
  const MotionTokenizer* tokenizer = nullptr;
  const RewardEngine* engine = nullptr;
  const LoadedCorpus* corpus = nullptr;
  std::span<const std::size_t> eval_ids;
};

EvalReport evaluate_policy(const EvalInputs& in, GenMode mode, const ComConfig& com_cfg,
                           const EvalConfig& eval_cfg, uint64_t seed);

/// Advisory exclusive lock on a working directory. A leftover lock from a
/// crashed run must be removed by hand; the error message names the file.
class WorkdirLock {
 public:
  explicit WorkdirLock(const std::filesystem::path& workdir);
  ~WorkdirLock();
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  std::filesystem::path lock_path_;
  int fd_ = -1;
};

struct PipelineResult {
  TokenizerTrainReport tok_report;
  SftReport sft_report;
  GrpoReport rl_report;  // empty trace when the tuning stage was skipped
  EvalReport sft_eval;   // cold-start policy, one sample per prompt
  EvalReport rl_eval;    // tuned policy, one sample per prompt; default when skipped
  EvalReport com_eval;   // latest policy with search; default when disabled
};

/// Corpus synthesis, tokenizer training, cold start, group-relative tuning
/// and the three-way evaluation, all under one master seed. Artifacts land
/// in workdir; progress goes to log when given.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& workdir,
                            std::ostream* log);

}  // namespace motive
