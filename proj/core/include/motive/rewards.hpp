#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "motive/cot.hpp"
#include "motive/motion_data.hpp"
#include "motive/text.hpp"

namespace motive {

/// All scorer parameters are frozen: seeds fully determine the embedders and
/// nothing in here ever trains. Rewards stay verifiable by re-running the
/// same functions.
struct ScorerConfig {
  struct TextEmbedderCfg {
    int dim = 64;
    uint64_t seed = 17;
    int ngram = 2;
  } text_embedder;
  struct MotionEmbedderCfg {
    int dim = 64;
    uint64_t seed = 29;
  } motion_embedder;
  struct NliCfg {
    double neutral = 0.5;           // returned when the hypothesis has no content words
    double negation_penalty = 0.2;  // multiplier when negation appears on one side only
  } nli;
  struct PhysCfg {
    double lambda_joint = 0.8;
    double lambda_vel = 0.2;
    double vel_threshold = 1.0;
  } phys;
  double norm_eps = 1e-8;
  // Malformed candidates score below every well-formed group member by this
  // margin; a fully malformed group sits at the absolute floor.
  double malformed_floor_offset = 1.0;
  double malformed_floor_absolute = -1.0;
};

ScorerConfig load_scorer_config(const std::filesystem::path& path);
void save_scorer_config(const ScorerConfig& cfg, const std::filesystem::path& path);

/// (x - mean) / (population_std + eps). Empty input is an error; a constant
/// group maps to all zeros.
std::vector<double> group_normalize(std::span<const double> values, double eps);

struct PhysLosses {
  double joint = 0;  // mean squared excursion beyond joint limits
  double vel = 0;    // mean squared speed excess beyond the threshold
};

struct RewardComponents {
  std::optional<double> sem, coh, phys, align;
  CotStatus format_status = CotStatus::Ok;
  bool well_formed = false;
};

struct CandidateScore {
  RewardComponents components;
  double raw_mean = 0;   // mean of the raw components; floor when malformed
  double composite = 0;  // mean of group-normalized components; floor when malformed
};

struct GroupScore {
  std::vector<CandidateScore> scores;
};

/// One sampled completion. For generation the motion is the decoded candidate
/// (absent when decoding failed, which counts as malformed).
struct Candidate {
  std::string text;
  std::optional<MotionSequence> motion;
};

/// Shared inputs for every candidate of one prompt. Components are scored
/// exactly when their inputs exist: sem needs reference_text, align needs a
/// motion, phys applies to generated motion only.
struct ScoringContext {
  std::string caption;
  Task task = Task::Understanding;
  std::optional<std::string> reference_text;
  std::optional<MotionSequence> input_motion;  // the motion being described (understanding)
};

class RewardEngine {
 public:
  explicit RewardEngine(ScorerConfig cfg);

  const ScorerConfig& config() const { return cfg_; }

  /// Hashed bag of word n-grams, scaled to unit length. Throws EmptyText
  /// when the input has no tokens.
  Eigen::VectorXd embed_text(std::string_view text) const;

  /// Text-side embedding of the cross-modal space (matches embed_motion dim).
  Eigen::VectorXd embed_text_align(std::string_view text) const;

  /// Frozen random projection of per-channel summary statistics.
  Eigen::VectorXd embed_motion(const MotionSequence& seq) const;

  /// Content-word containment of hypothesis in premise, in [0, 1], with a
  /// penalty when negation appears on exactly one side.
  double entailment(std::string_view premise, std::string_view hypothesis) const;

  PhysLosses phys_losses(const MotionSequence& seq) const;
  double phys_reward(const MotionSequence& seq) const;

  double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

  /// Raw components only; used by search ranking and evaluation.
  CandidateScore score_single(const Candidate& candidate, const ScoringContext& ctx) const;

  /// Raw components plus per-component group normalization over the
  /// well-formed members. Malformed members land below the worst well-formed
  /// composite by malformed_floor_offset; an all-malformed group scores
  /// malformed_floor_absolute everywhere.
  GroupScore score_group(std::span<const Candidate> candidates, const ScoringContext& ctx) const;

 private:
  ScorerConfig cfg_;
  uint64_t align_text_seed_;

  Eigen::VectorXd hashed_ngram_embedding(std::string_view text, int dim, uint64_t seed,
                                         int max_ngram) const;
  RewardComponents raw_components(const Candidate& candidate, const ScoringContext& ctx) const;
};

}  // namespace motive
