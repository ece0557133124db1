#include "motive/rewards.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unordered_set>

#include "motive/rng.hpp"

namespace motive {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "a",  "an",  "the", "is",   "are", "was",  "were", "to",   "of", "and",  "or",  "in",
      "on", "at",  "with", "then", "it",  "this", "that", "its",  "be", "been", "for", "as",
      "by"};
  return words;
}

const std::unordered_set<std::string>& negation_words() {
  static const std::unordered_set<std::string> words = {"no", "not", "never", "without"};
  return words;
}

bool has_negation(const std::vector<std::string>& tokens) {
  return std::any_of(tokens.begin(), tokens.end(),
                     [](const std::string& t) { return negation_words().count(t) > 0; });
}

void validate_config(const ScorerConfig& cfg) {
  if (cfg.text_embedder.dim < 1 || cfg.motion_embedder.dim < 1)
    throw ConfigError("embedder dims must be positive");
  if (cfg.text_embedder.ngram < 1) throw ConfigError("ngram order must be at least 1");
  if (!(cfg.norm_eps > 0)) throw ConfigError("norm_eps must be positive");
  if (cfg.nli.neutral < 0 || cfg.nli.neutral > 1 || cfg.nli.negation_penalty < 0 ||
      cfg.nli.negation_penalty > 1)
    throw ConfigError("nli parameters must lie in [0, 1]");
  if (!(cfg.malformed_floor_offset > 0))
    throw ConfigError("malformed_floor_offset must be positive");
}

}  // namespace

std::vector<std::string> text_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<double> group_normalize(std::span<const double> values, double eps) {
  if (values.empty()) throw EmptyGroup("cannot normalize an empty group");
  const auto n = static_cast<double>(values.size());
  double mean = 0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;  // population variance over the group
  const double denom = std::sqrt(var) + eps;
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / denom;
  return out;
}

// ---------------------------------------------------------------------------
// Config IO
// ---------------------------------------------------------------------------

ScorerConfig load_scorer_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw ConfigError("invalid json in " + path.string());

  ScorerConfig cfg;
  try {
    if (j.contains("text_embedder")) {
      const auto& t = j["text_embedder"];
      cfg.text_embedder.dim = t.value("dim", cfg.text_embedder.dim);
      cfg.text_embedder.seed = t.value("seed", cfg.text_embedder.seed);
      cfg.text_embedder.ngram = t.value("ngram", cfg.text_embedder.ngram);
    }
    if (j.contains("motion_embedder")) {
      const auto& m = j["motion_embedder"];
      cfg.motion_embedder.dim = m.value("dim", cfg.motion_embedder.dim);
      cfg.motion_embedder.seed = m.value("seed", cfg.motion_embedder.seed);
    }
    if (j.contains("nli")) {
      const auto& nli = j["nli"];
      cfg.nli.neutral = nli.value("neutral", cfg.nli.neutral);
      cfg.nli.negation_penalty = nli.value("negation_penalty", cfg.nli.negation_penalty);
    }
    if (j.contains("phys")) {
      const auto& p = j["phys"];
      cfg.phys.lambda_joint = p.value("lambda_joint", cfg.phys.lambda_joint);
      cfg.phys.lambda_vel = p.value("lambda_vel", cfg.phys.lambda_vel);
      cfg.phys.vel_threshold = p.value("vel_threshold", cfg.phys.vel_threshold);
    }
    cfg.norm_eps = j.value("norm_eps", cfg.norm_eps);
    cfg.malformed_floor_offset = j.value("malformed_floor_offset", cfg.malformed_floor_offset);
    cfg.malformed_floor_absolute =
        j.value("malformed_floor_absolute", cfg.malformed_floor_absolute);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  validate_config(cfg);
  return cfg;
}

void save_scorer_config(const ScorerConfig& cfg, const fs::path& path) {
  validate_config(cfg);
  json j;
  j["text_embedder"] = {{"dim", cfg.text_embedder.dim},
                        {"seed", cfg.text_embedder.seed},
                        {"ngram", cfg.text_embedder.ngram}};
  j["motion_embedder"] = {{"dim", cfg.motion_embedder.dim}, {"seed", cfg.motion_embedder.seed}};
  j["nli"] = {{"neutral", cfg.nli.neutral}, {"negation_penalty", cfg.nli.negation_penalty}};
  j["phys"] = {{"lambda_joint", cfg.phys.lambda_joint},
               {"lambda_vel", cfg.phys.lambda_vel},
               {"vel_threshold", cfg.phys.vel_threshold}};
  j["norm_eps"] = cfg.norm_eps;
  j["malformed_floor_offset"] = cfg.malformed_floor_offset;
  j["malformed_floor_absolute"] = cfg.malformed_floor_absolute;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoFailure("write error on " + path.string());
}

// ---------------------------------------------------------------------------
// Embedders and scorers
// ---------------------------------------------------------------------------

RewardEngine::RewardEngine(ScorerConfig cfg) : cfg_(std::move(cfg)) {
  validate_config(cfg_);
  align_text_seed_ = derive_seed(cfg_.motion_embedder.seed, "align_text");
}

Eigen::VectorXd RewardEngine::hashed_ngram_embedding(std::string_view text, int dim,
                                                     uint64_t seed, int max_ngram) const {
  const std::vector<std::string> tokens = text_tokens(text);
  if (tokens.empty()) throw EmptyText("no tokens to embed");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  for (int k = 1; k <= max_ngram; ++k) {
    if (tokens.size() < static_cast<std::size_t>(k)) break;
    for (std::size_t i = 0; i + static_cast<std::size_t>(k) <= tokens.size(); ++i) {
      uint64_t h = fnv1a_u64(seed);
      for (int j = 0; j < k; ++j) {
        h = fnv1a(tokens[i + static_cast<std::size_t>(j)], h);
        h = fnv1a_u64(0x1fULL, h);  // gram separator
      }
      const auto idx = static_cast<Eigen::Index>(h % static_cast<uint64_t>(dim));
      v(idx) += (h >> 63) ? 1.0 : -1.0;
    }
  }
  const double norm = v.norm();
  return v / (norm + cfg_.norm_eps);
}

Eigen::VectorXd RewardEngine::embed_text(std::string_view text) const {
  return hashed_ngram_embedding(text, cfg_.text_embedder.dim, cfg_.text_embedder.seed,
                                cfg_.text_embedder.ngram);
}

Eigen::VectorXd RewardEngine::embed_text_align(std::string_view text) const {
  return hashed_ngram_embedding(text, cfg_.motion_embedder.dim, align_text_seed_,
                                cfg_.text_embedder.ngram);
}

Eigen::VectorXd RewardEngine::embed_motion(const MotionSequence& seq) const {
  seq.validate();
  const Eigen::MatrixXd x = seq.frames.cast<double>();
  const int t = seq.frame_count();
  const int d = seq.frame_dim();

  // Five summary statistics per channel plus two global descriptors.
  Eigen::VectorXd feat(5 * d + 2);
  for (int c = 0; c < d; ++c) {
    const Eigen::VectorXd col = x.col(c);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    double mean_step = 0;
    if (t >= 2)
      mean_step = (col.tail(t - 1) - col.head(t - 1)).array().abs().mean();
    feat(5 * c + 0) = mean;
    feat(5 * c + 1) = std::sqrt(var);
    feat(5 * c + 2) = mean_step;
    feat(5 * c + 3) = col.minCoeff();
    feat(5 * c + 4) = col.maxCoeff();
  }
  feat(5 * d + 0) = std::log1p(static_cast<double>(t));
  feat(5 * d + 1) = static_cast<double>(seq.fps);

  // Frozen projection; entries derive from the seed alone so any frame
  // dimension maps into the same space deterministically.
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cfg_.motion_embedder.dim);
  for (int r = 0; r < cfg_.motion_embedder.dim; ++r) {
    double acc = 0;
    for (Eigen::Index c = 0; c < feat.size(); ++c) {
      const uint64_t u = splitmix64(derive_seed(cfg_.motion_embedder.seed, "motion_proj",
                                                static_cast<uint64_t>(r),
                                                static_cast<uint64_t>(c)));
      const double w = static_cast<double>(u >> 11) * (1.0 / 9007199254740992.0) * 2.0 - 1.0;
      acc += w * feat(c);
    }
    out(r) = acc;
  }
  const double norm = out.norm();
  return out / (norm + cfg_.norm_eps);
}

double RewardEngine::entailment(std::string_view premise, std::string_view hypothesis) const {
  const std::vector<std::string> prem_tokens = text_tokens(premise);
  const std::vector<std::string> hyp_tokens = text_tokens(hypothesis);

  std::set<std::string> prem_set, hyp_set;
  for (const auto& t : prem_tokens)
    if (!stopwords().count(t)) prem_set.insert(t);
  for (const auto& t : hyp_tokens)
    if (!stopwords().count(t)) hyp_set.insert(t);
  if (hyp_set.empty()) return cfg_.nli.neutral;

  std::size_t covered = 0;
  for (const auto& t : hyp_set)
    if (prem_set.count(t)) ++covered;
  double score = static_cast<double>(covered) / static_cast<double>(hyp_set.size());
  if (has_negation(prem_tokens) != has_negation(hyp_tokens))
    score *= cfg_.nli.negation_penalty;
  return score;
}

PhysLosses RewardEngine::phys_losses(const MotionSequence& seq) const {
  seq.validate();
  PhysLosses out;
  const auto& map = seq.channel_map;
  const int t = seq.frame_count();

  if (!map.joint_angle_channels.empty()) {
    double acc = 0;
    for (const auto& ja : map.joint_angle_channels)
      for (int f = 0; f < t; ++f) {
        const double x = static_cast<double>(seq.frames(f, ja.index));
        const double over = std::max(0.0, x - static_cast<double>(ja.max)) +
                            std::max(0.0, static_cast<double>(ja.min) - x);
        acc += over * over;
      }
    out.joint = acc / (static_cast<double>(t) *
                       static_cast<double>(map.joint_angle_channels.size()));
  }
  if (!map.velocity_channels.empty()) {
    double acc = 0;
    for (int c : map.velocity_channels)
      for (int f = 0; f < t; ++f) {
        const double ex =
            std::max(0.0, std::abs(static_cast<double>(seq.frames(f, c))) -
                              cfg_.phys.vel_threshold);
        acc += ex * ex;
      }
    out.vel =
        acc / (static_cast<double>(t) * static_cast<double>(map.velocity_channels.size()));
  }
  return out;
}

double RewardEngine::phys_reward(const MotionSequence& seq) const {
  const PhysLosses l = phys_losses(seq);
  return -(cfg_.phys.lambda_joint * l.joint + cfg_.phys.lambda_vel * l.vel);
}

double RewardEngine::cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  if (a.size() != b.size())
    throw DimensionMismatch("cosine between " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()) + " dims");
  return a.dot(b) / ((a.norm() + cfg_.norm_eps) * (b.norm() + cfg_.norm_eps));
}

// ---------------------------------------------------------------------------
// Candidate scoring
// ---------------------------------------------------------------------------

RewardComponents RewardEngine::raw_components(const Candidate& cand,
                                              const ScoringContext& ctx) const {
  RewardComponents rc;
  const CotParse parse = parse_cot(cand.text);
  rc.format_status = parse.status;

  const bool gen = ctx.task == Task::Generation;
  bool formed = parse.ok();
  // The answer payload is the deliverable: a generation candidate without a
  // decodable motion and an understanding candidate without any answer words
  // both count as malformed.
  if (formed && gen && !cand.motion.has_value()) formed = false;
  if (formed && !gen && text_tokens(parse.answer).empty()) formed = false;
  rc.well_formed = formed;
  if (!formed) return rc;

  if (gen) {
    rc.phys = phys_reward(*cand.motion);
    if (!text_tokens(ctx.caption).empty()) {
      rc.coh = entailment(parse.think, ctx.caption);
      rc.align = cosine(embed_motion(*cand.motion), embed_text_align(ctx.caption));
    }
  } else {
    if (ctx.reference_text && !text_tokens(*ctx.reference_text).empty())
      rc.sem = cosine(embed_text(parse.answer), embed_text(*ctx.reference_text));
    rc.coh = entailment(parse.think, parse.answer);
    if (ctx.input_motion)
      rc.align = cosine(embed_motion(*ctx.input_motion), embed_text_align(parse.answer));
  }
  return rc;
}

namespace {

double mean_of_present(const RewardComponents& rc) {
  double acc = 0;
  int n = 0;
  for (const auto& c : {rc.sem, rc.coh, rc.phys, rc.align})
    if (c) {
      acc += *c;
      ++n;
    }
  return n > 0 ? acc / n : 0.0;
}

}  // namespace

CandidateScore RewardEngine::score_single(const Candidate& candidate,
                                          const ScoringContext& ctx) const {
  CandidateScore out;
  out.components = raw_components(candidate, ctx);
  out.raw_mean = out.components.well_formed ? mean_of_present(out.components)
                                            : cfg_.malformed_floor_absolute;
  out.composite = out.raw_mean;
  return out;
}

GroupScore RewardEngine::score_group(std::span<const Candidate> candidates,
                                     const ScoringContext& ctx) const {
  if (candidates.empty()) throw EmptyGroup("cannot score an empty candidate group");
  GroupScore group;
  group.scores.resize(candidates.size());
  std::vector<std::size_t> formed;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto& s = group.scores[i];
    s.components = raw_components(candidates[i], ctx);
    if (s.components.well_formed) {
      s.raw_mean = mean_of_present(s.components);
      formed.push_back(i);
    } else {
      s.raw_mean = cfg_.malformed_floor_absolute;
    }
  }

  if (formed.empty()) {
    for (auto& s : group.scores) s.composite = cfg_.malformed_floor_absolute;
    return group;
  }

  // Normalize each component across the well-formed members, then average
  // the normalized values per candidate.
  std::vector<double> norm_sum(candidates.size(), 0.0);
  std::vector<int> norm_count(candidates.size(), 0);
  const auto accumulate = [&](auto member) {
    std::vector<std::size_t> with;
    std::vector<double> values;
    for (std::size_t i : formed) {
      const auto& opt = group.scores[i].components.*member;
      if (opt) {
        with.push_back(i);
        values.push_back(*opt);
      }
    }
    if (values.empty()) return;
    const std::vector<double> normed = group_normalize(values, cfg_.norm_eps);
    for (std::size_t k = 0; k < with.size(); ++k) {
      norm_sum[with[k]] += normed[k];
      norm_count[with[k]] += 1;
    }
  };
  accumulate(&RewardComponents::sem);
  accumulate(&RewardComponents::coh);
  accumulate(&RewardComponents::phys);
  accumulate(&RewardComponents::align);

  double min_composite = 0;
  bool first = true;
  for (std::size_t i : formed) {
    auto& s = group.scores[i];
    s.composite = norm_count[i] > 0 ? norm_sum[i] / norm_count[i] : 0.0;
    if (first || s.composite < min_composite) {
      min_composite = s.composite;
      first = false;
    }
  }
  const double floor = min_composite - cfg_.malformed_floor_offset;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (!group.scores[i].components.well_formed) group.scores[i].composite = floor;
  return group;
}

}  // namespace motive
