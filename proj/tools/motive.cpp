// Command-line front end for the motive library. Every stage of the pipeline
// is exposed as a subcommand working off persisted artifacts, so a run can be
// driven end to end (`pipeline`) or stage by stage with inspection between
// steps. Standalone stages use the same seed streams as the integrated
// pipeline: given one config and master seed, `synth` + `train-vq` + `sft` +
// `rl` reproduce exactly what `pipeline` would have written.
//
// Exit code 0 on success. Failures print a stage-tagged diagnostic to stderr
// and exit nonzero. Progress always goes to stderr; stdout carries only the
// product of the subcommand (generated text, score rows, reports).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "motive/com.hpp"
#include "motive/cot.hpp"
#include "motive/error.hpp"
#include "motive/grpo.hpp"
#include "motive/metrics.hpp"
#include "motive/motion_data.hpp"
#include "motive/parallel.hpp"
#include "motive/pipeline.hpp"
#include "motive/policy.hpp"
#include "motive/rewards.hpp"
#include "motive/rng.hpp"
#include "motive/synth.hpp"
#include "motive/tokenizer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

using namespace motive;

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

struct GlobalOpts {
  std::string config_path;
  uint64_t seed = 0;
  const CLI::Option* seed_opt = nullptr;  // set once wiring is done
  int threads = 1;

  PipelineConfig load() const {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = load_pipeline_config(config_path);
    if (seed_opt != nullptr && seed_opt->count() > 0) cfg.seed = seed;
    return cfg;
  }
};

std::ostream& note(const std::string& stage) { return std::cerr << "[" << stage << "] "; }

json opt_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void write_text(const std::string& out_path, const std::string& body) {
  if (out_path.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + out_path + " for writing");
  out << body;
}

MotionSequence load_motion_with_map(const fs::path& motion_path,
                                    const std::string& channel_map_path) {
  MotionSequence seq = load_motion(motion_path);
  if (!channel_map_path.empty()) {
    seq.channel_map = load_channel_map(channel_map_path);
    seq.validate();
  }
  return seq;
}

json score_row(std::size_t index, const CandidateScore& s) {
  ordered_json row;
  row["index"] = index;
  row["well_formed"] = s.components.well_formed;
  row["format_status"] = std::string(cot_status_name(s.components.format_status));
  row["sem"] = opt_to_json(s.components.sem);
  row["coh"] = opt_to_json(s.components.coh);
  row["phys"] = opt_to_json(s.components.phys);
  row["align"] = opt_to_json(s.components.align);
  row["raw_mean"] = s.raw_mean;
  row["composite"] = s.composite;
  return row;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out_dir;
  int count = -1;       // <0 keeps the config value
  double noise = -1.0;  // <0 keeps the config value
};

void cmd_synth(const GlobalOpts& g, const SynthArgs& a) {
  const PipelineConfig cfg = g.load();
  SynthConfig synth_cfg = cfg.synth;
  if (a.count >= 0) synth_cfg.count = a.count;
  if (a.noise >= 0) synth_cfg.noise = a.noise;
  synth_cfg.seed = derive_seed(cfg.seed, "synth");
  const SynthCorpus corpus = synth_corpus(synth_cfg);
  write_corpus(corpus, a.out_dir, cfg.train_ratio, cfg.valid_ratio, cfg.test_ratio,
               derive_seed(cfg.seed, "split"));
  note("synth") << corpus.items.size() << " records -> " << a.out_dir << "\n";
}

// ---------------------------------------------------------------------------
// train-vq
// ---------------------------------------------------------------------------

struct TrainVqArgs {
  std::string corpus_dir;
  std::string out_path = "tokenizer.mtok";
};

void cmd_train_vq(const GlobalOpts& g, const TrainVqArgs& a) {
  const PipelineConfig cfg = g.load();
  const LoadedCorpus corpus = load_corpus(a.corpus_dir);
  std::vector<MotionSequence> train_motions;
  for (std::size_t id : corpus.split.train) train_motions.push_back(corpus.motions[id]);
  note("train-vq") << train_motions.size() << " training motions\n";

  MotionTokenizer tokenizer(cfg.tok_shape, derive_seed(cfg.seed, "tokenizer_init"));
  TokenizerTrainConfig train_cfg = cfg.tok_train;
  train_cfg.seed = derive_seed(cfg.seed, "tokenizer_train");
  const TokenizerTrainReport report = train_tokenizer(tokenizer, train_motions, train_cfg);
  for (std::size_t e = 0; e < report.trace.size(); ++e) {
    const VqLoss& l = report.trace[e];
    note("train-vq") << "epoch " << e << " total " << l.total << " reconstruct "
                     << l.reconstruct << " commit " << l.commit << " embed " << l.embed
                     << "\n";
  }
  tokenizer.save(a.out_path);
  note("train-vq") << "saved " << a.out_path << "\n";
}

// ---------------------------------------------------------------------------
// sft
// ---------------------------------------------------------------------------

struct SftArgs {
  std::string corpus_dir;
  std::string tokenizer_path;
  std::string out_policy = "policy_sft.mpol";
  std::string out_vocab = "vocab.json";
};

void cmd_sft(const GlobalOpts& g, const SftArgs& a) {
  const PipelineConfig cfg = g.load();
  const LoadedCorpus corpus = load_corpus(a.corpus_dir);
  const MotionTokenizer tokenizer = MotionTokenizer::load(a.tokenizer_path);

  std::vector<std::string> texts;
  for (std::size_t id : corpus.split.train) {
    const CoTRecord& rec = corpus.records[id];
    texts.push_back(rec.caption);
    texts.push_back(rec.think);
    if (rec.answer_text) texts.push_back(*rec.answer_text);
  }
  const Vocabulary vocab = Vocabulary::build(texts, tokenizer.shape().codebook_size);
  vocab.save(a.out_vocab);
  note("sft") << "vocabulary size " << vocab.size() << " -> " << a.out_vocab << "\n";

  Policy policy({cfg.policy_features, vocab.size(), cfg.policy_context},
                derive_seed(cfg.seed, "policy_init"));
  std::vector<std::vector<int>> sequences;
  for (std::size_t id : corpus.split.train)
    sequences.push_back(
        sft_sequence_for(corpus.records[id], vocab, tokenizer, &corpus.motions[id]));
  SftConfig sft_cfg = cfg.sft;
  sft_cfg.seed = derive_seed(cfg.seed, "sft");
  const SftReport report = train_sft(policy, sequences, sft_cfg);
  for (std::size_t e = 0; e < report.loss_trace.size(); ++e)
    note("sft") << "epoch " << e << " nll " << report.loss_trace[e] << "\n";
  policy.save(a.out_policy);
  note("sft") << "saved " << a.out_policy << "\n";
}

// ---------------------------------------------------------------------------
// rl
// ---------------------------------------------------------------------------

struct RlArgs {
  std::string corpus_dir;
  std::string tokenizer_path;
  std::string vocab_path;
  std::string policy_path;
  std::string out_policy = "policy_rl.mpol";
  std::string progress_path;
};

void cmd_rl(const GlobalOpts& g, const RlArgs& a) {
  const PipelineConfig cfg = g.load();
  const LoadedCorpus corpus = load_corpus(a.corpus_dir);
  const MotionTokenizer tokenizer = MotionTokenizer::load(a.tokenizer_path);
  const Vocabulary vocab = Vocabulary::load(a.vocab_path);
  Policy policy = Policy::load(a.policy_path);
  const Policy reference = policy;  // the loaded checkpoint anchors the KL term

  std::vector<PromptCase> prompts;
  for (std::size_t id : corpus.split.train)
    prompts.push_back(
        prompt_case_for(corpus.records[id], vocab, tokenizer, &corpus.motions[id], true));
  note("rl") << prompts.size() << " training prompts\n";

  const RewardEngine engine(cfg.scorer);
  const float fps = corpus.motions.empty() ? cfg.synth.fps : corpus.motions.front().fps;
  const RealizeFn realize = make_realizer(vocab, &tokenizer, fps, corpus.channel_map);
  GrpoConfig rl_cfg = cfg.rl;
  rl_cfg.seed = derive_seed(cfg.seed, "rl");
  const GrpoReport report = train_rl(policy, reference, prompts, engine, realize, rl_cfg);
  for (const GrpoEpochStats& row : report.trace)
    note("rl") << "epoch " << row.epoch << " mean_reward " << row.mean_reward << " mean_kl "
               << row.mean_kl << " grad_norm " << row.grad_norm << "\n";
  policy.save(a.out_policy);
  note("rl") << "saved " << a.out_policy << "\n";

  if (!a.progress_path.empty()) {
    std::ofstream progress(a.progress_path, std::ios::trunc);
    if (!progress) throw IoFailure("cannot open " + a.progress_path + " for writing");
    for (const GrpoEpochStats& row : report.trace) {
      const json j = {{"epoch", row.epoch},
                      {"mean_reward", row.mean_reward},
                      {"mean_kl", row.mean_kl},
                      {"grad_norm", row.grad_norm}};
      progress << j.dump() << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string tokenizer_path;
  std::string vocab_path;
  std::string policy_path;
  std::string caption;      // generation prompt
  std::string motion_path;  // understanding prompt (motion to describe)
  std::string channel_map_path;
  std::string motion_out;
  bool use_com = false;
  bool show_trace = false;
  bool as_json = false;
  int k = -1;
  int rounds = -1;
  double keep_fraction = -1.0;
  int max_new_tokens = -1;
  double temperature = -1.0;
};

void cmd_generate(const GlobalOpts& g, const GenerateArgs& a) {
  if (a.caption.empty() == a.motion_path.empty())
    throw ConfigError("exactly one of --caption (generate) or --motion (describe) is required");
  const PipelineConfig cfg = g.load();
  const MotionTokenizer tokenizer = MotionTokenizer::load(a.tokenizer_path);
  const Vocabulary vocab = Vocabulary::load(a.vocab_path);
  const Policy policy = Policy::load(a.policy_path);
  const RewardEngine engine(cfg.scorer);

  ChannelMap channel_map;
  if (!a.channel_map_path.empty()) channel_map = load_channel_map(a.channel_map_path);

  PromptCase prompt;
  std::optional<MotionSequence> input_motion;
  float fps = cfg.synth.fps;
  if (!a.caption.empty()) {
    prompt.ctx.task = Task::Generation;
    prompt.ctx.caption = a.caption;
    prompt.prompt_ids = wrap_prompt(vocab, vocab.encode_text(a.caption));
  } else {
    input_motion = load_motion_with_map(a.motion_path, a.channel_map_path);
    fps = input_motion->fps;
    prompt.ctx.task = Task::Understanding;
    prompt.ctx.input_motion = input_motion;
    std::vector<int> context;
    for (int code : tokenizer.tokenize(*input_motion))
      context.push_back(vocab.motion_token_id(code));
    prompt.prompt_ids = wrap_prompt(vocab, context);
  }

  const RealizeFn realize = make_realizer(vocab, &tokenizer, fps, channel_map);
  const GroupScoreFn scorer = make_raw_scorer(engine, prompt.ctx);
  const uint64_t seed = derive_seed(cfg.seed, "generate");

  ComConfig com_cfg = cfg.com;
  if (a.k > 0) com_cfg.k = a.k;
  if (a.rounds >= 0) com_cfg.t = a.rounds;
  if (a.keep_fraction > 0) com_cfg.keep_fraction = a.keep_fraction;
  if (a.max_new_tokens > 0) com_cfg.max_new_tokens = a.max_new_tokens;
  if (a.temperature >= 0) {
    com_cfg.temperature = a.temperature;
    com_cfg.refine_temperature = a.temperature;
  }
  com_cfg.seed = seed;
  const int single_max_new =
      a.max_new_tokens > 0 ? a.max_new_tokens : cfg.eval.max_new_tokens;
  const double single_temp = a.temperature >= 0 ? a.temperature : cfg.eval.temperature;

  const ComResult res =
      a.use_com ? com_search(policy, prompt, realize, scorer, vocab, com_cfg)
                : single_pass(policy, prompt, realize, scorer, single_max_new, single_temp,
                              seed);

  note("generate") << (a.use_com ? "search" : "single pass") << ": decode_calls "
                   << res.decode_calls << " raw_mean " << res.best_score.raw_mean
                   << (res.degraded ? " (malformed winner)" : "") << "\n";
  if (a.show_trace)
    for (const ComCandidateTrace& t : res.trace)
      note("generate") << "round " << t.round << " idx " << t.index << " origin " << t.origin
                       << " score " << t.raw_score << (t.well_formed ? "" : " malformed")
                       << (t.survivor ? " survivor" : "") << "\n";

  if (!a.motion_out.empty()) {
    if (!res.best.motion)
      throw ConfigError("winner carries no decodable motion; nothing to write");
    save_motion(*res.best.motion, a.motion_out);
    note("generate") << "motion (" << res.best.motion->frame_count() << " frames) -> "
                     << a.motion_out << "\n";
  }

  if (a.as_json) {
    ordered_json out;
    out["text"] = res.best.text;
    out["score"] = score_row(0, res.best_score);
    out["decode_calls"] = res.decode_calls;
    out["degraded"] = res.degraded;
    if (res.best.motion) out["frames"] = res.best.motion->frame_count();
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << res.best.text << "\n";
  }
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreArgs {
  std::string candidates_path;
  std::string caption;
  std::string task = "und";
  std::string reference;
  std::string motion_path;  // the motion being described, for understanding
  std::string channel_map_path;
  std::string out_path;
};

void cmd_score(const GlobalOpts& g, const ScoreArgs& a) {
  const PipelineConfig cfg = g.load();
  const RewardEngine engine(cfg.scorer);

  ScoringContext ctx;
  ctx.caption = a.caption;
  ctx.task = task_from_name(a.task);
  if (!a.reference.empty()) ctx.reference_text = a.reference;
  if (!a.motion_path.empty())
    ctx.input_motion = load_motion_with_map(a.motion_path, a.channel_map_path);

  std::ifstream in(a.candidates_path);
  if (!in) throw IoFailure("cannot open " + a.candidates_path);
  std::vector<Candidate> candidates;
  std::string line;
  const fs::path base = fs::path(a.candidates_path).parent_path();
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError("candidate line " + std::to_string(candidates.size() + 1) +
                        " is not valid JSON: " + e.what());
    }
    Candidate c;
    c.text = j.value("text", std::string{});
    if (j.contains("motion") && !j["motion"].is_null()) {
      fs::path mp = j["motion"].get<std::string>();
      if (mp.is_relative()) mp = base / mp;
      c.motion = load_motion_with_map(mp, a.channel_map_path);
    }
    candidates.push_back(std::move(c));
  }
  if (candidates.empty()) throw EmptyGroup("no candidates in " + a.candidates_path);

  const GroupScore group = engine.score_group(candidates, ctx);
  std::ostringstream body;
  for (std::size_t i = 0; i < group.scores.size(); ++i)
    body << score_row(i, group.scores[i]).dump() << "\n";
  write_text(a.out_path, body.str());
  note("score") << group.scores.size() << " candidates scored\n";
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  // policy mode
  std::string corpus_dir;
  std::string tokenizer_path;
  std::string vocab_path;
  std::string policy_path;
  std::string split = "eval";  // train | valid | test | eval (valid+test) | all
  bool use_com = false;
  // offline mode
  std::string predictions_path;
  std::string out_path;
};

std::vector<std::size_t> pick_split(const LoadedCorpus& corpus, const std::string& name) {
  const DatasetSplit& s = corpus.split;
  std::vector<std::size_t> ids;
  if (name == "train") ids = s.train;
  else if (name == "valid") ids = s.valid;
  else if (name == "test") ids = s.test;
  else if (name == "eval") {
    ids = s.valid;
    ids.insert(ids.end(), s.test.begin(), s.test.end());
  } else if (name == "all") {
    ids.resize(corpus.records.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  } else {
    throw ConfigError("unknown split '" + name + "' (train|valid|test|eval|all)");
  }
  return ids;
}

EvalReport evaluate_policy_mode(const PipelineConfig& cfg, const EvaluateArgs& a) {
  const LoadedCorpus corpus = load_corpus(a.corpus_dir);
  const MotionTokenizer tokenizer = MotionTokenizer::load(a.tokenizer_path);
  const Vocabulary vocab = Vocabulary::load(a.vocab_path);
  const Policy policy = Policy::load(a.policy_path);
  const RewardEngine engine(cfg.scorer);
  const std::vector<std::size_t> ids = pick_split(corpus, a.split);
  note("evaluate") << ids.size() << " prompts from split '" << a.split << "'\n";
  const EvalInputs in{&policy, &vocab, &tokenizer, &engine, &corpus, ids};
  return evaluate_policy(in, a.use_com ? GenMode::Com : GenMode::Single, cfg.com, cfg.eval,
                         derive_seed(cfg.seed, "evaluate"));
}

/// One line per evaluated sample:
///   understanding: {"task":"und","hyp":"...","refs":["...", ...]}
///   generation:    {"task":"gen","caption":"...","hyp_motion":"p.mfb",
///                   "ref_motion":"p.mfb"}
/// Repeated generation lines with one caption form that prompt's sample set
/// for the within-prompt spread metric.
EvalReport evaluate_offline_mode(const PipelineConfig& cfg, const EvaluateArgs& a,
                                 int threads) {
  std::ifstream in(a.predictions_path);
  if (!in) throw IoFailure("cannot open " + a.predictions_path);
  const fs::path base = fs::path(a.predictions_path).parent_path();
  const RewardEngine engine(cfg.scorer);

  struct GenItem {
    std::string caption;
    fs::path hyp_motion, ref_motion;  // either may be empty
  };
  std::vector<TextEvalItem> text_items;
  std::vector<GenItem> gen_items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError("prediction line " + std::to_string(line_no) +
                        " is not valid JSON: " + e.what());
    }
    const Task task = task_from_name(j.value("task", "und"));
    if (task == Task::Understanding) {
      TextEvalItem item;
      item.hyp = j.value("hyp", std::string{});
      for (const auto& r : j.value("refs", json::array())) item.refs.push_back(r);
      if (item.refs.empty())
        throw ConfigError("prediction line " + std::to_string(line_no) +
                          " has no references");
      text_items.push_back(std::move(item));
    } else {
      GenItem item;
      item.caption = j.value("caption", std::string{});
      const auto path_of = [&](const char* key) -> fs::path {
        if (!j.contains(key) || j[key].is_null()) return {};
        fs::path p = j[key].get<std::string>();
        if (p.is_relative()) p = base / p;
        return p;
      };
      item.hyp_motion = path_of("hyp_motion");
      item.ref_motion = path_of("ref_motion");
      gen_items.push_back(std::move(item));
    }
  }

  // Embeddings are independent per item; compute them index-addressed so the
  // thread count never changes the result.
  struct GenRows {
    std::optional<Eigen::VectorXd> gen, ref, cap;
  };
  std::vector<GenRows> rows(gen_items.size());
  parallel_for(gen_items.size(), threads, [&](std::size_t i) {
    const GenItem& item = gen_items[i];
    if (!item.ref_motion.empty()) rows[i].ref = engine.embed_motion(load_motion(item.ref_motion));
    if (!item.hyp_motion.empty()) {
      rows[i].gen = engine.embed_motion(load_motion(item.hyp_motion));
      rows[i].cap = engine.embed_text_align(item.caption);
    }
  });

  std::vector<Eigen::VectorXd> gen_rows, ref_rows, cap_rows;
  std::map<std::string, std::vector<Eigen::VectorXd>> by_caption;
  for (std::size_t i = 0; i < gen_items.size(); ++i) {
    if (rows[i].ref) ref_rows.push_back(*rows[i].ref);
    if (rows[i].gen) {
      gen_rows.push_back(*rows[i].gen);
      cap_rows.push_back(*rows[i].cap);
      by_caption[gen_items[i].caption].push_back(*rows[i].gen);
    }
  }
  const auto stack = [](const std::vector<Eigen::VectorXd>& r) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r.size()), r.empty() ? 0 : r.front().size());
    for (std::size_t i = 0; i < r.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = r[i];
    return m;
  };

  EvalReport report;
  report.prompts = static_cast<int>(text_items.size() + gen_items.size());
  if (!text_items.empty()) {
    report.bleu1 = corpus_bleu(text_items, 1);
    report.bleu4 = corpus_bleu(text_items, 4);
    report.rouge_l = corpus_rouge_l(text_items);
    report.cider = corpus_cider(text_items);
  }
  const Eigen::MatrixXd gen_m = stack(gen_rows);
  const Eigen::MatrixXd ref_m = stack(ref_rows);
  const Eigen::MatrixXd cap_m = stack(cap_rows);
  const uint64_t seed = derive_seed(cfg.seed, "evaluate");
  if (gen_m.rows() >= 2 && ref_m.rows() >= 2)
    report.fid = frechet_distance(fit_gaussian(gen_m), fit_gaussian(ref_m));
  if (gen_m.rows() >= 2)
    report.diversity_gen =
        diversity(gen_m, cfg.eval.diversity_pairs, derive_seed(seed, "diversity_gen"));
  if (ref_m.rows() >= 2)
    report.diversity_ref =
        diversity(ref_m, cfg.eval.diversity_pairs, derive_seed(seed, "diversity_ref"));
  if (cap_m.rows() >= 1) report.mmdist = mm_dist(cap_m, gen_m);
  if (cap_m.rows() >= cfg.eval.pool_size) {
    const RPrecisionResult rp =
        r_precision(cap_m, gen_m, cfg.eval.pool_size, derive_seed(seed, "r_precision"));
    report.r1 = rp.r1;
    report.r2 = rp.r2;
    report.r3 = rp.r3;
  }
  std::vector<Eigen::MatrixXd> per_prompt;
  for (const auto& [caption, group] : by_caption)
    if (group.size() >= 2) per_prompt.push_back(stack(group));
  if (!per_prompt.empty())
    report.mmodality = mmodality(per_prompt, cfg.eval.mmodality_pair_cap,
                                 derive_seed(seed, "mmodality_pairs"));
  return report;
}

void cmd_evaluate(const GlobalOpts& g, const EvaluateArgs& a) {
  const PipelineConfig cfg = g.load();
  const bool offline = !a.predictions_path.empty();
  const bool live = !a.policy_path.empty() || !a.corpus_dir.empty() ||
                    !a.tokenizer_path.empty() || !a.vocab_path.empty();
  if (offline == live)
    throw ConfigError(
        "exactly one of --predictions (offline) or --policy/--corpus/... (live) is required");
  if (live && (a.policy_path.empty() || a.corpus_dir.empty() || a.tokenizer_path.empty() ||
               a.vocab_path.empty()))
    throw ConfigError("live evaluation needs --corpus, --tokenizer, --vocab and --policy");
  const EvalReport report =
      offline ? evaluate_offline_mode(cfg, a, g.threads) : evaluate_policy_mode(cfg, a);
  write_text(a.out_path, report.to_json().dump(2) + "\n");
  if (!a.out_path.empty()) note("evaluate") << "report -> " << a.out_path << "\n";
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

struct PipelineArgs {
  std::string workdir;
};

void cmd_pipeline(const GlobalOpts& g, const PipelineArgs& a) {
  const PipelineConfig cfg = g.load();
  run_pipeline(cfg, a.workdir, &std::cerr);
  std::cout << (fs::path(a.workdir) / "report.json").string() << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// Argument wiring
// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  CLI::App app{
      "motive: motion tokenization, reward-tuned generation and evaluation.\n"
      "Stage subcommands share seed streams with `pipeline`, so stagewise and\n"
      "integrated runs of one config produce identical artifacts."};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--config", g.config_path, "Pipeline config JSON (defaults used when absent)");
  g.seed_opt = app.add_option("--seed", g.seed, "Master seed override");
  app.add_option("--threads", g.threads,
                 "Worker threads for index-parallel work (offline evaluation); training "
                 "stages are single-threaded so runs stay byte-reproducible");

  std::string stage = "cli";

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write a procedural corpus to disk");
  synth->add_option("--out", synth_args.out_dir, "Corpus directory")->required();
  synth->add_option("--count", synth_args.count, "Record count override");
  synth->add_option("--noise", synth_args.noise, "Additive noise amplitude override");
  synth->callback([&] { stage = "synth"; cmd_synth(g, synth_args); });

  TrainVqArgs vq_args;
  auto* vq = app.add_subcommand("train-vq", "Train the motion tokenizer on a corpus");
  vq->add_option("--corpus", vq_args.corpus_dir, "Corpus directory")->required();
  vq->add_option("--out", vq_args.out_path, "Tokenizer output path");
  vq->callback([&] { stage = "train-vq"; cmd_train_vq(g, vq_args); });

  SftArgs sft_args;
  auto* sft = app.add_subcommand("sft", "Cold-start the policy on supervised traces");
  sft->add_option("--corpus", sft_args.corpus_dir, "Corpus directory")->required();
  sft->add_option("--tokenizer", sft_args.tokenizer_path, "Trained tokenizer")->required();
  sft->add_option("--out-policy", sft_args.out_policy, "Policy output path");
  sft->add_option("--out-vocab", sft_args.out_vocab, "Vocabulary output path");
  sft->callback([&] { stage = "sft"; cmd_sft(g, sft_args); });

  RlArgs rl_args;
  auto* rl = app.add_subcommand("rl", "Group-relative reward tuning against a frozen anchor");
  rl->add_option("--corpus", rl_args.corpus_dir, "Corpus directory")->required();
  rl->add_option("--tokenizer", rl_args.tokenizer_path, "Trained tokenizer")->required();
  rl->add_option("--vocab", rl_args.vocab_path, "Vocabulary")->required();
  rl->add_option("--policy", rl_args.policy_path, "Starting policy (also the KL anchor)")
      ->required();
  rl->add_option("--out", rl_args.out_policy, "Tuned policy output path");
  rl->add_option("--progress", rl_args.progress_path, "Optional per-epoch JSONL trace");
  rl->callback([&] { stage = "rl"; cmd_rl(g, rl_args); });

  GenerateArgs gen_args;
  auto* gen = app.add_subcommand(
      "generate", "Generate motion from a caption, or describe a motion file");
  gen->add_option("--tokenizer", gen_args.tokenizer_path, "Trained tokenizer")->required();
  gen->add_option("--vocab", gen_args.vocab_path, "Vocabulary")->required();
  gen->add_option("--policy", gen_args.policy_path, "Policy checkpoint")->required();
  gen->add_option("--caption", gen_args.caption, "Caption to generate motion for");
  gen->add_option("--motion", gen_args.motion_path, "Motion file to describe");
  gen->add_option("--channel-map", gen_args.channel_map_path,
                  "Channel map JSON attached to motions for plausibility checks");
  gen->add_option("--motion-out", gen_args.motion_out, "Write the decoded winner motion here");
  gen->add_flag("--com", gen_args.use_com, "Sample-prune-refine search instead of one pass");
  gen->add_flag("--trace", gen_args.show_trace, "Print every search candidate to stderr");
  gen->add_flag("--json", gen_args.as_json, "Emit the full result as JSON on stdout");
  gen->add_option("--k", gen_args.k, "Search: initial candidate count");
  gen->add_option("--t", gen_args.rounds, "Search: refinement rounds");
  gen->add_option("--keep", gen_args.keep_fraction, "Search: survivor fraction per round");
  gen->add_option("--max-new", gen_args.max_new_tokens, "Sampling budget in tokens");
  gen->add_option("--temperature", gen_args.temperature, "Sampling temperature (0 = greedy)");
  gen->callback([&] { stage = "generate"; cmd_generate(g, gen_args); });

  ScoreArgs score_args;
  auto* score = app.add_subcommand(
      "score", "Score candidate completions (JSONL in, one report row per line out)");
  score->add_option("--candidates", score_args.candidates_path,
                    "JSONL file; each line {\"text\": ..., \"motion\": optional path}")
      ->required();
  score->add_option("--caption", score_args.caption, "Prompt caption the candidates answer")
      ->required();
  score->add_option("--task", score_args.task, "und (describe) or gen (generate)")
      ->check(CLI::IsMember({"und", "gen"}));
  score->add_option("--reference", score_args.reference,
                    "Reference answer text enabling the semantic component");
  score->add_option("--motion", score_args.motion_path,
                    "Input motion being described (understanding)");
  score->add_option("--channel-map", score_args.channel_map_path, "Channel map for motions");
  score->add_option("--out", score_args.out_path, "Report JSONL path (stdout when absent)");
  score->callback([&] { stage = "score"; cmd_score(g, score_args); });

  EvaluateArgs eval_args;
  auto* eval = app.add_subcommand(
      "evaluate", "Metric report: run a policy over a corpus split, or score offline "
                  "prediction/reference JSONL");
  eval->add_option("--corpus", eval_args.corpus_dir, "Corpus directory (live mode)");
  eval->add_option("--tokenizer", eval_args.tokenizer_path, "Trained tokenizer (live mode)");
  eval->add_option("--vocab", eval_args.vocab_path, "Vocabulary (live mode)");
  eval->add_option("--policy", eval_args.policy_path, "Policy checkpoint (live mode)");
  eval->add_option("--split", eval_args.split, "train|valid|test|eval|all (default eval)");
  eval->add_flag("--com", eval_args.use_com, "Generate with search instead of one pass");
  eval->add_option("--predictions", eval_args.predictions_path,
                   "Offline mode: prediction/reference JSONL");
  eval->add_option("--out", eval_args.out_path, "Report JSON path (stdout when absent)");
  eval->callback([&] { stage = "evaluate"; cmd_evaluate(g, eval_args); });

  PipelineArgs pipe_args;
  auto* pipe = app.add_subcommand(
      "pipeline", "Full run in one working directory: corpus, tokenizer, cold start, "
                  "tuning, staged evaluation report");
  pipe->add_option("--workdir", pipe_args.workdir, "Working directory (locked while running)")
      ->required();
  pipe->callback([&] { stage = "pipeline"; cmd_pipeline(g, pipe_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "[" << stage << "] error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "[" << stage << "] error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
