#include "motive/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace motive {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config IO
// ---------------------------------------------------------------------------

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw ConfigError("invalid json in " + path.string());

  PipelineConfig cfg;
  try {
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("synth")) {
      const auto& s = j["synth"];
      cfg.synth.count = s.value("count", cfg.synth.count);
      cfg.synth.fps = s.value("fps", cfg.synth.fps);
      cfg.synth.min_frames = s.value("min_frames", cfg.synth.min_frames);
      cfg.synth.max_frames = s.value("max_frames", cfg.synth.max_frames);
      cfg.synth.joint_limit = s.value("joint_limit", cfg.synth.joint_limit);
      cfg.synth.vel_threshold = s.value("vel_threshold", cfg.synth.vel_threshold);
      cfg.synth.noise = s.value("noise", cfg.synth.noise);
    }
    if (j.contains("split")) {
      const auto& s = j["split"];
      cfg.train_ratio = s.value("train", cfg.train_ratio);
      cfg.valid_ratio = s.value("valid", cfg.valid_ratio);
      cfg.test_ratio = s.value("test", cfg.test_ratio);
    }
    if (j.contains("tokenizer")) {
      const auto& t = j["tokenizer"];
      cfg.tok_shape.codebook_size = t.value("codebook_size", cfg.tok_shape.codebook_size);
      cfg.tok_shape.latent_dim = t.value("latent_dim", cfg.tok_shape.latent_dim);
      cfg.tok_shape.window = t.value("window", cfg.tok_shape.window);
      cfg.tok_shape.frame_dim = t.value("frame_dim", cfg.tok_shape.frame_dim);
      cfg.tok_train.lr = t.value("lr", cfg.tok_train.lr);
      cfg.tok_train.epochs = t.value("epochs", cfg.tok_train.epochs);
      cfg.tok_train.ema_decay = t.value("ema_decay", cfg.tok_train.ema_decay);
      cfg.tok_train.weights.commit_beta =
          t.value("commit_beta", cfg.tok_train.weights.commit_beta);
      cfg.tok_train.weights.velocity_weight =
          t.value("velocity_weight", cfg.tok_train.weights.velocity_weight);
      cfg.tok_train.init_codebook_from_data =
          t.value("init_codebook_from_data", cfg.tok_train.init_codebook_from_data);
    }
    if (j.contains("policy")) {
      const auto& p = j["policy"];
      cfg.policy_features = p.value("features", cfg.policy_features);
      cfg.policy_context = p.value("context", cfg.policy_context);
    }
    if (j.contains("sft")) {
      const auto& s = j["sft"];
      cfg.sft.lr = s.value("lr", cfg.sft.lr);
      cfg.sft.epochs = s.value("epochs", cfg.sft.epochs);
    }
    if (j.contains("rl")) {
      const auto& r = j["rl"];
      cfg.rl.group_size = r.value("group_size", cfg.rl.group_size);
      cfg.rl.lr = r.value("lr", cfg.rl.lr);
      cfg.rl.beta_kl = r.value("beta_kl", cfg.rl.beta_kl);
      cfg.rl.epochs = r.value("epochs", cfg.rl.epochs);
      cfg.rl.max_new_tokens = r.value("max_new_tokens", cfg.rl.max_new_tokens);
      cfg.rl.temperature = r.value("temperature", cfg.rl.temperature);
      cfg.rl.eps = r.value("eps", cfg.rl.eps);
    }
    if (j.contains("com")) {
      const auto& c = j["com"];
      cfg.com.k = c.value("k", cfg.com.k);
      cfg.com.t = c.value("t", cfg.com.t);
      cfg.com.keep_fraction = c.value("keep_fraction", cfg.com.keep_fraction);
      cfg.com.max_new_tokens = c.value("max_new_tokens", cfg.com.max_new_tokens);
      cfg.com.temperature = c.value("temperature", cfg.com.temperature);
      cfg.com.refine_temperature = c.value("refine_temperature", cfg.com.refine_temperature);
      cfg.com_enabled = c.value("enabled", cfg.com_enabled);
    }
    if (j.contains("scorer")) {
      const auto& s = j["scorer"];
      if (s.contains("phys")) {
        const auto& p = s["phys"];
        cfg.scorer.phys.lambda_joint = p.value("lambda_joint", cfg.scorer.phys.lambda_joint);
        cfg.scorer.phys.lambda_vel = p.value("lambda_vel", cfg.scorer.phys.lambda_vel);
        cfg.scorer.phys.vel_threshold = p.value("vel_threshold", cfg.scorer.phys.vel_threshold);
      }
      if (s.contains("text_embedder")) {
        const auto& t = s["text_embedder"];
        cfg.scorer.text_embedder.dim = t.value("dim", cfg.scorer.text_embedder.dim);
        cfg.scorer.text_embedder.seed = t.value("seed", cfg.scorer.text_embedder.seed);
        cfg.scorer.text_embedder.ngram = t.value("ngram", cfg.scorer.text_embedder.ngram);
      }
      if (s.contains("motion_embedder")) {
        const auto& m = s["motion_embedder"];
        cfg.scorer.motion_embedder.dim = m.value("dim", cfg.scorer.motion_embedder.dim);
        cfg.scorer.motion_embedder.seed = m.value("seed", cfg.scorer.motion_embedder.seed);
      }
      if (s.contains("nli")) {
        const auto& n = s["nli"];
        cfg.scorer.nli.neutral = n.value("neutral", cfg.scorer.nli.neutral);
        cfg.scorer.nli.negation_penalty =
            n.value("negation_penalty", cfg.scorer.nli.negation_penalty);
      }
      cfg.scorer.norm_eps = s.value("norm_eps", cfg.scorer.norm_eps);
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      cfg.eval.pool_size = e.value("pool_size", cfg.eval.pool_size);
      cfg.eval.diversity_pairs = e.value("diversity_pairs", cfg.eval.diversity_pairs);
      cfg.eval.mmodality_prompts = e.value("mmodality_prompts", cfg.eval.mmodality_prompts);
      cfg.eval.mmodality_samples = e.value("mmodality_samples", cfg.eval.mmodality_samples);
      cfg.eval.mmodality_pair_cap = e.value("mmodality_pair_cap", cfg.eval.mmodality_pair_cap);
      cfg.eval.max_new_tokens = e.value("max_new_tokens", cfg.eval.max_new_tokens);
      cfg.eval.temperature = e.value("temperature", cfg.eval.temperature);
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return cfg;
}

void save_pipeline_config(const PipelineConfig& cfg, const fs::path& path) {
  json j;
  j["seed"] = cfg.seed;
  j["synth"] = {{"count", cfg.synth.count},
                {"fps", cfg.synth.fps},
                {"min_frames", cfg.synth.min_frames},
                {"max_frames", cfg.synth.max_frames},
                {"joint_limit", cfg.synth.joint_limit},
                {"vel_threshold", cfg.synth.vel_threshold},
                {"noise", cfg.synth.noise}};
  j["split"] = {{"train", cfg.train_ratio}, {"valid", cfg.valid_ratio}, {"test", cfg.test_ratio}};
  j["tokenizer"] = {{"codebook_size", cfg.tok_shape.codebook_size},
                    {"latent_dim", cfg.tok_shape.latent_dim},
                    {"window", cfg.tok_shape.window},
                    {"frame_dim", cfg.tok_shape.frame_dim},
                    {"lr", cfg.tok_train.lr},
                    {"epochs", cfg.tok_train.epochs},
                    {"ema_decay", cfg.tok_train.ema_decay},
                    {"commit_beta", cfg.tok_train.weights.commit_beta},
                    {"velocity_weight", cfg.tok_train.weights.velocity_weight},
                    {"init_codebook_from_data", cfg.tok_train.init_codebook_from_data}};
  j["policy"] = {{"features", cfg.policy_features}, {"context", cfg.policy_context}};
  j["sft"] = {{"lr", cfg.sft.lr}, {"epochs", cfg.sft.epochs}};
  j["rl"] = {{"group_size", cfg.rl.group_size}, {"lr", cfg.rl.lr},
             {"beta_kl", cfg.rl.beta_kl},       {"epochs", cfg.rl.epochs},
             {"max_new_tokens", cfg.rl.max_new_tokens}, {"temperature", cfg.rl.temperature},
             {"eps", cfg.rl.eps}};
  j["com"] = {{"k", cfg.com.k},
              {"t", cfg.com.t},
              {"keep_fraction", cfg.com.keep_fraction},
              {"max_new_tokens", cfg.com.max_new_tokens},
              {"temperature", cfg.com.temperature},
              {"refine_temperature", cfg.com.refine_temperature},
              {"enabled", cfg.com_enabled}};
  j["scorer"] = {{"text_embedder",
                  {{"dim", cfg.scorer.text_embedder.dim},
                   {"seed", cfg.scorer.text_embedder.seed},
                   {"ngram", cfg.scorer.text_embedder.ngram}}},
                 {"motion_embedder",
                  {{"dim", cfg.scorer.motion_embedder.dim},
                   {"seed", cfg.scorer.motion_embedder.seed}}},
                 {"nli",
                  {{"neutral", cfg.scorer.nli.neutral},
                   {"negation_penalty", cfg.scorer.nli.negation_penalty}}},
                 {"phys",
                  {{"lambda_joint", cfg.scorer.phys.lambda_joint},
                   {"lambda_vel", cfg.scorer.phys.lambda_vel},
                   {"vel_threshold", cfg.scorer.phys.vel_threshold}}},
                 {"norm_eps", cfg.scorer.norm_eps}};
  j["eval"] = {{"pool_size", cfg.eval.pool_size},
               {"diversity_pairs", cfg.eval.diversity_pairs},
               {"mmodality_prompts", cfg.eval.mmodality_prompts},
               {"mmodality_samples", cfg.eval.mmodality_samples},
               {"mmodality_pair_cap", cfg.eval.mmodality_pair_cap},
               {"max_new_tokens", cfg.eval.max_new_tokens},
               {"temperature", cfg.eval.temperature}};

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoFailure("write error on " + path.string());
}

// ---------------------------------------------------------------------------
// Record plumbing
// ---------------------------------------------------------------------------

std::vector<int> context_ids_for(const CoTRecord& rec, const Vocabulary& vocab,
                                 const MotionTokenizer& tokenizer,
                                 const MotionSequence* motion) {
  if (rec.task == Task::Understanding) {
    if (motion == nullptr)
      throw ConfigError("understanding record needs its motion for the context");
    std::vector<int> ids;
    for (int code : tokenizer.tokenize(*motion)) ids.push_back(vocab.motion_token_id(code));
    return ids;
  }
  return vocab.encode_text(rec.caption);
}

std::vector<int> sft_sequence_for(const CoTRecord& rec, const Vocabulary& vocab,
                                  const MotionTokenizer& tokenizer,
                                  const MotionSequence* motion) {
  const std::vector<int> context = context_ids_for(rec, vocab, tokenizer, motion);
  const std::vector<int> think = vocab.encode_text(rec.think);
  std::vector<int> answer;
  if (rec.task == Task::Understanding) {
    if (!rec.answer_text) throw ConfigError("understanding record without answer_text");
    answer = vocab.encode_text(*rec.answer_text);
  } else {
    if (motion == nullptr) throw ConfigError("generation record needs its target motion");
    for (int code : tokenizer.tokenize(*motion)) answer.push_back(vocab.motion_token_id(code));
  }
  return wrap_sequence(vocab, context, think, answer);
}

PromptCase prompt_case_for(const CoTRecord& rec, const Vocabulary& vocab,
                           const MotionTokenizer& tokenizer, const MotionSequence* motion,
                           bool with_reference) {
  PromptCase pc;
  pc.prompt_ids = wrap_prompt(vocab, context_ids_for(rec, vocab, tokenizer, motion));
  pc.ctx.caption = rec.caption;
  pc.ctx.task = rec.task;
  if (rec.task == Task::Understanding) {
    if (with_reference && rec.answer_text) pc.ctx.reference_text = rec.answer_text;
    if (motion != nullptr) pc.ctx.input_motion = *motion;
  }
  return pc;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

nlohmann::json EvalReport::to_json() const {
  const auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  json j;
  j["R@1"] = opt(r1);
  j["R@2"] = opt(r2);
  j["R@3"] = opt(r3);
  j["FID"] = opt(fid);
  j["MMDist"] = opt(mmdist);
  j["Diversity"] = opt(diversity_gen);
  j["Diversity_ref"] = opt(diversity_ref);
  j["MModality"] = opt(mmodality);
  j["BLEU1"] = opt(bleu1);
  j["BLEU4"] = opt(bleu4);
  j["ROUGE_L"] = opt(rouge_l);
  j["CIDEr"] = opt(cider);
  // No pretrained contextual text encoder exists in this build, so the
  // similarity it would compute cannot be reported honestly.
  j["BERTScore"] = nullptr;
  j["mean_reward"] = mean_reward;
  j["prompts"] = prompts;
  j["malformed"] = malformed;
  j["decode_calls"] = decode_calls;
  return j;
}

namespace {

Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& rows) {
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i];
  return m;
}

ComResult generate_one(const EvalInputs& in, const PromptCase& pc, const RealizeFn& realize,
                       const GroupScoreFn& scorer, GenMode mode, const ComConfig& com_cfg,
                       const EvalConfig& eval_cfg, uint64_t seed) {
  if (mode == GenMode::Com) {
    ComConfig cc = com_cfg;
    cc.seed = seed;
    return com_search(*in.policy, pc, realize, scorer, *in.vocab, cc);
  }
  return single_pass(*in.policy, pc, realize, scorer, eval_cfg.max_new_tokens,
                     eval_cfg.temperature, seed);
}

}  // namespace

EvalReport evaluate_policy(const EvalInputs& in, GenMode mode, const ComConfig& com_cfg,
                           const EvalConfig& eval_cfg, uint64_t seed) {
  if (!in.policy || !in.vocab || !in.tokenizer || !in.engine || !in.corpus)
    throw ConfigError("evaluation inputs are incomplete");
  if (in.eval_ids.empty()) throw EmptyGroup("no evaluation prompts");
  const LoadedCorpus& corpus = *in.corpus;

  const float fps = corpus.motions.empty() ? 30.f : corpus.motions.front().fps;
  const RealizeFn realize = make_realizer(*in.vocab, in.tokenizer, fps, corpus.channel_map);

  EvalReport report;
  std::vector<TextEvalItem> text_items;
  std::vector<Eigen::VectorXd> gen_rows, ref_rows, cap_rows;

  for (std::size_t idx : in.eval_ids) {
    const CoTRecord& rec = corpus.records[idx];
    const MotionSequence* motion = &corpus.motions[idx];
    const PromptCase pc = prompt_case_for(rec, *in.vocab, *in.tokenizer, motion, true);
    const GroupScoreFn scorer = make_raw_scorer(*in.engine, pc.ctx);
    const ComResult res = generate_one(in, pc, realize, scorer, mode, com_cfg, eval_cfg,
                                       derive_seed(seed, "eval_prompt", idx));

    report.mean_reward += res.best_score.raw_mean;
    if (res.degraded) ++report.malformed;
    report.decode_calls += res.decode_calls;
    ++report.prompts;

    if (rec.task == Task::Understanding) {
      if (!rec.answer_text) continue;
      const CotParse parse = parse_cot(res.best.text);
      text_items.push_back({{*rec.answer_text}, parse.ok() ? parse.answer : std::string{}});
    } else {
      ref_rows.push_back(in.engine->embed_motion(*motion));
      if (res.best.motion) {
        gen_rows.push_back(in.engine->embed_motion(*res.best.motion));
        cap_rows.push_back(in.engine->embed_text_align(rec.caption));
      }
    }
  }
  report.mean_reward /= static_cast<double>(report.prompts);

  if (!text_items.empty()) {
    report.bleu1 = corpus_bleu(text_items, 1);
    report.bleu4 = corpus_bleu(text_items, 4);
    report.rouge_l = corpus_rouge_l(text_items);
    report.cider = corpus_cider(text_items);
  }

  const Eigen::MatrixXd gen_m = stack_rows(gen_rows);
  const Eigen::MatrixXd ref_m = stack_rows(ref_rows);
  const Eigen::MatrixXd cap_m = stack_rows(cap_rows);
  if (gen_m.rows() >= 2 && ref_m.rows() >= 2)
    report.fid = frechet_distance(fit_gaussian(gen_m), fit_gaussian(ref_m));
  if (gen_m.rows() >= 2)
    report.diversity_gen =
        diversity(gen_m, eval_cfg.diversity_pairs, derive_seed(seed, "diversity_gen"));
  if (ref_m.rows() >= 2)
    report.diversity_ref =
        diversity(ref_m, eval_cfg.diversity_pairs, derive_seed(seed, "diversity_ref"));
  if (cap_m.rows() >= 1) report.mmdist = mm_dist(cap_m, gen_m);
  if (cap_m.rows() >= eval_cfg.pool_size) {
    const RPrecisionResult rp =
        r_precision(cap_m, gen_m, eval_cfg.pool_size, derive_seed(seed, "r_precision"));
    report.r1 = rp.r1;
    report.r2 = rp.r2;
    report.r3 = rp.r3;
  }

  // Within-prompt spread: regenerate the first few generation prompts a few
  // times each and measure pairwise distances.
  std::vector<Eigen::MatrixXd> per_prompt;
  int used_prompts = 0;
  for (std::size_t idx : in.eval_ids) {
    if (used_prompts >= eval_cfg.mmodality_prompts) break;
    const CoTRecord& rec = corpus.records[idx];
    if (rec.task != Task::Generation) continue;
    ++used_prompts;
    const PromptCase pc =
        prompt_case_for(rec, *in.vocab, *in.tokenizer, &corpus.motions[idx], true);
    const GroupScoreFn scorer = make_raw_scorer(*in.engine, pc.ctx);
    std::vector<Eigen::VectorXd> rows;
    for (int s = 0; s < eval_cfg.mmodality_samples; ++s) {
      const ComResult res =
          generate_one(in, pc, realize, scorer, mode, com_cfg, eval_cfg,
                       derive_seed(seed, "mmodality_sample", idx, static_cast<uint64_t>(s)));
      report.decode_calls += res.decode_calls;
      if (res.best.motion) rows.push_back(in.engine->embed_motion(*res.best.motion));
    }
    if (rows.size() >= 2) per_prompt.push_back(stack_rows(rows));
  }
  if (!per_prompt.empty())
    report.mmodality = mmodality(per_prompt, eval_cfg.mmodality_pair_cap,
                                 derive_seed(seed, "mmodality_pairs"));
  return report;
}

// ---------------------------------------------------------------------------
// Workdir lock
// ---------------------------------------------------------------------------

WorkdirLock::WorkdirLock(const fs::path& workdir) {
  fs::create_directories(workdir);
  lock_path_ = workdir / ".motive_lock";
  fd_ = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd_ < 0) {
    if (errno == EEXIST)
      throw PipelineLocked("workdir is locked by " + lock_path_.string() +
                           "; remove the file if no other run is active");
    throw IoFailure("cannot create " + lock_path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  if (::write(fd_, pid.data(), pid.size()) < 0) {
    // lock still holds; the pid note is best effort
  }
}

WorkdirLock::~WorkdirLock() {
  if (fd_ >= 0) {
    ::close(fd_);
    std::error_code ec;
    fs::remove(lock_path_, ec);
  }
}

// ---------------------------------------------------------------------------
// End-to-end run
// ---------------------------------------------------------------------------

PipelineResult run_pipeline(const PipelineConfig& cfg, const fs::path& workdir,
                            std::ostream* log) {
  const auto say = [log](const std::string& line) {
    if (log) *log << line << "\n" << std::flush;
  };
  WorkdirLock lock(workdir);

  say("[corpus] synthesizing " + std::to_string(cfg.synth.count) + " items");
  SynthConfig synth_cfg = cfg.synth;
  synth_cfg.seed = derive_seed(cfg.seed, "synth");
  const SynthCorpus corpus = synth_corpus(synth_cfg);
  write_corpus(corpus, workdir / "corpus", cfg.train_ratio, cfg.valid_ratio, cfg.test_ratio,
               derive_seed(cfg.seed, "split"));
  const LoadedCorpus loaded = load_corpus(workdir / "corpus");

  PipelineResult result;

  say("[tokenizer] training");
  std::vector<MotionSequence> train_motions;
  for (std::size_t id : loaded.split.train) train_motions.push_back(loaded.motions[id]);
  MotionTokenizer tokenizer(cfg.tok_shape, derive_seed(cfg.seed, "tokenizer_init"));
  TokenizerTrainConfig tok_train = cfg.tok_train;
  tok_train.seed = derive_seed(cfg.seed, "tokenizer_train");
  result.tok_report = train_tokenizer(tokenizer, train_motions, tok_train);
  tokenizer.save(workdir / "tokenizer.mtok");
  // Every stage below resumes from the artifact it just wrote, so an
  // integrated run is bit-identical to replaying the standalone stages.
  tokenizer = MotionTokenizer::load(workdir / "tokenizer.mtok");

  say("[vocab] building");
  std::vector<std::string> texts;
  for (std::size_t id : loaded.split.train) {
    const CoTRecord& rec = loaded.records[id];
    texts.push_back(rec.caption);
    texts.push_back(rec.think);
    if (rec.answer_text) texts.push_back(*rec.answer_text);
  }
  Vocabulary::build(texts, cfg.tok_shape.codebook_size).save(workdir / "vocab.json");
  const Vocabulary vocab = Vocabulary::load(workdir / "vocab.json");

  say("[sft] cold start");
  Policy policy({cfg.policy_features, vocab.size(), cfg.policy_context},
                derive_seed(cfg.seed, "policy_init"));
  std::vector<std::vector<int>> sft_seqs;
  for (std::size_t id : loaded.split.train)
    sft_seqs.push_back(sft_sequence_for(loaded.records[id], vocab, tokenizer,
                                        &loaded.motions[id]));
  SftConfig sft_cfg = cfg.sft;
  sft_cfg.seed = derive_seed(cfg.seed, "sft");
  result.sft_report = train_sft(policy, sft_seqs, sft_cfg);
  policy.save(workdir / "policy_sft.mpol");
  policy = Policy::load(workdir / "policy_sft.mpol");

  const Policy reference = policy;  // frozen snapshot of the cold-start model
  const RewardEngine engine(cfg.scorer);
  const RealizeFn realize =
      make_realizer(vocab, &tokenizer, cfg.synth.fps, loaded.channel_map);
  const bool rl_enabled = cfg.rl.epochs > 0;
  if (rl_enabled) {
    say("[rl] group-relative tuning");
    std::vector<PromptCase> prompts;
    for (std::size_t id : loaded.split.train)
      prompts.push_back(
          prompt_case_for(loaded.records[id], vocab, tokenizer, &loaded.motions[id], true));
    GrpoConfig rl_cfg = cfg.rl;
    rl_cfg.seed = derive_seed(cfg.seed, "rl");
    result.rl_report = train_rl(policy, reference, prompts, engine, realize, rl_cfg);
    policy.save(workdir / "policy_rl.mpol");
    policy = Policy::load(workdir / "policy_rl.mpol");
    std::ofstream progress(workdir / "rl_progress.jsonl", std::ios::trunc);
    for (const auto& row : result.rl_report.trace) {
      json j = {{"epoch", row.epoch},
                {"mean_reward", row.mean_reward},
                {"mean_kl", row.mean_kl},
                {"grad_norm", row.grad_norm}};
      progress << j.dump() << "\n";
    }
  } else {
    say("[rl] skipped (epochs 0)");
  }

  say("[eval] staged comparison");
  std::vector<std::size_t> eval_ids = loaded.split.valid;
  eval_ids.insert(eval_ids.end(), loaded.split.test.begin(), loaded.split.test.end());
  EvalInputs sft_in{&reference, &vocab, &tokenizer, &engine, &loaded, eval_ids};
  EvalInputs latest_in{&policy, &vocab, &tokenizer, &engine, &loaded, eval_ids};
  result.sft_eval = evaluate_policy(sft_in, GenMode::Single, cfg.com, cfg.eval,
                                    derive_seed(cfg.seed, "eval_sft"));
  if (rl_enabled)
    result.rl_eval = evaluate_policy(latest_in, GenMode::Single, cfg.com, cfg.eval,
                                     derive_seed(cfg.seed, "eval_rl"));
  if (cfg.com_enabled)
    result.com_eval = evaluate_policy(latest_in, GenMode::Com, cfg.com, cfg.eval,
                                      derive_seed(cfg.seed, "eval_com"));

  // Insertion order is the stage order, so the serialized rows read
  // cold start -> with tuning -> with search.
  ordered_json report;
  report["seed"] = cfg.seed;
  ordered_json rows;
  rows["sft_only"] = result.sft_eval.to_json();
  if (rl_enabled) rows["wo_com"] = result.rl_eval.to_json();
  if (cfg.com_enabled) rows["full"] = result.com_eval.to_json();
  report["rows"] = rows;
  {
    ordered_json trace = ordered_json::array();
    for (const auto& l : result.tok_report.trace)
      trace.push_back({{"total", l.total},
                       {"reconstruct", l.reconstruct},
                       {"commit", l.commit},
                       {"embed", l.embed}});
    report["tokenizer_trace"] = trace;
  }
  report["sft_trace"] = result.sft_report.loss_trace;
  {
    ordered_json trace = ordered_json::array();
    for (const auto& row : result.rl_report.trace)
      trace.push_back({{"epoch", row.epoch},
                       {"mean_reward", row.mean_reward},
                       {"mean_kl", row.mean_kl},
                       {"grad_norm", row.grad_norm}});
    report["rl_trace"] = trace;
  }
  std::ofstream out(workdir / "report.json", std::ios::trunc);
  if (!out) throw IoFailure("cannot open report.json for writing");
  out << report.dump(2) << "\n";
  say("[done] report written");
  return result;
}

}  // namespace motive
