#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "motive/com.hpp"

using namespace motive;

namespace {

// Toy world with three motion codes so generation rollouts can decode.
struct SearchWorld {
  Vocabulary vocab{{"turns", "waves"}, 3};
  MotionTokenizer tokenizer{{3, 2, 2, 2}, 3};
  ChannelMap map;
  RealizeFn realize;
  PromptCase prompt;

  SearchWorld() {
    map.joint_angle_channels = {{0, -5.f, 5.f}};
    map.velocity_channels = {1};
    realize = make_realizer(vocab, &tokenizer, 20.f, map);
    prompt.prompt_ids = wrap_prompt(vocab, vocab.encode_text("waves"));
    prompt.ctx.caption = "waves";
    prompt.ctx.task = Task::Generation;
  }
};

// Scripted scorer: value depends only on the text, recorded per call batch.
GroupScoreFn text_length_scorer() {
  return [](std::span<const Candidate> group) {
    std::vector<CandidateScore> out(group.size());
    for (std::size_t i = 0; i < group.size(); ++i) {
      out[i].components.well_formed = true;
      out[i].raw_mean = static_cast<double>(group[i].text.size() % 17);
      out[i].composite = out[i].raw_mean;
    }
    return out;
  };
}

GroupScoreFn constant_scorer(double value, bool well_formed) {
  return [value, well_formed](std::span<const Candidate> group) {
    std::vector<CandidateScore> out(group.size());
    for (CandidateScore& s : out) {
      s.components.well_formed = well_formed;
      s.raw_mean = value;
      s.composite = value;
    }
    return out;
  };
}

}  // namespace

TEST_SUITE("com") {

TEST_CASE("pool growth and decode accounting follow the schedule") {
  SearchWorld w;
  Policy policy({64, w.vocab.size(), 3}, 0);
  ComConfig cfg;
  cfg.k = 8;
  cfg.t = 2;
  cfg.keep_fraction = 0.5;
  cfg.max_new_tokens = 12;
  cfg.seed = 3;
  const ComResult res = com_search(policy, w.prompt, w.realize, text_length_scorer(),
                                   w.vocab, cfg);

  // each round truncates the pool to its ceil(keep * size) survivors and
  // spawns one refinement per survivor: 8 fresh, then 4, then 4 again
  CHECK(res.decode_calls == 16);
  CHECK(res.decode_calls <= cfg.k * (1 + cfg.t));
  CHECK(res.trace.size() == 16);

  std::map<int, int> per_round;
  for (const ComCandidateTrace& t : res.trace) ++per_round[t.round];
  CHECK(per_round[0] == 8);
  CHECK(per_round[1] == 4);
  CHECK(per_round[2] == 4);

  // refinements name a surviving earlier candidate as origin
  for (const ComCandidateTrace& t : res.trace) {
    if (t.round == 0) {
      CHECK(t.origin == -1);
    } else {
      CHECK(t.origin >= 0);
      CHECK(t.origin < t.index);
      CHECK(res.trace[static_cast<std::size_t>(t.origin)].survivor);
    }
  }

  // the winner is the raw-score argmax over everything ever created,
  // earliest creation index on ties
  int best = 0;
  for (int i = 1; i < static_cast<int>(res.trace.size()); ++i)
    if (res.trace[static_cast<std::size_t>(i)].raw_score >
        res.trace[static_cast<std::size_t>(best)].raw_score)
      best = i;
  CHECK(res.best_score.raw_mean == res.trace[static_cast<std::size_t>(best)].raw_score);
  CHECK(res.best.text == res.trace[static_cast<std::size_t>(best)].text);
}

TEST_CASE("constant scores keep the earliest candidate as winner") {
  SearchWorld w;
  Policy policy({64, w.vocab.size(), 3}, 0);
  ComConfig cfg;
  cfg.k = 4;
  cfg.t = 1;
  cfg.max_new_tokens = 8;
  cfg.seed = 9;
  const ComResult res = com_search(policy, w.prompt, w.realize, constant_scorer(0.5, true),
                                   w.vocab, cfg);
  REQUIRE(!res.trace.empty());
  CHECK(res.best.text == res.trace.front().text);
  CHECK_FALSE(res.degraded);
}

TEST_CASE("an all-malformed pool flags degradation") {
  SearchWorld w;
  Policy policy({64, w.vocab.size(), 3}, 0);
  ComConfig cfg;
  cfg.k = 3;
  cfg.t = 1;
  cfg.max_new_tokens = 8;
  cfg.seed = 1;
  const ComResult res = com_search(policy, w.prompt, w.realize, constant_scorer(-1.0, false),
                                   w.vocab, cfg);
  CHECK(res.degraded);
}

TEST_CASE("search is deterministic in the seed") {
  SearchWorld w;
  Policy policy({64, w.vocab.size(), 3}, 0);
  ComConfig cfg;
  cfg.k = 6;
  cfg.t = 2;
  cfg.max_new_tokens = 10;
  cfg.seed = 14;
  const ComResult a = com_search(policy, w.prompt, w.realize, text_length_scorer(), w.vocab, cfg);
  const ComResult b = com_search(policy, w.prompt, w.realize, text_length_scorer(), w.vocab, cfg);
  CHECK(a.best_ids == b.best_ids);
  CHECK(a.best_score.raw_mean == b.best_score.raw_mean);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].text == b.trace[i].text);

  cfg.seed = 15;
  const ComResult c = com_search(policy, w.prompt, w.realize, text_length_scorer(), w.vocab, cfg);
  bool any_diff = c.trace.size() != a.trace.size();
  for (std::size_t i = 0; !any_diff && i < a.trace.size(); ++i)
    any_diff = a.trace[i].text != c.trace[i].text;
  CHECK(any_diff);
}

TEST_CASE("refinements keep the survivor's reasoning prefix") {
  SearchWorld w;
  Policy policy({64, w.vocab.size(), 3}, 0);

  // capture ids per realized candidate in creation order
  std::vector<std::vector<int>> seen;
  RealizeFn recorder = [&](Task task, std::span<const int> ids) {
    seen.emplace_back(ids.begin(), ids.end());
    return w.realize(task, ids);
  };

  ComConfig cfg;
  cfg.k = 4;
  cfg.t = 1;
  cfg.keep_fraction = 0.5;
  cfg.max_new_tokens = 10;
  cfg.seed = 2;
  const ComResult res = com_search(policy, w.prompt, recorder, text_length_scorer(),
                                   w.vocab, cfg);
  REQUIRE(seen.size() == res.trace.size());

  const int close = w.vocab.think_close_id();
  for (const ComCandidateTrace& t : res.trace) {
    if (t.round == 0) continue;
    const std::vector<int>& child = seen[static_cast<std::size_t>(t.index)];
    const std::vector<int>& parent = seen[static_cast<std::size_t>(t.origin)];
    // prefix ends right after the parent's first reasoning close tag past
    // the prompt; parents without one contribute the bare prompt
    std::size_t cut = w.prompt.prompt_ids.size();
    bool found = false;
    for (std::size_t i = cut; i < parent.size(); ++i)
      if (parent[i] == close) {
        cut = i + 1;
        found = true;
        break;
      }
    if (!found) cut = w.prompt.prompt_ids.size();
    REQUIRE(child.size() >= cut);
    for (std::size_t i = 0; i < cut; ++i) {
      const std::vector<int>& base = found ? parent : w.prompt.prompt_ids;
      CHECK(child[i] == base[i]);
    }
  }
}

TEST_CASE("single pass produces one scored candidate") {
  SearchWorld w;
  Policy policy({64, w.vocab.size(), 3}, 0);
  const ComResult res =
      single_pass(policy, w.prompt, w.realize, text_length_scorer(), 10, 1.0, 77);
  CHECK(res.decode_calls == 1);
  REQUIRE(res.trace.size() == 1);
  CHECK(res.trace.front().round == 0);
  CHECK(res.best.text == res.trace.front().text);
  CHECK(res.best_prompt_len == w.prompt.prompt_ids.size());
}

TEST_CASE("a one-candidate zero-round search degenerates to a single draw") {
  SearchWorld w;
  Policy policy({64, w.vocab.size(), 3}, 0);
  ComConfig cfg;
  cfg.k = 1;
  cfg.t = 0;
  cfg.max_new_tokens = 10;
  cfg.seed = 5;
  const ComResult res = com_search(policy, w.prompt, w.realize, text_length_scorer(),
                                   w.vocab, cfg);
  CHECK(res.decode_calls == 1);
  CHECK(res.trace.size() == 1);
}

TEST_CASE("config validation") {
  SearchWorld w;
  Policy policy({64, w.vocab.size(), 3}, 0);
  ComConfig cfg;
  cfg.k = 0;
  CHECK_THROWS_AS(com_search(policy, w.prompt, w.realize, text_length_scorer(), w.vocab, cfg),
                  ConfigError);
  cfg = ComConfig{};
  cfg.keep_fraction = 0;
  CHECK_THROWS_AS(com_search(policy, w.prompt, w.realize, text_length_scorer(), w.vocab, cfg),
                  ConfigError);
  cfg = ComConfig{};
  cfg.keep_fraction = 1.5;
  CHECK_THROWS_AS(com_search(policy, w.prompt, w.realize, text_length_scorer(), w.vocab, cfg),
                  ConfigError);
}

TEST_CASE("the production scorer matches per-candidate scoring") {
  SearchWorld w;
  const RewardEngine engine{ScorerConfig{}};
  const GroupScoreFn scorer = make_raw_scorer(engine, w.prompt.ctx);
  std::vector<Candidate> group(2);
  group[0].text = "<think> waves </think> <answer> m_0 </answer>";
  group[1].text = "junk";
  const std::vector<CandidateScore> got = scorer(group);
  REQUIRE(got.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const CandidateScore single = engine.score_single(group[i], w.prompt.ctx);
    CHECK(got[i].raw_mean == single.raw_mean);
    CHECK(got[i].components.well_formed == single.components.well_formed);
  }
}

}  // TEST_SUITE
