// Throughput benchmarks for the hot paths: codebook lookup, motion
// round-trips, policy sampling and gradient accumulation, candidate scoring
// and the retrieval metrics. Fixtures are deterministic so numbers are
// comparable across runs.

#include <benchmark/benchmark.h>

#include <Eigen/Core>
#include <random>
#include <string>
#include <vector>

#include "motive/com.hpp"
#include "motive/cot.hpp"
#include "motive/grpo.hpp"
#include "motive/metrics.hpp"
#include "motive/motion_data.hpp"
#include "motive/policy.hpp"
#include "motive/rewards.hpp"
#include "motive/rng.hpp"
#include "motive/tokenizer.hpp"

namespace {

using namespace motive;

MotionSequence random_motion(int frames, int dim, uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<float> dist(0.f, 0.5f);
  MotionSequence seq;
  seq.frames = FrameMatrix(frames, dim);
  for (int t = 0; t < frames; ++t)
    for (int d = 0; d < dim; ++d) seq.frames(t, d) = dist(rng);
  seq.fps = 20.f;
  return seq;
}

Eigen::MatrixXd random_rows(int rows, int cols, uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

void BM_Quantize(benchmark::State& state) {
  const int codes = static_cast<int>(state.range(0));
  const int dim = static_cast<int>(state.range(1));
  const MotionTokenizer tok({codes, dim, 4, 6}, 1);
  Rng rng = make_rng(2);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd latent(dim);
  for (int i = 0; i < dim; ++i) latent[i] = dist(rng);
  for (auto _ : state) benchmark::DoNotOptimize(tok.quantize(latent));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Quantize)->Args({64, 16})->Args({512, 128});

void BM_Tokenize(benchmark::State& state) {
  const int codes = static_cast<int>(state.range(0));
  const int dim = static_cast<int>(state.range(1));
  const MotionTokenizer tok({codes, dim, 4, 6}, 1);
  const MotionSequence seq = random_motion(64, 6, 3);
  for (auto _ : state) benchmark::DoNotOptimize(tok.tokenize(seq));
  // One item per emitted token (64 frames / window 4).
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_Tokenize)->Args({64, 16})->Args({512, 128});

void BM_Reconstruct(benchmark::State& state) {
  const MotionTokenizer tok({64, 16, 4, 6}, 1);
  const MotionSequence seq = random_motion(64, 6, 3);
  for (auto _ : state) benchmark::DoNotOptimize(tok.reconstruct(seq));
  state.SetItemsProcessed(state.iterations() * seq.frame_count());
}
BENCHMARK(BM_Reconstruct);

void BM_TokenizerGradients(benchmark::State& state) {
  const MotionTokenizer tok({64, 16, 4, 6}, 1);
  const MotionSequence seq = random_motion(64, 6, 3);
  for (auto _ : state) benchmark::DoNotOptimize(tok.compute_gradients(seq));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TokenizerGradients);

// ---------------------------------------------------------------------------
// Policy
// ---------------------------------------------------------------------------

Policy bench_policy(int vocab) { return Policy({4096, vocab, 3}, 7); }

std::vector<int> bench_ids(int vocab, int length, uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<int> dist(0, vocab - 1);
  std::vector<int> ids(length);
  for (int& id : ids) id = dist(rng);
  return ids;
}

void BM_PolicySample(benchmark::State& state) {
  const int vocab = static_cast<int>(state.range(0));
  const Policy policy = bench_policy(vocab);
  const std::vector<int> prompt = bench_ids(vocab, 8, 11);
  const int budget = 64;
  Rng rng = make_rng(12);
  for (auto _ : state)
    benchmark::DoNotOptimize(policy.sample(prompt, budget, 1.0, rng));
  state.SetItemsProcessed(state.iterations() * budget);
}
BENCHMARK(BM_PolicySample)->Arg(128)->Arg(512);

void BM_PolicyLogprob(benchmark::State& state) {
  const int vocab = static_cast<int>(state.range(0));
  const Policy policy = bench_policy(vocab);
  const std::vector<int> ids = bench_ids(vocab, 64, 13);
  for (auto _ : state) benchmark::DoNotOptimize(policy.logprob_from(ids, 1));
  state.SetItemsProcessed(state.iterations() * (ids.size() - 1));
}
BENCHMARK(BM_PolicyLogprob)->Arg(128)->Arg(512);

void BM_PolicyLogprobGrad(benchmark::State& state) {
  const int vocab = static_cast<int>(state.range(0));
  const Policy policy = bench_policy(vocab);
  const std::vector<int> ids = bench_ids(vocab, 64, 13);
  PolicyGrad grad(policy.shape());
  for (auto _ : state) {
    grad.set_zero();
    benchmark::DoNotOptimize(policy.accumulate_logprob_grad(ids, 1, 1.0, grad));
  }
  state.SetItemsProcessed(state.iterations() * (ids.size() - 1));
}
BENCHMARK(BM_PolicyLogprobGrad)->Arg(128)->Arg(512);

// ---------------------------------------------------------------------------
// Rewards
// ---------------------------------------------------------------------------

void BM_EmbedText(benchmark::State& state) {
  const RewardEngine engine{ScorerConfig{}};
  const std::string text =
      "the person raises the left arm and waves it smoothly from side to side";
  for (auto _ : state) benchmark::DoNotOptimize(engine.embed_text(text));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EmbedText);

void BM_EmbedMotion(benchmark::State& state) {
  const RewardEngine engine{ScorerConfig{}};
  const MotionSequence seq = random_motion(64, 6, 17);
  for (auto _ : state) benchmark::DoNotOptimize(engine.embed_motion(seq));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EmbedMotion);

void BM_ScoreGroup(benchmark::State& state) {
  const RewardEngine engine{ScorerConfig{}};
  ScoringContext ctx;
  ctx.caption = "a person waves the left arm overhead";
  ctx.task = Task::Generation;
  std::vector<Candidate> group;
  for (int i = 0; i < 8; ++i) {
    Candidate c;
    c.text = format_cot("the wave needs a raised arm moving side to side",
                        "m_1 m_2 m_3 m_" + std::to_string(i));
    c.motion = random_motion(48, 6, 100 + static_cast<uint64_t>(i));
    group.push_back(std::move(c));
  }
  for (auto _ : state) benchmark::DoNotOptimize(engine.score_group(group, ctx));
  state.SetItemsProcessed(state.iterations() * group.size());
}
BENCHMARK(BM_ScoreGroup);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

void BM_FrechetDistance(benchmark::State& state) {
  const GaussianFit a = fit_gaussian(random_rows(256, 32, 19));
  const GaussianFit b = fit_gaussian(random_rows(256, 32, 23));
  for (auto _ : state) benchmark::DoNotOptimize(frechet_distance(a, b));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_FrechetDistance);

void BM_RPrecision(benchmark::State& state) {
  const Eigen::MatrixXd queries = random_rows(320, 8, 29);
  const Eigen::MatrixXd gallery = queries + 0.1 * random_rows(320, 8, 31);
  for (auto _ : state)
    benchmark::DoNotOptimize(r_precision(queries, gallery, 32, 37));
  state.SetItemsProcessed(state.iterations() * queries.rows());
}
BENCHMARK(BM_RPrecision);

}  // namespace

BENCHMARK_MAIN();
