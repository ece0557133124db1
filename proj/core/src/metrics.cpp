#include "motive/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "motive/rng.hpp"
#include "motive/text.hpp"

namespace motive {

namespace {

using Tokens = std::vector<std::string>;
using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts count_ngrams(const Tokens& tokens, int n) {
  NgramCounts counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  return counts;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double corpus_bleu(std::span<const TextEvalItem> items, int max_n) {
  if (items.empty()) throw EmptyGroup("no items to score");
  if (max_n < 1) throw ConfigError("bleu order must be at least 1");

  std::vector<int64_t> matched(static_cast<std::size_t>(max_n), 0);
  std::vector<int64_t> total(static_cast<std::size_t>(max_n), 0);
  int64_t hyp_len_sum = 0, ref_len_sum = 0;

  for (const auto& item : items) {
    if (item.refs.empty()) throw EmptyGroup("item without references");
    const Tokens hyp = text_tokens(item.hyp);
    std::vector<Tokens> refs;
    for (const auto& r : item.refs) refs.push_back(text_tokens(r));

    hyp_len_sum += static_cast<int64_t>(hyp.size());
    // Closest reference length; the shorter one wins a tie.
    std::size_t best_ref_len = refs.front().size();
    for (const auto& r : refs) {
      const auto cur = static_cast<int64_t>(r.size());
      const auto best = static_cast<int64_t>(best_ref_len);
      const auto h = static_cast<int64_t>(hyp.size());
      if (std::llabs(cur - h) < std::llabs(best - h) ||
          (std::llabs(cur - h) == std::llabs(best - h) && cur < best))
        best_ref_len = r.size();
    }
    ref_len_sum += static_cast<int64_t>(best_ref_len);

    for (int n = 1; n <= max_n; ++n) {
      const NgramCounts hyp_counts = count_ngrams(hyp, n);
      NgramCounts max_ref_counts;
      for (const auto& r : refs)
        for (const auto& [gram, count] : count_ngrams(r, n))
          max_ref_counts[gram] = std::max(max_ref_counts[gram], count);
      for (const auto& [gram, count] : hyp_counts) {
        total[static_cast<std::size_t>(n - 1)] += count;
        const auto it = max_ref_counts.find(gram);
        if (it != max_ref_counts.end())
          matched[static_cast<std::size_t>(n - 1)] += std::min(count, it->second);
      }
    }
  }

  double log_prec_sum = 0;
  for (int n = 0; n < max_n; ++n) {
    if (matched[static_cast<std::size_t>(n)] == 0) return 0.0;
    log_prec_sum += std::log(static_cast<double>(matched[static_cast<std::size_t>(n)]) /
                             static_cast<double>(total[static_cast<std::size_t>(n)]));
  }
  if (hyp_len_sum == 0) return 0.0;
  const double bp =
      hyp_len_sum >= ref_len_sum
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len_sum) / static_cast<double>(hyp_len_sum));
  return bp * std::exp(log_prec_sum / static_cast<double>(max_n));
}

double corpus_rouge_l(std::span<const TextEvalItem> items, double beta) {
  if (items.empty()) throw EmptyGroup("no items to score");
  if (!(beta > 0)) throw ConfigError("rouge beta must be positive");
  const double b2 = beta * beta;

  double acc = 0;
  for (const auto& item : items) {
    if (item.refs.empty()) throw EmptyGroup("item without references");
    const Tokens hyp = text_tokens(item.hyp);
    double best = 0;
    for (const auto& ref_text : item.refs) {
      const Tokens ref = text_tokens(ref_text);
      const auto lcs = static_cast<double>(lcs_length(ref, hyp));
      if (lcs == 0 || hyp.empty() || ref.empty()) continue;
      const double p = lcs / static_cast<double>(hyp.size());
      const double r = lcs / static_cast<double>(ref.size());
      const double denom = r + b2 * p;
      const double f = denom > 0 ? (1 + b2) * r * p / denom : 0.0;
      best = std::max(best, f);
    }
    acc += best;
  }
  return acc / static_cast<double>(items.size());
}

double corpus_cider(std::span<const TextEvalItem> items) {
  if (items.empty()) throw EmptyGroup("no items to score");
  constexpr int kMaxN = 4;

  // Document frequency: in how many items' reference sets each gram appears.
  std::array<NgramCounts, kMaxN> df;
  for (const auto& item : items) {
    if (item.refs.empty()) throw EmptyGroup("item without references");
    for (int n = 1; n <= kMaxN; ++n) {
      NgramCounts merged;
      for (const auto& r : item.refs)
        for (const auto& [gram, count] : count_ngrams(text_tokens(r), n)) merged[gram] = 1;
      for (const auto& [gram, one] : merged) df[static_cast<std::size_t>(n - 1)][gram] += one;
    }
  }
  const double log_items = std::log(static_cast<double>(items.size()));

  // Sparse tf-idf vector for one text at one gram order.
  const auto vectorize = [&](const Tokens& tokens, int n) {
    std::map<std::vector<std::string>, double> vec;
    const NgramCounts counts = count_ngrams(tokens, n);
    double total = 0;
    for (const auto& [gram, c] : counts) total += c;
    if (total == 0) return vec;
    const auto& dfn = df[static_cast<std::size_t>(n - 1)];
    for (const auto& [gram, c] : counts) {
      const auto it = dfn.find(gram);
      const double d = it == dfn.end() ? 1.0 : std::max(1.0, static_cast<double>(it->second));
      vec[gram] = (static_cast<double>(c) / total) * (log_items - std::log(d));
    }
    return vec;
  };
  const auto cosine = [](const std::map<std::vector<std::string>, double>& a,
                         const std::map<std::vector<std::string>, double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (const auto& [gram, v] : a) {
      na += v * v;
      const auto it = b.find(gram);
      if (it != b.end()) dot += v * it->second;
    }
    for (const auto& [gram, v] : b) nb += v * v;
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };

  double acc = 0;
  for (const auto& item : items) {
    const Tokens hyp = text_tokens(item.hyp);
    double item_score = 0;
    for (int n = 1; n <= kMaxN; ++n) {
      const auto hyp_vec = vectorize(hyp, n);
      double ref_mean = 0;
      for (const auto& r : item.refs) ref_mean += cosine(hyp_vec, vectorize(text_tokens(r), n));
      item_score += ref_mean / static_cast<double>(item.refs.size());
    }
    acc += item_score / kMaxN;
  }
  return 10.0 * acc / static_cast<double>(items.size());
}

// ---------------------------------------------------------------------------
// Embedding-space metrics
// ---------------------------------------------------------------------------

GaussianFit fit_gaussian(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2)
    throw DimensionMismatch("covariance needs at least 2 rows, got " +
                            std::to_string(rows.rows()));
  GaussianFit fit;
  fit.mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - fit.mean.transpose();
  fit.cov = centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
  return fit;
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success)
    throw NonPsdAfterClip(std::string(what) + ": eigendecomposition failed");
  Eigen::VectorXd evals = solver.eigenvalues();
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    if (evals(i) < -1e-8)
      throw NonPsdAfterClip(std::string(what) + ": eigenvalue " + std::to_string(evals(i)) +
                            " below tolerance");
    evals(i) = std::sqrt(std::max(evals(i), 0.0));
  }
  return solver.eigenvectors() * evals.asDiagonal() * solver.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const GaussianFit& a, const GaussianFit& b) {
  if (a.mean.size() != b.mean.size())
    throw DimensionMismatch("gaussian dims differ: " + std::to_string(a.mean.size()) + " vs " +
                            std::to_string(b.mean.size()));
  const double mean_gap = (a.mean - b.mean).squaredNorm();
  const Eigen::MatrixXd s1 = psd_sqrt(a.cov, "first covariance");
  const Eigen::MatrixXd inner = psd_sqrt(s1 * b.cov * s1, "cross term");
  const double tr = a.cov.trace() + b.cov.trace() - 2.0 * inner.trace();
  return mean_gap + tr;
}

RPrecisionResult r_precision(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& gallery,
                             int pool_size, uint64_t seed) {
  if (queries.rows() != gallery.rows() || queries.cols() != gallery.cols())
    throw DimensionMismatch("queries and gallery must be matched row for row");
  if (pool_size < 2) throw ConfigError("pool_size must be at least 2");
  if (queries.rows() < pool_size)
    throw PoolTooSmall("need " + std::to_string(pool_size) + " matched rows, have " +
                       std::to_string(queries.rows()));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(queries.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng = make_rng(derive_seed(seed, "r_precision_pools"));
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t pools = order.size() / static_cast<std::size_t>(pool_size);
  int64_t hit1 = 0, hit2 = 0, hit3 = 0, total = 0;
  for (std::size_t p = 0; p < pools; ++p) {
    const auto* pool = order.data() + p * static_cast<std::size_t>(pool_size);
    for (int qi = 0; qi < pool_size; ++qi) {
      const Eigen::Index q = pool[qi];
      const double own = (queries.row(q) - gallery.row(q)).norm();
      int closer = 0;
      for (int gi = 0; gi < pool_size; ++gi) {
        if (gi == qi) continue;
        if ((queries.row(q) - gallery.row(pool[gi])).norm() < own) ++closer;
      }
      const int rank = 1 + closer;
      hit1 += rank <= 1;
      hit2 += rank <= 2;
      hit3 += rank <= 3;
      ++total;
    }
  }
  RPrecisionResult res;
  res.r1 = static_cast<double>(hit1) / static_cast<double>(total);
  res.r2 = static_cast<double>(hit2) / static_cast<double>(total);
  res.r3 = static_cast<double>(hit3) / static_cast<double>(total);
  return res;
}

double mm_dist(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("matched embedding sets must have identical shapes");
  if (a.rows() == 0) throw EmptyGroup("no rows to average");
  double acc = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) acc += (a.row(i) - b.row(i)).norm();
  return acc / static_cast<double>(a.rows());
}

double diversity(const Eigen::MatrixXd& rows, int pairs, uint64_t seed) {
  if (rows.rows() < 2) throw PoolTooSmall("diversity needs at least 2 rows");
  if (pairs < 1) throw ConfigError("pair count must be positive");
  Rng rng = make_rng(derive_seed(seed, "diversity_pairs"));
  std::uniform_int_distribution<Eigen::Index> pick(0, rows.rows() - 1);
  double acc = 0;
  for (int p = 0; p < pairs; ++p) {
    Eigen::Index i = pick(rng);
    Eigen::Index j = pick(rng);
    while (j == i) j = pick(rng);
    acc += (rows.row(i) - rows.row(j)).norm();
  }
  return acc / static_cast<double>(pairs);
}

double mmodality(std::span<const Eigen::MatrixXd> per_prompt, int pair_cap, uint64_t seed) {
  if (pair_cap < 1) throw ConfigError("pair cap must be positive");
  double acc = 0;
  std::size_t prompts_used = 0;
  for (std::size_t pi = 0; pi < per_prompt.size(); ++pi) {
    const auto& rows = per_prompt[pi];
    if (rows.rows() < 2) continue;

    std::vector<std::pair<Eigen::Index, Eigen::Index>> all_pairs;
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
      for (Eigen::Index j = i + 1; j < rows.rows(); ++j) all_pairs.emplace_back(i, j);
    if (all_pairs.size() > static_cast<std::size_t>(pair_cap)) {
      Rng rng = make_rng(derive_seed(seed, "mmodality_pairs", pi));
      std::shuffle(all_pairs.begin(), all_pairs.end(), rng);
      all_pairs.resize(static_cast<std::size_t>(pair_cap));
    }
    double prompt_acc = 0;
    for (const auto& [i, j] : all_pairs) prompt_acc += (rows.row(i) - rows.row(j)).norm();
    acc += prompt_acc / static_cast<double>(all_pairs.size());
    ++prompts_used;
  }
  if (prompts_used == 0) throw EmptyGroup("no prompt had at least two generations");
  return acc / static_cast<double>(prompts_used);
}

}  // namespace motive
