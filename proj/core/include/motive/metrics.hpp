#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "motive/error.hpp"

namespace motive {

struct TextEvalItem {
  std::vector<std::string> refs;
  std::string hyp;
};

/// Corpus-level n-gram precision score with clipping and the brevity
/// penalty; reference length per item is the closest to the hypothesis
/// (shorter wins ties). Any order with zero matches zeroes the whole score.
double corpus_bleu(std::span<const TextEvalItem> items, int max_n);

/// Mean over items of the longest-common-subsequence F-measure; with several
/// references the best one counts. beta weighs recall over precision.
double corpus_rouge_l(std::span<const TextEvalItem> items, double beta = 1.2);

/// Consensus score over 1..4-grams: tf-idf vectors (tf normalized per order,
/// idf = log(items / df) with df clipped at 1, document frequency counted
/// over reference sets), cosine against each reference, averaged and
/// scaled by 10.
double corpus_cider(std::span<const TextEvalItem> items);

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // sample covariance, n - 1 denominator
};

GaussianFit fit_gaussian(const Eigen::MatrixXd& rows);

/// Squared mean gap plus trace(c1 + c2 - 2 sqrt(sqrt(c1) c2 sqrt(c1))).
/// Matrix square roots go through symmetric eigendecomposition; eigenvalues
/// below -1e-8 mean the input was not a covariance and raise NonPsdAfterClip,
/// small negative noise is clipped to zero.
double frechet_distance(const GaussianFit& a, const GaussianFit& b);

struct RPrecisionResult {
  double r1 = 0, r2 = 0, r3 = 0;
};

/// Matched rows (query i belongs to gallery row i) are shuffled into pools
/// of pool_size; within a pool, a query scores at rank r when exactly r - 1
/// other gallery rows sit strictly closer than its own match. Fewer rows
/// than pool_size is an error; a trailing partial pool is dropped.
RPrecisionResult r_precision(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& gallery,
                             int pool_size, uint64_t seed);

/// Mean euclidean distance between matched rows.
double mm_dist(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Mean pairwise distance over `pairs` seeded draws of distinct rows.
double diversity(const Eigen::MatrixXd& rows, int pairs, uint64_t seed);

/// Mean pairwise distance within each prompt's generation set (all unordered
/// pairs, seeded subsample above pair_cap), averaged over prompts with at
/// least two generations.
double mmodality(std::span<const Eigen::MatrixXd> per_prompt, int pair_cap, uint64_t seed);

}  // namespace motive
