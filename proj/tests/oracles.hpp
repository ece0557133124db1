#pragma once

// Independent reference implementations the test suites check the library
// against. Everything here is written in the most naive style available and
// shares no code with core: the grammar is one regular expression, nearest
// neighbor is an exhaustive scan, the quantizer loss is scalar loops over
// nested vectors, LCS enumerates subsequences, gradients come from central
// differences through a generic parameter view.

#include <cmath>
#include <cstdint>
#include <functional>
#include <regex>
#include <string>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// Tag grammar
// ---------------------------------------------------------------------------

struct GrammarMatch {
  bool ok = false;
  std::string think;
  std::string answer;
};

// prefix <think> body </think> middle <answer> body </answer> trailing,
// where prefix/bodies exclude any opening tag (and the body's own close tag)
// and middle excludes <answer>. Dotall is spelled [\s\S]; stray close tags
// are allowed anywhere.
inline GrammarMatch match_grammar(const std::string& s) {
  static const std::regex re(
      "^(?:(?!<think>|<answer>)[\\s\\S])*"
      "<think>((?:(?!<think>|<answer>|</think>)[\\s\\S])*)</think>"
      "(?:(?!<answer>)[\\s\\S])*"
      "<answer>((?:(?!<think>|<answer>|</answer>)[\\s\\S])*)</answer>"
      "[\\s\\S]*$");
  std::smatch m;
  GrammarMatch out;
  if (std::regex_match(s, m, re)) {
    out.ok = true;
    out.think = m[1].str();
    out.answer = m[2].str();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive nearest neighbor
// ---------------------------------------------------------------------------

inline int nearest_row(const std::vector<std::vector<double>>& codebook,
                       const std::vector<double>& z) {
  int best = -1;
  double best_dist = 0;
  for (std::size_t n = 0; n < codebook.size(); ++n) {
    double dist = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double gap = codebook[n][i] - z[i];
      dist += gap * gap;
    }
    if (best < 0 || dist < best_dist) {
      best = static_cast<int>(n);
      best_dist = dist;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Scalar quantizer loss
// ---------------------------------------------------------------------------

using Grid = std::vector<std::vector<double>>;  // rows of equal width

struct ScalarVqLoss {
  double total = 0, reconstruct = 0, commit = 0, embed = 0;
};

inline double smooth_l1_scalar(double u, double beta) {
  const double a = std::fabs(u);
  return a < beta ? 0.5 * a * a / beta : a - 0.5 * beta;
}

inline ScalarVqLoss scalar_vq_loss(const Grid& target, const Grid& decoded, const Grid& latents,
                                   const Grid& quantized, double commit_beta,
                                   double velocity_weight, double smooth_beta) {
  ScalarVqLoss out;
  double acc = 0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < target.size(); ++t)
    for (std::size_t c = 0; c < target[t].size(); ++c) {
      acc += smooth_l1_scalar(decoded[t][c] - target[t][c], smooth_beta);
      ++count;
    }
  out.reconstruct = acc / static_cast<double>(count);
  if (target.size() >= 2) {
    acc = 0;
    count = 0;
    for (std::size_t t = 0; t + 1 < target.size(); ++t)
      for (std::size_t c = 0; c < target[t].size(); ++c) {
        const double pv = decoded[t + 1][c] - decoded[t][c];
        const double tv = target[t + 1][c] - target[t][c];
        acc += smooth_l1_scalar(pv - tv, smooth_beta);
        ++count;
      }
    out.reconstruct += velocity_weight * acc / static_cast<double>(count);
  }
  double gap = 0;
  for (std::size_t w = 0; w < latents.size(); ++w) {
    double row = 0;
    for (std::size_t i = 0; i < latents[w].size(); ++i) {
      const double d = latents[w][i] - quantized[w][i];
      row += d * d;
    }
    gap += row;
  }
  gap /= static_cast<double>(latents.size());
  out.commit = commit_beta * gap;
  out.embed = gap;
  out.total = out.reconstruct + out.commit + out.embed;
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

// Flat view over some parameter storage: the value function is re-evaluated
// after each perturbation.
struct ParamView {
  std::function<double(int)> get;
  std::function<void(int, double)> set;
  int count = 0;
};

inline std::vector<double> central_diff(const ParamView& view,
                                        const std::function<double()>& value, double h) {
  std::vector<double> grad(static_cast<std::size_t>(view.count));
  for (int i = 0; i < view.count; ++i) {
    const double orig = view.get(i);
    view.set(i, orig + h);
    const double up = value();
    view.set(i, orig - h);
    const double down = value();
    view.set(i, orig);
    grad[static_cast<std::size_t>(i)] = (up - down) / (2 * h);
  }
  return grad;
}

inline double rel_error(const std::vector<double>& got, const std::vector<double>& want) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double d = got[i] - want[i];
    num += d * d;
    den += want[i] * want[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

// ---------------------------------------------------------------------------
// Longest common subsequence by enumeration
// ---------------------------------------------------------------------------

inline bool is_subsequence(const std::vector<std::string>& small,
                           const std::vector<std::string>& big) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < big.size() && j < small.size(); ++i)
    if (big[i] == small[j]) ++j;
  return j == small.size();
}

// Enumerates every subsequence of the shorter side (2^n of them) and keeps
// the longest one contained in the other. Only usable for short inputs.
inline int lcs_enumerate(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const auto& small = a.size() <= b.size() ? a : b;
  const auto& big = a.size() <= b.size() ? b : a;
  const std::size_t n = small.size();
  int best = 0;
  for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
    std::vector<std::string> sub;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1ull << i)) sub.push_back(small[i]);
    if (static_cast<int>(sub.size()) > best && is_subsequence(sub, big))
      best = static_cast<int>(sub.size());
  }
  return best;
}

}  // namespace oracle
