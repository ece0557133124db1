#include "motive/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "motive/text.hpp"

namespace motive {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> words, int motion_codes)
    : motion_codes_(motion_codes) {
  if (motion_codes < 0) throw ConfigError("motion code count must be nonnegative");
  strings_.reserve(words.size() + 1 + static_cast<std::size_t>(motion_codes) + 6);
  strings_.push_back("<unk>");
  for (auto& w : words) {
    if (w.empty()) throw ConfigError("vocabulary words must be nonempty");
    if (!word_ids_.emplace(w, static_cast<int>(strings_.size())).second)
      throw ConfigError("vocabulary word \"" + w + "\" listed twice");
    strings_.push_back(std::move(w));
  }
  n_text_ = static_cast<int>(strings_.size());
  for (int k = 0; k < motion_codes; ++k) strings_.push_back("m_" + std::to_string(k));
  for (const char* tag : {"<think>", "</think>", "<answer>", "</answer>", "<bos>", "<eos>"})
    strings_.emplace_back(tag);
  total_ = static_cast<int>(strings_.size());
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, int motion_codes) {
  std::set<std::string> words;
  for (const auto& text : texts)
    for (auto& tok : text_tokens(text)) words.insert(std::move(tok));
  return Vocabulary(std::vector<std::string>(words.begin(), words.end()), motion_codes);
}

int Vocabulary::motion_token_id(int code) const {
  if (code < 0 || code >= motion_codes_)
    throw TokenOutOfRange("motion code " + std::to_string(code) + " outside [0, " +
                          std::to_string(motion_codes_) + ")");
  return n_text_ + code;
}

std::optional<int> Vocabulary::motion_code(int id) const {
  if (id < n_text_ || id >= n_text_ + motion_codes_) return std::nullopt;
  return id - n_text_;
}

int Vocabulary::word_id(std::string_view word) const {
  const auto it = word_ids_.find(std::string(word));
  return it == word_ids_.end() ? unk_id() : it->second;
}

const std::string& Vocabulary::token_string(int id) const {
  if (id < 0 || id >= total_)
    throw TokenOutOfRange("token id " + std::to_string(id) + " outside [0, " +
                          std::to_string(total_) + ")");
  return strings_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode_text(std::string_view text) const {
  std::vector<int> out;
  for (const auto& tok : text_tokens(text)) out.push_back(word_id(tok));
  return out;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == bos_id() || id == eos_id()) continue;
    const std::string& s = token_string(id);
    if (!out.empty()) out.push_back(' ');
    out.append(s);
  }
  return out;
}

void Vocabulary::save(const fs::path& path) const {
  json j;
  j["words"] = json::array();
  for (int id = 1; id < n_text_; ++id) j["words"].push_back(strings_[static_cast<std::size_t>(id)]);
  j["motion_codes"] = motion_codes_;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoFailure("write error on " + path.string());
}

Vocabulary Vocabulary::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw ConfigError("invalid json in " + path.string());
  try {
    return Vocabulary(j.at("words").get<std::vector<std::string>>(),
                      j.at("motion_codes").get<int>());
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<int> wrap_sequence(const Vocabulary& vocab, std::span<const int> context_ids,
                               std::span<const int> think_ids, std::span<const int> answer_ids) {
  std::vector<int> out;
  out.reserve(context_ids.size() + think_ids.size() + answer_ids.size() + 6);
  out.push_back(vocab.bos_id());
  out.insert(out.end(), context_ids.begin(), context_ids.end());
  out.push_back(vocab.think_open_id());
  out.insert(out.end(), think_ids.begin(), think_ids.end());
  out.push_back(vocab.think_close_id());
  out.push_back(vocab.answer_open_id());
  out.insert(out.end(), answer_ids.begin(), answer_ids.end());
  out.push_back(vocab.answer_close_id());
  out.push_back(vocab.eos_id());
  return out;
}

std::vector<int> wrap_prompt(const Vocabulary& vocab, std::span<const int> context_ids) {
  std::vector<int> out;
  out.reserve(context_ids.size() + 2);
  out.push_back(vocab.bos_id());
  out.insert(out.end(), context_ids.begin(), context_ids.end());
  out.push_back(vocab.think_open_id());
  return out;
}

// ---------------------------------------------------------------------------
// Policy
// ---------------------------------------------------------------------------

Policy::Policy(PolicyShape shape, uint64_t seed) : shape_(shape) {
  if (shape_.features < 1 || shape_.vocab < 1 || shape_.context < 1)
    throw ConfigError("policy shape fields must all be positive");
  (void)seed;  // zero init keeps the starting distribution exactly uniform
  w_ = Eigen::MatrixXd::Zero(shape_.vocab, shape_.features);
  b_ = Eigen::VectorXd::Zero(shape_.vocab);
}

std::vector<int> Policy::active_features(std::span<const int> ids, std::size_t t) const {
  if (t > ids.size())
    throw IndexOutOfRange("position " + std::to_string(t) + " beyond sequence length " +
                          std::to_string(ids.size()));
  const int max_k = std::min<int>(shape_.context, static_cast<int>(t));
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(max_k));
  for (int k = 1; k <= max_k; ++k) {
    uint64_t h = fnv1a_u64(static_cast<uint64_t>(k));
    for (std::size_t j = t - static_cast<std::size_t>(k); j < t; ++j)
      h = fnv1a_u64(static_cast<uint64_t>(static_cast<int64_t>(ids[j])), h);
    out.push_back(static_cast<int>(h % static_cast<uint64_t>(shape_.features)));
  }
  return out;
}

Eigen::VectorXd Policy::logits_at(std::span<const int> ids, std::size_t t) const {
  Eigen::VectorXd logits = b_;
  for (int f : active_features(ids, t)) logits += w_.col(f);
  return logits;
}

namespace {

/// log softmax with max shift; returns the shifted logits vector and the
/// log partition so callers get both probabilities and log probabilities.
struct SoftmaxParts {
  Eigen::VectorXd shifted;  // logits - max
  double log_z;             // log sum exp of shifted
};

SoftmaxParts softmax_parts(const Eigen::VectorXd& logits) {
  SoftmaxParts parts;
  const double mx = logits.maxCoeff();
  parts.shifted = logits.array() - mx;
  parts.log_z = std::log(parts.shifted.array().exp().sum());
  return parts;
}

}  // namespace

double Policy::logprob_from(std::span<const int> ids, std::size_t from) const {
  double acc = 0;
  for (std::size_t t = from; t < ids.size(); ++t) {
    const int target = ids[t];
    if (target < 0 || target >= shape_.vocab)
      throw TokenOutOfRange("token id " + std::to_string(target) + " outside vocab of " +
                            std::to_string(shape_.vocab));
    const SoftmaxParts parts = softmax_parts(logits_at(ids, t));
    acc += parts.shifted(target) - parts.log_z;
  }
  return acc;
}

double Policy::accumulate_logprob_grad(std::span<const int> ids, std::size_t from, double coeff,
                                       PolicyGrad& grad) const {
  double acc = 0;
  for (std::size_t t = from; t < ids.size(); ++t) {
    const int target = ids[t];
    if (target < 0 || target >= shape_.vocab)
      throw TokenOutOfRange("token id " + std::to_string(target) + " outside vocab of " +
                            std::to_string(shape_.vocab));
    const std::vector<int> feats = active_features(ids, t);
    Eigen::VectorXd logits = b_;
    for (int f : feats) logits += w_.col(f);
    const SoftmaxParts parts = softmax_parts(logits);
    acc += parts.shifted(target) - parts.log_z;

    // d logprob / d logits = onehot(target) - softmax(logits)
    Eigen::VectorXd delta = -(parts.shifted.array() - parts.log_z).exp().matrix();
    delta(target) += 1.0;
    grad.b += coeff * delta;
    for (int f : feats) grad.w.col(f) += coeff * delta;
  }
  return acc;
}

SampleResult Policy::sample(std::span<const int> prompt, int max_new_tokens, double temperature,
                            Rng& rng) const {
  if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be at least 1");
  if (temperature < 0) throw ConfigError("temperature must be nonnegative");
  for (const int id : prompt)
    if (id < 0 || id >= shape_.vocab)
      throw TokenOutOfRange("prompt id " + std::to_string(id) + " outside [0, " +
                            std::to_string(shape_.vocab) + ")");
  SampleResult res;
  res.ids.assign(prompt.begin(), prompt.end());
  res.prompt_len = prompt.size();

  const int eos = shape_.vocab - 1;  // by layout <eos> is always the last id
  for (int step = 0; step < max_new_tokens; ++step) {
    const Eigen::VectorXd logits = logits_at(res.ids, res.ids.size());
    const SoftmaxParts parts = softmax_parts(logits);

    int next = 0;
    if (temperature == 0) {
      for (int v = 1; v < shape_.vocab; ++v)
        if (logits(v) > logits(next)) next = v;  // strict keeps the lowest id on ties
    } else {
      const Eigen::VectorXd scaled = logits / temperature;
      const SoftmaxParts sparts = softmax_parts(scaled);
      const Eigen::VectorXd probs =
          (sparts.shifted.array() - sparts.log_z).exp().matrix();
      // Hand-rolled inverse CDF draw so sampling does not depend on the
      // standard library's distribution internals.
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      double cum = 0;
      next = shape_.vocab - 1;
      for (int v = 0; v < shape_.vocab; ++v) {
        cum += probs(v);
        if (u < cum) {
          next = v;
          break;
        }
      }
    }
    res.continuation_logprob += parts.shifted(next) - parts.log_z;
    res.ids.push_back(next);
    if (next == eos) break;
  }
  return res;
}

void Policy::apply_update(const PolicyGrad& grad, double scale) {
  if (grad.w.rows() != w_.rows() || grad.w.cols() != w_.cols())
    throw DimensionMismatch("gradient shape does not match the policy");
  w_ += scale * grad.w;
  b_ += scale * grad.b;
}

// ---------------------------------------------------------------------------
// MPOL checkpoints: "MPOL", u8 version, u32le features / vocab / context,
// then f32le W row-major (vocab x features) and f32le b.
// ---------------------------------------------------------------------------

namespace {

void put_u32le(std::string& out, uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

uint32_t get_u32le(const std::string& buf, std::size_t at) {
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + at);
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void Policy::save(const fs::path& path) const {
  std::string buf;
  buf.append(kMpolMagic, 4);
  buf.push_back(static_cast<char>(kMpolVersion));
  put_u32le(buf, static_cast<uint32_t>(shape_.features));
  put_u32le(buf, static_cast<uint32_t>(shape_.vocab));
  put_u32le(buf, static_cast<uint32_t>(shape_.context));
  buf.reserve(buf.size() + 4ull * (static_cast<uint64_t>(shape_.vocab) *
                                       static_cast<uint64_t>(shape_.features) +
                                   static_cast<uint64_t>(shape_.vocab)));
  for (Eigen::Index r = 0; r < w_.rows(); ++r)
    for (Eigen::Index c = 0; c < w_.cols(); ++c)
      put_u32le(buf, std::bit_cast<uint32_t>(static_cast<float>(w_(r, c))));
  for (Eigen::Index i = 0; i < b_.size(); ++i)
    put_u32le(buf, std::bit_cast<uint32_t>(static_cast<float>(b_(i))));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) throw IoFailure("write error on " + path.string());
}

Policy Policy::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoFailure("read error on " + path.string());
  const std::string buf = std::move(ss).str();

  constexpr std::size_t header = 4 + 1 + 3 * 4;
  if (buf.size() < header)
    throw TruncatedFile(path.string() + ": header needs " + std::to_string(header) +
                        " bytes, file has " + std::to_string(buf.size()));
  if (std::memcmp(buf.data(), kMpolMagic, 4) != 0)
    throw BadMagic(path.string() + ": bad magic at byte 0");
  if (static_cast<uint8_t>(buf[4]) != kMpolVersion)
    throw BadMagic(path.string() + ": unsupported version at byte 4");

  PolicyShape shape;
  shape.features = static_cast<int>(get_u32le(buf, 5));
  shape.vocab = static_cast<int>(get_u32le(buf, 9));
  shape.context = static_cast<int>(get_u32le(buf, 13));
  if (shape.features < 1 || shape.vocab < 1 || shape.context < 1)
    throw ConfigError(path.string() + ": nonpositive shape field in header");

  const uint64_t floats = static_cast<uint64_t>(shape.vocab) *
                              static_cast<uint64_t>(shape.features) +
                          static_cast<uint64_t>(shape.vocab);
  const uint64_t want = header + 4 * floats;
  if (buf.size() < want)
    throw TruncatedFile(path.string() + ": payload needs " + std::to_string(want) +
                        " bytes, file has " + std::to_string(buf.size()));
  if (buf.size() > want)
    throw IoFailure(path.string() + ": " + std::to_string(buf.size() - want) +
                    " trailing bytes after payload");

  Policy policy(shape, 0);
  std::size_t at = header;
  const auto next_f32 = [&]() {
    const float v = std::bit_cast<float>(get_u32le(buf, at));
    if (!std::isfinite(v))
      throw NonFiniteValue(path.string() + ": value at byte " + std::to_string(at));
    at += 4;
    return static_cast<double>(v);
  };
  for (Eigen::Index r = 0; r < policy.w_.rows(); ++r)
    for (Eigen::Index c = 0; c < policy.w_.cols(); ++c) policy.w_(r, c) = next_f32();
  for (Eigen::Index i = 0; i < policy.b_.size(); ++i) policy.b_(i) = next_f32();
  return policy;
}

// ---------------------------------------------------------------------------
// Cold-start supervised training
// ---------------------------------------------------------------------------

SftReport train_sft(Policy& policy, std::span<const std::vector<int>> sequences,
                    const SftConfig& config) {
  if (sequences.empty()) throw ConfigError("sft corpus is empty");
  if (config.lr < 0) throw ConfigError("learning rate must be nonnegative");
  if (config.epochs < 1) throw ConfigError("epochs must be at least 1");
  for (const auto& seq : sequences)
    if (seq.empty()) throw ConfigError("sft corpus contains an empty sequence");

  SftReport report;
  PolicyGrad grad(policy.shape());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(sequences.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(derive_seed(config.seed, "sft_epoch", static_cast<uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_acc = 0;
    for (std::size_t idx : order) {
      const auto& seq = sequences[idx];
      const double inv_len = 1.0 / static_cast<double>(seq.size());
      grad.set_zero();
      const double logprob = policy.accumulate_logprob_grad(seq, 0, inv_len, grad);
      const double nll = -logprob * inv_len;
      if (!std::isfinite(nll))
        throw DivergedLoss("non-finite sft loss at epoch " + std::to_string(epoch));
      if (!grad.all_finite())
        throw NonFiniteGradient("sft gradient at epoch " + std::to_string(epoch));
      loss_acc += nll;
      // Ascent on mean log likelihood is descent on the reported NLL.
      policy.apply_update(grad, config.lr);
    }
    report.loss_trace.push_back(loss_acc / static_cast<double>(sequences.size()));
  }
  return report;
}

}  // namespace motive
