#include "motive/tokenizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "motive/rng.hpp"

namespace motive {

namespace fs = std::filesystem;

namespace {

double smooth_l1_mean(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target, double beta) {
  const Eigen::MatrixXd u = pred - target;
  double acc = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double a = std::abs(u.data()[i]);
    acc += a < beta ? 0.5 * a * a / beta : a - 0.5 * beta;
  }
  return acc / static_cast<double>(u.size());
}

Eigen::MatrixXd smooth_l1_grad(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                               double beta) {
  Eigen::MatrixXd g = pred - target;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    double& v = g.data()[i];
    v = std::abs(v) < beta ? v / beta : (v > 0 ? 1.0 : -1.0);
  }
  return g / static_cast<double>(g.size());
}

void check_shape(const TokenizerShape& s) {
  if (s.codebook_size < 1 || s.latent_dim < 1 || s.window < 1 || s.frame_dim < 1)
    throw ConfigError("tokenizer shape fields must all be positive");
}

}  // namespace

MotionTokenizer::MotionTokenizer(TokenizerShape shape, uint64_t seed) : shape_(shape) {
  check_shape(shape_);
  const int in_dim = shape_.window * shape_.frame_dim;
  Rng rng = make_rng(derive_seed(seed, "tokenizer_init"));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double enc_scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
  const double dec_scale = 1.0 / std::sqrt(static_cast<double>(shape_.latent_dim));

  encoder_w_.resize(shape_.latent_dim, in_dim);
  for (Eigen::Index r = 0; r < encoder_w_.rows(); ++r)
    for (Eigen::Index c = 0; c < encoder_w_.cols(); ++c)
      encoder_w_(r, c) = normal(rng) * enc_scale;
  encoder_b_ = Eigen::VectorXd::Zero(shape_.latent_dim);

  decoder_w_.resize(in_dim, shape_.latent_dim);
  for (Eigen::Index r = 0; r < decoder_w_.rows(); ++r)
    for (Eigen::Index c = 0; c < decoder_w_.cols(); ++c)
      decoder_w_(r, c) = normal(rng) * dec_scale;
  decoder_b_ = Eigen::VectorXd::Zero(in_dim);

  codebook_.resize(shape_.codebook_size, shape_.latent_dim);
  for (Eigen::Index r = 0; r < codebook_.rows(); ++r)
    for (Eigen::Index c = 0; c < codebook_.cols(); ++c)
      codebook_(r, c) = normal(rng) * 0.1;

  ema_cluster_size_ = Eigen::VectorXd::Ones(shape_.codebook_size);
  ema_embed_sum_ = codebook_;
}

int MotionTokenizer::quantize(const Eigen::VectorXd& latent) const {
  if (latent.size() != shape_.latent_dim)
    throw DimensionMismatch("latent has " + std::to_string(latent.size()) +
                            " dims, codebook expects " + std::to_string(shape_.latent_dim));
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int n = 0; n < shape_.codebook_size; ++n) {
    const double dist = (codebook_.row(n).transpose() - latent).squaredNorm();
    // Strict comparison keeps the lowest index on exact ties.
    if (dist < best_dist) {
      best_dist = dist;
      best = n;
    }
  }
  return best;
}

Eigen::MatrixXd MotionTokenizer::window_matrix(const MotionSequence& seq) const {
  const int t = seq.frame_count();
  const int d = shape_.frame_dim;
  const int l = shape_.window;
  const int windows = (t + l - 1) / l;
  Eigen::MatrixXd x(windows, l * d);
  for (int w = 0; w < windows; ++w)
    for (int j = 0; j < l; ++j) {
      const int frame = std::min(w * l + j, t - 1);  // repeat last frame as padding
      for (int c = 0; c < d; ++c) x(w, j * d + c) = static_cast<double>(seq.frames(frame, c));
    }
  return x;
}

Eigen::MatrixXd MotionTokenizer::encode_windows(const MotionSequence& seq) const {
  seq.validate();
  if (seq.frame_dim() != shape_.frame_dim)
    throw DimensionMismatch("sequence has " + std::to_string(seq.frame_dim()) +
                            " channels, tokenizer expects " + std::to_string(shape_.frame_dim));
  const Eigen::MatrixXd x = window_matrix(seq);
  Eigen::MatrixXd z = x * encoder_w_.transpose();
  z.rowwise() += encoder_b_.transpose();
  return z;
}

std::vector<int> MotionTokenizer::tokenize(const MotionSequence& seq) const {
  const Eigen::MatrixXd z = encode_windows(seq);
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    out[static_cast<std::size_t>(i)] = quantize(z.row(i).transpose());
  return out;
}

Eigen::MatrixXd MotionTokenizer::decode_latents(const Eigen::MatrixXd& latents,
                                                int frame_count) const {
  const int d = shape_.frame_dim;
  const int l = shape_.window;
  Eigen::MatrixXd y = latents * decoder_w_.transpose();
  y.rowwise() += decoder_b_.transpose();
  Eigen::MatrixXd frames(frame_count, d);
  for (int f = 0; f < frame_count; ++f) {
    const int w = f / l;
    const int j = f % l;
    frames.row(f) = y.row(w).segment(j * d, d);
  }
  return frames;
}

MotionSequence MotionTokenizer::decode(std::span<const int> tokens, float fps) const {
  if (tokens.empty()) throw DimensionMismatch("cannot decode an empty token list");
  Eigen::MatrixXd latents(static_cast<Eigen::Index>(tokens.size()), shape_.latent_dim);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || tokens[i] >= shape_.codebook_size)
      throw TokenOutOfRange("token " + std::to_string(tokens[i]) + " outside [0, " +
                            std::to_string(shape_.codebook_size) + ")");
    latents.row(static_cast<Eigen::Index>(i)) = codebook_.row(tokens[i]);
  }
  const Eigen::MatrixXd frames =
      decode_latents(latents, static_cast<int>(tokens.size()) * shape_.window);
  MotionSequence seq;
  seq.frames = frames.cast<float>();
  seq.fps = fps;
  seq.validate();
  return seq;
}

MotionSequence MotionTokenizer::reconstruct(const MotionSequence& seq) const {
  const VqForward fwd = forward(seq);
  MotionSequence out;
  out.frames = fwd.decoded.cast<float>();
  out.fps = seq.fps;
  out.channel_map = seq.channel_map;
  out.validate();
  return out;
}

VqForward MotionTokenizer::forward(const MotionSequence& seq) const {
  VqForward fwd;
  fwd.latents = encode_windows(seq);
  fwd.indices.resize(static_cast<std::size_t>(fwd.latents.rows()));
  fwd.quantized.resize(fwd.latents.rows(), shape_.latent_dim);
  for (Eigen::Index i = 0; i < fwd.latents.rows(); ++i) {
    const int idx = quantize(fwd.latents.row(i).transpose());
    fwd.indices[static_cast<std::size_t>(i)] = idx;
    fwd.quantized.row(i) = codebook_.row(idx);
  }
  fwd.decoded = decode_latents(fwd.quantized, seq.frame_count());
  return fwd;
}

VqLoss MotionTokenizer::loss(const MotionSequence& seq, const VqLossWeights& weights) const {
  const VqForward fwd = forward(seq);
  const Eigen::MatrixXd target = seq.frames.cast<double>();
  const int t = seq.frame_count();

  VqLoss out;
  out.reconstruct = smooth_l1_mean(fwd.decoded, target, weights.smooth_l1_beta);
  if (t >= 2) {
    const Eigen::MatrixXd pred_vel = fwd.decoded.bottomRows(t - 1) - fwd.decoded.topRows(t - 1);
    const Eigen::MatrixXd tgt_vel = target.bottomRows(t - 1) - target.topRows(t - 1);
    out.reconstruct += weights.velocity_weight *
                       smooth_l1_mean(pred_vel, tgt_vel, weights.smooth_l1_beta);
  }
  const double code_gap = (fwd.latents - fwd.quantized).rowwise().squaredNorm().mean();
  out.commit = weights.commit_beta * code_gap;
  out.embed = code_gap;
  out.total = out.reconstruct + out.commit + out.embed;
  return out;
}

TokenizerGrads MotionTokenizer::compute_gradients(const MotionSequence& seq,
                                                  const VqLossWeights& weights) const {
  const Eigen::MatrixXd x = window_matrix(seq);
  VqForward fwd = forward(seq);
  const Eigen::MatrixXd target = seq.frames.cast<double>();
  const int t = seq.frame_count();
  const int d = shape_.frame_dim;
  const int l = shape_.window;
  const auto n_windows = fwd.latents.rows();

  TokenizerGrads grads;
  grads.loss.reconstruct = smooth_l1_mean(fwd.decoded, target, weights.smooth_l1_beta);
  Eigen::MatrixXd g_frames = smooth_l1_grad(fwd.decoded, target, weights.smooth_l1_beta);
  if (t >= 2) {
    const Eigen::MatrixXd pred_vel = fwd.decoded.bottomRows(t - 1) - fwd.decoded.topRows(t - 1);
    const Eigen::MatrixXd tgt_vel = target.bottomRows(t - 1) - target.topRows(t - 1);
    grads.loss.reconstruct +=
        weights.velocity_weight * smooth_l1_mean(pred_vel, tgt_vel, weights.smooth_l1_beta);
    const Eigen::MatrixXd g_vel =
        weights.velocity_weight * smooth_l1_grad(pred_vel, tgt_vel, weights.smooth_l1_beta);
    g_frames.bottomRows(t - 1) += g_vel;
    g_frames.topRows(t - 1) -= g_vel;
  }

  // Scatter frame gradients back into window rows; padded frames got trimmed
  // from the loss so they contribute nothing.
  Eigen::MatrixXd g_y = Eigen::MatrixXd::Zero(n_windows, l * d);
  for (int f = 0; f < t; ++f) g_y.row(f / l).segment((f % l) * d, d) = g_frames.row(f);

  grads.decoder_w = g_y.transpose() * fwd.quantized;
  grads.decoder_b = g_y.colwise().sum().transpose();

  // Straight-through: treat the decoder input as the encoder output.
  Eigen::MatrixXd g_z = g_y * decoder_w_;
  const double code_gap = (fwd.latents - fwd.quantized).rowwise().squaredNorm().mean();
  grads.loss.commit = weights.commit_beta * code_gap;
  grads.loss.embed = code_gap;
  g_z += (2.0 * weights.commit_beta / static_cast<double>(n_windows)) *
         (fwd.latents - fwd.quantized);

  grads.encoder_w = g_z.transpose() * x;
  grads.encoder_b = g_z.colwise().sum().transpose();
  grads.loss.total = grads.loss.reconstruct + grads.loss.commit + grads.loss.embed;
  grads.latents = std::move(fwd.latents);
  grads.indices = std::move(fwd.indices);
  return grads;
}

double MotionTokenizer::surrogate_loss(const MotionSequence& seq,
                                       const Eigen::MatrixXd& frozen_latents,
                                       const Eigen::MatrixXd& frozen_quantized,
                                       const VqLossWeights& weights) const {
  const Eigen::MatrixXd z = encode_windows(seq);
  if (z.rows() != frozen_latents.rows() || z.rows() != frozen_quantized.rows())
    throw DimensionMismatch("frozen matrices do not match the window count");
  const Eigen::MatrixXd decoder_in = z + (frozen_quantized - frozen_latents);
  const Eigen::MatrixXd decoded = decode_latents(decoder_in, seq.frame_count());
  const Eigen::MatrixXd target = seq.frames.cast<double>();
  const int t = seq.frame_count();

  double rec = smooth_l1_mean(decoded, target, weights.smooth_l1_beta);
  if (t >= 2) {
    const Eigen::MatrixXd pred_vel = decoded.bottomRows(t - 1) - decoded.topRows(t - 1);
    const Eigen::MatrixXd tgt_vel = target.bottomRows(t - 1) - target.topRows(t - 1);
    rec += weights.velocity_weight * smooth_l1_mean(pred_vel, tgt_vel, weights.smooth_l1_beta);
  }
  const double commit =
      weights.commit_beta * (z - frozen_quantized).rowwise().squaredNorm().mean();
  return rec + commit;
}

// ---------------------------------------------------------------------------
// MTOK checkpoints: "MTOK", u8 version, u32le N / d / window / D, then f32le
// encoder (W row-major, b), decoder (W row-major, b), codebook row-major.
// ---------------------------------------------------------------------------

namespace {

void put_u32le(std::string& out, uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

void put_f32le(std::string& out, float v) { put_u32le(out, std::bit_cast<uint32_t>(v)); }

uint32_t get_u32le(const std::string& buf, std::size_t at) {
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + at);
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void put_matrix(std::string& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      put_f32le(out, static_cast<float>(m(r, c)));
}

void put_vector(std::string& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f32le(out, static_cast<float>(v(i)));
}

struct F32Reader {
  const std::string& buf;
  const std::string path;
  std::size_t at;

  float next() {
    const float v = std::bit_cast<float>(get_u32le(buf, at));
    if (!std::isfinite(v))
      throw NonFiniteValue(path + ": value at byte " + std::to_string(at));
    at += 4;
    return v;
  }
  void fill(Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<double>(next());
  }
  void fill(Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = static_cast<double>(next());
  }
};

}  // namespace

void MotionTokenizer::save(const fs::path& path) const {
  std::string buf;
  buf.append(kMtokMagic, 4);
  buf.push_back(static_cast<char>(kMtokVersion));
  put_u32le(buf, static_cast<uint32_t>(shape_.codebook_size));
  put_u32le(buf, static_cast<uint32_t>(shape_.latent_dim));
  put_u32le(buf, static_cast<uint32_t>(shape_.window));
  put_u32le(buf, static_cast<uint32_t>(shape_.frame_dim));
  put_matrix(buf, encoder_w_);
  put_vector(buf, encoder_b_);
  put_matrix(buf, decoder_w_);
  put_vector(buf, decoder_b_);
  put_matrix(buf, codebook_);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) throw IoFailure("write error on " + path.string());
}

MotionTokenizer MotionTokenizer::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoFailure("read error on " + path.string());
  const std::string buf = std::move(ss).str();

  constexpr std::size_t header = 4 + 1 + 4 * 4;
  if (buf.size() < header)
    throw TruncatedFile(path.string() + ": header needs " + std::to_string(header) +
                        " bytes, file has " + std::to_string(buf.size()));
  if (std::memcmp(buf.data(), kMtokMagic, 4) != 0)
    throw BadMagic(path.string() + ": bad magic at byte 0");
  if (static_cast<uint8_t>(buf[4]) != kMtokVersion)
    throw BadMagic(path.string() + ": unsupported version at byte 4");

  TokenizerShape shape;
  shape.codebook_size = static_cast<int>(get_u32le(buf, 5));
  shape.latent_dim = static_cast<int>(get_u32le(buf, 9));
  shape.window = static_cast<int>(get_u32le(buf, 13));
  shape.frame_dim = static_cast<int>(get_u32le(buf, 17));
  check_shape(shape);

  const uint64_t in_dim = uint64_t{static_cast<uint32_t>(shape.window)} *
                          static_cast<uint32_t>(shape.frame_dim);
  const uint64_t floats = uint64_t{static_cast<uint32_t>(shape.latent_dim)} * in_dim +
                          static_cast<uint32_t>(shape.latent_dim) +
                          in_dim * static_cast<uint32_t>(shape.latent_dim) + in_dim +
                          uint64_t{static_cast<uint32_t>(shape.codebook_size)} *
                              static_cast<uint32_t>(shape.latent_dim);
  const uint64_t want = header + 4 * floats;
  if (buf.size() < want)
    throw TruncatedFile(path.string() + ": payload needs " + std::to_string(want) +
                        " bytes, file has " + std::to_string(buf.size()));
  if (buf.size() > want)
    throw IoFailure(path.string() + ": " + std::to_string(buf.size() - want) +
                    " trailing bytes after payload");

  MotionTokenizer tok(shape, 0);
  F32Reader reader{buf, path.string(), header};
  reader.fill(tok.encoder_w_);
  reader.fill(tok.encoder_b_);
  reader.fill(tok.decoder_w_);
  reader.fill(tok.decoder_b_);
  reader.fill(tok.codebook_);
  tok.ema_cluster_size_.setOnes();
  tok.ema_embed_sum_ = tok.codebook_;
  return tok;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TokenizerTrainReport train_tokenizer(MotionTokenizer& tok,
                                     std::span<const MotionSequence> corpus,
                                     const TokenizerTrainConfig& config) {
  if (corpus.empty()) throw ConfigError("tokenizer training corpus is empty");
  if (config.lr < 0) throw ConfigError("learning rate must be nonnegative");
  if (config.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (config.ema_decay < 0 || config.ema_decay >= 1)
    throw ConfigError("ema decay must lie in [0, 1)");

  TokenizerTrainReport report;

  if (config.lr == 0) {
    // Pure evaluation: no parameter motion, no codebook seeding, no EMA.
    VqLoss mean;
    for (const auto& seq : corpus) {
      const VqLoss l = tok.loss(seq, config.weights);
      mean.total += l.total;
      mean.reconstruct += l.reconstruct;
      mean.commit += l.commit;
      mean.embed += l.embed;
    }
    const auto n = static_cast<double>(corpus.size());
    mean.total /= n;
    mean.reconstruct /= n;
    mean.commit /= n;
    mean.embed /= n;
    if (!std::isfinite(mean.total)) throw DivergedLoss("non-finite tokenizer loss");
    report.trace.assign(static_cast<std::size_t>(config.epochs), mean);
    return report;
  }

  const int n_codes = tok.shape().codebook_size;
  if (config.init_codebook_from_data) {
    std::vector<Eigen::RowVectorXd> rows;
    for (const auto& seq : corpus) {
      const Eigen::MatrixXd z = tok.encode_windows(seq);
      for (Eigen::Index i = 0; i < z.rows(); ++i) rows.push_back(z.row(i));
    }
    Rng rng = make_rng(derive_seed(config.seed, "codebook_init"));
    std::vector<std::size_t> pick(static_cast<std::size_t>(n_codes));
    if (rows.size() >= static_cast<std::size_t>(n_codes)) {
      std::vector<std::size_t> order(rows.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      std::copy_n(order.begin(), n_codes, pick.begin());
    } else {
      std::uniform_int_distribution<std::size_t> uni(0, rows.size() - 1);
      for (auto& p : pick) p = uni(rng);
    }
    for (int n = 0; n < n_codes; ++n) tok.codebook().row(n) = rows[pick[static_cast<std::size_t>(n)]];
    tok.ema_cluster_size().setOnes();
    tok.ema_embed_sum() = tok.codebook();
  }

  const double gamma = config.ema_decay;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(derive_seed(config.seed, "epoch_order", static_cast<uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    VqLoss mean;
    for (std::size_t idx : order) {
      TokenizerGrads grads = tok.compute_gradients(corpus[idx], config.weights);
      if (!std::isfinite(grads.loss.total))
        throw DivergedLoss("non-finite tokenizer loss at epoch " + std::to_string(epoch));
      if (!grads.encoder_w.allFinite() || !grads.decoder_w.allFinite() ||
          !grads.encoder_b.allFinite() || !grads.decoder_b.allFinite())
        throw NonFiniteGradient("tokenizer gradient at epoch " + std::to_string(epoch));
      mean.total += grads.loss.total;
      mean.reconstruct += grads.loss.reconstruct;
      mean.commit += grads.loss.commit;
      mean.embed += grads.loss.embed;

      tok.encoder_w() -= config.lr * grads.encoder_w;
      tok.encoder_b() -= config.lr * grads.encoder_b;
      tok.decoder_w() -= config.lr * grads.decoder_w;
      tok.decoder_b() -= config.lr * grads.decoder_b;

      Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_codes);
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_codes, tok.shape().latent_dim);
      for (std::size_t i = 0; i < grads.indices.size(); ++i) {
        counts(grads.indices[i]) += 1.0;
        sums.row(grads.indices[i]) += grads.latents.row(static_cast<Eigen::Index>(i));
      }
      tok.ema_cluster_size() = gamma * tok.ema_cluster_size() + (1 - gamma) * counts;
      tok.ema_embed_sum() = gamma * tok.ema_embed_sum() + (1 - gamma) * sums;
      for (int n = 0; n < n_codes; ++n)
        tok.codebook().row(n) =
            tok.ema_embed_sum().row(n) / std::max(tok.ema_cluster_size()(n), 1e-8);
    }
    const auto n = static_cast<double>(corpus.size());
    mean.total /= n;
    mean.reconstruct /= n;
    mean.commit /= n;
    mean.embed /= n;
    report.trace.push_back(mean);
  }
  return report;
}

}  // namespace motive
