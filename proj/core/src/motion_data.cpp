#include "motive/motion_data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "motive/rng.hpp"

namespace motive {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoFailure("read error on " + path.string());
  return std::move(ss).str();
}

void write_file_bytes(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoFailure("write error on " + path.string());
}

void put_u32le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32le(std::string& out, float v) { put_u32le(out, std::bit_cast<uint32_t>(v)); }

uint32_t get_u32le(const std::string& buf, std::size_t at) {
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + at);
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

float get_f32le(const std::string& buf, std::size_t at) {
  return std::bit_cast<float>(get_u32le(buf, at));
}

json parse_json_file(const fs::path& path) {
  const std::string bytes = read_file_bytes(path);
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded()) throw ConfigError("invalid json in " + path.string());
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// ChannelMap / MotionSequence validation
// ---------------------------------------------------------------------------

void ChannelMap::validate(int dim) const {
  std::set<int> seen;
  for (const auto& ja : joint_angle_channels) {
    if (ja.index < 0 || ja.index >= dim)
      throw IndexOutOfRange("joint angle channel " + std::to_string(ja.index) +
                            " outside [0, " + std::to_string(dim) + ")");
    if (!std::isfinite(ja.min) || !std::isfinite(ja.max))
      throw NonFiniteValue("joint limits for channel " + std::to_string(ja.index));
    if (!(ja.min < ja.max))
      throw ConfigError("joint channel " + std::to_string(ja.index) +
                        " needs min < max, got [" + std::to_string(ja.min) + ", " +
                        std::to_string(ja.max) + "]");
    if (!seen.insert(ja.index).second)
      throw ConfigError("channel " + std::to_string(ja.index) + " listed twice");
  }
  for (int v : velocity_channels) {
    if (v < 0 || v >= dim)
      throw IndexOutOfRange("velocity channel " + std::to_string(v) + " outside [0, " +
                            std::to_string(dim) + ")");
    if (!seen.insert(v).second)
      throw ConfigError("channel " + std::to_string(v) + " listed twice");
  }
}

void MotionSequence::validate() const {
  if (frames.rows() < 1 || frames.cols() < 1)
    throw DimensionMismatch("motion needs at least one frame and one channel, got " +
                            std::to_string(frames.rows()) + "x" +
                            std::to_string(frames.cols()));
  if (!frames.allFinite()) {
    for (Eigen::Index r = 0; r < frames.rows(); ++r)
      for (Eigen::Index c = 0; c < frames.cols(); ++c)
        if (!std::isfinite(frames(r, c)))
          throw NonFiniteValue("frame " + std::to_string(r) + " channel " +
                               std::to_string(c));
  }
  if (!std::isfinite(fps) || fps <= 0.f)
    throw ConfigError("fps must be finite and positive, got " + std::to_string(fps));
  if (!channel_map.empty()) channel_map.validate(frame_dim());
}

// ---------------------------------------------------------------------------
// MFB files
// ---------------------------------------------------------------------------

MotionSequence load_motion(const fs::path& path) {
  const std::string buf = read_file_bytes(path);
  if (buf.size() < kMfbHeaderSize)
    throw TruncatedFile(path.string() + ": header needs " + std::to_string(kMfbHeaderSize) +
                        " bytes, file has " + std::to_string(buf.size()));
  if (std::memcmp(buf.data(), kMfbMagic, 4) != 0)
    throw BadMagic(path.string() + ": bad magic at byte 0");
  if (static_cast<uint8_t>(buf[4]) != kMfbVersion)
    throw BadMagic(path.string() + ": unsupported version " +
                   std::to_string(static_cast<unsigned>(static_cast<uint8_t>(buf[4]))) +
                   " at byte 4");
  const uint32_t t = get_u32le(buf, 5);
  const uint32_t d = get_u32le(buf, 9);
  if (t == 0 || d == 0)
    throw DimensionMismatch(path.string() + ": zero frame count or dimension in header");
  const uint64_t want = kMfbHeaderSize + 4ull * t * d;
  if (buf.size() < want)
    throw TruncatedFile(path.string() + ": payload needs " + std::to_string(want) +
                        " bytes, file has " + std::to_string(buf.size()));
  if (buf.size() > want)
    throw IoFailure(path.string() + ": " + std::to_string(buf.size() - want) +
                    " trailing bytes after payload");

  MotionSequence seq;
  seq.fps = get_f32le(buf, 13);
  if (!std::isfinite(seq.fps))
    throw NonFiniteValue(path.string() + ": fps at byte 13");
  seq.frames.resize(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d));
  for (uint64_t i = 0; i < uint64_t{t} * d; ++i) {
    const std::size_t at = kMfbHeaderSize + static_cast<std::size_t>(4 * i);
    const float v = get_f32le(buf, at);
    if (!std::isfinite(v))
      throw NonFiniteValue(path.string() + ": value at byte " + std::to_string(at));
    seq.frames.data()[i] = v;
  }
  seq.validate();
  return seq;
}

void save_motion(const MotionSequence& seq, const fs::path& path) {
  seq.validate();
  const auto t = static_cast<uint32_t>(seq.frame_count());
  const auto d = static_cast<uint32_t>(seq.frame_dim());
  std::string buf;
  buf.reserve(kMfbHeaderSize + 4ull * t * d);
  buf.append(kMfbMagic, 4);
  buf.push_back(static_cast<char>(kMfbVersion));
  put_u32le(buf, t);
  put_u32le(buf, d);
  put_f32le(buf, seq.fps);
  for (uint64_t i = 0; i < uint64_t{t} * d; ++i) put_f32le(buf, seq.frames.data()[i]);
  write_file_bytes(path, buf);
}

// ---------------------------------------------------------------------------
// Mirroring
// ---------------------------------------------------------------------------

MotionSequence mirror(const MotionSequence& seq, std::span<const std::pair<int, int>> swap_pairs,
                      std::span<const int> negate_channels) {
  seq.validate();
  const int d = seq.frame_dim();
  std::set<int> swapped;
  const std::set<int> negated(negate_channels.begin(), negate_channels.end());
  for (const auto& [a, b] : swap_pairs) {
    if (a < 0 || a >= d || b < 0 || b >= d)
      throw IndexOutOfRange("swap pair (" + std::to_string(a) + ", " + std::to_string(b) +
                            ") outside [0, " + std::to_string(d) + ")");
    if (a == b) throw ConfigError("swap pair maps channel " + std::to_string(a) + " to itself");
    if (!swapped.insert(a).second || !swapped.insert(b).second)
      throw ConfigError("channel appears in more than one swap pair");
    // Negation must hit both sides of a pair or neither, otherwise applying
    // the mirror twice would not restore the input.
    if (negated.count(a) != negated.count(b))
      throw ConfigError("swap pair (" + std::to_string(a) + ", " + std::to_string(b) +
                        ") mixes negated and non-negated channels");
  }
  for (int c : negated)
    if (c < 0 || c >= d)
      throw IndexOutOfRange("negate channel " + std::to_string(c) + " outside [0, " +
                            std::to_string(d) + ")");

  MotionSequence out = seq;
  for (const auto& [a, b] : swap_pairs) out.frames.col(a).swap(out.frames.col(b));
  for (int c : negated) out.frames.col(c) = -out.frames.col(c);
  return out;
}

// ---------------------------------------------------------------------------
// CoT records
// ---------------------------------------------------------------------------

std::string_view task_name(Task t) { return t == Task::Understanding ? "und" : "gen"; }

Task task_from_name(std::string_view name) {
  if (name == "und") return Task::Understanding;
  if (name == "gen") return Task::Generation;
  throw ConfigError("unknown task \"" + std::string(name) + "\", expected \"und\" or \"gen\"");
}

void CoTRecord::validate() const {
  if (caption.empty()) throw EmptyText("record caption is empty");
  if (answer_text && answer_text->empty())
    throw EmptyText("answer_text present but empty");
  if (motion_path && motion_path->empty())
    throw ConfigError("motion_path present but empty");
}

std::vector<CoTRecord> load_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open " + path.string() + " for reading");
  std::vector<CoTRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": invalid record json");
    try {
      CoTRecord rec;
      rec.caption = j.at("caption").get<std::string>();
      rec.think = j.value("think", std::string{});
      if (j.contains("answer_text") && !j["answer_text"].is_null())
        rec.answer_text = j["answer_text"].get<std::string>();
      if (j.contains("motion_path") && !j["motion_path"].is_null())
        rec.motion_path = j["motion_path"].get<std::string>();
      rec.task = task_from_name(j.at("task").get<std::string>());
      rec.validate();
      out.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (in.bad()) throw IoFailure("read error on " + path.string());
  return out;
}

void save_records(std::span<const CoTRecord> records, const fs::path& path) {
  std::string buf;
  for (const auto& rec : records) {
    rec.validate();
    json j;
    j["caption"] = rec.caption;
    j["think"] = rec.think;
    if (rec.answer_text) j["answer_text"] = *rec.answer_text;
    if (rec.motion_path) j["motion_path"] = *rec.motion_path;
    j["task"] = std::string(task_name(rec.task));
    buf += j.dump();
    buf += '\n';
  }
  write_file_bytes(path, buf);
}

ChannelMap load_channel_map(const fs::path& path) {
  const json j = parse_json_file(path);
  ChannelMap map;
  try {
    for (const auto& triple : j.at("joint_angle_channels")) {
      if (!triple.is_array() || triple.size() != 3)
        throw ConfigError("joint_angle_channels entries must be [index, min, max]");
      map.joint_angle_channels.push_back({triple[0].get<int>(), triple[1].get<float>(),
                                          triple[2].get<float>()});
    }
    for (const auto& v : j.at("velocity_channels"))
      map.velocity_channels.push_back(v.get<int>());
    map.descriptor = j.value("descriptor", std::string{});
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return map;
}

void save_channel_map(const ChannelMap& map, const fs::path& path) {
  json j;
  j["joint_angle_channels"] = json::array();
  for (const auto& ja : map.joint_angle_channels)
    j["joint_angle_channels"].push_back({ja.index, ja.min, ja.max});
  j["velocity_channels"] = map.velocity_channels;
  j["descriptor"] = map.descriptor;
  write_file_bytes(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Dataset splits
// ---------------------------------------------------------------------------

DatasetSplit split_dataset(std::size_t record_count, double train_ratio, double valid_ratio,
                           double test_ratio, uint64_t seed) {
  if (train_ratio < 0 || valid_ratio < 0 || test_ratio < 0)
    throw ConfigError("split ratios must be nonnegative");
  const double total = train_ratio + valid_ratio + test_ratio;
  if (!(total > 0)) throw ConfigError("split ratios sum to zero");

  std::vector<std::size_t> ids(record_count);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  Rng rng = make_rng(derive_seed(seed, "dataset_split"));
  std::shuffle(ids.begin(), ids.end(), rng);

  const auto n = static_cast<double>(record_count);
  auto n_train = static_cast<std::size_t>(std::llround(n * train_ratio / total));
  auto n_valid = static_cast<std::size_t>(std::llround(n * valid_ratio / total));
  n_train = std::min(n_train, record_count);
  n_valid = std::min(n_valid, record_count - n_train);

  DatasetSplit split;
  split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.valid.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                     ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), ids.end());
  return split;
}

DatasetSplit load_split(const fs::path& path) {
  const json j = parse_json_file(path);
  DatasetSplit split;
  try {
    split.train = j.at("train").get<std::vector<std::size_t>>();
    split.valid = j.at("valid").get<std::vector<std::size_t>>();
    split.test = j.at("test").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  std::set<std::size_t> seen;
  for (const auto* part : {&split.train, &split.valid, &split.test})
    for (std::size_t id : *part)
      if (!seen.insert(id).second)
        throw ConfigError(path.string() + ": id " + std::to_string(id) +
                          " appears in more than one split");
  return split;
}

void save_split(const DatasetSplit& split, const fs::path& path) {
  json j;
  j["train"] = split.train;
  j["valid"] = split.valid;
  j["test"] = split.test;
  write_file_bytes(path, j.dump(2) + "\n");
}

}  // namespace motive
