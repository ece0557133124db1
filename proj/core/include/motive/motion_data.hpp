#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "motive/error.hpp"

namespace motive {

/// Row-major so the in-memory layout matches the on-disk MFB payload.
using FrameMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Declares which feature channels carry joint angles (with limits, radians)
/// and which carry velocities. Stands in for a full skeletal layout; the
/// physical-plausibility reward only needs these two channel classes.
struct ChannelMap {
  struct JointAngle {
    int index = 0;
    float min = 0.f;
    float max = 0.f;
  };
  std::vector<JointAngle> joint_angle_channels;
  std::vector<int> velocity_channels;
  std::string descriptor;

  bool empty() const { return joint_angle_channels.empty() && velocity_channels.empty(); }

  /// Throws IndexOutOfRange / ConfigError when indices repeat, overlap
  /// between the two lists, exceed dim, or a joint triple has min >= max.
  void validate(int dim) const;
};

/// T x D frame features at a fixed frame rate. Immutable by convention once
/// built; every consumer treats it as read-only.
struct MotionSequence {
  FrameMatrix frames;
  float fps = 30.f;
  ChannelMap channel_map;

  int frame_count() const { return static_cast<int>(frames.rows()); }
  int frame_dim() const { return static_cast<int>(frames.cols()); }

  /// Enforces T >= 1, D >= 1, finite entries and channel-map consistency.
  void validate() const;
};

// ---------------------------------------------------------------------------
// MFB motion file: "MOTF", u8 version=1, u32le T, u32le D, f32le fps,
// then T*D f32le values row-major. Size = 17 + 4*T*D bytes.
// ---------------------------------------------------------------------------

inline constexpr char kMfbMagic[4] = {'M', 'O', 'T', 'F'};
inline constexpr uint8_t kMfbVersion = 1;
inline constexpr std::size_t kMfbHeaderSize = 17;

/// Errors carry the byte offset of the first offending byte.
MotionSequence load_motion(const std::filesystem::path& path);

/// Rejects sequences violating their invariants before touching the file.
void save_motion(const MotionSequence& seq, const std::filesystem::path& path);

/// Channel-level left/right mirroring: swap the channels in each pair per
/// frame, then negate the listed channels. Involution by construction.
MotionSequence mirror(const MotionSequence& seq,
                      std::span<const std::pair<int, int>> swap_pairs,
                      std::span<const int> negate_channels);

// ---------------------------------------------------------------------------
// CoT records
// ---------------------------------------------------------------------------

enum class Task { Understanding, Generation };

std::string_view task_name(Task t);
Task task_from_name(std::string_view name);

/// One caption/trace/answer record. Motion payloads live out-of-band in MFB
/// files referenced by motion_path.
struct CoTRecord {
  std::string caption;
  std::string think;
  std::optional<std::string> answer_text;
  std::optional<std::string> motion_path;
  Task task = Task::Understanding;

  void validate() const;
};

/// JSON-lines, one object per line with keys caption / think / answer_text
/// (optional) / motion_path (optional) / task ("und"|"gen").
std::vector<CoTRecord> load_records(const std::filesystem::path& path);
void save_records(std::span<const CoTRecord> records, const std::filesystem::path& path);

ChannelMap load_channel_map(const std::filesystem::path& path);
void save_channel_map(const ChannelMap& map, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dataset splits
// ---------------------------------------------------------------------------

struct DatasetSplit {
  std::vector<std::size_t> train, valid, test;
};

/// Seeded shuffle then contiguous partition; ratios must be nonnegative and
/// sum to something positive (they are renormalized). Defaults 0.8/0.15/0.05.
DatasetSplit split_dataset(std::size_t record_count, double train_ratio, double valid_ratio,
                           double test_ratio, uint64_t seed);

DatasetSplit load_split(const std::filesystem::path& path);
void save_split(const DatasetSplit& split, const std::filesystem::path& path);

}  // namespace motive
