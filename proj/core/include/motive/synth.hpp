#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "motive/motion_data.hpp"

namespace motive {

/// Procedural corpus: three motion families (wave, step, turn) with caption,
/// reasoning trace and description templates that share vocabulary, so the
/// semantic and coherence rewards have real signal to measure. Channels 0-2
/// are joint angles with symmetric limits, channels 3-5 are velocities.
/// With noise at zero every sequence stays inside its limits, so the
/// physical plausibility penalty is exactly zero on clean data.
struct SynthConfig {
  int count = 384;
  float fps = 20.f;
  int min_frames = 16;
  int max_frames = 32;
  float joint_limit = 1.0f;    // radians, applied as [-limit, limit]
  float vel_threshold = 1.0f;  // clean data stays at 80% of this
  double noise = 0.0;          // uniform additive noise amplitude
  uint64_t seed = 0;
};

struct SynthItem {
  MotionSequence motion;
  CoTRecord record;  // motion_path is filled in when the corpus is written
};

struct SynthCorpus {
  std::vector<SynthItem> items;
  ChannelMap channel_map;
};

SynthCorpus synth_corpus(const SynthConfig& config);

/// Writes motions/NNNN.mfb, records.jsonl, channel_map.json and split.json
/// under dir. Record order equals item order; split ids index into it.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir,
                  double train_ratio, double valid_ratio, double test_ratio, uint64_t seed);

struct LoadedCorpus {
  std::vector<CoTRecord> records;
  std::vector<MotionSequence> motions;  // aligned with records, channel map attached
  ChannelMap channel_map;
  DatasetSplit split;
};

LoadedCorpus load_corpus(const std::filesystem::path& dir);

}  // namespace motive
