#include "motive/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "motive/rng.hpp"

namespace motive {

namespace fs = std::filesystem;

namespace {

enum class Family { Wave, Step, Turn };

struct ItemPlan {
  Family family;
  bool fast;
  bool left;
  double amplitude;  // fraction of the joint limit, kept at or below 0.8
  int frames;
};

std::string caption_for(const ItemPlan& p) {
  const std::string dir = p.left ? "left" : "right";
  const std::string speed = p.fast ? "quickly" : "slowly";
  switch (p.family) {
    case Family::Wave: return "a person waves the " + dir + " arm " + speed;
    case Family::Step: return "a person steps to the " + dir + " " + speed + " and stops";
    case Family::Turn: return "a person turns " + dir + " " + speed;
  }
  return {};
}

std::string think_for(const ItemPlan& p) {
  const std::string dir = p.left ? "left" : "right";
  const std::string speed = p.fast ? "quickly" : "slowly";
  switch (p.family) {
    case Family::Wave:
      return "the " + dir + " arm swings up and down " + speed + " in a smooth wave";
    case Family::Step:
      return "the body shifts to the " + dir + " " + speed + " with steady steps and stops";
    case Family::Turn:
      return "the torso rotates " + dir + " " + speed + " at a steady rate";
  }
  return {};
}

std::string answer_for(const ItemPlan& p) {
  const std::string dir = p.left ? "left" : "right";
  const std::string speed = p.fast ? "quickly" : "slowly";
  switch (p.family) {
    case Family::Wave: return "the person waves the " + dir + " arm " + speed;
    case Family::Step: return "the person steps to the " + dir + " " + speed + " and stops";
    case Family::Turn: return "the person turns " + dir + " " + speed;
  }
  return {};
}

MotionSequence motion_for(const ItemPlan& p, const SynthConfig& cfg, const ChannelMap& map,
                          Rng& rng) {
  const int t = p.frames;
  const double limit = static_cast<double>(cfg.joint_limit);
  const double vmax = 0.8 * static_cast<double>(cfg.vel_threshold);
  const double amp = p.amplitude * limit;
  const double sign = p.left ? 1.0 : -1.0;
  const double cycles = p.fast ? 3.0 : 1.5;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  MotionSequence seq;
  seq.frames.setZero(t, 6);
  seq.fps = cfg.fps;
  seq.channel_map = map;

  for (int f = 0; f < t; ++f) {
    const double u = static_cast<double>(f) / static_cast<double>(t - 1);
    double j0 = 0, j1 = 0, j2 = 0, v0 = 0, v1 = 0, v2 = 0;
    switch (p.family) {
      case Family::Wave: {
        const double phase = two_pi * cycles * u;
        const double main = amp * std::sin(phase);
        j0 = p.left ? main : 0.3 * main;
        j1 = p.left ? 0.3 * main : main;
        j2 = 0.1 * amp * std::sin(phase * 0.5);
        const double vel = vmax * (p.fast ? 1.0 : 0.5) * std::cos(phase);
        v0 = p.left ? vel : 0.3 * vel;
        v1 = p.left ? 0.3 * vel : vel;
        v2 = 0.1 * vel;
        break;
      }
      case Family::Step: {
        // Hold, ramp across the middle third, hold again.
        double ramp = 0;
        if (u > 1.0 / 3.0) ramp = std::min(1.0, (u - 1.0 / 3.0) * 3.0);
        j0 = sign * amp * ramp;
        j1 = 0.2 * amp * ramp;
        j2 = 0;
        const bool moving = u > 1.0 / 3.0 && u < 2.0 / 3.0;
        const double vel = moving ? (p.fast ? 0.7 : 0.4) * vmax : 0.05 * vmax;
        v0 = sign * vel;
        v1 = 0.2 * vel;
        v2 = 0;
        break;
      }
      case Family::Turn: {
        j2 = sign * amp * u;
        j0 = 0.15 * amp * std::sin(two_pi * u);
        j1 = -0.15 * amp * std::sin(two_pi * u);
        v2 = sign * (p.fast ? 0.7 : 0.35) * vmax;
        v0 = 0.1 * vmax * std::cos(two_pi * u);
        v1 = -0.1 * vmax * std::cos(two_pi * u);
        break;
      }
    }
    seq.frames(f, 0) = static_cast<float>(j0);
    seq.frames(f, 1) = static_cast<float>(j1);
    seq.frames(f, 2) = static_cast<float>(j2);
    seq.frames(f, 3) = static_cast<float>(v0);
    seq.frames(f, 4) = static_cast<float>(v1);
    seq.frames(f, 5) = static_cast<float>(v2);
  }

  if (cfg.noise > 0) {
    std::uniform_real_distribution<double> jitter(-cfg.noise, cfg.noise);
    for (Eigen::Index i = 0; i < seq.frames.size(); ++i)
      seq.frames.data()[i] += static_cast<float>(jitter(rng));
  }
  seq.validate();
  return seq;
}

}  // namespace

SynthCorpus synth_corpus(const SynthConfig& cfg) {
  if (cfg.count < 0) throw ConfigError("corpus count must be nonnegative");
  if (cfg.min_frames < 2 || cfg.max_frames < cfg.min_frames)
    throw ConfigError("frame range must satisfy 2 <= min <= max");
  if (!(cfg.joint_limit > 0) || !(cfg.vel_threshold > 0))
    throw ConfigError("joint limit and velocity threshold must be positive");
  if (cfg.noise < 0) throw ConfigError("noise must be nonnegative");

  SynthCorpus corpus;
  corpus.channel_map.joint_angle_channels = {
      {0, -cfg.joint_limit, cfg.joint_limit},
      {1, -cfg.joint_limit, cfg.joint_limit},
      {2, -cfg.joint_limit, cfg.joint_limit},
  };
  corpus.channel_map.velocity_channels = {3, 4, 5};
  corpus.channel_map.descriptor =
      "synthetic humanoid: 3 joint angle channels with symmetric limits, 3 velocity channels";

  Rng rng = make_rng(derive_seed(cfg.seed, "synth_corpus"));
  std::uniform_int_distribution<int> frame_dist(cfg.min_frames, cfg.max_frames);
  std::uniform_real_distribution<double> amp_dist(0.5, 0.8);
  std::uniform_int_distribution<int> coin(0, 1);

  for (int i = 0; i < cfg.count; ++i) {
    ItemPlan plan;
    plan.family = static_cast<Family>(i % 3);
    plan.fast = coin(rng) == 1;
    plan.left = coin(rng) == 1;
    plan.amplitude = amp_dist(rng);
    plan.frames = frame_dist(rng);

    SynthItem item;
    item.motion = motion_for(plan, cfg, corpus.channel_map, rng);
    item.record.caption = caption_for(plan);
    item.record.think = think_for(plan);
    item.record.answer_text = answer_for(plan);
    item.record.task = i % 2 == 0 ? Task::Understanding : Task::Generation;
    corpus.items.push_back(std::move(item));
  }
  return corpus;
}

void write_corpus(const SynthCorpus& corpus, const fs::path& dir, double train_ratio,
                  double valid_ratio, double test_ratio, uint64_t seed) {
  fs::create_directories(dir / "motions");
  std::vector<CoTRecord> records;
  records.reserve(corpus.items.size());
  for (std::size_t i = 0; i < corpus.items.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "motions/%05zu.mfb", i);
    save_motion(corpus.items[i].motion, dir / name);
    CoTRecord rec = corpus.items[i].record;
    rec.motion_path = name;
    records.push_back(std::move(rec));
  }
  save_records(records, dir / "records.jsonl");
  save_channel_map(corpus.channel_map, dir / "channel_map.json");
  save_split(split_dataset(corpus.items.size(), train_ratio, valid_ratio, test_ratio, seed),
             dir / "split.json");
}

LoadedCorpus load_corpus(const fs::path& dir) {
  LoadedCorpus out;
  out.records = load_records(dir / "records.jsonl");
  out.channel_map = load_channel_map(dir / "channel_map.json");
  out.split = load_split(dir / "split.json");
  out.motions.reserve(out.records.size());
  for (const auto& rec : out.records) {
    if (!rec.motion_path)
      throw ConfigError("corpus record without motion_path cannot be loaded as a pair");
    MotionSequence m = load_motion(dir / *rec.motion_path);
    m.channel_map = out.channel_map;
    m.validate();
    out.motions.push_back(std::move(m));
  }
  return out;
}

}  // namespace motive
