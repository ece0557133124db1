#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "motive/motion_data.hpp"
#include "motive/rng.hpp"

using namespace motive;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  const fs::path dir =
      fs::temp_directory_path() / ("motive_md_" + std::to_string(::getpid()) + "_" +
                                   std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

MotionSequence random_sequence(int t, int d, uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<float> u(-2.f, 2.f);
  MotionSequence seq;
  seq.frames.resize(t, d);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < d; ++j) seq.frames(i, j) = u(rng);
  seq.fps = 25.f;
  return seq;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_SUITE("motion_data") {

TEST_CASE("mfb round trip is bitwise exact") {
  const fs::path dir = temp_dir();
  const MotionSequence seq = random_sequence(13, 5, 42);
  save_motion(seq, dir / "a.mfb");
  const MotionSequence back = load_motion(dir / "a.mfb");
  CHECK(back.frame_count() == 13);
  CHECK(back.frame_dim() == 5);
  CHECK(back.fps == seq.fps);
  CHECK(back.frames.cwiseEqual(seq.frames).all());
  // file size is fully determined by the header
  CHECK(fs::file_size(dir / "a.mfb") == kMfbHeaderSize + 4u * 13u * 5u);
}

TEST_CASE("mfb loader rejects malformed files") {
  const fs::path dir = temp_dir();
  const MotionSequence seq = random_sequence(4, 3, 7);
  save_motion(seq, dir / "ok.mfb");
  std::vector<char> bytes = slurp(dir / "ok.mfb");

  SUBCASE("short header") {
    spit(dir / "bad.mfb", {bytes.begin(), bytes.begin() + 8});
    CHECK_THROWS_AS(load_motion(dir / "bad.mfb"), TruncatedFile);
  }
  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    spit(dir / "bad.mfb", b);
    CHECK_THROWS_AS(load_motion(dir / "bad.mfb"), BadMagic);
  }
  SUBCASE("bad version") {
    auto b = bytes;
    b[4] = 9;
    spit(dir / "bad.mfb", b);
    CHECK_THROWS_AS(load_motion(dir / "bad.mfb"), BadMagic);
  }
  SUBCASE("short payload") {
    spit(dir / "bad.mfb", {bytes.begin(), bytes.end() - 4});
    CHECK_THROWS_AS(load_motion(dir / "bad.mfb"), TruncatedFile);
  }
  SUBCASE("trailing bytes") {
    auto b = bytes;
    b.push_back('\0');
    spit(dir / "bad.mfb", b);
    CHECK_THROWS_AS(load_motion(dir / "bad.mfb"), IoFailure);
  }
  SUBCASE("non-finite payload value") {
    auto b = bytes;
    // overwrite the first payload float with a quiet NaN
    b[kMfbHeaderSize + 0] = 0x00;
    b[kMfbHeaderSize + 1] = 0x00;
    b[kMfbHeaderSize + 2] = static_cast<char>(0xc0);
    b[kMfbHeaderSize + 3] = 0x7f;
    spit(dir / "bad.mfb", b);
    CHECK_THROWS_AS(load_motion(dir / "bad.mfb"), NonFiniteValue);
  }
}

TEST_CASE("sequence validation") {
  MotionSequence seq = random_sequence(3, 2, 1);
  CHECK_NOTHROW(seq.validate());

  SUBCASE("empty frames") {
    seq.frames.resize(0, 2);
    CHECK_THROWS_AS(seq.validate(), DimensionMismatch);
  }
  SUBCASE("nan frame") {
    seq.frames(1, 1) = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(seq.validate(), NonFiniteValue);
  }
  SUBCASE("bad fps") {
    seq.fps = 0.f;
    CHECK_THROWS_AS(seq.validate(), ConfigError);
  }
}

TEST_CASE("channel map validation") {
  ChannelMap map;
  map.joint_angle_channels = {{0, -1.f, 1.f}, {1, -0.5f, 0.5f}};
  map.velocity_channels = {2};
  CHECK_NOTHROW(map.validate(3));

  SUBCASE("index out of range") {
    map.velocity_channels = {3};
    CHECK_THROWS_AS(map.validate(3), IndexOutOfRange);
  }
  SUBCASE("duplicate across lists") {
    map.velocity_channels = {1};
    CHECK_THROWS_AS(map.validate(3), ConfigError);
  }
  SUBCASE("inverted limits") {
    map.joint_angle_channels[0] = {0, 1.f, -1.f};
    CHECK_THROWS_AS(map.validate(3), ConfigError);
  }
}

TEST_CASE("mirror is an involution and swaps exactly the listed channels") {
  MotionSequence seq = random_sequence(6, 4, 11);
  const std::vector<std::pair<int, int>> pairs = {{0, 1}};
  const std::vector<int> negate = {2};

  const MotionSequence once = mirror(seq, pairs, negate);
  CHECK(once.frames.col(0).cwiseEqual(seq.frames.col(1)).all());
  CHECK(once.frames.col(1).cwiseEqual(seq.frames.col(0)).all());
  CHECK(once.frames.col(2).cwiseEqual((-seq.frames.col(2)).eval()).all());
  CHECK(once.frames.col(3).cwiseEqual(seq.frames.col(3)).all());

  const MotionSequence twice = mirror(once, pairs, negate);
  CHECK(twice.frames.cwiseEqual(seq.frames).all());
}

TEST_CASE("mirror rejects inconsistent specs") {
  const MotionSequence seq = random_sequence(3, 4, 5);
  const std::vector<std::pair<int, int>> self = {{1, 1}};
  CHECK_THROWS_AS(mirror(seq, self, {}), ConfigError);
  const std::vector<std::pair<int, int>> dup = {{0, 1}, {1, 2}};
  CHECK_THROWS_AS(mirror(seq, dup, {}), ConfigError);
  const std::vector<std::pair<int, int>> range = {{0, 9}};
  CHECK_THROWS_AS(mirror(seq, range, {}), IndexOutOfRange);
  // negating one side of a swap pair but not the other breaks the involution
  const std::vector<std::pair<int, int>> pairs = {{0, 1}};
  const std::vector<int> lopsided = {0};
  CHECK_THROWS_AS(mirror(seq, pairs, lopsided), ConfigError);
}

TEST_CASE("record jsonl round trip") {
  const fs::path dir = temp_dir();
  std::vector<CoTRecord> recs(2);
  recs[0].caption = "a person waves";
  recs[0].think = "the arm moves up and down";
  recs[0].answer_text = "the person waves";
  recs[0].task = Task::Understanding;
  recs[0].motion_path = "motions/00000.mfb";
  recs[1].caption = "a person turns";
  recs[1].think = "the torso rotates";
  recs[1].task = Task::Generation;
  recs[1].motion_path = "motions/00001.mfb";

  save_records(recs, dir / "r.jsonl");
  const std::vector<CoTRecord> back = load_records(dir / "r.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].caption == recs[0].caption);
  CHECK(back[0].think == recs[0].think);
  CHECK(back[0].answer_text == recs[0].answer_text);
  CHECK(back[0].motion_path == recs[0].motion_path);
  CHECK(back[0].task == Task::Understanding);
  CHECK(back[1].task == Task::Generation);
  CHECK_FALSE(back[1].answer_text.has_value());
}

TEST_CASE("record loader reports the offending line") {
  const fs::path dir = temp_dir();
  {
    std::ofstream out(dir / "bad.jsonl");
    out << R"({"caption":"ok","think":"t","task":"und"})" << "\n";
    out << "not json\n";
  }
  try {
    load_records(dir / "bad.jsonl");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    // compiler-style location: <path>:2: ...
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("record validation") {
  CoTRecord rec;
  rec.caption = "";
  rec.think = "t";
  CHECK_THROWS_AS(rec.validate(), EmptyText);
  rec.caption = "c";
  rec.answer_text = "";
  CHECK_THROWS_AS(rec.validate(), EmptyText);
  rec.answer_text = "fine";
  rec.motion_path = "";
  CHECK_THROWS_AS(rec.validate(), ConfigError);
}

TEST_CASE("task names round trip") {
  CHECK(task_name(Task::Understanding) == "und");
  CHECK(task_name(Task::Generation) == "gen");
  CHECK(task_from_name("und") == Task::Understanding);
  CHECK(task_from_name("gen") == Task::Generation);
  CHECK_THROWS_AS(task_from_name("nope"), ConfigError);
}

TEST_CASE("split is a deterministic partition") {
  const DatasetSplit s = split_dataset(100, 0.8, 0.15, 0.05, 3);
  CHECK(s.train.size() + s.valid.size() + s.test.size() == 100);
  std::set<std::size_t> seen;
  for (const auto* part : {&s.train, &s.valid, &s.test})
    for (std::size_t id : *part) {
      CHECK(id < 100);
      CHECK(seen.insert(id).second);
    }
  const DatasetSplit again = split_dataset(100, 0.8, 0.15, 0.05, 3);
  CHECK(again.train == s.train);
  CHECK(again.valid == s.valid);
  CHECK(again.test == s.test);
  const DatasetSplit other = split_dataset(100, 0.8, 0.15, 0.05, 4);
  CHECK(other.train != s.train);
}

TEST_CASE("split ratio validation") {
  CHECK_THROWS_AS(split_dataset(10, -0.1, 0.5, 0.5, 0), ConfigError);
  CHECK_THROWS_AS(split_dataset(10, 0, 0, 0, 0), ConfigError);
}

TEST_CASE("split json round trip rejects duplicates") {
  const fs::path dir = temp_dir();
  const DatasetSplit s = split_dataset(20, 0.5, 0.25, 0.25, 9);
  save_split(s, dir / "split.json");
  const DatasetSplit back = load_split(dir / "split.json");
  CHECK(back.train == s.train);
  CHECK(back.valid == s.valid);
  CHECK(back.test == s.test);

  DatasetSplit dup = s;
  dup.valid.push_back(s.train.front());
  save_split(dup, dir / "dup.json");
  CHECK_THROWS_AS(load_split(dir / "dup.json"), ConfigError);
}

TEST_CASE("channel map json round trip") {
  const fs::path dir = temp_dir();
  ChannelMap map;
  map.joint_angle_channels = {{0, -1.f, 1.f}, {2, -0.25f, 0.75f}};
  map.velocity_channels = {1, 3};
  map.descriptor = "test map";
  save_channel_map(map, dir / "cm.json");
  const ChannelMap back = load_channel_map(dir / "cm.json");
  REQUIRE(back.joint_angle_channels.size() == 2);
  CHECK(back.joint_angle_channels[1].index == 2);
  CHECK(back.joint_angle_channels[1].min == doctest::Approx(-0.25f));
  CHECK(back.velocity_channels == map.velocity_channels);
  CHECK(back.descriptor == map.descriptor);
}

}  // TEST_SUITE
