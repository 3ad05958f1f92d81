#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "evorl/checkpoint.hpp"
#include "evorl/rng.hpp"

using namespace evorl;

namespace {

std::filesystem::path temp_path(const std::string& stem) {
  static int counter = 0;
  return std::filesystem::temp_directory_path() / (stem + "_" + std::to_string(counter++) + ".ckpt");
}

struct TempCkpt {
  std::string path;
  explicit TempCkpt(const std::string& stem = "ckpt_test") : path(temp_path(stem).string()) {}
  ~TempCkpt() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

SegmentWriter sample_segments() {
  SegmentWriter w;
  w.put("pi", 3.141592653589793);
  w.put("iteration", std::int64_t{123456789012345});
  Vec v(4);
  v << 1.5, -2.25, 0.0, 1e-300;
  w.put("params", v);
  Mat m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  w.put("cov", m);
  w.put("rng", RngKey{0xDEADBEEFCAFEF00Dull, 0x0123456789ABCDEFull});
  w.put("flags", std::vector<std::uint8_t>{1, 0, 0, 1, 1});
  return w;
}

void check_sample(const SegmentReader& r) {
  CHECK(r.get_f64("pi") == 3.141592653589793);
  CHECK(r.get_i64("iteration") == 123456789012345);
  const Vec v = r.get_vec("params");
  REQUIRE(v.size() == 4);
  CHECK(v[0] == 1.5);
  CHECK(v[1] == -2.25);
  CHECK(v[2] == 0.0);
  CHECK(v[3] == 1e-300);
  const Mat m = r.get_mat("cov", 2, 3);
  CHECK(m(0, 0) == 1);
  CHECK(m(1, 0) == 4);
  CHECK(m(0, 2) == 3);
  CHECK(m(1, 2) == 6);
  const RngKey k = r.get_key("rng");
  CHECK(k.hi == 0xDEADBEEFCAFEF00Dull);
  CHECK(k.lo == 0x0123456789ABCDEFull);
  CHECK(r.get_flags("flags") == std::vector<std::uint8_t>{1, 0, 0, 1, 1});
  CHECK(r.count("params") == 4);
  CHECK(r.count("cov") == 6);
  CHECK(r.has("pi"));
  CHECK_FALSE(r.has("absent"));
}

}  // namespace

TEST_CASE("segment payload roundtrips in memory") {
  const SegmentWriter w = sample_segments();
  CHECK(w.segment_count() == 6);
  check_sample(segments_from_bytes(w.bytes()));
}

TEST_CASE("empty payload roundtrips") {
  SegmentWriter w;
  CHECK(w.segment_count() == 0);
  const SegmentReader r = segments_from_bytes(w.bytes());
  CHECK_FALSE(r.has("anything"));

  TempCkpt f;
  checkpoint_save(f.path, "es", w);
  (void)checkpoint_load(f.path, "es");
  CHECK(checkpoint_workflow_id(f.path) == "es");
}

TEST_CASE("file roundtrip preserves every word") {
  TempCkpt f;
  checkpoint_save(f.path, "td3", sample_segments());
  check_sample(checkpoint_load(f.path, "td3"));
  CHECK(checkpoint_workflow_id(f.path) == "td3");
}

TEST_CASE("workflow id mismatch is rejected") {
  TempCkpt f;
  checkpoint_save(f.path, "td3", sample_segments());
  CHECK_THROWS_AS((void)checkpoint_load(f.path, "ppo"), CheckpointError);
}

TEST_CASE("missing or mistyped segments throw") {
  const SegmentReader r = segments_from_bytes(sample_segments().bytes());
  CHECK_THROWS_AS((void)r.get_f64("absent"), CheckpointError);
  CHECK_THROWS_AS((void)r.get_i64("absent"), CheckpointError);
  CHECK_THROWS_AS((void)r.get_vec("absent"), CheckpointError);
  CHECK_THROWS_AS((void)r.get_key("absent"), CheckpointError);
  CHECK_THROWS_AS((void)r.count("absent"), CheckpointError);
  // type confusion: "pi" is f64, "iteration" is i64
  CHECK_THROWS_AS((void)r.get_i64("pi"), CheckpointError);
  CHECK_THROWS_AS((void)r.get_f64("iteration"), CheckpointError);
  // scalar getters demand exactly one element, keys exactly two
  CHECK_THROWS_AS((void)r.get_f64("params"), CheckpointError);
  CHECK_THROWS_AS((void)r.get_key("iteration"), CheckpointError);
  // matrix extent must match the stored element count
  CHECK_THROWS_AS((void)r.get_mat("cov", 3, 3), CheckpointError);
}

TEST_CASE("truncated files are rejected at any cut point") {
  TempCkpt f;
  checkpoint_save(f.path, "erl", sample_segments());
  const std::string whole = slurp(f.path);
  REQUIRE(whole.size() > 40);
  // Cut inside the header, inside a segment name, and inside a payload.
  for (const std::size_t keep :
       {std::size_t{3}, std::size_t{9}, std::size_t{17}, whole.size() / 2, whole.size() - 1}) {
    TempCkpt cut;
    spit(cut.path, whole.substr(0, keep));
    CHECK_THROWS_AS((void)checkpoint_load(cut.path, "erl"), CheckpointError);
  }
}

TEST_CASE("trailing garbage is rejected") {
  TempCkpt f;
  checkpoint_save(f.path, "erl", sample_segments());
  spit(f.path, slurp(f.path) + "x");
  CHECK_THROWS_AS((void)checkpoint_load(f.path, "erl"), CheckpointError);
}

TEST_CASE("bad magic and unknown version are rejected") {
  TempCkpt f;
  checkpoint_save(f.path, "es", sample_segments());
  std::string bytes = slurp(f.path);

  std::string corrupted = bytes;
  corrupted[0] = 'X';
  spit(f.path, corrupted);
  CHECK_THROWS_AS((void)checkpoint_load(f.path, "es"), CheckpointError);
  CHECK_THROWS_AS((void)checkpoint_workflow_id(f.path), CheckpointError);

  corrupted = bytes;
  corrupted[6] = 2;  // version u32 follows the 6-byte magic
  spit(f.path, corrupted);
  CHECK_THROWS_AS((void)checkpoint_load(f.path, "es"), CheckpointError);
}

TEST_CASE("unknown segment type byte is rejected") {
  SegmentWriter w;
  w.put("x", 1.0);
  std::string bytes = w.bytes();
  // layout: u32 name_len, name, u8 type, ...
  bytes[4 + 1] = 7;
  CHECK_THROWS_AS((void)segments_from_bytes(bytes), CheckpointError);
}

TEST_CASE("save replaces existing files and leaves no temp behind") {
  TempCkpt f;
  SegmentWriter w1;
  w1.put("gen", std::int64_t{1});
  checkpoint_save(f.path, "es", w1);
  SegmentWriter w2;
  w2.put("gen", std::int64_t{2});
  checkpoint_save(f.path, "es", w2);
  CHECK(checkpoint_load(f.path, "es").get_i64("gen") == 2);
  CHECK_FALSE(std::filesystem::exists(f.path + ".tmp"));
}

TEST_CASE("missing file raises a checkpoint error") {
  CHECK_THROWS_AS((void)checkpoint_load("/nonexistent/x.ckpt", "es"), CheckpointError);
  CHECK_THROWS_AS((void)checkpoint_workflow_id("/nonexistent/x.ckpt"), CheckpointError);
}
