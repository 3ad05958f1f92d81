#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "evorl/net.hpp"
#include "evorl/rng.hpp"

namespace evorl {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint format: magic "EVORL1", u32 format version, length-prefixed
// workflow id, u32 segment count, then named segments. Each segment is
// u32 name length, name bytes, u8 element type (0 = f64, 1 = i64),
// u64 element count, and the payload as little-endian 64-bit words.

class SegmentWriter {
 public:
  void put_f64(const std::string& name, const double* data, std::size_t n);
  void put_i64(const std::string& name, const std::int64_t* data, std::size_t n);

  void put(const std::string& name, double v) { put_f64(name, &v, 1); }
  void put(const std::string& name, std::int64_t v) { put_i64(name, &v, 1); }
  void put(const std::string& name, const Vec& v) {
    put_f64(name, v.data(), static_cast<std::size_t>(v.size()));
  }
  void put(const std::string& name, const Mat& m) {  // column-major flat
    put_f64(name, m.data(), static_cast<std::size_t>(m.size()));
  }
  void put(const std::string& name, RngKey key);
  void put(const std::string& name, const std::vector<std::uint8_t>& flags);  // as i64

  const std::string& bytes() const { return buf_; }
  std::size_t segment_count() const { return count_; }

 private:
  std::string buf_;
  std::size_t count_ = 0;
};

class SegmentReader {
 public:
  bool has(const std::string& name) const;
  double get_f64(const std::string& name) const;
  std::int64_t get_i64(const std::string& name) const;
  Vec get_vec(const std::string& name) const;
  Mat get_mat(const std::string& name, Eigen::Index rows, Eigen::Index cols) const;
  RngKey get_key(const std::string& name) const;
  std::vector<std::uint8_t> get_flags(const std::string& name) const;
  std::size_t count(const std::string& name) const;  // element count; throws if missing

 private:
  friend SegmentReader checkpoint_load(const std::string& path,
                                       const std::string& expected_workflow_id);
  friend SegmentReader segments_from_bytes(const std::string& bytes);
  std::map<std::string, std::vector<double>> f64_;
  std::map<std::string, std::vector<std::int64_t>> i64_;
};

void checkpoint_save(const std::string& path, const std::string& workflow_id,
                     const SegmentWriter& segments);

// Validates magic, version, and workflow id; any truncation or trailing
// garbage raises CheckpointError without returning partial state.
SegmentReader checkpoint_load(const std::string& path, const std::string& expected_workflow_id);

// Workflow id stored in a checkpoint file (validates magic/version only).
std::string checkpoint_workflow_id(const std::string& path);

// Decodes a raw SegmentWriter payload (no file header) back into segments.
SegmentReader segments_from_bytes(const std::string& bytes);

}  // namespace evorl
