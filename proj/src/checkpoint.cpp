#include "evorl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace evorl {

namespace {

constexpr char kMagic[6] = {'E', 'V', 'O', 'R', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

void append_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Cursor {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw CheckpointError("incompatible checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

struct Parsed {
  std::map<std::string, std::vector<double>> f64;
  std::map<std::string, std::vector<std::int64_t>> i64;
};

void read_one_segment(Cursor& c, Parsed& p) {
  const std::string name = c.str(c.u32());
  const std::uint8_t type = c.u8();
  const std::uint64_t n = c.u64();
  if (type == 0) {
    std::vector<double>& dst = p.f64[name] = {};
    dst.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) dst.push_back(std::bit_cast<double>(c.u64()));
  } else if (type == 1) {
    std::vector<std::int64_t>& dst = p.i64[name] = {};
    dst.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) dst.push_back(std::bit_cast<std::int64_t>(c.u64()));
  } else {
    throw CheckpointError("incompatible checkpoint: unknown segment type");
  }
}

Parsed parse(const std::string& bytes, std::string* workflow_id) {
  Cursor c{bytes};
  if (c.str(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw CheckpointError("incompatible checkpoint: bad magic");
  const std::uint32_t version = c.u32();
  if (version != kVersion)
    throw CheckpointError("incompatible checkpoint: format version " + std::to_string(version));
  *workflow_id = c.str(c.u32());
  const std::uint32_t nseg = c.u32();
  Parsed p;
  for (std::uint32_t s = 0; s < nseg; ++s) read_one_segment(c, p);
  if (c.pos != bytes.size())
    throw CheckpointError("incompatible checkpoint: trailing bytes after last segment");
  return p;
}

}  // namespace

void SegmentWriter::put_f64(const std::string& name, const double* data, std::size_t n) {
  append_u32(buf_, static_cast<std::uint32_t>(name.size()));
  buf_ += name;
  buf_.push_back(0);
  append_u64(buf_, n);
  for (std::size_t i = 0; i < n; ++i) append_u64(buf_, std::bit_cast<std::uint64_t>(data[i]));
  ++count_;
}

void SegmentWriter::put_i64(const std::string& name, const std::int64_t* data, std::size_t n) {
  append_u32(buf_, static_cast<std::uint32_t>(name.size()));
  buf_ += name;
  buf_.push_back(1);
  append_u64(buf_, n);
  for (std::size_t i = 0; i < n; ++i) append_u64(buf_, std::bit_cast<std::uint64_t>(data[i]));
  ++count_;
}

void SegmentWriter::put(const std::string& name, RngKey key) {
  const std::int64_t words[2] = {std::bit_cast<std::int64_t>(key.hi),
                                 std::bit_cast<std::int64_t>(key.lo)};
  put_i64(name, words, 2);
}

void SegmentWriter::put(const std::string& name, const std::vector<std::uint8_t>& flags) {
  std::vector<std::int64_t> words(flags.begin(), flags.end());
  put_i64(name, words.data(), words.size());
}

bool SegmentReader::has(const std::string& name) const {
  return f64_.count(name) > 0 || i64_.count(name) > 0;
}

double SegmentReader::get_f64(const std::string& name) const {
  auto it = f64_.find(name);
  if (it == f64_.end() || it->second.size() != 1)
    throw CheckpointError("checkpoint: missing scalar segment '" + name + "'");
  return it->second[0];
}

std::int64_t SegmentReader::get_i64(const std::string& name) const {
  auto it = i64_.find(name);
  if (it == i64_.end() || it->second.size() != 1)
    throw CheckpointError("checkpoint: missing integer segment '" + name + "'");
  return it->second[0];
}

Vec SegmentReader::get_vec(const std::string& name) const {
  auto it = f64_.find(name);
  if (it == f64_.end()) throw CheckpointError("checkpoint: missing segment '" + name + "'");
  return Eigen::Map<const Vec>(it->second.data(), static_cast<Eigen::Index>(it->second.size()));
}

Mat SegmentReader::get_mat(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
  auto it = f64_.find(name);
  if (it == f64_.end()) throw CheckpointError("checkpoint: missing segment '" + name + "'");
  if (static_cast<Eigen::Index>(it->second.size()) != rows * cols)
    throw CheckpointError("checkpoint: segment '" + name + "' has wrong size");
  return Eigen::Map<const Mat>(it->second.data(), rows, cols);
}

RngKey SegmentReader::get_key(const std::string& name) const {
  auto it = i64_.find(name);
  if (it == i64_.end() || it->second.size() != 2)
    throw CheckpointError("checkpoint: missing key segment '" + name + "'");
  return {std::bit_cast<std::uint64_t>(it->second[0]), std::bit_cast<std::uint64_t>(it->second[1])};
}

std::vector<std::uint8_t> SegmentReader::get_flags(const std::string& name) const {
  auto it = i64_.find(name);
  if (it == i64_.end()) throw CheckpointError("checkpoint: missing segment '" + name + "'");
  return {it->second.begin(), it->second.end()};
}

std::size_t SegmentReader::count(const std::string& name) const {
  if (auto it = f64_.find(name); it != f64_.end()) return it->second.size();
  if (auto it = i64_.find(name); it != i64_.end()) return it->second.size();
  throw CheckpointError("checkpoint: missing segment '" + name + "'");
}

void checkpoint_save(const std::string& path, const std::string& workflow_id,
                     const SegmentWriter& segments) {
  std::string out(kMagic, sizeof(kMagic));
  append_u32(out, kVersion);
  append_u32(out, static_cast<std::uint32_t>(workflow_id.size()));
  out += workflow_id;
  append_u32(out, static_cast<std::uint32_t>(segments.segment_count()));
  out += segments.bytes();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write checkpoint: " + tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("short write to checkpoint: " + tmp);
  }
  std::remove(path.c_str());
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw CheckpointError("cannot finalize checkpoint: " + path);
}

SegmentReader checkpoint_load(const std::string& path, const std::string& expected_workflow_id) {
  std::string id;
  Parsed p = parse(read_file(path), &id);
  if (id != expected_workflow_id)
    throw CheckpointError("incompatible checkpoint: workflow '" + id + "', expected '" +
                          expected_workflow_id + "'");
  SegmentReader r;
  r.f64_ = std::move(p.f64);
  r.i64_ = std::move(p.i64);
  return r;
}

SegmentReader segments_from_bytes(const std::string& bytes) {
  Cursor c{bytes};
  Parsed p;
  while (c.pos < bytes.size()) read_one_segment(c, p);
  SegmentReader r;
  r.f64_ = std::move(p.f64);
  r.i64_ = std::move(p.i64);
  return r;
}

std::string checkpoint_workflow_id(const std::string& path) {
  std::string id;
  parse(read_file(path), &id);
  return id;
}

}  // namespace evorl
