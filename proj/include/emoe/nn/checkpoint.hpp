#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>

#include "emoe/common.hpp"
#include "emoe/io_util.hpp"
#include "emoe/nn/param.hpp"

namespace emoe::nn {

// Layout (little-endian): magic "EMOECKPT", u32 version, u32 length + bytes
// of a free-form metadata string, u32 parameter count, then per parameter
// u32 name length, name bytes, u32 rows, u32 cols, rows*cols f64 values.
inline constexpr char kCheckpointMagic[8] = {'E', 'M', 'O', 'E', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& s) : s_(s) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s_[pos_++])) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s_[pos_++])) << (8 * i);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string r = s_.substr(pos_, n);
    pos_ += n;
    return r;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw InvalidArgument("checkpoint: truncated file");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const ParamStore& ps, const std::string& meta) {
  std::string out(kCheckpointMagic, 8);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  detail::put_u32(out, static_cast<std::uint32_t>(ps.size()));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& p = ps[i];
    detail::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    detail::put_u32(out, static_cast<std::uint32_t>(p.value.rows));
    detail::put_u32(out, static_cast<std::uint32_t>(p.value.cols));
    for (double v : p.value.d) detail::put_f64(out, v);
  }
  return out;
}

inline void save_checkpoint(const ParamStore& ps, const std::string& meta, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ps, meta));
}

/// Returns the metadata string of a checkpoint without loading parameters.
inline std::string checkpoint_metadata(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  detail::ByteReader r(data);
  if (r.bytes(8) != std::string(kCheckpointMagic, 8)) throw InvalidArgument("checkpoint: bad magic");
  if (r.u32() != kCheckpointVersion) throw InvalidArgument("checkpoint: unsupported version");
  return r.bytes(r.u32());
}

/// Loads values into an already constructed store; names and shapes must match.
inline void load_checkpoint(ParamStore& ps, const std::filesystem::path& path) {
  const std::string data = read_file(path);
  detail::ByteReader r(data);
  if (r.bytes(8) != std::string(kCheckpointMagic, 8)) throw InvalidArgument("checkpoint: bad magic");
  if (r.u32() != kCheckpointVersion) throw InvalidArgument("checkpoint: unsupported version");
  r.bytes(r.u32());
  const std::uint32_t n = r.u32();
  if (n != ps.size()) throw InvalidArgument("checkpoint: parameter count mismatch");
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::string name = r.bytes(r.u32());
    Parameter* p = ps.find(name);
    if (!p) throw InvalidArgument("checkpoint: unknown parameter " + name);
    const std::uint32_t rows = r.u32(), cols = r.u32();
    if (rows != p->value.rows || cols != p->value.cols) throw InvalidArgument("checkpoint: shape mismatch for " + name);
    for (double& v : p->value.d) v = r.f64();
  }
  if (!r.done()) throw InvalidArgument("checkpoint: trailing bytes");
}

}  // namespace emoe::nn
