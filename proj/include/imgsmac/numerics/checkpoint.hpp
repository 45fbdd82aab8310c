#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "imgsmac/numerics/param_set.hpp"

namespace imgsmac::numerics {

// Binary layout (little-endian):
//   magic "IMGSCKPT" | u32 version
//   u32 metadata length | metadata bytes (UTF-8, typically JSON)
//   u64 master seed | u64 episode cursor                       -- RNG seed record
//   u32 tensor count | tensors...                              -- parameters
//   u32 tensor count | tensors...                              -- optimizer second moments
// tensor := u32 name length | name | u32 rank | u64 dims[rank] | f64 values[prod(dims)]
inline constexpr std::array<char, 8> kCheckpointMagic = {'I', 'M', 'G', 'S', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct RngRecord {
  std::uint64_t master_seed = 0;
  std::uint64_t episode_cursor = 0;
};

struct Checkpoint {
  std::string metadata;
  RngRecord rng;
  std::vector<NamedTensor> params;
  std::vector<NamedTensor> optimizer;
};

namespace detail {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ConfigError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

inline void put_tensors(std::string& out, const std::vector<NamedTensor>& ts) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ts.size()));
  for (const auto& t : ts) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(out, d);
    for (double v : t.values) put<double>(out, v);
  }
}

inline std::vector<NamedTensor> get_tensors(Reader& in) {
  const auto n = in.get<std::uint32_t>();
  std::vector<NamedTensor> ts(n);
  for (auto& t : ts) {
    t.name = in.get_string(in.get<std::uint32_t>());
    const auto rank = in.get<std::uint32_t>();
    t.shape.resize(rank);
    for (auto& d : t.shape) d = in.get<std::uint64_t>();
    t.values.resize(shape_size(t.shape));
    for (auto& v : t.values) v = in.get<double>();
  }
  return ts;
}

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
  std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.metadata.size()));
  out += ck.metadata;
  detail::put<std::uint64_t>(out, ck.rng.master_seed);
  detail::put<std::uint64_t>(out, ck.rng.episode_cursor);
  detail::put_tensors(out, ck.params);
  detail::put_tensors(out, ck.optimizer);
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  detail::Reader in(bytes);
  const std::string magic = in.get_string(kCheckpointMagic.size());
  if (magic != std::string(kCheckpointMagic.begin(), kCheckpointMagic.end()))
    throw ConfigError("not a checkpoint file (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.metadata = in.get_string(in.get<std::uint32_t>());
  ck.rng.master_seed = in.get<std::uint64_t>();
  ck.rng.episode_cursor = in.get<std::uint64_t>();
  ck.params = detail::get_tensors(in);
  ck.optimizer = detail::get_tensors(in);
  if (!in.done()) throw ConfigError("trailing bytes after checkpoint");
  return ck;
}

/// FNV-1a 64-bit, hex encoded. Used to bind masks and manifests to checkpoint contents.
inline std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <Real Scalar>
std::vector<NamedTensor> export_values(const ParamSet<Scalar>& params, bool optimizer_state) {
  std::vector<NamedTensor> out;
  for (const auto& p : params) {
    const auto& t = optimizer_state ? p.second_moment : p.value;
    out.push_back({p.name, t.shape(), std::vector<double>(t.values().begin(), t.values().end())});
  }
  return out;
}

/// Copies stored tensors into params by name; every parameter must be present with a matching shape.
template <Real Scalar>
void import_values(ParamSet<Scalar>& params, const std::vector<NamedTensor>& tensors, bool optimizer_state) {
  std::unordered_map<std::string, const NamedTensor*> by_name;
  for (const auto& t : tensors) by_name.emplace(t.name, &t);
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    require(it != by_name.end(), "checkpoint is missing tensor '" + p.name + "'");
    auto& dst = optimizer_state ? p.second_moment : p.value;
    require(it->second->shape == dst.shape(), "checkpoint tensor '" + p.name + "' has shape " +
                                                  shape_string(it->second->shape) + ", expected " +
                                                  shape_string(dst.shape()));
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<Scalar>(it->second->values[k]);
  }
}

}  // namespace imgsmac::numerics
