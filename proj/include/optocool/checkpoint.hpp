#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "optocool/policy.hpp"
#include "optocool/reinforce.hpp"

namespace optocool {

// Versioned binary snapshot of a training run. Together with the master
// seed and epoch counter this is enough to resume training bit-exactly:
// all stream ids are derived from (master_seed, absolute epoch), so no
// generator state needs to be carried. Byte layout is documented in
// docs/checkpoint_format_v1.md.
struct Checkpoint {
  std::uint32_t version = 1;
  std::uint64_t master_seed = 0;
  std::int64_t epoch = 0;
  PolicyParams params;
  BaselineState baseline;
};

namespace detail {

inline constexpr char kCheckpointMagic[4] = {'O', 'C', 'P', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct BinWriter {
  std::ofstream out;
  std::string path;

  void bytes(const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
  }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void f64s(const std::vector<double>& vs) {
    for (double v : vs) f64(v);
  }
};

struct BinReader {
  std::ifstream in;
  std::string path;

  void bytes(void* data, std::size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!in || in.gcount() != static_cast<std::streamsize>(n))
      throw std::runtime_error("checkpoint truncated or unreadable: " + path);
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void f64s(std::vector<double>& vs) {
    for (double& v : vs) v = f64();
  }
};

// Weights and biases of each layer in network order ("layer-major"), each
// weight matrix row-major.
inline void write_stack(BinWriter& w, const LayerStack& stack) {
  for (const auto& layer : stack) {
    w.f64s(layer.w);
    w.f64s(layer.b);
  }
}

inline void read_stack(BinReader& r, LayerStack& stack) {
  for (auto& layer : stack) {
    r.f64s(layer.w);
    r.f64s(layer.b);
  }
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (ckpt.version != detail::kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(ckpt.version));
  validate_layer_sizes(ckpt.params.layer_sizes);
  detail::BinWriter w{std::ofstream(path, std::ios::binary), path.string()};
  if (!w.out) throw std::runtime_error("cannot open for writing: " + path.string());

  w.bytes(detail::kCheckpointMagic, 4);
  w.u32(ckpt.version);
  w.u64(ckpt.master_seed);
  w.i64(ckpt.epoch);
  w.u32(static_cast<std::uint32_t>(ckpt.params.layer_sizes.size()));
  for (int s : ckpt.params.layer_sizes) w.u32(static_cast<std::uint32_t>(s));
  detail::write_stack(w, ckpt.params.layers);
  detail::write_stack(w, ckpt.params.adam_m);
  detail::write_stack(w, ckpt.params.adam_v);
  w.i64(ckpt.params.adam_t);
  w.u32(static_cast<std::uint32_t>(ckpt.baseline.epoch_mean_rewards.size()));
  w.f64s(ckpt.baseline.epoch_mean_rewards);
  w.out.flush();
  if (!w.out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  detail::BinReader r{std::ifstream(path, std::ios::binary), path.string()};
  if (!r.in) throw std::runtime_error("cannot open checkpoint: " + path.string());

  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, detail::kCheckpointMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path.string());

  Checkpoint ckpt;
  ckpt.version = r.u32();
  if (ckpt.version != detail::kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(ckpt.version) +
                             " in " + path.string());
  ckpt.master_seed = r.u64();
  ckpt.epoch = r.i64();

  const std::uint32_t n_sizes = r.u32();
  if (n_sizes != 4) throw std::runtime_error("corrupt checkpoint (layer count): " + path.string());
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) {
    const std::uint32_t v = r.u32();
    if (v == 0 || v > (1u << 20))
      throw std::runtime_error("corrupt checkpoint (layer size): " + path.string());
    s = static_cast<int>(v);
  }
  validate_layer_sizes(sizes);

  ckpt.params.layer_sizes = sizes;
  ckpt.params.layers = zero_stack(sizes);
  ckpt.params.adam_m = zero_stack(sizes);
  ckpt.params.adam_v = zero_stack(sizes);
  detail::read_stack(r, ckpt.params.layers);
  detail::read_stack(r, ckpt.params.adam_m);
  detail::read_stack(r, ckpt.params.adam_v);
  ckpt.params.adam_t = r.i64();

  const std::uint32_t n_baseline = r.u32();
  if (n_baseline > (1u << 26))
    throw std::runtime_error("corrupt checkpoint (baseline length): " + path.string());
  ckpt.baseline.epoch_mean_rewards.resize(n_baseline);
  r.f64s(ckpt.baseline.epoch_mean_rewards);

  // there must be nothing after the payload
  char extra;
  r.in.read(&extra, 1);
  if (!r.in.eof()) throw std::runtime_error("trailing bytes in checkpoint: " + path.string());
  return ckpt;
}

}  // namespace optocool
