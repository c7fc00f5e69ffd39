#pragma once

// Checkpoint file layout (all integers little-endian):
//   bytes 0..3   magic "MDPK"
//   u32          format version (1)
//   i32 x5       vocab_size, max_len, embed_dim, num_layers, num_heads
//   i32 x2       eos_id, pad_id
//   u64          init seed (config echo)
//   u64          parameter count N
//   f32 x N      flat parameter array
// optionally followed by an optimizer section:
//   bytes        "OPT1"
//   u64          adam step
//   f32 x N      first moments
//   f32 x N      second moments

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>

#include "mdpo/denoiser.hpp"
#include "mdpo/optimizer.hpp"

namespace mdpo {

namespace detail {
template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}
}  // namespace detail

inline void save_checkpoint(const std::string& path, const DenoiserParams& p,
                            const AdamState* opt = nullptr) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  os.write("MDPK", 4);
  detail::write_pod<std::uint32_t>(os, 1);
  detail::write_pod<std::int32_t>(os, p.cfg.vocab.size);
  detail::write_pod<std::int32_t>(os, p.cfg.max_len);
  detail::write_pod<std::int32_t>(os, p.cfg.embed_dim);
  detail::write_pod<std::int32_t>(os, p.cfg.num_layers);
  detail::write_pod<std::int32_t>(os, p.cfg.num_heads);
  detail::write_pod<std::int32_t>(os, p.cfg.vocab.eos_id);
  detail::write_pod<std::int32_t>(os, p.cfg.vocab.pad_id);
  detail::write_pod<std::uint64_t>(os, p.cfg.seed);
  detail::write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(p.size()));
  for (double v : p.values)
    detail::write_pod<float>(os, static_cast<float>(v));
  if (opt) {
    os.write("OPT1", 4);
    detail::write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(opt->step));
    for (double v : opt->m) detail::write_pod<float>(os, static_cast<float>(v));
    for (double v : opt->v) detail::write_pod<float>(os, static_cast<float>(v));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline DenoiserParams load_checkpoint(const std::string& path,
                                      AdamState* opt = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "MDPK", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  auto version = detail::read_pod<std::uint32_t>(is);
  if (version != 1)
    throw std::runtime_error("checkpoint: unsupported version");
  DenoiserConfig cfg;
  cfg.vocab.size = detail::read_pod<std::int32_t>(is);
  cfg.vocab.mask_id = cfg.vocab.size;
  cfg.max_len = detail::read_pod<std::int32_t>(is);
  cfg.embed_dim = detail::read_pod<std::int32_t>(is);
  cfg.num_layers = detail::read_pod<std::int32_t>(is);
  cfg.num_heads = detail::read_pod<std::int32_t>(is);
  cfg.vocab.eos_id = detail::read_pod<std::int32_t>(is);
  cfg.vocab.pad_id = detail::read_pod<std::int32_t>(is);
  cfg.seed = detail::read_pod<std::uint64_t>(is);
  auto count = detail::read_pod<std::uint64_t>(is);
  DenoiserParams p(cfg);
  if (count != p.size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (auto& v : p.values) v = detail::read_pod<float>(is);
  if (opt) {
    char tag[4];
    is.read(tag, 4);
    if (!is || std::memcmp(tag, "OPT1", 4) != 0)
      throw std::runtime_error("checkpoint: missing optimizer section");
    *opt = AdamState(p.size());
    opt->step = static_cast<long>(detail::read_pod<std::uint64_t>(is));
    for (auto& v : opt->m) v = detail::read_pod<float>(is);
    for (auto& v : opt->v) v = detail::read_pod<float>(is);
  }
  return p;
}

}  // namespace mdpo
