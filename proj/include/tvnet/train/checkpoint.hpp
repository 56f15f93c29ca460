#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "tvnet/errors.hpp"
#include "tvnet/model/tvnet.hpp"
#include "tvnet/train/optim.hpp"

namespace tvnet {

// Single-file binary checkpoint: magic + version, an embedded flat-config
// snapshot (enough to rebuild the model), training counters, RNG state, all
// named parameters and buffers, and the optimizer state. Raw little-endian
// doubles, so save/load round-trips are bit-exact.
inline constexpr char kCheckpointMagic[8] = {'T', 'V', 'N', 'E', 'T', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckpt_detail {

inline void write_string(std::ostream& os, const std::string& s) {
  std::uint64_t n = s.size();
  os.write(reinterpret_cast<const char*>(&n), sizeof(n));
  os.write(s.data(), static_cast<std::streamsize>(n));
}
inline std::string read_string(std::istream& is) {
  std::uint64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), sizeof(n));
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}
inline void write_tensor(std::ostream& os, const Tensor& t) {
  const Shape& s = t.shape();
  std::int32_t dims[4] = {s.n, s.c, s.h, s.w};
  os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(double)));
}
inline void read_tensor_into(std::istream& is, Tensor& t, const std::string& name) {
  std::int32_t dims[4];
  is.read(reinterpret_cast<char*>(dims), sizeof(dims));
  check(Shape{dims[0], dims[1], dims[2], dims[3]} == t.shape(),
        "checkpoint: shape mismatch for " + name);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

}  // namespace ckpt_detail

inline void save_checkpoint(const std::filesystem::path& path, const TvNet& model,
                            const Optimizer& opt, std::int64_t epoch,
                            std::int64_t iteration, const Rng& train_rng,
                            const std::string& config_text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint: " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  os.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof(kCheckpointVersion));
  ckpt_detail::write_string(os, config_text);
  os.write(reinterpret_cast<const char*>(&epoch), sizeof(epoch));
  os.write(reinterpret_cast<const char*>(&iteration), sizeof(iteration));
  ckpt_detail::write_string(os, train_rng.state());

  const ParamStore& store = model.params();
  std::uint64_t n_params = store.params().size();
  os.write(reinterpret_cast<const char*>(&n_params), sizeof(n_params));
  for (const auto& p : store.params()) {
    ckpt_detail::write_string(os, p.name);
    ckpt_detail::write_tensor(os, p.var.value());
  }
  std::uint64_t n_buffers = store.buffers().size();
  os.write(reinterpret_cast<const char*>(&n_buffers), sizeof(n_buffers));
  for (const auto& b : store.buffers()) {
    ckpt_detail::write_string(os, b.name);
    ckpt_detail::write_tensor(os, *b.tensor);
  }
  opt.serialize(os);
  if (!os) throw DataError("checkpoint write failed (disk full?): " + path.string());
}

struct CheckpointMeta {
  std::string config_text;
  std::int64_t epoch = 0;
  std::int64_t iteration = 0;
  std::string rng_state;
};

// Reads only the embedded config snapshot, for rebuilding the model first.
inline CheckpointMeta peek_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read checkpoint: " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  check(std::equal(magic, magic + 8, kCheckpointMagic), "not a checkpoint file: " + path.string());
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  check(version == kCheckpointVersion, "unsupported checkpoint version");
  CheckpointMeta meta;
  meta.config_text = ckpt_detail::read_string(is);
  is.read(reinterpret_cast<char*>(&meta.epoch), sizeof(meta.epoch));
  is.read(reinterpret_cast<char*>(&meta.iteration), sizeof(meta.iteration));
  meta.rng_state = ckpt_detail::read_string(is);
  return meta;
}

// Fills the model (and optionally the optimizer) from the file. The model
// must have been built from the checkpoint's own config snapshot.
inline CheckpointMeta load_checkpoint(const std::filesystem::path& path, TvNet& model,
                                      Optimizer* opt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read checkpoint: " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  check(std::equal(magic, magic + 8, kCheckpointMagic), "not a checkpoint file: " + path.string());
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  check(version == kCheckpointVersion, "unsupported checkpoint version");
  CheckpointMeta meta;
  meta.config_text = ckpt_detail::read_string(is);
  is.read(reinterpret_cast<char*>(&meta.epoch), sizeof(meta.epoch));
  is.read(reinterpret_cast<char*>(&meta.iteration), sizeof(meta.iteration));
  meta.rng_state = ckpt_detail::read_string(is);

  ParamStore& store = model.params();
  std::uint64_t n_params = 0;
  is.read(reinterpret_cast<char*>(&n_params), sizeof(n_params));
  check(n_params == store.params().size(), "checkpoint: parameter count mismatch");
  for (auto& p : store.params()) {
    std::string name = ckpt_detail::read_string(is);
    check(name == p.name, "checkpoint: expected parameter " + p.name + ", found " + name);
    ckpt_detail::read_tensor_into(is, p.var.value_mut(), name);
  }
  std::uint64_t n_buffers = 0;
  is.read(reinterpret_cast<char*>(&n_buffers), sizeof(n_buffers));
  check(n_buffers == store.buffers().size(), "checkpoint: buffer count mismatch");
  for (auto& b : store.buffers()) {
    std::string name = ckpt_detail::read_string(is);
    check(name == b.name, "checkpoint: expected buffer " + b.name + ", found " + name);
    ckpt_detail::read_tensor_into(is, *b.tensor, name);
  }
  if (opt) opt->deserialize(is);
  check(static_cast<bool>(is), "checkpoint: truncated file " + path.string());
  return meta;
}

}  // namespace tvnet
