#pragma once
// Versioned binary checkpoints. Layout: magic, version, dimensions and
// flags, vocabulary fingerprints, then every parameter tensor in
// named_tensors() order. All integers and doubles are little-endian;
// save/load round-trips are bit-exact.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "intrasum/model.hpp"

namespace intrasum {

constexpr char kCheckpointMagic[8] = {'I', 'S', 'U', 'M',
                                      'C', 'K', 'P', '1'};
constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  uint64_t input_vocab_hash = 0;
  uint64_t output_vocab_hash = 0;
};

namespace ckpt_detail {

template <class T>
void write_le(std::ofstream& f, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  using U = std::make_unsigned_t<T>;
  U u = static_cast<U>(value);
  for (size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T read_le(std::ifstream& f) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  f.read(reinterpret_cast<char*>(buf), sizeof(T));
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (size_t i = 0; i < sizeof(T); ++i)
    u |= static_cast<U>(buf[i]) << (8 * i);
  return static_cast<T>(u);
}

inline void write_double(std::ofstream& f, double x) {
  write_le<uint64_t>(f, std::bit_cast<uint64_t>(x));
}

inline double read_double(std::ifstream& f) {
  return std::bit_cast<double>(read_le<uint64_t>(f));
}

}  // namespace ckpt_detail

inline void save_checkpoint(const ModelParams& params,
                            const CheckpointMeta& meta,
                            const std::string& path) {
  using namespace ckpt_detail;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot write " + path);
  f.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_le<uint32_t>(f, kCheckpointVersion);
  write_le<int32_t>(f, params.dims.d_emb);
  write_le<int32_t>(f, params.dims.d_enc);
  write_le<int32_t>(f, params.dims.d_dec);
  write_le<int32_t>(f, params.dims.vocab_out);
  write_le<int32_t>(f, params.dims.vocab_merged);
  write_le<uint8_t>(f, params.dims.intra_decoder ? 1 : 0);
  write_le<uint64_t>(f, meta.input_vocab_hash);
  write_le<uint64_t>(f, meta.output_vocab_hash);
  auto named = params.named_tensors();
  write_le<uint32_t>(f, static_cast<uint32_t>(named.size()));
  for (auto& [name, t] : named) {
    write_le<uint16_t>(f, static_cast<uint16_t>(name.size()));
    f.write(name.data(), static_cast<long>(name.size()));
    write_le<uint8_t>(f, t->rank);
    write_le<uint64_t>(f, t->dim[0]);
    write_le<uint64_t>(f, t->dim[1]);
    write_le<uint64_t>(f, t->size());
    for (double x : t->v) write_double(f, x);
  }
  if (!f) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

inline ModelParams load_checkpoint(const std::string& path,
                                   CheckpointMeta* meta_out = nullptr) {
  using namespace ckpt_detail;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot read " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: " + path +
                             " is not a checkpoint file");
  const uint32_t version = read_le<uint32_t>(f);
  if (version != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             std::to_string(version));
  ModelParams p;
  p.dims.d_emb = read_le<int32_t>(f);
  p.dims.d_enc = read_le<int32_t>(f);
  p.dims.d_dec = read_le<int32_t>(f);
  p.dims.vocab_out = read_le<int32_t>(f);
  p.dims.vocab_merged = read_le<int32_t>(f);
  p.dims.intra_decoder = read_le<uint8_t>(f) != 0;
  CheckpointMeta meta;
  meta.input_vocab_hash = read_le<uint64_t>(f);
  meta.output_vocab_hash = read_le<uint64_t>(f);
  if (meta_out != nullptr) *meta_out = meta;

  auto named = p.named_tensors();
  const uint32_t count = read_le<uint32_t>(f);
  if (count != named.size())
    throw std::runtime_error("load_checkpoint: tensor count mismatch");
  for (auto& [name, t] : named) {
    const uint16_t name_len = read_le<uint16_t>(f);
    std::string stored(name_len, '\0');
    f.read(stored.data(), name_len);
    if (stored != name)
      throw std::runtime_error("load_checkpoint: expected tensor '" + name +
                               "', found '" + stored + "'");
    t->rank = read_le<uint8_t>(f);
    t->dim[0] = read_le<uint64_t>(f);
    t->dim[1] = read_le<uint64_t>(f);
    const uint64_t n = read_le<uint64_t>(f);
    t->v.resize(n);
    for (uint64_t i = 0; i < n; ++i) t->v[i] = read_double(f);
  }
  if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path);
  p.dims.validate();
  return p;
}

// Refuses checkpoints produced against different vocabulary contents.
inline void check_vocab_match(const CheckpointMeta& meta,
                              const VocabPair& vocabs,
                              const std::string& context) {
  if (meta.input_vocab_hash != vocabs.input.content_hash() ||
      meta.output_vocab_hash != vocabs.output.content_hash())
    throw std::runtime_error(context +
                             ": checkpoint was built with a different "
                             "vocabulary (fingerprint mismatch)");
}

}  // namespace intrasum
