#include "gicisad/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "gicisad/errors.hpp"

namespace gicisad {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const std::string& s) { out.insert(out.end(), s.begin(), s.end()); }
  std::vector<unsigned char> out;

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& in) : in_(in) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  const std::vector<unsigned char>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const ParamSet& params, const std::string& metadata) {
  Writer w;
  w.bytes(std::string(kCheckpointMagic, sizeof kCheckpointMagic));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(metadata.size()));
  w.bytes(metadata);
  w.u64(params.size());
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) w.u64(d);
    for (double v : p.tensor.values()) w.f32(static_cast<float>(v));
  }
  return std::move(w.out);
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic)) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.metadata = r.bytes(r.u32());
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.bytes(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw DataError("checkpoint entry '" + e.name + "' has implausible rank");
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(static_cast<std::size_t>(r.u64()));
    const std::size_t n = numel(e.shape);
    if (n > bytes.size()) throw DataError("checkpoint entry '" + e.name + "' is truncated");
    e.values.resize(n);
    for (auto& v : e.values) v = r.f32();
    ckpt.entries.push_back(std::move(e));
  }
  if (!r.done()) throw DataError("trailing bytes after checkpoint entries");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const ParamSet& params,
                      const std::string& metadata) {
  const auto bytes = encode_checkpoint(params, metadata);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void load_parameters(const Checkpoint& ckpt, ParamSet& params) {
  for (auto& p : params) {
    const CheckpointEntry* match = nullptr;
    for (const auto& e : ckpt.entries)
      if (e.name == p.name) match = &e;
    if (!match) throw DataError("checkpoint lacks parameter '" + p.name + "'");
    if (match->shape != p.tensor.shape()) {
      throw DataError("parameter '" + p.name + "' has shape " + shape_string(match->shape) +
                      " in the checkpoint, expected " + shape_string(p.tensor.shape()));
    }
    auto values = p.tensor.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = match->values[i];
  }
}

}  // namespace gicisad
