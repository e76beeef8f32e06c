#include "lsc/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "lsc/common.hpp"

namespace lsc::numcore {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'C', 'K', 'P', 'T', '0', '1'};
constexpr uint32_t kVersion = 1;

static_assert(sizeof(double) == 8);

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_doubles(std::ostream& os, const std::vector<double>& vals) {
  for (double d : vals) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(os, bits);
  }
}

}  // namespace

void save_checkpoint(const ParamSet& ps, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("checkpoint: cannot open for write: " + path);
  os.write(kMagic, 8);
  write_u32(os, kVersion);
  write_u64(os, ps.entries.size());
  for (const auto& [name, e] : ps.entries) {  // std::map -> sorted by name
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(e.value.shape.size()));
    for (int64_t d : e.value.shape) write_u64(os, static_cast<uint64_t>(d));
    write_doubles(os, e.value.data);
  }
  if (!os) throw CheckpointError("checkpoint: write failed: " + path);
}

ParamSet load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("checkpoint: cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError("checkpoint: bad magic: " + path);
  if (read_u32(is) != kVersion) throw CheckpointError("checkpoint: unsupported version: " + path);
  const uint64_t count = read_u64(is);
  ParamSet ps;
  for (uint64_t i = 0; i < count; ++i) {
    const uint32_t len = read_u32(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    const uint32_t rank = read_u32(is);
    std::vector<int64_t> shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int64_t>(read_u64(is));
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.data) {
      const uint64_t bits = read_u64(is);
      std::memcpy(&v, &bits, 8);
    }
    if (!is) throw CheckpointError("checkpoint: truncated file: " + path);
    ps.add(name, std::move(t));
  }
  return ps;
}

void save_groups(const std::map<std::string, const ParamSet*>& groups, const std::string& path) {
  ParamSet merged;
  for (const auto& [g, ps] : groups)
    for (const auto& [name, e] : ps->entries) merged.add(g + "/" + name, e.value);
  save_checkpoint(merged, path);
}

std::map<std::string, ParamSet> load_groups(const std::string& path) {
  ParamSet merged = load_checkpoint(path);
  std::map<std::string, ParamSet> out;
  for (const auto& [full, e] : merged.entries) {
    const size_t slash = full.find('/');
    if (slash == std::string::npos) throw CheckpointError("checkpoint: entry without group: " + full);
    out[full.substr(0, slash)].add(full.substr(slash + 1), e.value);
  }
  return out;
}

}  // namespace lsc::numcore
