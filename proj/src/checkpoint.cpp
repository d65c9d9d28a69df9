#include "checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>

namespace dodo {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_bytes(std::FILE* f, const void* p, std::size_t n) {
  if (std::fwrite(p, 1, n, f) != n) fail(Errc::kIo, "checkpoint: short write");
}

void put_u32(std::FILE* f, std::uint32_t v) { put_bytes(f, &v, 4); }
void put_u64(std::FILE* f, std::uint64_t v) { put_bytes(f, &v, 8); }
void put_f64(std::FILE* f, double v) { put_bytes(f, &v, 8); }

void get_bytes(std::FILE* f, void* p, std::size_t n) {
  if (std::fread(p, 1, n, f) != n) fail(Errc::kFormat, "checkpoint: truncated file");
}

std::uint32_t get_u32(std::FILE* f) { std::uint32_t v; get_bytes(f, &v, 4); return v; }
std::uint64_t get_u64(std::FILE* f) { std::uint64_t v; get_bytes(f, &v, 8); return v; }
double get_f64(std::FILE* f) { double v; get_bytes(f, &v, 8); return v; }

}  // namespace

const NamedTensor& Container::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  fail(Errc::kFormat, "checkpoint: missing tensor '" + name + "'");
}

bool Container::contains(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

void write_container(const std::string& path, const Container& c) {
  if (c.magic.size() != 4) fail(Errc::kInvalidArg, "checkpoint: magic must be 4 bytes");
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail(Errc::kIo, "checkpoint: cannot open '" + path + "' for writing");
  put_bytes(f.get(), c.magic.data(), 4);
  put_u32(f.get(), kCheckpointVersion);
  const ModelConfig& m = c.config;
  put_u32(f.get(), m.layers);
  put_u32(f.get(), m.width);
  put_u32(f.get(), m.heads);
  put_u32(f.get(), m.vocab);
  put_u32(f.get(), m.max_pos);
  put_u32(f.get(), m.feature_layer);
  put_f64(f.get(), m.ratio);
  put_u32(f.get(), m.tau);
  put_f64(f.get(), m.lambda);
  put_u32(f.get(), m.segment);
  put_u32(f.get(), static_cast<std::uint32_t>(c.tensors.size()));
  for (const NamedTensor& t : c.tensors) {
    put_u32(f.get(), static_cast<std::uint32_t>(t.name.size()));
    put_bytes(f.get(), t.name.data(), t.name.size());
    put_u32(f.get(), static_cast<std::uint32_t>(t.shape.size()));
    std::size_t numel = 1;
    for (std::size_t d : t.shape) {
      put_u64(f.get(), d);
      numel *= d;
    }
    if (numel != t.data.size())
      fail(Errc::kInvalidArg, "checkpoint: tensor '" + t.name + "' shape/data mismatch");
    put_bytes(f.get(), t.data.data(), t.data.size() * sizeof(double));
  }
  if (std::fflush(f.get()) != 0) fail(Errc::kIo, "checkpoint: flush failed");
}

Container read_container(const std::string& path, const std::string& expected_magic) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) fail(Errc::kIo, "checkpoint: cannot open '" + path + "'");
  Container c;
  char magic[5] = {0};
  get_bytes(f.get(), magic, 4);
  c.magic = magic;
  if (!expected_magic.empty() && c.magic != expected_magic)
    fail(Errc::kFormat, "checkpoint: bad magic '" + c.magic + "', expected '" + expected_magic + "'");
  const std::uint32_t version = get_u32(f.get());
  if (version != kCheckpointVersion)
    fail(Errc::kFormat, "checkpoint: unsupported format version " + std::to_string(version));
  ModelConfig& m = c.config;
  m.layers = get_u32(f.get());
  m.width = get_u32(f.get());
  m.heads = get_u32(f.get());
  m.vocab = get_u32(f.get());
  m.max_pos = get_u32(f.get());
  m.feature_layer = get_u32(f.get());
  m.ratio = get_f64(f.get());
  m.tau = get_u32(f.get());
  m.lambda = get_f64(f.get());
  m.segment = get_u32(f.get());
  const std::uint32_t count = get_u32(f.get());
  c.tensors.resize(count);
  for (NamedTensor& t : c.tensors) {
    const std::uint32_t name_len = get_u32(f.get());
    t.name.resize(name_len);
    get_bytes(f.get(), t.name.data(), name_len);
    const std::uint32_t rank = get_u32(f.get());
    t.shape.resize(rank);
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      t.shape[i] = static_cast<std::size_t>(get_u64(f.get()));
      numel *= t.shape[i];
    }
    t.data.resize(numel);
    get_bytes(f.get(), t.data.data(), numel * sizeof(double));
  }
  return c;
}

}  // namespace dodo
