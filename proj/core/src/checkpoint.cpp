#include "ctxnmt/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace ctxnmt {

namespace {

constexpr char kMagic[8] = {'C', 'T', 'X', 'N', 'M', 'T', '1', '\n'};
constexpr std::uint32_t kMaxNameLen = 1u << 20;
constexpr std::uint32_t kMaxRank = 8;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("checkpoint: " + what + " in " + path);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::uint32_t get_u32(std::istream& in, const std::string& path, const char* what) {
  char b[4];
  if (!in.read(b, 4)) fail(path, std::string("truncated ") + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  }
  return v;
}

std::uint64_t get_u64(std::istream& in, const std::string& path, const char* what) {
  char b[8];
  if (!in.read(b, 8)) fail(path, std::string("truncated ") + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  }
  return v;
}

void write_entry(std::ostream& out, const std::string& name, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape) put_u64(out, static_cast<std::uint64_t>(d));
  for (double v : t.values) put_f64(out, v);
}

void write_file(const std::string& path,
                const std::vector<std::pair<std::string, const Tensor*>>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  put_u64(out, entries.size());
  for (const auto& [name, t] : entries) write_entry(out, name, *t);
  out.flush();
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& entries) {
  write_file(path, entries);
}

void save_checkpoint(const std::string& path, const NamedTensors& entries) {
  std::vector<std::pair<std::string, const Tensor*>> ptrs;
  ptrs.reserve(entries.size());
  for (const auto& [name, t] : entries) ptrs.emplace_back(name, &t);
  write_file(path, ptrs);
}

NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMagic)) {
    fail(path, "bad magic");
  }
  const std::uint64_t count = get_u64(in, path, "entry count");
  NamedTensors entries;
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::uint32_t name_len = get_u32(in, path, "name length");
    if (name_len > kMaxNameLen) fail(path, "absurd name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) fail(path, "truncated name");
    const std::uint32_t rank = get_u32(in, path, "rank");
    if (rank > kMaxRank) fail(path, "absurd rank " + std::to_string(rank));
    std::vector<int> shape(rank);
    std::uint64_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint64_t d = get_u64(in, path, "dimension");
      if (d == 0 || d > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
        fail(path, "absurd dimension in entry \"" + name + "\"");
      }
      shape[i] = static_cast<int>(d);
      numel *= d;
      if (numel > (std::uint64_t{1} << 33)) {
        fail(path, "absurd entry size for \"" + name + "\"");
      }
    }
    std::vector<double> values(numel);
    for (std::uint64_t i = 0; i < numel; ++i) {
      values[i] = std::bit_cast<double>(get_u64(in, path, "payload"));
    }
    entries.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  // Trailing bytes mean the file was not written by this code path.
  if (in.peek() != std::char_traits<char>::eof()) fail(path, "trailing bytes");
  return entries;
}

}  // namespace ctxnmt
