#include "autotune/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace autotune::nn {

namespace {

constexpr char kMagic[4] = {'A', 'T', 'N', 'N'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t x) {
  unsigned char b[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                        static_cast<unsigned char>(x >> 16), static_cast<unsigned char>(x >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_f32_le(std::ostream& os, const float* data, size_t n) {
  static_assert(sizeof(float) == 4);
  // x86/ARM little-endian fast path; byte-swap otherwise.
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
  } else {
    for (size_t i = 0; i < n; ++i) {
      uint32_t u;
      std::memcpy(&u, &data[i], 4);
      write_u32(os, u);
    }
  }
}

void read_f32_le(std::istream& is, float* data, size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
    if (!is) throw std::runtime_error("checkpoint: truncated payload");
  } else {
    for (size_t i = 0; i < n; ++i) {
      uint32_t u = read_u32(is);
      std::memcpy(&data[i], &u, 4);
    }
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NamedTensorsConst& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_u32(os, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(t->shape.size()));
    for (int d : t->shape) write_u32(os, static_cast<uint32_t>(d));
  }
  for (const auto& [name, t] : tensors) write_f32_le(os, t->data(), t->numel());
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  const uint32_t version = read_u32(is);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const uint32_t count = read_u32(is);
  if (count != tensors.size())
    throw std::runtime_error("checkpoint: tensor count mismatch in " + path.string());
  for (const auto& [name, t] : tensors) {
    const uint32_t name_len = read_u32(is);
    std::string file_name(name_len, '\0');
    is.read(file_name.data(), name_len);
    if (file_name != name)
      throw std::runtime_error("checkpoint: expected tensor '" + name + "', found '" + file_name +
                               "'");
    const uint32_t ndim = read_u32(is);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(read_u32(is));
    if (shape != t->shape)
      throw std::runtime_error("checkpoint: shape mismatch for tensor '" + name + "'");
  }
  for (const auto& [name, t] : tensors) read_f32_le(is, t->data(), t->numel());
}

}  // namespace autotune::nn
