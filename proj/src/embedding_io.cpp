#include "castfruits/embedding_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace castfruits {

namespace {

constexpr std::array<char, 4> kMagic{'E', 'M', 'B', '1'};
constexpr std::uintmax_t kHeaderBytes = 4 + 4 + 8;

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return to_little(v);
}

}  // namespace

void write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.dimension()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(matrix.size()));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(matrix.data().data()),
              static_cast<std::streamsize>(matrix.data().size() * sizeof(float)));
  } else {
    for (float f : matrix.data()) put<float>(out, f);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error(path.string() + ": bad magic, expected EMB1");
  const auto dim = get<std::uint32_t>(in);
  const auto count = get<std::uint64_t>(in);
  if (!in) throw std::runtime_error(path.string() + ": truncated header");
  if (dim == 0) throw std::runtime_error(path.string() + ": zero dimension");
  const std::uintmax_t expected = kHeaderBytes + std::uintmax_t{dim} * count * sizeof(float);
  const std::uintmax_t actual = std::filesystem::file_size(path);
  if (actual != expected) {
    throw std::runtime_error(path.string() + ": size " + std::to_string(actual) +
                             " does not match header (expected " + std::to_string(expected) + ")");
  }
  std::vector<float> data(static_cast<std::size_t>(dim) * count);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!in) throw std::runtime_error(path.string() + ": truncated payload");
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : data) f = to_little(f);
  }
  return EmbeddingMatrix(dim, std::move(data));
}

}  // namespace castfruits
