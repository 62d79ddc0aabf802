#pragma once
// Unit-norm embedding vectors and the similarity primitives every cleaning
// and evaluation stage is built on.
//
// Components are stored as 32-bit floats. Dot products and means accumulate
// in double so results do not depend on summation order beyond ~1e-12.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace castfruits {

inline constexpr std::size_t kDefaultDimension = 512;
inline constexpr double kUnitNormTolerance = 1e-5;

// Cosine similarity, clamped to [-1, 1] on construction.
class Similarity {
 public:
  constexpr Similarity() = default;
  explicit Similarity(double value);

  constexpr double value() const { return value_; }
  constexpr operator double() const { return value_; }

 private:
  double value_ = 0.0;
};

// A finite, unit-norm vector. Only constructible through normalize() or
// from components already known to be unit length.
class Embedding {
 public:
  Embedding() = default;

  // Throws std::invalid_argument unless `unit` is finite and has L2 norm
  // within kUnitNormTolerance of 1.
  static Embedding from_unit(std::vector<float> unit);

  std::size_t dimension() const { return values_.size(); }
  std::span<const float> values() const { return values_; }
  operator std::span<const float>() const { return values_; }
  float operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const Embedding&) const = default;

 private:
  explicit Embedding(std::vector<float> v) : values_(std::move(v)) {}
  friend Embedding normalize(std::span<const float> raw);
  friend Embedding normalize(std::span<const double> raw);

  std::vector<float> values_;
};

// Scales `raw` to unit L2 norm. Throws "non-finite input" on NaN/Inf and
// "degenerate embedding" on a zero vector.
Embedding normalize(std::span<const float> raw);
Embedding normalize(std::span<const double> raw);

// Double-accumulated dot product. Throws on dimension mismatch.
double dot(std::span<const float> a, std::span<const float> b);

Similarity cosine(std::span<const float> a, std::span<const float> b);

// Renormalized arithmetic mean. Throws on an empty list and "degenerate
// centroid" when the mean's norm is below 1e-6.
Embedding centroid(std::span<const Embedding> members);

// Same as above over rows gathered from a matrix (see EmbeddingMatrix).
class EmbeddingMatrix;
Embedding centroid(const EmbeddingMatrix& matrix, std::span<const std::size_t> rows);

// Dense row-major storage for `count` embeddings of one dimension.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t dimension, std::size_t count);
  EmbeddingMatrix(std::size_t dimension, std::vector<float> data);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return dimension_ == 0 ? 0 : data_.size() / dimension_; }
  bool empty() const { return data_.empty(); }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dimension_, dimension_};
  }
  std::span<float> row(std::size_t i) { return {data_.data() + i * dimension_, dimension_}; }

  void set_row(std::size_t i, const Embedding& e);
  void push_back(const Embedding& e);

  const std::vector<float>& data() const { return data_; }

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::size_t dimension_ = 0;
  std::vector<float> data_;
};

}  // namespace castfruits
