#include "castfruits/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace castfruits {

Similarity::Similarity(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("non-finite similarity");
  value_ = std::clamp(value, -1.0, 1.0);
}

namespace {

template <typename T>
Embedding normalize_impl(std::span<const T> raw, auto&& make) {
  if (raw.empty()) throw std::invalid_argument("degenerate embedding: empty vector");
  double sq = 0.0;
  for (T x : raw) {
    if (!std::isfinite(static_cast<double>(x))) throw std::invalid_argument("non-finite input");
    sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw std::invalid_argument("degenerate embedding");
  std::vector<float> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(raw[i]) / norm);
  }
  return make(std::move(out));
}

}  // namespace

Embedding normalize(std::span<const float> raw) {
  return normalize_impl(raw, [](std::vector<float> v) { return Embedding(std::move(v)); });
}

Embedding normalize(std::span<const double> raw) {
  return normalize_impl(raw, [](std::vector<float> v) { return Embedding(std::move(v)); });
}

Embedding Embedding::from_unit(std::vector<float> unit) {
  double sq = 0.0;
  for (float x : unit) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite input");
    sq += static_cast<double>(x) * x;
  }
  if (unit.empty() || std::abs(std::sqrt(sq) - 1.0) > kUnitNormTolerance) {
    throw std::invalid_argument("embedding is not unit-norm");
  }
  return Embedding(std::move(unit));
}

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
  // Four partial sums let the compiler vectorize without reassociating.
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  const std::size_t n = a.size();
  for (; i + 4 <= n; i += 4) {
    s0 += static_cast<double>(a[i]) * b[i];
    s1 += static_cast<double>(a[i + 1]) * b[i + 1];
    s2 += static_cast<double>(a[i + 2]) * b[i + 2];
    s3 += static_cast<double>(a[i + 3]) * b[i + 3];
  }
  for (; i < n; ++i) s0 += static_cast<double>(a[i]) * b[i];
  return (s0 + s1) + (s2 + s3);
}

Similarity cosine(std::span<const float> a, std::span<const float> b) {
  return Similarity(dot(a, b));
}

namespace {

Embedding finish_centroid(const std::vector<double>& sum, std::size_t n) {
  double sq = 0.0;
  for (double x : sum) sq += (x / n) * (x / n);
  if (std::sqrt(sq) < 1e-6) throw std::invalid_argument("degenerate centroid");
  return normalize(std::span<const double>(sum));
}

}  // namespace

Embedding centroid(std::span<const Embedding> members) {
  if (members.empty()) throw std::invalid_argument("centroid of empty list");
  const std::size_t d = members.front().dimension();
  std::vector<double> sum(d, 0.0);
  for (const auto& m : members) {
    if (m.dimension() != d) throw std::invalid_argument("dimension mismatch in centroid");
    for (std::size_t i = 0; i < d; ++i) sum[i] += m[i];
  }
  return finish_centroid(sum, members.size());
}

Embedding centroid(const EmbeddingMatrix& matrix, std::span<const std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("centroid of empty list");
  const std::size_t d = matrix.dimension();
  std::vector<double> sum(d, 0.0);
  for (std::size_t r : rows) {
    if (r >= matrix.size()) throw std::out_of_range("centroid row out of range");
    auto v = matrix.row(r);
    for (std::size_t i = 0; i < d; ++i) sum[i] += v[i];
  }
  return finish_centroid(sum, rows.size());
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t dimension, std::size_t count)
    : dimension_(dimension), data_(dimension * count, 0.0f) {
  if (dimension == 0) throw std::invalid_argument("embedding dimension must be positive");
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t dimension, std::vector<float> data)
    : dimension_(dimension), data_(std::move(data)) {
  if (dimension == 0) throw std::invalid_argument("embedding dimension must be positive");
  if (data_.size() % dimension != 0) throw std::invalid_argument("matrix data not a multiple of dimension");
}

void EmbeddingMatrix::set_row(std::size_t i, const Embedding& e) {
  if (e.dimension() != dimension_) throw std::invalid_argument("dimension mismatch in set_row");
  std::copy(e.values().begin(), e.values().end(), row(i).begin());
}

void EmbeddingMatrix::push_back(const Embedding& e) {
  if (dimension_ == 0) dimension_ = e.dimension();
  if (e.dimension() != dimension_) throw std::invalid_argument("dimension mismatch in push_back");
  data_.insert(data_.end(), e.values().begin(), e.values().end());
}

}  // namespace castfruits
