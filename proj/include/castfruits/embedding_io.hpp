#pragma once
// Embedding sidecar file:
//   magic "EMB1" | dimension u32 LE | count u64 LE | count*dimension f32 LE, row-major

#include <filesystem>

#include "castfruits/embedding.hpp"

namespace castfruits {

void write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);

// Validates magic and that the file size matches the header.
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

}  // namespace castfruits
