#pragma once
// Final purification: per-subject duplicate removal, test-set overlap removal
// and the minimum-faces-per-identity rule.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "castfruits/dataset.hpp"
#include "castfruits/inter_clean.hpp"
#include "castfruits/intra_clean.hpp"

namespace castfruits {

struct PostCleanConfig {
  double duplicate_threshold = 0.95;  // duplicates iff similarity > threshold
  double overlap_threshold = 0.7;     // overlap iff max similarity > threshold
  int min_faces_per_identity = 3;

  void validate() const;
};

// Duplicate edges (similarity > duplicate_threshold) split the subject into
// connected components; each component keeps the face closest to the subject
// centroid (ties: smallest face_id). Returns ascending indices.
std::vector<std::size_t> dedup_subject(std::span<const EmbeddingView> faces, std::span<const std::string> face_ids,
                                       const PostCleanConfig& config);

Folder dedup_folder(const Folder& folder, const Dataset& dataset, const EmbeddingMatrix& embeddings,
                    const PostCleanConfig& config);

struct OverlapResult {
  std::vector<std::size_t> retained;  // ascending indices into the subject list
  std::optional<std::string> warning;
};

// A subject is dropped iff its best similarity to any test centroid exceeds
// overlap_threshold. An empty test set retains everything with a warning.
OverlapResult remove_test_overlap(const std::vector<FolderCentroid>& subjects, std::span<const Embedding> tests,
                                  const PostCleanConfig& config);

std::vector<Folder> enforce_min_faces(std::vector<Folder> folders, const PostCleanConfig& config);
Dataset enforce_min_faces(const Dataset& dataset, const PostCleanConfig& config);

}  // namespace castfruits
