#pragma once
// Inter-folder cleaning: folders whose centroids are too similar are either
// merged (same identity under two names) or the smaller one is deleted
// (ambiguous overlap).

#include <iosfwd>
#include <string>
#include <vector>

#include "castfruits/dataset.hpp"
#include "castfruits/embedding.hpp"

namespace castfruits {

struct InterCleanConfig {
  double merge_threshold = 0.7;  // MERGE iff similarity > merge_threshold
  double delete_low = 0.5;       // DELETE iff delete_low <= similarity <= merge_threshold
  int max_passes = 10;

  void validate() const;
};

struct FolderCentroid {
  std::string subject_id;
  Embedding centroid;
};

struct CentroidPair {
  std::size_t first = 0;   // index of the lexicographically smaller subject_id
  std::size_t second = 0;
  Similarity similarity;

  bool operator==(const CentroidPair& o) const {
    return first == o.first && second == o.second && similarity.value() == o.similarity.value();
  }
};

// Every pair with similarity >= min_similarity, exact brute force. Sorted by
// similarity descending, ties by (smaller subject_id, larger subject_id).
std::vector<CentroidPair> pairwise_centroid_scan(const std::vector<FolderCentroid>& centroids,
                                                 double min_similarity);

enum class ActionKind { Merge, Delete };

std::string_view to_string(ActionKind k);

struct InterAction {
  ActionKind kind = ActionKind::Merge;
  std::string survivor;
  std::string victim;
  Similarity similarity;

  bool operator==(const InterAction& o) const {
    return kind == o.kind && survivor == o.survivor && victim == o.victim &&
           similarity.value() == o.similarity.value();
  }
};

struct InterCleanResult {
  std::vector<Folder> folders;  // survivors, input order
  std::vector<InterAction> log;
  int passes = 0;
  bool converged = false;
};

// Pass-based resolution. Each pass scans all live centroids and walks the
// pairs in scan order. A pair touching a folder that was already merged in
// this pass is deferred to the next pass, where its recomputed centroid is
// used. Stops at the first pass with no action or after max_passes.
//
// MERGE keeps the folder with more faces (ties: smaller subject_id) and
// appends the victim's faces. DELETE removes the folder with fewer faces
// (ties: larger subject_id).
InterCleanResult resolve_folders(const std::vector<Folder>& folders, const Dataset& dataset,
                                 const EmbeddingMatrix& embeddings, const InterCleanConfig& config);

// Re-applies a log to the original folders. replay(input, resolve(input).log)
// reproduces resolve(input).folders.
std::vector<Folder> replay_actions(const std::vector<Folder>& folders, const std::vector<InterAction>& log);

// Line-delimited {"kind","survivor","victim","similarity"} records.
void write_action_log(const std::vector<InterAction>& log, std::ostream& out);
std::vector<InterAction> read_action_log(std::istream& in);

// Centroid of a folder's faces taken in face_id order.
Embedding folder_centroid(const Folder& folder, const Dataset& dataset, const EmbeddingMatrix& embeddings);

}  // namespace castfruits
