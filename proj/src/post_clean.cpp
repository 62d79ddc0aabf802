#include "castfruits/post_clean.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace castfruits {

void PostCleanConfig::validate() const {
  if (!(duplicate_threshold > 0.0 && duplicate_threshold < 1.0)) {
    throw std::invalid_argument("post.duplicate_threshold must lie in (0, 1)");
  }
  if (!(overlap_threshold > 0.0 && overlap_threshold < 1.0)) {
    throw std::invalid_argument("post.overlap_threshold must lie in (0, 1)");
  }
  if (min_faces_per_identity < 1) throw std::invalid_argument("post.min_faces_per_identity must be >= 1");
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

std::vector<std::size_t> dedup_subject(std::span<const EmbeddingView> faces, std::span<const std::string> face_ids,
                                       const PostCleanConfig& config) {
  config.validate();
  const std::size_t n = faces.size();
  if (face_ids.size() != n) throw std::invalid_argument("dedup_subject: ids and faces differ in length");
  if (n <= 1) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return face_ids[a] < face_ids[b]; });
  std::vector<double> sum(faces.front().size(), 0.0);
  for (std::size_t i : order) {
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += faces[i][k];
  }
  const Embedding center = normalize(std::span<const double>(sum));

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (cosine(faces[i], faces[j]).value() > config.duplicate_threshold) {
        parent[find_root(parent, i)] = find_root(parent, j);
      }
    }
  }

  // Per component: best = highest similarity to the center, then smallest id.
  std::vector<std::size_t> best(n, n);
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) score[i] = cosine(center, faces[i]).value();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find_root(parent, i);
    const std::size_t b = best[r];
    if (b == n || score[i] > score[b] || (score[i] == score[b] && face_ids[i] < face_ids[b])) best[r] = i;
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n; ++i) {
    if (best[find_root(parent, i)] == i) keep.push_back(i);
  }
  return keep;
}

Folder dedup_folder(const Folder& folder, const Dataset& dataset, const EmbeddingMatrix& embeddings,
                    const PostCleanConfig& config) {
  std::vector<EmbeddingView> views;
  std::vector<std::string> ids;
  for (std::size_t idx : folder.faces) {
    const auto& r = dataset.records.at(idx);
    views.push_back(embeddings.row(r.embedding_row));
    ids.push_back(r.face_id);
  }
  Folder out{folder.subject_id, {}};
  for (std::size_t k : dedup_subject(views, ids, config)) out.faces.push_back(folder.faces[k]);
  return out;
}

OverlapResult remove_test_overlap(const std::vector<FolderCentroid>& subjects, std::span<const Embedding> tests,
                                  const PostCleanConfig& config) {
  config.validate();
  OverlapResult out;
  if (tests.empty()) out.warning = "empty test set: no overlap removal performed";
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    bool overlaps = false;
    for (const auto& t : tests) {
      if (cosine(subjects[i].centroid, t).value() > config.overlap_threshold) {
        overlaps = true;
        break;
      }
    }
    if (!overlaps) out.retained.push_back(i);
  }
  return out;
}

std::vector<Folder> enforce_min_faces(std::vector<Folder> folders, const PostCleanConfig& config) {
  config.validate();
  std::erase_if(folders, [&](const Folder& f) {
    return f.faces.size() < static_cast<std::size_t>(config.min_faces_per_identity);
  });
  return folders;
}

Dataset enforce_min_faces(const Dataset& dataset, const PostCleanConfig& config) {
  config.validate();
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& r : dataset.records) ++counts[r.subject_id];
  Dataset out;
  for (const auto& r : dataset.records) {
    if (counts[r.subject_id] >= static_cast<std::size_t>(config.min_faces_per_identity)) out.records.push_back(r);
  }
  return out;
}

}  // namespace castfruits
