#include "castfruits/intra_clean.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace castfruits {

void IntraCleanConfig::validate() const {
  if (!(eps > 0.0 && eps < 2.0)) throw std::invalid_argument("intra.eps must lie in (0, 2)");
  if (min_pts < 1) throw std::invalid_argument("intra.min_pts must be >= 1");
  if (min_dominant_size < 3) throw std::invalid_argument("intra.min_dominant_size must be >= 3");
}

std::vector<std::vector<std::size_t>> ClusterLabeling::clusters() const {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(cluster_count));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kNoise) out[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  return out;
}

ClusterLabeling dbscan(std::span<const EmbeddingView> points, const IntraCleanConfig& config) {
  config.validate();
  const std::size_t n = points.size();
  if (n == 0) throw std::invalid_argument("dbscan: empty input");

  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    neighbors[i].push_back(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (1.0 - cosine(points[i], points[j]).value() <= config.eps) {
        neighbors[i].push_back(j);
        neighbors[j].push_back(i);
      }
    }
  }

  ClusterLabeling out;
  out.labels.assign(n, ClusterLabeling::kNoise);
  out.core.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    out.core[i] = neighbors[i].size() >= static_cast<std::size_t>(config.min_pts);
  }

  std::vector<bool> visited(n, false);
  std::vector<std::size_t> frontier;
  for (std::size_t i = 0; i < n; ++i) {
    if (visited[i]) continue;
    visited[i] = true;
    if (!out.core[i]) continue;  // noise unless a later cluster claims it as border

    const int id = out.cluster_count++;
    out.labels[i] = id;
    frontier.assign(1, i);
    while (!frontier.empty()) {
      const std::size_t p = frontier.back();
      frontier.pop_back();
      for (std::size_t q : neighbors[p]) {
        if (out.labels[q] == ClusterLabeling::kNoise) out.labels[q] = id;
        if (!visited[q]) {
          visited[q] = true;
          if (out.core[q]) frontier.push_back(q);
        }
      }
    }
  }
  return out;
}

namespace {

struct Candidate {
  std::vector<std::size_t> members;
  double cohesion = 0.0;
  std::string smallest_id;
};

Candidate evaluate(std::vector<std::size_t> members, std::span<const EmbeddingView> points,
                   std::span<const std::string> face_ids) {
  // Canonical face_id order makes the centroid bit-identical under permutation.
  std::vector<std::size_t> canonical = members;
  std::sort(canonical.begin(), canonical.end(),
            [&](std::size_t a, std::size_t b) { return face_ids[a] < face_ids[b]; });
  const std::size_t d = points[canonical.front()].size();
  std::vector<double> sum(d, 0.0);
  for (std::size_t m : canonical) {
    for (std::size_t k = 0; k < d; ++k) sum[k] += points[m][k];
  }
  const Embedding center = normalize(std::span<const double>(sum));
  double total = 0.0;
  for (std::size_t m : canonical) total += cosine(center, points[m]).value();

  Candidate c;
  c.cohesion = total / static_cast<double>(canonical.size());
  c.smallest_id = face_ids[canonical.front()];
  c.members = std::move(members);
  return c;
}

}  // namespace

std::vector<std::size_t> select_dominant(const ClusterLabeling& labeling,
                                         std::span<const EmbeddingView> points,
                                         std::span<const std::string> face_ids,
                                         const IntraCleanConfig& config) {
  if (points.size() != labeling.labels.size() || face_ids.size() != labeling.labels.size()) {
    throw std::invalid_argument("select_dominant: labeling, points and ids differ in length");
  }
  auto clusters = labeling.clusters();
  std::size_t largest = 0;
  for (const auto& c : clusters) largest = std::max(largest, c.size());
  if (largest < static_cast<std::size_t>(config.min_dominant_size)) return {};

  std::vector<Candidate> tied;
  for (auto& c : clusters) {
    if (c.size() == largest) tied.push_back(evaluate(std::move(c), points, face_ids));
  }
  constexpr double kCohesionTie = 1e-12;
  const Candidate* best = &tied.front();
  for (const auto& c : tied) {
    if (c.cohesion > best->cohesion + kCohesionTie) {
      best = &c;
    } else if (std::abs(c.cohesion - best->cohesion) <= kCohesionTie && c.smallest_id < best->smallest_id) {
      best = &c;
    }
  }
  return best->members;
}

Folder clean_folder(const Folder& folder, const Dataset& dataset, const EmbeddingMatrix& embeddings,
                    const IntraCleanConfig& config, const Clusterer& clusterer) {
  if (folder.faces.empty()) throw std::invalid_argument("clean_folder: empty folder " + folder.subject_id);
  std::vector<EmbeddingView> points;
  std::vector<std::string> ids;
  points.reserve(folder.faces.size());
  ids.reserve(folder.faces.size());
  for (std::size_t idx : folder.faces) {
    const auto& rec = dataset.records.at(idx);
    if (rec.embedding_row >= embeddings.size()) {
      throw std::out_of_range("face '" + rec.face_id + "' has no embedding row");
    }
    points.push_back(embeddings.row(rec.embedding_row));
    ids.push_back(rec.face_id);
  }
  const auto keep = select_dominant(clusterer.cluster(points), points, ids, config);
  Folder out{folder.subject_id, {}};
  out.faces.reserve(keep.size());
  for (std::size_t k : keep) out.faces.push_back(folder.faces[k]);
  return out;
}

Folder clean_folder(const Folder& folder, const Dataset& dataset, const EmbeddingMatrix& embeddings,
                    const IntraCleanConfig& config) {
  return clean_folder(folder, dataset, embeddings, config, DbscanClusterer(config));
}

}  // namespace castfruits
