#pragma once
// Intra-folder cleaning: cluster the faces of one putative-identity folder
// and keep only the dominant cluster.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "castfruits/dataset.hpp"
#include "castfruits/embedding.hpp"

namespace castfruits {

using EmbeddingView = std::span<const float>;

struct IntraCleanConfig {
  double eps = 0.3;  // cosine distance radius, 1 - cos
  int min_pts = 2;   // neighborhood size counted including the point itself
  int min_dominant_size = 3;

  void validate() const;
};

struct ClusterLabeling {
  static constexpr int kNoise = -1;

  std::vector<int> labels;  // cluster id in [0, cluster_count) or kNoise
  std::vector<bool> core;
  int cluster_count = 0;

  std::vector<std::vector<std::size_t>> clusters() const;
};

// Pluggable intra-folder clusterer. DBSCAN is the only shipped strategy.
class Clusterer {
 public:
  virtual ~Clusterer() = default;
  virtual ClusterLabeling cluster(std::span<const EmbeddingView> points) const = 0;
};

// DBSCAN over d(a, b) = 1 - cos(a, b). A point is core when at least
// min_pts points (itself included) lie within eps. Clusters are numbered in
// order of their lowest-index core point; border points join the first
// cluster that reaches them.
ClusterLabeling dbscan(std::span<const EmbeddingView> points, const IntraCleanConfig& config);

class DbscanClusterer final : public Clusterer {
 public:
  explicit DbscanClusterer(IntraCleanConfig config) : config_(config) { config_.validate(); }
  ClusterLabeling cluster(std::span<const EmbeddingView> points) const override {
    return dbscan(points, config_);
  }

 private:
  IntraCleanConfig config_;
};

// Members of the largest cluster if it has at least min_dominant_size faces,
// otherwise empty. Equal-size clusters are ranked by mean member-to-centroid
// cosine, then by their smallest face_id. Returned indices are ascending.
std::vector<std::size_t> select_dominant(const ClusterLabeling& labeling,
                                         std::span<const EmbeddingView> points,
                                         std::span<const std::string> face_ids,
                                         const IntraCleanConfig& config);

// clusterer -> select_dominant over one folder. The returned folder keeps
// the input's subject_id and face order; an empty face list means dropped.
Folder clean_folder(const Folder& folder, const Dataset& dataset, const EmbeddingMatrix& embeddings,
                    const IntraCleanConfig& config, const Clusterer& clusterer);
Folder clean_folder(const Folder& folder, const Dataset& dataset, const EmbeddingMatrix& embeddings,
                    const IntraCleanConfig& config);

}  // namespace castfruits
