#pragma once
// Ground-truth-labelled synthetic noisy face datasets.
//
// Every planted identity owns one folder (two when it is split by the
// overlap rate). Folder faces are drawn inside an angular cap around the
// identity direction; a fraction of them are replaced by outliers from
// another planted identity or from a fresh distractor identity; a fraction
// are duplicated with a tiny perturbation.
//
// Each face also carries a latent nuisance strength. It is invisible in the
// clean embeddings and is consumed by the reference embedder, which mixes a
// per-folder context direction into weak-teacher embeddings.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "castfruits/dataset.hpp"
#include "castfruits/embedding.hpp"

namespace castfruits {

struct SynthConfig {
  std::size_t identity_count = 100;  // planted identities that own folders
  std::size_t faces_min = 15;        // faces per folder, inclusive range
  std::size_t faces_max = 25;
  std::size_t dimension = kDefaultDimension;
  double cluster_concentration = 0.45;  // angular radius of an identity cap, radians
  double outlier_rate = 0.0;
  double distractor_fraction = 0.5;  // share of outliers drawn from identities outside the dataset
  double overlap_rate = 0.0;         // share of identities split across two folders
  double duplicate_rate = 0.0;
  double nuisance_scale = 1.0;  // Pareto minimum of the latent nuisance strength
  double nuisance_tail = 1.0;   // Pareto shape
  std::uint64_t seed = 0;

  void validate() const;
};

struct TruthFace {
  std::string identity;
  std::string folder;  // raw folder the face was planted in
  double nuisance = 1.0;

  bool operator==(const TruthFace&) const = default;
};

struct GroundTruth {
  std::map<std::string, TruthFace> faces;              // by face_id
  std::map<std::string, std::string> folder_dominant;  // raw folder -> planted identity
  std::vector<std::pair<std::string, std::string>> merge_pairs;      // folders sharing an identity
  std::vector<std::pair<std::string, std::string>> duplicate_pairs;  // (source face, duplicate face)
  std::uint64_t context_seed = 0;

  bool operator==(const GroundTruth&) const = default;
};

struct SynthDataset {
  Dataset manifest;
  EmbeddingMatrix embeddings;  // clean (ideal embedder) vectors, row i = record i
  GroundTruth truth;
};

// Throws std::invalid_argument on an infeasible config.
SynthDataset generate(const SynthConfig& config);

struct CleaningScores {
  std::optional<double> purity;  // nullopt when the denominator is zero
  std::optional<double> face_recall;
  std::optional<double> merge_recall;
  std::optional<double> dup_removal_rate;
};

// Throws if a cleaned face is unknown to the truth.
CleaningScores score_cleaning(const Dataset& cleaned, const GroundTruth& truth);

void write_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth read_truth(const std::filesystem::path& path);

}  // namespace castfruits
