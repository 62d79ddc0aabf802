#pragma once
// Iterative self-training cleaning loop.
//
// Every iteration re-embeds the ORIGINAL raw dataset with the current
// teacher, runs intra-folder then inter-folder cleaning, and fits the next
// teacher on the result. Post-cleaning runs once after the last iteration.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "castfruits/dataset.hpp"
#include "castfruits/embedding.hpp"
#include "castfruits/inter_clean.hpp"
#include "castfruits/intra_clean.hpp"
#include "castfruits/post_clean.hpp"
#include "castfruits/synth.hpp"

namespace castfruits {

// A feature extractor generation. embed() returns a matrix indexed by the
// records' embedding_row; fit() trains the next generation on cleaned data.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual EmbeddingMatrix embed(const Dataset& dataset) const = 0;
  virtual std::unique_ptr<Embedder> fit(const Dataset& cleaned) const = 0;
  virtual std::string description() const = 0;
};

// Desk-scale stand-in for a trained network over a synthetic world:
//   embed(face) = normalize(alpha * clean(face) + (1 - alpha) * nuisance(face) * context(folder))
// The first generation uses alpha0; fit() sets alpha = alpha0 + (1 - alpha0) * purity
// of the cleaned set it is trained on.
class ReferenceEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kMinFitSubjects = 10;

  ReferenceEmbedder(std::shared_ptr<const SynthDataset> world, double alpha0);

  std::size_t dimension() const override;
  EmbeddingMatrix embed(const Dataset& dataset) const override;
  std::unique_ptr<Embedder> fit(const Dataset& cleaned) const override;
  std::string description() const override;

  double alpha() const { return alpha_; }
  int generation() const { return generation_; }

 private:
  struct World;
  ReferenceEmbedder(std::shared_ptr<const World> world, double alpha0, double alpha, int generation);

  std::shared_ptr<const World> world_;
  double alpha0_;
  double alpha_;
  int generation_;
};

// Features that never change: fit() returns the same features.
class FixedEmbedder final : public Embedder {
 public:
  explicit FixedEmbedder(std::shared_ptr<const EmbeddingMatrix> features);

  std::size_t dimension() const override { return features_->dimension(); }
  EmbeddingMatrix embed(const Dataset& dataset) const override;
  std::unique_ptr<Embedder> fit(const Dataset& cleaned) const override;
  std::string description() const override { return "fixed"; }

 private:
  std::shared_ptr<const EmbeddingMatrix> features_;
};

// One embedding file per generation, produced by an external model. fit()
// advances to the next file; the last file is terminal.
class PrecomputedEmbedder final : public Embedder {
 public:
  explicit PrecomputedEmbedder(std::vector<std::filesystem::path> generations, std::size_t index = 0);

  std::size_t dimension() const override;
  EmbeddingMatrix embed(const Dataset& dataset) const override;
  std::unique_ptr<Embedder> fit(const Dataset& cleaned) const override;
  std::string description() const override;

 private:
  std::vector<std::filesystem::path> files_;
  std::size_t index_;
  std::shared_ptr<const EmbeddingMatrix> current_;
};

struct CastConfig {
  int iterations = 3;
  IntraCleanConfig intra;
  InterCleanConfig inter;
  PostCleanConfig post;
  std::optional<std::size_t> dimension;  // checked against the embedder when set
  std::size_t histogram_bins = 200;
  std::size_t histogram_sample = 100000;  // folders per histogram, capped at the folder count
  std::uint64_t seed = 0;
  std::vector<Embedding> test_centroids;  // benchmark identities to purge

  void validate() const;
};

struct StageStats {
  std::string stage;  // raw | intra | inter | remove_duplicates | remove_test_overlaps | min_faces
  int iteration = 0;  // 0 outside the loop
  std::size_t identities = 0;
  std::size_t faces = 0;

  bool operator==(const StageStats&) const = default;
};

struct SimilarityHistograms {
  std::size_t bin_count = 200;
  std::vector<std::uint64_t> intra;
  std::vector<std::uint64_t> inter;

  std::vector<double> bin_edges() const;  // bin_count + 1 edges spanning [-1, 1]
};

struct IterationReport {
  int iteration = 0;
  std::string teacher;
  std::vector<InterAction> actions;
  SimilarityHistograms histograms;  // judged with the final embedder
  double overlap = 0.0;
  Dataset cleaned;  // inter-cleaned output of this iteration
};

struct CastResult {
  Dataset cleaned;
  std::vector<StageStats> stages;
  std::vector<IterationReport> iterations;
  SimilarityHistograms raw_histograms;  // initial folders
  double raw_overlap = 0.0;
  std::unique_ptr<Embedder> final_embedder;
};

CastResult run_cast(const Dataset& raw, const Embedder& initial_teacher, const CastConfig& config);

// True iff faces(inter) <= faces(intra) <= faces(raw) in every iteration
// (identities likewise) and post-clean rows never exceed the last iteration.
bool stage_shape_valid(const std::vector<StageStats>& stages);

std::size_t histogram_bin(double similarity, std::size_t bins);

// Samples `sample` folders (all if sample >= folder count) with the seed.
// intra: every within-folder pair; inter: every centroid pair among sampled folders.
SimilarityHistograms similarity_histograms(const Dataset& dataset, const EmbeddingMatrix& embeddings,
                                           std::size_t sample, std::uint64_t seed, std::size_t bins = 200);
SimilarityHistograms similarity_histograms(const Dataset& dataset, const Embedder& embedder, std::size_t sample,
                                           std::uint64_t seed, std::size_t bins = 200);

// Sum over bins of min(normalized intra, normalized inter).
double histogram_overlap(const SimilarityHistograms& h);

}  // namespace castfruits
