#include "castfruits/cast.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "castfruits/embedding_io.hpp"
#include "castfruits/parallel.hpp"

namespace castfruits {

// ---------------------------------------------------------------------------
// ReferenceEmbedder

struct ReferenceEmbedder::World {
  std::shared_ptr<const SynthDataset> synth;
  std::unordered_map<std::string, Embedding> context;  // raw folder -> context direction
};

ReferenceEmbedder::ReferenceEmbedder(std::shared_ptr<const SynthDataset> synth, double alpha0)
    : alpha0_(alpha0), alpha_(alpha0), generation_(1) {
  if (!synth) throw std::invalid_argument("reference embedder needs a synthetic world");
  if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw std::invalid_argument("embedder.alpha0 must lie in (0, 1]");
  auto world = std::make_shared<World>();
  world->synth = std::move(synth);
  const std::size_t d = world->synth->embeddings.dimension();
  std::size_t k = 0;
  for (const auto& [folder, identity] : world->synth->truth.folder_dominant) {
    std::seed_seq seq{static_cast<std::uint32_t>(world->synth->truth.context_seed),
                      static_cast<std::uint32_t>(world->synth->truth.context_seed >> 32), 3u,
                      static_cast<std::uint32_t>(k++)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(d);
    for (auto& x : v) x = normal(rng);
    world->context.emplace(folder, normalize(std::span<const double>(v)));
  }
  world_ = std::move(world);
}

ReferenceEmbedder::ReferenceEmbedder(std::shared_ptr<const World> world, double alpha0, double alpha, int generation)
    : world_(std::move(world)), alpha0_(alpha0), alpha_(alpha), generation_(generation) {}

std::size_t ReferenceEmbedder::dimension() const { return world_->synth->embeddings.dimension(); }

EmbeddingMatrix ReferenceEmbedder::embed(const Dataset& dataset) const {
  const auto& clean = world_->synth->embeddings;
  const auto& truth = world_->synth->truth;
  const std::size_t d = clean.dimension();
  EmbeddingMatrix out(d, clean.size());
  check_embedding_rows(dataset, clean.size());
  parallel_for(dataset.records.size(), [&](std::size_t i) {
    const auto& rec = dataset.records[i];
    auto face = truth.faces.find(rec.face_id);
    if (face == truth.faces.end()) throw std::runtime_error("reference embedder: unknown face '" + rec.face_id + "'");
    const auto& ctx = world_->context.at(face->second.folder);
    const double weight = (1.0 - alpha_) * face->second.nuisance;
    const auto x = clean.row(rec.embedding_row);
    std::vector<double> v(d);
    for (std::size_t k = 0; k < d; ++k) v[k] = alpha_ * x[k] + weight * ctx[k];
    out.set_row(rec.embedding_row, normalize(std::span<const double>(v)));
  });
  return out;
}

std::unique_ptr<Embedder> ReferenceEmbedder::fit(const Dataset& cleaned) const {
  const std::size_t subjects = cleaned.identity_count();
  if (subjects < kMinFitSubjects) {
    throw std::runtime_error("fit: cleaned set has " + std::to_string(subjects) + " subjects, need at least " +
                             std::to_string(kMinFitSubjects));
  }
  const auto scores = score_cleaning(cleaned, world_->synth->truth);
  const double purity = scores.purity.value_or(0.0);
  return std::unique_ptr<Embedder>(
      new ReferenceEmbedder(world_, alpha0_, alpha0_ + (1.0 - alpha0_) * purity, generation_ + 1));
}

std::string ReferenceEmbedder::description() const {
  std::ostringstream s;
  s.precision(6);
  s << "reference(generation=" << generation_ << ", alpha=" << alpha_ << ")";
  return s.str();
}

// ---------------------------------------------------------------------------
// FixedEmbedder / PrecomputedEmbedder

FixedEmbedder::FixedEmbedder(std::shared_ptr<const EmbeddingMatrix> features) : features_(std::move(features)) {
  if (!features_ || features_->dimension() == 0) throw std::invalid_argument("fixed embedder needs features");
}

EmbeddingMatrix FixedEmbedder::embed(const Dataset& dataset) const {
  check_embedding_rows(dataset, features_->size());
  return *features_;
}

std::unique_ptr<Embedder> FixedEmbedder::fit(const Dataset&) const {
  return std::make_unique<FixedEmbedder>(features_);
}

PrecomputedEmbedder::PrecomputedEmbedder(std::vector<std::filesystem::path> generations, std::size_t index)
    : files_(std::move(generations)), index_(index) {
  if (files_.empty()) throw std::invalid_argument("precomputed embedder needs at least one embedding file");
  if (index_ >= files_.size()) throw std::out_of_range("precomputed embedder generation out of range");
  current_ = std::make_shared<const EmbeddingMatrix>(read_embeddings(files_[index_]));
}

std::size_t PrecomputedEmbedder::dimension() const { return current_->dimension(); }

EmbeddingMatrix PrecomputedEmbedder::embed(const Dataset& dataset) const {
  check_embedding_rows(dataset, current_->size());
  return *current_;
}

std::unique_ptr<Embedder> PrecomputedEmbedder::fit(const Dataset&) const {
  return std::make_unique<PrecomputedEmbedder>(files_, std::min(index_ + 1, files_.size() - 1));
}

std::string PrecomputedEmbedder::description() const {
  return "precomputed(" + files_[index_].filename().string() + ")";
}

// ---------------------------------------------------------------------------
// Histograms

std::vector<double> SimilarityHistograms::bin_edges() const {
  std::vector<double> edges(bin_count + 1);
  for (std::size_t k = 0; k <= bin_count; ++k) {
    edges[k] = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(bin_count);
  }
  return edges;
}

std::size_t histogram_bin(double similarity, std::size_t bins) {
  const double pos = std::floor((std::clamp(similarity, -1.0, 1.0) + 1.0) / 2.0 * static_cast<double>(bins));
  return std::min(static_cast<std::size_t>(std::max(pos, 0.0)), bins - 1);
}

SimilarityHistograms similarity_histograms(const Dataset& dataset, const EmbeddingMatrix& embeddings,
                                           std::size_t sample, std::uint64_t seed, std::size_t bins) {
  if (sample == 0) throw std::invalid_argument("similarity_histograms: sample must be positive");
  if (bins == 0) throw std::invalid_argument("similarity_histograms: bins must be positive");
  auto folders = group_folders(dataset);
  if (sample < folders.size()) {
    std::vector<std::size_t> idx(folders.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(sample);
    std::sort(idx.begin(), idx.end());
    std::vector<Folder> picked;
    for (std::size_t i : idx) picked.push_back(std::move(folders[i]));
    folders = std::move(picked);
  }

  SimilarityHistograms h;
  h.bin_count = bins;
  h.intra.assign(bins, 0);
  h.inter.assign(bins, 0);

  std::vector<std::vector<std::uint64_t>> partial(folders.size());
  std::vector<Embedding> centers(folders.size());
  parallel_for(folders.size(), [&](std::size_t f) {
    auto& counts = partial[f];
    counts.assign(bins, 0);
    const auto& faces = folders[f].faces;
    for (std::size_t a = 0; a < faces.size(); ++a) {
      const auto ra = embeddings.row(dataset.records[faces[a]].embedding_row);
      for (std::size_t b = a + 1; b < faces.size(); ++b) {
        ++counts[histogram_bin(cosine(ra, embeddings.row(dataset.records[faces[b]].embedding_row)), bins)];
      }
    }
    centers[f] = folder_centroid(folders[f], dataset, embeddings);
  });
  for (const auto& c : partial) {
    for (std::size_t k = 0; k < bins; ++k) h.intra[k] += c[k];
  }

  std::vector<std::vector<std::uint64_t>> inter_rows(folders.size());
  parallel_for(folders.size(), [&](std::size_t a) {
    auto& counts = inter_rows[a];
    counts.assign(bins, 0);
    for (std::size_t b = a + 1; b < folders.size(); ++b) ++counts[histogram_bin(cosine(centers[a], centers[b]), bins)];
  });
  for (const auto& c : inter_rows) {
    for (std::size_t k = 0; k < bins; ++k) h.inter[k] += c[k];
  }
  return h;
}

SimilarityHistograms similarity_histograms(const Dataset& dataset, const Embedder& embedder, std::size_t sample,
                                           std::uint64_t seed, std::size_t bins) {
  return similarity_histograms(dataset, embedder.embed(dataset), sample, seed, bins);
}

double histogram_overlap(const SimilarityHistograms& h) {
  const auto total = [](const std::vector<std::uint64_t>& v) {
    return std::accumulate(v.begin(), v.end(), std::uint64_t{0});
  };
  const std::uint64_t ti = total(h.intra);
  const std::uint64_t te = total(h.inter);
  if (ti == 0 || te == 0) throw std::invalid_argument("histogram_overlap: empty histogram");
  if (h.intra.size() != h.inter.size()) throw std::invalid_argument("histogram_overlap: bin count mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < h.intra.size(); ++k) {
    sum += std::min(static_cast<double>(h.intra[k]) / ti, static_cast<double>(h.inter[k]) / te);
  }
  return std::clamp(sum, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Driver

void CastConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("cast.iterations must be >= 1");
  if (histogram_bins == 0) throw std::invalid_argument("hist.bins must be positive");
  if (histogram_sample == 0) throw std::invalid_argument("hist.sample must be positive");
  intra.validate();
  inter.validate();
  post.validate();
}

namespace {

StageStats stats_of(std::string stage, int iteration, const std::vector<Folder>& folders) {
  StageStats s{std::move(stage), iteration, 0, 0};
  for (const auto& f : folders) {
    if (f.faces.empty()) continue;
    ++s.identities;
    s.faces += f.faces.size();
  }
  return s;
}

}  // namespace

CastResult run_cast(const Dataset& raw, const Embedder& initial_teacher, const CastConfig& config) {
  config.validate();
  if (raw.records.empty()) throw std::invalid_argument("run_cast: raw dataset is empty");
  if (config.dimension && *config.dimension != initial_teacher.dimension()) {
    throw std::invalid_argument("run_cast: embedder dimension " + std::to_string(initial_teacher.dimension()) +
                                " does not match configured " + std::to_string(*config.dimension));
  }

  CastResult result;
  const auto raw_folders = group_folders(raw);
  result.stages.push_back(stats_of("raw", 0, raw_folders));

  std::unique_ptr<Embedder> owned;
  const Embedder* teacher = &initial_teacher;
  EmbeddingMatrix features;
  std::vector<Folder> current;

  for (int it = 1; it <= config.iterations; ++it) {
    const auto context = [&](const std::string& what) { return "iteration " + std::to_string(it) + ": " + what; };
    try {
      features = teacher->embed(raw);
    } catch (const std::exception& e) {
      throw std::runtime_error(context(std::string("embedding failed: ") + e.what()));
    }
    if (features.dimension() != initial_teacher.dimension()) {
      throw std::runtime_error(context("embedder changed dimension"));
    }

    const DbscanClusterer clusterer(config.intra);
    std::vector<Folder> intra(raw_folders.size());
    parallel_for(raw_folders.size(), [&](std::size_t f) {
      intra[f] = clean_folder(raw_folders[f], raw, features, config.intra, clusterer);
    });
    std::erase_if(intra, [](const Folder& f) { return f.faces.empty(); });
    result.stages.push_back(stats_of("intra", it, intra));

    auto inter = resolve_folders(intra, raw, features, config.inter);
    result.stages.push_back(stats_of("inter", it, inter.folders));
    if (inter.folders.empty()) throw std::runtime_error(context("pipeline collapsed"));

    IterationReport report;
    report.iteration = it;
    report.teacher = teacher->description();
    report.actions = std::move(inter.log);
    report.cleaned = materialize(raw, inter.folders);

    try {
      owned = teacher->fit(report.cleaned);
    } catch (const std::exception& e) {
      throw std::runtime_error(context(std::string("fit failed: ") + e.what()));
    }
    teacher = owned.get();
    current = std::move(inter.folders);
    result.iterations.push_back(std::move(report));
  }

  // Post-clean with the features that produced the final folders.
  std::vector<Folder> deduped(current.size());
  parallel_for(current.size(), [&](std::size_t f) { deduped[f] = dedup_folder(current[f], raw, features, config.post); });
  result.stages.push_back(stats_of("remove_duplicates", 0, deduped));

  std::vector<FolderCentroid> centers(deduped.size());
  parallel_for(deduped.size(), [&](std::size_t f) {
    centers[f] = {deduped[f].subject_id, folder_centroid(deduped[f], raw, features)};
  });
  const auto overlap = remove_test_overlap(centers, config.test_centroids, config.post);
  std::vector<Folder> purged;
  for (std::size_t i : overlap.retained) purged.push_back(std::move(deduped[i]));
  result.stages.push_back(stats_of("remove_test_overlaps", 0, purged));

  auto final_folders = enforce_min_faces(std::move(purged), config.post);
  result.stages.push_back(stats_of("min_faces", 0, final_folders));
  if (final_folders.empty()) throw std::runtime_error("post-clean: pipeline collapsed");

  result.cleaned = materialize(raw, final_folders);

  // Every stage is judged by the same (final, strongest) features so that
  // the histograms compare datasets rather than teachers.
  const EmbeddingMatrix judge = owned->embed(raw);
  const auto histograms_of = [&](const Dataset& d) {
    const std::size_t folders = d.identity_count();
    return similarity_histograms(d, judge, std::min(config.histogram_sample, folders), config.seed,
                                 config.histogram_bins);
  };
  result.raw_histograms = histograms_of(raw);
  result.raw_overlap = histogram_overlap(result.raw_histograms);
  for (auto& report : result.iterations) {
    report.histograms = histograms_of(report.cleaned);
    report.overlap = histogram_overlap(report.histograms);
  }
  result.final_embedder = std::move(owned);
  return result;
}

bool stage_shape_valid(const std::vector<StageStats>& stages) {
  const StageStats* raw = nullptr;
  const StageStats* intra = nullptr;
  const StageStats* last = nullptr;
  const auto le = [](const StageStats& a, const StageStats& b) {
    return a.faces <= b.faces && a.identities <= b.identities;
  };
  for (const auto& s : stages) {
    if (s.stage == "raw") {
      raw = &s;
      last = &s;
    } else if (s.stage == "intra") {
      if (!raw || !le(s, *raw)) return false;
      intra = &s;
    } else if (s.stage == "inter") {
      if (!intra || intra->iteration != s.iteration || !le(s, *intra)) return false;
      last = &s;
    } else {
      if (!last || !le(s, *last)) return false;
      last = &s;
    }
  }
  return raw != nullptr;
}

}  // namespace castfruits
