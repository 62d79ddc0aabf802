#include "castfruits/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace castfruits {

namespace {

constexpr std::uint64_t kIdentityStream = 1;
constexpr std::uint64_t kFolderStream = 2;
constexpr double kDuplicatePerturbation = 0.05;

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t d, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  std::vector<double> v(d);
  for (auto& x : v) x = normal(rng);
  return v;
}

Embedding random_direction(std::mt19937_64& rng, std::size_t d) {
  auto v = gaussian(rng, d, 1.0);
  return normalize(std::span<const double>(v));
}

// normalize(center + spread * n), n ~ N(0, I/d) so that |n| ~ 1.
Embedding perturb(const Embedding& center, double spread, std::mt19937_64& rng) {
  const std::size_t d = center.dimension();
  auto v = gaussian(rng, d, spread / std::sqrt(static_cast<double>(d)));
  for (std::size_t i = 0; i < d; ++i) v[i] += center[i];
  return normalize(std::span<const double>(v));
}

std::string numbered(char prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, n);
  return buf;
}

struct Identity {
  Embedding direction;
  Gender gender;
  Race race;
};

Identity make_identity(std::mt19937_64& rng, std::size_t d) {
  Identity id{random_direction(rng, d), Gender::Male, Race::Caucasian};
  std::uniform_int_distribution<int> two(0, 1), four(0, 3);
  id.gender = two(rng) ? Gender::Female : Gender::Male;
  id.race = static_cast<Race>(four(rng));
  return id;
}

struct PlantedFace {
  std::string identity;
  Embedding clean;
  FaceAttributes attributes;
  double nuisance;
};

}  // namespace

void SynthConfig::validate() const {
  const auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate_ok(outlier_rate) || !rate_ok(overlap_rate) || !rate_ok(duplicate_rate) || !rate_ok(distractor_fraction)) {
    throw std::invalid_argument("synth rates must lie in [0, 1]");
  }
  if (identity_count < 2) throw std::invalid_argument("synth.identity_count must be >= 2");
  if (dimension < 2) throw std::invalid_argument("synth.dimension must be >= 2");
  if (faces_min < 1 || faces_max < faces_min) throw std::invalid_argument("synth faces range is empty");
  if (!(cluster_concentration > 0.0 && cluster_concentration < M_PI / 2)) {
    throw std::invalid_argument("synth.cluster_concentration must lie in (0, pi/2)");
  }
  if (!(nuisance_scale > 0.0) || !(nuisance_tail > 0.0)) {
    throw std::invalid_argument("synth nuisance parameters must be positive");
  }
}

SynthDataset generate(const SynthConfig& config) {
  config.validate();
  const std::size_t d = config.dimension;
  const std::size_t n_ids = config.identity_count;
  const double spread = std::tan(config.cluster_concentration);

  std::vector<Identity> identities;
  identities.reserve(n_ids);
  for (std::size_t i = 0; i < n_ids; ++i) {
    auto rng = substream(config.seed, kIdentityStream, i);
    identities.push_back(make_identity(rng, d));
  }

  std::mt19937_64 master(config.seed);
  const auto n_split = static_cast<std::size_t>(std::llround(config.overlap_rate * static_cast<double>(n_ids)));
  std::vector<std::size_t> pick(n_ids);
  std::iota(pick.begin(), pick.end(), 0);
  std::shuffle(pick.begin(), pick.end(), master);
  std::vector<std::size_t> split(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(n_split));
  std::sort(split.begin(), split.end());

  // Folder k plants identity folder_identity[k]; secondary halves follow the primaries.
  std::vector<std::size_t> folder_identity(n_ids);
  std::iota(folder_identity.begin(), folder_identity.end(), 0);
  folder_identity.insert(folder_identity.end(), split.begin(), split.end());
  std::vector<std::size_t> folder_order(folder_identity.size());
  std::iota(folder_order.begin(), folder_order.end(), 0);
  std::shuffle(folder_order.begin(), folder_order.end(), master);

  SynthDataset out;
  out.truth.context_seed = master();
  out.embeddings = EmbeddingMatrix(d, std::size_t{0});

  std::vector<std::string> folder_names(folder_identity.size());
  for (std::size_t pos = 0; pos < folder_order.size(); ++pos) folder_names[folder_order[pos]] = numbered('s', pos, 6);
  for (std::size_t k = n_ids; k < folder_identity.size(); ++k) {
    const auto& a = folder_names[folder_identity[k]];
    const auto& b = folder_names[k];
    out.truth.merge_pairs.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(out.truth.merge_pairs.begin(), out.truth.merge_pairs.end());

  std::size_t face_counter = 0;
  for (std::size_t pos = 0; pos < folder_order.size(); ++pos) {
    const std::size_t k = folder_order[pos];
    const std::size_t planted = folder_identity[k];
    const std::string& folder = folder_names[k];
    out.truth.folder_dominant[folder] = numbered('i', planted, 6);

    auto rng = substream(config.seed, kFolderStream, k);
    std::uniform_int_distribution<std::size_t> size_dist(config.faces_min, config.faces_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> age_dist(16, 80);
    std::uniform_int_distribution<std::size_t> other_dist(0, n_ids - 2);
    const std::size_t count = size_dist(rng);

    const auto nuisance = [&] { return config.nuisance_scale * std::pow(1.0 - unit(rng), -1.0 / config.nuisance_tail); };
    const auto attributes = [&](const Identity& id) {
      return FaceAttributes{age_dist(rng), id.gender, id.race, unit(rng) < 0.5 ? Scenario::Controlled : Scenario::Wild};
    };

    std::vector<PlantedFace> faces;
    std::size_t distractors = 0;
    for (std::size_t f = 0; f < count; ++f) {
      if (unit(rng) < config.outlier_rate) {
        if (unit(rng) < config.distractor_fraction) {
          const Identity stranger = make_identity(rng, d);
          faces.push_back({"x" + folder.substr(1) + "_" + std::to_string(distractors++),
                           perturb(stranger.direction, spread, rng), attributes(stranger), nuisance()});
        } else {
          std::size_t other = other_dist(rng);
          if (other >= planted) ++other;
          faces.push_back({numbered('i', other, 6), perturb(identities[other].direction, spread, rng),
                           attributes(identities[other]), nuisance()});
        }
      } else {
        faces.push_back({numbered('i', planted, 6), perturb(identities[planted].direction, spread, rng),
                         attributes(identities[planted]), nuisance()});
      }
    }
    std::vector<std::size_t> duplicated;
    for (std::size_t f = 0; f < count; ++f) {
      if (unit(rng) < config.duplicate_rate) duplicated.push_back(f);
    }

    const auto emit = [&](const PlantedFace& p) {
      const std::string face_id = numbered('f', face_counter++, 7);
      out.manifest.records.push_back({face_id, folder, p.attributes, out.embeddings.size()});
      out.embeddings.push_back(p.clean);
      out.truth.faces[face_id] = {p.identity, folder, p.nuisance};
      return face_id;
    };
    std::vector<std::string> ids;
    for (const auto& p : faces) ids.push_back(emit(p));
    for (std::size_t f : duplicated) {
      PlantedFace copy = faces[f];
      copy.clean = perturb(faces[f].clean, kDuplicatePerturbation, rng);
      out.truth.duplicate_pairs.emplace_back(ids[f], emit(copy));
    }
  }
  return out;
}

CleaningScores score_cleaning(const Dataset& cleaned, const GroundTruth& truth) {
  CleaningScores s;
  std::map<std::string, std::map<std::string, std::size_t>> composition;
  std::set<std::string> present_faces, present_subjects;
  std::size_t retained_dominant = 0;
  for (const auto& r : cleaned.records) {
    auto it = truth.faces.find(r.face_id);
    if (it == truth.faces.end()) throw std::invalid_argument("face '" + r.face_id + "' is not in the ground truth");
    ++composition[r.subject_id][it->second.identity];
    present_faces.insert(r.face_id);
    present_subjects.insert(r.subject_id);
    auto dom = truth.folder_dominant.find(it->second.folder);
    if (dom != truth.folder_dominant.end() && dom->second == it->second.identity) ++retained_dominant;
  }

  if (!cleaned.records.empty()) {
    std::size_t majority_total = 0;
    for (const auto& [subject, counts] : composition) {
      std::size_t best = 0;
      for (const auto& [identity, c] : counts) best = std::max(best, c);
      majority_total += best;
    }
    s.purity = static_cast<double>(majority_total) / static_cast<double>(cleaned.records.size());
  }

  std::size_t planted_dominant = 0;
  for (const auto& [id, face] : truth.faces) {
    auto dom = truth.folder_dominant.find(face.folder);
    if (dom != truth.folder_dominant.end() && dom->second == face.identity) ++planted_dominant;
  }
  if (planted_dominant > 0) s.face_recall = static_cast<double>(retained_dominant) / planted_dominant;

  if (!truth.merge_pairs.empty()) {
    std::size_t resolved = 0;
    for (const auto& [a, b] : truth.merge_pairs) {
      if (!(present_subjects.count(a) && present_subjects.count(b))) ++resolved;
    }
    s.merge_recall = static_cast<double>(resolved) / truth.merge_pairs.size();
  }
  if (!truth.duplicate_pairs.empty()) {
    std::size_t removed = 0;
    for (const auto& [a, b] : truth.duplicate_pairs) {
      if (!(present_faces.count(a) && present_faces.count(b))) ++removed;
    }
    s.dup_removal_rate = static_cast<double>(removed) / truth.duplicate_pairs.size();
  }
  return s;
}

void write_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["context_seed"] = truth.context_seed;
  nlohmann::ordered_json faces = nlohmann::ordered_json::object();
  for (const auto& [id, f] : truth.faces) {
    faces[id] = {{"identity", f.identity}, {"folder", f.folder}, {"nuisance", f.nuisance}};
  }
  j["faces"] = std::move(faces);
  j["folder_dominant"] = truth.folder_dominant;
  j["merge_pairs"] = truth.merge_pairs;
  j["duplicate_pairs"] = truth.duplicate_pairs;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump() << '\n';
}

GroundTruth read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open truth file " + path.string());
  const auto j = nlohmann::json::parse(in);
  GroundTruth t;
  t.context_seed = j.at("context_seed").get<std::uint64_t>();
  for (const auto& [id, f] : j.at("faces").items()) {
    t.faces[id] = {f.at("identity").get<std::string>(), f.at("folder").get<std::string>(),
                   f.at("nuisance").get<double>()};
  }
  t.folder_dominant = j.at("folder_dominant").get<std::map<std::string, std::string>>();
  t.merge_pairs = j.at("merge_pairs").get<std::vector<std::pair<std::string, std::string>>>();
  t.duplicate_pairs = j.at("duplicate_pairs").get<std::vector<std::pair<std::string, std::string>>>();
  return t;
}

}  // namespace castfruits
