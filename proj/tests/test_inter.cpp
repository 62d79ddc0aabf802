#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "castfruits/inter_clean.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace castfruits;

namespace {

// Folders whose faces are all equal to one direction each.
struct World {
  Dataset dataset;
  EmbeddingMatrix embeddings;
  std::vector<Folder> folders;
};

World constant_folders(const std::vector<std::vector<float>>& dirs, const std::vector<std::size_t>& sizes,
                       const std::vector<std::string>& names) {
  World w;
  w.embeddings = EmbeddingMatrix(dirs.front().size(), 0);
  for (std::size_t f = 0; f < dirs.size(); ++f) {
    Folder folder{names[f], {}};
    for (std::size_t i = 0; i < sizes[f]; ++i) {
      const std::size_t row = w.dataset.records.size();
      w.dataset.records.push_back({names[f] + "_" + std::to_string(i), names[f], std::nullopt, row});
      w.embeddings.push_back(normalize(std::span<const float>(dirs[f])));
      folder.faces.push_back(row);
    }
    w.folders.push_back(folder);
  }
  return w;
}

std::vector<float> at_cos(double c) { return {static_cast<float>(c), static_cast<float>(std::sqrt(1 - c * c)), 0.0f}; }

std::vector<FolderCentroid> random_centroids(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  // A few shared directions so that many pairs clear the thresholds.
  std::vector<std::vector<float>> anchors;
  for (int a = 0; a < 5; ++a) anchors.push_back(oracle::random_unit(rng, d));
  std::normal_distribution<double> noise(0.0, 0.9 / std::sqrt(double(d)));
  std::vector<FolderCentroid> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& anchor = anchors[rng() % anchors.size()];
    std::vector<double> v(anchor.begin(), anchor.end());
    for (auto& x : v) x += noise(rng);
    char id[32];
    std::snprintf(id, sizeof id, "s%03zu", (i * 37) % n);
    out.push_back({id, normalize(std::span<const double>(v))});
  }
  return out;
}

}  // namespace

TEST_SUITE("inter") {
  TEST_CASE("cosine 0.8 merges into the larger folder") {
    auto w = constant_folders({{1, 0, 0}, at_cos(0.8)}, {10, 6}, {"a", "b"});
    const auto r = resolve_folders(w.folders, w.dataset, w.embeddings, {});
    REQUIRE(r.folders.size() == 1);
    CHECK(r.folders[0].subject_id == "a");
    CHECK(r.folders[0].faces.size() == 16);
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].kind == ActionKind::Merge);
    CHECK(r.log[0].survivor == "a");
    CHECK(r.log[0].victim == "b");
    CHECK(r.converged);
  }

  TEST_CASE("cosine 0.6 deletes the smaller folder") {
    auto w = constant_folders({{1, 0, 0}, at_cos(0.6)}, {10, 4}, {"a", "b"});
    const auto r = resolve_folders(w.folders, w.dataset, w.embeddings, {});
    REQUIRE(r.folders.size() == 1);
    CHECK(r.folders[0].subject_id == "a");
    CHECK(r.folders[0].faces.size() == 10);
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].kind == ActionKind::Delete);
    CHECK(r.log[0].victim == "b");
  }

  TEST_CASE("equal sizes delete the larger subject_id") {
    auto w = constant_folders({{1, 0, 0}, at_cos(0.6)}, {5, 5}, {"m", "k"});
    const auto r = resolve_folders(w.folders, w.dataset, w.embeddings, {});
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].victim == "m");
  }

  TEST_CASE("cosine 0.3 leaves folders alone") {
    auto w = constant_folders({{1, 0, 0}, at_cos(0.3)}, {10, 6}, {"a", "b"});
    const auto r = resolve_folders(w.folders, w.dataset, w.embeddings, {});
    CHECK(r.folders == w.folders);
    CHECK(r.log.empty());
  }

  TEST_CASE("delete band is inclusive at both ends") {
    auto w = constant_folders({{1, 0, 0}, at_cos(0.75)}, {4, 3}, {"a", "b"});
    const double s = cosine(folder_centroid(w.folders[0], w.dataset, w.embeddings),
                            folder_centroid(w.folders[1], w.dataset, w.embeddings));
    InterCleanConfig cfg;
    cfg.merge_threshold = s;
    auto r = resolve_folders(w.folders, w.dataset, w.embeddings, cfg);
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].kind == ActionKind::Delete);
    cfg.merge_threshold = s + 0.01;
    cfg.delete_low = s;
    r = resolve_folders(w.folders, w.dataset, w.embeddings, cfg);
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].kind == ActionKind::Delete);
    cfg.merge_threshold = s - 0.01;
    cfg.delete_low = 0.5;
    r = resolve_folders(w.folders, w.dataset, w.embeddings, cfg);
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].kind == ActionKind::Merge);
  }

  TEST_CASE("three folders mutually at 0.9 give three scan pairs") {
    // Unit vectors with pairwise cosine 0.9: a*e_i + b*(1,1,1)/sqrt(3).
    const double a = std::sqrt(0.1), b = std::sqrt(0.9);
    std::vector<FolderCentroid> cs;
    for (int i = 0; i < 3; ++i) {
      std::vector<double> v(4, 0.0);
      v[i] = a;
      v[3] = b;
      cs.push_back({std::string(1, char('a' + i)), normalize(std::span<const double>(v))});
    }
    const auto pairs = pairwise_centroid_scan(cs, 0.5);
    REQUIRE(pairs.size() == 3);
    for (const auto& p : pairs) CHECK(p.similarity.value() == doctest::Approx(0.9).epsilon(1e-6));
  }

  TEST_CASE("orthogonal centroids give no pairs") {
    std::vector<FolderCentroid> cs;
    for (int i = 0; i < 4; ++i) {
      std::vector<float> v(4, 0.0f);
      v[i] = 1.0f;
      cs.push_back({std::to_string(i), Embedding::from_unit(v)});
    }
    CHECK(pairwise_centroid_scan(cs, 0.5).empty());
  }

  TEST_CASE("scan equals a double loop") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(seed);
      const auto cs = random_centroids(rng, 100, 32);
      std::vector<std::tuple<std::string, std::string, double>> ref;
      for (std::size_t i = 0; i < cs.size(); ++i)
        for (std::size_t j = i + 1; j < cs.size(); ++j) {
          const double s = oracle::cos_naive(cs[i].centroid.values(), cs[j].centroid.values());
          if (s >= 0.5) ref.emplace_back(std::min(cs[i].subject_id, cs[j].subject_id),
                                         std::max(cs[i].subject_id, cs[j].subject_id), s);
        }
      const auto got = pairwise_centroid_scan(cs, 0.5);
      REQUIRE(got.size() == ref.size());
      std::set<std::pair<std::string, std::string>> a, b;
      for (const auto& [x, y, s] : ref) a.emplace(x, y);
      for (const auto& p : got) {
        CHECK(cs[p.first].subject_id < cs[p.second].subject_id);
        b.emplace(cs[p.first].subject_id, cs[p.second].subject_id);
      }
      CHECK(a == b);
      for (std::size_t k = 1; k < got.size(); ++k) CHECK(got[k - 1].similarity.value() >= got[k].similarity.value());
    }
  }

  TEST_CASE("resolution invariants on random folders") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      std::mt19937_64 rng(seed);
      const std::size_t d = 16;
      std::vector<std::vector<float>> anchors;
      for (int a = 0; a < 6; ++a) anchors.push_back(oracle::random_unit(rng, d));
      World w;
      w.embeddings = EmbeddingMatrix(d, 0);
      std::normal_distribution<double> noise(0.0, 0.6 / std::sqrt(double(d)));
      for (int f = 0; f < 25; ++f) {
        const auto& anchor = anchors[rng() % anchors.size()];
        Folder folder{"s" + std::to_string(100 + f), {}};
        const int n = 3 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i) {
          std::vector<double> v(anchor.begin(), anchor.end());
          for (auto& x : v) x += noise(rng);
          const std::size_t row = w.dataset.records.size();
          w.dataset.records.push_back({folder.subject_id + "_" + std::to_string(i), folder.subject_id, std::nullopt, row});
          w.embeddings.push_back(normalize(std::span<const double>(v)));
          folder.faces.push_back(row);
        }
        w.folders.push_back(folder);
      }
      std::shuffle(w.folders.begin(), w.folders.end(), rng);

      const auto r = resolve_folders(w.folders, w.dataset, w.embeddings, {});
      const auto r2 = resolve_folders(w.folders, w.dataset, w.embeddings, {});
      CHECK(r.folders == r2.folders);
      CHECK(r.log == r2.log);

      std::size_t before = 0, after = 0;
      for (const auto& f : w.folders) before += f.faces.size();
      std::set<std::size_t> seen;
      for (const auto& f : r.folders) {
        after += f.faces.size();
        for (auto i : f.faces) CHECK(seen.insert(i).second);
      }
      CHECK(after <= before);
      CHECK(r.folders.size() <= w.folders.size());
      CHECK(replay_actions(w.folders, r.log) == r.folders);

      // Faces leave only through DELETE.
      std::set<std::size_t> deleted;
      std::map<std::string, std::set<std::size_t>> members;
      for (const auto& f : w.folders) members[f.subject_id].insert(f.faces.begin(), f.faces.end());
      for (const auto& a : r.log) {
        if (a.kind == ActionKind::Merge) {
          members[a.survivor].insert(members[a.victim].begin(), members[a.victim].end());
        } else {
          deleted.insert(members[a.victim].begin(), members[a.victim].end());
        }
        members.erase(a.victim);
      }
      CHECK(before - after == deleted.size());
      for (const auto& f : r.folders) CHECK(std::set<std::size_t>(f.faces.begin(), f.faces.end()) == members[f.subject_id]);

      // No surviving pair is still actionable unless the pass cap was hit.
      if (r.converged) {
        std::vector<FolderCentroid> cs;
        for (const auto& f : r.folders) cs.push_back({f.subject_id, folder_centroid(f, w.dataset, w.embeddings)});
        CHECK(pairwise_centroid_scan(cs, 0.5).empty());
      }
    }
  }

  TEST_CASE("action log round trips") {
    const std::vector<InterAction> log{{ActionKind::Merge, "a", "b", Similarity(0.8123456789)},
                                       {ActionKind::Delete, "a", "c", Similarity(0.5)}};
    std::stringstream ss;
    write_action_log(log, ss);
    CHECK(read_action_log(ss) == log);
    std::stringstream bad("{\"kind\":\"SPLIT\",\"survivor\":\"a\",\"victim\":\"b\",\"similarity\":0.9}\n");
    CHECK_THROWS(read_action_log(bad));
  }

  TEST_CASE("input errors") {
    auto w = constant_folders({{1, 0, 0}, {0, 1, 0}}, {3, 3}, {"a", "a"});
    CHECK_THROWS(resolve_folders(w.folders, w.dataset, w.embeddings, {}));
    CHECK(resolve_folders({}, w.dataset, w.embeddings, {}).folders.empty());
    InterCleanConfig bad;
    bad.delete_low = 0.8;
    CHECK_THROWS(bad.validate());
  }
}
