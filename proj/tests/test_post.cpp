#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "castfruits/post_clean.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace castfruits;

namespace {

std::vector<EmbeddingView> views(const std::vector<std::vector<float>>& pts) {
  return {pts.begin(), pts.end()};
}

std::vector<float> unit(std::vector<double> v) {
  auto e = normalize(std::span<const double>(v));
  return {e.values().begin(), e.values().end()};
}

std::vector<std::string> ids_for(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("f" + std::to_string(100 + i));
  return ids;
}

// Components of the > threshold graph; each keeps its member closest to
// the renormalized subject mean (ties: smallest id).
std::vector<std::size_t> dedup_oracle(const std::vector<std::vector<float>>& pts, const std::vector<std::string>& ids,
                                      double threshold) {
  const std::size_t n = pts.size();
  std::vector<double> mean(pts[0].size(), 0.0);
  for (const auto& p : pts)
    for (std::size_t k = 0; k < p.size(); ++k) mean[k] += p[k];
  const auto c = unit(mean);
  std::vector<int> comp(n, -1);
  int next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<std::size_t> stack{s};
    comp[s] = next;
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      for (std::size_t j = 0; j < n; ++j)
        if (comp[j] < 0 && oracle::cos_naive(pts[i], pts[j]) > threshold) {
          comp[j] = next;
          stack.push_back(j);
        }
    }
    ++next;
  }
  std::vector<std::size_t> keep;
  for (int k = 0; k < next; ++k) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (comp[i] != k) continue;
      if (best == n) {
        best = i;
        continue;
      }
      const double si = oracle::cos_naive(pts[i], c), sb = oracle::cos_naive(pts[best], c);
      if (si > sb || (si == sb && ids[i] < ids[best])) best = i;
    }
    keep.push_back(best);
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

std::vector<std::vector<float>> subject_with_duplicates(std::mt19937_64& rng, std::size_t d) {
  std::vector<std::vector<float>> pts;
  const auto center = oracle::random_unit(rng, d);
  std::normal_distribution<double> wide(0.0, 0.6 / std::sqrt(double(d)));
  std::normal_distribution<double> tight(0.0, 0.15 / std::sqrt(double(d)));
  const int base = 3 + static_cast<int>(rng() % 8);
  for (int i = 0; i < base; ++i) {
    std::vector<double> v(center.begin(), center.end());
    for (auto& x : v) x += wide(rng);
    pts.push_back(unit(v));
    const int copies = static_cast<int>(rng() % 3);
    for (int c = 0; c < copies; ++c) {
      std::vector<double> w(pts.back().begin(), pts.back().end());
      for (auto& x : w) x += tight(rng);
      pts.push_back(unit(w));
    }
  }
  std::shuffle(pts.begin(), pts.end(), rng);
  return pts;
}

}  // namespace

TEST_SUITE("post") {
  TEST_CASE("two faces at 0.97 keep one") {
    const std::vector<std::vector<float>> pts{{1, 0, 0}, unit({0.97, std::sqrt(1 - 0.97 * 0.97), 0})};
    const auto keep = dedup_subject(views(pts), ids_for(2), {});
    CHECK(keep.size() == 1);
    CHECK(keep == dedup_oracle(pts, ids_for(2), 0.95));
  }

  TEST_CASE("dissimilar faces are all kept") {
    std::mt19937_64 rng(1);
    std::vector<std::vector<float>> pts;
    for (int i = 0; i < 10; ++i) pts.push_back(oracle::random_unit(rng, 64));
    const auto keep = dedup_subject(views(pts), ids_for(10), {});
    CHECK(keep.size() == 10);
  }

  TEST_CASE("chain a~b, b~c above threshold, a~c below") {
    const double t = std::acos(0.96);
    const double phi = std::acos((0.90 - 0.96 * 0.96) / (std::sin(t) * std::sin(t)));
    const std::vector<std::vector<float>> pts{unit({std::cos(t), std::sin(t), 0.0}), {1, 0, 0},
                                              unit({std::cos(t), std::sin(t) * std::cos(phi), std::sin(t) * std::sin(phi)})};
    REQUIRE(oracle::cos_naive(pts[0], pts[1]) == doctest::Approx(0.96));
    REQUIRE(oracle::cos_naive(pts[1], pts[2]) == doctest::Approx(0.96));
    REQUIRE(oracle::cos_naive(pts[0], pts[2]) == doctest::Approx(0.90));
    const auto ids = ids_for(3);

    // Exhaustive: the only valid retained sets hold one face of the single
    // component; the oracle picks the one closest to the centroid.
    std::vector<std::size_t> best;
    double best_sim = -2.0;
    std::vector<double> mean(3, 0.0);
    for (const auto& p : pts)
      for (int k = 0; k < 3; ++k) mean[k] += p[k];
    const auto c = unit(mean);
    for (std::size_t i = 0; i < 3; ++i) {
      const double s = oracle::cos_naive(pts[i], c);
      if (s > best_sim + 1e-12) {
        best_sim = s;
        best = {i};
      }
    }
    CHECK(best == std::vector<std::size_t>{1});
    CHECK(dedup_subject(views(pts), ids, {}) == best);
    CHECK(dedup_oracle(pts, ids, 0.95) == best);
  }

  TEST_CASE("dedup matches the component oracle, is idempotent and never empties") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed);
      const auto pts = subject_with_duplicates(rng, 32);
      const auto ids = ids_for(pts.size());
      const auto keep = dedup_subject(views(pts), ids, {});
      CHECK(keep == dedup_oracle(pts, ids, 0.95));
      CHECK_FALSE(keep.empty());

      std::vector<std::vector<float>> kept;
      std::vector<std::string> kept_ids;
      for (auto i : keep) {
        kept.push_back(pts[i]);
        kept_ids.push_back(ids[i]);
      }
      const auto again = dedup_subject(views(kept), kept_ids, {});
      std::vector<std::size_t> all(kept.size());
      std::iota(all.begin(), all.end(), 0);
      CHECK(again == all);
    }
  }

  TEST_CASE("dedup_folder keeps the subject and a subset of faces") {
    Dataset d;
    EmbeddingMatrix m(3, 0);
    for (int i = 0; i < 4; ++i) {
      d.records.push_back({"f" + std::to_string(i), "s", std::nullopt, static_cast<std::uint64_t>(i)});
      m.push_back(Embedding::from_unit(i < 2 ? std::vector<float>{1, 0, 0} : std::vector<float>{0, 1, 0}));
    }
    const auto out = dedup_folder(Folder{"s", {0, 1, 2, 3}}, d, m, {});
    CHECK(out.subject_id == "s");
    CHECK(out.faces == std::vector<std::size_t>{0, 2});
  }

  TEST_CASE("test overlap examples") {
    const auto a = Embedding::from_unit({1, 0, 0});
    const auto b = Embedding::from_unit({0, 1, 0});
    const std::vector<FolderCentroid> subjects{{"s1", a}, {"s2", b}};
    const std::vector<Embedding> tests{a};
    const auto r = remove_test_overlap(subjects, tests, {});
    CHECK(r.retained == std::vector<std::size_t>{1});
    CHECK_FALSE(r.warning);

    const std::vector<Embedding> far{Embedding::from_unit({0, 0, 1})};
    CHECK(remove_test_overlap(subjects, far, {}).retained == std::vector<std::size_t>{0, 1});

    const auto empty = remove_test_overlap(subjects, {}, {});
    CHECK(empty.retained == std::vector<std::size_t>{0, 1});
    CHECK(empty.warning);
  }

  TEST_CASE("test overlap equals a max scan and is monotone in the threshold") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed);
      const std::size_t d = 8;
      std::vector<FolderCentroid> subjects;
      for (int i = 0; i < 50; ++i) {
        auto v = oracle::random_unit(rng, d);
        subjects.push_back({"s" + std::to_string(i), normalize(std::span<const float>(v))});
      }
      std::vector<Embedding> tests;
      for (int i = 0; i < 10; ++i) {
        auto v = oracle::random_unit(rng, d);
        tests.push_back(normalize(std::span<const float>(v)));
      }
      std::size_t previous = 0;
      for (double thr : {0.3, 0.5, 0.7, 0.8, 0.9}) {
        PostCleanConfig cfg;
        cfg.overlap_threshold = thr;
        std::vector<std::size_t> ref;
        for (std::size_t i = 0; i < subjects.size(); ++i) {
          double best = -2.0;
          for (const auto& t : tests) best = std::max(best, oracle::cos_naive(subjects[i].centroid.values(), t.values()));
          if (!(best > thr)) ref.push_back(i);
        }
        const auto got = remove_test_overlap(subjects, tests, cfg).retained;
        CHECK(got == ref);
        CHECK(got.size() >= previous);
        previous = got.size();
      }
    }
  }

  TEST_CASE("minimum faces per identity") {
    std::vector<Folder> folders{{"a", {0, 1}}, {"b", {2, 3, 4}}, {"c", {}}};
    const auto kept = enforce_min_faces(folders, {});
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].subject_id == "b");
    CHECK(enforce_min_faces(std::vector<Folder>{}, {}).empty());
    CHECK(enforce_min_faces(Dataset{}, {}).records.empty());

    Dataset d;
    for (int i = 0; i < 5; ++i) d.records.push_back({"f" + std::to_string(i), i < 2 ? "a" : "b", std::nullopt, 0});
    const auto out = enforce_min_faces(d, {});
    CHECK(out.face_count() == 3);
    CHECK(out.identity_count() == 1);
  }
}
