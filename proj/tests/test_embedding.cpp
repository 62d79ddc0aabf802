#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "castfruits/dataset.hpp"
#include "castfruits/embedding.hpp"
#include "castfruits/embedding_io.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace castfruits;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "castfruits_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("embedding") {
  TEST_CASE("normalize scales to unit length") {
    const std::vector<float> raw{3.0f, 4.0f};
    const auto e = normalize(std::span<const float>(raw));
    CHECK(e[0] == doctest::Approx(0.6));
    CHECK(e[1] == doctest::Approx(0.8));
  }

  TEST_CASE("normalize rejects zero and non-finite input") {
    const std::vector<float> zero(4, 0.0f);
    CHECK_THROWS_WITH(normalize(std::span<const float>(zero)), doctest::Contains("degenerate"));
    const std::vector<float> bad{1.0f, NAN};
    CHECK_THROWS_WITH(normalize(std::span<const float>(bad)), doctest::Contains("non-finite"));
  }

  TEST_CASE("from_unit checks the norm") {
    CHECK_NOTHROW(Embedding::from_unit({1.0f, 0.0f}));
    CHECK_THROWS(Embedding::from_unit({1.0f, 1.0f}));
  }

  TEST_CASE("cosine of orthogonal, identical and opposite vectors") {
    const auto a = Embedding::from_unit({1.0f, 0.0f});
    const auto b = Embedding::from_unit({0.0f, 1.0f});
    const auto c = Embedding::from_unit({-1.0f, 0.0f});
    CHECK(cosine(a, b).value() == 0.0);
    CHECK(cosine(a, a).value() == 1.0);
    CHECK(cosine(a, c).value() == -1.0);
  }

  TEST_CASE("dot rejects mismatched dimensions") {
    const auto a = Embedding::from_unit({1.0f, 0.0f});
    const auto b = Embedding::from_unit({1.0f, 0.0f, 0.0f});
    CHECK_THROWS(dot(a, b));
  }

  TEST_CASE("Similarity clamps and rejects NaN") {
    CHECK(Similarity(1.0000001).value() == 1.0);
    CHECK(Similarity(-1.5).value() == -1.0);
    CHECK_THROWS(Similarity(NAN));
  }

  TEST_CASE("cosine matches a naive computation") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
      const auto a = oracle::random_unit(rng, 512);
      const auto b = oracle::random_unit(rng, 512);
      CHECK(cosine(a, b).value() == doctest::Approx(oracle::cos_naive(a, b)).epsilon(1e-9));
    }
  }

  TEST_CASE("centroid of two orthogonal unit vectors") {
    const std::vector<Embedding> m{Embedding::from_unit({1.0f, 0.0f}), Embedding::from_unit({0.0f, 1.0f})};
    const auto c = centroid(m);
    CHECK(c[0] == doctest::Approx(std::sqrt(0.5)));
    CHECK(c[1] == doctest::Approx(std::sqrt(0.5)));
  }

  TEST_CASE("centroid errors") {
    CHECK_THROWS(centroid(std::span<const Embedding>()));
    const std::vector<Embedding> opposite{Embedding::from_unit({1.0f, 0.0f}), Embedding::from_unit({-1.0f, 0.0f})};
    CHECK_THROWS_WITH(centroid(opposite), doctest::Contains("degenerate centroid"));
  }

  TEST_CASE("centroid is permutation invariant") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 50; ++t) {
      std::vector<Embedding> m;
      for (int i = 0; i < 20; ++i) {
        auto v = oracle::random_unit(rng, 64);
        m.push_back(normalize(std::span<const float>(v)));
      }
      const auto a = centroid(m);
      std::shuffle(m.begin(), m.end(), rng);
      const auto b = centroid(m);
      for (std::size_t k = 0; k < a.dimension(); ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-6);
    }
  }

  TEST_CASE("embedding file round trip") {
    std::mt19937_64 rng(5);
    EmbeddingMatrix m(16, 0);
    for (int i = 0; i < 7; ++i) {
      auto v = oracle::random_unit(rng, 16);
      m.push_back(normalize(std::span<const float>(v)));
    }
    const auto path = temp_file("roundtrip.emb");
    write_embeddings(m, path);
    CHECK(fs::file_size(path) == 4 + 4 + 8 + 7 * 16 * 4);
    CHECK(read_embeddings(path) == m);
  }

  TEST_CASE("embedding file errors") {
    const auto path = temp_file("bad.emb");
    {
      std::ofstream f(path, std::ios::binary);
      f << "NOPE";
    }
    CHECK_THROWS_WITH(read_embeddings(path), doctest::Contains("magic"));

    EmbeddingMatrix m(4, 0);
    m.push_back(Embedding::from_unit({1.0f, 0.0f, 0.0f, 0.0f}));
    write_embeddings(m, path);
    fs::resize_file(path, fs::file_size(path) - 2);
    CHECK_THROWS(read_embeddings(path));
    CHECK_THROWS(read_embeddings(temp_file("missing.emb")));
  }
}

TEST_SUITE("manifest") {
  Dataset three_records() {
    Dataset d;
    d.records.push_back({"f1", "s1", FaceAttributes{30, Gender::Female, Race::EastAsian, Scenario::Wild}, 0});
    d.records.push_back({"f2", "s1", std::nullopt, 1});
    d.records.push_back({"f3", "s2", FaceAttributes{61, Gender::Male, Race::African, Scenario::Controlled}, 2});
    return d;
  }

  TEST_CASE("empty manifest round trips") {
    std::stringstream ss;
    write_manifest(Dataset{}, ss);
    CHECK(ss.str().empty());
    CHECK(read_manifest(ss).records.empty());
  }

  TEST_CASE("manifest round trips byte-stably") {
    const auto d = three_records();
    std::stringstream a;
    write_manifest(d, a);
    std::stringstream in(a.str());
    const auto back = read_manifest(in);
    CHECK(back == d);
    std::stringstream b;
    write_manifest(back, b);
    CHECK(a.str() == b.str());
  }

  TEST_CASE("malformed line reports its number") {
    std::stringstream ss("{\"face_id\":\"a\",\"subject_id\":\"s\",\"embedding_row\":0}\n{oops\n");
    CHECK_THROWS_WITH(read_manifest(ss), doctest::Contains("line 2"));
  }

  TEST_CASE("duplicate face_id is named") {
    std::stringstream ss(
        "{\"face_id\":\"a\",\"subject_id\":\"s\",\"embedding_row\":0}\n"
        "{\"face_id\":\"a\",\"subject_id\":\"t\",\"embedding_row\":1}\n");
    CHECK_THROWS_WITH(read_manifest(ss), doctest::Contains("'a'"));
  }

  TEST_CASE("invalid attribute enum is rejected") {
    std::stringstream ss(
        "{\"face_id\":\"a\",\"subject_id\":\"s\",\"embedding_row\":0,"
        "\"attributes\":{\"age\":20,\"gender\":\"Robot\",\"race\":\"African\",\"scenario\":\"Wild\"}}\n");
    CHECK_THROWS_WITH(read_manifest(ss), doctest::Contains("line 1"));
  }

  TEST_CASE("out-of-bounds embedding_row names the record") {
    auto d = three_records();
    d.records[2].embedding_row = 9;
    CHECK_THROWS_WITH(check_embedding_rows(d, 3), doctest::Contains("f3"));
    CHECK_NOTHROW(check_embedding_rows(three_records(), 3));
  }

  TEST_CASE("group_folders orders by subject and keeps record order") {
    const auto folders = group_folders(three_records());
    REQUIRE(folders.size() == 2);
    CHECK(folders[0].subject_id == "s1");
    CHECK(folders[0].faces == std::vector<std::size_t>{0, 1});
    CHECK(folders[1].faces == std::vector<std::size_t>{2});
  }

  TEST_CASE("enum names parse back") {
    for (auto r : {Race::Caucasian, Race::EastAsian, Race::African, Race::Others}) CHECK(parse_race(to_string(r)) == r);
    for (auto g : {Gender::Male, Gender::Female}) CHECK(parse_gender(to_string(g)) == g);
    for (auto s : {Scenario::Controlled, Scenario::Wild}) CHECK(parse_scenario(to_string(s)) == s);
  }
}
