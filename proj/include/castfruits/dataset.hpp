#pragma once
// Face records, putative-identity folders, and the JSON-lines manifest.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace castfruits {

enum class Gender { Male, Female };
enum class Race { Caucasian, EastAsian, African, Others };
enum class Scenario { Controlled, Wild };

std::string_view to_string(Gender g);
std::string_view to_string(Race r);
std::string_view to_string(Scenario s);
// Throw std::invalid_argument on unknown names.
Gender parse_gender(std::string_view s);
Race parse_race(std::string_view s);
Scenario parse_scenario(std::string_view s);

struct FaceAttributes {
  int age = 0;
  Gender gender = Gender::Male;
  Race race = Race::Caucasian;
  Scenario scenario = Scenario::Controlled;

  bool operator==(const FaceAttributes&) const = default;
};

struct FaceRecord {
  std::string face_id;
  std::string subject_id;
  std::optional<FaceAttributes> attributes;
  std::uint64_t embedding_row = 0;

  bool operator==(const FaceRecord&) const = default;
};

struct Dataset {
  std::vector<FaceRecord> records;

  std::size_t face_count() const { return records.size(); }
  std::size_t identity_count() const;

  bool operator==(const Dataset&) const = default;
};

// A putative identity: faces are indices into the owning Dataset's records.
struct Folder {
  std::string subject_id;
  std::vector<std::size_t> faces;

  bool operator==(const Folder&) const = default;
};

// Folders ordered by subject_id; faces keep record order.
std::vector<Folder> group_folders(const Dataset& dataset);

// Materializes folders back into records. Each record takes its folder's
// subject_id; folder order and in-folder order are preserved.
Dataset materialize(const Dataset& source, std::span<const Folder> folders);

// Throws std::runtime_error naming the record if any embedding_row >= rows.
void check_embedding_rows(const Dataset& dataset, std::uint64_t rows);

// One JSON object per line. Errors carry the 1-based line number.
Dataset read_manifest(std::istream& in);
Dataset read_manifest(const std::filesystem::path& path);
void write_manifest(const Dataset& dataset, std::ostream& out);
void write_manifest(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace castfruits
