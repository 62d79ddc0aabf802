#include "castfruits/dataset.hpp"

#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"

namespace castfruits {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Gender g) { return g == Gender::Male ? "Male" : "Female"; }

std::string_view to_string(Race r) {
  switch (r) {
    case Race::Caucasian: return "Caucasian";
    case Race::EastAsian: return "EastAsian";
    case Race::African: return "African";
    case Race::Others: return "Others";
  }
  return "?";
}

std::string_view to_string(Scenario s) { return s == Scenario::Controlled ? "Controlled" : "Wild"; }

Gender parse_gender(std::string_view s) {
  if (s == "Male") return Gender::Male;
  if (s == "Female") return Gender::Female;
  throw std::invalid_argument("unknown gender '" + std::string(s) + "'");
}

Race parse_race(std::string_view s) {
  if (s == "Caucasian") return Race::Caucasian;
  if (s == "EastAsian") return Race::EastAsian;
  if (s == "African") return Race::African;
  if (s == "Others") return Race::Others;
  throw std::invalid_argument("unknown race '" + std::string(s) + "'");
}

Scenario parse_scenario(std::string_view s) {
  if (s == "Controlled") return Scenario::Controlled;
  if (s == "Wild") return Scenario::Wild;
  throw std::invalid_argument("unknown scenario '" + std::string(s) + "'");
}

std::size_t Dataset::identity_count() const {
  std::unordered_set<std::string_view> ids;
  for (const auto& r : records) ids.insert(r.subject_id);
  return ids.size();
}

std::vector<Folder> group_folders(const Dataset& dataset) {
  std::map<std::string_view, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    by_subject[dataset.records[i].subject_id].push_back(i);
  }
  std::vector<Folder> folders;
  folders.reserve(by_subject.size());
  for (auto& [id, faces] : by_subject) folders.push_back({std::string(id), std::move(faces)});
  return folders;
}

Dataset materialize(const Dataset& source, std::span<const Folder> folders) {
  Dataset out;
  for (const auto& f : folders) {
    for (std::size_t idx : f.faces) {
      FaceRecord r = source.records.at(idx);
      r.subject_id = f.subject_id;
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

void check_embedding_rows(const Dataset& dataset, std::uint64_t rows) {
  for (const auto& r : dataset.records) {
    if (r.embedding_row >= rows) {
      throw std::runtime_error("record '" + r.face_id + "': embedding_row " +
                               std::to_string(r.embedding_row) + " out of bounds (" +
                               std::to_string(rows) + " rows)");
    }
  }
}

namespace {

FaceRecord parse_record(const json& j) {
  FaceRecord r;
  r.face_id = j.at("face_id").get<std::string>();
  r.subject_id = j.at("subject_id").get<std::string>();
  const auto& row = j.at("embedding_row");
  if (!row.is_number_unsigned()) throw std::invalid_argument("embedding_row must be a non-negative integer");
  r.embedding_row = row.get<std::uint64_t>();
  if (auto it = j.find("attributes"); it != j.end() && !it->is_null()) {
    FaceAttributes a;
    a.age = it->at("age").get<int>();
    if (a.age < 0) throw std::invalid_argument("negative age");
    a.gender = parse_gender(it->at("gender").get<std::string>());
    a.race = parse_race(it->at("race").get<std::string>());
    a.scenario = parse_scenario(it->at("scenario").get<std::string>());
    r.attributes = a;
  }
  return r;
}

}  // namespace

Dataset read_manifest(std::istream& in) {
  Dataset d;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    FaceRecord r;
    try {
      r = parse_record(json::parse(line));
    } catch (const std::exception& e) {
      throw std::runtime_error("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(r.face_id).second) {
      throw std::runtime_error("manifest line " + std::to_string(line_no) + ": duplicate face_id '" +
                               r.face_id + "'");
    }
    d.records.push_back(std::move(r));
  }
  return d;
}

Dataset read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  return read_manifest(in);
}

void write_manifest(const Dataset& dataset, std::ostream& out) {
  for (const auto& r : dataset.records) {
    ordered_json j;
    j["face_id"] = r.face_id;
    j["subject_id"] = r.subject_id;
    j["embedding_row"] = r.embedding_row;
    if (r.attributes) {
      ordered_json a;
      a["age"] = r.attributes->age;
      a["gender"] = to_string(r.attributes->gender);
      a["race"] = to_string(r.attributes->race);
      a["scenario"] = to_string(r.attributes->scenario);
      j["attributes"] = std::move(a);
    }
    out << j.dump() << '\n';
  }
}

void write_manifest(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_manifest(dataset, out);
}

}  // namespace castfruits
