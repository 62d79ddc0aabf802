#include "castfruits/inter_clean.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "castfruits/parallel.hpp"
#include "json.hpp"

namespace castfruits {

void InterCleanConfig::validate() const {
  if (!(delete_low > 0.0 && delete_low < merge_threshold && merge_threshold < 1.0)) {
    throw std::invalid_argument("inter thresholds must satisfy 0 < delete_low < merge_threshold < 1");
  }
  if (max_passes < 1) throw std::invalid_argument("inter.max_passes must be >= 1");
}

std::string_view to_string(ActionKind k) { return k == ActionKind::Merge ? "MERGE" : "DELETE"; }

std::vector<CentroidPair> pairwise_centroid_scan(const std::vector<FolderCentroid>& centroids,
                                                 double min_similarity) {
  const std::size_t n = centroids.size();
  std::vector<std::vector<CentroidPair>> rows(n);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Similarity s = cosine(centroids[i].centroid, centroids[j].centroid);
      if (s.value() < min_similarity) continue;
      const bool i_first = centroids[i].subject_id <= centroids[j].subject_id;
      rows[i].push_back({i_first ? i : j, i_first ? j : i, s});
    }
  });
  std::vector<CentroidPair> out;
  for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  std::sort(out.begin(), out.end(), [&](const CentroidPair& a, const CentroidPair& b) {
    if (a.similarity.value() != b.similarity.value()) return a.similarity.value() > b.similarity.value();
    const auto& af = centroids[a.first].subject_id;
    const auto& bf = centroids[b.first].subject_id;
    if (af != bf) return af < bf;
    return centroids[a.second].subject_id < centroids[b.second].subject_id;
  });
  return out;
}

Embedding folder_centroid(const Folder& folder, const Dataset& dataset, const EmbeddingMatrix& embeddings) {
  std::vector<std::size_t> order = folder.faces;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dataset.records[a].face_id < dataset.records[b].face_id;
  });
  std::vector<std::size_t> rows;
  rows.reserve(order.size());
  for (std::size_t idx : order) rows.push_back(dataset.records.at(idx).embedding_row);
  return centroid(embeddings, rows);
}

InterCleanResult resolve_folders(const std::vector<Folder>& folders, const Dataset& dataset,
                                 const EmbeddingMatrix& embeddings, const InterCleanConfig& config) {
  config.validate();
  InterCleanResult result;
  const std::size_t n = folders.size();
  if (n == 0) {
    result.converged = true;
    return result;
  }
  {
    std::unordered_map<std::string_view, int> seen;
    for (const auto& f : folders) {
      if (f.faces.empty()) throw std::invalid_argument("resolve_folders: folder " + f.subject_id + " is empty");
      if (seen[f.subject_id]++) throw std::invalid_argument("resolve_folders: duplicate subject " + f.subject_id);
    }
  }

  std::vector<Folder> work = folders;
  std::vector<bool> alive(n, true);
  std::vector<Embedding> centers(n);
  parallel_for(n, [&](std::size_t i) { centers[i] = folder_centroid(work[i], dataset, embeddings); });

  for (int pass = 1; pass <= config.max_passes; ++pass) {
    std::vector<std::size_t> live;
    std::vector<FolderCentroid> snapshot;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      live.push_back(i);
      snapshot.push_back({work[i].subject_id, centers[i]});
    }
    const auto pairs = pairwise_centroid_scan(snapshot, config.delete_low);

    std::vector<bool> merged(n, false);
    std::size_t actions = 0;
    for (const auto& p : pairs) {
      const std::size_t a = live[p.first];
      const std::size_t b = live[p.second];
      if (!alive[a] || !alive[b] || merged[a] || merged[b]) continue;

      const auto larger_first = [&](std::size_t x, std::size_t y) {
        if (work[x].faces.size() != work[y].faces.size()) return work[x].faces.size() > work[y].faces.size();
        return work[x].subject_id < work[y].subject_id;
      };
      const std::size_t keep = larger_first(a, b) ? a : b;
      const std::size_t drop = keep == a ? b : a;

      if (p.similarity.value() > config.merge_threshold) {
        auto& dst = work[keep].faces;
        dst.insert(dst.end(), work[drop].faces.begin(), work[drop].faces.end());
        merged[keep] = true;
        result.log.push_back({ActionKind::Merge, work[keep].subject_id, work[drop].subject_id, p.similarity});
      } else {
        result.log.push_back({ActionKind::Delete, work[keep].subject_id, work[drop].subject_id, p.similarity});
      }
      alive[drop] = false;
      ++actions;
    }
    result.passes = pass;
    if (actions == 0) {
      result.converged = true;
      break;
    }
    std::vector<std::size_t> dirty;
    for (std::size_t i = 0; i < n; ++i) {
      if (merged[i]) dirty.push_back(i);
    }
    parallel_for(dirty.size(), [&](std::size_t k) {
      centers[dirty[k]] = folder_centroid(work[dirty[k]], dataset, embeddings);
    });
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (alive[i]) result.folders.push_back(std::move(work[i]));
  }
  return result;
}

std::vector<Folder> replay_actions(const std::vector<Folder>& folders, const std::vector<InterAction>& log) {
  std::vector<Folder> work = folders;
  std::vector<bool> alive(work.size(), true);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < work.size(); ++i) index.emplace(work[i].subject_id, i);
  const auto lookup = [&](const std::string& id) {
    auto it = index.find(id);
    if (it == index.end() || !alive[it->second]) throw std::invalid_argument("replay: unknown or removed subject " + id);
    return it->second;
  };
  for (const auto& a : log) {
    const std::size_t s = lookup(a.survivor);
    const std::size_t v = lookup(a.victim);
    if (s == v) throw std::invalid_argument("replay: survivor equals victim");
    if (a.kind == ActionKind::Merge) {
      work[s].faces.insert(work[s].faces.end(), work[v].faces.begin(), work[v].faces.end());
    }
    alive[v] = false;
  }
  std::vector<Folder> out;
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (alive[i]) out.push_back(std::move(work[i]));
  }
  return out;
}

void write_action_log(const std::vector<InterAction>& log, std::ostream& out) {
  for (const auto& a : log) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(a.kind);
    j["survivor"] = a.survivor;
    j["victim"] = a.victim;
    j["similarity"] = a.similarity.value();
    out << j.dump() << '\n';
  }
}

std::vector<InterAction> read_action_log(std::istream& in) {
  std::vector<InterAction> log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      InterAction a;
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "MERGE") {
        a.kind = ActionKind::Merge;
      } else if (kind == "DELETE") {
        a.kind = ActionKind::Delete;
      } else {
        throw std::invalid_argument("unknown kind '" + kind + "'");
      }
      a.survivor = j.at("survivor").get<std::string>();
      a.victim = j.at("victim").get<std::string>();
      a.similarity = Similarity(j.at("similarity").get<double>());
      log.push_back(std::move(a));
    } catch (const std::exception& e) {
      throw std::runtime_error("action log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace castfruits
