#include "castfruits/report.hpp"

#include <cmath>
#include <cstdio>

namespace castfruits {

std::string target_key(double target) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", target);
  return buf;
}

Json to_json(const StageStats& s) {
  Json j;
  j["stage"] = s.stage;
  j["iteration"] = s.iteration;
  j["identities"] = s.identities;
  j["faces"] = s.faces;
  return j;
}

Json stage_table_json(const std::vector<StageStats>& stages) {
  Json rows = Json::array();
  for (const auto& s : stages) rows.push_back(to_json(s));
  return rows;
}

Json to_json(const SimilarityHistograms& h) {
  Json j;
  j["bin_edges"] = h.bin_edges();
  j["intra_counts"] = h.intra;
  j["inter_counts"] = h.inter;
  return j;
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

// JSON has no infinity; the sentinel threshold is written as a string.
Json threshold_json(double t) { return std::isfinite(t) ? Json(t) : Json("+inf"); }

}  // namespace

Json to_json(const CleaningScores& s) {
  Json j;
  j["purity"] = optional_number(s.purity);
  j["face_recall"] = optional_number(s.face_recall);
  j["merge_recall"] = optional_number(s.merge_recall);
  j["dup_removal_rate"] = optional_number(s.dup_removal_rate);
  return j;
}

Json to_json(const InterAction& a) {
  Json j;
  j["kind"] = to_string(a.kind);
  j["survivor"] = a.survivor;
  j["victim"] = a.victim;
  j["similarity"] = a.similarity.value();
  return j;
}

Json to_json(const SliceResult& s) {
  Json j;
  j["slice"] = s.spec.name();
  j["genuine_count"] = s.counts.genuine;
  j["impostor_count"] = s.counts.impostor;
  j["scored_impostors"] = s.scored_impostors;
  j["impostor_subsampled"] = s.subsampled;
  Json fnmr_at = Json::object();
  Json threshold = Json::object();
  Json achieved = Json::object();
  for (std::size_t k = 0; k < s.targets.size(); ++k) {
    const auto key = target_key(s.targets[k]);
    const auto& p = s.at[k];
    fnmr_at[key] = p ? Json(p->fnmr) : Json(nullptr);
    threshold[key] = p ? threshold_json(p->threshold) : Json(nullptr);
    achieved[key] = p ? Json(p->fmr) : Json(nullptr);
  }
  j["fnmr_at"] = std::move(fnmr_at);
  j["threshold"] = std::move(threshold);
  j["achieved_fmr"] = std::move(achieved);
  j["curve"] = {{"fmr", s.curve_fmr}, {"fnmr", s.curve_fnmr}};
  return j;
}

Json to_json(const VerificationReport& r) {
  Json j;
  j["model"] = r.model;
  Json slices = Json::array();
  for (const auto& s : r.slices) slices.push_back(to_json(s));
  j["slices"] = std::move(slices);
  return j;
}

Json to_json(const PipelineTiming& t, const TrackBudget& budget) {
  Json j;
  Json stages = Json::array();
  for (const auto& s : t.stages) {
    Json st;
    st["name"] = s.name;
    st["median_ms"] = s.median_ms;
    stages.push_back(std::move(st));
  }
  j["stages"] = std::move(stages);
  j["total_ms"] = t.total_ms;
  j["track"] = to_string(budget.track);
  j["limit_ms"] = budget.limit_ms ? Json(*budget.limit_ms) : Json(nullptr);
  j["repetitions"] = t.repetitions;
  j["warmup"] = t.warmup;
  j["single_core_pinned"] = t.single_core_pinned;
  return j;
}

}  // namespace castfruits
