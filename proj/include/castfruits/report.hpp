#pragma once
// Machine-readable JSON views of pipeline and evaluation results.

#include "castfruits/cast.hpp"
#include "castfruits/fruits.hpp"
#include "castfruits/synth.hpp"
#include "json.hpp"

namespace castfruits {

using Json = nlohmann::ordered_json;

// "1e-05" style key for an FMR target.
std::string target_key(double target);

Json to_json(const StageStats& s);
Json stage_table_json(const std::vector<StageStats>& stages);
Json to_json(const SimilarityHistograms& h);
Json to_json(const CleaningScores& s);
Json to_json(const InterAction& a);
Json to_json(const SliceResult& s);
Json to_json(const VerificationReport& r);
Json to_json(const PipelineTiming& t, const TrackBudget& budget);

}  // namespace castfruits
