#pragma once
// Time-constrained 1:1 verification protocol: attribute-sliced pair
// enumeration, FNMR@FMR, and latency-track classification.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "castfruits/dataset.hpp"

namespace castfruits {

struct TestFace {
  std::string face_id;
  std::string identity_id;
  FaceAttributes attributes;
};

// Builds test faces from manifest records; identity_id is the subject_id.
// Throws naming the face_id when a record has no attributes.
std::vector<TestFace> test_faces_from(const Dataset& dataset);

enum class SliceKind { All, CrossAge, Race, Gender, Controlled, Wild, CrossScene };

struct PairSpec {
  SliceKind kind = SliceKind::All;
  int min_age_gap = 0;  // CrossAge: pairs need |age_a - age_b| >= min_age_gap
  Race race = Race::Caucasian;
  Gender gender = Gender::Male;

  static PairSpec all() { return {}; }
  static PairSpec cross_age(int gap) { return {SliceKind::CrossAge, gap, {}, {}}; }
  static PairSpec of_race(Race r) { return {SliceKind::Race, 0, r, {}}; }
  static PairSpec of_gender(Gender g) { return {SliceKind::Gender, 0, {}, g}; }
  static PairSpec controlled() { return {SliceKind::Controlled, 0, {}, {}}; }
  static PairSpec wild() { return {SliceKind::Wild, 0, {}, {}}; }
  static PairSpec cross_scene() { return {SliceKind::CrossScene, 0, {}, {}}; }

  // "All", "CrossAge10", "Race:EastAsian", "Gender:Female", "Controlled", "Wild", "CrossScene"
  std::string name() const;
  static PairSpec parse(const std::string& name);

  // Every slice of the published test-set table.
  static std::vector<PairSpec> standard();

  bool operator==(const PairSpec&) const = default;
};

struct PairCounts {
  std::uint64_t genuine = 0;
  std::uint64_t impostor = 0;

  bool operator==(const PairCounts&) const = default;
};

// n choose 2
std::uint64_t choose2(std::uint64_t n);

// Impostor count of the All slice from its face and genuine counts.
std::uint64_t all_slice_impostors(std::uint64_t faces, std::uint64_t genuine);

using PairVisitor = std::function<void(const TestFace&, const TestFace&, bool genuine)>;

// Streams every unordered pair of the slice in face_id order (a < b).
// Throws naming the face_id on invalid attributes or duplicate ids.
PairCounts enumerate_pairs(std::span<const TestFace> faces, const PairSpec& spec, const PairVisitor& visit);

// Same counts as enumerate_pairs without materializing pairs.
PairCounts count_pairs(std::span<const TestFace> faces, const PairSpec& spec);

struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

// |{s >= t}| / |impostor|
double fmr(std::span<const double> impostor, double threshold);
// |{s < t}| / |genuine|
double fnmr(std::span<const double> genuine, double threshold);

struct OperatingPoint {
  double threshold = 0.0;  // +inf when only the sentinel satisfies the target
  double fmr = 0.0;
  double fnmr = 0.0;
};

// Smallest candidate threshold (distinct observed scores, then +inf) whose
// FMR does not exceed target_fmr, with FNMR at it. target_fmr in (0, 1].
OperatingPoint fnmr_at_fmr(const ScoreSet& scores, double target_fmr);

using Matcher = std::function<double(const TestFace&, const TestFace&)>;

struct VerifyOptions {
  std::vector<double> fmr_targets{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  std::optional<double> impostor_sample_rate;  // keep each impostor with this probability
  std::uint64_t seed = 0;
};

struct SliceResult {
  PairSpec spec;
  PairCounts counts;              // full slice counts
  std::uint64_t scored_impostors = 0;
  bool subsampled = false;
  std::vector<double> targets;
  std::vector<std::optional<OperatingPoint>> at;  // nullopt when a score list is empty
  std::vector<double> curve_fmr;
  std::vector<double> curve_fnmr;
};

struct VerificationReport {
  std::string model;
  std::vector<SliceResult> slices;
};

VerificationReport verify_report(const std::string& model, const Matcher& matcher, std::span<const TestFace> faces,
                                 std::span<const PairSpec> specs, const VerifyOptions& options = {});

// For each model, slice and target: 0.5 + 0.5 * best_fnmr / this_fnmr over
// the compared models, clamped to [0.5, 1]; a zero FNMR scores 1.
std::vector<std::vector<std::vector<double>>> normalized_fnmr(std::span<const VerificationReport> models);

enum class Track { Fruits100, Fruits500, Fruits1000, OverBudget };

struct TrackBudget {
  Track track = Track::OverBudget;
  std::optional<double> limit_ms;
};

std::string_view to_string(Track t);

// <=100 ms, <=500 ms, <=1000 ms, otherwise over budget. Throws on negative.
TrackBudget classify_track(double measured_ms);

struct PipelineStage {
  std::string name;
  std::function<void()> run;
};

struct StageTiming {
  std::string name;
  double median_ms = 0.0;
  std::vector<double> samples_ms;
};

struct PipelineTiming {
  std::vector<StageTiming> stages;
  double total_ms = 0.0;  // sum of stage medians
  int repetitions = 0;
  int warmup = 0;
  bool single_core_pinned = false;
};

// Runs on the calling thread, pinned to one CPU when the platform allows.
// Each stage gets `warmup` discarded runs then `repetitions` timed runs.
PipelineTiming measure_pipeline(std::span<const PipelineStage> stages, int repetitions, int warmup = 3);

}  // namespace castfruits
