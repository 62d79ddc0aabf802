#include "castfruits/fruits.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <unordered_set>

#ifdef __linux__
#include <sched.h>
#endif

namespace castfruits {

std::vector<TestFace> test_faces_from(const Dataset& dataset) {
  std::vector<TestFace> out;
  out.reserve(dataset.records.size());
  for (const auto& r : dataset.records) {
    if (!r.attributes) throw std::invalid_argument("face '" + r.face_id + "' has no attributes");
    out.push_back({r.face_id, r.subject_id, *r.attributes});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Slices

std::string PairSpec::name() const {
  switch (kind) {
    case SliceKind::All: return "All";
    case SliceKind::CrossAge: return "CrossAge" + std::to_string(min_age_gap);
    case SliceKind::Race: return "Race:" + std::string(to_string(race));
    case SliceKind::Gender: return "Gender:" + std::string(to_string(gender));
    case SliceKind::Controlled: return "Controlled";
    case SliceKind::Wild: return "Wild";
    case SliceKind::CrossScene: return "CrossScene";
  }
  return "?";
}

PairSpec PairSpec::parse(const std::string& name) {
  if (name == "All") return all();
  if (name == "Controlled") return controlled();
  if (name == "Wild") return wild();
  if (name == "CrossScene") return cross_scene();
  if (name.rfind("CrossAge", 0) == 0) {
    const int gap = std::stoi(name.substr(8));
    if (gap < 0) throw std::invalid_argument("negative age gap in slice '" + name + "'");
    return cross_age(gap);
  }
  if (name.rfind("Race:", 0) == 0) return of_race(parse_race(name.substr(5)));
  if (name.rfind("Gender:", 0) == 0) return of_gender(parse_gender(name.substr(7)));
  throw std::invalid_argument("unknown slice '" + name + "'");
}

std::vector<PairSpec> PairSpec::standard() {
  return {all(),
          cross_age(10),
          cross_age(20),
          of_race(Race::Caucasian),
          of_race(Race::EastAsian),
          of_race(Race::African),
          of_race(Race::Others),
          of_gender(Gender::Male),
          of_gender(Gender::Female),
          controlled(),
          wild(),
          cross_scene()};
}

std::uint64_t choose2(std::uint64_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

std::uint64_t all_slice_impostors(std::uint64_t faces, std::uint64_t genuine) {
  const std::uint64_t total = choose2(faces);
  if (genuine > total) throw std::invalid_argument("genuine count exceeds C(faces, 2)");
  return total - genuine;
}

namespace {

void validate_face(const TestFace& f) {
  const auto& a = f.attributes;
  const bool ok = a.age >= 0 && (a.gender == Gender::Male || a.gender == Gender::Female) &&
                  static_cast<int>(a.race) >= 0 && static_cast<int>(a.race) <= static_cast<int>(Race::Others) &&
                  (a.scenario == Scenario::Controlled || a.scenario == Scenario::Wild);
  if (!ok) throw std::invalid_argument("face '" + f.face_id + "' has an invalid attribute value");
}

bool in_slice(const TestFace& f, const PairSpec& spec) {
  switch (spec.kind) {
    case SliceKind::Race: return f.attributes.race == spec.race;
    case SliceKind::Gender: return f.attributes.gender == spec.gender;
    case SliceKind::Controlled: return f.attributes.scenario == Scenario::Controlled;
    case SliceKind::Wild: return f.attributes.scenario == Scenario::Wild;
    default: return true;
  }
}

bool pair_in_slice(const TestFace& a, const TestFace& b, const PairSpec& spec) {
  switch (spec.kind) {
    case SliceKind::CrossAge: return std::abs(a.attributes.age - b.attributes.age) >= spec.min_age_gap;
    case SliceKind::CrossScene: return a.attributes.scenario != b.attributes.scenario;
    default: return true;
  }
}

std::vector<const TestFace*> sliced(std::span<const TestFace> faces, const PairSpec& spec) {
  std::unordered_set<std::string_view> ids;
  std::vector<const TestFace*> out;
  for (const auto& f : faces) {
    validate_face(f);
    if (!ids.insert(f.face_id).second) throw std::invalid_argument("duplicate face_id '" + f.face_id + "'");
    if (in_slice(f, spec)) out.push_back(&f);
  }
  std::sort(out.begin(), out.end(), [](const TestFace* a, const TestFace* b) { return a->face_id < b->face_id; });
  return out;
}

// Pairs with |age_a - age_b| >= gap among `ages`.
std::uint64_t age_gap_pairs(std::vector<int> ages, int gap) {
  std::sort(ages.begin(), ages.end());
  std::uint64_t pairs = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < ages.size(); ++i) {
    // j: first index with ages[j] > ages[i] - gap; everything before pairs with i.
    while (j < i && ages[j] <= ages[i] - gap) ++j;
    pairs += (gap <= 0) ? i : j;
  }
  return pairs;
}

}  // namespace

PairCounts enumerate_pairs(std::span<const TestFace> faces, const PairSpec& spec, const PairVisitor& visit) {
  const auto members = sliced(faces, spec);
  PairCounts counts;
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (std::size_t j = i + 1; j < members.size(); ++j) {
      const TestFace& a = *members[i];
      const TestFace& b = *members[j];
      if (!pair_in_slice(a, b, spec)) continue;
      const bool genuine = a.identity_id == b.identity_id;
      ++(genuine ? counts.genuine : counts.impostor);
      if (visit) visit(a, b, genuine);
    }
  }
  return counts;
}

PairCounts count_pairs(std::span<const TestFace> faces, const PairSpec& spec) {
  const auto members = sliced(faces, spec);
  std::map<std::string_view, std::vector<const TestFace*>> by_identity;
  for (const auto* f : members) by_identity[f->identity_id].push_back(f);

  std::uint64_t total = 0, genuine = 0;
  if (spec.kind == SliceKind::CrossScene) {
    std::uint64_t controlled = 0;
    for (const auto* f : members) controlled += f->attributes.scenario == Scenario::Controlled;
    total = controlled * (members.size() - controlled);
    for (const auto& [id, group] : by_identity) {
      std::uint64_t c = 0;
      for (const auto* f : group) c += f->attributes.scenario == Scenario::Controlled;
      genuine += c * (group.size() - c);
    }
  } else if (spec.kind == SliceKind::CrossAge) {
    const auto ages_of = [](const std::vector<const TestFace*>& fs) {
      std::vector<int> ages;
      for (const auto* f : fs) ages.push_back(f->attributes.age);
      return ages;
    };
    total = age_gap_pairs(ages_of(members), spec.min_age_gap);
    for (const auto& [id, group] : by_identity) genuine += age_gap_pairs(ages_of(group), spec.min_age_gap);
  } else {
    total = choose2(members.size());
    for (const auto& [id, group] : by_identity) genuine += choose2(group.size());
  }
  return {genuine, total - genuine};
}

// ---------------------------------------------------------------------------
// Metrics

double fmr(std::span<const double> impostor, double threshold) {
  if (impostor.empty()) throw std::invalid_argument("fmr: empty impostor scores");
  const auto hits = std::count_if(impostor.begin(), impostor.end(), [&](double s) { return s >= threshold; });
  return static_cast<double>(hits) / static_cast<double>(impostor.size());
}

double fnmr(std::span<const double> genuine, double threshold) {
  if (genuine.empty()) throw std::invalid_argument("fnmr: empty genuine scores");
  const auto misses = std::count_if(genuine.begin(), genuine.end(), [&](double s) { return s < threshold; });
  return static_cast<double>(misses) / static_cast<double>(genuine.size());
}

OperatingPoint fnmr_at_fmr(const ScoreSet& scores, double target_fmr) {
  if (!(target_fmr > 0.0 && target_fmr <= 1.0)) throw std::invalid_argument("target FMR must lie in (0, 1]");
  if (scores.genuine.empty() || scores.impostor.empty()) throw std::invalid_argument("fnmr_at_fmr: empty score list");
  for (double s : scores.genuine) {
    if (!std::isfinite(s)) throw std::invalid_argument("non-finite genuine score");
  }
  for (double s : scores.impostor) {
    if (!std::isfinite(s)) throw std::invalid_argument("non-finite impostor score");
  }

  std::vector<double> impostor = scores.impostor;
  std::vector<double> genuine = scores.genuine;
  std::sort(impostor.begin(), impostor.end());
  std::sort(genuine.begin(), genuine.end());
  std::vector<double> candidates;
  candidates.reserve(impostor.size() + genuine.size() + 1);
  std::merge(impostor.begin(), impostor.end(), genuine.begin(), genuine.end(), std::back_inserter(candidates));
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  candidates.push_back(std::numeric_limits<double>::infinity());

  const double n_imp = static_cast<double>(impostor.size());
  const double n_gen = static_cast<double>(genuine.size());
  // FMR is non-increasing in the threshold: binary search the first passing candidate.
  const auto rate_at = [&](double t) {
    const auto above = impostor.end() - std::lower_bound(impostor.begin(), impostor.end(), t);
    return static_cast<double>(above) / n_imp;
  };
  const auto it = std::partition_point(candidates.begin(), candidates.end(),
                                       [&](double t) { return rate_at(t) > target_fmr; });
  OperatingPoint p;
  p.threshold = *it;
  p.fmr = rate_at(p.threshold);
  const auto below = std::lower_bound(genuine.begin(), genuine.end(), p.threshold) - genuine.begin();
  p.fnmr = static_cast<double>(below) / n_gen;
  return p;
}

// ---------------------------------------------------------------------------
// Report

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Keeps an impostor pair with probability `rate`, decided by a hash of the
// seed and both ids so the decision is independent of enumeration order.
bool keep_impostor(const TestFace& a, const TestFace& b, double rate, std::uint64_t seed) {
  const std::uint64_t h = splitmix64(splitmix64(splitmix64(seed) ^ fnv1a(a.face_id)) ^ fnv1a(b.face_id));
  return static_cast<double>(h >> 11) * 0x1.0p-53 < rate;
}

}  // namespace

VerificationReport verify_report(const std::string& model, const Matcher& matcher, std::span<const TestFace> faces,
                                 std::span<const PairSpec> specs, const VerifyOptions& options) {
  for (double t : options.fmr_targets) {
    if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("FMR targets must lie in (0, 1]");
  }
  if (options.impostor_sample_rate && !(*options.impostor_sample_rate > 0.0 && *options.impostor_sample_rate <= 1.0)) {
    throw std::invalid_argument("impostor sample rate must lie in (0, 1]");
  }
  VerificationReport report;
  report.model = model;
  for (const auto& spec : specs) {
    SliceResult slice;
    slice.spec = spec;
    slice.subsampled = options.impostor_sample_rate.has_value();
    slice.targets = options.fmr_targets;
    ScoreSet scores;
    slice.counts = enumerate_pairs(faces, spec, [&](const TestFace& a, const TestFace& b, bool genuine) {
      if (!genuine && options.impostor_sample_rate && !keep_impostor(a, b, *options.impostor_sample_rate, options.seed)) {
        return;
      }
      double s = 0.0;
      try {
        s = matcher(a, b);
      } catch (const std::exception& e) {
        throw std::runtime_error("matcher failed on pair (" + a.face_id + ", " + b.face_id + "): " + e.what());
      }
      if (!std::isfinite(s)) {
        throw std::runtime_error("matcher returned a non-finite score on pair (" + a.face_id + ", " + b.face_id + ")");
      }
      (genuine ? scores.genuine : scores.impostor).push_back(s);
    });
    slice.scored_impostors = scores.impostor.size();
    const bool scorable = !scores.genuine.empty() && !scores.impostor.empty();
    for (double t : options.fmr_targets) {
      slice.at.push_back(scorable ? std::optional(fnmr_at_fmr(scores, t)) : std::nullopt);
    }
    if (scorable) {
      for (int k = 0; k <= 12; ++k) {
        const auto p = fnmr_at_fmr(scores, std::pow(10.0, -k / 2.0));
        slice.curve_fmr.push_back(p.fmr);
        slice.curve_fnmr.push_back(p.fnmr);
      }
    }
    report.slices.push_back(std::move(slice));
  }
  return report;
}

std::vector<std::vector<std::vector<double>>> normalized_fnmr(std::span<const VerificationReport> models) {
  std::vector<std::vector<std::vector<double>>> out(models.size());
  if (models.empty()) return out;
  const std::size_t n_slices = models.front().slices.size();
  for (const auto& m : models) {
    if (m.slices.size() != n_slices) throw std::invalid_argument("normalized_fnmr: models report different slices");
  }
  for (auto& m : out) m.resize(n_slices);
  for (std::size_t s = 0; s < n_slices; ++s) {
    const std::size_t n_targets = models.front().slices[s].at.size();
    for (std::size_t t = 0; t < n_targets; ++t) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& m : models) {
        if (m.slices[s].at.at(t)) best = std::min(best, m.slices[s].at[t]->fnmr);
      }
      for (std::size_t k = 0; k < models.size(); ++k) {
        const auto& p = models[k].slices[s].at[t];
        double v = 0.5;
        if (p) v = p->fnmr == 0.0 ? 1.0 : std::clamp(0.5 + 0.5 * best / p->fnmr, 0.5, 1.0);
        out[k][s].push_back(v);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Time budget

std::string_view to_string(Track t) {
  switch (t) {
    case Track::Fruits100: return "FRUITS-100";
    case Track::Fruits500: return "FRUITS-500";
    case Track::Fruits1000: return "FRUITS-1000";
    case Track::OverBudget: return "OverBudget";
  }
  return "?";
}

TrackBudget classify_track(double measured_ms) {
  if (!(measured_ms >= 0.0)) throw std::invalid_argument("measured time must be non-negative");
  if (measured_ms <= 100.0) return {Track::Fruits100, 100.0};
  if (measured_ms <= 500.0) return {Track::Fruits500, 500.0};
  if (measured_ms <= 1000.0) return {Track::Fruits1000, 1000.0};
  return {Track::OverBudget, std::nullopt};
}

namespace {

class CpuPin {
 public:
  CpuPin() {
#ifdef __linux__
    if (sched_getaffinity(0, sizeof(saved_), &saved_) != 0) return;
    for (int cpu = 0; cpu < CPU_SETSIZE; ++cpu) {
      if (!CPU_ISSET(cpu, &saved_)) continue;
      cpu_set_t one;
      CPU_ZERO(&one);
      CPU_SET(cpu, &one);
      pinned_ = sched_setaffinity(0, sizeof(one), &one) == 0;
      break;
    }
#endif
  }
  ~CpuPin() {
#ifdef __linux__
    if (pinned_) sched_setaffinity(0, sizeof(saved_), &saved_);
#endif
  }
  CpuPin(const CpuPin&) = delete;
  CpuPin& operator=(const CpuPin&) = delete;

  bool pinned() const { return pinned_; }

 private:
  bool pinned_ = false;
#ifdef __linux__
  cpu_set_t saved_{};
#endif
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

PipelineTiming measure_pipeline(std::span<const PipelineStage> stages, int repetitions, int warmup) {
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (warmup < 0) throw std::invalid_argument("warmup must be >= 0");
  const CpuPin pin;
  PipelineTiming timing;
  timing.repetitions = repetitions;
  timing.warmup = warmup;
  timing.single_core_pinned = pin.pinned();
  using clock = std::chrono::steady_clock;
  for (const auto& stage : stages) {
    StageTiming st{stage.name, 0.0, {}};
    try {
      for (int w = 0; w < warmup; ++w) stage.run();
      for (int r = 0; r < repetitions; ++r) {
        const auto t0 = clock::now();
        stage.run();
        const auto t1 = clock::now();
        st.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("stage '" + stage.name + "' failed: " + e.what());
    }
    st.median_ms = median(st.samples_ms);
    timing.total_ms += st.median_ms;
    timing.stages.push_back(std::move(st));
  }
  return timing;
}

}  // namespace castfruits
