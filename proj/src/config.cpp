#include "castfruits/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace castfruits {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const long long n = to_int(key, v);
  if (n < 0) throw std::invalid_argument(key + ": must be non-negative");
  return static_cast<std::size_t>(n);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

using Setter = std::function<void(ToolConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"cast.iterations", [](ToolConfig& c, auto& k, auto& v) { c.cast.iterations = static_cast<int>(to_int(k, v)); }},
      {"intra.eps", [](ToolConfig& c, auto& k, auto& v) { c.cast.intra.eps = to_double(k, v); }},
      {"intra.min_pts", [](ToolConfig& c, auto& k, auto& v) { c.cast.intra.min_pts = static_cast<int>(to_int(k, v)); }},
      {"intra.min_dominant_size",
       [](ToolConfig& c, auto& k, auto& v) { c.cast.intra.min_dominant_size = static_cast<int>(to_int(k, v)); }},
      {"inter.merge_threshold", [](ToolConfig& c, auto& k, auto& v) { c.cast.inter.merge_threshold = to_double(k, v); }},
      {"inter.delete_low", [](ToolConfig& c, auto& k, auto& v) { c.cast.inter.delete_low = to_double(k, v); }},
      {"inter.max_passes",
       [](ToolConfig& c, auto& k, auto& v) { c.cast.inter.max_passes = static_cast<int>(to_int(k, v)); }},
      {"post.duplicate_threshold",
       [](ToolConfig& c, auto& k, auto& v) { c.cast.post.duplicate_threshold = to_double(k, v); }},
      {"post.overlap_threshold", [](ToolConfig& c, auto& k, auto& v) { c.cast.post.overlap_threshold = to_double(k, v); }},
      {"post.min_faces_per_identity",
       [](ToolConfig& c, auto& k, auto& v) { c.cast.post.min_faces_per_identity = static_cast<int>(to_int(k, v)); }},
      {"hist.bins", [](ToolConfig& c, auto& k, auto& v) { c.cast.histogram_bins = to_count(k, v); }},
      {"hist.sample", [](ToolConfig& c, auto& k, auto& v) { c.cast.histogram_sample = to_count(k, v); }},
      {"embedder.alpha0", [](ToolConfig& c, auto& k, auto& v) { c.alpha0 = to_double(k, v); }},
      {"synth.identity_count", [](ToolConfig& c, auto& k, auto& v) { c.synth.identity_count = to_count(k, v); }},
      {"synth.faces_min", [](ToolConfig& c, auto& k, auto& v) { c.synth.faces_min = to_count(k, v); }},
      {"synth.faces_max", [](ToolConfig& c, auto& k, auto& v) { c.synth.faces_max = to_count(k, v); }},
      {"synth.dimension", [](ToolConfig& c, auto& k, auto& v) { c.synth.dimension = to_count(k, v); }},
      {"synth.cluster_concentration",
       [](ToolConfig& c, auto& k, auto& v) { c.synth.cluster_concentration = to_double(k, v); }},
      {"synth.outlier_rate", [](ToolConfig& c, auto& k, auto& v) { c.synth.outlier_rate = to_double(k, v); }},
      {"synth.distractor_fraction",
       [](ToolConfig& c, auto& k, auto& v) { c.synth.distractor_fraction = to_double(k, v); }},
      {"synth.overlap_rate", [](ToolConfig& c, auto& k, auto& v) { c.synth.overlap_rate = to_double(k, v); }},
      {"synth.duplicate_rate", [](ToolConfig& c, auto& k, auto& v) { c.synth.duplicate_rate = to_double(k, v); }},
      {"synth.nuisance_scale", [](ToolConfig& c, auto& k, auto& v) { c.synth.nuisance_scale = to_double(k, v); }},
      {"synth.nuisance_tail", [](ToolConfig& c, auto& k, auto& v) { c.synth.nuisance_tail = to_double(k, v); }},
      {"eval.fmr_targets",
       [](ToolConfig& c, auto& k, auto& v) {
         c.eval.fmr_targets.clear();
         for (const auto& item : split_list(v)) c.eval.fmr_targets.push_back(to_double(k, item));
       }},
      {"eval.slices",
       [](ToolConfig& c, auto&, auto& v) {
         c.slices.clear();
         for (const auto& item : split_list(v)) c.slices.push_back(PairSpec::parse(item));
       }},
      {"eval.impostor_sample_rate",
       [](ToolConfig& c, auto& k, auto& v) { c.eval.impostor_sample_rate = to_double(k, v); }},
      {"bench.repetitions", [](ToolConfig& c, auto& k, auto& v) { c.bench_repetitions = static_cast<int>(to_int(k, v)); }},
      {"bench.warmup", [](ToolConfig& c, auto& k, auto& v) { c.bench_warmup = static_cast<int>(to_int(k, v)); }},
  };
  return table;
}

}  // namespace

void ToolConfig::set_seed(std::uint64_t seed) {
  cast.seed = seed;
  synth.seed = seed;
  eval.seed = seed;
}

void ToolConfig::set(const std::string& key, const std::string& value) {
  if (key == "seed") {
    const long long s = to_int(key, value);
    if (s < 0) throw std::invalid_argument("seed must be non-negative");
    set_seed(static_cast<std::uint64_t>(s));
    return;
  }
  auto it = setters().find(key);
  if (it == setters().end()) throw std::invalid_argument("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

void ToolConfig::load(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void ToolConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  load(in);
}

const std::vector<std::string>& ToolConfig::keys() {
  static const std::vector<std::string> all = [] {
    std::vector<std::string> k{"seed"};
    for (const auto& [name, fn] : setters()) k.push_back(name);
    return k;
  }();
  return all;
}

}  // namespace castfruits
