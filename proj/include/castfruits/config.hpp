#pragma once
// Flat key = value configuration shared by every command. Lines starting
// with '#' are comments. Unknown keys are errors.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "castfruits/cast.hpp"
#include "castfruits/fruits.hpp"
#include "castfruits/synth.hpp"

namespace castfruits {

struct ToolConfig {
  CastConfig cast;
  SynthConfig synth;
  double alpha0 = 0.6;
  VerifyOptions eval;
  std::vector<PairSpec> slices = PairSpec::standard();
  int bench_repetitions = 5;
  int bench_warmup = 3;

  // Propagates the seed into every seeded component.
  void set_seed(std::uint64_t seed);
  void set(const std::string& key, const std::string& value);
  void load(std::istream& in);
  void load(const std::filesystem::path& path);

  static const std::vector<std::string>& keys();
};

}  // namespace castfruits
