// castfruits: synth | clean | eval | bench | stats
//
// Every command prints one JSON document. Artifact paths inside it are
// relative to --workdir, so a downstream command that gets no --manifest
// reads the upstream document from stdin:
//   castfruits synth --seed 7 | castfruits clean | castfruits stats

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "castfruits/cast.hpp"
#include "castfruits/config.hpp"
#include "castfruits/dataset.hpp"
#include "castfruits/embedding_io.hpp"
#include "castfruits/fruits.hpp"
#include "castfruits/inter_clean.hpp"
#include "castfruits/report.hpp"
#include "castfruits/synth.hpp"

namespace fs = std::filesystem;
using namespace castfruits;

namespace {

struct Common {
  std::string workdir = ".";
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct Inputs {
  std::string manifest;
  std::vector<std::string> embeddings;
  std::string truth;
  std::string report;
};

fs::path in_workdir(const Common& c, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : fs::path(c.workdir) / path;
}

ToolConfig build_config(const Common& c) {
  ToolConfig cfg;
  if (!c.config_path.empty()) cfg.load(in_workdir(c, c.config_path));
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.set_seed(*c.seed);
  return cfg;
}

// Fills unset inputs from an upstream document on stdin.
void inherit_from_stdin(Inputs& in) {
  if (!in.manifest.empty() || isatty(STDIN_FILENO)) return;
  std::stringstream buf;
  buf << std::cin.rdbuf();
  if (buf.str().find_first_not_of(" \t\r\n") == std::string::npos) return;
  Json up;
  try {
    up = Json::parse(buf.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stdin is not a castfruits document: ") + e.what());
  }
  const Json& a = up.contains("artifacts") ? up["artifacts"] : up;
  if (a.contains("manifest")) in.manifest = a["manifest"].get<std::string>();
  if (in.embeddings.empty() && a.contains("embeddings")) in.embeddings.push_back(a["embeddings"].get<std::string>());
  if (in.truth.empty() && a.contains("truth")) in.truth = a["truth"].get<std::string>();
  if (in.report.empty() && a.contains("report")) in.report = a["report"].get<std::string>();
}

void require_manifest(const Inputs& in) {
  if (in.manifest.empty()) throw std::invalid_argument("no --manifest given and no upstream document on stdin");
}

void emit(const Common& c, const Json& doc) {
  const std::string text = doc.dump(2) + "\n";
  if (c.out.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(in_workdir(c, c.out), std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + c.out);
  f << text;
}

void write_json_file(const fs::path& path, const Json& doc) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << doc.dump(2) << "\n";
}

std::vector<TestFace> load_test_faces(const Dataset& d) { return test_faces_from(d); }

std::vector<Embedding> subject_centroids(const Dataset& d, const EmbeddingMatrix& m) {
  check_embedding_rows(d, m.size());
  std::vector<Embedding> out;
  for (const auto& f : group_folders(d)) out.push_back(folder_centroid(f, d, m));
  return out;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::string prefix = "synth";
  std::optional<std::size_t> identities;
};

void cmd_synth(const Common& c, const SynthArgs& a) {
  auto cfg = build_config(c);
  if (a.identities) cfg.synth.identity_count = *a.identities;
  const auto world = generate(cfg.synth);
  fs::create_directories(c.workdir);
  const std::string manifest = a.prefix + "_manifest.jsonl";
  const std::string embeddings = a.prefix + "_embeddings.emb";
  const std::string truth = a.prefix + "_truth.json";
  write_manifest(world.manifest, in_workdir(c, manifest));
  write_embeddings(world.embeddings, in_workdir(c, embeddings));
  write_truth(world.truth, in_workdir(c, truth));

  Json doc;
  doc["command"] = "synth";
  doc["seed"] = cfg.synth.seed;
  doc["artifacts"] = {{"manifest", manifest}, {"embeddings", embeddings}, {"truth", truth}};
  doc["identities"] = world.manifest.identity_count();
  doc["faces"] = world.manifest.face_count();
  doc["dimension"] = world.embeddings.dimension();
  doc["planted_merge_pairs"] = world.truth.merge_pairs.size();
  doc["planted_duplicates"] = world.truth.duplicate_pairs.size();
  emit(c, doc);
}

// ---- clean ----------------------------------------------------------------

struct CleanArgs {
  Inputs in;
  std::string prefix = "clean";
  std::optional<int> iterations;
  std::string test_manifest;
  std::string test_embeddings;
};

void cmd_clean(const Common& c, CleanArgs a) {
  auto cfg = build_config(c);
  if (a.iterations) cfg.cast.iterations = *a.iterations;
  inherit_from_stdin(a.in);
  require_manifest(a.in);
  const Dataset raw = read_manifest(in_workdir(c, a.in.manifest));

  std::unique_ptr<Embedder> teacher;
  std::shared_ptr<const SynthDataset> world;
  if (!a.in.truth.empty()) {
    if (a.in.embeddings.size() != 1) throw std::invalid_argument("the reference embedder needs exactly one embedding file");
    auto w = std::make_shared<SynthDataset>();
    w->manifest = raw;
    w->embeddings = read_embeddings(in_workdir(c, a.in.embeddings.front()));
    w->truth = read_truth(in_workdir(c, a.in.truth));
    world = w;
    teacher = std::make_unique<ReferenceEmbedder>(world, cfg.alpha0);
  } else if (a.in.embeddings.size() == 1) {
    teacher = std::make_unique<FixedEmbedder>(
        std::make_shared<const EmbeddingMatrix>(read_embeddings(in_workdir(c, a.in.embeddings.front()))));
  } else if (!a.in.embeddings.empty()) {
    std::vector<fs::path> files;
    for (const auto& e : a.in.embeddings) files.push_back(in_workdir(c, e));
    teacher = std::make_unique<PrecomputedEmbedder>(files);
  } else {
    throw std::invalid_argument("clean needs --embeddings");
  }

  if (!a.test_manifest.empty()) {
    if (a.test_embeddings.empty()) throw std::invalid_argument("--test-manifest needs --test-embeddings");
    cfg.cast.test_centroids = subject_centroids(read_manifest(in_workdir(c, a.test_manifest)),
                                                read_embeddings(in_workdir(c, a.test_embeddings)));
  }

  const CastResult result = run_cast(raw, *teacher, cfg.cast);

  const std::string manifest = a.prefix + "_manifest.jsonl";
  const std::string embeddings = a.prefix + "_embeddings.emb";
  const std::string report = a.prefix + "_report.json";
  write_manifest(result.cleaned, in_workdir(c, manifest));
  write_embeddings(result.final_embedder->embed(result.cleaned), in_workdir(c, embeddings));

  Json iterations = Json::array();
  Json action_logs = Json::array();
  for (const auto& it : result.iterations) {
    const std::string log = a.prefix + "_actions_" + std::to_string(it.iteration) + ".jsonl";
    std::ofstream f(in_workdir(c, log), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + log);
    write_action_log(it.actions, f);
    action_logs.push_back(log);

    Json j;
    j["iteration"] = it.iteration;
    j["teacher"] = it.teacher;
    j["actions"] = it.actions.size();
    j["histogram_overlap"] = it.overlap;
    if (world) j["scores"] = to_json(score_cleaning(it.cleaned, world->truth));
    j["histograms"] = to_json(it.histograms);
    iterations.push_back(std::move(j));
  }

  const bool shape = stage_shape_valid(result.stages);
  Json rep;
  rep["stages"] = stage_table_json(result.stages);
  rep["shape_valid"] = shape;
  rep["raw_histogram_overlap"] = result.raw_overlap;
  rep["raw_histograms"] = to_json(result.raw_histograms);
  rep["iterations"] = std::move(iterations);
  if (world) rep["scores"] = to_json(score_cleaning(result.cleaned, world->truth));
  rep["final_embedder"] = result.final_embedder->description();
  write_json_file(in_workdir(c, report), rep);

  Json doc;
  doc["command"] = "clean";
  doc["artifacts"] = {{"manifest", manifest}, {"embeddings", embeddings}, {"report", report},
                      {"action_logs", action_logs}};
  doc["stages"] = rep["stages"];
  doc["shape_valid"] = shape;
  Json overlaps = Json::array();
  for (const auto& it : result.iterations) overlaps.push_back(it.overlap);
  doc["histogram_overlap"] = std::move(overlaps);
  if (world) doc["scores"] = rep["scores"];
  emit(c, doc);
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  Inputs in;
  std::string matcher = "cosine";
  std::string model;
};

void cmd_eval(const Common& c, EvalArgs a) {
  const auto cfg = build_config(c);
  inherit_from_stdin(a.in);
  require_manifest(a.in);
  const Dataset test = read_manifest(in_workdir(c, a.in.manifest));
  const auto faces = load_test_faces(test);

  Matcher matcher;
  std::shared_ptr<EmbeddingMatrix> features;
  std::unordered_map<std::string, std::uint64_t> row;
  if (a.matcher == "oracle") {
    matcher = [](const TestFace& x, const TestFace& y) { return x.identity_id == y.identity_id ? 1.0 : 0.0; };
  } else if (a.matcher == "cosine") {
    if (a.in.embeddings.size() != 1) throw std::invalid_argument("the cosine matcher needs exactly one embedding file");
    features = std::make_shared<EmbeddingMatrix>(read_embeddings(in_workdir(c, a.in.embeddings.front())));
    check_embedding_rows(test, features->size());
    for (const auto& r : test.records) row.emplace(r.face_id, r.embedding_row);
    matcher = [&](const TestFace& x, const TestFace& y) {
      return dot(features->row(row.at(x.face_id)), features->row(row.at(y.face_id)));
    };
  } else {
    throw std::invalid_argument("unknown matcher '" + a.matcher + "' (cosine | oracle)");
  }

  const auto report =
      verify_report(a.model.empty() ? a.matcher : a.model, matcher, faces, cfg.slices, cfg.eval);
  Json doc;
  doc["command"] = "eval";
  doc["matcher"] = a.matcher;
  doc["faces"] = faces.size();
  doc["identities"] = test.identity_count();
  doc["report"] = to_json(report);
  emit(c, doc);
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  Inputs in;
  std::vector<std::string> stubs;
  std::optional<int> repetitions;
  std::optional<int> warmup;
  std::size_t pairs = 1000;
};

void cmd_bench(const Common& c, BenchArgs a) {
  const auto cfg = build_config(c);
  std::vector<PipelineStage> stages;
  for (const auto& s : a.stubs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--stub expects name=ms, got '" + s + "'");
    double ms = 0.0;
    try {
      ms = std::stod(s.substr(eq + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("--stub expects name=ms, got '" + s + "'");
    }
    if (!(ms >= 0.0)) throw std::invalid_argument("--stub duration must be non-negative");
    const auto dur = std::chrono::duration<double, std::milli>(ms);
    stages.push_back({s.substr(0, eq), [dur] { std::this_thread::sleep_for(dur); }});
  }

  // Without stubs: time `pairs` cosine comparisons over the given features.
  std::shared_ptr<EmbeddingMatrix> features;
  if (stages.empty()) {
    if (a.in.embeddings.empty()) inherit_from_stdin(a.in);
    if (a.in.embeddings.size() != 1) throw std::invalid_argument("bench needs --stub or one --embeddings file");
    features = std::make_shared<EmbeddingMatrix>(read_embeddings(in_workdir(c, a.in.embeddings.front())));
    if (features->size() < 2) throw std::invalid_argument("bench needs at least two embeddings");
    const std::size_t n = features->size();
    const std::size_t pairs = a.pairs;
    stages.push_back({"match", [features, n, pairs] {
                        volatile double sink = 0.0;
                        for (std::size_t i = 0; i < pairs; ++i) {
                          sink = sink + dot(features->row(i % n), features->row((i * 7 + 1) % n));
                        }
                      }});
  }

  const auto timing =
      measure_pipeline(stages, a.repetitions.value_or(cfg.bench_repetitions), a.warmup.value_or(cfg.bench_warmup));
  Json doc;
  doc["command"] = "bench";
  doc["timing"] = to_json(timing, classify_track(timing.total_ms));
  emit(c, doc);
}

// ---- stats ----------------------------------------------------------------

void cmd_stats(const Common& c, Inputs in) {
  build_config(c);
  if (in.report.empty() && in.manifest.empty()) inherit_from_stdin(in);
  Json doc;
  doc["command"] = "stats";
  if (!in.report.empty()) {
    std::ifstream f(in_workdir(c, in.report));
    if (!f) throw std::runtime_error("cannot read " + in.report);
    const Json rep = Json::parse(f);
    std::vector<StageStats> stages;
    for (const auto& s : rep.at("stages")) {
      stages.push_back({s.at("stage").get<std::string>(), s.at("iteration").get<int>(),
                        s.at("identities").get<std::size_t>(), s.at("faces").get<std::size_t>()});
    }
    doc["stages"] = stage_table_json(stages);
    doc["shape_valid"] = stage_shape_valid(stages);
  } else {
    require_manifest(in);
    const Dataset d = read_manifest(in_workdir(c, in.manifest));
    const std::vector<StageStats> stages{{"raw", 0, d.identity_count(), d.face_count()}};
    doc["stages"] = stage_table_json(stages);
    doc["shape_valid"] = true;
  }
  emit(c, doc);
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--workdir", c.workdir, "Directory all relative paths resolve against");
  app->add_option("--config", c.config_path, "key = value configuration file");
  app->add_option("--set", c.overrides, "Override one config key (key=value), repeatable");
  app->add_option("--seed", c.seed, "Seed for every random component");
  app->add_option("--out", c.out, "Write the JSON result here instead of stdout");
}

void add_inputs(CLI::App* app, Inputs& in, bool embeddings = true) {
  app->add_option("--manifest", in.manifest, "Manifest (JSON lines)");
  if (embeddings) app->add_option("--embeddings", in.embeddings, "Embedding file(s)")->delimiter(',');
}

std::string one_line(std::string s) {
  for (auto& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAST dataset cleaning and FRUITS evaluation"};
  app.require_subcommand(1);

  Common common;
  SynthArgs synth_args;
  CleanArgs clean_args;
  EvalArgs eval_args;
  BenchArgs bench_args;
  Inputs stats_in;

  auto* synth = app.add_subcommand("synth", "Generate a labelled synthetic noisy dataset");
  add_common(synth, common);
  synth->add_option("--prefix", synth_args.prefix, "Artifact file prefix");
  synth->add_option("--identities", synth_args.identities, "Planted identities");

  auto* clean = app.add_subcommand("clean", "Run the iterative cleaning pipeline");
  add_common(clean, common);
  add_inputs(clean, clean_args.in);
  clean->add_option("--truth", clean_args.in.truth, "Synthetic ground truth (selects the reference embedder)");
  clean->add_option("--prefix", clean_args.prefix, "Artifact file prefix");
  clean->add_option("--iterations", clean_args.iterations, "Cleaning iterations");
  clean->add_option("--test-manifest", clean_args.test_manifest, "Benchmark identities to purge");
  clean->add_option("--test-embeddings", clean_args.test_embeddings, "Embeddings of --test-manifest");

  auto* eval = app.add_subcommand("eval", "Sliced 1:1 verification report");
  add_common(eval, common);
  add_inputs(eval, eval_args.in);
  eval->add_option("--matcher", eval_args.matcher, "cosine | oracle");
  eval->add_option("--model", eval_args.model, "Model name in the report");

  auto* bench = app.add_subcommand("bench", "Time a pipeline and classify its track");
  add_common(bench, common);
  add_inputs(bench, bench_args.in);
  bench->add_option("--stub", bench_args.stubs, "Stage that sleeps: name=ms, repeatable");
  bench->add_option("--repetitions", bench_args.repetitions, "Timed runs per stage");
  bench->add_option("--warmup", bench_args.warmup, "Discarded runs per stage");
  bench->add_option("--pairs", bench_args.pairs, "Comparisons per timed match run");

  auto* stats = app.add_subcommand("stats", "Per-stage identity and face counts");
  add_common(stats, common);
  add_inputs(stats, stats_in, false);
  stats->add_option("--report", stats_in.report, "Report written by clean");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "castfruits: " << one_line(e.what()) << "\n";
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*synth) cmd_synth(common, synth_args);
    else if (*clean) cmd_clean(common, clean_args);
    else if (*eval) cmd_eval(common, eval_args);
    else if (*bench) cmd_bench(common, bench_args);
    else if (*stats) cmd_stats(common, stats_in);
  } catch (const std::exception& e) {
    std::cerr << "castfruits: error: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
