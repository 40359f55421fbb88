// Command-line front door: reproducible runs over spaces, evaluators and
// rankers. Exit codes: 0 ok, 2 usage, 3 validation, 4 evaluator, 5 endpoint.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "lmsearch/errors.hpp"
#include "lmsearch/evaluators.hpp"
#include "lmsearch/rankers.hpp"
#include "lmsearch/report.hpp"
#include "lmsearch/search.hpp"
#include "lmsearch/space.hpp"
#include "lmsearch/trajectory.hpp"
#include "lmsearch/version.hpp"

namespace {

using namespace lmsearch;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitEvaluator = 4;
constexpr int kExitEndpoint = 5;

json load_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ValidationError(std::string("cannot open ") + what + ": " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& ex) {
    throw ValidationError(std::string(what) + " " + path + ": " + ex.what());
  }
  return doc;
}

void write_text_file(const std::string& path, const std::string& content) {
  if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open output file: " + path);
  out << content;
  if (!out) throw ValidationError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// ranker specs

struct RankerSpec {
  std::string kind = "random";
  int k = 5;
  LlmEndpointConfig endpoint;

  static RankerSpec from_json(const json& doc) {
    RankerSpec spec;
    spec.kind = doc.value("kind", "random");
    spec.k = doc.value("k", 5);
    if (doc.contains("endpoint")) {
      const json& ep = doc["endpoint"];
      spec.endpoint.base_url = ep.value("base_url", "");
      spec.endpoint.model_name = ep.value("model", "");
      spec.endpoint.temperature = ep.value("temperature", 0.0);
      spec.endpoint.max_retries = ep.value("max_retries", 3);
      spec.endpoint.timeout = std::chrono::milliseconds(
          static_cast<std::int64_t>(ep.value("timeout_sec", 30.0) * 1000.0));
      spec.endpoint.api_key_env = ep.value("api_key_env", "LM_SEARCHER_API_KEY");
      spec.endpoint.prompt_decimals = ep.value("prompt_decimals", 2);
    }
    if (spec.kind != "random" && spec.kind != "oracle" && spec.kind != "knn" &&
        spec.kind != "llm") {
      throw ValidationError("ranker spec: unknown kind '" + spec.kind + "'");
    }
    if (spec.kind == "llm" && spec.endpoint.base_url.empty()) {
      throw ValidationError("ranker spec: llm kind requires endpoint.base_url");
    }
    return spec;
  }

  ordered_json to_json() const {
    ordered_json doc;
    doc["kind"] = kind;
    if (kind == "knn") doc["k"] = k;
    if (kind == "llm") {
      ordered_json ep;
      ep["base_url"] = endpoint.base_url;
      ep["model"] = endpoint.model_name;
      ep["temperature"] = endpoint.temperature;
      ep["max_retries"] = endpoint.max_retries;
      ep["timeout_sec"] = endpoint.timeout.count() / 1000.0;
      ep["api_key_env"] = endpoint.api_key_env;
      ep["prompt_decimals"] = endpoint.prompt_decimals;
      doc["endpoint"] = std::move(ep);
    }
    return doc;
  }
};

NamedRanker build_ranker(const RankerSpec& spec, const Evaluator& evaluator) {
  if (spec.kind == "random") {
    return {"random", [](const std::vector<HistoryRecord>& history,
                         const std::vector<NCode>& candidates, Rng& rng) {
              return rank_random(history, candidates, rng);
            }};
  }
  if (spec.kind == "oracle") {
    Evaluator peek = evaluator.clone_fresh();
    return {"oracle", [peek](const std::vector<HistoryRecord>& history,
                             const std::vector<NCode>& candidates,
                             Rng& rng) mutable {
              return rank_oracle(history, candidates, peek, rng);
            }};
  }
  if (spec.kind == "knn") {
    const int k = spec.k;
    return {"knn", [k](const std::vector<HistoryRecord>& history,
                       const std::vector<NCode>& candidates, Rng& rng) {
              if (history.empty()) return rank_random(history, candidates, rng);
              return rank_knn_surrogate(history, candidates, k);
            }};
  }
  auto ranker = std::make_shared<LlmRanker>(spec.endpoint);  // fails fast
  return {"llm", [ranker](const std::vector<HistoryRecord>& history,
                          const std::vector<NCode>& candidates, Rng& rng) {
            return ranker->rank(history, candidates, rng);
          }};
}

// ---------------------------------------------------------------------------
// manifests

ordered_json make_manifest(const std::string& command, std::uint64_t seed,
                           const SearchSpace& space, const Evaluator* evaluator,
                           const RankerSpec* ranker, const ordered_json& params,
                           const std::string& out) {
  ordered_json manifest;
  manifest["toolkit_version"] = kVersion;
  manifest["command"] = command;
  manifest["seed"] = seed;
  manifest["space"] = space.to_json();
  if (evaluator != nullptr) manifest["evaluator"] = evaluator->spec_json();
  if (ranker != nullptr) manifest["ranker"] = ranker->to_json();
  manifest["params"] = params;
  manifest["out"] = out;
  return manifest;
}

/// Accepts a manifest file or a trace file with an embedded manifest.
/// Field order is preserved so reruns reproduce the embedded copy verbatim.
ordered_json load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest: " + path);
  ordered_json doc;
  try {
    in >> doc;
  } catch (const json::exception& ex) {
    throw ValidationError("manifest " + path + ": " + ex.what());
  }
  if (doc.contains("manifest")) doc = doc["manifest"];
  if (!doc.contains("command") || !doc.contains("space")) {
    throw ValidationError("manifest " + path + ": missing command/space fields");
  }
  return doc;
}

// ---------------------------------------------------------------------------
// command options

struct CommonInputs {
  std::string space_file;
  std::string evaluator_file;
  std::string config_file;
  std::string manifest_file;
};

struct GenDataOptions {
  CommonInputs in;
  std::uint64_t seed = 0;
  std::string out;
  std::optional<std::uint64_t> samples;
  std::optional<int> history_min, history_max, cand_min, cand_max, decimals;
};

struct SearchOptions {
  CommonInputs in;
  std::string ranker_file;
  std::uint64_t seed = 0;
  std::string out;
  std::optional<int> iters, candidates, init, history_window;
  std::optional<std::string> mode;
  bool shuffled = false;  // internal reuse by ablate-shuffle
};

GenConfig gen_config_from_json(const json& doc) {
  GenConfig cfg;
  cfg.n_history_min = doc.value("n_history_min", cfg.n_history_min);
  cfg.n_history_max = doc.value("n_history_max", cfg.n_history_max);
  cfg.n_candidates_min = doc.value("n_candidates_min", cfg.n_candidates_min);
  cfg.n_candidates_max = doc.value("n_candidates_max", cfg.n_candidates_max);
  cfg.n_samples = doc.value("n_samples", cfg.n_samples);
  cfg.performance_decimals = doc.value("performance_decimals", cfg.performance_decimals);
  return cfg;
}

ordered_json gen_config_to_json(const GenConfig& cfg) {
  ordered_json doc;
  doc["n_history_min"] = cfg.n_history_min;
  doc["n_history_max"] = cfg.n_history_max;
  doc["n_candidates_min"] = cfg.n_candidates_min;
  doc["n_candidates_max"] = cfg.n_candidates_max;
  doc["n_samples"] = cfg.n_samples;
  doc["performance_decimals"] = cfg.performance_decimals;
  return doc;
}

SearchConfig search_config_from_json(const json& doc) {
  SearchConfig cfg;
  cfg.n_init = doc.value("n_init", cfg.n_init);
  cfg.n_candidates = doc.value("n_candidates", cfg.n_candidates);
  cfg.n_iters = doc.value("n_iters", cfg.n_iters);
  const std::string mode = doc.value("candidate_mode", "random");
  if (mode == "random") {
    cfg.candidate_mode = CandidateMode::kRandom;
  } else if (mode == "mixed") {
    cfg.candidate_mode = CandidateMode::kMixed;
  } else {
    throw ValidationError("candidate_mode must be random or mixed, got '" + mode + "'");
  }
  if (doc.contains("history_window") && !doc["history_window"].is_null()) {
    cfg.history_window = doc["history_window"].get<int>();
  }
  cfg.seed = doc.value("seed", cfg.seed);
  return cfg;
}

ordered_json search_config_to_json(const SearchConfig& cfg) {
  ordered_json doc;
  doc["n_init"] = cfg.n_init;
  doc["n_candidates"] = cfg.n_candidates;
  doc["n_iters"] = cfg.n_iters;
  doc["candidate_mode"] = to_string(cfg.candidate_mode);
  if (cfg.history_window) doc["history_window"] = *cfg.history_window;
  doc["seed"] = cfg.seed;
  return doc;
}

// ---------------------------------------------------------------------------
// commands

int cmd_space_validate(const std::string& space_file) {
  const SearchSpace space = SearchSpace::load_file(space_file);
  std::cout << "ok, cardinality " << space_cardinality(space).str() << "\n";
  return kExitOk;
}

int cmd_gen_data(const GenDataOptions& opt) {
  std::optional<SearchSpace> space;
  std::optional<Evaluator> evaluator;
  GenConfig cfg;
  std::uint64_t seed = opt.seed;
  std::string out = opt.out;

  std::optional<ordered_json> original_manifest;
  if (!opt.in.manifest_file.empty()) {
    const ordered_json manifest = load_manifest(opt.in.manifest_file);
    if (manifest["command"] != "gen-data") {
      throw ValidationError("manifest is for command '" +
                            manifest["command"].get<std::string>() + "'");
    }
    space = SearchSpace::from_json(manifest["space"]);
    evaluator = Evaluator::from_json(
        manifest["evaluator"], *space,
        std::filesystem::path(opt.in.manifest_file).parent_path().string());
    cfg = gen_config_from_json(manifest["params"]);
    seed = manifest["seed"].get<std::uint64_t>();
    if (out.empty()) out = manifest["out"].get<std::string>();
    original_manifest = manifest;
  } else {
    if (opt.in.space_file.empty() || opt.in.evaluator_file.empty()) {
      throw UsageError("gen-data requires --space and --evaluator (or --manifest)");
    }
    space = SearchSpace::load_file(opt.in.space_file);
    evaluator = Evaluator::load_spec_file(opt.in.evaluator_file, *space);
    if (!opt.in.config_file.empty()) {
      cfg = gen_config_from_json(load_json_file(opt.in.config_file, "config"));
    }
  }
  if (opt.samples) cfg.n_samples = *opt.samples;
  if (opt.history_min) cfg.n_history_min = *opt.history_min;
  if (opt.history_max) cfg.n_history_max = *opt.history_max;
  if (opt.cand_min) cfg.n_candidates_min = *opt.cand_min;
  if (opt.cand_max) cfg.n_candidates_max = *opt.cand_max;
  if (opt.decimals) cfg.performance_decimals = *opt.decimals;
  if (out.empty()) throw UsageError("gen-data requires --out");
  cfg.validate();

  Rng rng(seed);
  std::uint64_t clamped = 0;
  const std::uint64_t written =
      generate_dataset(*space, *evaluator, cfg, rng, out, &clamped);
  if (clamped > 0) {
    std::cerr << "warning: " << clamped << " of " << written
              << " samples clamped their sizes to the subspace cardinality\n";
  }

  const ordered_json manifest =
      original_manifest ? *original_manifest
                        : make_manifest("gen-data", seed, *space, &*evaluator, nullptr,
                                        gen_config_to_json(cfg), out);
  write_text_file(out + ".manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << written << " samples to " << out << "\n";
  std::cout << "manifest: " << out << ".manifest.json\n";
  return kExitOk;
}

SearchTrace run_search_command(const SearchOptions& opt, std::string* out_path) {
  std::optional<SearchSpace> space;
  std::optional<Evaluator> evaluator;
  RankerSpec ranker_spec;
  SearchConfig cfg;
  std::string out = opt.out;
  bool shuffled = opt.shuffled;

  std::optional<ordered_json> original_manifest;
  if (!opt.in.manifest_file.empty()) {
    const ordered_json manifest = load_manifest(opt.in.manifest_file);
    if (manifest["command"] != "search") {
      throw ValidationError("manifest is for command '" +
                            manifest["command"].get<std::string>() + "'");
    }
    space = SearchSpace::from_json(manifest["space"]);
    evaluator = Evaluator::from_json(
        manifest["evaluator"], *space,
        std::filesystem::path(opt.in.manifest_file).parent_path().string());
    ranker_spec = RankerSpec::from_json(manifest["ranker"]);
    cfg = search_config_from_json(manifest["params"]);
    cfg.seed = manifest["seed"].get<std::uint64_t>();
    shuffled = manifest["params"].value("shuffled", false);
    if (out.empty()) out = manifest["out"].get<std::string>();
    original_manifest = manifest;
  } else {
    if (opt.in.space_file.empty() || opt.in.evaluator_file.empty()) {
      throw UsageError("search requires --space and --evaluator (or --manifest)");
    }
    space = SearchSpace::load_file(opt.in.space_file);
    evaluator = Evaluator::load_spec_file(opt.in.evaluator_file, *space);
    if (!opt.ranker_file.empty()) {
      ranker_spec = RankerSpec::from_json(load_json_file(opt.ranker_file, "ranker spec"));
    }
    if (!opt.in.config_file.empty()) {
      cfg = search_config_from_json(load_json_file(opt.in.config_file, "config"));
    }
    cfg.seed = opt.seed;
  }
  if (opt.iters) cfg.n_iters = *opt.iters;
  if (opt.candidates) cfg.n_candidates = *opt.candidates;
  if (opt.init) cfg.n_init = *opt.init;
  if (opt.history_window) cfg.history_window = *opt.history_window;
  if (opt.mode) {
    if (*opt.mode == "random") {
      cfg.candidate_mode = CandidateMode::kRandom;
    } else if (*opt.mode == "mixed") {
      cfg.candidate_mode = CandidateMode::kMixed;
    } else {
      throw UsageError("--mode must be random or mixed");
    }
  }
  cfg.validate();

  const NamedRanker ranker = build_ranker(ranker_spec, *evaluator);
  SearchTrace trace = shuffled
                          ? shuffled_history_search(*space, *evaluator, ranker, cfg)
                          : run_search(*space, *evaluator, ranker, cfg);

  ordered_json params = search_config_to_json(cfg);
  if (shuffled) params["shuffled"] = true;
  trace.manifest = original_manifest
                       ? *original_manifest
                       : make_manifest("search", cfg.seed, *space, &*evaluator,
                                       &ranker_spec, params, out);
  if (out_path != nullptr) *out_path = out;
  return trace;
}

int cmd_search(const SearchOptions& opt) {
  std::string out;
  const SearchTrace trace = run_search_command(opt, &out);
  if (out.empty()) throw UsageError("search requires --out");
  write_text_file(out, trace.to_json().dump(2) + "\n");

  const ArchRecord* best = trace.best_record();
  std::cout << "trace: " << out << "\n";
  if (best != nullptr) {
    double raw = 0.0;
    for (const auto& [_, value] : best->raw_metrics) raw = value;
    std::cout << "best " << best->code.str() << " raw " << raw << " unique_evals "
              << trace.unique_evaluations << " fallbacks " << trace.fallback_count
              << "\n";
  }
  if (trace.abort_error) {
    std::cerr << "aborted: " << *trace.abort_error << "\n";
    return kExitEvaluator;
  }
  return kExitOk;
}

struct SeedRunResult {
  std::uint64_t seed = 0;
  SearchTrace trace;
};

/// Runs fn(seed) over all seeds with up to `jobs` workers; results come back
/// in seed order.
template <typename Fn>
std::vector<SeedRunResult> run_seeds(const std::vector<std::uint64_t>& seeds, int jobs,
                                     Fn&& fn) {
  std::vector<SeedRunResult> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::size_t next = 0;
  std::mutex mutex;
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(seeds.size())));
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      while (true) {
        std::size_t index;
        {
          std::lock_guard<std::mutex> lock(mutex);
          if (next >= seeds.size()) return;
          index = next++;
        }
        try {
          results[index] = {seeds[index], fn(seeds[index])};
        } catch (...) {
          errors[index] = std::current_exception();
        }
      }
    });
  }
  for (auto& thread : threads) thread.join();
  for (const std::exception_ptr& error : errors) {
    if (error) std::rethrow_exception(error);
  }
  return results;
}

int cmd_baseline(const std::string& space_file, const std::string& evaluator_file,
                 const std::string& algo, int budget, int pop, int tournament,
                 const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                 int jobs) {
  if (seeds.empty()) throw UsageError("baseline requires at least one --seeds value");
  if (algo != "random" && algo != "regevo") {
    throw UsageError("--algo must be random or regevo");
  }
  const SearchSpace space = SearchSpace::load_file(space_file);
  const Evaluator evaluator = Evaluator::load_spec_file(evaluator_file, space);
  std::filesystem::create_directories(out_dir);

  const auto results = run_seeds(seeds, jobs, [&](std::uint64_t seed) {
    Evaluator run_evaluator = evaluator.clone_fresh();
    Rng rng(seed);
    return algo == "random"
               ? run_random_search(space, run_evaluator, budget, rng)
               : run_regularized_evolution(space, run_evaluator, budget, pop,
                                           tournament, rng);
  });

  ordered_json params;
  params["algo"] = algo;
  params["budget"] = budget;
  if (algo == "regevo") {
    params["pop_size"] = pop;
    params["tournament"] = tournament;
  }
  params["seeds"] = seeds;
  const ordered_json manifest = make_manifest("baseline", seeds.front(), space,
                                              &evaluator, nullptr, params, out_dir);

  std::vector<double> finals_canonical;
  std::vector<double> finals_raw;
  for (const SeedRunResult& result : results) {
    SearchTrace trace = result.trace;
    trace.manifest = manifest;
    const std::string path = (std::filesystem::path(out_dir) /
                              (algo + "_seed" + std::to_string(result.seed) + ".json"))
                                 .string();
    write_text_file(path, trace.to_json().dump(2) + "\n");
    const ArchRecord* best = trace.best_record();
    finals_canonical.push_back(best != nullptr ? best->performance : 0.0);
    double raw = 0.0;
    if (best != nullptr) {
      for (const auto& [_, value] : best->raw_metrics) raw = value;
    }
    finals_raw.push_back(raw);
  }

  ordered_json stats;
  stats["manifest"] = manifest;
  stats["algo"] = algo;
  stats["budget"] = budget;
  stats["seeds"] = seeds;
  stats["final_best_canonical"] = finals_canonical;
  stats["final_best_raw"] = finals_raw;
  stats["mean_canonical"] = mean(finals_canonical);
  stats["sd_canonical"] = sample_sd(finals_canonical);
  const std::string stats_path =
      (std::filesystem::path(out_dir) / (algo + "_stats.json")).string();
  write_text_file(stats_path, stats.dump(2) + "\n");
  std::cout << algo << " over " << seeds.size() << " seeds: mean final best "
            << mean(finals_canonical) << " sd " << sample_sd(finals_canonical) << "\n";
  std::cout << "stats: " << stats_path << "\n";
  return kExitOk;
}

int cmd_ablate_shuffle(const SearchOptions& base, const std::vector<std::uint64_t>& seeds,
                       const std::string& out_dir, int jobs) {
  if (seeds.empty()) throw UsageError("ablate-shuffle requires at least one --seeds value");
  if (base.in.space_file.empty() || base.in.evaluator_file.empty()) {
    throw UsageError("ablate-shuffle requires --space and --evaluator");
  }
  std::filesystem::create_directories(out_dir);

  const SearchSpace space = SearchSpace::load_file(base.in.space_file);
  const Evaluator evaluator = Evaluator::load_spec_file(base.in.evaluator_file, space);
  RankerSpec ranker_spec;
  if (!base.ranker_file.empty()) {
    ranker_spec = RankerSpec::from_json(load_json_file(base.ranker_file, "ranker spec"));
  }
  SearchConfig base_cfg;
  if (!base.in.config_file.empty()) {
    base_cfg = search_config_from_json(load_json_file(base.in.config_file, "config"));
  }
  if (base.iters) base_cfg.n_iters = *base.iters;
  if (base.candidates) base_cfg.n_candidates = *base.candidates;
  if (base.init) base_cfg.n_init = *base.init;
  base_cfg.validate();

  const auto run_one = [&](std::uint64_t seed, bool shuffled) {
    SearchConfig cfg = base_cfg;
    cfg.seed = seed;
    Evaluator run_evaluator = evaluator.clone_fresh();
    const NamedRanker ranker = build_ranker(ranker_spec, run_evaluator);
    return shuffled ? shuffled_history_search(space, run_evaluator, ranker, cfg)
                    : run_search(space, run_evaluator, ranker, cfg);
  };
  const auto plain_results = run_seeds(
      seeds, jobs, [&](std::uint64_t seed) { return run_one(seed, false); });
  const auto shuffled_results = run_seeds(
      seeds, jobs, [&](std::uint64_t seed) { return run_one(seed, true); });

  int wins = 0;
  int losses = 0;
  int ties = 0;
  std::vector<double> plain_finals;
  std::vector<double> shuffled_finals;
  ordered_json pair_rows = ordered_json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const SearchTrace& plain = plain_results[i].trace;
    const SearchTrace& shuffled = shuffled_results[i].trace;
    write_text_file((std::filesystem::path(out_dir) /
                     ("unshuffled_seed" + std::to_string(seeds[i]) + ".json"))
                        .string(),
                    plain.to_json().dump(2) + "\n");
    write_text_file((std::filesystem::path(out_dir) /
                     ("shuffled_seed" + std::to_string(seeds[i]) + ".json"))
                        .string(),
                    shuffled.to_json().dump(2) + "\n");
    const double p = plain.best_record() != nullptr ? plain.best_record()->performance : 0;
    const double s =
        shuffled.best_record() != nullptr ? shuffled.best_record()->performance : 0;
    plain_finals.push_back(p);
    shuffled_finals.push_back(s);
    if (p > s) {
      ++wins;
    } else if (p < s) {
      ++losses;
    } else {
      ++ties;
    }
    pair_rows.push_back({{"seed", seeds[i]},
                         {"unshuffled", p},
                         {"shuffled", s},
                         {"delta", p - s}});
  }

  ordered_json stats;
  stats["seeds"] = seeds;
  stats["pairs"] = pair_rows;
  stats["mean_unshuffled"] = mean(plain_finals);
  stats["mean_shuffled"] = mean(shuffled_finals);
  stats["mean_delta"] = mean(plain_finals) - mean(shuffled_finals);
  stats["wins"] = wins;
  stats["losses"] = losses;
  stats["ties"] = ties;
  if (seeds.size() >= 2) {
    stats["sign_test_p"] = sign_test_one_sided_p(wins, losses);
  } else {
    stats["sign_test_p"] = nullptr;
    std::cerr << "warning: one seed only, no significance test\n";
  }
  const std::string stats_path =
      (std::filesystem::path(out_dir) / "ablation_stats.json").string();
  write_text_file(stats_path, stats.dump(2) + "\n");
  std::cout << "unshuffled mean " << mean(plain_finals) << " vs shuffled mean "
            << mean(shuffled_finals) << " (wins " << wins << ", losses " << losses
            << ", ties " << ties << ")\n";
  std::cout << "stats: " << stats_path << "\n";
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& trace_files, const std::string& out_dir,
               int ratio_window) {
  if (trace_files.empty()) throw UsageError("report requires at least one trace file");
  std::filesystem::create_directories(out_dir);
  std::vector<LoadedTrace> traces;
  for (const std::string& path : trace_files) {
    traces.push_back(LoadedTrace::load(path));
  }
  std::ostringstream best_csv;
  write_best_so_far_csv(traces, best_csv);
  const std::string best_path =
      (std::filesystem::path(out_dir) / "best_so_far.csv").string();
  write_text_file(best_path, best_csv.str());
  std::cout << "wrote " << best_path << "\n";

  std::vector<LoadedTrace> mixed;
  for (const LoadedTrace& trace : traces) {
    if (trace.mixed_mode()) mixed.push_back(trace);
  }
  if (!mixed.empty()) {
    std::ostringstream ratio_csv;
    write_provenance_ratio_csv(mixed, ratio_window, ratio_csv);
    const std::string ratio_path =
        (std::filesystem::path(out_dir) / "provenance_ratio.csv").string();
    write_text_file(ratio_path, ratio_csv.str());
    std::cout << "wrote " << ratio_path << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-domain architecture-code search toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // space validate
  auto* space_cmd = app.add_subcommand("space", "Search-space utilities");
  space_cmd->require_subcommand(1);
  std::string validate_file;
  auto* validate_cmd =
      space_cmd->add_subcommand("validate", "Validate a space file, print cardinality");
  validate_cmd->add_option("space_file", validate_file, "space JSON file")->required();

  // gen-data
  GenDataOptions gen;
  auto* gen_cmd =
      app.add_subcommand("gen-data", "Generate a trajectory instruction dataset");
  gen_cmd->add_option("--space", gen.in.space_file, "space JSON file");
  gen_cmd->add_option("--evaluator", gen.in.evaluator_file, "evaluator spec file");
  gen_cmd->add_option("--config", gen.in.config_file, "generation config JSON");
  gen_cmd->add_option("--manifest", gen.in.manifest_file, "rerun from a manifest");
  gen_cmd->add_option("--seed", gen.seed, "seed");
  gen_cmd->add_option("--out", gen.out, "output JSONL path");
  std::uint64_t gen_samples = 0;
  auto* samples_opt = gen_cmd->add_option("--samples", gen_samples, "sample count");
  int hmin = 0, hmax = 0, cmin = 0, cmax = 0, decimals = 0;
  auto* hmin_opt = gen_cmd->add_option("--history-min", hmin);
  auto* hmax_opt = gen_cmd->add_option("--history-max", hmax);
  auto* cmin_opt = gen_cmd->add_option("--cand-min", cmin);
  auto* cmax_opt = gen_cmd->add_option("--cand-max", cmax);
  auto* dec_opt = gen_cmd->add_option("--decimals", decimals);

  // search
  SearchOptions search;
  auto* search_cmd = app.add_subcommand("search", "Run a ranked search");
  search_cmd->add_option("--space", search.in.space_file, "space JSON file");
  search_cmd->add_option("--evaluator", search.in.evaluator_file, "evaluator spec file");
  search_cmd->add_option("--ranker", search.ranker_file, "ranker spec file");
  search_cmd->add_option("--config", search.in.config_file, "search config JSON");
  search_cmd->add_option("--manifest", search.in.manifest_file, "rerun from a manifest");
  search_cmd->add_option("--seed", search.seed, "seed");
  search_cmd->add_option("--out", search.out, "output trace path");
  int iters = 0, candidates = 0, init = 0, window = 0;
  std::string mode;
  auto* iters_opt = search_cmd->add_option("--iters", iters);
  auto* cand_opt = search_cmd->add_option("--candidates", candidates);
  auto* init_opt = search_cmd->add_option("--init", init);
  auto* window_opt = search_cmd->add_option("--history-window", window);
  auto* mode_opt = search_cmd->add_option("--mode", mode, "random|mixed");

  // baseline
  std::string bl_space, bl_evaluator, bl_algo = "random", bl_out;
  int bl_budget = 200, bl_pop = 50, bl_tournament = 10, bl_jobs = 1;
  std::vector<std::uint64_t> bl_seeds;
  auto* baseline_cmd = app.add_subcommand("baseline", "Random search / regularized evolution");
  baseline_cmd->add_option("--space", bl_space, "space JSON file")->required();
  baseline_cmd->add_option("--evaluator", bl_evaluator, "evaluator spec file")->required();
  baseline_cmd->add_option("--algo", bl_algo, "random|regevo");
  baseline_cmd->add_option("--budget", bl_budget, "evaluation budget");
  baseline_cmd->add_option("--pop", bl_pop, "population size (regevo)");
  baseline_cmd->add_option("--tournament", bl_tournament, "tournament size (regevo)");
  baseline_cmd->add_option("--seeds", bl_seeds, "seed list")->delimiter(',');
  baseline_cmd->add_option("--out", bl_out, "output directory")->required();
  baseline_cmd->add_option("--jobs", bl_jobs, "parallel seed runs");

  // ablate-shuffle
  SearchOptions ablate;
  std::vector<std::uint64_t> ab_seeds;
  std::string ab_out;
  int ab_jobs = 1;
  int ab_iters = 0, ab_candidates = 0, ab_init = 0;
  auto* ablate_cmd =
      app.add_subcommand("ablate-shuffle", "Paired shuffled vs unshuffled searches");
  ablate_cmd->add_option("--space", ablate.in.space_file, "space JSON file")->required();
  ablate_cmd->add_option("--evaluator", ablate.in.evaluator_file, "evaluator spec file")
      ->required();
  ablate_cmd->add_option("--ranker", ablate.ranker_file, "ranker spec file");
  ablate_cmd->add_option("--config", ablate.in.config_file, "search config JSON");
  ablate_cmd->add_option("--seeds", ab_seeds, "seed list")->delimiter(',');
  ablate_cmd->add_option("--out", ab_out, "output directory")->required();
  ablate_cmd->add_option("--jobs", ab_jobs, "parallel seed runs");
  auto* ab_iters_opt = ablate_cmd->add_option("--iters", ab_iters);
  auto* ab_cand_opt = ablate_cmd->add_option("--candidates", ab_candidates);
  auto* ab_init_opt = ablate_cmd->add_option("--init", ab_init);

  // report
  std::vector<std::string> report_traces;
  std::string report_out;
  int ratio_window = 25;
  auto* report_cmd = app.add_subcommand("report", "Best-so-far and ratio CSV reports");
  report_cmd->add_option("traces", report_traces, "trace JSON files")->required();
  report_cmd->add_option("--out", report_out, "output directory")->required();
  report_cmd->add_option("--ratio-window", ratio_window, "provenance ratio window");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*validate_cmd) return cmd_space_validate(validate_file);
    if (*gen_cmd) {
      if (*samples_opt) gen.samples = gen_samples;
      if (*hmin_opt) gen.history_min = hmin;
      if (*hmax_opt) gen.history_max = hmax;
      if (*cmin_opt) gen.cand_min = cmin;
      if (*cmax_opt) gen.cand_max = cmax;
      if (*dec_opt) gen.decimals = decimals;
      return cmd_gen_data(gen);
    }
    if (*search_cmd) {
      if (*iters_opt) search.iters = iters;
      if (*cand_opt) search.candidates = candidates;
      if (*init_opt) search.init = init;
      if (*window_opt) search.history_window = window;
      if (*mode_opt) search.mode = mode;
      return cmd_search(search);
    }
    if (*baseline_cmd) {
      return cmd_baseline(bl_space, bl_evaluator, bl_algo, bl_budget, bl_pop,
                          bl_tournament, bl_seeds, bl_out, bl_jobs);
    }
    if (*ablate_cmd) {
      if (*ab_iters_opt) ablate.iters = ab_iters;
      if (*ab_cand_opt) ablate.candidates = ab_candidates;
      if (*ab_init_opt) ablate.init = ab_init;
      return cmd_ablate_shuffle(ablate, ab_seeds, ab_out, ab_jobs);
    }
    if (*report_cmd) return cmd_report(report_traces, report_out, ratio_window);
  } catch (const UsageError& ex) {
    std::cerr << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const EndpointError& ex) {
    std::cerr << "endpoint error: " << ex.what() << "\n";
    return kExitEndpoint;
  } catch (const EvaluationError& ex) {
    std::cerr << "evaluator error: " << ex.what() << "\n";
    return kExitEvaluator;
  } catch (const ValidationError& ex) {
    std::cerr << "validation error: " << ex.what() << "\n";
    return kExitValidation;
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
