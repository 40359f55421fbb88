// Acceptance suite: one criterion per check, one pass/fail line each.
// Exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#ifdef LMSEARCH_HTTPS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "lmsearch/evaluators.hpp"
#include "lmsearch/pruner.hpp"
#include "lmsearch/rankers.hpp"
#include "lmsearch/report.hpp"
#include "lmsearch/search.hpp"
#include "lmsearch/space.hpp"
#include "lmsearch/trajectory.hpp"

using namespace lmsearch;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// harness

struct Check {
  int id;
  std::string name;
  double time_limit_sec;
  std::function<std::string()> body;  // empty string = pass, else failure detail
};

SearchSpace flat_space(const std::vector<std::size_t>& radices,
                       const std::string& name) {
  std::vector<Dimension> dims;
  for (std::size_t d = 0; d < radices.size(); ++d) {
    Dimension dim;
    dim.label = "d" + std::to_string(d);
    for (std::size_t o = 0; o < radices[d]; ++o) {
      dim.options.push_back("o" + std::to_string(o));
    }
    dims.push_back(std::move(dim));
  }
  return SearchSpace(name, std::move(dims));
}

NCode make_code(const std::string& text) {
  std::vector<std::uint8_t> digits;
  for (char c : text) digits.push_back(static_cast<std::uint8_t>(c - '0'));
  return NCode(std::move(digits));
}

double digit_sum(const NCode& code) {
  double sum = 0;
  for (std::size_t d = 0; d < code.size(); ++d) sum += code.digit(d);
  return sum;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Evaluator option_index_evaluator(const SearchSpace& space, double noise_sd = 0.0) {
  SyntheticLandscape landscape = SyntheticLandscape::option_index(space);
  landscape.noise_sd = noise_sd;
  return Evaluator::synthetic(landscape, "score", Direction::kMaximize);
}

NamedRanker oracle_ranker(const Evaluator& truth) {
  Evaluator peek = truth.clone_fresh();
  return {"oracle", [peek](const std::vector<HistoryRecord>& history,
                           const std::vector<NCode>& candidates,
                           Rng& rng) mutable {
            return rank_oracle(history, candidates, peek, rng);
          }};
}

NamedRanker knn_ranker() {
  return {"knn", [](const std::vector<HistoryRecord>& history,
                    const std::vector<NCode>& candidates, Rng& rng) {
            if (history.empty()) return rank_random(history, candidates, rng);
            return rank_knn_surrogate(history, candidates, 5);
          }};
}

NamedRanker random_ranker() {
  return {"random", [](const std::vector<HistoryRecord>& history,
                       const std::vector<NCode>& candidates, Rng& rng) {
            return rank_random(history, candidates, rng);
          }};
}

// ---------------------------------------------------------------------------
// criteria

std::string criterion_codec_bijectivity() {
  Rng rng(20250101);
  for (int s = 0; s < 1000; ++s) {
    const std::size_t n_dims = 1 + rng.uniform_index(12);
    std::vector<std::size_t> radices;
    for (std::size_t d = 0; d < n_dims; ++d) radices.push_back(1 + rng.uniform_index(10));
    const SearchSpace space = flat_space(radices, "acc-random");
    for (int c = 0; c < 100; ++c) {
      std::vector<std::uint8_t> digits(n_dims);
      Assignment assignment;
      for (std::size_t d = 0; d < n_dims; ++d) {
        digits[d] = static_cast<std::uint8_t>(rng.uniform_index(radices[d]));
        assignment["d" + std::to_string(d)] = "o" + std::to_string(digits[d]);
      }
      const NCode code(digits);
      if (encode(space, decode(space, code)) != code) {
        return "encode(decode(c)) != c for " + code.str();
      }
      if (decode(space, encode(space, assignment)) != assignment) {
        return "decode(encode(x)) != x at space " + std::to_string(s);
      }
      if (parse_ncode(space, code.str()) != code) {
        return "parse(render(c)) != c for " + code.str();
      }
      if (parse_ncode(space, code.str()).str() != code.str()) {
        return "render(parse(t)) != t for " + code.str();
      }
    }
  }
  return "";
}

std::string criterion_cardinality() {
  const SearchSpace space = flat_space({5, 5, 5, 5, 5, 5}, "nb201-shape");
  const ExactCount count = space_cardinality(space);
  if (!(count == 15625u)) return "got " + count.str() + ", expected 15625";
  return "";
}

std::string criterion_prompt_golden() {
  TrajectorySample sample;
  const std::vector<std::pair<std::string, double>> history = {
      {"03255564", 94.28}, {"43212502", 89.47}, {"63421032", 25.76},
      {"53215432", 14.13}};
  for (const auto& [text, value] : history) {
    sample.history.push_back({make_code(text), value, value});
  }
  for (const char* text : {"33513501", "63225362", "41625214"}) {
    sample.candidates.push_back(make_code(text));
  }
  sample.answer = sample.candidates[1];

  const std::string golden =
      read_file(std::string(LMSEARCH_TEST_DATA_DIR) + "/golden_prompt.txt");
  if (golden.empty()) return "golden file missing";
  const std::string rendered = render_prompt(sample);
  if (rendered != golden) {
    return "rendered prompt differs from golden file (" +
           std::to_string(rendered.size()) + " vs " + std::to_string(golden.size()) +
           " bytes)";
  }
  if (expected_output(sample) != "63225362") return "expected_output mismatch";
  return "";
}

std::string criterion_dataset_soundness() {
  const SearchSpace space = flat_space(std::vector<std::size_t>(10, 10), "acc-10x10");
  Evaluator evaluator = option_index_evaluator(space);
  GenConfig cfg;
  Rng rng(777);
  for (int i = 0; i < 1000; ++i) {
    Rng sample_rng = rng.derive(static_cast<std::uint64_t>(i));
    const TrajectorySample sample = generate_sample(space, evaluator, cfg, sample_rng);
    // independent oracle: closed-form digit sum, same tie rule
    NCode best = sample.candidates.front();
    double best_value = digit_sum(best);
    for (const NCode& candidate : sample.candidates) {
      const double value = digit_sum(candidate);
      if (value > best_value || (value == best_value && candidate < best)) {
        best = candidate;
        best_value = value;
      }
    }
    if (!(sample.answer == best)) {
      return "sample " + std::to_string(i) + ": answer " + sample.answer.str() +
             " != exhaustive argmax " + best.str();
    }
  }
  return "";
}

std::string criterion_pruning_statistics() {
  const SearchSpace space = flat_space({5, 5, 5, 5, 5, 5}, "acc-prune");
  Rng rng(4242);
  const int trials = 3334;  // 6 dims per trial -> 20004 pruned dimensions

  long dims_total = 0;
  long dims_dropped = 0;
  long kept_dims = 0;
  double survivor_fraction_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Subspace sub = prune_space(space, rng);
    if (subspace_cardinality(sub).as_u64() < 1) return "empty subspace";
    for (const auto& state : sub.dims) {
      ++dims_total;
      if (std::holds_alternative<Subspace::Fixed>(state)) {
        ++dims_dropped;
      } else {
        ++kept_dims;
        survivor_fraction_sum +=
            std::get<Subspace::Retained>(state).options.size() / 5.0;
      }
    }
  }
  const double drop_frequency = static_cast<double>(dims_dropped) / dims_total;
  if (drop_frequency < 0.48 || drop_frequency > 0.52) {
    return "dimension-drop frequency " + std::to_string(drop_frequency) +
           " outside [0.48, 0.52]";
  }

  // repair-adjusted expectation by brute-force enumeration over radix 5
  double expected = 0.0;
  for (std::size_t mask = 0; mask < 32; ++mask) {
    std::size_t survivors = 0;
    for (std::size_t o = 0; o < 5; ++o) {
      if (mask & (1u << o)) ++survivors;
    }
    expected += std::pow(0.5, 5) *
                static_cast<double>(std::max<std::size_t>(survivors, 1));
  }
  expected /= 5.0;  // fraction of the radix
  const double observed = survivor_fraction_sum / kept_dims;
  if (std::abs(observed - expected) > 0.02) {
    return "option-retention mean " + std::to_string(observed) + " not within 0.02 of " +
           std::to_string(expected);
  }
  return "";
}

std::string criterion_oracle_completeness() {
  const SearchSpace space = flat_space({3, 3, 3}, "acc-3x3x3");
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Evaluator evaluator = option_index_evaluator(space);
    Evaluator twin = evaluator.clone_fresh();
    const double optimum = enumerate_optimum(space, twin).performance;

    SearchConfig cfg;
    cfg.n_init = 10;
    cfg.n_candidates = 10;
    cfg.n_iters = 20;
    cfg.seed = seed;
    const SearchTrace trace = run_search(space, evaluator, oracle_ranker(evaluator), cfg);
    const ArchRecord* best = trace.best_record();
    if (best == nullptr || best->performance != optimum) {
      return "seed " + std::to_string(seed) + " missed the optimum";
    }
  }
  return "";
}

std::string criterion_baseline_ordering() {
  const SearchSpace space = flat_space({5, 5, 5, 5, 5, 5}, "acc-baseline");
  const int budget = 200;
  const int seeds = 30;
  std::vector<double> oracle_finals;
  std::vector<double> re_finals;
  std::vector<double> rs_finals;
  int re_wins = 0;
  int re_losses = 0;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    Evaluator noisy = option_index_evaluator(space, 0.5);
    Evaluator noiseless_truth = option_index_evaluator(space, 0.0);

    Evaluator rs_eval = noisy.clone_fresh();
    Rng rs_rng(seed);
    const SearchTrace rs = run_random_search(space, rs_eval, budget, rs_rng);
    rs_finals.push_back(rs.best_record()->performance);

    Evaluator re_eval = noisy.clone_fresh();
    Rng re_rng(seed);
    const SearchTrace re =
        run_regularized_evolution(space, re_eval, budget, 50, 10, re_rng);
    re_finals.push_back(re.best_record()->performance);

    // paper-style pool: half random, half evolved from history
    Evaluator loop_eval = noisy.clone_fresh();
    SearchConfig cfg;
    cfg.n_init = 10;
    cfg.n_candidates = 10;
    cfg.n_iters = budget - cfg.n_init;
    cfg.candidate_mode = CandidateMode::kMixed;
    cfg.seed = seed;
    const SearchTrace loop =
        run_search(space, loop_eval, oracle_ranker(noiseless_truth), cfg);
    oracle_finals.push_back(loop.best_record()->performance);

    if (re_finals.back() > rs_finals.back()) ++re_wins;
    if (re_finals.back() < rs_finals.back()) ++re_losses;
  }
  const double oracle_mean = mean(oracle_finals);
  const double re_mean = mean(re_finals);
  const double rs_mean = mean(rs_finals);
  if (!(oracle_mean >= re_mean)) {
    return "oracle mean " + std::to_string(oracle_mean) + " < RE mean " +
           std::to_string(re_mean);
  }
  if (!(re_mean >= rs_mean)) {
    return "RE mean " + std::to_string(re_mean) + " < RS mean " +
           std::to_string(rs_mean);
  }
  const double p = sign_test_one_sided_p(re_wins, re_losses);
  if (!(p < 0.05)) {
    return "RE > RS sign test p = " + std::to_string(p) + " (wins " +
           std::to_string(re_wins) + ", losses " + std::to_string(re_losses) + ")";
  }
  return "";
}

std::string criterion_shuffle_ablation() {
  const SearchSpace space = flat_space({5, 5, 5, 5, 5, 5}, "acc-shuffle");
  const int seeds = 30;

  int knn_wins = 0;
  int knn_losses = 0;
  double truth_sum = 0.0;
  double shuffled_sum = 0.0;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    SearchConfig cfg;
    cfg.n_iters = 40;
    cfg.seed = seed;
    Evaluator eval_truth = option_index_evaluator(space, 0.25);
    Evaluator eval_shuffled = eval_truth.clone_fresh();
    const double truth =
        run_search(space, eval_truth, knn_ranker(), cfg).best_record()->performance;
    const double shuffled =
        shuffled_history_search(space, eval_shuffled, knn_ranker(), cfg)
            .best_record()
            ->performance;
    truth_sum += truth;
    shuffled_sum += shuffled;
    if (truth > shuffled) ++knn_wins;
    if (truth < shuffled) ++knn_losses;
  }
  if (!(truth_sum / seeds > shuffled_sum / seeds)) {
    return "surrogate: unshuffled mean " + std::to_string(truth_sum / seeds) +
           " not above shuffled mean " + std::to_string(shuffled_sum / seeds);
  }
  const double knn_p = sign_test_one_sided_p(knn_wins, knn_losses);
  if (!(knn_p < 0.05)) {
    return "surrogate sign test p = " + std::to_string(knn_p) + " (wins " +
           std::to_string(knn_wins) + ", losses " + std::to_string(knn_losses) + ")";
  }

  // rank_random ignores history: paired runs tie exactly, no significant delta
  int random_wins = 0;
  int random_losses = 0;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    SearchConfig cfg;
    cfg.n_iters = 40;
    cfg.seed = seed;
    Evaluator eval_truth = option_index_evaluator(space, 0.25);
    Evaluator eval_shuffled = eval_truth.clone_fresh();
    const double truth =
        run_search(space, eval_truth, random_ranker(), cfg).best_record()->performance;
    const double shuffled =
        shuffled_history_search(space, eval_shuffled, random_ranker(), cfg)
            .best_record()
            ->performance;
    if (truth > shuffled) ++random_wins;
    if (truth < shuffled) ++random_losses;
  }
  const double random_p = sign_test_one_sided_p(random_wins, random_losses);
  if (random_p < 0.05) {
    return "random ranker showed a significant delta (p = " +
           std::to_string(random_p) + ")";
  }
  return "";
}

std::string criterion_provenance_trend() {
  const SearchSpace space = flat_space({5, 5, 5, 5, 5, 5}, "acc-ratio");
  const int seeds = 30;
  const int window = 25;
  int crossing_seeds = 0;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    Evaluator evaluator = option_index_evaluator(space, 0.5);
    SearchConfig cfg;
    cfg.n_iters = 200;
    cfg.candidate_mode = CandidateMode::kMixed;
    cfg.seed = seed;
    const SearchTrace trace = run_search(space, evaluator, oracle_ranker(evaluator), cfg);
    for (const auto& [iteration, fraction] : provenance_ratio(trace, window)) {
      if (fraction < 0.5 && iteration <= 150) {
        ++crossing_seeds;
        break;
      }
    }
  }
  if (crossing_seeds < 24) {
    return "random fraction fell below 0.5 by iteration 150 in only " +
           std::to_string(crossing_seeds) + "/30 seeds";
  }
  return "";
}

std::string criterion_llm_robustness() {
  // in-process chat-completions stub with per-fixture behavior
  httplib::Server server;
  std::string reply_text;
  std::chrono::milliseconds delay{0};
  server.Post("/v1/chat/completions",
              [&](const httplib::Request&, httplib::Response& res) {
                if (delay.count() > 0) std::this_thread::sleep_for(delay);
                nlohmann::json reply;
                reply["choices"] = nlohmann::json::array(
                    {nlohmann::json{{"message", {{"role", "assistant"},
                                                 {"content", reply_text}}}}});
                res.set_content(reply.dump(), "application/json");
              });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  const auto shutdown = [&] {
    server.stop();
    server_thread.join();
  };

  LlmEndpointConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  cfg.model_name = "stub";
  cfg.max_retries = 1;
  cfg.timeout = std::chrono::milliseconds(200);
  cfg.api_key_env = "";

  std::vector<NCode> pool;
  for (const char* text : {"33513501", "63225362", "41625214"}) {
    pool.push_back(make_code(text));
  }

  struct Fixture {
    const char* name;
    const char* reply;
    std::chrono::milliseconds delay;
    bool expect_fallback;
  };
  const std::vector<Fixture> fixtures = {
      {"clean", "63225362", std::chrono::milliseconds(0), false},
      {"prose", "Ranking done. The best candidate is 63225362.",
       std::chrono::milliseconds(0), false},
      {"invalid", "99999999", std::chrono::milliseconds(0), true},
      {"timeout", "63225362", std::chrono::milliseconds(1000), true},
  };
  LlmRanker ranker(cfg);
  Rng rng(3);
  double fixture_value = 94.28;
  for (const Fixture& fixture : fixtures) {
    reply_text = fixture.reply;
    delay = fixture.delay;
    // distinct histories, as successive search iterations would present
    const std::vector<HistoryRecord> history = {
        {make_code("03255564"), fixture_value, fixture_value}};
    fixture_value -= 1.0;
    const RankDecision decision = ranker.rank(history, pool, rng);
    bool member = false;
    for (const NCode& candidate : pool) {
      if (candidate == decision.chosen) member = true;
    }
    if (!member) {
      shutdown();
      return std::string(fixture.name) + ": chosen code not in the pool";
    }
    if (decision.fallback_used != fixture.expect_fallback) {
      shutdown();
      return std::string(fixture.name) + ": fallback_used = " +
             (decision.fallback_used ? "true" : "false") + ", expected " +
             (fixture.expect_fallback ? "true" : "false");
    }
    if (!fixture.expect_fallback && decision.chosen.str() != "63225362") {
      shutdown();
      return std::string(fixture.name) + ": picked " + decision.chosen.str();
    }
  }
  shutdown();
  return "";
}

std::string criterion_reproducibility() {
  const fs::path dir = fs::temp_directory_path() / "lmsearch_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto in_dir = [&](const std::string& name) { return (dir / name).string(); };

  {
    std::ofstream space(dir / "space.json");
    space << flat_space({5, 5, 5, 5, 5, 5}, "acc-repro").to_json().dump();
  }
  {
    std::ofstream eval(dir / "eval.json");
    eval << R"({"kind":"synthetic","metric":"score","direction":"maximize",
                "utilities":"option-index","noise_sd":0.5})";
  }
  {
    std::ofstream ranker(dir / "knn.json");
    ranker << R"({"kind":"knn","k":5})";
  }
  const auto run = [&](const std::string& args) {
    const std::string command = std::string(LMSEARCH_CLI_BIN) + " " + args + " >" +
                                in_dir("log.txt") + " 2>&1";
    return std::system(command.c_str());
  };

  if (run("gen-data --space " + in_dir("space.json") + " --evaluator " +
          in_dir("eval.json") +
          " --samples 25 --seed 13 --history-min 5 --history-max 15"
          " --cand-min 5 --cand-max 15 --out " + in_dir("d.jsonl")) != 0) {
    return "gen-data failed: " + read_file(in_dir("log.txt"));
  }
  if (run("gen-data --manifest " + in_dir("d.jsonl.manifest.json") + " --out " +
          in_dir("d2.jsonl")) != 0) {
    return "gen-data rerun failed";
  }
  if (read_file(in_dir("d.jsonl")) != read_file(in_dir("d2.jsonl"))) {
    return "dataset rerun is not byte-identical";
  }
  if (read_file(in_dir("d.jsonl.manifest.json")) !=
      read_file(in_dir("d2.jsonl.manifest.json"))) {
    return "dataset manifest rerun is not byte-identical";
  }

  if (run("search --space " + in_dir("space.json") + " --evaluator " +
          in_dir("eval.json") + " --ranker " + in_dir("knn.json") +
          " --seed 29 --iters 40 --mode mixed --out " + in_dir("t.json")) != 0) {
    return "search failed: " + read_file(in_dir("log.txt"));
  }
  if (run("search --manifest " + in_dir("t.json") + " --out " + in_dir("t2.json")) != 0) {
    return "search rerun failed";
  }
  if (read_file(in_dir("t.json")) != read_file(in_dir("t2.json"))) {
    return "trace rerun is not byte-identical";
  }
  return "";
}

}  // namespace

int main() {
  const std::vector<Check> checks = {
      {1, "codec bijectivity, 1000 random spaces x 100 codes", 5.0,
       criterion_codec_bijectivity},
      {2, "6x5 space cardinality is exactly 15625", 5.0, criterion_cardinality},
      {3, "prompt render byte-identical to golden file", 5.0, criterion_prompt_golden},
      {4, "dataset soundness, 1000 samples re-verified by exhaustive argmax", 60.0,
       criterion_dataset_soundness},
      {5, "pruning statistics over 20004 pruned dimensions", 10.0,
       criterion_pruning_statistics},
      {6, "oracle search reaches the 3x3x3 optimum in 30/30 seeds", 10.0,
       criterion_oracle_completeness},
      {7, "baseline ordering oracle >= RE >= RS, RE > RS sign test p < 0.05", 60.0,
       criterion_baseline_ordering},
      {8, "shuffle ablation direction, surrogate significant, random not", 60.0,
       criterion_shuffle_ablation},
      {9, "mixed-mode random fraction falls below 0.5 by iter 150 in >= 24/30", 120.0,
       criterion_provenance_trend},
      {10, "llm ranker robustness against stub fixtures", 5.0,
       criterion_llm_robustness},
      {11, "gen-data/search manifests rerun byte-identically", 30.0,
       criterion_reproducibility},
  };

  int failures = 0;
  for (const Check& check : checks) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    try {
      detail = check.body();
    } catch (const std::exception& ex) {
      detail = std::string("exception: ") + ex.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (detail.empty() && elapsed > check.time_limit_sec) {
      detail = "exceeded time limit of " + std::to_string(check.time_limit_sec) + " s";
    }
    if (detail.empty()) {
      std::printf("criterion %2d PASS  %-70s [%6.2fs]\n", check.id, check.name.c_str(),
                  elapsed);
    } else {
      ++failures;
      std::printf("criterion %2d FAIL  %-70s [%6.2fs]\n              %s\n", check.id,
                  check.name.c_str(), elapsed, detail.c_str());
    }
    std::fflush(stdout);
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all %zu criteria passed\n", checks.size());
  return 0;
}
