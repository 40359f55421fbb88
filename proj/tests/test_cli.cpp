#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lmsearch/evaluators.hpp"
#include "lmsearch/space.hpp"
#include "test_util.hpp"

using namespace lmsearch;

namespace {

namespace fs = std::filesystem;

struct CommandResult {
  int exit_code = 0;
  std::string output;  // stdout + stderr
};

CommandResult run_cli(const std::string& args) {
  const fs::path out_file =
      fs::temp_directory_path() / ("lmsearch_cli_out_" + std::to_string(::getpid()));
  const std::string command = std::string(LMSEARCH_CLI_BIN) + " " + args + " >" +
                              out_file.string() + " 2>&1";
  const int status = std::system(command.c_str());
  CommandResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  result.output = buffer.str();
  fs::remove(out_file);
  return result;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Working directory with the standard fixture files.
class CliFixture {
 public:
  CliFixture() {
    dir_ = fs::temp_directory_path() / "lmsearch_cli_fixture";
    fs::remove_all(dir_);
    fs::create_directories(dir_);

    nlohmann::json space;
    space["name"] = "cli-6x5";
    space["dimensions"] = nlohmann::json::array();
    for (int d = 0; d < 6; ++d) {
      space["dimensions"].push_back(
          {{"label", "d" + std::to_string(d)},
           {"options", {"o0", "o1", "o2", "o3", "o4"}}});
    }
    write("space.json", space.dump(2));
    write("eval.json",
          R"({"kind":"synthetic","metric":"score","direction":"maximize",
              "utilities":"option-index","noise_sd":0.0})");
    write("eval_noisy.json",
          R"({"kind":"synthetic","metric":"score","direction":"maximize",
              "utilities":"option-index","noise_sd":0.5})");
    write("oracle.json", R"({"kind":"oracle"})");
    write("knn.json", R"({"kind":"knn","k":5})");
  }

  fs::path path(const std::string& name) const { return dir_ / name; }
  std::string arg(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream out(dir_ / name);
    out << content;
  }

 private:
  fs::path dir_;
};

}  // namespace

TEST_CASE("cli: space validate") {
  CliFixture fx;
  const auto ok = run_cli("space validate " + fx.arg("space.json"));
  CHECK(ok.exit_code == 0);
  CHECK(ok.output == "ok, cardinality 15625\n");

  fx.write("wide.json",
           R"({"name":"w","dimensions":[{"label":"d0",
               "options":["0","1","2","3","4","5","6","7","8","9","10"]}]})");
  const auto wide = run_cli("space validate " + fx.arg("wide.json"));
  CHECK(wide.exit_code == 3);
  CHECK(wide.output.find("radix cap") != std::string::npos);

  fx.write("empty.json", R"({"name":"e","dimensions":[]})");
  const auto empty = run_cli("space validate " + fx.arg("empty.json"));
  CHECK(empty.exit_code == 3);

  const auto missing = run_cli("space validate " + fx.arg("nope.json"));
  CHECK(missing.exit_code == 3);
}

TEST_CASE("cli: gen-data writes a verifiable, reproducible dataset") {
  CliFixture fx;
  const std::string common = "gen-data --space " + fx.arg("space.json") +
                             " --evaluator " + fx.arg("eval.json") +
                             " --samples 20 --seed 11 --history-min 5 --history-max 10"
                             " --cand-min 5 --cand-max 10 --out ";
  const auto first = run_cli(common + fx.arg("a.jsonl"));
  REQUIRE(first.exit_code == 0);
  CHECK(first.output.find("wrote 20 samples") != std::string::npos);

  const auto second = run_cli(common + fx.arg("b.jsonl"));
  REQUIRE(second.exit_code == 0);
  CHECK(read_file(fx.path("a.jsonl")) == read_file(fx.path("b.jsonl")));

  // every line parses and has the contract fields
  std::ifstream in(fx.path("a.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    const auto doc = nlohmann::json::parse(line);
    CHECK(doc.contains("instruction"));
    CHECK(doc.contains("output"));
    CHECK(doc["meta"].contains("subspace"));
  }
  CHECK(lines == 20);
}

TEST_CASE("cli: search summary matches the enumerated optimum") {
  CliFixture fx;
  const auto result = run_cli("search --space " + fx.arg("space.json") +
                              " --evaluator " + fx.arg("eval.json") + " --ranker " +
                              fx.arg("oracle.json") +
                              " --seed 4 --iters 60 --mode mixed --out " +
                              fx.arg("trace.json"));
  REQUIRE(result.exit_code == 0);
  CHECK(result.output.find("best 444444 raw 24") != std::string::npos);

  const auto doc = nlohmann::json::parse(read_file(fx.path("trace.json")));
  CHECK(doc["summary"]["best_code"] == "444444");
  CHECK(doc["summary"]["unique_evaluations"] == 70);
  CHECK(doc["manifest"]["command"] == "search");
}

TEST_CASE("cli: llm ranker with unreachable endpoint falls back every iteration") {
  CliFixture fx;
  fx.write("llm.json",
           R"({"kind":"llm","endpoint":{"base_url":"http://127.0.0.1:1",
               "model":"m","max_retries":0,"timeout_sec":0.05,"api_key_env":""}})");
  const auto result = run_cli("search --space " + fx.arg("space.json") +
                              " --evaluator " + fx.arg("eval.json") + " --ranker " +
                              fx.arg("llm.json") +
                              " --seed 4 --iters 5 --out " + fx.arg("llm_trace.json"));
  REQUIRE(result.exit_code == 0);
  const auto doc = nlohmann::json::parse(read_file(fx.path("llm_trace.json")));
  CHECK(doc["summary"]["fallback_count"] == 5);
  for (const auto& iteration : doc["iterations"]) {
    bool member = false;
    for (const auto& candidate : iteration["candidates"]) {
      if (candidate[0] == iteration["chosen"]) member = true;
    }
    CHECK(member);
  }
}

TEST_CASE("cli: baseline over seeds, exhaustive budget finds the optimum") {
  CliFixture fx;
  fx.write("space3.json",
           R"({"name":"tiny","dimensions":[
               {"label":"d0","options":["a","b","c"]},
               {"label":"d1","options":["a","b","c"]},
               {"label":"d2","options":["a","b","c"]}]})");
  for (const std::string algo : {"random", "regevo"}) {
    const auto result =
        run_cli("baseline --space " + fx.arg("space3.json") + " --evaluator " +
                fx.arg("eval.json") + " --algo " + algo +
                " --budget 27 --pop 5 --tournament 2 --seeds 1 --out " +
                fx.arg("bl_" + algo));
    REQUIRE(result.exit_code == 0);
    const auto stats = nlohmann::json::parse(
        read_file(fx.path("bl_" + algo + "/" + algo + "_stats.json")));
    CHECK(stats["final_best_canonical"][0] == 6.0);
  }

  const auto no_seeds =
      run_cli("baseline --space " + fx.arg("space3.json") + " --evaluator " +
              fx.arg("eval.json") + " --algo random --budget 5 --out " + fx.arg("bl_x"));
  CHECK(no_seeds.exit_code == 2);
}

TEST_CASE("cli: ablate-shuffle emits paired stats, single seed warns") {
  CliFixture fx;
  const auto result = run_cli(
      "ablate-shuffle --space " + fx.arg("space.json") + " --evaluator " +
      fx.arg("eval_noisy.json") + " --ranker " + fx.arg("knn.json") +
      " --seeds 1,2,3,4,5 --iters 15 --jobs 2 --out " + fx.arg("ab"));
  REQUIRE(result.exit_code == 0);
  const auto stats = nlohmann::json::parse(read_file(fx.path("ab/ablation_stats.json")));
  CHECK(stats["pairs"].size() == 5);
  CHECK(!stats["sign_test_p"].is_null());
  CHECK(fs::exists(fx.path("ab/unshuffled_seed3.json")));
  CHECK(fs::exists(fx.path("ab/shuffled_seed3.json")));

  const auto single = run_cli(
      "ablate-shuffle --space " + fx.arg("space.json") + " --evaluator " +
      fx.arg("eval.json") + " --ranker " + fx.arg("knn.json") +
      " --seeds 9 --iters 5 --out " + fx.arg("ab1"));
  REQUIRE(single.exit_code == 0);
  CHECK(single.output.find("warning") != std::string::npos);
  const auto stats1 = nlohmann::json::parse(read_file(fx.path("ab1/ablation_stats.json")));
  CHECK(stats1["sign_test_p"].is_null());
}

TEST_CASE("cli: report on one trace and refusal across spaces") {
  CliFixture fx;
  run_cli("search --space " + fx.arg("space.json") + " --evaluator " +
          fx.arg("eval.json") + " --ranker " + fx.arg("oracle.json") +
          " --seed 1 --iters 10 --out " + fx.arg("r1.json"));
  const auto report =
      run_cli("report " + fx.arg("r1.json") + " --out " + fx.arg("rep"));
  REQUIRE(report.exit_code == 0);
  std::istringstream csv(read_file(fx.path("rep/best_so_far.csv")));
  std::string header;
  std::getline(csv, header);
  CHECK(std::count(header.begin(), header.end(), ',') == 1);  // one trace column

  fx.write("other_space.json",
           R"({"name":"other","dimensions":[{"label":"d0","options":["x","y"]}]})");
  fx.write("other_eval.json",
           R"({"kind":"synthetic","metric":"score","direction":"maximize",
               "utilities":"option-index"})");
  run_cli("search --space " + fx.arg("other_space.json") + " --evaluator " +
          fx.arg("other_eval.json") + " --seed 1 --iters 1 --init 1 --out " +
          fx.arg("r2.json"));
  const auto refuse = run_cli("report " + fx.arg("r1.json") + " " + fx.arg("r2.json") +
                              " --out " + fx.arg("rep2"));
  CHECK(refuse.exit_code == 3);
  CHECK(refuse.output.find("mix spaces") != std::string::npos);
}

TEST_CASE("cli: config file keys apply, flags override them") {
  CliFixture fx;
  fx.write("search_cfg.json",
           R"({"n_init":4,"n_candidates":6,"n_iters":3,"candidate_mode":"mixed"})");
  const auto result = run_cli("search --space " + fx.arg("space.json") +
                              " --evaluator " + fx.arg("eval.json") + " --ranker " +
                              fx.arg("oracle.json") + " --config " +
                              fx.arg("search_cfg.json") +
                              " --seed 2 --iters 7 --out " + fx.arg("cfg_trace.json"));
  REQUIRE(result.exit_code == 0);
  const auto doc = nlohmann::json::parse(read_file(fx.path("cfg_trace.json")));
  CHECK(doc["config"]["n_init"] == 4);            // from the config file
  CHECK(doc["config"]["n_candidates"] == 6);      // from the config file
  CHECK(doc["config"]["candidate_mode"] == "mixed");
  CHECK(doc["config"]["n_iters"] == 7);           // flag wins over the file
  CHECK(doc["iterations"].size() == 7);
}

TEST_CASE("cli: baseline --jobs does not change per-seed results") {
  CliFixture fx;
  for (const std::string jobs : {"1", "3"}) {
    const auto result = run_cli(
        "baseline --space " + fx.arg("space.json") + " --evaluator " +
        fx.arg("eval_noisy.json") + " --algo regevo --budget 60 --pop 10"
        " --tournament 3 --seeds 5,6,7 --jobs " + jobs + " --out " +
        fx.arg("bl_j" + jobs));
    REQUIRE(result.exit_code == 0);
  }
  // identical up to the output directory recorded in the manifest
  const auto normalized = [&](const std::string& rel) {
    auto doc = nlohmann::json::parse(read_file(fx.path(rel)));
    doc["manifest"].erase("out");
    return doc;
  };
  for (const std::string seed : {"5", "6", "7"}) {
    CHECK(normalized("bl_j1/regevo_seed" + seed + ".json") ==
          normalized("bl_j3/regevo_seed" + seed + ".json"));
  }
  CHECK(normalized("bl_j1/regevo_stats.json") ==
        normalized("bl_j3/regevo_stats.json"));
}

TEST_CASE("cli: manifest reruns reproduce artifacts byte-identically") {
  CliFixture fx;
  const std::string gen = "gen-data --space " + fx.arg("space.json") + " --evaluator " +
                          fx.arg("eval.json") +
                          " --samples 8 --seed 21 --history-min 4 --history-max 8"
                          " --cand-min 4 --cand-max 8 --out ";
  REQUIRE(run_cli(gen + fx.arg("m.jsonl")).exit_code == 0);
  REQUIRE(run_cli("gen-data --manifest " + fx.arg("m.jsonl.manifest.json") +
                  " --out " + fx.arg("m2.jsonl"))
              .exit_code == 0);
  CHECK(read_file(fx.path("m.jsonl")) == read_file(fx.path("m2.jsonl")));

  const std::string search = "search --space " + fx.arg("space.json") +
                             " --evaluator " + fx.arg("eval_noisy.json") +
                             " --ranker " + fx.arg("knn.json") +
                             " --seed 33 --iters 20 --mode mixed --out ";
  REQUIRE(run_cli(search + fx.arg("t.json")).exit_code == 0);
  REQUIRE(run_cli("search --manifest " + fx.arg("t.json") + " --out " +
                  fx.arg("t2.json"))
              .exit_code == 0);
  CHECK(read_file(fx.path("t.json")) == read_file(fx.path("t2.json")));
}
