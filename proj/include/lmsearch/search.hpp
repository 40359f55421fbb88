#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lmsearch/evaluators.hpp"
#include "lmsearch/rankers.hpp"
#include "lmsearch/rng.hpp"
#include "lmsearch/space.hpp"

namespace lmsearch {

enum class CandidateMode { kRandom, kMixed };

const char* to_string(CandidateMode mode);

struct SearchConfig {
  int n_init = 10;        // initial uniform-random evaluations
  int n_candidates = 10;  // pool size per iteration
  int n_iters = 200;      // ranker decisions
  CandidateMode candidate_mode = CandidateMode::kRandom;
  std::optional<int> history_window;  // max records shown to the ranker
  std::uint64_t seed = 0;

  void validate() const;
};

/// A ranking policy plus a stable name for trace headers.
struct NamedRanker {
  std::string name;
  RankerFn fn;
};

struct IterationLog {
  std::vector<std::pair<NCode, Provenance>> candidates;
  RankDecision decision;
  Provenance chosen_provenance = Provenance::kRandom;
  ArchRecord evaluated;
  double best_so_far = 0.0;  // canonical
};

/// Full log of one run. best_so_far is non-decreasing; the chosen code of
/// every iteration is a member of that iteration's pool; no code is evaluated
/// twice within a run.
struct SearchTrace {
  nlohmann::ordered_json config_echo;
  nlohmann::ordered_json manifest;  // attached by the CLI; may be null
  std::vector<ArchRecord> seed_records;
  std::vector<IterationLog> iterations;
  bool exhausted_early = false;  // space ran out of novel codes (flagged success)
  bool clamped_budget = false;
  std::optional<std::string> abort_error;  // evaluator failure, partial trace kept
  std::size_t unique_evaluations = 0;
  std::size_t fallback_count = 0;

  const ArchRecord* best_record() const;
  nlohmann::ordered_json to_json() const;
};

/// Iterative ranked search: n_init random seed evaluations, then per
/// iteration a pool of novel candidates (uniform in random mode; half
/// uniform, half tournament-mutated history members in mixed mode), one
/// ranker decision, one evaluation, history update.
SearchTrace run_search(const SearchSpace& space, Evaluator& evaluator,
                       const NamedRanker& ranker, const SearchConfig& cfg);

/// Identical loop, but each iteration presents the ranker a history whose
/// performances have been randomly permuted; true values still drive the
/// trace bookkeeping. Permutations draw from an independent stream, so a
/// paired unshuffled run sees identical candidates.
SearchTrace shuffled_history_search(const SearchSpace& space, Evaluator& evaluator,
                                    const NamedRanker& ranker, const SearchConfig& cfg);

/// Budget distinct uniform-random evaluations; budget beyond the space
/// cardinality is clamped with a flag.
SearchTrace run_random_search(const SearchSpace& space, Evaluator& evaluator,
                              int budget, Rng& rng);

/// Aging evolution: pop_size random evaluated codes, then repeatedly mutate
/// the best of `tournament` uniform draws, evaluate the child, append it and
/// retire the oldest member, until budget evaluations. Evaluations are novel
/// codes only (a colliding mutation is redrawn), so budget = cardinality
/// covers the whole space.
SearchTrace run_regularized_evolution(const SearchSpace& space, Evaluator& evaluator,
                                      int budget, int pop_size, int tournament,
                                      Rng& rng);

/// Sliding-window fraction of chosen candidates with provenance random, for
/// mixed-mode traces; one (iteration, fraction) point per window position.
std::vector<std::pair<int, double>> provenance_ratio(const SearchTrace& trace,
                                                     int window);

/// Resamples one uniformly chosen multi-option dimension to a different
/// option; single-option dimensions are excluded from the site draw.
NCode mutate_single_site(const SearchSpace& space, const NCode& parent, Rng& rng);

/// True when at least one dimension has two or more options.
bool space_mutable(const SearchSpace& space);

}  // namespace lmsearch
