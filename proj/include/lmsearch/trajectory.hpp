#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmsearch/evaluators.hpp"
#include "lmsearch/pruner.hpp"
#include "lmsearch/rng.hpp"
#include "lmsearch/space.hpp"

namespace lmsearch {

/// One evaluated history entry as presented to a ranker or a prompt.
struct HistoryRecord {
  NCode code;
  double raw = 0.0;
  double canonical = 0.0;
};

/// One instruction-tuning example: evaluated history, unevaluated candidate
/// pool, and the true-best candidate as the answer.
struct TrajectorySample {
  std::vector<HistoryRecord> history;  // canonical performance, descending
  std::vector<NCode> candidates;       // pairwise distinct, disjoint from history
  NCode answer;                        // member of candidates
  nlohmann::ordered_json subspace_provenance;
  std::uint64_t seed = 0;
  bool clamped = false;  // requested sizes exceeded the subspace
};

struct GenConfig {
  int n_history_min = 100;
  int n_history_max = 200;
  int n_candidates_min = 100;
  int n_candidates_max = 200;
  std::uint64_t n_samples = 0;
  int performance_decimals = 2;

  void validate() const;
};

/// Prunes one subspace at the default probabilities, draws disjoint history
/// and candidate sets from it (counts uniform in their ranges, clamped to the
/// subspace cardinality), evaluates everything, and picks the answer by
/// maximum canonical performance with lexicographic tie-break.
TrajectorySample generate_sample(const SearchSpace& space, Evaluator& evaluator,
                                 const GenConfig& cfg, Rng& rng);

/// Instruction prompt: the fixed instruction line, a History block with one
/// `NCode: <code>, accuracy: <value>;` line per record, and a Candidate block
/// with one code per line. Exact whitespace is pinned by the golden file in
/// tests/data. Raw values render at `decimals` places, labelled `accuracy:`
/// regardless of metric.
std::string render_prompt(const std::vector<HistoryRecord>& history,
                          const std::vector<NCode>& candidates, int decimals = 2);
std::string render_prompt(const TrajectorySample& sample, int decimals = 2);

/// The answer code's canonical text, nothing else.
std::string expected_output(const TrajectorySample& sample);

/// Writes cfg.n_samples JSON Lines records {instruction, output, meta} to
/// out_path; returns the count. Bit-reproducible for a given (space, cfg,
/// seed): per-sample streams derive from the rng's construction seed.
/// `clamped_count`, when given, receives the number of samples whose sizes
/// were clamped to their subspace cardinality.
std::uint64_t generate_dataset(const SearchSpace& space, Evaluator& evaluator,
                               const GenConfig& cfg, Rng& rng,
                               const std::string& out_path,
                               std::uint64_t* clamped_count = nullptr);

/// Copy with the history performances randomly permuted among the codes
/// (candidates and answer untouched); the descending-order invariant is
/// re-established afterwards. Requires at least two history records.
TrajectorySample shuffle_mapping(const TrajectorySample& sample, Rng& rng);

/// Sorts canonical-descending, code text ascending on ties.
void sort_history(std::vector<HistoryRecord>& history);

/// Applies a uniform random permutation to the (raw, canonical) pairs of the
/// records, leaving codes in place. Shared by shuffle_mapping and the
/// shuffled-history search ablation.
void permute_performances(std::vector<HistoryRecord>& history, Rng& rng);

}  // namespace lmsearch
