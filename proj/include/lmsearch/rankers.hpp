#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lmsearch/evaluators.hpp"
#include "lmsearch/rng.hpp"
#include "lmsearch/space.hpp"
#include "lmsearch/trajectory.hpp"

namespace lmsearch {

/// Outcome of one ranking decision. `chosen` is always a member of the
/// presented candidate list, including every fallback path.
struct RankDecision {
  NCode chosen;
  std::optional<std::vector<NCode>> ranking;
  bool fallback_used = false;
  std::optional<std::string> raw_reply;
};

struct LlmEndpointConfig {
  std::string base_url;
  std::string model_name;
  double temperature = 0.0;
  int max_retries = 3;
  std::chrono::milliseconds timeout{30'000};
  std::string api_key_env = "LM_SEARCHER_API_KEY";
  int prompt_decimals = 2;
};

/// Uniform choice; ignores history.
RankDecision rank_random(const std::vector<HistoryRecord>& history,
                         const std::vector<NCode>& candidates, Rng& rng);

/// Perfect ranker: asks the evaluator for every candidate's canonical value
/// and returns the full ordering. Test stand-in, and the upper-bound policy
/// for the harness.
RankDecision rank_oracle(const std::vector<HistoryRecord>& history,
                         const std::vector<NCode>& candidates,
                         Evaluator& evaluator, Rng& rng);

/// Offline history-conditioned ranker: predicts each candidate as the mean
/// canonical performance of its k nearest history codes under Hamming
/// distance (distance ties admit all equidistant records). Prediction ties
/// break by smaller mean neighbor distance, then lexicographic code text.
RankDecision rank_knn_surrogate(const std::vector<HistoryRecord>& history,
                                const std::vector<NCode>& candidates, int k = 5);

std::size_t hamming_distance(const NCode& a, const NCode& b);

/// Scans whitespace-delimited tokens of a reply, strips surrounding
/// punctuation, and returns the first token that names a candidate.
std::optional<NCode> parse_reply_choice(const std::string& reply,
                                        const std::vector<NCode>& candidates);

/// Chat-completions ranker. Renders the standard prompt, POSTs it to
/// {base_url}/chat/completions as a single user message, and anchors reply
/// parsing on candidate membership. Transport or parse failures retry up to
/// max_retries; on exhaustion the decision falls back to a uniform random
/// candidate with fallback_used set.
class LlmRanker {
 public:
  /// Validates the config (URL shape, API key env var) and fails fast.
  explicit LlmRanker(LlmEndpointConfig cfg);
  ~LlmRanker();
  LlmRanker(LlmRanker&&) noexcept;
  LlmRanker& operator=(LlmRanker&&) noexcept;

  RankDecision rank(const std::vector<HistoryRecord>& history,
                    const std::vector<NCode>& candidates, Rng& rng);

  const LlmEndpointConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

RankDecision rank_llm(const std::vector<HistoryRecord>& history,
                      const std::vector<NCode>& candidates,
                      const LlmEndpointConfig& cfg, Rng& rng);

/// Policy signature used by the search loop.
using RankerFn = std::function<RankDecision(const std::vector<HistoryRecord>&,
                                            const std::vector<NCode>&, Rng&)>;

}  // namespace lmsearch
