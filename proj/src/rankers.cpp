#include "lmsearch/rankers.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <limits>
#include <sstream>

#ifdef LMSEARCH_HTTPS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "lmsearch/errors.hpp"

namespace lmsearch {

namespace {

void require_candidates(const std::vector<NCode>& candidates) {
  if (candidates.empty()) {
    throw ValidationError("ranker: empty candidate list");
  }
}

}  // namespace

RankDecision rank_random(const std::vector<HistoryRecord>& history,
                         const std::vector<NCode>& candidates, Rng& rng) {
  (void)history;
  require_candidates(candidates);
  RankDecision decision;
  decision.chosen = candidates[rng.uniform_index(candidates.size())];
  return decision;
}

RankDecision rank_oracle(const std::vector<HistoryRecord>& history,
                         const std::vector<NCode>& candidates,
                         Evaluator& evaluator, Rng& rng) {
  (void)history;
  require_candidates(candidates);
  std::vector<std::pair<double, NCode>> scored;
  scored.reserve(candidates.size());
  for (const NCode& candidate : candidates) {
    const ArchRecord record = evaluator.evaluate(candidate, rng);
    scored.emplace_back(record.performance, candidate);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  RankDecision decision;
  decision.chosen = scored.front().second;
  decision.ranking.emplace();
  decision.ranking->reserve(scored.size());
  for (auto& [_, code] : scored) decision.ranking->push_back(std::move(code));
  return decision;
}

std::size_t hamming_distance(const NCode& a, const NCode& b) {
  std::size_t distance = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.digit(i) != b.digit(i)) ++distance;
  }
  return distance;
}

RankDecision rank_knn_surrogate(const std::vector<HistoryRecord>& history,
                                const std::vector<NCode>& candidates, int k) {
  require_candidates(candidates);
  if (history.empty()) {
    throw ValidationError("rank_knn_surrogate: empty history (fall back to rank_random)");
  }
  if (k < 1) throw ValidationError("rank_knn_surrogate: k must be >= 1");

  struct Scored {
    double prediction;
    double mean_distance;
    NCode code;
  };
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (const NCode& candidate : candidates) {
    std::vector<std::pair<std::size_t, double>> neighbors;  // (distance, canonical)
    neighbors.reserve(history.size());
    for (const HistoryRecord& record : history) {
      neighbors.emplace_back(hamming_distance(candidate, record.code), record.canonical);
    }
    std::sort(neighbors.begin(), neighbors.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    // include everything tied with the k-th nearest distance
    const std::size_t kth =
        std::min<std::size_t>(static_cast<std::size_t>(k), neighbors.size()) - 1;
    const std::size_t cutoff = neighbors[kth].first;
    double sum = 0.0;
    double distance_sum = 0.0;
    std::size_t included = 0;
    for (const auto& [distance, canonical] : neighbors) {
      if (distance > cutoff) break;
      sum += canonical;
      distance_sum += static_cast<double>(distance);
      ++included;
    }
    scored.push_back({sum / static_cast<double>(included),
                      distance_sum / static_cast<double>(included), candidate});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.prediction != b.prediction) return a.prediction > b.prediction;
    if (a.mean_distance != b.mean_distance) return a.mean_distance < b.mean_distance;
    return a.code < b.code;
  });
  RankDecision decision;
  decision.chosen = scored.front().code;
  decision.ranking.emplace();
  decision.ranking->reserve(scored.size());
  for (auto& entry : scored) decision.ranking->push_back(std::move(entry.code));
  return decision;
}

std::optional<NCode> parse_reply_choice(const std::string& reply,
                                        const std::vector<NCode>& candidates) {
  std::unordered_map<std::string, const NCode*> by_text;
  by_text.reserve(candidates.size());
  for (const NCode& candidate : candidates) {
    by_text.emplace(candidate.str(), &candidate);
  }
  std::istringstream stream(reply);
  std::string token;
  while (stream >> token) {
    std::size_t begin = 0;
    std::size_t end = token.size();
    while (begin < end && !std::isalnum(static_cast<unsigned char>(token[begin]))) ++begin;
    while (end > begin && !std::isalnum(static_cast<unsigned char>(token[end - 1]))) --end;
    if (begin >= end) continue;
    const auto hit = by_text.find(token.substr(begin, end - begin));
    if (hit != by_text.end()) return *hit->second;
  }
  return std::nullopt;
}

struct LlmRanker::Impl {
  LlmEndpointConfig cfg;
  std::string scheme_host_port;  // e.g. "http://127.0.0.1:8080"
  std::string path_prefix;       // e.g. "/v1"
  std::string api_key;
  std::unordered_map<std::size_t, std::string> reply_cache;  // prompt hash -> reply

  std::string post_chat_completion(const std::string& prompt) {
    httplib::Client client(scheme_host_port);
    const auto seconds = cfg.timeout.count() / 1000;
    const auto micros = (cfg.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
    if (!api_key.empty()) client.set_bearer_token_auth(api_key);

    nlohmann::json body;
    body["model"] = cfg.model_name;
    body["messages"] = nlohmann::json::array(
        {nlohmann::json{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = cfg.temperature;

    const auto result = client.Post(path_prefix + "/chat/completions",
                                    body.dump(), "application/json");
    if (!result) {
      throw EndpointError("chat completion request failed: " +
                          httplib::to_string(result.error()));
    }
    if (result->status < 200 || result->status >= 300) {
      throw EndpointError("chat completion HTTP " + std::to_string(result->status));
    }
    try {
      const auto doc = nlohmann::json::parse(result->body);
      return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw EndpointError(std::string("malformed chat completion reply: ") + ex.what());
    }
  }
};

LlmRanker::LlmRanker(LlmEndpointConfig cfg) : impl_(std::make_unique<Impl>()) {
  if (cfg.max_retries < 0) throw EndpointError("LlmRanker: max_retries must be >= 0");
  if (cfg.timeout.count() <= 0) throw EndpointError("LlmRanker: timeout must be positive");
  if (cfg.temperature < 0.0) throw EndpointError("LlmRanker: temperature must be >= 0");

  const std::size_t scheme_end = cfg.base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw EndpointError("LlmRanker: malformed base_url '" + cfg.base_url +
                        "' (expected http[s]://host[:port][/prefix])");
  }
  const std::string scheme = cfg.base_url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw EndpointError("LlmRanker: unsupported scheme '" + scheme + "'");
  }
#ifndef LMSEARCH_HTTPS
  if (scheme == "https") {
    throw EndpointError("LlmRanker: built without TLS support; use an http endpoint");
  }
#endif
  const std::size_t host_begin = scheme_end + 3;
  const std::size_t path_begin = cfg.base_url.find('/', host_begin);
  const std::string host_port =
      path_begin == std::string::npos ? cfg.base_url.substr(host_begin)
                                      : cfg.base_url.substr(host_begin, path_begin - host_begin);
  if (host_port.empty()) {
    throw EndpointError("LlmRanker: base_url has no host: '" + cfg.base_url + "'");
  }
  impl_->scheme_host_port = scheme + "://" + host_port;
  if (path_begin != std::string::npos) {
    std::string prefix = cfg.base_url.substr(path_begin);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    impl_->path_prefix = prefix;
  }

  if (!cfg.api_key_env.empty()) {
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (key == nullptr) {
      throw EndpointError("LlmRanker: environment variable '" + cfg.api_key_env +
                          "' is not set");
    }
    impl_->api_key = key;
  }
  impl_->cfg = std::move(cfg);
}

LlmRanker::~LlmRanker() = default;
LlmRanker::LlmRanker(LlmRanker&&) noexcept = default;
LlmRanker& LlmRanker::operator=(LlmRanker&&) noexcept = default;

const LlmEndpointConfig& LlmRanker::config() const { return impl_->cfg; }

RankDecision LlmRanker::rank(const std::vector<HistoryRecord>& history,
                             const std::vector<NCode>& candidates, Rng& rng) {
  require_candidates(candidates);
  std::vector<HistoryRecord> sorted = history;
  sort_history(sorted);
  const std::string prompt =
      render_prompt(sorted, candidates, impl_->cfg.prompt_decimals);

  RankDecision decision;
  const std::size_t prompt_hash = std::hash<std::string>{}(prompt);
  const auto cached = impl_->reply_cache.find(prompt_hash);
  if (cached != impl_->reply_cache.end()) {
    // membership anchoring re-validates the cached reply against this pool
    if (auto choice = parse_reply_choice(cached->second, candidates)) {
      decision.chosen = *choice;
      decision.raw_reply = cached->second;
      return decision;
    }
  }

  for (int attempt = 0; attempt <= impl_->cfg.max_retries; ++attempt) {
    std::string reply;
    try {
      reply = impl_->post_chat_completion(prompt);
    } catch (const EndpointError&) {
      continue;  // transport failure; retry
    }
    decision.raw_reply = reply;
    if (auto choice = parse_reply_choice(reply, candidates)) {
      decision.chosen = *choice;
      impl_->reply_cache[prompt_hash] = std::move(reply);
      return decision;
    }
  }
  decision.fallback_used = true;
  decision.chosen = candidates[rng.uniform_index(candidates.size())];
  return decision;
}

RankDecision rank_llm(const std::vector<HistoryRecord>& history,
                      const std::vector<NCode>& candidates,
                      const LlmEndpointConfig& cfg, Rng& rng) {
  LlmRanker ranker(cfg);
  return ranker.rank(history, candidates, rng);
}

}  // namespace lmsearch
