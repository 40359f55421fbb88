#include "lmsearch/search.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "lmsearch/errors.hpp"
#include "lmsearch/pruner.hpp"
#include "lmsearch/trajectory.hpp"
#include "lmsearch/version.hpp"

namespace lmsearch {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566666c65ULL;  // "shuffle"
constexpr std::uint64_t kEnumerableCap = 1u << 22;
constexpr int kDefaultEvolvedTournament = 10;

NCode uniform_code(const SearchSpace& space, Rng& rng) {
  std::vector<std::uint8_t> digits(space.dimension_count());
  for (std::size_t d = 0; d < digits.size(); ++d) {
    digits[d] = static_cast<std::uint8_t>(rng.uniform_index(space.radix(d)));
  }
  return NCode(std::move(digits));
}

/// Draws codes that have not been evaluated yet. Rejection sampling first;
/// when it stalls on a small, nearly-exhausted space the unused remainder is
/// enumerated instead.
class NoveltyDraw {
 public:
  explicit NoveltyDraw(const SearchSpace& space) : space_(space) {
    const ExactCount count = space_cardinality(space);
    if (count.less_equal(kEnumerableCap)) total_ = count.as_u64();
  }

  bool exhausted() const { return total_ && used_.size() >= *total_; }

  void mark_used(const NCode& code) { used_.insert(code); }

  bool draw_would_accept(const NCode& code) const { return used_.count(code) == 0; }

  std::optional<NCode> draw(Rng& rng, const std::set<NCode>& also_exclude) {
    if (total_ && used_.size() + also_exclude.size() >= *total_) {
      return draw_from_remainder(rng, also_exclude);
    }
    for (int attempt = 0; attempt < 200; ++attempt) {
      NCode code = uniform_code(space_, rng);
      if (used_.count(code) == 0 && also_exclude.count(code) == 0) return code;
    }
    if (total_) return draw_from_remainder(rng, also_exclude);
    // astronomically unlikely: a non-enumerable space rejecting 200 draws
    for (int attempt = 0; attempt < 10'000; ++attempt) {
      NCode code = uniform_code(space_, rng);
      if (used_.count(code) == 0 && also_exclude.count(code) == 0) return code;
    }
    throw Error("novelty draw stalled on a non-enumerable space");
  }

 private:
  std::optional<NCode> draw_from_remainder(Rng& rng,
                                           const std::set<NCode>& also_exclude) {
    std::vector<NCode> remainder;
    std::vector<std::uint8_t> digits(space_.dimension_count(), 0);
    for (std::uint64_t n = 0; n < *total_; ++n) {
      NCode code(digits);
      if (used_.count(code) == 0 && also_exclude.count(code) == 0) {
        remainder.push_back(std::move(code));
      }
      for (std::size_t d = space_.dimension_count(); d-- > 0;) {
        if (++digits[d] < space_.radix(d)) break;
        digits[d] = 0;
      }
    }
    if (remainder.empty()) return std::nullopt;
    return remainder[rng.uniform_index(remainder.size())];
  }

  const SearchSpace& space_;
  std::optional<std::uint64_t> total_;
  std::set<NCode> used_;
};

const HistoryRecord& tournament_select(const std::vector<HistoryRecord>& history,
                                       int tournament, Rng& rng) {
  const HistoryRecord* best = nullptr;
  for (int t = 0; t < tournament; ++t) {
    const HistoryRecord& contender = history[rng.uniform_index(history.size())];
    if (best == nullptr || contender.canonical > best->canonical) best = &contender;
  }
  return *best;
}

/// history_window rule: keep the top-performing half and the most recent half
/// of the allowed records, in chronological order.
std::vector<HistoryRecord> windowed_view(const std::vector<HistoryRecord>& history,
                                         std::optional<int> window) {
  if (!window || history.size() <= static_cast<std::size_t>(*window)) return history;
  const int top_n = (*window + 1) / 2;
  const int recent_n = *window - top_n;

  std::vector<std::size_t> order(history.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (history[a].canonical != history[b].canonical) {
      return history[a].canonical > history[b].canonical;
    }
    return a > b;  // prefer the more recent record among ties
  });
  std::set<std::size_t> keep(order.begin(), order.begin() + top_n);
  int taken = 0;
  for (std::size_t i = history.size(); i-- > 0 && taken < recent_n;) {
    if (keep.insert(i).second) ++taken;
  }
  std::vector<HistoryRecord> view;
  view.reserve(keep.size());
  for (std::size_t i : keep) view.push_back(history[i]);  // std::set is ascending
  return view;
}

nlohmann::ordered_json base_config_echo(const SearchSpace& space,
                                        const Evaluator& evaluator,
                                        const std::string& algo) {
  nlohmann::ordered_json doc;
  doc["toolkit_version"] = kVersion;
  doc["algo"] = algo;
  doc["space"] = space.name();
  doc["cardinality"] = space_cardinality(space).str();
  doc["evaluator"] = evaluator.spec_json();
  return doc;
}

SearchTrace run_search_impl(const SearchSpace& space, Evaluator& evaluator,
                            const NamedRanker& ranker, const SearchConfig& cfg,
                            bool shuffle_history) {
  cfg.validate();
  if (cfg.candidate_mode == CandidateMode::kMixed && !space_mutable(space)) {
    throw ValidationError("mixed candidate mode: space has no mutable dimension");
  }

  SearchTrace trace;
  trace.config_echo =
      base_config_echo(space, evaluator, shuffle_history ? "shuffled_search" : "search");
  trace.config_echo["ranker"] = ranker.name;
  trace.config_echo["seed"] = cfg.seed;
  trace.config_echo["n_init"] = cfg.n_init;
  trace.config_echo["n_candidates"] = cfg.n_candidates;
  trace.config_echo["n_iters"] = cfg.n_iters;
  trace.config_echo["candidate_mode"] = to_string(cfg.candidate_mode);
  if (cfg.history_window) trace.config_echo["history_window"] = *cfg.history_window;

  const std::size_t eval_baseline = evaluator.unique_evaluations();
  Rng rng(cfg.seed);
  Rng shuffle_rng = rng.derive(kShuffleStream);
  NoveltyDraw novelty(space);
  std::vector<HistoryRecord> history;
  double best = 0.0;

  const auto record_history = [&](const ArchRecord& record, bool is_first) {
    history.push_back({record.code,
                       record.raw_metrics.at(evaluator.metric_name()),
                       record.performance});
    if (is_first || record.performance > best) best = record.performance;
  };

  for (int i = 0; i < cfg.n_init; ++i) {
    auto code = novelty.draw(rng, {});
    if (!code) {
      trace.exhausted_early = true;
      break;
    }
    novelty.mark_used(*code);
    try {
      const ArchRecord record = evaluator.evaluate(*code, rng, Provenance::kSeed);
      trace.seed_records.push_back(record);
      record_history(record, history.empty());
    } catch (const EvaluationError& ex) {
      trace.abort_error = ex.what();
      trace.unique_evaluations = evaluator.unique_evaluations() - eval_baseline;
      return trace;
    }
  }

  for (int iter = 0; iter < cfg.n_iters && !trace.exhausted_early; ++iter) {
    // candidate pool of novel codes
    std::vector<std::pair<NCode, Provenance>> pool;
    std::set<NCode> pool_codes;
    const int n_random = cfg.candidate_mode == CandidateMode::kMixed
                             ? (cfg.n_candidates + 1) / 2
                             : cfg.n_candidates;
    const int n_evolved = cfg.n_candidates - n_random;
    for (int i = 0; i < n_random; ++i) {
      auto code = novelty.draw(rng, pool_codes);
      if (!code) break;
      pool_codes.insert(*code);
      pool.emplace_back(std::move(*code), Provenance::kRandom);
    }
    for (int i = 0; i < n_evolved; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
        const HistoryRecord& parent = tournament_select(
            history,
            std::min<int>(kDefaultEvolvedTournament, static_cast<int>(history.size())),
            rng);
        NCode child = mutate_single_site(space, parent.code, rng);
        if (pool_codes.count(child) == 0 && novelty.draw_would_accept(child)) {
          pool_codes.insert(child);
          pool.emplace_back(std::move(child), Provenance::kEvolved);
          placed = true;
        }
      }
      if (!placed) {
        // nearly exhausted neighborhood; fill the slot with a random novel code
        auto code = novelty.draw(rng, pool_codes);
        if (!code) break;
        pool_codes.insert(*code);
        pool.emplace_back(std::move(*code), Provenance::kRandom);
      }
    }
    if (pool.empty()) {
      trace.exhausted_early = true;
      break;
    }
    rng.shuffle(pool);

    std::vector<NCode> pool_only_codes;
    pool_only_codes.reserve(pool.size());
    for (const auto& [code, _] : pool) pool_only_codes.push_back(code);

    std::vector<HistoryRecord> view = windowed_view(history, cfg.history_window);
    if (shuffle_history) permute_performances(view, shuffle_rng);

    RankDecision decision = ranker.fn(view, pool_only_codes, rng);
    Provenance chosen_provenance = Provenance::kRandom;
    bool member = false;
    for (const auto& [code, provenance] : pool) {
      if (code == decision.chosen) {
        chosen_provenance = provenance;
        member = true;
        break;
      }
    }
    if (!member) {
      throw Error("ranker '" + ranker.name + "' chose a code outside the pool: " +
                  decision.chosen.str());
    }
    if (decision.fallback_used) ++trace.fallback_count;

    novelty.mark_used(decision.chosen);
    IterationLog log;
    try {
      log.evaluated = evaluator.evaluate(decision.chosen, rng, chosen_provenance);
    } catch (const EvaluationError& ex) {
      trace.abort_error = ex.what();
      break;
    }
    record_history(log.evaluated, history.empty());
    log.candidates = std::move(pool);
    log.decision = std::move(decision);
    log.chosen_provenance = chosen_provenance;
    log.best_so_far = best;
    trace.iterations.push_back(std::move(log));
  }

  trace.unique_evaluations = evaluator.unique_evaluations() - eval_baseline;
  return trace;
}

}  // namespace

const char* to_string(CandidateMode mode) {
  return mode == CandidateMode::kRandom ? "random" : "mixed";
}

void SearchConfig::validate() const {
  if (n_init < 1) throw ValidationError("SearchConfig: n_init must be >= 1");
  if (n_candidates < 1) throw ValidationError("SearchConfig: n_candidates must be >= 1");
  if (n_iters < 0) throw ValidationError("SearchConfig: n_iters must be >= 0");
  if (history_window && *history_window < 1) {
    throw ValidationError("SearchConfig: history_window must be >= 1");
  }
}

bool space_mutable(const SearchSpace& space) {
  for (const Dimension& dim : space.dimensions()) {
    if (dim.options.size() >= 2) return true;
  }
  return false;
}

NCode mutate_single_site(const SearchSpace& space, const NCode& parent, Rng& rng) {
  std::vector<std::size_t> sites;
  for (std::size_t d = 0; d < space.dimension_count(); ++d) {
    if (space.radix(d) >= 2) sites.push_back(d);
  }
  if (sites.empty()) {
    throw ValidationError("mutate_single_site: space has no mutable dimension");
  }
  const std::size_t site = sites[rng.uniform_index(sites.size())];
  const std::size_t radix = space.radix(site);
  std::size_t option = rng.uniform_index(radix - 1);
  if (option >= parent.digit(site)) ++option;  // skip the current option
  std::vector<std::uint8_t> digits = parent.digits();
  digits[site] = static_cast<std::uint8_t>(option);
  return NCode(std::move(digits));
}

const ArchRecord* SearchTrace::best_record() const {
  const ArchRecord* best = nullptr;
  for (const ArchRecord& record : seed_records) {
    if (best == nullptr || record.performance > best->performance) best = &record;
  }
  for (const IterationLog& log : iterations) {
    if (best == nullptr || log.evaluated.performance > best->performance) {
      best = &log.evaluated;
    }
  }
  return best;
}

nlohmann::ordered_json SearchTrace::to_json() const {
  nlohmann::ordered_json doc;
  if (!manifest.is_null()) doc["manifest"] = manifest;
  doc["config"] = config_echo;

  auto record_json = [](const ArchRecord& record) {
    nlohmann::ordered_json entry;
    entry["code"] = record.code.str();
    entry["provenance"] = to_string(record.provenance);
    for (const auto& [metric, raw] : record.raw_metrics) entry["raw"] = raw;
    entry["canonical"] = record.performance;
    return entry;
  };

  doc["seed_history"] = nlohmann::ordered_json::array();
  for (const ArchRecord& record : seed_records) {
    doc["seed_history"].push_back(record_json(record));
  }

  doc["iterations"] = nlohmann::ordered_json::array();
  for (const IterationLog& log : iterations) {
    nlohmann::ordered_json entry;
    entry["candidates"] = nlohmann::ordered_json::array();
    for (const auto& [code, provenance] : log.candidates) {
      entry["candidates"].push_back(
          nlohmann::ordered_json::array({code.str(), to_string(provenance)}));
    }
    entry["chosen"] = log.decision.chosen.str();
    entry["provenance"] = to_string(log.chosen_provenance);
    entry["fallback_used"] = log.decision.fallback_used;
    entry["evaluated"] = record_json(log.evaluated);
    entry["best_so_far"] = log.best_so_far;
    doc["iterations"].push_back(std::move(entry));
  }

  nlohmann::ordered_json summary;
  const ArchRecord* best = best_record();
  if (best != nullptr) {
    summary["best_code"] = best->code.str();
    for (const auto& [metric, raw] : best->raw_metrics) summary["best_raw"] = raw;
    summary["best_canonical"] = best->performance;
  }
  summary["unique_evaluations"] = unique_evaluations;
  summary["fallback_count"] = fallback_count;
  summary["exhausted_early"] = exhausted_early;
  if (clamped_budget) summary["clamped_budget"] = true;
  if (abort_error) summary["abort_error"] = *abort_error;
  doc["summary"] = std::move(summary);
  return doc;
}

SearchTrace run_search(const SearchSpace& space, Evaluator& evaluator,
                       const NamedRanker& ranker, const SearchConfig& cfg) {
  return run_search_impl(space, evaluator, ranker, cfg, false);
}

SearchTrace shuffled_history_search(const SearchSpace& space, Evaluator& evaluator,
                                    const NamedRanker& ranker, const SearchConfig& cfg) {
  return run_search_impl(space, evaluator, ranker, cfg, true);
}

SearchTrace run_random_search(const SearchSpace& space, Evaluator& evaluator,
                              int budget, Rng& rng) {
  if (budget < 1) throw ValidationError("run_random_search: budget must be >= 1");
  SearchTrace trace;
  trace.config_echo = base_config_echo(space, evaluator, "random_search");
  trace.config_echo["seed"] = rng.seed();
  const ExactCount cardinality = space_cardinality(space);
  if (cardinality.less_equal(static_cast<std::uint64_t>(budget)) &&
      !(cardinality == static_cast<std::uint64_t>(budget))) {
    budget = static_cast<int>(cardinality.as_u64());
    trace.clamped_budget = true;
  }
  trace.config_echo["budget"] = budget;

  const std::size_t eval_baseline = evaluator.unique_evaluations();
  NoveltyDraw novelty(space);
  double best = 0.0;
  for (int i = 0; i < budget; ++i) {
    auto code = novelty.draw(rng, {});
    if (!code) {
      trace.exhausted_early = true;
      break;
    }
    novelty.mark_used(*code);
    IterationLog log;
    log.evaluated = evaluator.evaluate(*code, rng, Provenance::kRandom);
    log.candidates.emplace_back(*code, Provenance::kRandom);
    log.decision.chosen = *code;
    log.chosen_provenance = Provenance::kRandom;
    best = (i == 0) ? log.evaluated.performance
                    : std::max(best, log.evaluated.performance);
    log.best_so_far = best;
    trace.iterations.push_back(std::move(log));
  }
  trace.unique_evaluations = evaluator.unique_evaluations() - eval_baseline;
  return trace;
}

SearchTrace run_regularized_evolution(const SearchSpace& space, Evaluator& evaluator,
                                      int budget, int pop_size, int tournament,
                                      Rng& rng) {
  if (budget < pop_size || pop_size < tournament || tournament < 1) {
    throw ValidationError(
        "run_regularized_evolution: require budget >= pop_size >= tournament >= 1");
  }
  if (!space_mutable(space)) {
    throw ValidationError(
        "run_regularized_evolution: every dimension has a single option, "
        "no mutation possible");
  }
  SearchTrace trace;
  trace.config_echo = base_config_echo(space, evaluator, "regularized_evolution");
  trace.config_echo["seed"] = rng.seed();
  trace.config_echo["pop_size"] = pop_size;
  trace.config_echo["tournament"] = tournament;
  const ExactCount cardinality = space_cardinality(space);
  if (cardinality.less_equal(static_cast<std::uint64_t>(budget)) &&
      !(cardinality == static_cast<std::uint64_t>(budget))) {
    budget = static_cast<int>(cardinality.as_u64());
    trace.clamped_budget = true;
  }
  trace.config_echo["budget"] = budget;

  const std::size_t eval_baseline = evaluator.unique_evaluations();
  NoveltyDraw novelty(space);
  std::deque<ArchRecord> population;
  double best = 0.0;
  int evaluations = 0;

  const auto log_evaluation = [&](const ArchRecord& record) {
    IterationLog log;
    log.evaluated = record;
    log.candidates.emplace_back(record.code, record.provenance);
    log.decision.chosen = record.code;
    log.chosen_provenance = record.provenance;
    best = (evaluations == 0) ? record.performance : std::max(best, record.performance);
    log.best_so_far = best;
    trace.iterations.push_back(std::move(log));
    ++evaluations;
  };

  for (int i = 0; i < std::min(pop_size, budget); ++i) {
    auto code = novelty.draw(rng, {});
    if (!code) {
      trace.exhausted_early = true;
      break;
    }
    novelty.mark_used(*code);
    const ArchRecord record = evaluator.evaluate(*code, rng, Provenance::kRandom);
    population.push_back(record);
    log_evaluation(record);
  }

  while (evaluations < budget && !trace.exhausted_early) {
    std::optional<NCode> child;
    for (int attempt = 0; attempt < 64 && !child; ++attempt) {
      const ArchRecord* parent = nullptr;
      for (int t = 0; t < tournament; ++t) {
        const ArchRecord& contender = population[rng.uniform_index(population.size())];
        if (parent == nullptr || contender.performance > parent->performance) {
          parent = &contender;
        }
      }
      NCode mutated = mutate_single_site(space, parent->code, rng);
      if (novelty.draw_would_accept(mutated)) child = std::move(mutated);
    }
    if (!child) {
      child = novelty.draw(rng, {});  // neighborhood exhausted; novel random code
      if (!child) {
        trace.exhausted_early = true;
        break;
      }
    }
    novelty.mark_used(*child);
    const ArchRecord record = evaluator.evaluate(*child, rng, Provenance::kEvolved);
    population.push_back(record);
    population.pop_front();  // aging: retire the oldest member
    log_evaluation(record);
  }
  trace.unique_evaluations = evaluator.unique_evaluations() - eval_baseline;
  return trace;
}

std::vector<std::pair<int, double>> provenance_ratio(const SearchTrace& trace,
                                                     int window) {
  if (window < 1) throw ValidationError("provenance_ratio: window must be >= 1");
  if (trace.config_echo.value("candidate_mode", "") != "mixed") {
    throw ValidationError("provenance_ratio: trace was not produced in mixed mode");
  }
  std::vector<std::pair<int, double>> series;
  const auto& iterations = trace.iterations;
  for (std::size_t i = static_cast<std::size_t>(window) - 1; i < iterations.size(); ++i) {
    int random_count = 0;
    for (std::size_t j = i + 1 - static_cast<std::size_t>(window); j <= i; ++j) {
      if (iterations[j].chosen_provenance == Provenance::kRandom) ++random_count;
    }
    series.emplace_back(static_cast<int>(i),
                        static_cast<double>(random_count) / window);
  }
  return series;
}

}  // namespace lmsearch
