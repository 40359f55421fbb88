#include "lmsearch/trajectory.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "lmsearch/errors.hpp"

namespace lmsearch {

namespace {

constexpr int kMaxSubspaceRetries = 16;
constexpr std::uint64_t kEnumerationThreshold = 8192;

std::string format_raw(double raw, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, raw);
  return buffer;
}

/// Draws `count` distinct codes from the subspace: exhaustive shuffle for
/// small subspaces, rejection for large ones.
std::vector<NCode> draw_distinct(const Subspace& sub, std::uint64_t count, Rng& rng) {
  const ExactCount cardinality = subspace_cardinality(sub);
  if (cardinality.less_equal(kEnumerationThreshold)) {
    std::vector<NCode> members = enumerate_subspace(sub, kEnumerationThreshold);
    if (count > members.size()) {
      throw EvaluationError("draw_distinct: requested " + std::to_string(count) +
                            " codes from a subspace of " +
                            std::to_string(members.size()));
    }
    rng.shuffle(members);
    members.resize(count);
    return members;
  }
  std::vector<NCode> drawn;
  std::set<NCode> seen;
  // cardinality >> count here, so collisions are rare
  std::uint64_t attempts = 0;
  const std::uint64_t attempt_cap = 1000 * (count + 1);
  while (drawn.size() < count && attempts < attempt_cap) {
    ++attempts;
    NCode code = sample_from_subspace(sub, rng);
    if (seen.insert(code).second) drawn.push_back(std::move(code));
  }
  if (drawn.size() < count) {
    throw EvaluationError("draw_distinct: rejection sampling stalled");
  }
  return drawn;
}

}  // namespace

void GenConfig::validate() const {
  if (n_history_min < 1 || n_history_max < n_history_min) {
    throw ValidationError("GenConfig: history range lower bound must be >= 1");
  }
  if (n_candidates_min < 1 || n_candidates_max < n_candidates_min) {
    throw ValidationError("GenConfig: candidate range lower bound must be >= 1");
  }
  if (performance_decimals < 0 || performance_decimals > 17) {
    throw ValidationError("GenConfig: performance_decimals out of range");
  }
}

void sort_history(std::vector<HistoryRecord>& history) {
  std::sort(history.begin(), history.end(),
            [](const HistoryRecord& a, const HistoryRecord& b) {
              if (a.canonical != b.canonical) return a.canonical > b.canonical;
              return a.code < b.code;
            });
}

void permute_performances(std::vector<HistoryRecord>& history, Rng& rng) {
  std::vector<std::size_t> perm(history.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<HistoryRecord> shuffled = history;
  for (std::size_t i = 0; i < history.size(); ++i) {
    shuffled[i].raw = history[perm[i]].raw;
    shuffled[i].canonical = history[perm[i]].canonical;
  }
  history = std::move(shuffled);
}

TrajectorySample generate_sample(const SearchSpace& space, Evaluator& evaluator,
                                 const GenConfig& cfg, Rng& rng) {
  cfg.validate();
  for (int attempt = 0; attempt < kMaxSubspaceRetries; ++attempt) {
    Subspace sub = prune_space(space, rng);
    const ExactCount cardinality = subspace_cardinality(sub);

    std::uint64_t n_history = static_cast<std::uint64_t>(
        rng.uniform_int(cfg.n_history_min, cfg.n_history_max));
    std::uint64_t n_candidates = static_cast<std::uint64_t>(
        rng.uniform_int(cfg.n_candidates_min, cfg.n_candidates_max));

    bool clamped = false;
    if (cardinality.fits_u64()) {
      const std::uint64_t members = cardinality.as_u64();
      if (n_history + n_candidates > members) {
        clamped = true;
        n_candidates = std::min(n_candidates, members);
        if (n_candidates == 0) n_candidates = 1;  // cardinality >= 1 always
        n_history = std::min(n_history, members - n_candidates);
      }
    }

    std::vector<NCode> drawn;
    try {
      drawn = draw_distinct(sub, n_history + n_candidates, rng);
    } catch (const EvaluationError&) {
      continue;  // fresh subspace
    }

    TrajectorySample sample;
    sample.seed = rng.seed();
    sample.clamped = clamped;
    sample.subspace_provenance = sub.to_json(space);
    sample.history.reserve(n_history);
    for (std::uint64_t i = 0; i < n_history; ++i) {
      const ArchRecord record =
          evaluator.evaluate(drawn[i], rng, Provenance::kRandom);
      sample.history.push_back(
          {record.code, record.raw_metrics.at(evaluator.metric_name()),
           record.performance});
    }
    sample.candidates.assign(drawn.begin() + static_cast<std::ptrdiff_t>(n_history),
                             drawn.end());

    double best = 0.0;
    bool first = true;
    for (const NCode& candidate : sample.candidates) {
      const ArchRecord record =
          evaluator.evaluate(candidate, rng, Provenance::kRandom);
      if (first || record.performance > best ||
          (record.performance == best && candidate < sample.answer)) {
        best = record.performance;
        sample.answer = candidate;
        first = false;
      }
    }
    sort_history(sample.history);
    return sample;
  }
  throw EvaluationError("generate_sample: no usable subspace after " +
                        std::to_string(kMaxSubspaceRetries) + " attempts");
}

std::string render_prompt(const std::vector<HistoryRecord>& history,
                          const std::vector<NCode>& candidates, int decimals) {
  std::string out =
      "Please analyze the history, rank the candidate and output the "
      "highest-performing candidate.\n\nHistory:\n";
  for (const HistoryRecord& record : history) {
    out += "NCode: " + record.code.str() +
           ", accuracy: " + format_raw(record.raw, decimals) + ";\n";
  }
  out += "\nCandidate:\n";
  for (const NCode& candidate : candidates) {
    out += candidate.str() + "\n";
  }
  return out;
}

std::string render_prompt(const TrajectorySample& sample, int decimals) {
  return render_prompt(sample.history, sample.candidates, decimals);
}

std::string expected_output(const TrajectorySample& sample) {
  return sample.answer.str();
}

std::uint64_t generate_dataset(const SearchSpace& space, Evaluator& evaluator,
                               const GenConfig& cfg, Rng& rng,
                               const std::string& out_path,
                               std::uint64_t* clamped_count) {
  cfg.validate();
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ValidationError("cannot open dataset output: " + out_path);
  if (clamped_count != nullptr) *clamped_count = 0;
  for (std::uint64_t i = 0; i < cfg.n_samples; ++i) {
    Rng sample_rng = rng.derive(i);
    const TrajectorySample sample =
        generate_sample(space, evaluator, cfg, sample_rng);
    if (clamped_count != nullptr && sample.clamped) ++*clamped_count;
    nlohmann::ordered_json line;
    line["instruction"] = render_prompt(sample, cfg.performance_decimals);
    line["output"] = expected_output(sample);
    nlohmann::ordered_json meta;
    meta["seed"] = sample.seed;
    meta["sizes"] = {{"history", sample.history.size()},
                     {"candidates", sample.candidates.size()}};
    meta["clamped"] = sample.clamped;
    meta["subspace"] = sample.subspace_provenance;
    line["meta"] = std::move(meta);
    out << line.dump() << "\n";
    if (!out) throw ValidationError("write failed: " + out_path);
  }
  out.flush();
  if (!out) throw ValidationError("write failed: " + out_path);
  return cfg.n_samples;
}

TrajectorySample shuffle_mapping(const TrajectorySample& sample, Rng& rng) {
  if (sample.history.size() < 2) {
    throw ValidationError("shuffle_mapping: history must have at least 2 records");
  }
  TrajectorySample shuffled = sample;
  permute_performances(shuffled.history, rng);
  sort_history(shuffled.history);
  return shuffled;
}

}  // namespace lmsearch
