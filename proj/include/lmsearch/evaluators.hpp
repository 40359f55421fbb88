#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lmsearch/rng.hpp"
#include "lmsearch/space.hpp"

namespace lmsearch {

enum class EvaluatorKind { kTabular, kSynthetic, kExternal };

/// Additive utility landscape with optional pairwise interactions and
/// seed-controlled Gaussian noise. With noise_sd = 0 the value is a closed
/// form, so small spaces have an exhaustively checkable optimum.
struct SyntheticLandscape {
  struct Interaction {
    std::size_t dim_a = 0;
    std::size_t opt_a = 0;
    std::size_t dim_b = 0;
    std::size_t opt_b = 0;
    double value = 0.0;
  };

  std::vector<std::vector<double>> utilities;  // [dimension][option]
  std::vector<Interaction> interactions;
  double noise_sd = 0.0;

  /// Noiseless closed-form value of a code.
  double value_of(const NCode& code) const;

  /// utilities[d][o] = o for every dimension of the space.
  static SyntheticLandscape option_index(const SearchSpace& space);
};

/// Immutable precomputed benchmark table keyed by canonical code text.
/// CSV layout: header `ncode,<metric>[,<metric>...]`, one row per code.
class PerformanceTable {
 public:
  static PerformanceTable load(const std::string& path, const SearchSpace& space);

  bool contains(const NCode& code) const;
  double lookup(const NCode& code, const std::string& metric) const;
  double worst_raw(const std::string& metric, Direction direction) const;
  const std::vector<std::string>& metrics() const { return metrics_; }
  std::size_t row_count() const { return rows_.size(); }

 private:
  std::vector<std::string> metrics_;
  std::unordered_map<std::string, std::vector<double>> rows_;
};

/// Settings for an external proxy-task command. `{ncode}` in the template is
/// replaced by the code text; the final line of stdout must be the raw metric.
struct ExternalCommand {
  std::string command_template;
  std::chrono::milliseconds timeout{60'000};
  std::string workdir;  // empty = inherit
};

/// Runs a shell command, capturing stdout, enforcing the timeout. Throws
/// EvaluationError with distinct messages for nonzero exit and timeout.
std::string run_command_capture(const std::string& command,
                                std::chrono::milliseconds timeout,
                                const std::string& workdir);

/// Supplies P(a) behind one contract. Evaluations are memoized by code text:
/// repeated queries return the identical record and count once.
class Evaluator {
 public:
  static Evaluator tabular(PerformanceTable table, std::string metric,
                           Direction direction, bool impute_missing_with_worst = false);
  static Evaluator synthetic(SyntheticLandscape landscape, std::string metric,
                             Direction direction);
  static Evaluator external(ExternalCommand command, std::string metric,
                            Direction direction);

  /// Builds from a JSON spec document; relative table paths resolve against
  /// `base_dir`.
  static Evaluator from_json(const nlohmann::json& doc, const SearchSpace& space,
                             const std::string& base_dir);
  static Evaluator load_spec_file(const std::string& path, const SearchSpace& space);

  ArchRecord evaluate(const NCode& code, Rng& rng,
                      Provenance provenance = Provenance::kExternal);

  EvaluatorKind kind() const;
  const std::string& metric_name() const;
  Direction direction() const;
  /// True when repeated evaluation of a fresh code cannot vary (tabular, or
  /// synthetic with zero noise). External commands are trusted deterministic.
  bool deterministic() const;
  std::size_t unique_evaluations() const;

  /// Same backing data, empty memo and counter.
  Evaluator clone_fresh() const;

  /// Spec echo for manifests and trace headers.
  nlohmann::ordered_json spec_json() const;

 private:
  struct Backing;
  explicit Evaluator(std::shared_ptr<const Backing> backing);

  std::shared_ptr<const Backing> backing_;
  std::shared_ptr<std::mutex> memo_mutex_;
  std::shared_ptr<std::map<std::string, ArchRecord>> memo_;
};

/// Exhaustive scan of a deterministic evaluator over the whole space;
/// lexicographically smallest code wins ties. Errors when the space exceeds
/// `cap` members or the evaluator is noisy.
ArchRecord enumerate_optimum(const SearchSpace& space, Evaluator& evaluator,
                             std::uint64_t cap = 1'000'000);

}  // namespace lmsearch
