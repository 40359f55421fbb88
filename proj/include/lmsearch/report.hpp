#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmsearch/search.hpp"

namespace lmsearch {

/// One-sided exact sign test: probability of at least `wins` successes in
/// wins + losses fair coin flips. Ties are dropped by the caller.
double sign_test_one_sided_p(int wins, int losses);

double mean(const std::vector<double>& values);
double sample_sd(const std::vector<double>& values);

/// Trace document loaded back from disk; only the fields the reports need.
struct LoadedTrace {
  nlohmann::ordered_json doc;
  std::string label;

  static LoadedTrace load(const std::string& path);

  std::string space_name() const;
  std::string algo() const;
  bool mixed_mode() const;
  std::vector<double> best_so_far() const;        // canonical, per iteration
  std::vector<std::string> chosen_provenance() const;
  double final_best_canonical() const;
  double final_best_raw() const;
};

/// Best-so-far curves, one column per trace, padded with the final value for
/// traces that ended early. All traces must come from the same space.
void write_best_so_far_csv(const std::vector<LoadedTrace>& traces, std::ostream& out);

/// Windowed random-provenance fraction per mixed-mode trace.
void write_provenance_ratio_csv(const std::vector<LoadedTrace>& traces, int window,
                                std::ostream& out);

}  // namespace lmsearch
