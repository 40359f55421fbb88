#include "lmsearch/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "lmsearch/errors.hpp"

namespace lmsearch {

double sign_test_one_sided_p(int wins, int losses) {
  if (wins < 0 || losses < 0) throw ValidationError("sign test: negative counts");
  const int n = wins + losses;
  if (n == 0 || wins == 0) return 1.0;
  // exact binomial tail P(X >= wins), X ~ Binom(n, 1/2)
  double p = 0.0;
  double log_coeff = 0.0;  // log C(n, k), built incrementally from k = 0
  const double log_half_n = n * std::log(0.5);
  for (int k = 0; k <= n; ++k) {
    if (k >= wins) p += std::exp(log_coeff + log_half_n);
    log_coeff += std::log(static_cast<double>(n - k)) -
                 std::log(static_cast<double>(k + 1));
  }
  return std::min(1.0, p);
}

double mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

double sample_sd(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double sum_sq = 0.0;
  for (double v : values) sum_sq += (v - m) * (v - m);
  return std::sqrt(sum_sq / static_cast<double>(values.size() - 1));
}

LoadedTrace LoadedTrace::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trace file: " + path);
  LoadedTrace trace;
  try {
    in >> trace.doc;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError("trace " + path + ": " + ex.what());
  }
  if (!trace.doc.contains("config") || !trace.doc.contains("iterations")) {
    throw ValidationError("trace " + path + ": missing config/iterations fields");
  }
  trace.label = path;
  return trace;
}

std::string LoadedTrace::space_name() const {
  return doc["config"].value("space", "");
}

std::string LoadedTrace::algo() const { return doc["config"].value("algo", ""); }

bool LoadedTrace::mixed_mode() const {
  return doc["config"].value("candidate_mode", "") == "mixed";
}

std::vector<double> LoadedTrace::best_so_far() const {
  std::vector<double> series;
  for (const auto& entry : doc["iterations"]) {
    series.push_back(entry.at("best_so_far").get<double>());
  }
  return series;
}

std::vector<std::string> LoadedTrace::chosen_provenance() const {
  std::vector<std::string> series;
  for (const auto& entry : doc["iterations"]) {
    series.push_back(entry.at("provenance").get<std::string>());
  }
  return series;
}

double LoadedTrace::final_best_canonical() const {
  return doc["summary"].value("best_canonical", 0.0);
}

double LoadedTrace::final_best_raw() const {
  return doc["summary"].value("best_raw", 0.0);
}

namespace {

void require_same_space(const std::vector<LoadedTrace>& traces) {
  if (traces.empty()) throw ValidationError("report: no trace files given");
  const std::string space = traces.front().space_name();
  for (const LoadedTrace& trace : traces) {
    if (trace.space_name() != space) {
      throw ValidationError("report: traces mix spaces '" + space + "' and '" +
                            trace.space_name() + "' (" + trace.label + ")");
    }
  }
}

}  // namespace

void write_best_so_far_csv(const std::vector<LoadedTrace>& traces, std::ostream& out) {
  require_same_space(traces);
  std::vector<std::vector<double>> curves;
  std::size_t longest = 0;
  for (const LoadedTrace& trace : traces) {
    curves.push_back(trace.best_so_far());
    longest = std::max(longest, curves.back().size());
  }
  out << "iteration";
  for (const LoadedTrace& trace : traces) out << "," << trace.label;
  out << "\n";
  for (std::size_t i = 0; i < longest; ++i) {
    out << i;
    for (const auto& curve : curves) {
      out << ",";
      if (curve.empty()) continue;
      out << (i < curve.size() ? curve[i] : curve.back());
    }
    out << "\n";
  }
}

void write_provenance_ratio_csv(const std::vector<LoadedTrace>& traces, int window,
                                std::ostream& out) {
  require_same_space(traces);
  if (window < 1) throw ValidationError("report: ratio window must be >= 1");
  std::vector<std::vector<double>> series;
  std::size_t longest = 0;
  for (const LoadedTrace& trace : traces) {
    if (!trace.mixed_mode()) {
      throw ValidationError("report: " + trace.label + " is not a mixed-mode trace");
    }
    const std::vector<std::string> provenance = trace.chosen_provenance();
    std::vector<double> fractions;
    for (std::size_t i = static_cast<std::size_t>(window) - 1; i < provenance.size(); ++i) {
      int random_count = 0;
      for (std::size_t j = i + 1 - static_cast<std::size_t>(window); j <= i; ++j) {
        if (provenance[j] == "random") ++random_count;
      }
      fractions.push_back(static_cast<double>(random_count) / window);
    }
    longest = std::max(longest, fractions.size());
    series.push_back(std::move(fractions));
  }
  out << "iteration";
  for (const LoadedTrace& trace : traces) out << "," << trace.label;
  out << "\n";
  for (std::size_t i = 0; i < longest; ++i) {
    out << (i + static_cast<std::size_t>(window) - 1);
    for (const auto& fractions : series) {
      out << ",";
      if (i < fractions.size()) out << fractions[i];
    }
    out << "\n";
  }
}

}  // namespace lmsearch
