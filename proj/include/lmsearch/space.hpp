#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lmsearch/exact_count.hpp"

namespace lmsearch {

/// Canonical ordering direction for a raw metric.
enum class Direction { kMaximize, kMinimize };

/// Where an evaluated architecture record came from.
enum class Provenance { kSeed, kRandom, kEvolved, kExternal };

const char* to_string(Direction direction);
const char* to_string(Provenance provenance);
Direction direction_from_string(std::string_view text);

/// One configurable axis of a search space: an ordered list of opaque option
/// labels (the toolkit never interprets what an option means).
struct Dimension {
  std::string label;
  std::vector<std::string> options;
  /// Index of a "zeroize"-style null option, if the space declares one; the
  /// pruner fixes dropped dimensions here.
  std::optional<std::size_t> null_option_index;
};

/// An ordered product of dimensions. Each dimension holds at most 10 options
/// so that every architecture renders as one decimal digit per dimension with
/// no separators; wider dimensions are rejected at load time.
class SearchSpace {
 public:
  SearchSpace(std::string name, std::vector<Dimension> dimensions);

  static SearchSpace from_json(const nlohmann::json& doc);
  static SearchSpace load_file(const std::string& path);

  const std::string& name() const { return name_; }
  const std::vector<Dimension>& dimensions() const { return dimensions_; }
  std::size_t dimension_count() const { return dimensions_.size(); }
  std::size_t radix(std::size_t dim) const { return dimensions_[dim].options.size(); }

  nlohmann::ordered_json to_json() const;

 private:
  std::string name_;
  std::vector<Dimension> dimensions_;
};

/// Positional code for one architecture: digit i is the index of the chosen
/// option in dimension i. Canonical text form is the digits concatenated.
class NCode {
 public:
  NCode() = default;
  explicit NCode(std::vector<std::uint8_t> digits) : digits_(std::move(digits)) {}

  const std::vector<std::uint8_t>& digits() const { return digits_; }
  std::uint8_t digit(std::size_t i) const { return digits_[i]; }
  std::size_t size() const { return digits_.size(); }

  std::string str() const;

  friend bool operator==(const NCode& a, const NCode& b) = default;
  friend std::strong_ordering operator<=>(const NCode& a, const NCode& b) {
    return a.digits_ <=> b.digits_;
  }

 private:
  std::vector<std::uint8_t> digits_;
};

/// An evaluated architecture. `performance` is always canonical
/// (higher-is-better); the raw metric values live in `raw_metrics`.
struct ArchRecord {
  NCode code;
  double performance = 0.0;
  std::map<std::string, double> raw_metrics;
  Provenance provenance = Provenance::kExternal;
};

/// Per-dimension option-label assignment, keyed by dimension label.
using Assignment = std::map<std::string, std::string>;

/// Maps an assignment to its code. Throws ValidationError naming the
/// offending dimension for unknown labels, missing or extra dimensions.
NCode encode(const SearchSpace& space, const Assignment& assignment);

/// Inverse of encode.
Assignment decode(const SearchSpace& space, const NCode& code);

/// Accepts exactly the canonical digit-string rendering; distinct errors for
/// non-digit characters, wrong length, and digits outside a dimension's radix.
NCode parse_ncode(const SearchSpace& space, std::string_view text);

/// Validates a digit sequence against the space (length and per-digit radix).
void validate_code(const SearchSpace& space, const NCode& code);

/// Exact number of member architectures (product of option counts).
ExactCount space_cardinality(const SearchSpace& space);

/// Higher-is-better view of a raw metric: identity for maximize, negation for
/// minimize. Strictly monotone, so argmax is preserved. Rejects non-finite
/// input.
double canonical_performance(double raw, Direction direction);

}  // namespace lmsearch
