#include "lmsearch/space.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "lmsearch/errors.hpp"

namespace lmsearch {

const char* to_string(Direction direction) {
  return direction == Direction::kMaximize ? "maximize" : "minimize";
}

const char* to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::kSeed: return "seed";
    case Provenance::kRandom: return "random";
    case Provenance::kEvolved: return "evolved";
    case Provenance::kExternal: return "external";
  }
  return "external";
}

Direction direction_from_string(std::string_view text) {
  if (text == "maximize") return Direction::kMaximize;
  if (text == "minimize") return Direction::kMinimize;
  throw ValidationError("unknown direction '" + std::string(text) +
                        "' (expected maximize or minimize)");
}

SearchSpace::SearchSpace(std::string name, std::vector<Dimension> dimensions)
    : name_(std::move(name)), dimensions_(std::move(dimensions)) {
  if (dimensions_.empty()) {
    throw ValidationError("space '" + name_ + "': at least one dimension required");
  }
  std::set<std::string> seen_labels;
  for (std::size_t d = 0; d < dimensions_.size(); ++d) {
    const Dimension& dim = dimensions_[d];
    const std::string where = "dimensions[" + std::to_string(d) + "]";
    if (dim.label.empty()) {
      throw ValidationError(where + ": empty label");
    }
    if (!seen_labels.insert(dim.label).second) {
      throw ValidationError(where + ": duplicate dimension label '" + dim.label + "'");
    }
    if (dim.options.empty()) {
      throw ValidationError(where + " ('" + dim.label + "'): no options");
    }
    if (dim.options.size() > 10) {
      throw ValidationError(where + " ('" + dim.label + "'): " +
                            std::to_string(dim.options.size()) +
                            " options exceed the radix cap of 10 (one decimal "
                            "digit per position); split the dimension");
    }
    std::set<std::string> seen_options;
    for (std::size_t o = 0; o < dim.options.size(); ++o) {
      if (!seen_options.insert(dim.options[o]).second) {
        throw ValidationError(where + ".options[" + std::to_string(o) +
                              "]: duplicate option label '" + dim.options[o] + "'");
      }
    }
    if (dim.null_option_index && *dim.null_option_index >= dim.options.size()) {
      throw ValidationError(where + ".null_option_index: " +
                            std::to_string(*dim.null_option_index) +
                            " out of range for " + std::to_string(dim.options.size()) +
                            " options");
    }
  }
}

SearchSpace SearchSpace::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("space document: not a JSON object");
  if (!doc.contains("name") || !doc["name"].is_string()) {
    throw ValidationError("space document: missing string field 'name'");
  }
  if (!doc.contains("dimensions") || !doc["dimensions"].is_array()) {
    throw ValidationError("space document: missing array field 'dimensions'");
  }
  std::vector<Dimension> dims;
  std::size_t index = 0;
  for (const auto& entry : doc["dimensions"]) {
    const std::string where = "dimensions[" + std::to_string(index) + "]";
    if (!entry.is_object()) throw ValidationError(where + ": not an object");
    Dimension dim;
    if (!entry.contains("label") || !entry["label"].is_string()) {
      throw ValidationError(where + ": missing string field 'label'");
    }
    dim.label = entry["label"].get<std::string>();
    if (!entry.contains("options") || !entry["options"].is_array()) {
      throw ValidationError(where + ": missing array field 'options'");
    }
    for (const auto& opt : entry["options"]) {
      if (opt.is_string()) {
        dim.options.push_back(opt.get<std::string>());
      } else if (opt.is_number()) {
        // numeric option labels are common in rank/width spaces
        dim.options.push_back(opt.dump());
      } else {
        throw ValidationError(where + ".options: entries must be strings or numbers");
      }
    }
    if (entry.contains("null_option_index")) {
      if (!entry["null_option_index"].is_number_unsigned()) {
        throw ValidationError(where + ".null_option_index: must be a non-negative integer");
      }
      dim.null_option_index = entry["null_option_index"].get<std::size_t>();
    }
    dims.push_back(std::move(dim));
    ++index;
  }
  return SearchSpace(doc["name"].get<std::string>(), std::move(dims));
}

SearchSpace SearchSpace::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open space file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError("space file " + path + ": " + ex.what());
  }
  try {
    return from_json(doc);
  } catch (const ValidationError& ex) {
    throw ValidationError(path + ": " + ex.what());
  }
}

nlohmann::ordered_json SearchSpace::to_json() const {
  nlohmann::ordered_json doc;
  doc["name"] = name_;
  doc["dimensions"] = nlohmann::ordered_json::array();
  for (const Dimension& dim : dimensions_) {
    nlohmann::ordered_json entry;
    entry["label"] = dim.label;
    entry["options"] = dim.options;
    if (dim.null_option_index) entry["null_option_index"] = *dim.null_option_index;
    doc["dimensions"].push_back(std::move(entry));
  }
  return doc;
}

std::string NCode::str() const {
  std::string out;
  out.reserve(digits_.size());
  for (std::uint8_t d : digits_) {
    out.push_back(static_cast<char>('0' + d));
  }
  return out;
}

NCode encode(const SearchSpace& space, const Assignment& assignment) {
  for (const auto& [label, _] : assignment) {
    bool known = false;
    for (const Dimension& dim : space.dimensions()) {
      if (dim.label == label) { known = true; break; }
    }
    if (!known) {
      throw ValidationError("encode: extra dimension '" + label +
                            "' not in space '" + space.name() + "'");
    }
  }
  std::vector<std::uint8_t> digits;
  digits.reserve(space.dimension_count());
  for (const Dimension& dim : space.dimensions()) {
    const auto it = assignment.find(dim.label);
    if (it == assignment.end()) {
      throw ValidationError("encode: missing dimension '" + dim.label + "'");
    }
    bool found = false;
    for (std::size_t o = 0; o < dim.options.size(); ++o) {
      if (dim.options[o] == it->second) {
        digits.push_back(static_cast<std::uint8_t>(o));
        found = true;
        break;
      }
    }
    if (!found) {
      throw ValidationError("encode: unknown option label '" + it->second +
                            "' in dimension '" + dim.label + "'");
    }
  }
  return NCode(std::move(digits));
}

Assignment decode(const SearchSpace& space, const NCode& code) {
  validate_code(space, code);
  Assignment assignment;
  for (std::size_t d = 0; d < space.dimension_count(); ++d) {
    const Dimension& dim = space.dimensions()[d];
    assignment[dim.label] = dim.options[code.digit(d)];
  }
  return assignment;
}

NCode parse_ncode(const SearchSpace& space, std::string_view text) {
  if (text.size() != space.dimension_count()) {
    throw ValidationError("parse_ncode: '" + std::string(text) + "' has length " +
                          std::to_string(text.size()) + ", space '" + space.name() +
                          "' expects " + std::to_string(space.dimension_count()));
  }
  std::vector<std::uint8_t> digits;
  digits.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') {
      throw ValidationError("parse_ncode: non-digit character '" + std::string(1, c) +
                            "' at position " + std::to_string(i));
    }
    const std::uint8_t digit = static_cast<std::uint8_t>(c - '0');
    if (digit >= space.radix(i)) {
      throw ValidationError("parse_ncode: digit " + std::to_string(digit) +
                            " at position " + std::to_string(i) +
                            " exceeds radix " + std::to_string(space.radix(i)) +
                            " of dimension '" + space.dimensions()[i].label + "'");
    }
    digits.push_back(digit);
  }
  return NCode(std::move(digits));
}

void validate_code(const SearchSpace& space, const NCode& code) {
  if (code.size() != space.dimension_count()) {
    throw ValidationError("code '" + code.str() + "' has " +
                          std::to_string(code.size()) + " digits, space '" +
                          space.name() + "' has " +
                          std::to_string(space.dimension_count()) + " dimensions");
  }
  for (std::size_t i = 0; i < code.size(); ++i) {
    if (code.digit(i) >= space.radix(i)) {
      throw ValidationError("code '" + code.str() + "': digit " +
                            std::to_string(code.digit(i)) + " at position " +
                            std::to_string(i) + " exceeds radix " +
                            std::to_string(space.radix(i)));
    }
  }
}

ExactCount space_cardinality(const SearchSpace& space) {
  ExactCount count(1);
  for (const Dimension& dim : space.dimensions()) {
    count.multiply(dim.options.size());
  }
  return count;
}

double canonical_performance(double raw, Direction direction) {
  if (!std::isfinite(raw)) {
    throw ValidationError("canonical_performance: non-finite raw value");
  }
  return direction == Direction::kMaximize ? raw : -raw;
}

}  // namespace lmsearch
