#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmsearch/errors.hpp"

namespace lmsearch {

/// Exact non-negative integer for cardinality arithmetic. Search spaces can
/// exceed 2^64 members (48 dimensions of 3 options already do), so counts are
/// kept as base-1e9 limbs and never rounded.
class ExactCount {
 public:
  ExactCount() : ExactCount(0) {}

  explicit ExactCount(std::uint64_t value) {
    while (value > 0) {
      limbs_.push_back(static_cast<std::uint32_t>(value % kBase));
      value /= kBase;
    }
    if (limbs_.empty()) limbs_.push_back(0);
  }

  ExactCount& multiply(std::uint64_t factor) {
    if (factor == 0) {
      limbs_.assign(1, 0);
      return *this;
    }
    std::uint64_t carry = 0;
    for (auto& limb : limbs_) {
      const std::uint64_t acc = static_cast<std::uint64_t>(limb) * factor + carry;
      limb = static_cast<std::uint32_t>(acc % kBase);
      carry = acc / kBase;
    }
    while (carry > 0) {
      limbs_.push_back(static_cast<std::uint32_t>(carry % kBase));
      carry /= kBase;
    }
    return *this;
  }

  bool fits_u64() const {
    if (limbs_.size() > 3) return false;
    return str_less_equal(str(), "18446744073709551615");
  }

  std::uint64_t as_u64() const {
    if (!fits_u64()) throw Error("ExactCount: value exceeds 64 bits: " + str());
    std::uint64_t value = 0;
    for (auto it = limbs_.rbegin(); it != limbs_.rend(); ++it) {
      value = value * kBase + *it;
    }
    return value;
  }

  std::string str() const {
    std::string out = std::to_string(limbs_.back());
    for (auto it = limbs_.rbegin() + 1; it != limbs_.rend(); ++it) {
      std::string part = std::to_string(*it);
      out += std::string(9 - part.size(), '0') + part;
    }
    return out;
  }

  bool operator==(const ExactCount& other) const { return limbs_ == other.limbs_; }
  bool operator==(std::uint64_t value) const { return *this == ExactCount(value); }

  bool less_equal(std::uint64_t value) const {
    return fits_u64() && as_u64() <= value;
  }

 private:
  static constexpr std::uint64_t kBase = 1'000'000'000ULL;

  static bool str_less_equal(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a <= b;
  }

  std::vector<std::uint32_t> limbs_;  // little-endian
};

}  // namespace lmsearch
