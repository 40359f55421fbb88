#pragma once

#include <variant>
#include <vector>

#include <json.hpp>

#include "lmsearch/rng.hpp"
#include "lmsearch/space.hpp"

namespace lmsearch {

/// A pruned view of a parent space: every dimension is either fixed to one
/// option or retains a non-empty ascending subset of its options.
struct Subspace {
  struct Fixed {
    std::size_t option;
  };
  struct Retained {
    std::vector<std::size_t> options;  // ascending, non-empty
  };
  using DimState = std::variant<Fixed, Retained>;

  std::string parent;
  std::vector<DimState> dims;

  /// Provenance form: {dim_label: "fixed:i" | [i, j, ...]}.
  nlohmann::ordered_json to_json(const SearchSpace& space) const;
};

/// Independently drops each dimension with probability 1 - dim_keep_prob
/// (fixing it at the declared null option, or a uniformly random one when the
/// space has none) and each option of a kept dimension with probability
/// 1 - option_keep_prob. A kept dimension whose options were all dropped gets
/// one uniformly random option restored, so the result is never empty.
Subspace prune_space(const SearchSpace& space, double dim_keep_prob,
                     double option_keep_prob, Rng& rng);

inline Subspace prune_space(const SearchSpace& space, Rng& rng) {
  return prune_space(space, 0.5, 0.5, rng);
}

/// The unpruned subspace equal to the parent space.
Subspace full_subspace(const SearchSpace& space);

/// Uniform draw over the subspace's member codes.
NCode sample_from_subspace(const Subspace& sub, Rng& rng);

/// Exact member count: product of (1 if fixed else retained count).
ExactCount subspace_cardinality(const Subspace& sub);

bool subspace_contains(const Subspace& sub, const NCode& code);

/// All member codes in lexicographic order. Errors if the subspace exceeds
/// `cap` members.
std::vector<NCode> enumerate_subspace(const Subspace& sub, std::uint64_t cap);

}  // namespace lmsearch
