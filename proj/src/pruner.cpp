#include "lmsearch/pruner.hpp"

#include "lmsearch/errors.hpp"

namespace lmsearch {

nlohmann::ordered_json Subspace::to_json(const SearchSpace& space) const {
  nlohmann::ordered_json doc;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    const std::string& label = space.dimensions()[d].label;
    if (const auto* fixed = std::get_if<Fixed>(&dims[d])) {
      doc[label] = "fixed:" + std::to_string(fixed->option);
    } else {
      doc[label] = std::get<Retained>(dims[d]).options;
    }
  }
  return doc;
}

Subspace prune_space(const SearchSpace& space, double dim_keep_prob,
                     double option_keep_prob, Rng& rng) {
  if (dim_keep_prob < 0.0 || dim_keep_prob > 1.0 || option_keep_prob < 0.0 ||
      option_keep_prob > 1.0) {
    throw ValidationError("prune_space: keep probabilities must lie in [0, 1]");
  }
  Subspace sub;
  sub.parent = space.name();
  sub.dims.reserve(space.dimension_count());
  for (const Dimension& dim : space.dimensions()) {
    const std::size_t radix = dim.options.size();
    if (!rng.bernoulli(dim_keep_prob)) {
      const std::size_t fixed_at = dim.null_option_index
                                       ? *dim.null_option_index
                                       : rng.uniform_index(radix);
      sub.dims.push_back(Subspace::Fixed{fixed_at});
      continue;
    }
    Subspace::Retained retained;
    for (std::size_t o = 0; o < radix; ++o) {
      if (rng.bernoulli(option_keep_prob)) retained.options.push_back(o);
    }
    if (retained.options.empty()) {
      // repair rule: an all-pruned dimension gets one option back
      retained.options.push_back(rng.uniform_index(radix));
    }
    sub.dims.push_back(std::move(retained));
  }
  return sub;
}

Subspace full_subspace(const SearchSpace& space) {
  Subspace sub;
  sub.parent = space.name();
  sub.dims.reserve(space.dimension_count());
  for (const Dimension& dim : space.dimensions()) {
    Subspace::Retained retained;
    retained.options.resize(dim.options.size());
    for (std::size_t o = 0; o < dim.options.size(); ++o) retained.options[o] = o;
    sub.dims.push_back(std::move(retained));
  }
  return sub;
}

NCode sample_from_subspace(const Subspace& sub, Rng& rng) {
  std::vector<std::uint8_t> digits;
  digits.reserve(sub.dims.size());
  for (const auto& state : sub.dims) {
    if (const auto* fixed = std::get_if<Subspace::Fixed>(&state)) {
      digits.push_back(static_cast<std::uint8_t>(fixed->option));
    } else {
      const auto& options = std::get<Subspace::Retained>(state).options;
      digits.push_back(
          static_cast<std::uint8_t>(options[rng.uniform_index(options.size())]));
    }
  }
  return NCode(std::move(digits));
}

ExactCount subspace_cardinality(const Subspace& sub) {
  ExactCount count(1);
  for (const auto& state : sub.dims) {
    if (const auto* retained = std::get_if<Subspace::Retained>(&state)) {
      count.multiply(retained->options.size());
    }
  }
  return count;
}

bool subspace_contains(const Subspace& sub, const NCode& code) {
  if (code.size() != sub.dims.size()) return false;
  for (std::size_t d = 0; d < sub.dims.size(); ++d) {
    const std::size_t digit = code.digit(d);
    if (const auto* fixed = std::get_if<Subspace::Fixed>(&sub.dims[d])) {
      if (digit != fixed->option) return false;
    } else {
      const auto& options = std::get<Subspace::Retained>(sub.dims[d]).options;
      bool member = false;
      for (std::size_t o : options) {
        if (o == digit) { member = true; break; }
      }
      if (!member) return false;
    }
  }
  return true;
}

std::vector<NCode> enumerate_subspace(const Subspace& sub, std::uint64_t cap) {
  const ExactCount count = subspace_cardinality(sub);
  if (!count.less_equal(cap)) {
    throw EvaluationError("enumerate_subspace: " + count.str() +
                          " members exceed cap " + std::to_string(cap));
  }
  const std::uint64_t total = count.as_u64();
  std::vector<NCode> members;
  members.reserve(total);
  std::vector<std::size_t> odometer(sub.dims.size(), 0);
  for (std::uint64_t n = 0; n < total; ++n) {
    std::vector<std::uint8_t> digits(sub.dims.size());
    for (std::size_t d = 0; d < sub.dims.size(); ++d) {
      if (const auto* fixed = std::get_if<Subspace::Fixed>(&sub.dims[d])) {
        digits[d] = static_cast<std::uint8_t>(fixed->option);
      } else {
        const auto& options = std::get<Subspace::Retained>(sub.dims[d]).options;
        digits[d] = static_cast<std::uint8_t>(options[odometer[d]]);
      }
    }
    members.emplace_back(std::move(digits));
    // advance the least-significant free dimension
    for (std::size_t d = sub.dims.size(); d-- > 0;) {
      const auto* retained = std::get_if<Subspace::Retained>(&sub.dims[d]);
      if (retained == nullptr) continue;
      if (++odometer[d] < retained->options.size()) break;
      odometer[d] = 0;
    }
  }
  return members;
}

}  // namespace lmsearch
