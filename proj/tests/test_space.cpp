#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>

#include "lmsearch/errors.hpp"
#include "lmsearch/space.hpp"
#include "test_util.hpp"

using namespace lmsearch;
using lmsearch::test::make_space;
using lmsearch::test::nb201_space;
using lmsearch::test::random_assignment;
using lmsearch::test::random_code;
using lmsearch::test::random_space;

TEST_CASE("encode: nas-bench-201 cell renders as 333123") {
  const SearchSpace space = nb201_space();
  const Assignment assignment = {
      {"edge_1<-0", "conv3x3"}, {"edge_2<-0", "conv3x3"},
      {"edge_2<-1", "conv3x3"}, {"edge_3<-0", "skip_connect"},
      {"edge_3<-1", "conv1x1"}, {"edge_3<-2", "conv3x3"},
  };
  CHECK(encode(space, assignment).str() == "333123");
}

TEST_CASE("encode: lora rank options index by position") {
  const SearchSpace space("lora", {Dimension{"rank", {"4", "8", "16"}, {}}});
  CHECK(encode(space, {{"rank", "4"}}).digit(0) == 0);
  CHECK(encode(space, {{"rank", "8"}}).digit(0) == 1);
  CHECK(encode(space, {{"rank", "16"}}).digit(0) == 2);
}

TEST_CASE("encode: single dimension, single option") {
  const SearchSpace space = make_space({1});
  CHECK(encode(space, {{"d0", "o0"}}).str() == "0");
}

TEST_CASE("encode: errors name the offending dimension") {
  const SearchSpace space = make_space({3, 2});
  CHECK_THROWS_WITH_AS(encode(space, {{"d0", "nope"}, {"d1", "o0"}}),
                       doctest::Contains("'nope'"), ValidationError);
  CHECK_THROWS_WITH_AS(encode(space, {{"d0", "o0"}}),
                       doctest::Contains("missing dimension 'd1'"), ValidationError);
  CHECK_THROWS_WITH_AS(encode(space, {{"d0", "o0"}, {"d1", "o0"}, {"dx", "o0"}}),
                       doctest::Contains("extra dimension 'dx'"), ValidationError);
}

TEST_CASE("decode: 333123 recovers the six-edge assignment") {
  const SearchSpace space = nb201_space();
  const Assignment assignment = decode(space, parse_ncode(space, "333123"));
  CHECK(assignment.at("edge_1<-0") == "conv3x3");
  CHECK(assignment.at("edge_3<-0") == "skip_connect");
  CHECK(assignment.at("edge_3<-1") == "conv1x1");
}

TEST_CASE("decode: all-zero code selects first options") {
  const SearchSpace space = make_space({4, 4, 4});
  const Assignment assignment = decode(space, parse_ncode(space, "000"));
  for (const auto& [label, option] : assignment) {
    (void)label;
    CHECK(option == "o0");
  }
}

TEST_CASE("codec bijectivity over random assignments") {
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    const SearchSpace space = random_space(rng);
    const Assignment assignment = random_assignment(space, rng);
    const NCode code = encode(space, assignment);
    CHECK(decode(space, code) == assignment);
    CHECK(encode(space, decode(space, code)) == code);
  }
}

TEST_CASE("parse_ncode: canonical text round-trips") {
  const SearchSpace space = make_space({7, 7, 7, 7, 7, 7, 7, 7});
  const NCode code = parse_ncode(space, "03255564");
  CHECK(code.size() == 8);
  CHECK(code.str() == "03255564");
}

TEST_CASE("parse_ncode: distinct error classes") {
  const SearchSpace nb201 = nb201_space();
  CHECK_THROWS_WITH_AS(parse_ncode(nb201, "33312"), doctest::Contains("length"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(parse_ncode(nb201, "933123"),
                       doctest::Contains("position 0"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_ncode(nb201, "3331x3"),
                       doctest::Contains("non-digit"), ValidationError);
}

TEST_CASE("parse/render identity on random codes") {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const SearchSpace space = random_space(rng);
    const NCode code = random_code(space, rng);
    CHECK(parse_ncode(space, code.str()) == code);
  }
}

TEST_CASE("space_cardinality: exact values") {
  CHECK(space_cardinality(make_space({5, 5, 5, 5, 5, 5})) == 15625u);
  CHECK(space_cardinality(make_space({1})) == 1u);

  // 48 dimensions of 3 options: 3^48, past the 64-bit range
  const SearchSpace wide = make_space(std::vector<std::size_t>(48, 3));
  CHECK(space_cardinality(wide).str() == "79766443076872509863361");
}

TEST_CASE("space_cardinality matches brute-force enumeration") {
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const SearchSpace space = random_space(rng, 4, 8);
    const ExactCount count = space_cardinality(space);
    REQUIRE(count.less_equal(10'000));
    std::uint64_t enumerated = 0;
    std::vector<std::uint8_t> digits(space.dimension_count(), 0);
    bool wrapped = false;
    while (!wrapped) {
      ++enumerated;
      wrapped = true;
      for (std::size_t d = space.dimension_count(); d-- > 0;) {
        if (++digits[d] < space.radix(d)) {
          wrapped = false;
          break;
        }
        digits[d] = 0;
      }
    }
    CHECK(count.as_u64() == enumerated);
  }
}

TEST_CASE("canonical_performance") {
  CHECK(canonical_performance(94.28, Direction::kMaximize) == 94.28);
  CHECK(canonical_performance(3.10, Direction::kMinimize) == -3.10);
  CHECK(canonical_performance(0.0, Direction::kMaximize) == 0.0);
  CHECK(canonical_performance(0.0, Direction::kMinimize) == 0.0);
  CHECK_THROWS_AS(canonical_performance(std::nan(""), Direction::kMaximize),
                  ValidationError);
}

TEST_CASE("canonical_performance preserves argmax") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const Direction direction =
        rng.bernoulli(0.5) ? Direction::kMaximize : Direction::kMinimize;
    std::vector<double> raws;
    for (int i = 0; i < 10; ++i) raws.push_back(rng.gaussian(0, 10));
    std::size_t best_raw = 0;
    std::size_t best_canonical = 0;
    for (std::size_t i = 1; i < raws.size(); ++i) {
      const bool raw_better = direction == Direction::kMaximize
                                  ? raws[i] > raws[best_raw]
                                  : raws[i] < raws[best_raw];
      if (raw_better) best_raw = i;
      if (canonical_performance(raws[i], direction) >
          canonical_performance(raws[best_canonical], direction)) {
        best_canonical = i;
      }
    }
    CHECK(best_raw == best_canonical);
  }
}

TEST_CASE("space validation: invariant violations carry paths") {
  CHECK_THROWS_WITH_AS(SearchSpace("empty", {}),
                       doctest::Contains("at least one dimension"), ValidationError);

  std::vector<std::string> eleven;
  for (int i = 0; i < 11; ++i) eleven.push_back("o" + std::to_string(i));
  CHECK_THROWS_WITH_AS(SearchSpace("wide", {Dimension{"d0", eleven, {}}}),
                       doctest::Contains("radix cap"), ValidationError);

  CHECK_THROWS_WITH_AS(
      SearchSpace("dup", {Dimension{"d0", {"a"}, {}}, Dimension{"d0", {"b"}, {}}}),
      doctest::Contains("duplicate dimension label"), ValidationError);

  CHECK_THROWS_WITH_AS(SearchSpace("dup-opt", {Dimension{"d0", {"a", "a"}, {}}}),
                       doctest::Contains("options[1]"), ValidationError);

  CHECK_THROWS_WITH_AS(SearchSpace("null-oob", {Dimension{"d0", {"a"}, 3}}),
                       doctest::Contains("null_option_index"), ValidationError);
}

TEST_CASE("space JSON loader round-trips and validates") {
  const SearchSpace space = nb201_space();
  const SearchSpace reloaded = SearchSpace::from_json(space.to_json());
  CHECK(reloaded.name() == space.name());
  CHECK(reloaded.dimension_count() == 6);
  CHECK(reloaded.dimensions()[0].null_option_index == 0);

  const auto bad = nlohmann::json::parse(R"({"name":"x","dimensions":[{"label":"d0"}]})");
  CHECK_THROWS_WITH_AS(SearchSpace::from_json(bad),
                       doctest::Contains("dimensions[0]"), ValidationError);
}
