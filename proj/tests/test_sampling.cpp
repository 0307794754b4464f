#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "scenarios.hpp"
#include "seqattr/sampling.hpp"

using namespace seqattr;

namespace {

struct Labeled {
  std::vector<MaskedSeries> series;
  std::vector<std::size_t> labels;
};

Labeled two_classes(std::uint64_t seed, std::size_t n0, std::size_t n1) {
  std::mt19937_64 rng(seed);
  Labeled out;
  for (std::size_t i = 0; i < n0 + n1; ++i) {
    out.series.push_back(testgen::random_series(rng, 6, 0.8));
    out.labels.push_back(i < n0 ? 0 : 1);
  }
  return out;
}

}  // namespace

TEST(SampleSize, DerivedFromSmallestClass) {
  std::vector<std::size_t> sizes{100, 40};
  EXPECT_EQ(sample_size_for(sizes, 0.3), 12u);
  EXPECT_EQ(sample_size_for(sizes, 1.0), 40u);
  std::vector<std::size_t> tiny{1, 50};
  EXPECT_EQ(sample_size_for(tiny, 0.3), 1u);
  std::vector<std::size_t> big{10000, 10000};
  EXPECT_EQ(sample_size_for(big, 0.3), 3000u);
}

TEST(StratifiedSample, WholeClassWhenSEqualsSize) {
  auto d = two_classes(1, 5, 5);
  auto plan = stratified_sample(d.series, d.labels, 2, 5, 9);
  for (const auto& c : plan.classes) {
    EXPECT_EQ(c.sampled.size(), 5u);
    EXPECT_FALSE(c.degraded);
    std::set<std::size_t> s(c.sampled.begin(), c.sampled.end());
    EXPECT_EQ(s.size(), 5u);
  }
}

TEST(StratifiedSample, OneRepresentativePerSubPopulation) {
  std::mt19937_64 rng(3);
  auto pts = scenario::blobs(rng, 2, 15, 3);  // indices 0..14 and 15..29
  std::vector<std::size_t> labels(30, 0);
  auto plan = stratified_sample(pts, labels, 1, 2, 5);
  const auto& c = plan.classes[0];
  ASSERT_EQ(c.sampled.size(), 2u);
  ASSERT_EQ(c.strata.size(), 2u);
  const bool first_low = c.sampled[0] < 15;
  EXPECT_NE(first_low, c.sampled[1] < 15);
  auto ref = oracle::single_link_partitions(pts);
  std::set<std::set<std::size_t>> got;
  for (const auto& s : c.strata) got.insert(std::set<std::size_t>(s.begin(), s.end()));
  EXPECT_EQ(got, ref[2]);
}

TEST(StratifiedSample, InvariantsOnRandomData) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto d = two_classes(seed, 40, 25);
    auto plan = stratified_sample(d.series, d.labels, 2, 8, seed);
    for (const auto& c : plan.classes) {
      EXPECT_EQ(c.sampled.size(), 8u);
      EXPECT_EQ(c.strata.size(), 8u);
      std::size_t covered = 0;
      for (std::size_t s = 0; s < c.strata.size(); ++s) {
        covered += c.strata[s].size();
        EXPECT_NE(std::find(c.strata[s].begin(), c.strata[s].end(), c.sampled[s]), c.strata[s].end());
        EXPECT_EQ(d.labels[c.sampled[s]], c.label);
      }
      EXPECT_EQ(covered, c.class_size);
    }
  }
}

TEST(StratifiedSample, DeterministicUnderSeed) {
  auto d = two_classes(4, 30, 30);
  auto a = stratified_sample(d.series, d.labels, 2, 6, 123);
  auto b = stratified_sample(d.series, d.labels, 2, 6, 123);
  EXPECT_EQ(a, b);
  bool differs = false;
  for (std::uint64_t s = 124; s < 140 && !differs; ++s)
    differs = !(stratified_sample(d.series, d.labels, 2, 6, s) == a);
  EXPECT_TRUE(differs);
}

TEST(StratifiedSample, SmallClassDegrades) {
  auto d = two_classes(5, 3, 20);
  auto plan = stratified_sample(d.series, d.labels, 2, 5, 1);
  EXPECT_TRUE(plan.classes[0].degraded);
  EXPECT_EQ(plan.classes[0].sampled.size(), 3u);
  EXPECT_EQ(plan.classes[1].sampled.size(), 5u);
  EXPECT_THROW(stratified_sample(d.series, d.labels, 2, 0, 1), Error);
}
