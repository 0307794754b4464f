#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "oracles.hpp"
#include "seqattr/clustering.hpp"

using namespace seqattr;

namespace {

MaskedSeries series(std::initializer_list<std::optional<double>> v) {
  MaskedSeries s(v.size());
  std::size_t t = 0;
  for (const auto& x : v) {
    if (x) s.set(t, *x);
    ++t;
  }
  return s;
}

std::vector<MaskedSeries> two_triplets() {
  return {series({0, 0}), series({0, 1}), series({1, 0}), series({10, 10}), series({10, 11}), series({11, 10})};
}

oracle::Partition as_partition(const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::set<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].insert(i);
  oracle::Partition p;
  for (auto& [l, g] : groups) p.insert(g);
  return p;
}

}  // namespace

TEST(MaskedDistance, WorkedExample) {
  auto x = series({1, 2, std::nullopt});
  auto y = series({1, 4, 5});
  EXPECT_NEAR(*masked_distance(x, y), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(*masked_distance(x, y, DistanceNormalization::kSharedSupport), 1.0, 1e-15);
}

TEST(MaskedDistance, IdentityAndIncomparable) {
  auto a = series({1.5, 2.5, 3.5});
  EXPECT_EQ(*masked_distance(a, a), 0.0);
  auto none = series({std::nullopt, std::nullopt});
  auto full = series({1, 2});
  EXPECT_FALSE(masked_distance(none, full).has_value());
  EXPECT_FALSE(masked_distance(full, none).has_value());
}

TEST(MaskedDistance, LengthMismatchThrows) {
  try {
    masked_distance(series({1, 2}), series({1, 2, 3}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLengthMismatch);
  }
}

TEST(MaskedDistance, SymmetricAndMatchesOracle) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 2000; ++rep) {
    auto x = testgen::random_series(rng, 8, 0.6);
    auto y = testgen::random_series(rng, 8, 0.6);
    auto d1 = masked_distance(x, y), d2 = masked_distance(y, x);
    ASSERT_EQ(d1.has_value(), d2.has_value());
    auto ref = oracle::distance(x, y);
    ASSERT_EQ(d1.has_value(), ref.has_value());
    if (d1) {
      EXPECT_EQ(*d1, *d2);
      EXPECT_NEAR(*d1, static_cast<double>(*ref), 1e-14);
    }
  }
}

TEST(Hac, StopAtNMakesNoMerges) {
  auto items = two_triplets();
  auto r = hac_single_link(items, items.size());
  EXPECT_TRUE(r.linkage.merges.empty());
  EXPECT_EQ(r.clusters.size(), items.size());
}

TEST(Hac, TwoTripletsAtTwo) {
  auto items = two_triplets();
  auto r = hac_single_link(items, 2);
  ASSERT_EQ(r.clusters.size(), 2u);
  EXPECT_EQ(r.clusters[0], (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(r.clusters[1], (std::vector<std::size_t>{3, 4, 5}));
  EXPECT_EQ(r.linkage.merges.size(), 4u);
  auto oracle_parts = oracle::single_link_partitions(items);
  oracle::Partition got;
  for (const auto& c : r.clusters) got.insert(std::set<std::size_t>(c.begin(), c.end()));
  EXPECT_EQ(got, oracle_parts[2]);
}

TEST(Hac, EmptyAndBadStop) {
  std::vector<MaskedSeries> none;
  try {
    hac_single_link(none, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
  auto items = two_triplets();
  EXPECT_THROW(hac_single_link(items, 0), Error);
  EXPECT_THROW(hac_single_link(items, 7), Error);
}

TEST(Hac, NodeIdsAndSizes) {
  auto items = two_triplets();
  auto r = hac_single_link(items, 1);
  ASSERT_EQ(r.linkage.merges.size(), 5u);
  for (std::size_t m = 0; m < 5; ++m) {
    EXPECT_EQ(r.linkage.merges[m].new_node, 6 + m);
    EXPECT_LT(r.linkage.merges[m].node_a, r.linkage.merges[m].node_b);
  }
  EXPECT_EQ(r.linkage.merges.back().size, 6u);
}

TEST(Hac, MatchesNaiveOracleAtEveryK) {
  std::mt19937_64 rng(77);
  int checked = 0;
  while (checked < 40) {
    const std::size_t n = 2 + rng() % 30;
    const std::size_t T = 1 + rng() % 8;
    std::vector<MaskedSeries> items;
    for (std::size_t i = 0; i < n; ++i) items.push_back(testgen::random_series(rng, T, 0.8));
    auto full = hac_single_link(items, 1);
    bool ok_input = true;
    std::set<double> seen;
    for (const auto& m : full.linkage.merges)
      if (!std::isfinite(m.distance) || !seen.insert(m.distance).second) ok_input = false;
    if (!ok_input) continue;  // skip sets with ties or incomparable pairs
    auto ref = oracle::single_link_partitions(items);
    for (std::size_t k = 1; k <= n; ++k) ASSERT_EQ(as_partition(cut_tree(full.linkage, k)), ref[k]) << "k=" << k;
    ++checked;
  }
}

TEST(Hac, MergeDistancesNonDecreasing) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<MaskedSeries> items;
    for (int i = 0; i < 25; ++i) items.push_back(testgen::random_series(rng, 6, 0.5));
    auto r = hac_single_link(items, 1);
    for (std::size_t m = 1; m < r.linkage.merges.size(); ++m)
      EXPECT_LE(r.linkage.merges[m - 1].distance, r.linkage.merges[m].distance);
  }
}

TEST(Hac, IncomparableMergesLast) {
  std::vector<MaskedSeries> items{series({1, std::nullopt}), series({2, std::nullopt}),
                                  series({std::nullopt, 5}), series({std::nullopt, 9})};
  auto r = hac_single_link(items, 1);
  ASSERT_EQ(r.linkage.merges.size(), 3u);
  EXPECT_TRUE(std::isfinite(r.linkage.merges[0].distance));
  EXPECT_TRUE(std::isfinite(r.linkage.merges[1].distance));
  EXPECT_EQ(r.linkage.merges[2].distance, kIncomparable);
}

TEST(Hac, TruncatedRunIsPrefixOfFullRun) {
  std::mt19937_64 rng(6);
  std::vector<MaskedSeries> items;
  for (int i = 0; i < 30; ++i) items.push_back(testgen::random_series(rng, 5, 0.9));
  auto full = hac_single_link(items, 1);
  auto part = hac_single_link(items, 9);
  ASSERT_EQ(part.linkage.merges.size(), 21u);
  for (std::size_t m = 0; m < 21; ++m) EXPECT_EQ(part.linkage.merges[m], full.linkage.merges[m]);
  EXPECT_EQ(part.clusters, clusters_from_labels(cut_tree(full.linkage, 9)));
}

TEST(Hac, Cancellation) {
  std::vector<MaskedSeries> items = two_triplets();
  std::stop_source src;
  src.request_stop();
  try {
    hac_single_link(items, 1, DistanceNormalization::kSeriesLength, src.get_token());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCancelled);
  }
}

TEST(CutTree, Extremes) {
  auto r = hac_single_link(two_triplets(), 1);
  EXPECT_EQ(cut_tree(r.linkage, 1), std::vector<std::size_t>(6, 0));
  EXPECT_EQ(cut_tree(r.linkage, 6), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(cut_tree(r.linkage, 2), (std::vector<std::size_t>{0, 0, 0, 1, 1, 1}));
  try {
    cut_tree(r.linkage, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kKOutOfRange);
  }
  EXPECT_THROW(cut_tree(r.linkage, 7), Error);
}

TEST(CutTree, TruncatedLinkageRange) {
  auto r = hac_single_link(two_triplets(), 3);
  EXPECT_THROW(cut_tree(r.linkage, 2), Error);
  EXPECT_NO_THROW(cut_tree(r.linkage, 3));
}

TEST(CutTree, AlwaysAPartition) {
  std::mt19937_64 rng(8);
  std::vector<MaskedSeries> items;
  for (int i = 0; i < 40; ++i) items.push_back(testgen::random_series(rng, 4, 0.7));
  auto r = hac_single_link(items, 1);
  for (std::size_t k = 1; k <= 40; ++k) {
    auto labels = cut_tree(r.linkage, k);
    auto groups = clusters_from_labels(labels);
    EXPECT_EQ(groups.size(), k);
    std::size_t total = 0;
    std::size_t prev_first = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      ASSERT_FALSE(groups[g].empty());
      if (g > 0) {
        EXPECT_GT(groups[g].front(), prev_first);  // labels ordered by smallest leaf
      }
      prev_first = groups[g].front();
      total += groups[g].size();
    }
    EXPECT_EQ(total, 40u);
  }
}

TEST(DistanceCurve, LinearCurveTiesToLargestInteriorIndex) {
  std::vector<double> d{0, 1, 2, 3, 4, 5, 6, 7};
  auto s = smooth_centered(d, 5);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_DOUBLE_EQ(s[i], d[i]);
  EXPECT_EQ(elbow_of(s, ElbowRule::kConvex), 6u);
  EXPECT_EQ(elbow_of(s, ElbowRule::kAbsolute), 6u);
}

TEST(DistanceCurve, SmoothingWindowShrinksAtEdges) {
  std::vector<double> d{0, 0, 0, 10, 0, 0};
  auto s = smooth_centered(d, 5);
  EXPECT_DOUBLE_EQ(s[0], 0.0);
  EXPECT_DOUBLE_EQ(s[1], 0.0);
  EXPECT_DOUBLE_EQ(s[3], 2.0);
  EXPECT_DOUBLE_EQ(s[2], 2.0);
  EXPECT_DOUBLE_EQ(s[4], 10.0 / 3.0);
  EXPECT_DOUBLE_EQ(s[5], 0.0);
}

TEST(DistanceCurve, FarOutlierBendsTheCurveBeforeItsMerge) {
  // Two tight 1-D clusters and one far point: the outlier attaches last.
  std::vector<MaskedSeries> items;
  for (double x : {0.0, 0.1, 0.25, 0.3, 0.5, 5.0, 5.2, 5.3, 5.45, 5.6})
    items.push_back(MaskedSeries::dense({x}));
  items.push_back(MaskedSeries::dense({60.0}));
  auto r = hac_single_link(items, 1);
  auto c = distance_curve(r.linkage, 5);
  ASSERT_TRUE(c.elbow_index.has_value());
  const std::size_t outlier_merge = r.linkage.merges.size() - 1;
  EXPECT_TRUE(r.linkage.merges[outlier_merge].node_a == 10 || r.linkage.merges[outlier_merge].node_b == 10);
  // Exhaustive check: the elbow is the interior point with the largest second difference.
  double best = -1e300;
  std::size_t arg = 0;
  for (std::size_t i = 1; i + 1 < c.smoothed.size(); ++i) {
    double dd = c.smoothed[i - 1] - 2 * c.smoothed[i] + c.smoothed[i + 1];
    if (dd >= best) best = dd, arg = i;
  }
  EXPECT_EQ(*c.elbow_index, arg);
  EXPECT_LT(*c.elbow_index, outlier_merge);
}

TEST(DistanceCurve, TooFewPointsHasNoElbow) {
  std::vector<MaskedSeries> items{MaskedSeries::dense({0.0}), MaskedSeries::dense({1.0}), MaskedSeries::dense({3.0})};
  auto c = distance_curve(hac_single_link(items, 1).linkage);
  EXPECT_EQ(c.points.size(), 2u);
  EXPECT_FALSE(c.elbow_index.has_value());
  EXPECT_THROW(distance_curve(hac_single_link(items, 1).linkage, 4), Error);
}
