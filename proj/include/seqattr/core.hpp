#pragma once

// Shared data model: datasets, attention tensors, masked series and the
// parameters that drive an analysis run.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "seqattr/error.hpp"

namespace seqattr {

/// Dense row-major matrix; rows are time steps, columns are features.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class FeatureKind { kNumeric, kCategorical };

struct FeatureSpec {
  std::size_t id = 0;
  std::string name;
  double value_min = 0.0;
  double value_max = 0.0;
  FeatureKind kind = FeatureKind::kNumeric;

  bool operator==(const FeatureSpec&) const = default;
};

struct InstanceRecord {
  std::string id;
  std::size_t label = 0;
  Matrix values;  // T x F
  std::map<std::string, std::string> attributes;
  std::optional<std::array<double, 2>> embedding2d;

  bool operator==(const InstanceRecord&) const = default;
};

struct SequenceDataset {
  std::size_t T = 0;
  std::size_t F = 0;
  std::size_t L = 0;
  std::vector<FeatureSpec> features;
  std::vector<InstanceRecord> instances;

  bool operator==(const SequenceDataset&) const = default;

  std::vector<std::size_t> class_sizes() const {
    std::vector<std::size_t> sizes(L, 0);
    for (const auto& inst : instances)
      if (inst.label < L) ++sizes[inst.label];
    return sizes;
  }

  bool has_embedding() const {
    return !instances.empty() && instances.front().embedding2d.has_value();
  }
};

/// Event-level attention a_i^t plus optional per-feature attention a_i^{t,f}.
struct AttentionTensor {
  std::vector<std::vector<double>> event_level;     // [instance][t]
  std::optional<std::vector<Matrix>> feature_level;  // [instance] T x F

  bool operator==(const AttentionTensor&) const = default;
};

/// T-length series where absent positions carry no value (distinct from 0).
struct MaskedSeries {
  std::vector<double> values;
  std::vector<std::uint8_t> mask;  // 1 = present

  MaskedSeries() = default;
  explicit MaskedSeries(std::size_t length) : values(length, 0.0), mask(length, 0) {}

  /// Fully present series.
  static MaskedSeries dense(std::vector<double> v) {
    MaskedSeries s;
    s.mask.assign(v.size(), 1);
    s.values = std::move(v);
    return s;
  }

  std::size_t size() const noexcept { return values.size(); }
  bool present(std::size_t t) const { return mask[t] != 0; }

  void set(std::size_t t, double v) {
    values[t] = v;
    mask[t] = 1;
  }

  std::size_t present_count() const {
    std::size_t n = 0;
    for (auto m : mask) n += (m != 0);
    return n;
  }

  // Masked positions compare equal regardless of the value stored behind them.
  friend bool operator==(const MaskedSeries& a, const MaskedSeries& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t t = 0; t < a.size(); ++t) {
      if (a.present(t) != b.present(t)) return false;
      if (a.present(t) && a.values[t] != b.values[t]) return false;
    }
    return true;
  }
};

/// Closed subrange [lo, hi] of attention values.
struct AttentionRange {
  double lo = 0.0;
  double hi = 1.0;

  bool contains(double a) const { return a >= lo && a <= hi; }
  bool operator==(const AttentionRange&) const = default;
  auto operator<=>(const AttentionRange&) const = default;
};

using AoiSet = std::vector<AttentionRange>;

inline bool aoi_contains(const AoiSet& aoi, double a) {
  for (const auto& r : aoi)
    if (r.contains(a)) return true;
  return false;
}

enum class AttentionMode { kHistogram, kPercentile };
enum class AttentionLevel { kAuto, kEvent, kFeature };

/// How the optimal cluster count is read off the gap curve.
enum class GapRule {
  kOneStandardError,  // smallest k with gap_k >= gap_{k+1} - s_{k+1}
  kArgMax,            // largest gap, ties to the smallest k
};

/// How the n_ref reference dispersions are combined.
enum class RefAggregation { kMean, kSum };

/// Which curvature counts as the elbow of the merge-distance curve.
enum class ElbowRule {
  kConvex,    // largest positive second difference
  kAbsolute,  // largest |second difference|
};

enum class DistanceNormalization {
  kSeriesLength,    // divide by T
  kSharedSupport,   // divide by the number of positions both series have
};

struct AnalysisParams {
  AoiSet aoi{{0.0, 1.0}};
  AttentionMode attention_mode = AttentionMode::kHistogram;
  AttentionLevel attention_level = AttentionLevel::kAuto;
  double sample_fraction = 0.3;
  std::optional<double> noise_level;         // nullopt = AUTO (elbow)
  std::optional<std::size_t> cluster_count;  // nullopt = AUTO (gap statistic)
  std::size_t n_ref = 3;
  std::size_t k_max = 10;
  std::size_t bin_count = 10;
  std::vector<double> quantile_edges{10, 30, 50, 70, 90};
  std::uint64_t seed = 0;

  std::size_t smoothing_window = 5;
  ElbowRule elbow_rule = ElbowRule::kConvex;
  GapRule gap_rule = GapRule::kOneStandardError;
  RefAggregation ref_aggregation = RefAggregation::kMean;
  DistanceNormalization distance_normalization = DistanceNormalization::kSeriesLength;
  std::size_t class_a = 0;
  std::size_t class_b = 1;

  bool operator==(const AnalysisParams&) const = default;
};

/// Throws kInvalidParams describing the first violated constraint.
inline void validate_params(const AnalysisParams& p) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidParams, msg); };
  if (p.aoi.empty()) fail("AOI must contain at least one range");
  AoiSet sorted = p.aoi;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& r = sorted[i];
    if (!(r.lo >= 0.0 && r.hi <= 1.0 && r.lo <= r.hi)) fail("AOI range outside [0,1] or inverted");
    if (i > 0 && sorted[i - 1].hi >= r.lo) fail("AOI ranges overlap");
  }
  if (!(p.sample_fraction > 0.0 && p.sample_fraction <= 1.0)) fail("sample_fraction must be in (0,1]");
  if (p.noise_level && !(*p.noise_level >= 0.0 && *p.noise_level <= 1.0))
    fail("noise_level must be in [0,1]");
  if (p.cluster_count && *p.cluster_count == 0) fail("cluster_count must be positive");
  if (p.n_ref == 0) fail("n_ref must be positive");
  if (p.k_max == 0) fail("k_max must be positive");
  if (p.bin_count == 0) fail("bin_count must be positive");
  if (p.smoothing_window == 0 || p.smoothing_window % 2 == 0) fail("smoothing_window must be odd");
  if (p.quantile_edges.empty()) fail("quantile_edges must not be empty");
  for (std::size_t i = 0; i < p.quantile_edges.size(); ++i) {
    double q = p.quantile_edges[i];
    if (!(q > 0.0 && q < 100.0)) fail("quantile edges must lie in (0,100)");
    if (i > 0 && !(p.quantile_edges[i - 1] < q)) fail("quantile edges must be strictly ascending");
  }
  if (p.class_a == p.class_b) fail("compared classes must differ");
}

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind {
  kShape,
  kLabel,
  kEmptyClass,
  kValueRange,
  kFeatureTable,
  kAttributes,
  kAttentionShape,
  kAttentionRange,
  kEmbedding,
};

struct Violation {
  ViolationKind kind;
  std::string instance_id;
  std::optional<std::size_t> t;
  std::optional<std::size_t> f;
  std::optional<double> value;
  std::string message;

  bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

/// Reports every violated invariant; never throws on bad data.
inline ValidationReport validate_dataset(const SequenceDataset& ds, const AttentionTensor& att) {
  ValidationReport report;
  auto add = [&](ViolationKind k, const std::string& id, std::optional<std::size_t> t,
                 std::optional<std::size_t> f, std::optional<double> v, std::string msg) {
    report.push_back({k, id, t, f, v, std::move(msg)});
  };

  if (ds.T == 0 || ds.F == 0) add(ViolationKind::kShape, "", {}, {}, {}, "T and F must be positive");
  if (ds.L < 2) add(ViolationKind::kLabel, "", {}, {}, {}, "at least two classes required");

  if (ds.features.size() != ds.F)
    add(ViolationKind::kFeatureTable, "", {}, {}, {},
        "feature table has " + std::to_string(ds.features.size()) + " entries, expected " +
            std::to_string(ds.F));
  std::set<std::size_t> ids;
  for (const auto& fs : ds.features) {
    if (fs.id >= ds.F || !ids.insert(fs.id).second)
      add(ViolationKind::kFeatureTable, "", {}, fs.id, {}, "feature ids must be dense and unique");
    if (!(fs.value_min <= fs.value_max))
      add(ViolationKind::kFeatureTable, "", {}, fs.id, {}, "value_min > value_max for " + fs.name);
  }
  const bool features_ok = ds.features.size() == ds.F && ids.size() == ds.F;

  std::vector<std::size_t> per_class(ds.L, 0);
  const std::map<std::string, std::string>* first_attrs =
      ds.instances.empty() ? nullptr : &ds.instances.front().attributes;
  const bool want_embedding = ds.has_embedding();

  for (const auto& inst : ds.instances) {
    if (inst.label >= ds.L)
      add(ViolationKind::kLabel, inst.id, {}, {}, static_cast<double>(inst.label),
          "label outside [0,L)");
    else
      ++per_class[inst.label];

    if (inst.values.rows() != ds.T || inst.values.cols() != ds.F) {
      add(ViolationKind::kShape, inst.id, {}, {}, {},
          "values have shape " + std::to_string(inst.values.rows()) + "x" +
              std::to_string(inst.values.cols()) + ", expected " + std::to_string(ds.T) + "x" +
              std::to_string(ds.F));
    } else if (features_ok) {
      for (std::size_t t = 0; t < ds.T; ++t)
        for (std::size_t f = 0; f < ds.F; ++f) {
          double v = inst.values(t, f);
          const auto& spec = ds.features[f];
          if (!(v >= spec.value_min && v <= spec.value_max))
            add(ViolationKind::kValueRange, inst.id, t, f, v, "value outside feature range");
        }
    }

    if (first_attrs) {
      bool same_keys = inst.attributes.size() == first_attrs->size();
      if (same_keys) {
        auto a = inst.attributes.begin();
        for (auto b = first_attrs->begin(); b != first_attrs->end(); ++a, ++b)
          if (a->first != b->first) same_keys = false;
      }
      if (!same_keys)
        add(ViolationKind::kAttributes, inst.id, {}, {}, {}, "attribute keys differ from first instance");
    }
    if (inst.embedding2d.has_value() != want_embedding)
      add(ViolationKind::kEmbedding, inst.id, {}, {}, {}, "embedding present for only some instances");
  }
  for (std::size_t c = 0; c < per_class.size(); ++c)
    if (per_class[c] == 0)
      add(ViolationKind::kEmptyClass, "", {}, {}, static_cast<double>(c),
          "class " + std::to_string(c) + " has no instances");

  if (att.event_level.size() != ds.instances.size()) {
    add(ViolationKind::kAttentionShape, "", {}, {}, {},
        "event attention has " + std::to_string(att.event_level.size()) + " instances, expected " +
            std::to_string(ds.instances.size()));
  }
  for (std::size_t i = 0; i < att.event_level.size(); ++i) {
    const std::string id = i < ds.instances.size() ? ds.instances[i].id : std::to_string(i);
    const auto& row = att.event_level[i];
    if (row.size() != ds.T)
      add(ViolationKind::kAttentionShape, id, {}, {}, {},
          "event attention length " + std::to_string(row.size()) + ", expected " + std::to_string(ds.T));
    for (std::size_t t = 0; t < row.size(); ++t)
      if (!(row[t] >= 0.0 && row[t] <= 1.0))
        add(ViolationKind::kAttentionRange, id, t, {}, row[t], "attention outside [0,1]");
  }
  if (att.feature_level) {
    const auto& fl = *att.feature_level;
    if (fl.size() != ds.instances.size())
      add(ViolationKind::kAttentionShape, "", {}, {}, {}, "feature attention instance count mismatch");
    for (std::size_t i = 0; i < fl.size(); ++i) {
      const std::string id = i < ds.instances.size() ? ds.instances[i].id : std::to_string(i);
      if (fl[i].rows() != ds.T || fl[i].cols() != ds.F) {
        add(ViolationKind::kAttentionShape, id, {}, {}, {}, "feature attention shape mismatch");
        continue;
      }
      for (std::size_t t = 0; t < ds.T; ++t)
        for (std::size_t f = 0; f < ds.F; ++f) {
          double a = fl[i](t, f);
          if (!(a >= 0.0 && a <= 1.0))
            add(ViolationKind::kAttentionRange, id, t, f, a, "feature attention outside [0,1]");
        }
    }
  }
  return report;
}

inline std::string describe(const Violation& v) {
  std::ostringstream os;
  os << v.message;
  if (!v.instance_id.empty()) os << " (instance " << v.instance_id;
  else os << " (";
  if (v.t) os << (v.instance_id.empty() ? "" : ", ") << "t=" << *v.t;
  if (v.f) os << ", f=" << *v.f;
  if (v.value) os << ", value=" << *v.value;
  os << ")";
  return os.str();
}

}  // namespace seqattr
