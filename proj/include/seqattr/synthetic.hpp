#pragma once

// Seeded synthetic bundles for demos and tests: each class mixes a few
// temporal prototypes per feature, plus a handful of erratic instances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "seqattr/core.hpp"
#include "seqattr/stats.hpp"

namespace seqattr {

struct SyntheticSpec {
  std::size_t per_class = 40;
  std::size_t L = 2;
  std::size_t T = 24;
  std::size_t F = 3;
  std::size_t prototypes = 3;
  std::size_t outliers_per_class = 2;
  bool feature_attention = false;
  bool embedding = true;
  std::uint64_t seed = 1;
};

struct SyntheticBundle {
  SequenceDataset dataset;
  AttentionTensor attention;
};

inline SyntheticBundle make_synthetic(const SyntheticSpec& spec) {
  constexpr double kMax = 10.0;
  Rng rng(mix_seed(spec.seed, 0x5eed));
  std::normal_distribution<double> noise(0.0, 0.25);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticBundle b;
  auto& ds = b.dataset;
  ds.T = spec.T;
  ds.F = spec.F;
  ds.L = spec.L;
  for (std::size_t f = 0; f < spec.F; ++f)
    ds.features.push_back({f, "f" + std::to_string(f), 0.0, kMax, FeatureKind::kNumeric});

  // prototype[c][p][f] -> (level, slope, phase)
  struct Proto {
    double level, slope, phase;
  };
  std::vector<std::vector<std::vector<Proto>>> protos(spec.L);
  for (auto& pc : protos) {
    pc.resize(spec.prototypes);
    for (auto& pp : pc)
      for (std::size_t f = 0; f < spec.F; ++f)
        pp.push_back({2.0 + 6.0 * unit(rng), (unit(rng) - 0.5) * 4.0 / static_cast<double>(spec.T),
                      unit(rng) * 6.283185307179586});
  }

  const char* groups[] = {"a", "b", "c"};
  if (spec.feature_attention) b.attention.feature_level.emplace();
  std::size_t next_id = 0;
  for (std::size_t c = 0; c < spec.L; ++c)
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      InstanceRecord inst;
      inst.id = "i" + std::to_string(next_id++);
      inst.label = c;
      inst.values = Matrix(spec.T, spec.F);
      const bool erratic = i >= spec.per_class - std::min(spec.outliers_per_class, spec.per_class);
      const auto& proto = protos[c][i % spec.prototypes];
      std::vector<double> event(spec.T);
      Matrix fatt(spec.T, spec.F);
      for (std::size_t t = 0; t < spec.T; ++t) {
        double att_sum = 0.0;
        for (std::size_t f = 0; f < spec.F; ++f) {
          const auto& p = proto[f];
          double v = p.level + p.slope * static_cast<double>(t) +
                     std::sin(p.phase + static_cast<double>(t) * 0.3) + noise(rng);
          if (erratic) v = kMax * unit(rng);
          v = std::clamp(v, 0.0, kMax);
          inst.values(t, f) = v;
          const double a = std::clamp(0.15 + 0.7 * std::abs(v - p.level) / 3.0 * unit(rng), 0.0, 1.0);
          fatt(t, f) = a;
          att_sum += a;
        }
        event[t] = std::clamp(att_sum / static_cast<double>(spec.F), 0.0, 1.0);
      }
      inst.attributes["group"] = groups[(i + c) % 3];
      if (spec.embedding)
        inst.embedding2d = std::array<double, 2>{inst.values(0, 0) + static_cast<double>(c) * 5.0,
                                                 inst.values(spec.T - 1, spec.F > 1 ? 1 : 0)};
      b.attention.event_level.push_back(std::move(event));
      if (spec.feature_attention) b.attention.feature_level->push_back(std::move(fatt));
      ds.instances.push_back(std::move(inst));
    }
  return b;
}

}  // namespace seqattr
