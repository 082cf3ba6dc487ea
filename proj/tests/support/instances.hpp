#pragma once

#include <cstdint>
#include <vector>

#include "mhtc/models.hpp"
#include "mhtc/util.hpp"
#include "oracles.hpp"

namespace testing {

/// A small labelled problem in both the library's and the oracle's encoding.
/// Label 0 is the positive class (+1).
struct Instance {
  oracle::Dataset data;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  mhtc::FeatureMatrix X;
};

/// Gaussian features, label from the sign of a noisy first coordinate.
inline Instance random_instance(std::uint64_t seed, std::size_t n, std::size_t d) {
  mhtc::SeededRng rng(seed);
  Instance inst;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(d);
    for (auto& v : x) v = rng.standard_normal();
    const double s = x[0] + 0.3 * rng.standard_normal();
    const std::size_t label = s >= 0 ? 0 : 1;
    inst.data.x.push_back(x);
    inst.data.y.push_back(label == 0 ? 1.0 : -1.0);
    inst.rows.push_back(x);
    inst.labels.push_back(label);
  }
  inst.X = mhtc::FeatureMatrix::from_rows(inst.rows);
  return inst;
}

inline std::vector<double> weights_of(const mhtc::LinearModel& m) {
  return {m.weights[0].data(), m.weights[0].data() + m.weights[0].size()};
}

/// Label the oracle's (w, b) assigns to x, with a zero score going to the positive class.
inline std::size_t oracle_predict(const std::vector<double>& w, double b, const std::vector<double>& x) {
  double s = b;
  for (std::size_t j = 0; j < x.size(); ++j) s += w[j] * x[j];
  return s >= 0 ? 0 : 1;
}

}  // namespace testing
