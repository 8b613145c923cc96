#include "ami/instrumentation.hpp"

#include <algorithm>
#include <cmath>

#include "ami/errors.hpp"

namespace ami {

std::vector<double> unit_values(const Tensor& activation) {
  if (activation.rank() == 1) {
    return activation.data;
  }
  if (activation.rank() == 3) {
    const std::size_t c = activation.shape[0];
    const std::size_t hw = activation.shape[1] * activation.shape[2];
    std::vector<double> means(c);
    for (std::size_t ci = 0; ci < c; ++ci) {
      double sum = 0.0;
      for (std::size_t p = 0; p < hw; ++p) {
        sum += activation.data[ci * hw + p];
      }
      means[ci] = sum / static_cast<double>(hw);
    }
    return means;
  }
  throw DimensionError("unit_values expects rank-1 or rank-3 activations, got " +
                       shape_str(activation.shape));
}

ActivationTrace trace(const Network& net, const Tensor& image,
                      const std::vector<std::size_t>& observed_layers) {
  const auto relus = net.spec.relu_layers();
  for (std::size_t id : observed_layers) {
    if (std::find(relus.begin(), relus.end(), id) == relus.end()) {
      throw ConfigError("layer " + std::to_string(id) + " is not a relu layer");
    }
  }
  ActivationTrace result;
  Tensor cur = image;
  for (std::size_t i = 0; i < net.spec.layers.size(); ++i) {
    cur = net.apply_layer(i, cur);
    if (std::find(observed_layers.begin(), observed_layers.end(), i) !=
        observed_layers.end()) {
      result.push_back({i, unit_values(cur)});
    }
  }
  return result;
}

WitnessStats witness_stats(const std::vector<double>& values,
                           const std::vector<std::size_t>& witness_units) {
  if (witness_units.empty()) {
    throw LookupError("witness_stats on an empty witness set");
  }
  WitnessStats s;
  s.count = witness_units.size();
  double sum = 0.0;
  double vmin = 0.0;
  for (std::size_t i = 0; i < witness_units.size(); ++i) {
    const std::size_t u = witness_units[i];
    if (u >= values.size()) {
      throw LookupError("witness unit " + std::to_string(u) + " out of range");
    }
    sum += values[u];
    vmin = i == 0 ? values[u] : std::min(vmin, values[u]);
  }
  s.mean = sum / static_cast<double>(s.count);
  double sq = 0.0;
  for (std::size_t u : witness_units) {
    const double d = values[u] - s.mean;
    sq += d * d;
  }
  s.stddev = std::sqrt(sq / static_cast<double>(s.count));
  s.min = vmin;
  return s;
}

}  // namespace ami
