#pragma once

#include <cstddef>
#include <vector>

#include "ami/network.hpp"

namespace ami {

// Post-activation unit values of one observed layer. Dense layers report one
// value per unit; conv layers report one value per channel (the mean of the
// channel's post-relu feature map) — a channel detects a feature across
// space, so channel granularity matches the attribute-level notion of a
// neuron here.
struct LayerTrace {
  std::size_t layer = 0;
  std::vector<double> values;
};

using ActivationTrace = std::vector<LayerTrace>;

std::vector<double> unit_values(const Tensor& activation);

// Records unit values at the given relu layers. Observation is side-effect
// free: the forward computation is exactly the one predict() runs.
ActivationTrace trace(const Network& net, const Tensor& image,
                      const std::vector<std::size_t>& observed_layers);

struct WitnessStats {
  double mean = 0.0;
  double stddev = 0.0;  // population (divisor = count)
  double min = 0.0;
  std::size_t count = 0;
};

// Stats over exactly the witness units of one layer's trace. Throws
// LookupError on an empty witness set or an out-of-range index.
WitnessStats witness_stats(const std::vector<double>& values,
                           const std::vector<std::size_t>& witness_units);

}  // namespace ami
