#include "ami/steering.hpp"

#include <algorithm>
#include <cmath>

#include "ami/errors.hpp"
#include "ami/ops.hpp"

namespace ami {

namespace {

constexpr double kExpClamp = 700.0;

double clamped_exp(double x) {
  return std::exp(std::clamp(x, -kExpClamp, kExpClamp));
}

double floored(double sigma, double floor) {
  return sigma < floor ? floor : sigma;
}

std::vector<std::size_t> resolve_steered(const WitnessMap& map,
                                         const SteeringParams& params) {
  return params.steered_layers.empty() ? map.config.observed_layers
                                       : params.steered_layers;
}

// Per-unit factors for one layer's unsteered values, or identity when the
// layer has no witnesses (skipped = true).
std::vector<double> layer_factors(const std::vector<double>& values,
                                  const std::vector<std::size_t>& witnesses,
                                  const SteeringParams& params, bool* skipped) {
  std::vector<double> factors(values.size(), 1.0);
  if (witnesses.empty()) {
    *skipped = true;
    return factors;
  }
  *skipped = false;
  const WitnessStats stats = witness_stats(values, witnesses);
  const double sigma = floored(stats.stddev, params.sigma_floor);
  std::size_t w = 0;
  for (std::size_t u = 0; u < values.size(); ++u) {
    if (w < witnesses.size() && witnesses[w] == u) {
      factors[u] = strengthen_factor(values[u], stats.min, sigma, params.beta,
                                     params.epsilon, params.strengthen_mode);
      ++w;
    } else {
      factors[u] = weaken_factor(values[u], stats.mean, sigma, params.alpha,
                                 params.weaken_mode);
    }
  }
  return factors;
}

void apply_factors(Tensor& activation, const std::vector<double>& factors) {
  if (activation.rank() == 1) {
    for (std::size_t u = 0; u < factors.size(); ++u) activation.data[u] *= factors[u];
    return;
  }
  const std::size_t hw = activation.shape[1] * activation.shape[2];
  for (std::size_t c = 0; c < factors.size(); ++c) {
    for (std::size_t i = 0; i < hw; ++i) activation.data[c * hw + i] *= factors[c];
  }
}

}  // namespace

std::string weaken_mode_name(WeakenMode mode) {
  return mode == WeakenMode::AboveMeanOnly ? "above-mean" : "all";
}

WeakenMode weaken_mode_from_name(const std::string& name) {
  if (name == "above-mean") return WeakenMode::AboveMeanOnly;
  if (name == "all") return WeakenMode::All;
  throw ConfigError("unknown weaken mode '" + name + "' (use above-mean or all)");
}

std::string strengthen_mode_name(StrengthenMode mode) {
  return mode == StrengthenMode::Formula ? "formula" : "code-compat";
}

StrengthenMode strengthen_mode_from_name(const std::string& name) {
  if (name == "formula") return StrengthenMode::Formula;
  if (name == "code-compat") return StrengthenMode::CodeCompat;
  throw ConfigError("unknown strengthen mode '" + name +
                    "' (use formula or code-compat)");
}

void SteeringParams::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(sigma_floor > 0.0)) throw ConfigError("sigma floor must be positive");
}

double weaken_value(double v, double mu, double sigma, double alpha) {
  return clamped_exp(-(v - mu) / (alpha * sigma)) * v;
}

double strengthen_value(double v, double vmin, double sigma, double beta,
                        double epsilon) {
  return epsilon * v + (1.0 - clamped_exp(-(v - vmin) / (beta * sigma))) * v;
}

double weaken_factor(double v, double mu, double sigma, double alpha,
                     WeakenMode mode) {
  if (mode == WeakenMode::AboveMeanOnly && v <= mu) return 1.0;
  return clamped_exp(-(v - mu) / (alpha * sigma));
}

double strengthen_factor(double v, double vmin, double sigma, double beta,
                         double epsilon, StrengthenMode mode) {
  const double scale = mode == StrengthenMode::Formula ? beta * sigma : beta;
  return epsilon + 1.0 - clamped_exp(-(v - vmin) / scale);
}

SteerResult steer_trace(const ActivationTrace& activations, const WitnessMap& map,
                        const std::vector<std::string>& attribute_set,
                        const SteeringParams& params) {
  params.validate();
  SteerResult result;
  for (const LayerTrace& layer : activations) {
    std::vector<std::size_t> witnesses;
    if (attribute_set.empty()) {
      witnesses = map.union_for_layer(layer.layer);
    } else {
      for (const std::string& name : attribute_set) {
        auto it = map.attrs.find(name);
        if (it == map.attrs.end()) {
          throw LookupError("no witnesses recorded for attribute '" + name + "'");
        }
        auto lt = it->second.find(layer.layer);
        if (lt == it->second.end()) continue;
        witnesses.insert(witnesses.end(), lt->second.begin(), lt->second.end());
      }
      std::sort(witnesses.begin(), witnesses.end());
      witnesses.erase(std::unique(witnesses.begin(), witnesses.end()),
                      witnesses.end());
    }
    bool skipped = false;
    LayerFactors lf{layer.layer,
                    layer_factors(layer.values, witnesses, params, &skipped)};
    if (skipped) result.skipped.push_back(layer.layer);
    result.layers.push_back(std::move(lf));
  }
  return result;
}

Prediction attribute_predict(const Network& net, const WitnessMap& map,
                             const SteeringParams& params, const Tensor& image) {
  params.validate();
  const std::vector<std::size_t> steered = resolve_steered(map, params);
  const std::vector<std::size_t> relus = net.spec.relu_layers();
  for (std::size_t layer : steered) {
    if (std::find(relus.begin(), relus.end(), layer) == relus.end()) {
      throw ConfigError("steered layer " + std::to_string(layer) +
                        " is not a relu layer of this network");
    }
    const std::size_t units = net.unit_count(layer);
    for (std::size_t u : map.union_for_layer(layer)) {
      if (u >= units) {
        throw ConfigError("witness unit " + std::to_string(u) + " out of range (" +
                          std::to_string(units) + ") at layer " +
                          std::to_string(layer));
      }
    }
  }

  Tensor current = image;
  for (std::size_t i = 0; i < net.spec.layers.size(); ++i) {
    current = net.apply_layer(i, current);
    if (std::find(steered.begin(), steered.end(), i) == steered.end()) continue;
    const std::vector<double> values = unit_values(current);
    bool skipped = false;
    const std::vector<double> factors =
        layer_factors(values, map.union_for_layer(i), params, &skipped);
    if (!skipped) apply_factors(current, factors);
  }

  Prediction pred;
  pred.logits = current;
  pred.probabilities = ops::softmax(current);
  pred.label = 0;
  for (std::size_t k = 1; k < current.data.size(); ++k) {
    if (current.data[k] > current.data[pred.label]) pred.label = k;
  }
  return pred;
}

}  // namespace ami
