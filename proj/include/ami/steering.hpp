#pragma once

#include <string>
#include <vector>

#include "ami/instrumentation.hpp"
#include "ami/model.hpp"
#include "ami/witness.hpp"

namespace ami {

// AboveMeanOnly leaves values at or below the witness mean untouched;
// for those the raw formula would amplify instead of reduce.
enum class WeakenMode { AboveMeanOnly, All };

// Formula uses sigma in the exponent; CodeCompat drops it, matching the
// published listing `2.15 - exp(-x/60)` with x = v - min.
enum class StrengthenMode { Formula, CodeCompat };

std::string weaken_mode_name(WeakenMode mode);
WeakenMode weaken_mode_from_name(const std::string& name);
std::string strengthen_mode_name(StrengthenMode mode);
StrengthenMode strengthen_mode_from_name(const std::string& name);

struct SteeringParams {
  double alpha = 100.0;
  double beta = 60.0;
  double epsilon = 1.15;
  double sigma_floor = 1e-8;
  WeakenMode weaken_mode = WeakenMode::AboveMeanOnly;
  StrengthenMode strengthen_mode = StrengthenMode::Formula;
  // Empty means every layer the witness map observed.
  std::vector<std::size_t> steered_layers;

  void validate() const;  // throws ConfigError
};

// v' = e^{-(v-mu)/(alpha*sigma)} * v. Callers floor sigma first.
double weaken_value(double v, double mu, double sigma, double alpha);

// v' = epsilon*v + (1 - e^{-(v-min)/(beta*sigma)}) * v.
double strengthen_value(double v, double vmin, double sigma, double beta,
                        double epsilon);

// Multiplicative forms used when applying steering, so v = 0 stays 0
// without a 0/0. Exponents are clamped to +-700 to keep factors finite.
double weaken_factor(double v, double mu, double sigma, double alpha,
                     WeakenMode mode);
double strengthen_factor(double v, double vmin, double sigma, double beta,
                         double epsilon, StrengthenMode mode);

struct LayerFactors {
  std::size_t layer = 0;
  std::vector<double> factors;  // one per unit (conv: per channel)
};

struct SteerResult {
  std::vector<LayerFactors> layers;
  std::vector<std::size_t> skipped;  // observed layers with no witnesses
};

// Factors for every layer of an unsteered trace. Witness units (union over
// attribute_set; empty set means all attributes) get strengthen_factor,
// the rest weaken_factor, with (mean, sigma, min) taken from witness_stats
// of that layer's witness units. Layers without witnesses are skipped with
// identity factors.
SteerResult steer_trace(const ActivationTrace& activations, const WitnessMap& map,
                        const std::vector<std::string>& attribute_set,
                        const SteeringParams& params);

// Forward pass that rescales each steered relu layer in flight: factors for
// layer L come from this pass's own pre-steering values at L, so deeper
// layers see steered upstream activations. Conv factors multiply the whole
// channel map. Throws ConfigError when the map and network disagree on
// layers or unit counts.
Prediction attribute_predict(const Network& net, const WitnessMap& map,
                             const SteeringParams& params, const Tensor& image);

}  // namespace ami
