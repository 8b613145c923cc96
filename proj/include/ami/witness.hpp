#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ami/datagen.hpp"
#include "ami/instrumentation.hpp"
#include "ami/network.hpp"

namespace ami {

struct WitnessConfig {
  std::size_t sample_count = 50;
  double tau_sub = 0.2;       // substitution score at or above -> responsive
  double tau_pres = 0.5;      // preservation score at or below -> stable
  double min_support = 0.6;   // fraction of sampled images that must agree
  std::size_t randomizations = 5;
  std::uint64_t seed = 1234;
  std::vector<std::size_t> observed_layers;  // empty -> every relu layer
};

// attribute -> layer -> sorted unit indices, plus the config that produced
// it. Deterministic given (model, dataset, config).
struct WitnessMap {
  std::map<std::string, std::map<std::size_t, std::vector<std::size_t>>> attrs;
  WitnessConfig config;
  std::vector<std::string> warnings;

  // Sorted union of all attributes' witnesses at a layer.
  std::vector<std::size_t> union_for_layer(std::size_t layer) const;
  // Complement of the union within [0, unit_count).
  std::vector<std::size_t> non_witnesses(std::size_t layer, std::size_t unit_count) const;
  std::vector<std::string> attribute_names() const;
  std::vector<std::size_t> layer_ids() const;
};

// Per-unit relative-change scores, same shape as an ActivationTrace.
using ScoreTrace = std::vector<LayerTrace>;

// Forward direction of the feature/neuron link: re-render the attribute with
// each donor variant and score every observed unit by the median relative
// change |v_sub - v| / (|v| + 1e-6).
ScoreTrace substitution_test(const Network& net, const Dataset& ds,
                             std::size_t image_index, const std::string& attribute,
                             const std::vector<std::size_t>& donor_variants,
                             const std::vector<std::size_t>& observed_layers);

// Reverse direction: keep the attribute, replace everything else with fresh
// noise, score by median relative change. Low score = the unit survives on
// the feature alone.
ScoreTrace preservation_test(const Network& net, const Dataset& ds,
                             std::size_t image_index, const std::string& attribute,
                             std::size_t randomizations, double amplitude, Rng& rng,
                             const std::vector<std::size_t>& observed_layers);

// A unit is a witness for an attribute iff substitution >= tau_sub and
// preservation <= tau_pres on at least min_support of the sampled images.
WitnessMap extract_witnesses(const Network& net, const Dataset& ds,
                             const WitnessConfig& config);

// JSON file: {<attribute>: {<layer>: [indices...]}, "config": {...}} with
// canonical key order and sorted indices.
std::string witness_map_to_json(const WitnessMap& map);
WitnessMap witness_map_from_json(const std::string& text);
void save_witness_map(const WitnessMap& map, const std::filesystem::path& path);
WitnessMap load_witness_map(const std::filesystem::path& path);

}  // namespace ami
