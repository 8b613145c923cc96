#include "ami/witness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ami/errors.hpp"
#include "json.hpp"

namespace ami {

namespace {

using nlohmann::json;

constexpr double kScoreDelta = 1e-6;

double relative_change(double before, double after) {
  return std::abs(after - before) / (std::abs(before) + kScoreDelta);
}

// Median with the usual midpoint rule for even counts.
double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ScoreTrace median_scores(const ActivationTrace& base,
                         const std::vector<ActivationTrace>& variants) {
  ScoreTrace scores;
  for (std::size_t li = 0; li < base.size(); ++li) {
    LayerTrace layer{base[li].layer, std::vector<double>(base[li].values.size(), 0.0)};
    for (std::size_t u = 0; u < layer.values.size(); ++u) {
      std::vector<double> changes;
      changes.reserve(variants.size());
      for (const auto& var : variants) {
        changes.push_back(relative_change(base[li].values[u], var[li].values[u]));
      }
      layer.values[u] = median(std::move(changes));
    }
    scores.push_back(std::move(layer));
  }
  return scores;
}

std::vector<std::size_t> resolve_observed(const Network& net,
                                          const std::vector<std::size_t>& requested) {
  return requested.empty() ? net.spec.relu_layers() : requested;
}

}  // namespace

std::vector<std::size_t> WitnessMap::union_for_layer(std::size_t layer) const {
  std::vector<std::size_t> all;
  for (const auto& [name, layers] : attrs) {
    auto it = layers.find(layer);
    if (it != layers.end()) {
      all.insert(all.end(), it->second.begin(), it->second.end());
    }
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

std::vector<std::size_t> WitnessMap::non_witnesses(std::size_t layer,
                                                   std::size_t unit_count) const {
  const auto witnesses = union_for_layer(layer);
  std::vector<std::size_t> rest;
  std::size_t w = 0;
  for (std::size_t u = 0; u < unit_count; ++u) {
    if (w < witnesses.size() && witnesses[w] == u) {
      ++w;
    } else {
      rest.push_back(u);
    }
  }
  return rest;
}

std::vector<std::string> WitnessMap::attribute_names() const {
  std::vector<std::string> names;
  for (const auto& [name, layers] : attrs) names.push_back(name);
  return names;
}

std::vector<std::size_t> WitnessMap::layer_ids() const {
  std::vector<std::size_t> ids;
  for (const auto& [name, layers] : attrs) {
    for (const auto& [layer, units] : layers) ids.push_back(layer);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

ScoreTrace substitution_test(const Network& net, const Dataset& ds,
                             std::size_t image_index, const std::string& attribute,
                             const std::vector<std::size_t>& donor_variants,
                             const std::vector<std::size_t>& observed_layers) {
  const auto observed = resolve_observed(net, observed_layers);
  ds.attribute_index(attribute);  // throws LookupError on unknown attribute
  if (donor_variants.empty()) {
    throw ConfigError("substitution test needs at least one donor variant");
  }
  const ActivationTrace base = trace(net, ds.images[image_index], observed);
  std::vector<ActivationTrace> substituted;
  substituted.reserve(donor_variants.size());
  for (std::size_t donor : donor_variants) {
    const Tensor img = substitute_region(ds, image_index, attribute, donor);
    substituted.push_back(trace(net, img, observed));
  }
  return median_scores(base, substituted);
}

ScoreTrace preservation_test(const Network& net, const Dataset& ds,
                             std::size_t image_index, const std::string& attribute,
                             std::size_t randomizations, double amplitude, Rng& rng,
                             const std::vector<std::size_t>& observed_layers) {
  const auto observed = resolve_observed(net, observed_layers);
  const std::size_t a = ds.attribute_index(attribute);
  if (randomizations == 0) {
    throw ConfigError("preservation test needs at least one randomization");
  }
  const ActivationTrace base = trace(net, ds.images[image_index], observed);
  std::vector<ActivationTrace> randomized;
  randomized.reserve(randomizations);
  for (std::size_t r = 0; r < randomizations; ++r) {
    const Tensor img =
        randomize_background(ds.images[image_index], ds.attributes[a], amplitude, rng);
    randomized.push_back(trace(net, img, observed));
  }
  return median_scores(base, randomized);
}

WitnessMap extract_witnesses(const Network& net, const Dataset& ds,
                             const WitnessConfig& config) {
  if (config.sample_count == 0 || config.sample_count > ds.size()) {
    throw ConfigError("sample count must be in [1, dataset size]");
  }
  const auto observed = resolve_observed(net, config.observed_layers);

  // Seeded sample, then ascending order so aggregation is index-ordered.
  std::vector<std::size_t> indices(ds.size());
  std::iota(indices.begin(), indices.end(), 0);
  Rng sample_rng(Rng::mix(config.seed, 0xa11));
  sample_rng.shuffle(indices);
  indices.resize(config.sample_count);
  std::sort(indices.begin(), indices.end());

  // support[attr][layer slot][unit]
  std::map<std::string, std::vector<std::vector<std::size_t>>> support;
  std::vector<std::size_t> unit_counts(observed.size());
  for (std::size_t li = 0; li < observed.size(); ++li) {
    unit_counts[li] = net.unit_count(observed[li]);
  }
  for (const auto& attr : ds.attributes) {
    auto& per_layer = support[attr.name];
    per_layer.resize(observed.size());
    for (std::size_t li = 0; li < observed.size(); ++li) {
      per_layer[li].assign(unit_counts[li], 0);
    }
  }

  for (std::size_t idx : indices) {
    // Per-image RNG stream keeps the result independent of evaluation order.
    Rng pres_rng(Rng::mix(config.seed, idx));
    for (std::size_t a = 0; a < ds.attributes.size(); ++a) {
      const AttributeSpec& attr = ds.attributes[a];
      const std::size_t own = ds.variant_combo(ds.labels[idx])[a];
      std::vector<std::size_t> donors;
      for (std::size_t v = 0; v < attr.variants.size(); ++v) {
        if (v != own) donors.push_back(v);
      }
      const ScoreTrace sub = substitution_test(net, ds, idx, attr.name, donors, observed);
      const ScoreTrace pres = preservation_test(net, ds, idx, attr.name,
                                                config.randomizations, ds.noise_sigma,
                                                pres_rng, observed);
      auto& per_layer = support[attr.name];
      for (std::size_t li = 0; li < observed.size(); ++li) {
        for (std::size_t u = 0; u < unit_counts[li]; ++u) {
          if (sub[li].values[u] >= config.tau_sub &&
              pres[li].values[u] <= config.tau_pres) {
            per_layer[li][u]++;
          }
        }
      }
    }
  }

  WitnessMap map;
  map.config = config;
  map.config.observed_layers = observed;
  const double needed = config.min_support * static_cast<double>(config.sample_count);
  for (const auto& [name, per_layer] : support) {
    for (std::size_t li = 0; li < observed.size(); ++li) {
      std::vector<std::size_t> units;
      for (std::size_t u = 0; u < unit_counts[li]; ++u) {
        if (static_cast<double>(per_layer[li][u]) >= needed) units.push_back(u);
      }
      if (!units.empty()) map.attrs[name][observed[li]] = std::move(units);
    }
  }
  for (std::size_t li = 0; li < observed.size(); ++li) {
    if (map.union_for_layer(observed[li]).size() == unit_counts[li]) {
      map.warnings.push_back("layer " + std::to_string(observed[li]) +
                             ": every unit is a witness; weakening has no targets");
    }
  }
  return map;
}

std::string witness_map_to_json(const WitnessMap& map) {
  json root;
  for (const auto& [name, layers] : map.attrs) {
    json per_layer = json::object();
    for (const auto& [layer, units] : layers) {
      per_layer[std::to_string(layer)] = units;
    }
    root[name] = per_layer;
  }
  root["config"] = json{{"sample_count", map.config.sample_count},
                        {"tau_sub", map.config.tau_sub},
                        {"tau_pres", map.config.tau_pres},
                        {"min_support", map.config.min_support},
                        {"randomizations", map.config.randomizations},
                        {"seed", map.config.seed},
                        {"observed_layers", map.config.observed_layers},
                        {"warnings", map.warnings}};
  return root.dump(2) + "\n";
}

WitnessMap witness_map_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("witness map: ") + e.what());
  }
  WitnessMap map;
  if (!root.contains("config")) throw ParseError("witness map: missing config");
  const json& cfg = root.at("config");
  map.config.sample_count = cfg.at("sample_count").get<std::size_t>();
  map.config.tau_sub = cfg.at("tau_sub").get<double>();
  map.config.tau_pres = cfg.at("tau_pres").get<double>();
  map.config.min_support = cfg.at("min_support").get<double>();
  map.config.randomizations = cfg.at("randomizations").get<std::size_t>();
  map.config.seed = cfg.at("seed").get<std::uint64_t>();
  map.config.observed_layers = cfg.at("observed_layers").get<std::vector<std::size_t>>();
  map.warnings = cfg.at("warnings").get<std::vector<std::string>>();
  for (const auto& [key, value] : root.items()) {
    if (key == "config") continue;
    for (const auto& [layer, units] : value.items()) {
      auto list = units.get<std::vector<std::size_t>>();
      std::sort(list.begin(), list.end());
      map.attrs[key][static_cast<std::size_t>(std::stoull(layer))] = std::move(list);
    }
  }
  return map;
}

void save_witness_map(const WitnessMap& map, const std::filesystem::path& path) {
  write_file(path, witness_map_to_json(map));
}

WitnessMap load_witness_map(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return witness_map_from_json(std::string(b.begin(), b.end()));
}

}  // namespace ami
