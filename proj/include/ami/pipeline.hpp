#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ami/attacks.hpp"
#include "ami/datagen.hpp"
#include "ami/evaluation.hpp"
#include "ami/model.hpp"
#include "ami/steering.hpp"
#include "ami/witness.hpp"

namespace ami {

// Everything one end-to-end run needs: generate, train, find witnesses,
// attack part of the holdout, detect over holdout + attacks, aggregate.
struct PipelineConfig {
  DatagenConfig dataset;
  Hyper train;
  double train_fraction = 0.8;
  WitnessConfig witness;
  SteeringParams steering;
  AttackConfig attack;
  std::size_t attack_count = 64;  // holdout prefix to attack

  void validate() const;  // throws ConfigError
};

std::string pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const std::string& text);

struct PipelineResult {
  // (artifact file name, content digest), in creation order.
  std::vector<std::pair<std::string, std::string>> artifacts;
  MetricsReport report;
  double train_accuracy = 0.0;
  double holdout_accuracy = 0.0;
  std::size_t record_count = 0;
};

// Writes dataset.amld, model.amlm, witness.json, adv.amld, records.csv,
// metrics.json into out_dir. Bitwise deterministic given the config.
PipelineResult run_pipeline(const PipelineConfig& config,
                            const std::filesystem::path& out_dir);

struct DeterminismResult {
  bool passed = false;
  // Per repetition, artifact digests in creation order.
  std::vector<std::vector<std::pair<std::string, std::string>>> runs;
  std::string first_divergent;  // set when !passed
};

// Runs the pipeline `repetitions` times into rep<N>/ subdirectories and
// compares digests pairwise. reseed_between_runs shifts the dataset seed
// each repetition; that is the negative control and must fail at the first
// artifact (dataset.amld).
DeterminismResult determinism_check(const PipelineConfig& config,
                                    std::size_t repetitions,
                                    const std::filesystem::path& work_dir,
                                    bool reseed_between_runs = false);

}  // namespace ami
