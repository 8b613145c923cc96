#include "ami/pipeline.hpp"

#include <numeric>

#include "ami/errors.hpp"
#include "json.hpp"

namespace ami {

namespace {

using nlohmann::json;

std::string digest_of(const Bytes& bytes) { return digest_hex(bytes); }

std::string digest_of(const std::string& text) {
  return digest_of(Bytes(text.begin(), text.end()));
}

json datagen_to_json(const DatagenConfig& c) {
  return json{{"classes", c.classes},   {"per_class", c.per_class},
              {"height", c.height},     {"width", c.width},
              {"noise_sigma", c.noise_sigma}, {"jitter", c.jitter},
              {"seed", c.seed}};
}

DatagenConfig datagen_from_json(const json& j) {
  DatagenConfig c;
  c.classes = j.value("classes", c.classes);
  c.per_class = j.value("per_class", c.per_class);
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.jitter = j.value("jitter", c.jitter);
  c.seed = j.value("seed", c.seed);
  return c;
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must be inside (0, 1)");
  }
  if (attack_count == 0) throw ConfigError("attack count must be at least 1");
  steering.validate();
  attack.validate();
}

std::string pipeline_config_to_json(const PipelineConfig& config) {
  json j;
  j["dataset"] = datagen_to_json(config.dataset);
  j["train"] = json{{"epochs", config.train.epochs},
                    {"batch", config.train.batch},
                    {"learning_rate", config.train.learning_rate},
                    {"seed", config.train.seed}};
  j["train_fraction"] = config.train_fraction;
  j["witness"] = json{{"sample_count", config.witness.sample_count},
                      {"tau_sub", config.witness.tau_sub},
                      {"tau_pres", config.witness.tau_pres},
                      {"min_support", config.witness.min_support},
                      {"randomizations", config.witness.randomizations},
                      {"seed", config.witness.seed},
                      {"observed_layers", config.witness.observed_layers}};
  j["steering"] = json{
      {"alpha", config.steering.alpha},
      {"beta", config.steering.beta},
      {"epsilon", config.steering.epsilon},
      {"sigma_floor", config.steering.sigma_floor},
      {"weaken_mode", weaken_mode_name(config.steering.weaken_mode)},
      {"strengthen_mode", strengthen_mode_name(config.steering.strengthen_mode)},
      {"steered_layers", config.steering.steered_layers}};
  j["attack"] = json{{"method", config.attack.method},
                     {"target", config.attack.target},
                     {"epsilon", config.attack.epsilon},
                     {"steps", config.attack.steps},
                     {"step_size", config.attack.step_size},
                     {"seed", config.attack.seed},
                     {"cw", json{{"initial_c", config.attack.cw.initial_c},
                                 {"kappa", config.attack.cw.kappa},
                                 {"search_rounds", config.attack.cw.search_rounds},
                                 {"iterations", config.attack.cw.iterations},
                                 {"learning_rate", config.attack.cw.learning_rate}}},
                     {"mask", json{{"row", config.attack.mask.row},
                                   {"col", config.attack.mask.col},
                                   {"height", config.attack.mask.height},
                                   {"width", config.attack.mask.width}}}};
  j["attack_count"] = config.attack_count;
  return j.dump(2) + "\n";
}

PipelineConfig pipeline_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("pipeline config: ") + e.what());
  }
  PipelineConfig c;
  if (j.contains("dataset")) c.dataset = datagen_from_json(j["dataset"]);
  if (j.contains("train")) {
    const json& t = j["train"];
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.batch = t.value("batch", c.train.batch);
    c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
    c.train.seed = t.value("seed", c.train.seed);
  }
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  if (j.contains("witness")) {
    const json& w = j["witness"];
    c.witness.sample_count = w.value("sample_count", c.witness.sample_count);
    c.witness.tau_sub = w.value("tau_sub", c.witness.tau_sub);
    c.witness.tau_pres = w.value("tau_pres", c.witness.tau_pres);
    c.witness.min_support = w.value("min_support", c.witness.min_support);
    c.witness.randomizations = w.value("randomizations", c.witness.randomizations);
    c.witness.seed = w.value("seed", c.witness.seed);
    c.witness.observed_layers =
        w.value("observed_layers", c.witness.observed_layers);
  }
  if (j.contains("steering")) {
    const json& s = j["steering"];
    c.steering.alpha = s.value("alpha", c.steering.alpha);
    c.steering.beta = s.value("beta", c.steering.beta);
    c.steering.epsilon = s.value("epsilon", c.steering.epsilon);
    c.steering.sigma_floor = s.value("sigma_floor", c.steering.sigma_floor);
    if (s.contains("weaken_mode")) {
      c.steering.weaken_mode = weaken_mode_from_name(s["weaken_mode"]);
    }
    if (s.contains("strengthen_mode")) {
      c.steering.strengthen_mode = strengthen_mode_from_name(s["strengthen_mode"]);
    }
    c.steering.steered_layers =
        s.value("steered_layers", c.steering.steered_layers);
  }
  if (j.contains("attack")) {
    const json& a = j["attack"];
    c.attack.method = a.value("method", c.attack.method);
    c.attack.target = a.value("target", c.attack.target);
    c.attack.epsilon = a.value("epsilon", c.attack.epsilon);
    c.attack.steps = a.value("steps", c.attack.steps);
    c.attack.step_size = a.value("step_size", c.attack.step_size);
    c.attack.seed = a.value("seed", c.attack.seed);
    if (a.contains("cw")) {
      const json& cw = a["cw"];
      c.attack.cw.initial_c = cw.value("initial_c", c.attack.cw.initial_c);
      c.attack.cw.kappa = cw.value("kappa", c.attack.cw.kappa);
      c.attack.cw.search_rounds =
          cw.value("search_rounds", c.attack.cw.search_rounds);
      c.attack.cw.iterations = cw.value("iterations", c.attack.cw.iterations);
      c.attack.cw.learning_rate =
          cw.value("learning_rate", c.attack.cw.learning_rate);
    }
    if (a.contains("mask")) {
      const json& m = a["mask"];
      c.attack.mask.row = m.value("row", c.attack.mask.row);
      c.attack.mask.col = m.value("col", c.attack.mask.col);
      c.attack.mask.height = m.value("height", c.attack.mask.height);
      c.attack.mask.width = m.value("width", c.attack.mask.width);
    }
  }
  c.attack_count = j.value("attack_count", c.attack_count);
  return c;
}

PipelineResult run_pipeline(const PipelineConfig& config,
                            const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  PipelineResult result;
  const auto emit = [&](const std::string& name, const Bytes& bytes) {
    write_file(out_dir / name, bytes);
    result.artifacts.emplace_back(name, digest_of(bytes));
  };
  const auto emit_text = [&](const std::string& name, const std::string& text) {
    emit(name, Bytes(text.begin(), text.end()));
  };

  const Dataset dataset = generate(config.dataset);
  emit("dataset.amld", dataset_to_bytes(dataset));

  const auto [train_ds, test_ds] = split_dataset(dataset, config.train_fraction);
  const NetworkSpec spec = default_spec(dataset.num_classes, dataset.height,
                                        dataset.width);
  const TrainedModel model = train(spec, train_ds, config.train);
  emit("model.amlm", model_to_bytes(model));

  const WitnessMap witnesses =
      extract_witnesses(model.net, train_ds, config.witness);
  emit_text("witness.json", witness_map_to_json(witnesses));

  if (config.attack_count > test_ds.size()) {
    throw ConfigError("attack count " + std::to_string(config.attack_count) +
                      " exceeds holdout size " + std::to_string(test_ds.size()));
  }
  std::vector<std::size_t> indices(config.attack_count);
  std::iota(indices.begin(), indices.end(), 0);
  const AdversarialSet adv =
      run_attack(model.net, test_ds, indices, config.attack);
  emit("adv.amld", adversarial_to_bytes(adv));

  std::vector<DetectionRecord> records;
  for (std::size_t i = 0; i < test_ds.size(); ++i) {
    DetectionRecord rec = detect(model.net, witnesses, config.steering,
                                 test_ds.images[i], test_ds.labels[i]);
    rec.id = i;
    records.push_back(std::move(rec));
  }
  for (std::size_t i = 0; i < adv.examples.size(); ++i) {
    DetectionRecord rec = detect(model.net, witnesses, config.steering,
                                 adv.examples[i].image, adv.examples[i].gold);
    rec.id = test_ds.size() + i;
    rec.attack = adv.examples[i].method;
    records.push_back(std::move(rec));
  }
  emit_text("records.csv", records_to_csv(records));

  result.report = aggregate(records);
  emit_text("metrics.json", report_to_json(result.report));

  result.train_accuracy = model.meta.final_train_accuracy;
  result.holdout_accuracy = accuracy(model.net, test_ds);
  result.record_count = records.size();
  return result;
}

DeterminismResult determinism_check(const PipelineConfig& config,
                                    std::size_t repetitions,
                                    const std::filesystem::path& work_dir,
                                    bool reseed_between_runs) {
  if (repetitions < 2) throw ConfigError("determinism check needs >= 2 repetitions");
  DeterminismResult result;
  for (std::size_t r = 0; r < repetitions; ++r) {
    PipelineConfig run_config = config;
    if (reseed_between_runs) run_config.dataset.seed = config.dataset.seed + r;
    const PipelineResult run =
        run_pipeline(run_config, work_dir / ("rep" + std::to_string(r)));
    result.runs.push_back(run.artifacts);
  }
  result.passed = true;
  const auto& first = result.runs.front();
  for (std::size_t r = 1; r < result.runs.size() && result.passed; ++r) {
    for (std::size_t a = 0; a < first.size(); ++a) {
      if (result.runs[r][a].second != first[a].second) {
        result.passed = false;
        result.first_divergent = first[a].first;
        break;
      }
    }
  }
  return result;
}

}  // namespace ami
