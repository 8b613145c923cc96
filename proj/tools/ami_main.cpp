// ami: one binary fronting the whole lab. Each subcommand writes its
// artifact plus a <artifact>.manifest.json recording the resolved config
// and input/output digests. Exit codes: 0 ok, 1 usage, 2 data/config.
#include <chrono>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ami/attacks.hpp"
#include "ami/datagen.hpp"
#include "ami/errors.hpp"
#include "ami/evaluation.hpp"
#include "ami/model.hpp"
#include "ami/pipeline.hpp"
#include "ami/steering.hpp"
#include "ami/witness.hpp"
#include "json.hpp"

namespace {

using ami::Bytes;
using nlohmann::json;

constexpr int kArtifactVersion = 1;

std::string config_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

// Flat JSON config files: {"flag-name": value, ...}, same names as the
// long CLI flags. Command-line values always win, so only options the
// user left unset take values from the file.
void apply_config_file(CLI::App* cmd) {
  const CLI::Option* copt = cmd->get_option("--config");
  if (copt->count() == 0) return;
  const std::string path = copt->as<std::string>();
  std::ifstream in(path);
  if (!in) throw ami::UsageError("cannot read config file '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ami::ParseError(std::string("config file: ") + e.what());
  }
  if (!root.is_object()) {
    throw ami::ParseError("config file: expected a flat JSON object");
  }
  for (const auto& [key, value] : root.items()) {
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr || opt == copt) {
      throw ami::ConfigError("config file: unknown option '" + key + "'");
    }
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(config_scalar(v));
    } else {
      opt->add_result(config_scalar(value));
    }
    opt->run_callback();
  }
}

std::string digest_of(const Bytes& bytes) { return ami::digest_hex(bytes); }

std::string digest_of(const std::string& text) {
  return digest_of(Bytes(text.begin(), text.end()));
}

// Accumulates the RunManifest for one command invocation.
struct Manifest {
  std::string command;
  json config = json::object();
  json inputs = json::object();
  json outputs = json::object();
  std::chrono::steady_clock::time_point started =
      std::chrono::steady_clock::now();

  Bytes load_input(const std::string& path) {
    Bytes bytes = ami::read_file(path);
    inputs[path] = digest_of(bytes);
    return bytes;
  }

  void write_output(const std::string& path, const Bytes& bytes) {
    ami::write_file(path, bytes);
    outputs[path] = digest_of(bytes);
  }

  void write_output(const std::string& path, const std::string& text) {
    write_output(path, Bytes(text.begin(), text.end()));
  }

  // Everything but wall_time_seconds is deterministic.
  void save(const std::string& primary_out) const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
    json j;
    j["artifact_version"] = kArtifactVersion;
    j["command"] = command;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["wall_time_seconds"] = wall;
    ami::write_file(primary_out + ".manifest.json", j.dump(2) + "\n");
  }
};

std::string text_of(const Bytes& bytes) {
  return std::string(bytes.begin(), bytes.end());
}

ami::Dataset select_split(const ami::Dataset& ds, const std::string& split,
                          double fraction) {
  if (split == "all" || fraction >= 1.0) {
    if (split != "all" && fraction >= 1.0) {
      throw ami::ConfigError("train fraction 1.0 leaves no '" + split +
                             "' split to select");
    }
    return ds;
  }
  auto [tr, te] = ami::split_dataset(ds, fraction);
  return split == "train" ? tr : te;
}

void add_config_option(CLI::App* cmd) {
  cmd->add_option("--config", "flat JSON config (keys = flag names)")
      ->check(CLI::ExistingFile);
}

// ---- gen-data ----

struct GenDataArgs {
  std::string out = "dataset.amld";
  ami::DatagenConfig cfg;
};

void run_gen_data(const GenDataArgs& a) {
  Manifest m;
  m.command = "gen-data";
  m.config = json{{"out", a.out},
                  {"seed", a.cfg.seed},
                  {"classes", a.cfg.classes},
                  {"per-class", a.cfg.per_class},
                  {"height", a.cfg.height},
                  {"width", a.cfg.width},
                  {"noise-sigma", a.cfg.noise_sigma},
                  {"jitter", a.cfg.jitter}};
  const ami::Dataset ds = ami::generate(a.cfg);
  m.write_output(a.out, ami::dataset_to_bytes(ds));
  m.save(a.out);
  std::cout << "wrote " << a.out << ": " << ds.size() << " images, "
            << ds.num_classes << " classes, digest "
            << m.outputs[a.out].get<std::string>() << "\n";
}

// ---- train ----

struct TrainArgs {
  std::string data;
  std::string out = "model.amlm";
  ami::Hyper hyper;
  double train_fraction = 0.8;
};

void run_train(const TrainArgs& a) {
  Manifest m;
  m.command = "train";
  m.config = json{{"data", a.data},
                  {"out", a.out},
                  {"epochs", a.hyper.epochs},
                  {"batch", a.hyper.batch},
                  {"learning-rate", a.hyper.learning_rate},
                  {"seed", a.hyper.seed},
                  {"train-fraction", a.train_fraction}};
  const ami::Dataset full = ami::dataset_from_bytes(m.load_input(a.data));
  ami::Dataset train_ds = full;
  ami::Dataset holdout;
  if (a.train_fraction < 1.0) {
    std::tie(train_ds, holdout) = ami::split_dataset(full, a.train_fraction);
  }
  const ami::NetworkSpec spec =
      ami::default_spec(full.num_classes, full.height, full.width);
  const ami::TrainedModel model = ami::train(spec, train_ds, a.hyper);
  m.write_output(a.out, ami::model_to_bytes(model));
  m.save(a.out);
  std::cout << "wrote " << a.out << ": train accuracy "
            << model.meta.final_train_accuracy;
  if (holdout.size() > 0) {
    std::cout << ", holdout accuracy " << ami::accuracy(model.net, holdout);
  }
  std::cout << ", weight digest " << ami::weight_digest(model.net) << "\n";
}

// ---- witness ----

struct WitnessArgs {
  std::string model;
  std::string data;
  std::string out = "witness.json";
  std::string split = "train";
  double train_fraction = 0.8;
  ami::WitnessConfig cfg;
};

void run_witness(const WitnessArgs& a) {
  Manifest m;
  m.command = "witness";
  m.config = json{{"model", a.model},
                  {"data", a.data},
                  {"out", a.out},
                  {"split", a.split},
                  {"train-fraction", a.train_fraction},
                  {"samples", a.cfg.sample_count},
                  {"tau-sub", a.cfg.tau_sub},
                  {"tau-pres", a.cfg.tau_pres},
                  {"min-support", a.cfg.min_support},
                  {"randomizations", a.cfg.randomizations},
                  {"seed", a.cfg.seed},
                  {"layers", a.cfg.observed_layers}};
  const ami::TrainedModel model = ami::model_from_bytes(m.load_input(a.model));
  const ami::Dataset pool = select_split(
      ami::dataset_from_bytes(m.load_input(a.data)), a.split, a.train_fraction);
  const ami::WitnessMap map = ami::extract_witnesses(model.net, pool, a.cfg);
  m.write_output(a.out, ami::witness_map_to_json(map));
  m.save(a.out);
  for (const std::string& warning : map.warnings) {
    std::cerr << "warning: " << warning << "\n";
  }
  std::cout << "wrote " << a.out << ":";
  for (const auto& [name, layers] : map.attrs) {
    std::size_t units = 0;
    for (const auto& [layer, list] : layers) units += list.size();
    std::cout << " " << name << "=" << units;
  }
  std::cout << "\n";
}

// ---- attack ----

struct AttackArgs {
  std::string model;
  std::string data;
  std::string out = "adv.amld";
  std::string split = "holdout";
  double train_fraction = 0.8;
  std::size_t count = 64;  // 0 = whole split
  std::size_t threads = 1;
  ami::AttackConfig cfg;
};

void run_attack_cmd(const AttackArgs& a) {
  Manifest m;
  m.command = "attack";
  m.config = json{{"model", a.model},
                  {"data", a.data},
                  {"out", a.out},
                  {"split", a.split},
                  {"train-fraction", a.train_fraction},
                  {"count", a.count},
                  {"threads", a.threads},
                  {"method", a.cfg.method},
                  {"target", a.cfg.target},
                  {"budget", a.cfg.epsilon},
                  {"steps", a.cfg.steps},
                  {"step-size", a.cfg.step_size},
                  {"seed", a.cfg.seed},
                  {"cw-c", a.cfg.cw.initial_c},
                  {"cw-kappa", a.cfg.cw.kappa},
                  {"cw-rounds", a.cfg.cw.search_rounds},
                  {"cw-iterations", a.cfg.cw.iterations},
                  {"cw-lr", a.cfg.cw.learning_rate},
                  {"mask-row", a.cfg.mask.row},
                  {"mask-col", a.cfg.mask.col},
                  {"mask-height", a.cfg.mask.height},
                  {"mask-width", a.cfg.mask.width}};
  const ami::TrainedModel model = ami::model_from_bytes(m.load_input(a.model));
  const ami::Dataset pool = select_split(
      ami::dataset_from_bytes(m.load_input(a.data)), a.split, a.train_fraction);
  if (pool.size() == 0) throw ami::ConfigError("selected split is empty");
  std::size_t count = a.count == 0 ? pool.size() : a.count;
  if (count > pool.size()) {
    throw ami::ConfigError("count " + std::to_string(count) +
                           " exceeds split size " + std::to_string(pool.size()));
  }
  std::vector<std::size_t> indices(count);
  for (std::size_t i = 0; i < count; ++i) indices[i] = i;
  const ami::AdversarialSet set =
      ami::run_attack(model.net, pool, indices, a.cfg, a.threads);
  m.write_output(a.out, ami::adversarial_to_bytes(set));
  m.save(a.out);
  std::size_t successes = 0;
  for (const auto& ex : set.examples) successes += ex.success ? 1 : 0;
  std::cout << "wrote " << a.out << ": " << set.examples.size() << " "
            << a.cfg.method << " examples, " << successes << " successful\n";
}

// ---- steering params shared by detect/sweep ----

struct SteerFlags {
  double alpha = 100.0;
  double beta = 60.0;
  double epsilon = 1.15;
  std::string weaken_mode = "above-mean";
  std::string strengthen_mode = "formula";

  ami::SteeringParams params() const {
    ami::SteeringParams p;
    p.alpha = alpha;
    p.beta = beta;
    p.epsilon = epsilon;
    p.weaken_mode = ami::weaken_mode_from_name(weaken_mode);
    p.strengthen_mode = ami::strengthen_mode_from_name(strengthen_mode);
    return p;
  }

  json to_json() const {
    return json{{"alpha", alpha},
                {"beta", beta},
                {"epsilon", epsilon},
                {"weaken-mode", weaken_mode},
                {"strengthen-mode", strengthen_mode}};
  }
};

// --beta is added per command: detect takes one value, sweep a grid.
void add_steer_flags(CLI::App* cmd, SteerFlags& f) {
  cmd->add_option("--alpha", f.alpha, "weakening scale")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--epsilon", f.epsilon, "strengthening floor factor")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--weaken-mode", f.weaken_mode, "above-mean or all")
      ->check(CLI::IsMember({"above-mean", "all"}));
  cmd->add_option("--strengthen-mode", f.strengthen_mode,
                  "formula or code-compat")
      ->check(CLI::IsMember({"formula", "code-compat"}));
}

// ---- detect ----

struct DetectArgs {
  std::string model;
  std::string witness;
  std::string data;
  std::string adv;
  std::string out = "records.csv";
  std::string metrics;
  std::string split = "all";
  double train_fraction = 0.8;
  SteerFlags steer;
};

void run_detect(const DetectArgs& a) {
  if (a.data.empty() && a.adv.empty()) {
    throw ami::UsageError("detect needs --data and/or --adv");
  }
  Manifest m;
  m.command = "detect";
  m.config = a.steer.to_json();
  m.config["model"] = a.model;
  m.config["witness"] = a.witness;
  m.config["data"] = a.data;
  m.config["adv"] = a.adv;
  m.config["out"] = a.out;
  m.config["metrics"] = a.metrics;
  m.config["split"] = a.split;
  m.config["train-fraction"] = a.train_fraction;

  const ami::TrainedModel model = ami::model_from_bytes(m.load_input(a.model));
  const ami::WitnessMap map =
      ami::witness_map_from_json(text_of(m.load_input(a.witness)));
  const ami::SteeringParams params = a.steer.params();

  std::vector<ami::DetectionRecord> records;
  if (!a.data.empty()) {
    const ami::Dataset pool = select_split(
        ami::dataset_from_bytes(m.load_input(a.data)), a.split, a.train_fraction);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      ami::DetectionRecord rec =
          ami::detect(model.net, map, params, pool.images[i], pool.labels[i]);
      rec.id = records.size();
      records.push_back(std::move(rec));
    }
  }
  if (!a.adv.empty()) {
    const ami::AdversarialSet set =
        ami::adversarial_from_bytes(m.load_input(a.adv));
    for (const ami::AdversarialExample& ex : set.examples) {
      ami::DetectionRecord rec =
          ami::detect(model.net, map, params, ex.image, ex.gold);
      rec.id = records.size();
      rec.attack = ex.method;
      records.push_back(std::move(rec));
    }
  }

  m.write_output(a.out, ami::records_to_csv(records));
  const ami::MetricsReport report = ami::aggregate(records);
  if (!a.metrics.empty()) m.write_output(a.metrics, ami::report_to_json(report));
  m.save(a.out);
  std::cout << ami::report_to_text(report);
}

// ---- eval / replay ----

struct EvalArgs {
  std::string records;
  std::string out = "metrics.json";
};

void run_eval(const EvalArgs& a) {
  Manifest m;
  m.command = "eval";
  m.config = json{{"records", a.records}, {"out", a.out}};
  const std::vector<ami::DetectionRecord> records =
      ami::parse_triple_log(text_of(m.load_input(a.records)));
  const ami::MetricsReport report = ami::aggregate(records);
  m.write_output(a.out, ami::report_to_json(report));
  m.save(a.out);
  std::cout << ami::report_to_text(report);
}

struct ReplayArgs {
  std::string log;
  std::string out;  // optional metrics JSON
};

void run_replay(const ReplayArgs& a) {
  Manifest m;
  m.command = "replay";
  m.config = json{{"log", a.log}, {"out", a.out}};
  const std::vector<ami::DetectionRecord> records =
      ami::parse_triple_log(text_of(m.load_input(a.log)));
  const ami::MetricsReport report = ami::aggregate(records);
  if (!a.out.empty()) {
    m.write_output(a.out, ami::report_to_json(report));
    m.save(a.out);
  }
  std::cout << ami::report_to_text(report);
}

// ---- sweep ----

struct SweepArgs {
  std::string model;
  std::string witness;
  std::string data;
  std::string adv;
  std::string out = "sweep.csv";
  std::string json_out;
  std::string split = "holdout";
  double train_fraction = 0.8;
  std::size_t clean_count = 64;  // 0 = whole split
  std::vector<double> betas{5, 8, 12, 16, 30, 60};
  SteerFlags steer;
};

void run_sweep(const SweepArgs& a) {
  Manifest m;
  m.command = "sweep";
  m.config = a.steer.to_json();
  m.config["model"] = a.model;
  m.config["witness"] = a.witness;
  m.config["data"] = a.data;
  m.config["adv"] = a.adv;
  m.config["out"] = a.out;
  m.config["json"] = a.json_out;
  m.config["split"] = a.split;
  m.config["train-fraction"] = a.train_fraction;
  m.config["clean-count"] = a.clean_count;
  m.config["betas"] = a.betas;

  const ami::TrainedModel model = ami::model_from_bytes(m.load_input(a.model));
  const ami::WitnessMap map =
      ami::witness_map_from_json(text_of(m.load_input(a.witness)));
  const ami::Dataset pool = select_split(
      ami::dataset_from_bytes(m.load_input(a.data)), a.split, a.train_fraction);
  const ami::AdversarialSet adv =
      ami::adversarial_from_bytes(m.load_input(a.adv));

  const std::size_t clean_count =
      a.clean_count == 0 ? pool.size() : a.clean_count;
  if (clean_count > pool.size()) {
    throw ami::ConfigError("clean-count exceeds split size " +
                           std::to_string(pool.size()));
  }
  std::vector<std::size_t> clean_indices(clean_count);
  for (std::size_t i = 0; i < clean_count; ++i) clean_indices[i] = i;

  const ami::SweepReport report = ami::beta_sweep(
      model.net, map, pool, clean_indices, adv, a.betas, a.steer.params());
  m.write_output(a.out, ami::sweep_to_csv(report));
  if (!a.json_out.empty()) {
    m.write_output(a.json_out, ami::sweep_to_json(report));
  }
  m.save(a.out);
  for (const ami::SweepPoint& p : report.points) {
    std::cout << "beta " << p.beta << ": detection "
              << p.full_pool.detection.cumulative() << ", fpr "
              << p.full_pool.fpr.cumulative() << ", flagged "
              << p.full_pool.flagged.cumulative() << "\n";
  }
}

// ---- selfcheck ----

struct SelfcheckArgs {
  std::size_t repetitions = 2;
  std::string out = "selfcheck_out";
  std::string pipeline_config;
  bool negative_control = false;
};

void run_selfcheck(const SelfcheckArgs& a) {
  Manifest m;
  m.command = "selfcheck";
  m.config = json{{"repetitions", a.repetitions},
                  {"out", a.out},
                  {"pipeline-config", a.pipeline_config},
                  {"negative-control", a.negative_control}};
  ami::PipelineConfig config;
  if (!a.pipeline_config.empty()) {
    config = ami::pipeline_config_from_json(text_of(m.load_input(a.pipeline_config)));
  }
  const ami::DeterminismResult result = ami::determinism_check(
      config, a.repetitions, a.out, a.negative_control);
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    for (const auto& [name, digest] : result.runs[r]) {
      std::cout << "rep" << r << " " << name << " " << digest << "\n";
    }
  }
  std::filesystem::create_directories(a.out);
  const std::string primary = (std::filesystem::path(a.out) / "selfcheck").string();
  m.outputs["work_dir"] = a.out;
  m.save(primary);
  if (a.negative_control) {
    if (result.passed || result.first_divergent != "dataset.amld") {
      throw ami::StateError(
          "negative control failed to diverge at dataset.amld");
    }
    std::cout << "negative control diverged at dataset.amld, as expected\n";
    return;
  }
  if (!result.passed) {
    throw ami::StateError("determinism check failed at " +
                          result.first_divergent);
  }
  std::cout << "determinism check passed (" << a.repetitions
            << " identical runs)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic lab for explanation-assisted adversarial detection"};
  app.require_subcommand(1);

  GenDataArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "generate a dataset");
  gen_cmd->add_option("--out", gen.out, "output dataset path");
  gen_cmd->add_option("--seed", gen.cfg.seed, "dataset RNG seed");
  gen_cmd->add_option("--classes", gen.cfg.classes, "number of classes")
      ->check(CLI::Range(std::size_t{2}, std::size_t{8}));
  gen_cmd->add_option("--per-class", gen.cfg.per_class, "images per class")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--height", gen.cfg.height, "image height");
  gen_cmd->add_option("--width", gen.cfg.width, "image width");
  gen_cmd->add_option("--noise-sigma", gen.cfg.noise_sigma,
                      "background noise amplitude")
      ->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--jitter", gen.cfg.jitter, "max glyph offset");
  add_config_option(gen_cmd);

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "train the original model");
  train_cmd->add_option("--data", tr.data, "dataset path")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "output model path");
  train_cmd->add_option("--epochs", tr.hyper.epochs, "training epochs")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", tr.hyper.batch, "batch size")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--learning-rate", tr.hyper.learning_rate, "SGD step")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tr.hyper.seed, "training RNG seed");
  train_cmd->add_option("--train-fraction", tr.train_fraction,
                        "per-class fraction used for training (1.0 = all)")
      ->check(CLI::Range(0.01, 1.0));
  add_config_option(train_cmd);

  WitnessArgs wt;
  CLI::App* wit_cmd = app.add_subcommand("witness", "extract witness units");
  wit_cmd->add_option("--model", wt.model, "model path")
      ->required()
      ->check(CLI::ExistingFile);
  wit_cmd->add_option("--data", wt.data, "dataset path")
      ->required()
      ->check(CLI::ExistingFile);
  wit_cmd->add_option("--out", wt.out, "output witness map path");
  wit_cmd->add_option("--split", wt.split, "which split to sample")
      ->check(CLI::IsMember({"all", "train", "holdout"}));
  wit_cmd->add_option("--train-fraction", wt.train_fraction, "split fraction")
      ->check(CLI::Range(0.01, 1.0));
  wit_cmd->add_option("--samples", wt.cfg.sample_count, "images to sample")
      ->check(CLI::PositiveNumber);
  wit_cmd->add_option("--tau-sub", wt.cfg.tau_sub, "substitution threshold")
      ->check(CLI::NonNegativeNumber);
  wit_cmd->add_option("--tau-pres", wt.cfg.tau_pres, "preservation threshold")
      ->check(CLI::NonNegativeNumber);
  wit_cmd->add_option("--min-support", wt.cfg.min_support,
                      "fraction of samples that must agree")
      ->check(CLI::Range(0.0, 1.0));
  wit_cmd->add_option("--randomizations", wt.cfg.randomizations,
                      "background randomizations per image")
      ->check(CLI::PositiveNumber);
  wit_cmd->add_option("--seed", wt.cfg.seed, "witness sampling seed");
  wit_cmd->add_option("--layers", wt.cfg.observed_layers,
                      "observed relu layer ids (default: all)")
      ->delimiter(',');
  add_config_option(wit_cmd);

  AttackArgs at;
  CLI::App* atk_cmd = app.add_subcommand("attack", "generate adversarial examples");
  atk_cmd->add_option("--model", at.model, "model path")
      ->required()
      ->check(CLI::ExistingFile);
  atk_cmd->add_option("--data", at.data, "dataset path")
      ->required()
      ->check(CLI::ExistingFile);
  atk_cmd->add_option("--out", at.out, "output adversarial set path");
  atk_cmd->add_option("--split", at.split, "which split to attack")
      ->check(CLI::IsMember({"all", "train", "holdout"}));
  atk_cmd->add_option("--train-fraction", at.train_fraction, "split fraction")
      ->check(CLI::Range(0.01, 1.0));
  atk_cmd->add_option("--count", at.count, "examples to attack (0 = all)");
  atk_cmd->add_option("--threads", at.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  atk_cmd->add_option("--method", at.cfg.method, "attack method")
      ->check(CLI::IsMember({"fgsm", "bim", "cw", "patch"}));
  atk_cmd->add_option("--target", at.cfg.target,
                      "untargeted, first, next, or a class id");
  atk_cmd->add_option("--budget", at.cfg.epsilon, "L-inf budget (fgsm/bim)")
      ->check(CLI::PositiveNumber);
  atk_cmd->add_option("--steps", at.cfg.steps, "iterations (bim/patch)")
      ->check(CLI::PositiveNumber);
  atk_cmd->add_option("--step-size", at.cfg.step_size, "per-step size")
      ->check(CLI::PositiveNumber);
  atk_cmd->add_option("--seed", at.cfg.seed, "attack seed (cw init noise)");
  atk_cmd->add_option("--cw-c", at.cfg.cw.initial_c, "cw initial constant")
      ->check(CLI::PositiveNumber);
  atk_cmd->add_option("--cw-kappa", at.cfg.cw.kappa, "cw confidence margin")
      ->check(CLI::NonNegativeNumber);
  atk_cmd->add_option("--cw-rounds", at.cfg.cw.search_rounds,
                      "cw binary-search rounds")
      ->check(CLI::PositiveNumber);
  atk_cmd->add_option("--cw-iterations", at.cfg.cw.iterations,
                      "cw gradient steps per round")
      ->check(CLI::PositiveNumber);
  atk_cmd->add_option("--cw-lr", at.cfg.cw.learning_rate, "cw learning rate")
      ->check(CLI::PositiveNumber);
  atk_cmd->add_option("--mask-row", at.cfg.mask.row, "patch mask top row");
  atk_cmd->add_option("--mask-col", at.cfg.mask.col, "patch mask left column");
  atk_cmd->add_option("--mask-height", at.cfg.mask.height, "patch mask height");
  atk_cmd->add_option("--mask-width", at.cfg.mask.width, "patch mask width");
  add_config_option(atk_cmd);

  DetectArgs de;
  CLI::App* det_cmd = app.add_subcommand("detect", "run the discrepancy detector");
  det_cmd->add_option("--model", de.model, "model path")
      ->required()
      ->check(CLI::ExistingFile);
  det_cmd->add_option("--witness", de.witness, "witness map path")
      ->required()
      ->check(CLI::ExistingFile);
  det_cmd->add_option("--data", de.data, "clean dataset path")
      ->check(CLI::ExistingFile);
  det_cmd->add_option("--adv", de.adv, "adversarial set path")
      ->check(CLI::ExistingFile);
  det_cmd->add_option("--out", de.out, "output triple-log path");
  det_cmd->add_option("--metrics", de.metrics, "also write metrics JSON here");
  det_cmd->add_option("--split", de.split, "clean split to use")
      ->check(CLI::IsMember({"all", "train", "holdout"}));
  det_cmd->add_option("--train-fraction", de.train_fraction, "split fraction")
      ->check(CLI::Range(0.01, 1.0));
  det_cmd->add_option("--beta", de.steer.beta, "strengthening scale")
      ->check(CLI::PositiveNumber);
  add_steer_flags(det_cmd, de.steer);
  add_config_option(det_cmd);

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "aggregate a triple log");
  eval_cmd->add_option("--records", ev.records, "triple-log CSV path")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", ev.out, "output metrics JSON path");
  add_config_option(eval_cmd);

  ReplayArgs rp;
  CLI::App* replay_cmd =
      app.add_subcommand("replay", "audit an external detector's triple log");
  replay_cmd->add_option("--log", rp.log, "triple-log CSV path")
      ->required()
      ->check(CLI::ExistingFile);
  replay_cmd->add_option("--out", rp.out, "optional metrics JSON path");
  add_config_option(replay_cmd);

  SweepArgs sw;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "sweep beta over a mixed pool");
  sweep_cmd->add_option("--model", sw.model, "model path")
      ->required()
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--witness", sw.witness, "witness map path")
      ->required()
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--data", sw.data, "clean dataset path")
      ->required()
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--adv", sw.adv, "adversarial set path")
      ->required()
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", sw.out, "output CSV path");
  sweep_cmd->add_option("--json", sw.json_out, "optional full-report JSON path");
  sweep_cmd->add_option("--split", sw.split, "clean split to use")
      ->check(CLI::IsMember({"all", "train", "holdout"}));
  sweep_cmd->add_option("--train-fraction", sw.train_fraction, "split fraction")
      ->check(CLI::Range(0.01, 1.0));
  sweep_cmd->add_option("--clean-count", sw.clean_count,
                        "clean examples to include (0 = all)");
  sweep_cmd->add_option("--beta", sw.betas, "comma-separated beta grid")
      ->delimiter(',');
  add_steer_flags(sweep_cmd, sw.steer);
  add_config_option(sweep_cmd);

  SelfcheckArgs sc;
  CLI::App* self_cmd =
      app.add_subcommand("selfcheck", "end-to-end determinism check");
  self_cmd->add_option("--repetitions", sc.repetitions, "pipeline repetitions")
      ->check(CLI::Range(std::size_t{2}, std::size_t{16}));
  self_cmd->add_option("--out", sc.out, "work directory");
  self_cmd->add_option("--pipeline-config", sc.pipeline_config,
                       "pipeline config JSON (nested)")
      ->check(CLI::ExistingFile);
  self_cmd->add_flag("--negative-control", sc.negative_control,
                     "reseed between runs; expect divergence at dataset.amld");
  add_config_option(self_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ami::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    for (CLI::App* cmd : {gen_cmd, train_cmd, wit_cmd, atk_cmd, det_cmd,
                          eval_cmd, replay_cmd, sweep_cmd, self_cmd}) {
      if (cmd->parsed()) apply_config_file(cmd);
    }
    if (gen_cmd->parsed()) run_gen_data(gen);
    if (train_cmd->parsed()) run_train(tr);
    if (wit_cmd->parsed()) run_witness(wt);
    if (atk_cmd->parsed()) run_attack_cmd(at);
    if (det_cmd->parsed()) run_detect(de);
    if (eval_cmd->parsed()) run_eval(ev);
    if (replay_cmd->parsed()) run_replay(rp);
    if (sweep_cmd->parsed()) run_sweep(sw);
    if (self_cmd->parsed()) run_selfcheck(sc);
  } catch (const ami::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ami::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
