// Python surface: the operations a notebook needs to drive the lab
// end to end. Enum-like settings cross as strings; tensors cross as
// (shape, flat data) pairs.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ami/attacks.hpp"
#include "ami/datagen.hpp"
#include "ami/errors.hpp"
#include "ami/evaluation.hpp"
#include "ami/model.hpp"
#include "ami/pipeline.hpp"
#include "ami/steering.hpp"
#include "ami/witness.hpp"

namespace py = pybind11;

namespace {

ami::SteeringParams params_from(double alpha, double beta, double epsilon,
                                const std::string& weaken_mode,
                                const std::string& strengthen_mode) {
  ami::SteeringParams p;
  p.alpha = alpha;
  p.beta = beta;
  p.epsilon = epsilon;
  p.weaken_mode = ami::weaken_mode_from_name(weaken_mode);
  p.strengthen_mode = ami::strengthen_mode_from_name(strengthen_mode);
  return p;
}

py::dict record_to_dict(const ami::DetectionRecord& rec) {
  py::dict d;
  d["id"] = rec.id;
  d["gold"] = rec.gold;
  d["original"] = rec.original;
  d["attribute"] = rec.attribute;
  d["flagged"] = rec.flagged;
  d["case"] = ami::case_name(rec.label);
  d["attack"] = rec.attack;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "deterministic lab for explanation-assisted adversarial detection";

  py::register_exception<ami::UsageError>(m, "AmiUsageError", PyExc_ValueError);
  py::register_exception<ami::Error>(m, "AmiError", PyExc_RuntimeError);

  py::class_<ami::Tensor>(m, "Tensor")
      .def(py::init<std::vector<std::size_t>, std::vector<double>>(),
           py::arg("shape"), py::arg("data"))
      .def_readonly("shape", &ami::Tensor::shape)
      .def_readonly("data", &ami::Tensor::data);

  py::class_<ami::Dataset>(m, "Dataset")
      .def_readonly("num_classes", &ami::Dataset::num_classes)
      .def_readonly("height", &ami::Dataset::height)
      .def_readonly("width", &ami::Dataset::width)
      .def_readonly("labels", &ami::Dataset::labels)
      .def_readonly("seed", &ami::Dataset::seed)
      .def("__len__", &ami::Dataset::size)
      .def("image", [](const ami::Dataset& ds, std::size_t i) {
        if (i >= ds.size()) throw ami::LookupError("image index out of range");
        return ds.images[i];
      });

  m.def(
      "generate_dataset",
      [](std::size_t classes, std::size_t per_class, std::size_t height,
         std::size_t width, double noise_sigma, std::size_t jitter,
         std::uint64_t seed) {
        ami::DatagenConfig c;
        c.classes = classes;
        c.per_class = per_class;
        c.height = height;
        c.width = width;
        c.noise_sigma = noise_sigma;
        c.jitter = jitter;
        c.seed = seed;
        return ami::generate(c);
      },
      py::arg("classes") = 8, py::arg("per_class") = 200, py::arg("height") = 16,
      py::arg("width") = 16, py::arg("noise_sigma") = 0.1, py::arg("jitter") = 1,
      py::arg("seed") = 42);
  m.def("save_dataset", &ami::save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("load_dataset", &ami::load_dataset, py::arg("path"));
  m.def("split_dataset", &ami::split_dataset, py::arg("dataset"),
        py::arg("train_fraction"));

  py::class_<ami::TrainedModel>(m, "Model")
      .def_property_readonly(
          "train_accuracy",
          [](const ami::TrainedModel& tm) { return tm.meta.final_train_accuracy; })
      .def_property_readonly(
          "final_loss", [](const ami::TrainedModel& tm) { return tm.meta.final_loss; })
      .def_property_readonly("weight_digest", [](const ami::TrainedModel& tm) {
        return ami::weight_digest(tm.net);
      });

  m.def(
      "train",
      [](const ami::Dataset& data, std::size_t epochs, std::size_t batch,
         double learning_rate, std::uint64_t seed) {
        ami::Hyper h;
        h.epochs = epochs;
        h.batch = batch;
        h.learning_rate = learning_rate;
        h.seed = seed;
        return ami::train(
            ami::default_spec(data.num_classes, data.height, data.width), data, h);
      },
      py::arg("data"), py::arg("epochs") = 30, py::arg("batch") = 16,
      py::arg("learning_rate") = 0.05, py::arg("seed") = 7);
  m.def("save_model", &ami::save_model, py::arg("model"), py::arg("path"));
  m.def("load_model", &ami::load_model, py::arg("path"));
  m.def(
      "predict",
      [](const ami::TrainedModel& tm, const ami::Tensor& image) {
        const ami::Prediction p = ami::predict(tm.net, image);
        return py::make_tuple(p.label, p.logits.data);
      },
      py::arg("model"), py::arg("image"),
      "returns (label, logits)");
  m.def(
      "accuracy",
      [](const ami::TrainedModel& tm, const ami::Dataset& data) {
        return ami::accuracy(tm.net, data);
      },
      py::arg("model"), py::arg("data"));

  py::class_<ami::WitnessMap>(m, "WitnessMap")
      .def_property_readonly("attributes", &ami::WitnessMap::attribute_names)
      .def_property_readonly("warnings",
                             [](const ami::WitnessMap& w) { return w.warnings; })
      .def("units",
           [](const ami::WitnessMap& w, const std::string& attr, std::size_t layer) {
             auto it = w.attrs.find(attr);
             if (it == w.attrs.end()) {
               throw ami::LookupError("unknown attribute '" + attr + "'");
             }
             auto lt = it->second.find(layer);
             return lt == it->second.end() ? std::vector<std::size_t>{}
                                           : lt->second;
           })
      .def("layers", &ami::WitnessMap::layer_ids);

  m.def(
      "extract_witnesses",
      [](const ami::TrainedModel& tm, const ami::Dataset& data,
         std::size_t sample_count, double tau_sub, double tau_pres,
         double min_support, std::size_t randomizations, std::uint64_t seed) {
        ami::WitnessConfig c;
        c.sample_count = sample_count;
        c.tau_sub = tau_sub;
        c.tau_pres = tau_pres;
        c.min_support = min_support;
        c.randomizations = randomizations;
        c.seed = seed;
        return ami::extract_witnesses(tm.net, data, c);
      },
      py::arg("model"), py::arg("data"), py::arg("sample_count") = 50,
      py::arg("tau_sub") = 0.2, py::arg("tau_pres") = 0.5,
      py::arg("min_support") = 0.6, py::arg("randomizations") = 5,
      py::arg("seed") = 1234);
  m.def("save_witness_map", &ami::save_witness_map, py::arg("map"),
        py::arg("path"));
  m.def("load_witness_map", &ami::load_witness_map, py::arg("path"));

  m.def("weaken_value", &ami::weaken_value, py::arg("v"), py::arg("mu"),
        py::arg("sigma"), py::arg("alpha"));
  m.def("strengthen_value", &ami::strengthen_value, py::arg("v"), py::arg("vmin"),
        py::arg("sigma"), py::arg("beta"), py::arg("epsilon"));
  m.def(
      "attribute_predict",
      [](const ami::TrainedModel& tm, const ami::WitnessMap& map,
         const ami::Tensor& image, double alpha, double beta, double epsilon,
         const std::string& weaken_mode, const std::string& strengthen_mode) {
        const ami::Prediction p = ami::attribute_predict(
            tm.net, map, params_from(alpha, beta, epsilon, weaken_mode,
                                     strengthen_mode),
            image);
        return py::make_tuple(p.label, p.logits.data);
      },
      py::arg("model"), py::arg("map"), py::arg("image"), py::arg("alpha") = 100.0,
      py::arg("beta") = 60.0, py::arg("epsilon") = 1.15,
      py::arg("weaken_mode") = "above-mean", py::arg("strengthen_mode") = "formula",
      "returns (label, logits) of the attribute-steered model");

  py::class_<ami::AdversarialSet>(m, "AdversarialSet")
      .def_property_readonly("data",
                             [](const ami::AdversarialSet& s) { return s.data; })
      .def("__len__",
           [](const ami::AdversarialSet& s) { return s.examples.size(); })
      .def("example", [](const ami::AdversarialSet& s, std::size_t i) {
        if (i >= s.examples.size()) {
          throw ami::LookupError("example index out of range");
        }
        const ami::AdversarialExample& ex = s.examples[i];
        py::dict d;
        d["index"] = ex.index;
        d["gold"] = ex.gold;
        d["label"] = ex.label;
        d["method"] = ex.method;
        d["linf"] = ex.linf;
        d["l2"] = ex.l2;
        d["iterations"] = ex.iterations;
        d["success"] = ex.success;
        d["image"] = ex.image;
        return d;
      });

  m.def(
      "run_attack",
      [](const ami::TrainedModel& tm, const ami::Dataset& data,
         const std::vector<std::size_t>& indices, const std::string& method,
         const std::string& target, double budget, std::size_t steps,
         double step_size, std::uint64_t seed, std::size_t threads) {
        ami::AttackConfig c;
        c.method = method;
        c.target = target;
        c.epsilon = budget;
        c.steps = steps;
        c.step_size = step_size;
        c.seed = seed;
        return ami::run_attack(tm.net, data, indices, c, threads);
      },
      py::arg("model"), py::arg("data"), py::arg("indices"),
      py::arg("method") = "fgsm", py::arg("target") = "untargeted",
      py::arg("budget") = 0.15, py::arg("steps") = 10, py::arg("step_size") = 0.03,
      py::arg("seed") = 99, py::arg("threads") = 1);
  m.def("save_adversarial", &ami::save_adversarial, py::arg("set"),
        py::arg("path"));
  m.def("load_adversarial", &ami::load_adversarial, py::arg("path"));

  m.def(
      "classify_case",
      [](std::size_t gold, std::size_t original, std::size_t attribute) {
        return ami::case_name(ami::classify_case(gold, original, attribute));
      },
      py::arg("gold"), py::arg("original"), py::arg("attribute"));
  m.def(
      "detect",
      [](const ami::TrainedModel& tm, const ami::WitnessMap& map,
         const ami::Tensor& image, std::size_t gold, double alpha, double beta,
         double epsilon, const std::string& weaken_mode,
         const std::string& strengthen_mode) {
        return record_to_dict(ami::detect(
            tm.net, map,
            params_from(alpha, beta, epsilon, weaken_mode, strengthen_mode),
            image, gold));
      },
      py::arg("model"), py::arg("map"), py::arg("image"), py::arg("gold"),
      py::arg("alpha") = 100.0, py::arg("beta") = 60.0, py::arg("epsilon") = 1.15,
      py::arg("weaken_mode") = "above-mean",
      py::arg("strengthen_mode") = "formula");
  m.def(
      "aggregate_triples",
      [](const std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>&
             triples) {
        std::vector<ami::DetectionRecord> records;
        for (const auto& [x, y, z] : triples) {
          ami::DetectionRecord rec;
          rec.id = records.size();
          rec.gold = x;
          rec.original = y;
          rec.attribute = z;
          rec.flagged = y != z;
          rec.label = ami::classify_case(x, y, z);
          records.push_back(rec);
        }
        return ami::report_to_json(ami::aggregate(records));
      },
      py::arg("triples"),
      "aggregates (gold, original, attribute) triples; returns metrics JSON");
  m.def(
      "replay_log",
      [](const std::filesystem::path& path) {
        py::list out;
        for (const ami::DetectionRecord& rec : ami::replay_log(path)) {
          out.append(record_to_dict(rec));
        }
        return out;
      },
      py::arg("path"));

  m.def(
      "run_pipeline",
      [](const std::string& config_json, const std::filesystem::path& out_dir) {
        const ami::PipelineResult r = ami::run_pipeline(
            ami::pipeline_config_from_json(config_json), out_dir);
        py::dict d;
        d["artifacts"] = r.artifacts;
        d["train_accuracy"] = r.train_accuracy;
        d["holdout_accuracy"] = r.holdout_accuracy;
        d["record_count"] = r.record_count;
        d["metrics"] = ami::report_to_json(r.report);
        return d;
      },
      py::arg("config_json") = "{}", py::arg("out_dir") = "pipeline_out");
  m.def(
      "determinism_check",
      [](const std::string& config_json, std::size_t repetitions,
         const std::filesystem::path& work_dir, bool reseed_between_runs) {
        const ami::DeterminismResult r = ami::determinism_check(
            ami::pipeline_config_from_json(config_json), repetitions, work_dir,
            reseed_between_runs);
        return py::make_tuple(r.passed, r.first_divergent);
      },
      py::arg("config_json") = "{}", py::arg("repetitions") = 2,
      py::arg("work_dir") = "determinism_out",
      py::arg("reseed_between_runs") = false);
}
