#include "ami/model.hpp"

#include <cmath>
#include <numeric>

#include "ami/errors.hpp"
#include "json.hpp"

namespace ami {

namespace {

using nlohmann::json;

// Uniform Glorot-style init: +-sqrt(6 / (fan_in + fan_out)), biases zero.
void init_weights(Network& net, std::uint64_t seed) {
  Rng rng(Rng::mix(seed, 0xb001));
  const auto chain = net.spec.shape_chain();
  for (std::size_t i = 0; i < net.spec.layers.size(); ++i) {
    LayerParams& p = net.params[i];
    if (p.weights.size() == 0) continue;
    std::size_t fan_in = 0, fan_out = 0;
    if (net.spec.layers[i].kind == LayerKind::Conv) {
      const auto& k = p.weights.shape;  // F x C x kh x kw
      fan_in = k[1] * k[2] * k[3];
      fan_out = k[0] * k[2] * k[3];
    } else {
      fan_in = p.weights.shape[1];
      fan_out = p.weights.shape[0];
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& w : p.weights.data) w = rng.uniform(-limit, limit);
  }
}

json spec_to_json(const NetworkSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) {
    json j{{"kind", layer_kind_name(l.kind)}};
    if (l.kind == LayerKind::Conv) {
      j["filters"] = l.filters;
      j["kernel_h"] = l.kernel_h;
      j["kernel_w"] = l.kernel_w;
    } else if (l.kind == LayerKind::Dense) {
      j["units"] = l.units;
    }
    layers.push_back(j);
  }
  return json{{"input_shape", spec.input_shape}, {"layers", layers}};
}

NetworkSpec spec_from_json(const json& j) {
  NetworkSpec spec;
  spec.input_shape = j.at("input_shape").get<std::vector<std::size_t>>();
  for (const auto& l : j.at("layers")) {
    const LayerKind kind = layer_kind_from_name(l.at("kind").get<std::string>());
    LayerSpec ls{kind, 0, 0, 0, 0};
    if (kind == LayerKind::Conv) {
      ls.filters = l.at("filters").get<std::size_t>();
      ls.kernel_h = l.at("kernel_h").get<std::size_t>();
      ls.kernel_w = l.at("kernel_w").get<std::size_t>();
    } else if (kind == LayerKind::Dense) {
      ls.units = l.at("units").get<std::size_t>();
    }
    spec.layers.push_back(ls);
  }
  return spec;
}

}  // namespace

NetworkSpec default_spec(std::size_t num_classes, std::size_t height, std::size_t width) {
  NetworkSpec spec;
  spec.input_shape = {1, height, width};
  spec.layers = {LayerSpec::conv(8, 3, 3), LayerSpec::relu(),  LayerSpec::maxpool2x2(),
                 LayerSpec::conv(8, 3, 3), LayerSpec::relu(),  LayerSpec::flatten(),
                 LayerSpec::dense(32),     LayerSpec::relu(),  LayerSpec::dense(num_classes)};
  return spec;
}

TrainedModel train(const NetworkSpec& spec, const Dataset& data, const Hyper& hyper) {
  const std::size_t k = spec.num_classes();
  for (std::uint32_t l : data.labels) {
    if (l >= k) {
      throw ConfigError("dataset label " + std::to_string(l) +
                        " outside the network's " + std::to_string(k) + " classes");
    }
  }
  if (data.size() == 0) throw ConfigError("cannot train on an empty dataset");
  if (hyper.batch == 0 || hyper.epochs == 0) throw ConfigError("batch and epochs must be positive");

  Network net = make_network(spec);
  init_weights(net, hyper.seed);
  Rng shuffle_rng(Rng::mix(hyper.seed, 0x5f1e));

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  double last_loss = 0.0;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
      const std::size_t end = std::min(start + hyper.batch, order.size());
      Gradients sum;
      bool first = true;
      for (std::size_t t = start; t < end; ++t) {
        const std::size_t idx = order[t];
        Tape tape;
        net.forward(data.images[idx], tape);
        epoch_loss += ops::cross_entropy(ops::softmax(tape.logits), data.labels[idx]);
        const Tensor lg = ops::softmax_cross_entropy_grad(tape.logits, data.labels[idx]);
        Gradients g = net.backward(tape, lg);
        if (first) {
          sum = std::move(g);
          first = false;
        } else {
          for (std::size_t i = 0; i < sum.params.size(); ++i) {
            for (std::size_t w = 0; w < sum.params[i].weights.size(); ++w) {
              sum.params[i].weights[w] += g.params[i].weights[w];
            }
            for (std::size_t w = 0; w < sum.params[i].bias.size(); ++w) {
              sum.params[i].bias[w] += g.params[i].bias[w];
            }
          }
        }
      }
      const double scale = hyper.learning_rate / static_cast<double>(end - start);
      for (std::size_t i = 0; i < net.params.size(); ++i) {
        for (std::size_t w = 0; w < net.params[i].weights.size(); ++w) {
          net.params[i].weights[w] -= scale * sum.params[i].weights[w];
        }
        for (std::size_t w = 0; w < net.params[i].bias.size(); ++w) {
          net.params[i].bias[w] -= scale * sum.params[i].bias[w];
        }
      }
    }
    last_loss = epoch_loss / static_cast<double>(data.size());
    if (!std::isfinite(last_loss)) {
      throw TrainingError("training diverged (non-finite loss) at epoch " +
                          std::to_string(epoch));
    }
  }

  TrainedModel model{std::move(net), {}};
  model.meta.seed = hyper.seed;
  model.meta.epochs = hyper.epochs;
  model.meta.batch = hyper.batch;
  model.meta.learning_rate = hyper.learning_rate;
  model.meta.final_loss = last_loss;
  model.meta.final_train_accuracy = accuracy(model.net, data);
  return model;
}

Prediction predict(const Network& net, const Tensor& image) {
  Prediction p;
  p.logits = net.forward(image);
  p.probabilities = ops::softmax(p.logits);
  p.label = 0;
  for (std::size_t i = 1; i < p.logits.size(); ++i) {
    if (p.logits[i] > p.logits[p.label]) p.label = i;
  }
  return p;
}

double accuracy(const Network& net, const Dataset& data) {
  if (data.size() == 0) throw ConfigError("accuracy over an empty dataset");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predict(net, data.images[i]).label == data.labels[i]) hits++;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

Bytes model_to_bytes(const TrainedModel& model) {
  Bytes out;
  put_bytes(out, "AMLM", 4);
  put_u32(out, 1);
  json meta{{"spec", spec_to_json(model.net.spec)},
            {"meta",
             {{"seed", model.meta.seed},
              {"epochs", model.meta.epochs},
              {"batch", model.meta.batch},
              {"learning_rate", model.meta.learning_rate},
              {"final_train_accuracy", model.meta.final_train_accuracy},
              {"final_loss", model.meta.final_loss}}}};
  const std::string text = meta.dump();
  put_u64(out, text.size());
  put_bytes(out, text.data(), text.size());
  for (const auto& p : model.net.params) {
    for (double v : p.weights.data) put_f64(out, v);
    for (double v : p.bias.data) put_f64(out, v);
  }
  return out;
}

TrainedModel model_from_bytes(const Bytes& bytes) {
  ByteReader r(bytes, "model");
  r.expect_magic("AMLM");
  const std::uint32_t version = r.u32();
  if (version != 1) throw ParseError("unsupported model version " + std::to_string(version));
  const std::uint64_t len = r.u64();
  const json j = json::parse(r.str(len));
  TrainedModel model;
  model.net = make_network(spec_from_json(j.at("spec")));
  const json& m = j.at("meta");
  model.meta.seed = m.at("seed").get<std::uint64_t>();
  model.meta.epochs = m.at("epochs").get<std::size_t>();
  model.meta.batch = m.at("batch").get<std::size_t>();
  model.meta.learning_rate = m.at("learning_rate").get<double>();
  model.meta.final_train_accuracy = m.at("final_train_accuracy").get<double>();
  model.meta.final_loss = m.at("final_loss").get<double>();
  for (auto& p : model.net.params) {
    for (double& v : p.weights.data) v = r.f64();
    for (double& v : p.bias.data) v = r.f64();
  }
  if (!r.done()) throw ParseError("model: trailing bytes after weights");
  return model;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  write_file(path, model_to_bytes(model));
}

TrainedModel load_model(const std::filesystem::path& path) {
  return model_from_bytes(read_file(path));
}

std::string weight_digest(const Network& net) {
  Bytes bytes;
  for (const auto& p : net.params) {
    for (double v : p.weights.data) put_f64(bytes, v);
    for (double v : p.bias.data) put_f64(bytes, v);
  }
  return digest_hex(bytes);
}

}  // namespace ami
