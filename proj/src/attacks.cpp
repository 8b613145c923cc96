#include "ami/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "ami/errors.hpp"
#include "ami/ops.hpp"
#include "ami/rng.hpp"
#include "json.hpp"

namespace ami {

namespace {

using nlohmann::json;

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double linf_norm(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  }
  return m;
}

double l2_norm(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::size_t argmax(const Tensor& logits) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.data.size(); ++k) {
    if (logits.data[k] > logits.data[best]) best = k;
  }
  return best;
}

std::size_t argmax_excluding(const Tensor& logits, std::size_t banned) {
  std::size_t best = banned == 0 ? 1 : 0;
  for (std::size_t k = 0; k < logits.data.size(); ++k) {
    if (k == banned) continue;
    if (logits.data[k] > logits.data[best]) best = k;
  }
  return best;
}

Tensor input_ce_grad(const Network& net, const Tensor& image, std::size_t label) {
  Tape tape;
  const Tensor logits = net.forward(image, tape);
  return net.backward(tape, ops::softmax_cross_entropy_grad(logits, label)).input;
}

// Fills in label, norms, and the verified success flag.
AdversarialExample finish(const Network& net, const Tensor& original,
                          Tensor perturbed, std::size_t gold, std::string method,
                          std::size_t iterations, bool targeted,
                          std::size_t target) {
  AdversarialExample ex;
  ex.gold = gold;
  ex.method = std::move(method);
  ex.iterations = iterations;
  ex.targeted = targeted;
  ex.target = target;
  ex.linf = linf_norm(perturbed, original);
  ex.l2 = l2_norm(perturbed, original);
  ex.label = predict(net, perturbed).label;
  ex.success = targeted ? ex.label == target : ex.label != gold;
  ex.image = std::move(perturbed);
  return ex;
}

// Shared fgsm/bim core. Success is only checked after at least one step so
// that a single step reduces exactly to fgsm.
AdversarialExample iterated_signed(const Network& net, const Tensor& image,
                                   std::size_t gold, double epsilon,
                                   std::size_t steps, double step_size,
                                   const char* method) {
  Tensor x = image;
  std::size_t used = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    Tape tape;
    const Tensor logits = net.forward(x, tape);
    if (t > 0 && argmax(logits) != gold) break;
    const Tensor grad =
        net.backward(tape, ops::softmax_cross_entropy_grad(logits, gold)).input;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      const double lo = std::max(image.data[i] - epsilon, 0.0);
      const double hi = std::min(image.data[i] + epsilon, 1.0);
      x.data[i] = std::clamp(x.data[i] + step_size * sgn(grad.data[i]), lo, hi);
    }
    used = t + 1;
  }
  return finish(net, image, std::move(x), gold, method, used, false, 0);
}

}  // namespace

void AttackConfig::validate() const {
  if (method != "fgsm" && method != "bim" && method != "cw" && method != "patch") {
    throw ConfigError("unknown attack method '" + method + "'");
  }
  if (method == "fgsm" || method == "bim") {
    if (!(epsilon > 0.0)) throw ConfigError("attack epsilon must be positive");
  }
  if (method == "bim" || method == "patch") {
    if (steps < 1) throw ConfigError("attack steps must be at least 1");
    if (!(step_size > 0.0)) throw ConfigError("step size must be positive");
  }
  if (method == "bim" && step_size > epsilon) {
    throw ConfigError("bim step size must not exceed epsilon");
  }
  if (method == "cw") {
    if (!(cw.initial_c > 0.0)) throw ConfigError("cw initial c must be positive");
    if (cw.kappa < 0.0) throw ConfigError("cw kappa must be non-negative");
    if (cw.search_rounds < 1 || cw.iterations < 1) {
      throw ConfigError("cw rounds and iterations must be at least 1");
    }
    if (!(cw.learning_rate > 0.0)) {
      throw ConfigError("cw learning rate must be positive");
    }
  }
  if (method == "patch") {
    if (mask.height == 0 || mask.width == 0) throw ConfigError("patch mask is empty");
    if (target == "untargeted") {
      throw ConfigError("patch requires a target (first, next, or a class id)");
    }
  } else if (target != "untargeted") {
    throw ConfigError(method + " is untargeted; drop the target setting");
  }
}

AdversarialExample fgsm(const Network& net, const Tensor& image, std::size_t gold,
                        double epsilon) {
  return iterated_signed(net, image, gold, epsilon, 1, epsilon, "fgsm");
}

AdversarialExample bim(const Network& net, const Tensor& image, std::size_t gold,
                       double epsilon, std::size_t steps, double step_size) {
  return iterated_signed(net, image, gold, epsilon, steps, step_size, "bim");
}

AdversarialExample cw_l2(const Network& net, const Tensor& image, std::size_t gold,
                         const CwConfig& config) {
  const std::size_t n = image.data.size();
  Tensor clamped = image;
  for (double& p : clamped.data) p = std::clamp(p, 1e-6, 1.0 - 1e-6);

  std::vector<double> w0(n);
  Rng rng(config.seed);
  for (std::size_t i = 0; i < n; ++i) {
    w0[i] = std::atanh(2.0 * clamped.data[i] - 1.0) + rng.uniform(-1e-3, 1e-3);
  }

  Tensor best = image;
  double best_l2 = std::numeric_limits<double>::infinity();
  std::size_t best_iter = 0;
  bool found = false;

  double c = config.initial_c;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  std::size_t total_iter = 0;

  for (std::size_t round = 0; round < config.search_rounds; ++round) {
    std::vector<double> w = w0;
    Tensor x(image.shape, std::vector<double>(n, 0.0));
    bool round_success = false;
    for (std::size_t it = 0; it < config.iterations; ++it) {
      for (std::size_t i = 0; i < n; ++i) x.data[i] = (std::tanh(w[i]) + 1.0) / 2.0;
      Tape tape;
      const Tensor logits = net.forward(x, tape);
      const std::size_t runner = argmax_excluding(logits, gold);
      const double margin = logits.data[gold] - logits.data[runner];
      ++total_iter;
      if (argmax(logits) != gold) {
        round_success = true;
        const double norm = l2_norm(x, image);
        if (norm < best_l2) {
          best = x;
          best_l2 = norm;
          best_iter = total_iter;
          found = true;
        }
      }
      Tensor dx(image.shape, std::vector<double>(n, 0.0));
      if (margin > -config.kappa) {
        Tensor lg({logits.data.size()}, std::vector<double>(logits.data.size(), 0.0));
        lg.data[gold] = 1.0;
        lg.data[runner] = -1.0;
        dx = net.backward(tape, lg).input;
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double g = 2.0 * (x.data[i] - image.data[i]) + c * dx.data[i];
        const double th = std::tanh(w[i]);
        w[i] -= config.learning_rate * g * 0.5 * (1.0 - th * th);
      }
    }
    if (round_success) {
      hi = c;
      c = (lo + hi) / 2.0;
    } else {
      lo = c;
      c = std::isinf(hi) ? c * 10.0 : (lo + hi) / 2.0;
    }
  }

  return finish(net, image, found ? best : image, gold, "cw",
                found ? best_iter : total_iter, false, 0);
}

AdversarialExample patch(const Network& net, const Tensor& image, std::size_t gold,
                         const PatchMask& mask, std::size_t target,
                         std::size_t steps, double step_size) {
  if (mask.height == 0 || mask.width == 0) throw ConfigError("patch mask is empty");
  const std::size_t h = image.shape[1];
  const std::size_t w = image.shape[2];
  if (mask.row + mask.height > h || mask.col + mask.width > w) {
    throw ConfigError("patch mask exceeds image bounds");
  }
  if (target >= net.spec.num_classes()) {
    throw ConfigError("patch target class out of range");
  }
  Tensor x = image;
  std::size_t used = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    Tape tape;
    const Tensor logits = net.forward(x, tape);
    if (t > 0 && argmax(logits) == target) break;
    const Tensor grad =
        net.backward(tape, ops::softmax_cross_entropy_grad(logits, target)).input;
    for (std::size_t r = mask.row; r < mask.row + mask.height; ++r) {
      for (std::size_t cc = mask.col; cc < mask.col + mask.width; ++cc) {
        const std::size_t i = r * w + cc;
        x.data[i] = std::clamp(x.data[i] - step_size * sgn(grad.data[i]), 0.0, 1.0);
      }
    }
    used = t + 1;
  }
  return finish(net, image, std::move(x), gold, "patch", used, true, target);
}

std::size_t pick_target(const Tensor& clean_logits, std::size_t gold,
                        const std::string& strategy, std::size_t num_classes) {
  if (strategy == "first" || strategy == "next") {
    const std::size_t first = argmax_excluding(clean_logits, gold);
    if (strategy == "first") return first;
    std::size_t second = std::numeric_limits<std::size_t>::max();
    for (std::size_t k = 0; k < clean_logits.data.size(); ++k) {
      if (k == gold || k == first) continue;
      if (second == std::numeric_limits<std::size_t>::max() ||
          clean_logits.data[k] > clean_logits.data[second]) {
        second = k;
      }
    }
    if (second == std::numeric_limits<std::size_t>::max()) {
      throw ConfigError("'next' needs at least three classes");
    }
    return second;
  }
  std::size_t id = 0;
  try {
    std::size_t pos = 0;
    id = std::stoull(strategy, &pos);
    if (pos != strategy.size()) throw std::invalid_argument(strategy);
  } catch (const std::exception&) {
    throw ConfigError("unknown target '" + strategy + "'");
  }
  if (id >= num_classes) throw ConfigError("target class out of range");
  return id;
}

AdversarialSet run_attack(const Network& net, const Dataset& source,
                          const std::vector<std::size_t>& indices,
                          const AttackConfig& config, std::size_t threads) {
  config.validate();
  for (std::size_t idx : indices) {
    if (idx >= source.size()) {
      throw LookupError("attack index " + std::to_string(idx) + " out of range");
    }
  }
  if (config.method == "patch" && config.target != "first" &&
      config.target != "next") {
    pick_target(Tensor({source.num_classes},
                       std::vector<double>(source.num_classes, 0.0)),
                0, config.target, source.num_classes);  // range check up front
  }
  if (config.method == "patch" && config.target == "next" &&
      source.num_classes < 3) {
    throw ConfigError("'next' needs at least three classes");
  }

  const auto attack_one = [&](std::size_t idx) {
    const Tensor& img = source.images[idx];
    const std::size_t gold = source.labels[idx];
    AdversarialExample ex;
    if (config.method == "fgsm") {
      ex = fgsm(net, img, gold, config.epsilon);
    } else if (config.method == "bim") {
      ex = bim(net, img, gold, config.epsilon, config.steps, config.step_size);
    } else if (config.method == "cw") {
      CwConfig cw = config.cw;
      cw.seed = Rng::mix(config.seed, idx);
      ex = cw_l2(net, img, gold, cw);
    } else {
      const Tensor clean_logits = predict(net, img).logits;
      const std::size_t target =
          pick_target(clean_logits, gold, config.target, source.num_classes);
      ex = patch(net, img, gold, config.mask, target, config.steps,
                 config.step_size);
    }
    ex.index = idx;
    return ex;
  };

  std::vector<AdversarialExample> examples(indices.size());
  if (threads <= 1 || indices.size() < 2) {
    for (std::size_t i = 0; i < indices.size(); ++i) {
      examples[i] = attack_one(indices[i]);
    }
  } else {
    const std::size_t workers = std::min(threads, indices.size());
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        try {
          for (std::size_t i = w; i < indices.size(); i += workers) {
            examples[i] = attack_one(indices[i]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  AdversarialSet set;
  set.config = config;
  set.data = source;
  set.data.images.clear();
  set.data.labels.clear();
  set.data.jitter.clear();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    set.data.images.push_back(examples[i].image);
    set.data.labels.push_back(examples[i].gold);
    set.data.jitter.push_back(source.jitter[indices[i]]);
  }
  set.examples = std::move(examples);
  return set;
}

Bytes adversarial_to_bytes(const AdversarialSet& set) {
  json meta;
  meta["method"] = set.config.method;
  meta["target"] = set.config.target;
  meta["epsilon"] = set.config.epsilon;
  meta["steps"] = set.config.steps;
  meta["step_size"] = set.config.step_size;
  meta["seed"] = set.config.seed;
  meta["cw"] = json{{"initial_c", set.config.cw.initial_c},
                    {"kappa", set.config.cw.kappa},
                    {"search_rounds", set.config.cw.search_rounds},
                    {"iterations", set.config.cw.iterations},
                    {"learning_rate", set.config.cw.learning_rate}};
  meta["mask"] = json{{"row", set.config.mask.row},
                      {"col", set.config.mask.col},
                      {"height", set.config.mask.height},
                      {"width", set.config.mask.width}};
  json examples = json::array();
  for (const AdversarialExample& ex : set.examples) {
    examples.push_back(json{{"index", ex.index},
                            {"gold", ex.gold},
                            {"label", ex.label},
                            {"method", ex.method},
                            {"linf", ex.linf},
                            {"l2", ex.l2},
                            {"iterations", ex.iterations},
                            {"targeted", ex.targeted},
                            {"target", ex.target},
                            {"success", ex.success}});
  }
  const json extra = json{{"attack", json{{"config", meta}, {"examples", examples}}}};
  return dataset_to_bytes(set.data, extra.dump());
}

AdversarialSet adversarial_from_bytes(const Bytes& bytes) {
  AdversarialSet set;
  std::string extra;
  set.data = dataset_from_bytes(bytes, &extra);
  if (extra.empty()) throw ParseError("adversarial set: missing attack trailer");
  const json root = json::parse(extra);
  const json& meta = root.at("attack").at("config");
  set.config.method = meta.at("method").get<std::string>();
  set.config.target = meta.at("target").get<std::string>();
  set.config.epsilon = meta.at("epsilon").get<double>();
  set.config.steps = meta.at("steps").get<std::size_t>();
  set.config.step_size = meta.at("step_size").get<double>();
  set.config.seed = meta.at("seed").get<std::uint64_t>();
  set.config.cw.initial_c = meta.at("cw").at("initial_c").get<double>();
  set.config.cw.kappa = meta.at("cw").at("kappa").get<double>();
  set.config.cw.search_rounds = meta.at("cw").at("search_rounds").get<std::size_t>();
  set.config.cw.iterations = meta.at("cw").at("iterations").get<std::size_t>();
  set.config.cw.learning_rate = meta.at("cw").at("learning_rate").get<double>();
  set.config.mask.row = meta.at("mask").at("row").get<std::size_t>();
  set.config.mask.col = meta.at("mask").at("col").get<std::size_t>();
  set.config.mask.height = meta.at("mask").at("height").get<std::size_t>();
  set.config.mask.width = meta.at("mask").at("width").get<std::size_t>();
  const json& examples = root.at("attack").at("examples");
  if (examples.size() != set.data.size()) {
    throw ParseError("adversarial set: example metadata count mismatch");
  }
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const json& e = examples[i];
    AdversarialExample ex;
    ex.index = e.at("index").get<std::size_t>();
    ex.gold = e.at("gold").get<std::size_t>();
    ex.label = e.at("label").get<std::size_t>();
    ex.method = e.at("method").get<std::string>();
    ex.linf = e.at("linf").get<double>();
    ex.l2 = e.at("l2").get<double>();
    ex.iterations = e.at("iterations").get<std::size_t>();
    ex.targeted = e.at("targeted").get<bool>();
    ex.target = e.at("target").get<std::size_t>();
    ex.success = e.at("success").get<bool>();
    ex.image = set.data.images[i];
    set.examples.push_back(std::move(ex));
  }
  return set;
}

void save_adversarial(const AdversarialSet& set, const std::filesystem::path& path) {
  write_file(path, adversarial_to_bytes(set));
}

AdversarialSet load_adversarial(const std::filesystem::path& path) {
  return adversarial_from_bytes(read_file(path));
}

}  // namespace ami
