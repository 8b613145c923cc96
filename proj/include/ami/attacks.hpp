#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ami/datagen.hpp"
#include "ami/model.hpp"
#include "ami/network.hpp"

namespace ami {

struct CwConfig {
  double initial_c = 1e-2;
  double kappa = 0.0;
  std::size_t search_rounds = 9;
  std::size_t iterations = 200;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

struct PatchMask {
  std::size_t row = 6;
  std::size_t col = 6;
  std::size_t height = 4;
  std::size_t width = 4;
};

struct AttackConfig {
  std::string method = "fgsm";        // fgsm | bim | cw | patch
  std::string target = "untargeted";  // untargeted | first | next | <class id>
  double epsilon = 0.15;              // L-inf budget (fgsm/bim)
  std::size_t steps = 10;             // bim/patch iterations
  double step_size = 0.03;
  CwConfig cw;
  PatchMask mask;
  std::uint64_t seed = 99;

  void validate() const;  // throws ConfigError
};

struct AdversarialExample {
  std::size_t index = 0;  // position in the source dataset
  Tensor image;           // perturbed, pixels in [0,1]
  std::size_t gold = 0;
  std::size_t label = 0;  // original model's prediction on `image`
  std::string method;
  double linf = 0.0;
  double l2 = 0.0;
  std::size_t iterations = 0;
  bool targeted = false;
  std::size_t target = 0;  // meaningful only when targeted
  bool success = false;    // verified by a fresh forward pass at return
};

// Everything below is bitwise deterministic given its arguments; the only
// randomness is C&W's seeded init noise.

// Single signed-gradient step, x' = clip01(x + eps * sign(grad CE)).
// sign(0) = 0, so a flat gradient returns x unchanged.
AdversarialExample fgsm(const Network& net, const Tensor& image, std::size_t gold,
                        double epsilon);

// Iterated signed steps with projection onto the L-inf ball and [0,1] after
// each one; stops early once an iterate misclassifies. bim(1, eps, eps)
// reproduces fgsm bitwise.
AdversarialExample bim(const Network& net, const Tensor& image, std::size_t gold,
                       double epsilon, std::size_t steps, double step_size);

// L2 attack via tanh reparameterization: x' = (tanh(w)+1)/2, minimizing
// |x'-x|^2 + c * max(Z_gold - max_{j!=gold} Z_j, -kappa) by fixed-step
// gradient descent, with binary search over c keeping the smallest-norm
// success. Failure is a data outcome, not an error.
AdversarialExample cw_l2(const Network& net, const Tensor& image, std::size_t gold,
                         const CwConfig& config);

// Targeted ascent confined to the mask: pixels outside it are never touched,
// inside only the [0,1] box applies. Throws ConfigError on an empty or
// out-of-bounds mask.
AdversarialExample patch(const Network& net, const Tensor& image, std::size_t gold,
                         const PatchMask& mask, std::size_t target,
                         std::size_t steps, double step_size);

// "first": most likely non-gold class of the clean logits, "next": second
// most likely; otherwise a literal class id.
std::size_t pick_target(const Tensor& clean_logits, std::size_t gold,
                        const std::string& strategy, std::size_t num_classes);

struct AdversarialSet {
  Dataset data;  // images perturbed, labels = gold
  AttackConfig config;
  std::vector<AdversarialExample> examples;  // ordered by source index
};

// Attacks each selected example; examples come back ordered by index.
// threads > 1 splits the per-example work across that many workers; every
// example owns its output slot and RNG stream, so the result is identical
// to the serial run.
AdversarialSet run_attack(const Network& net, const Dataset& source,
                          const std::vector<std::size_t>& indices,
                          const AttackConfig& config, std::size_t threads = 1);

// Dataset container with the attack config and per-example metadata in the
// JSON trailer.
Bytes adversarial_to_bytes(const AdversarialSet& set);
AdversarialSet adversarial_from_bytes(const Bytes& bytes);
void save_adversarial(const AdversarialSet& set, const std::filesystem::path& path);
AdversarialSet load_adversarial(const std::filesystem::path& path);

}  // namespace ami
