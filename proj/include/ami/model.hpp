#pragma once

#include <cstdint>
#include <filesystem>

#include "ami/datagen.hpp"
#include "ami/network.hpp"
#include "ami/serial.hpp"

namespace ami {

struct Hyper {
  std::size_t epochs = 30;
  std::size_t batch = 16;
  double learning_rate = 0.05;
  std::uint64_t seed = 7;
};

struct TrainMeta {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t batch = 0;
  double learning_rate = 0.0;
  double final_train_accuracy = 0.0;
  double final_loss = 0.0;
};

struct TrainedModel {
  Network net;
  TrainMeta meta;
};

struct Prediction {
  std::size_t label = 0;
  Tensor logits;
  Tensor probabilities;
};

// conv(8,3,3) > relu > maxpool > conv(8,3,3) > relu > flatten > dense(32)
// > relu > dense(K) on a 1x16x16 input.
NetworkSpec default_spec(std::size_t num_classes, std::size_t height = 16,
                         std::size_t width = 16);

// Plain SGD with seed-derived shuffling; bitwise deterministic given
// (spec, dataset, hyper). Throws TrainingError naming the epoch if the
// loss goes non-finite.
TrainedModel train(const NetworkSpec& spec, const Dataset& data, const Hyper& hyper);

// Argmax with lowest-index tie-break.
Prediction predict(const Network& net, const Tensor& image);

double accuracy(const Network& net, const Dataset& data);

// AMLM container: magic "AMLM", u32 version, u64 length-prefixed JSON
// (spec + training metadata), then weight tensors in spec order as
// little-endian f64 (weights then bias per parametric layer).
Bytes model_to_bytes(const TrainedModel& model);
TrainedModel model_from_bytes(const Bytes& bytes);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

std::string weight_digest(const Network& net);

}  // namespace ami
