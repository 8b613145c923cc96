#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ami/ops.hpp"
#include "ami/tensor.hpp"

namespace ami {

enum class LayerKind { Conv, Relu, MaxPool2x2, Flatten, Dense };

std::string layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
  LayerKind kind;
  // Conv: filters x kernel_h x kernel_w. Dense: units. Others carry nothing.
  std::size_t filters = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t units = 0;

  static LayerSpec conv(std::size_t filters, std::size_t kh, std::size_t kw) {
    return {LayerKind::Conv, filters, kh, kw, 0};
  }
  static LayerSpec relu() { return {LayerKind::Relu, 0, 0, 0, 0}; }
  static LayerSpec maxpool2x2() { return {LayerKind::MaxPool2x2, 0, 0, 0, 0}; }
  static LayerSpec flatten() { return {LayerKind::Flatten, 0, 0, 0, 0}; }
  static LayerSpec dense(std::size_t units) { return {LayerKind::Dense, 0, 0, 0, units}; }
};

// Ordered layer list plus input shape. Validation chains shapes from the
// input to the final logits vector.
struct NetworkSpec {
  std::vector<std::size_t> input_shape;  // {C, H, W}
  std::vector<LayerSpec> layers;

  // Shape after each layer; index 0 is the input shape. Throws
  // DimensionError if the chain is inconsistent or does not end in a
  // rank-1 logits vector.
  std::vector<std::vector<std::size_t>> shape_chain() const;

  std::size_t num_classes() const;
  std::vector<std::size_t> relu_layers() const;
};

struct LayerParams {
  Tensor weights;  // conv: FxCxKHxKW, dense: OUTxIN; empty otherwise
  Tensor bias;
};

// Recorded forward pass: the input each layer saw, plus the logits.
struct Tape {
  std::vector<Tensor> inputs;
  Tensor logits;
  bool recorded = false;
};

struct Gradients {
  std::vector<LayerParams> params;  // parallel to Network::params
  Tensor input;
};

// A spec with weights. Forward evaluation is pure; backward consumes a tape
// recorded by forward.
struct Network {
  NetworkSpec spec;
  std::vector<LayerParams> params;  // one entry per layer; empty tensors on
                                    // non-parametric layers

  Tensor apply_layer(std::size_t index, const Tensor& input) const;
  Tensor forward(const Tensor& input) const;
  Tensor forward(const Tensor& input, Tape& tape) const;
  Gradients backward(const Tape& tape, const Tensor& logit_grad) const;

  // Unit count at a layer for instrumentation purposes: channels for
  // rank-3 outputs, units for rank-1 outputs.
  std::size_t unit_count(std::size_t layer) const;

  void validate_weight_shapes() const;
};

// Allocates zero weights matching the layer shapes.
Network make_network(const NetworkSpec& spec);

}  // namespace ami
