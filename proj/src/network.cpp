#include "ami/network.hpp"

#include "ami/errors.hpp"

namespace ami {

std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool2x2: return "maxpool2x2";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
  }
  throw StateError("unknown layer kind");
}

LayerKind layer_kind_from_name(const std::string& name) {
  if (name == "conv") return LayerKind::Conv;
  if (name == "relu") return LayerKind::Relu;
  if (name == "maxpool2x2") return LayerKind::MaxPool2x2;
  if (name == "flatten") return LayerKind::Flatten;
  if (name == "dense") return LayerKind::Dense;
  throw ParseError("unknown layer kind \"" + name + "\"");
}

std::vector<std::vector<std::size_t>> NetworkSpec::shape_chain() const {
  if (input_shape.size() != 3) {
    throw DimensionError("network input shape must be CxHxW");
  }
  std::vector<std::vector<std::size_t>> chain;
  chain.push_back(input_shape);
  std::vector<std::size_t> cur = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + layer_kind_name(l.kind) + ")";
    switch (l.kind) {
      case LayerKind::Conv: {
        if (cur.size() != 3) throw DimensionError(where + ": needs CxHxW input");
        if (l.filters == 0 || l.kernel_h == 0 || l.kernel_w == 0)
          throw DimensionError(where + ": zero-sized kernel");
        if (l.kernel_h > cur[1] || l.kernel_w > cur[2])
          throw DimensionError(where + ": kernel larger than input " + shape_str(cur));
        cur = {l.filters, cur[1] - l.kernel_h + 1, cur[2] - l.kernel_w + 1};
        break;
      }
      case LayerKind::Relu:
        break;
      case LayerKind::MaxPool2x2: {
        if (cur.size() != 3) throw DimensionError(where + ": needs CxHxW input");
        if (cur[1] % 2 != 0 || cur[2] % 2 != 0)
          throw DimensionError(where + ": needs even spatial dims, got " + shape_str(cur));
        cur = {cur[0], cur[1] / 2, cur[2] / 2};
        break;
      }
      case LayerKind::Flatten: {
        std::size_t n = 1;
        for (std::size_t d : cur) n *= d;
        cur = {n};
        break;
      }
      case LayerKind::Dense: {
        if (cur.size() != 1) throw DimensionError(where + ": needs rank-1 input, got " + shape_str(cur));
        if (l.units == 0) throw DimensionError(where + ": zero units");
        cur = {l.units};
        break;
      }
    }
    chain.push_back(cur);
  }
  if (layers.empty() || layers.back().kind != LayerKind::Dense || cur.size() != 1) {
    throw DimensionError("network must end in a dense logits layer");
  }
  return chain;
}

std::size_t NetworkSpec::num_classes() const {
  return shape_chain().back()[0];
}

std::vector<std::size_t> NetworkSpec::relu_layers() const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::Relu) ids.push_back(i);
  }
  return ids;
}

Network make_network(const NetworkSpec& spec) {
  const auto chain = spec.shape_chain();
  Network net{spec, {}};
  net.params.resize(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.kind == LayerKind::Conv) {
      const std::size_t in_c = chain[i][0];
      net.params[i].weights = Tensor({l.filters, in_c, l.kernel_h, l.kernel_w});
      net.params[i].bias = Tensor({l.filters});
    } else if (l.kind == LayerKind::Dense) {
      net.params[i].weights = Tensor({l.units, chain[i][0]});
      net.params[i].bias = Tensor({l.units});
    }
  }
  return net;
}

void Network::validate_weight_shapes() const {
  const Network fresh = make_network(spec);
  if (fresh.params.size() != params.size()) {
    throw DimensionError("weight list length does not match spec");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].weights.shape != fresh.params[i].weights.shape ||
        params[i].bias.shape != fresh.params[i].bias.shape) {
      throw DimensionError("weights of layer " + std::to_string(i) + " do not match spec");
    }
  }
}

Tensor Network::apply_layer(std::size_t index, const Tensor& input) const {
  const LayerSpec& l = spec.layers[index];
  switch (l.kind) {
    case LayerKind::Conv:
      return ops::conv2d_forward(input, params[index].weights, params[index].bias);
    case LayerKind::Relu:
      return ops::relu(input);
    case LayerKind::MaxPool2x2:
      return ops::maxpool2x2(input);
    case LayerKind::Flatten:
      return ops::flatten(input);
    case LayerKind::Dense:
      return ops::dense(input, params[index].weights, params[index].bias);
  }
  throw StateError("unknown layer kind");
}

Tensor Network::forward(const Tensor& input) const {
  if (input.shape != spec.input_shape) {
    throw DimensionError("input shape " + shape_str(input.shape) +
                         " does not match network input " + shape_str(spec.input_shape));
  }
  Tensor cur = input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    cur = apply_layer(i, cur);
  }
  return cur;
}

Tensor Network::forward(const Tensor& input, Tape& tape) const {
  if (input.shape != spec.input_shape) {
    throw DimensionError("input shape " + shape_str(input.shape) +
                         " does not match network input " + shape_str(spec.input_shape));
  }
  tape.inputs.clear();
  tape.inputs.reserve(spec.layers.size());
  Tensor cur = input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    tape.inputs.push_back(cur);
    cur = apply_layer(i, cur);
  }
  tape.logits = cur;
  tape.recorded = true;
  return tape.logits;
}

Gradients Network::backward(const Tape& tape, const Tensor& logit_grad) const {
  if (!tape.recorded) {
    throw StateError("backward called without a recorded forward pass");
  }
  if (tape.inputs.size() != spec.layers.size()) {
    throw StateError("tape does not match network layer count");
  }
  if (logit_grad.shape != tape.logits.shape) {
    throw DimensionError("logit gradient shape mismatch");
  }
  Gradients g;
  g.params.resize(spec.layers.size());
  Tensor grad = logit_grad;
  for (std::size_t i = spec.layers.size(); i-- > 0;) {
    const Tensor& in = tape.inputs[i];
    switch (spec.layers[i].kind) {
      case LayerKind::Conv: {
        auto cg = ops::conv2d_backward(in, params[i].weights, grad);
        g.params[i].weights = std::move(cg.kernels);
        g.params[i].bias = std::move(cg.bias);
        grad = std::move(cg.input);
        break;
      }
      case LayerKind::Relu:
        grad = ops::relu_backward(in, grad);
        break;
      case LayerKind::MaxPool2x2:
        grad = ops::maxpool2x2_backward(in, grad);
        break;
      case LayerKind::Flatten:
        grad = ops::flatten_backward(in, grad);
        break;
      case LayerKind::Dense: {
        auto dg = ops::dense_backward(in, params[i].weights, grad);
        g.params[i].weights = std::move(dg.weights);
        g.params[i].bias = std::move(dg.bias);
        grad = std::move(dg.input);
        break;
      }
    }
  }
  g.input = std::move(grad);
  return g;
}

std::size_t Network::unit_count(std::size_t layer) const {
  const auto chain = spec.shape_chain();
  const auto& shape = chain[layer + 1];
  return shape[0];
}

}  // namespace ami
