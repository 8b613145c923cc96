#pragma once

#include <cstddef>

#include "ami/tensor.hpp"

namespace ami::ops {

// Forward evaluators for the layer set the lab needs. Every reduction has a
// pinned accumulation order (stated per op) and the build disables FMA
// contraction, so results are reproducible bit for bit.

// a[m x k] * b[k x n]; each output element accumulates k ascending from 0.
Tensor matmul(const Tensor& a, const Tensor& b);

// Cross-correlation (no kernel flip), stride 1, valid padding.
// input [C x H x W], kernels [F x C x kh x kw], bias [F].
// out[f,y,x] starts at bias[f] and accumulates (c, ki, kj) ascending.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias);

Tensor relu(const Tensor& x);

// 2x2 max pooling, stride 2; H and W must be even.
Tensor maxpool2x2(const Tensor& x);

Tensor flatten(const Tensor& x);

// x [in], weights [out x in], bias [out]; out[o] starts at bias[o] and
// accumulates k ascending.
Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias);

// Max-subtracted softmax over the (single) axis of a rank-1 tensor.
Tensor softmax(const Tensor& logits);

// -log(p[label]); p floored at 1e-300 so the result stays finite.
double cross_entropy(const Tensor& probabilities, std::size_t label);

// Reverse-mode companions. Each takes the recorded forward input plus the
// gradient flowing in from above, mirroring the forward accumulation orders.

struct DenseGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

struct Conv2dGrads {
  Tensor input;
  Tensor kernels;
  Tensor bias;
};

Tensor relu_backward(const Tensor& input, const Tensor& grad_out);
Tensor maxpool2x2_backward(const Tensor& input, const Tensor& grad_out);
Tensor flatten_backward(const Tensor& input, const Tensor& grad_out);
DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out);
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out);

// d(cross_entropy(softmax(logits), label)) / d(logits) = p - onehot(label).
Tensor softmax_cross_entropy_grad(const Tensor& logits, std::size_t label);

}  // namespace ami::ops
