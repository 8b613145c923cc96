#include "ami/ops.hpp"

#include <algorithm>
#include <cmath>

namespace ami::ops {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw DimensionError(msg);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2,
          "matmul expects rank-2 tensors, got " + shape_str(a.shape) + " and " +
              shape_str(b.shape));
  require(a.shape[1] == b.shape[0],
          "matmul inner dimensions differ: " + shape_str(a.shape) + " vs " +
              shape_str(b.shape));
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        acc += a.at(i, p) * b.at(p, j);
      }
      out.at(i, j) = acc;
    }
  }
  return out;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  require(input.rank() == 3, "conv2d input must be CxHxW, got " + shape_str(input.shape));
  require(kernels.rank() == 4, "conv2d kernels must be FxCxKHxKW, got " + shape_str(kernels.shape));
  require(bias.rank() == 1 && bias.shape[0] == kernels.shape[0],
          "conv2d bias must have one value per filter");
  const std::size_t c = input.shape[0], h = input.shape[1], w = input.shape[2];
  const std::size_t f = kernels.shape[0], kh = kernels.shape[2], kw = kernels.shape[3];
  require(kernels.shape[1] == c, "conv2d kernel channel count " +
                                     std::to_string(kernels.shape[1]) +
                                     " does not match input channels " + std::to_string(c));
  require(kh <= h && kw <= w, "conv2d kernel " + shape_str(kernels.shape) +
                                  " larger than input " + shape_str(input.shape));
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;
  Tensor out({f, oh, ow});
  for (std::size_t fi = 0; fi < f; ++fi) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = bias[fi];
        for (std::size_t ci = 0; ci < c; ++ci) {
          for (std::size_t ki = 0; ki < kh; ++ki) {
            for (std::size_t kj = 0; kj < kw; ++kj) {
              acc += input.at(ci, y + ki, x + kj) * kernels.at(fi, ci, ki, kj);
            }
          }
        }
        out.at(fi, y, x) = acc;
      }
    }
  }
  return out;
}

Tensor relu(const Tensor& x) {
  require(x.size() > 0, "relu on empty tensor");
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] > 0.0 ? x[i] : 0.0;
  }
  return out;
}

Tensor maxpool2x2(const Tensor& x) {
  require(x.rank() == 3, "maxpool2x2 input must be CxHxW, got " + shape_str(x.shape));
  const std::size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
  require(h % 2 == 0 && w % 2 == 0,
          "maxpool2x2 needs even spatial dims, got " + shape_str(x.shape));
  Tensor out({c, h / 2, w / 2});
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t y = 0; y + 1 < h; y += 2) {
      for (std::size_t xx = 0; xx + 1 < w; xx += 2) {
        double m = x.at(ci, y, xx);
        m = std::max(m, x.at(ci, y, xx + 1));
        m = std::max(m, x.at(ci, y + 1, xx));
        m = std::max(m, x.at(ci, y + 1, xx + 1));
        out.at(ci, y / 2, xx / 2) = m;
      }
    }
  }
  return out;
}

Tensor flatten(const Tensor& x) {
  require(x.size() > 0, "flatten on empty tensor");
  return Tensor({x.size()}, x.data);
}

Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  require(x.rank() == 1, "dense input must be rank 1, got " + shape_str(x.shape));
  require(weights.rank() == 2 && weights.shape[1] == x.shape[0],
          "dense weights " + shape_str(weights.shape) + " do not match input " +
              shape_str(x.shape));
  require(bias.rank() == 1 && bias.shape[0] == weights.shape[0],
          "dense bias must have one value per output unit");
  const std::size_t out_n = weights.shape[0], in_n = x.shape[0];
  Tensor out({out_n});
  for (std::size_t o = 0; o < out_n; ++o) {
    double acc = bias[o];
    for (std::size_t k = 0; k < in_n; ++k) {
      acc += weights.at(o, k) * x[k];
    }
    out[o] = acc;
  }
  return out;
}

Tensor softmax(const Tensor& logits) {
  require(logits.rank() == 1 && logits.size() > 0,
          "softmax expects a non-empty rank-1 tensor");
  double m = logits[0];
  for (std::size_t i = 1; i < logits.size(); ++i) m = std::max(m, logits[i]);
  Tensor out(logits.shape);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= sum;
  return out;
}

double cross_entropy(const Tensor& probabilities, std::size_t label) {
  require(probabilities.rank() == 1 && label < probabilities.size(),
          "cross_entropy label out of range");
  return -std::log(std::max(probabilities[label], 1e-300));
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  require(input.same_shape(grad_out), "relu_backward shape mismatch");
  Tensor out(input.shape);
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
  }
  return out;
}

Tensor maxpool2x2_backward(const Tensor& input, const Tensor& grad_out) {
  const std::size_t c = input.shape[0], h = input.shape[1], w = input.shape[2];
  require(grad_out.rank() == 3 && grad_out.shape[0] == c &&
              grad_out.shape[1] == h / 2 && grad_out.shape[2] == w / 2,
          "maxpool2x2_backward shape mismatch");
  Tensor out(input.shape);
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t y = 0; y + 1 < h; y += 2) {
      for (std::size_t xx = 0; xx + 1 < w; xx += 2) {
        // Gradient routes to the first maximum in row-major window order.
        std::size_t by = y, bx = xx;
        double best = input.at(ci, y, xx);
        const std::size_t ys[4] = {y, y, y + 1, y + 1};
        const std::size_t xs[4] = {xx, xx + 1, xx, xx + 1};
        for (int t = 1; t < 4; ++t) {
          if (input.at(ci, ys[t], xs[t]) > best) {
            best = input.at(ci, ys[t], xs[t]);
            by = ys[t];
            bx = xs[t];
          }
        }
        out.at(ci, by, bx) += grad_out.at(ci, y / 2, xx / 2);
      }
    }
  }
  return out;
}

Tensor flatten_backward(const Tensor& input, const Tensor& grad_out) {
  require(grad_out.size() == input.size(), "flatten_backward size mismatch");
  return Tensor(input.shape, grad_out.data);
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out) {
  const std::size_t out_n = weights.shape[0], in_n = weights.shape[1];
  require(grad_out.rank() == 1 && grad_out.shape[0] == out_n,
          "dense_backward gradient shape mismatch");
  DenseGrads g{Tensor({in_n}), Tensor({out_n, in_n}), Tensor({out_n})};
  for (std::size_t o = 0; o < out_n; ++o) {
    g.bias[o] = grad_out[o];
    for (std::size_t k = 0; k < in_n; ++k) {
      g.weights.at(o, k) = grad_out[o] * input[k];
    }
  }
  for (std::size_t k = 0; k < in_n; ++k) {
    double acc = 0.0;
    for (std::size_t o = 0; o < out_n; ++o) {
      acc += weights.at(o, k) * grad_out[o];
    }
    g.input[k] = acc;
  }
  return g;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out) {
  const std::size_t c = input.shape[0];
  const std::size_t f = kernels.shape[0], kh = kernels.shape[2], kw = kernels.shape[3];
  const std::size_t oh = input.shape[1] - kh + 1, ow = input.shape[2] - kw + 1;
  require(grad_out.rank() == 3 && grad_out.shape[0] == f && grad_out.shape[1] == oh &&
              grad_out.shape[2] == ow,
          "conv2d_backward gradient shape mismatch");
  Conv2dGrads g{Tensor(input.shape), Tensor(kernels.shape), Tensor({f})};
  for (std::size_t fi = 0; fi < f; ++fi) {
    double bias_acc = 0.0;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        bias_acc += grad_out.at(fi, y, x);
      }
    }
    g.bias[fi] = bias_acc;
    for (std::size_t ci = 0; ci < c; ++ci) {
      for (std::size_t ki = 0; ki < kh; ++ki) {
        for (std::size_t kj = 0; kj < kw; ++kj) {
          double acc = 0.0;
          for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
              acc += input.at(ci, y + ki, x + kj) * grad_out.at(fi, y, x);
            }
          }
          g.kernels.at(fi, ci, ki, kj) = acc;
        }
      }
    }
  }
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t iy = 0; iy < input.shape[1]; ++iy) {
      for (std::size_t ix = 0; ix < input.shape[2]; ++ix) {
        double acc = 0.0;
        for (std::size_t fi = 0; fi < f; ++fi) {
          for (std::size_t ki = 0; ki < kh; ++ki) {
            for (std::size_t kj = 0; kj < kw; ++kj) {
              if (iy >= ki && ix >= kj) {
                const std::size_t y = iy - ki, x = ix - kj;
                if (y < oh && x < ow) {
                  acc += kernels.at(fi, ci, ki, kj) * grad_out.at(fi, y, x);
                }
              }
            }
          }
        }
        g.input.at(ci, iy, ix) = acc;
      }
    }
  }
  return g;
}

Tensor softmax_cross_entropy_grad(const Tensor& logits, std::size_t label) {
  Tensor g = softmax(logits);
  require(label < g.size(), "softmax_cross_entropy_grad label out of range");
  g[label] -= 1.0;
  return g;
}

}  // namespace ami::ops
