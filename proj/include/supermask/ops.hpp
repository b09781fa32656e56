#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "supermask/autodiff.hpp"

namespace supermask {

namespace detail {

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b)
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                         shape_string(b));
}

template <typename Scalar>
void accumulate(TapeNode<Scalar>& input, const auto& expr) {
  if (input.requires_grad) input.grad_buffer().values() += expr;
}

}  // namespace detail

namespace kernels {

/// out[N x out] = x[N x in] * w[out x in]^T. Shared by the tape and the
/// tape-free reference forward so both sum in the same order.
template <typename Scalar>
DenseArray<Scalar> linear_forward(const DenseArray<Scalar>& x, const DenseArray<Scalar>& w) {
  DenseArray<Scalar> out({x.dim(0), w.dim(0)});
  out.matrix().noalias() = x.matrix() * w.matrix().transpose();
  return out;
}

struct ConvGeometry {
  Index batch, channels, height, width;
  Index filters, kernel_h, kernel_w;
  Index stride, padding;
  Index out_h, out_w;
};

inline ConvGeometry conv_geometry(const Shape& x, const Shape& w, Index stride, Index padding) {
  if (x.size() != 4 || w.size() != 4)
    throw DimensionError("conv2d expects NxCxHxW input and FxCxkhxkw kernel, got " +
                         shape_string(x) + " and " + shape_string(w));
  if (stride <= 0 || padding < 0) throw DimensionError("conv2d: stride must be positive, padding non-negative");
  if (x[1] != w[1])
    throw DimensionError("conv2d: channel mismatch " + shape_string(x) + " vs " + shape_string(w));
  const Index ph = x[2] + 2 * padding, pw = x[3] + 2 * padding;
  if (w[2] > ph || w[3] > pw)
    throw DimensionError("conv2d: kernel " + shape_string(w) + " larger than padded input " +
                         shape_string(x));
  if ((ph - w[2]) % stride != 0 || (pw - w[3]) % stride != 0)
    throw DimensionError("conv2d: stride " + std::to_string(stride) + " does not tile input " +
                         shape_string(x) + " with kernel " + shape_string(w));
  return {x[0], x[1], x[2], x[3], w[0], w[2], w[3], stride, padding,
          (ph - w[2]) / stride + 1, (pw - w[3]) / stride + 1};
}

template <typename Scalar>
void im2col(const Scalar* image, const ConvGeometry& g, RowMatrix<Scalar>& cols) {
  cols.resize(g.channels * g.kernel_h * g.kernel_w, g.out_h * g.out_w);
  for (Index c = 0; c < g.channels; ++c)
    for (Index ki = 0; ki < g.kernel_h; ++ki)
      for (Index kj = 0; kj < g.kernel_w; ++kj) {
        const Index row = (c * g.kernel_h + ki) * g.kernel_w + kj;
        Scalar* dst = cols.row(row).data();
        for (Index oi = 0; oi < g.out_h; ++oi) {
          const Index ii = oi * g.stride + ki - g.padding;
          for (Index oj = 0; oj < g.out_w; ++oj) {
            const Index jj = oj * g.stride + kj - g.padding;
            const bool inside = ii >= 0 && ii < g.height && jj >= 0 && jj < g.width;
            dst[oi * g.out_w + oj] = inside ? image[(c * g.height + ii) * g.width + jj] : Scalar(0);
          }
        }
      }
}

template <typename Scalar>
void col2im_add(const RowMatrix<Scalar>& cols, const ConvGeometry& g, Scalar* image) {
  for (Index c = 0; c < g.channels; ++c)
    for (Index ki = 0; ki < g.kernel_h; ++ki)
      for (Index kj = 0; kj < g.kernel_w; ++kj) {
        const Index row = (c * g.kernel_h + ki) * g.kernel_w + kj;
        const Scalar* src = cols.row(row).data();
        for (Index oi = 0; oi < g.out_h; ++oi) {
          const Index ii = oi * g.stride + ki - g.padding;
          if (ii < 0 || ii >= g.height) continue;
          for (Index oj = 0; oj < g.out_w; ++oj) {
            const Index jj = oj * g.stride + kj - g.padding;
            if (jj >= 0 && jj < g.width) image[(c * g.height + ii) * g.width + jj] += src[oi * g.out_w + oj];
          }
        }
      }
}

template <typename Scalar>
DenseArray<Scalar> conv2d_forward(const DenseArray<Scalar>& x, const DenseArray<Scalar>& w,
                                  const ConvGeometry& g) {
  DenseArray<Scalar> out({g.batch, g.filters, g.out_h, g.out_w});
  const auto kernel = w.matrix(g.filters, g.channels * g.kernel_h * g.kernel_w);
  const Index in_stride = g.channels * g.height * g.width;
  const Index out_stride = g.filters * g.out_h * g.out_w;
  RowMatrix<Scalar> cols;
  for (Index n = 0; n < g.batch; ++n) {
    im2col(x.data() + n * in_stride, g, cols);
    RowMatrixMap<Scalar>(out.data() + n * out_stride, g.filters, g.out_h * g.out_w).noalias() =
        kernel * cols;
  }
  return out;
}

}  // namespace kernels

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.value().rank() != 2 || b.value().rank() != 2 || a.shape()[1] != b.shape()[0])
    throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                         shape_string(b.shape()));
  DenseArray<Scalar> out({a.shape()[0], b.shape()[1]});
  out.matrix().noalias() = a.value().matrix() * b.value().matrix();
  return Var<Scalar>::record(OpKind::matmul, std::move(out), {a, b}, [](TapeNode<Scalar>& n) {
    auto& A = *n.inputs[0];
    auto& B = *n.inputs[1];
    const auto G = n.grad.matrix();
    if (A.requires_grad) A.grad_buffer().matrix() += G * B.value.matrix().transpose();
    if (B.requires_grad) B.grad_buffer().matrix() += A.value.matrix().transpose() * G;
  });
}

/// Fully connected product x * w^T with w stored as [out x in].
template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, const Var<Scalar>& w) {
  if (x.value().rank() != 2 || w.value().rank() != 2 || x.shape()[1] != w.shape()[1])
    throw DimensionError("linear: input " + shape_string(x.shape()) + " does not match weights " +
                         shape_string(w.shape()));
  return Var<Scalar>::record(OpKind::linear, kernels::linear_forward(x.value(), w.value()), {x, w},
                             [](TapeNode<Scalar>& n) {
                               auto& X = *n.inputs[0];
                               auto& W = *n.inputs[1];
                               const auto G = n.grad.matrix();
                               if (X.requires_grad) X.grad_buffer().matrix() += G * W.value.matrix();
                               if (W.requires_grad)
                                 W.grad_buffer().matrix() += G.transpose() * X.value.matrix();
                             });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "add");
  DenseArray<Scalar> out(a.shape(), a.value().values() + b.value().values());
  return Var<Scalar>::record(OpKind::add, std::move(out), {a, b}, [](TapeNode<Scalar>& n) {
    detail::accumulate(*n.inputs[0], n.grad.values());
    detail::accumulate(*n.inputs[1], n.grad.values());
  });
}

template <typename Scalar>
Var<Scalar> elementwise_mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "elementwise_mul");
  DenseArray<Scalar> out(a.shape(), a.value().values() * b.value().values());
  return Var<Scalar>::record(OpKind::elementwise_mul, std::move(out), {a, b}, [](TapeNode<Scalar>& n) {
    auto& A = *n.inputs[0];
    auto& B = *n.inputs[1];
    detail::accumulate(A, n.grad.values() * B.value.values());
    detail::accumulate(B, n.grad.values() * A.value.values());
  });
}

/// Multiplies x by a one-element trainable factor.
template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& factor, const Var<Scalar>& x) {
  if (factor.size() != 1)
    throw DimensionError("scale: factor must hold one value, got " + shape_string(factor.shape()));
  const Scalar s = factor.value()[0];
  DenseArray<Scalar> out(x.shape(), x.value().values() * s);
  return Var<Scalar>::record(OpKind::scale, std::move(out), {factor, x}, [](TapeNode<Scalar>& n) {
    auto& F = *n.inputs[0];
    auto& X = *n.inputs[1];
    const Scalar s = F.value[0];
    const Scalar* g = n.grad.data();
    const Scalar* xv = X.value.data();
    const Index size = n.grad.size();
    // One pass serves both gradients.
    if (X.requires_grad) {
      Scalar* dx = X.grad_buffer().data();
      Scalar ds = 0;
      for (Index i = 0; i < size; ++i) {
        dx[i] += s * g[i];
        ds += g[i] * xv[i];
      }
      if (F.requires_grad) F.grad_buffer()[0] += ds;
    } else if (F.requires_grad) {
      Scalar ds = 0;
      for (Index i = 0; i < size; ++i) ds += g[i] * xv[i];
      F.grad_buffer()[0] += ds;
    }
  });
}

template <typename Scalar>
Var<Scalar> scale_constant(const Var<Scalar>& x, Scalar c) {
  DenseArray<Scalar> out(x.shape(), x.value().values() * c);
  return Var<Scalar>::record(OpKind::scale_constant, std::move(out), {x}, [c](TapeNode<Scalar>& n) {
    detail::accumulate(*n.inputs[0], n.grad.values() * c);
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  DenseArray<Scalar> out(x.shape(), x.value().values().max(Scalar(0)));
  return Var<Scalar>::record(OpKind::relu, std::move(out), {x}, [](TapeNode<Scalar>& n) {
    auto& X = *n.inputs[0];
    detail::accumulate(X, (X.value.values() > Scalar(0)).select(n.grad.values(), Scalar(0)));
  });
}

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& x, Shape shape) {
  DenseArray<Scalar> out = x.value().reshaped(std::move(shape));
  return Var<Scalar>::record(OpKind::reshape, std::move(out), {x}, [](TapeNode<Scalar>& n) {
    detail::accumulate(*n.inputs[0], n.grad.values());
  });
}

/// Collapses every dimension after the batch one.
template <typename Scalar>
Var<Scalar> flatten(const Var<Scalar>& x) {
  return reshape(x, {x.shape()[0], x.size() / x.shape()[0]});
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  DenseArray<Scalar> out({1}, {x.value().values().sum()});
  return Var<Scalar>::record(OpKind::sum, std::move(out), {x}, [](TapeNode<Scalar>& n) {
    auto& X = *n.inputs[0];
    if (X.requires_grad) X.grad_buffer().values() += n.grad[0];
  });
}

/// Adds b[F] along dimension 1 of x[N x F x ...].
template <typename Scalar>
Var<Scalar> add_channel_bias(const Var<Scalar>& x, const Var<Scalar>& b) {
  if (x.value().rank() < 2 || b.value().rank() != 1 || b.shape()[0] != x.shape()[1])
    throw DimensionError("add_channel_bias: bias " + shape_string(b.shape()) +
                         " does not match input " + shape_string(x.shape()));
  const Index batch = x.shape()[0], channels = x.shape()[1];
  const Index inner = x.size() / (batch * channels);
  DenseArray<Scalar> out = x.value();
  for (Index n = 0; n < batch; ++n)
    for (Index c = 0; c < channels; ++c)
      out.values().segment((n * channels + c) * inner, inner) += b.value()[c];
  return Var<Scalar>::record(OpKind::channel_bias, std::move(out), {x, b},
                             [batch, channels, inner](TapeNode<Scalar>& n) {
                               auto& X = *n.inputs[0];
                               auto& B = *n.inputs[1];
                               detail::accumulate(X, n.grad.values());
                               if (!B.requires_grad) return;
                               auto& db = B.grad_buffer();
                               for (Index i = 0; i < batch; ++i)
                                 for (Index c = 0; c < channels; ++c)
                                   db[c] += n.grad.values().segment((i * channels + c) * inner, inner).sum();
                             });
}

/// Cross-correlation with zero padding, x[N x C x H x W], w[F x C x kh x kw].
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& w, Index stride = 1, Index padding = 0) {
  const kernels::ConvGeometry g = kernels::conv_geometry(x.shape(), w.shape(), stride, padding);
  return Var<Scalar>::record(
      OpKind::conv2d, kernels::conv2d_forward(x.value(), w.value(), g), {x, w},
      [g](TapeNode<Scalar>& n) {
        auto& X = *n.inputs[0];
        auto& W = *n.inputs[1];
        const Index patch = g.channels * g.kernel_h * g.kernel_w;
        const Index in_stride = g.channels * g.height * g.width;
        const Index out_stride = g.filters * g.out_h * g.out_w;
        const auto kernel = W.value.matrix(g.filters, patch);
        RowMatrix<Scalar> cols, dcols;
        for (Index i = 0; i < g.batch; ++i) {
          const ConstRowMatrixMap<Scalar> G(n.grad.data() + i * out_stride, g.filters, g.out_h * g.out_w);
          if (W.requires_grad) {
            kernels::im2col(X.value.data() + i * in_stride, g, cols);
            W.grad_buffer().matrix(g.filters, patch).noalias() += G * cols.transpose();
          }
          if (X.requires_grad) {
            dcols.noalias() = kernel.transpose() * G;
            kernels::col2im_add(dcols, g, X.grad_buffer().data() + i * in_stride);
          }
        }
      });
}

/// Non-overlapping window max pooling; ties route the gradient to the first max.
template <typename Scalar>
Var<Scalar> maxpool2d(const Var<Scalar>& x, Index window = 2) {
  const Shape& s = x.shape();
  if (s.size() != 4 || window <= 0 || s[2] % window != 0 || s[3] % window != 0)
    throw DimensionError("maxpool2d: window " + std::to_string(window) + " does not tile " +
                         shape_string(s));
  const Index planes = s[0] * s[1], h = s[2], w = s[3];
  const Index oh = h / window, ow = w / window;
  DenseArray<Scalar> out({s[0], s[1], oh, ow});
  std::vector<Index> argmax(static_cast<std::size_t>(out.size()));
  const Scalar* in = x.value().data();
  for (Index p = 0; p < planes; ++p)
    for (Index i = 0; i < oh; ++i)
      for (Index j = 0; j < ow; ++j) {
        Index best = (p * h + i * window) * w + j * window;
        for (Index di = 0; di < window; ++di)
          for (Index dj = 0; dj < window; ++dj) {
            const Index idx = (p * h + i * window + di) * w + j * window + dj;
            if (in[idx] > in[best]) best = idx;
          }
        const Index o = (p * oh + i) * ow + j;
        out[o] = in[best];
        argmax[static_cast<std::size_t>(o)] = best;
      }
  return Var<Scalar>::record(OpKind::maxpool2d, std::move(out), {x},
                             [argmax = std::move(argmax)](TapeNode<Scalar>& n) {
                               auto& X = *n.inputs[0];
                               if (!X.requires_grad) return;
                               auto& dx = X.grad_buffer();
                               for (std::size_t o = 0; o < argmax.size(); ++o)
                                 dx[argmax[o]] += n.grad[static_cast<Index>(o)];
                             });
}

/// Mean softmax cross-entropy of logits[N x C] against integer labels.
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(const Var<Scalar>& logits, std::span<const int> labels) {
  if (logits.value().rank() != 2)
    throw DimensionError("softmax_cross_entropy expects NxC logits, got " + shape_string(logits.shape()));
  const Index batch = logits.shape()[0], classes = logits.shape()[1];
  if (static_cast<Index>(labels.size()) != batch)
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(batch));
  for (int y : labels)
    if (y < 0 || y >= classes)
      throw InputError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");

  RowMatrix<Scalar> probs(batch, classes);
  const auto z = logits.value().matrix();
  double loss = 0;
  for (Index i = 0; i < batch; ++i) {
    const Scalar peak = z.row(i).maxCoeff();
    probs.row(i) = (z.row(i).array() - peak).exp().matrix();
    const Scalar total = probs.row(i).sum();
    probs.row(i) /= total;
    loss += static_cast<double>(std::log(total) + peak - z(i, labels[static_cast<std::size_t>(i)]));
  }
  DenseArray<Scalar> out({1}, {static_cast<Scalar>(loss / static_cast<double>(batch))});
  std::vector<int> targets(labels.begin(), labels.end());
  return Var<Scalar>::record(
      OpKind::softmax_cross_entropy, std::move(out), {logits},
      [probs = std::move(probs), targets = std::move(targets)](TapeNode<Scalar>& n) {
        auto& L = *n.inputs[0];
        if (!L.requires_grad) return;
        const Index rows = probs.rows();
        const Scalar g = n.grad[0] / static_cast<Scalar>(rows);
        auto dz = L.grad_buffer().matrix();
        for (Index i = 0; i < rows; ++i) {
          dz.row(i) += g * probs.row(i);
          dz(i, targets[static_cast<std::size_t>(i)]) -= g;
        }
      });
}

}  // namespace supermask
