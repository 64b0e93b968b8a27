#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gm/tensor.hpp"

namespace gm {

enum class Padding { Same, Valid };

// Reverse-mode differentiation over a recorded tape. Ops execute eagerly and
// append a node holding their backward closure; backward() replays the nodes
// in reverse execution order exactly once. Graph owns every intermediate
// value and its gradient buffer.
//
// Multiply-accumulate work in matmul/conv/dense is metered into flops()
// (one MAC = 2 ops, zero-padding taps counted like an im2col would);
// elementwise ops are not metered.
template <typename T>
class Graph {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Var input(Tensor<T> v) {
    check(v, "input");
    values_.push_back(std::move(v));
    return Var{int(values_.size()) - 1};
  }

  const Tensor<T>& value(Var v) const { return values_[size_t(v.id)]; }
  const Tensor<T>& grad(Var v) const { return grads_[size_t(v.id)]; }
  uint64_t flops() const { return flops_; }
  size_t node_count() const { return nodes_.size(); }

  // ---- elementwise ----

  Var relu(Var x) {
    const Tensor<T>& xv = value(x);
    Tensor<T> out = xv;
    for (T& v : out.data) v = v > T(0) ? v : T(0);
    return unary(x, std::move(out), "relu", [](T xi, T /*yi*/, T dy) {
      return xi > T(0) ? dy : T(0);
    });
  }

  Var sigmoid(Var x) {
    Tensor<T> out = value(x);
    for (T& v : out.data) v = T(1) / (T(1) + std::exp(-v));
    return unary(x, std::move(out), "sigmoid", [](T /*xi*/, T yi, T dy) {
      return yi * (T(1) - yi) * dy;
    });
  }

  Var tanh_(Var x) {
    Tensor<T> out = value(x);
    for (T& v : out.data) v = std::tanh(v);
    return unary(x, std::move(out), "tanh", [](T /*xi*/, T yi, T dy) {
      return (T(1) - yi * yi) * dy;
    });
  }

  // alpha*x + beta, elementwise.
  Var affine(Var x, T alpha, T beta) {
    Tensor<T> out = value(x);
    for (T& v : out.data) v = alpha * v + beta;
    return unary(x, std::move(out), "affine", [alpha](T, T, T dy) { return alpha * dy; });
  }

  Var add(Var a, Var b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    if (!av.same_shape(bv))
      raise(ErrorKind::ShapeMismatch,
            "add: " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
    Tensor<T> out = av;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
    Var y = push(std::move(out), "add");
    record([this, a, b, y]() {
      const Tensor<T>& dy = grads_[size_t(y.id)];
      Tensor<T>& da = grads_[size_t(a.id)];
      Tensor<T>& db = grads_[size_t(b.id)];
      for (size_t i = 0; i < dy.data.size(); ++i) {
        da.data[i] += dy.data[i];
        db.data[i] += dy.data[i];
      }
    });
    return y;
  }

  // Hadamard product, same shapes.
  Var mul(Var a, Var b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    if (!av.same_shape(bv))
      raise(ErrorKind::ShapeMismatch,
            "mul: " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
    Tensor<T> out = av;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
    Var y = push(std::move(out), "mul");
    record([this, a, b, y]() {
      const Tensor<T>& dy = grads_[size_t(y.id)];
      const Tensor<T>& av2 = values_[size_t(a.id)];
      const Tensor<T>& bv2 = values_[size_t(b.id)];
      Tensor<T>& da = grads_[size_t(a.id)];
      Tensor<T>& db = grads_[size_t(b.id)];
      for (size_t i = 0; i < dy.data.size(); ++i) {
        da.data[i] += dy.data[i] * bv2.data[i];
        db.data[i] += dy.data[i] * av2.data[i];
      }
    });
    return y;
  }

  // Softmax over the last dimension, max-subtracted for stability. Rows sum
  // to 1 and every entry lies in [0,1].
  Var softmax_lastdim(Var x) {
    const Tensor<T>& xv = value(x);
    if (xv.rank() < 1 || xv.shape.back() < 1)
      raise(ErrorKind::InvalidArgument, "softmax: last extent must be >= 1");
    int64_t cols = xv.shape.back();
    int64_t rows = xv.numel() / cols;
    Tensor<T> out = xv;
    for (int64_t r = 0; r < rows; ++r) {
      T* p = out.data.data() + r * cols;
      T m = p[0];
      for (int64_t c = 1; c < cols; ++c) m = std::max(m, p[c]);
      T sum = T(0);
      for (int64_t c = 0; c < cols; ++c) {
        p[c] = std::exp(p[c] - m);
        sum += p[c];
      }
      for (int64_t c = 0; c < cols; ++c) p[c] /= sum;
    }
    Var y = push(std::move(out), "softmax");
    record([this, x, y, rows, cols]() {
      const Tensor<T>& yv = values_[size_t(y.id)];
      const Tensor<T>& dy = grads_[size_t(y.id)];
      Tensor<T>& dx = grads_[size_t(x.id)];
      for (int64_t r = 0; r < rows; ++r) {
        const T* yp = yv.data.data() + r * cols;
        const T* dp = dy.data.data() + r * cols;
        T dot = T(0);
        for (int64_t c = 0; c < cols; ++c) dot += dp[c] * yp[c];
        T* xp = dx.data.data() + r * cols;
        for (int64_t c = 0; c < cols; ++c) xp[c] += yp[c] * (dp[c] - dot);
      }
    });
    return y;
  }

  // ---- linear algebra ----

  // Batched matrix product. Accepts rank-2 or rank-3 operands; a rank-3
  // batch extent of 1 broadcasts against the other operand's.
  Var matmul(Var a, Var b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    if (av.rank() < 2 || bv.rank() < 2 || av.rank() > 3 || bv.rank() > 3)
      raise(ErrorKind::ShapeMismatch,
            "matmul: ranks must be 2 or 3, got " + shape_str(av.shape) + " and " +
                shape_str(bv.shape));
    int64_t ba = av.rank() == 3 ? av.dim(0) : 1;
    int64_t bb = bv.rank() == 3 ? bv.dim(0) : 1;
    int64_t n = av.dim(av.rank() - 2), ka = av.dim(av.rank() - 1);
    int64_t kb = bv.dim(bv.rank() - 2), m = bv.dim(bv.rank() - 1);
    if (ka != kb || (ba != bb && ba != 1 && bb != 1))
      raise(ErrorKind::ShapeMismatch,
            "matmul: incompatible shapes " + shape_str(av.shape) + " and " + shape_str(bv.shape));
    int64_t batch = std::max(ba, bb);
    Shape out_shape = (av.rank() == 2 && bv.rank() == 2) ? Shape{n, m} : Shape{batch, n, m};
    Tensor<T> out(out_shape);
    for (int64_t bi = 0; bi < batch; ++bi) {
      const T* ap = av.data.data() + (ba == 1 ? 0 : bi * n * ka);
      const T* bp = bv.data.data() + (bb == 1 ? 0 : bi * ka * m);
      T* op = out.data.data() + bi * n * m;
      for (int64_t i = 0; i < n; ++i)
        for (int64_t k = 0; k < ka; ++k) {
          T aik = ap[i * ka + k];
          const T* brow = bp + k * m;
          T* orow = op + i * m;
          for (int64_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
        }
    }
    flops_ += uint64_t(2) * uint64_t(batch) * uint64_t(n) * uint64_t(ka) * uint64_t(m);
    Var y = push(std::move(out), "matmul");
    record([this, a, b, y, ba, bb, batch, n, ka, m]() {
      const Tensor<T>& dy = grads_[size_t(y.id)];
      const Tensor<T>& av2 = values_[size_t(a.id)];
      const Tensor<T>& bv2 = values_[size_t(b.id)];
      Tensor<T>& da = grads_[size_t(a.id)];
      Tensor<T>& db = grads_[size_t(b.id)];
      for (int64_t bi = 0; bi < batch; ++bi) {
        const T* ap = av2.data.data() + (ba == 1 ? 0 : bi * n * ka);
        const T* bp = bv2.data.data() + (bb == 1 ? 0 : bi * ka * m);
        T* dap = da.data.data() + (ba == 1 ? 0 : bi * n * ka);
        T* dbp = db.data.data() + (bb == 1 ? 0 : bi * ka * m);
        const T* dp = dy.data.data() + bi * n * m;
        // dA += dY * B^T ; dB += A^T * dY
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < m; ++j) {
            T d = dp[i * m + j];
            const T* brow = bp + j;
            for (int64_t k = 0; k < ka; ++k) dap[i * ka + k] += d * brow[k * m];
          }
        for (int64_t k = 0; k < ka; ++k)
          for (int64_t i = 0; i < n; ++i) {
            T aik = ap[i * ka + k];
            const T* drow = dp + i * m;
            T* dbrow = dbp + k * m;
            for (int64_t j = 0; j < m; ++j) dbrow[j] += aik * drow[j];
          }
      }
    });
    return y;
  }

  // a @ b^T over matching batch: (B,n,k) x (B,m,k) -> (B,n,m).
  Var matmul_nt(Var a, Var b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2))
      raise(ErrorKind::ShapeMismatch,
            "matmul_nt: incompatible shapes " + shape_str(av.shape) + " and " +
                shape_str(bv.shape));
    int64_t batch = av.dim(0), n = av.dim(1), k = av.dim(2), m = bv.dim(1);
    Tensor<T> out({batch, n, m});
    for (int64_t bi = 0; bi < batch; ++bi)
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) {
          const T* ap = &av.data[size_t((bi * n + i) * k)];
          const T* bp = &bv.data[size_t((bi * m + j) * k)];
          T acc = T(0);
          for (int64_t kk = 0; kk < k; ++kk) acc += ap[kk] * bp[kk];
          out(bi, i, j) = acc;
        }
    flops_ += uint64_t(2) * uint64_t(batch) * uint64_t(n) * uint64_t(k) * uint64_t(m);
    Var y = push(std::move(out), "matmul_nt");
    record([this, a, b, y, batch, n, k, m]() {
      const Tensor<T>& dy = grads_[size_t(y.id)];
      const Tensor<T>& av2 = values_[size_t(a.id)];
      const Tensor<T>& bv2 = values_[size_t(b.id)];
      Tensor<T>& da = grads_[size_t(a.id)];
      Tensor<T>& db = grads_[size_t(b.id)];
      for (int64_t bi = 0; bi < batch; ++bi)
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < m; ++j) {
            T d = dy(bi, i, j);
            T* dap = &da.data[size_t((bi * n + i) * k)];
            T* dbp = &db.data[size_t((bi * m + j) * k)];
            const T* ap = &av2.data[size_t((bi * n + i) * k)];
            const T* bp = &bv2.data[size_t((bi * m + j) * k)];
            for (int64_t kk = 0; kk < k; ++kk) {
              dap[kk] += d * bp[kk];
              dbp[kk] += d * ap[kk];
            }
          }
    });
    return y;
  }

  // Affine map over the last dimension: x (... x f_in) @ W (f_in x f_out)
  // + b (f_out), broadcast over all leading dimensions. Pass an invalid Var
  // for a bias-free map.
  Var dense(Var x, Var w, Var b) {
    const Tensor<T>& xv = value(x);
    const Tensor<T>& wv = value(w);
    if (xv.rank() < 1 || wv.rank() != 2 || xv.shape.back() != wv.dim(0))
      raise(ErrorKind::ShapeMismatch,
            "dense: input " + shape_str(xv.shape) + " vs weight " + shape_str(wv.shape));
    int64_t f_in = wv.dim(0), f_out = wv.dim(1);
    int64_t rows = xv.numel() / f_in;
    bool with_bias = b.valid();
    if (with_bias) require_shape(value(b), {f_out}, "dense bias");
    Shape out_shape = xv.shape;
    out_shape.back() = f_out;
    Tensor<T> out(out_shape);
    const T* bias = with_bias ? value(b).data.data() : nullptr;
    for (int64_t r = 0; r < rows; ++r) {
      const T* xp = xv.data.data() + r * f_in;
      T* op = out.data.data() + r * f_out;
      if (bias)
        for (int64_t j = 0; j < f_out; ++j) op[j] = bias[j];
      for (int64_t k = 0; k < f_in; ++k) {
        T xk = xp[k];
        const T* wrow = wv.data.data() + k * f_out;
        for (int64_t j = 0; j < f_out; ++j) op[j] += xk * wrow[j];
      }
    }
    flops_ += uint64_t(2) * uint64_t(rows) * uint64_t(f_in) * uint64_t(f_out);
    Var y = push(std::move(out), "dense");
    record([this, x, w, b, y, rows, f_in, f_out, with_bias]() {
      const Tensor<T>& dy = grads_[size_t(y.id)];
      const Tensor<T>& xv2 = values_[size_t(x.id)];
      const Tensor<T>& wv2 = values_[size_t(w.id)];
      Tensor<T>& dx = grads_[size_t(x.id)];
      Tensor<T>& dw = grads_[size_t(w.id)];
      for (int64_t r = 0; r < rows; ++r) {
        const T* dp = dy.data.data() + r * f_out;
        const T* xp = xv2.data.data() + r * f_in;
        T* dxp = dx.data.data() + r * f_in;
        for (int64_t k = 0; k < f_in; ++k) {
          const T* wrow = wv2.data.data() + k * f_out;
          T* dwrow = dw.data.data() + k * f_out;
          T acc = T(0);
          T xk = xp[k];
          for (int64_t j = 0; j < f_out; ++j) {
            acc += dp[j] * wrow[j];
            dwrow[j] += xk * dp[j];
          }
          dxp[k] += acc;
        }
      }
      if (with_bias) {
        Tensor<T>& dbias = grads_[size_t(b.id)];
        for (int64_t r = 0; r < rows; ++r) {
          const T* dp = dy.data.data() + r * f_out;
          for (int64_t j = 0; j < f_out; ++j) dbias.data[size_t(j)] += dp[j];
        }
      }
    });
    return y;
  }

  // Cross-correlation, stride 1, NHWC input and (k,k,c_in,c_out) kernel.
  Var conv2d(Var x, Var kernel, Var bias, Padding padding) {
    const Tensor<T>& xv = value(x);
    const Tensor<T>& kv = value(kernel);
    if (xv.rank() != 4 || kv.rank() != 4)
      raise(ErrorKind::ShapeMismatch, "conv2d: input must be NHWC and kernel KKIO, got " +
                                          shape_str(xv.shape) + " and " + shape_str(kv.shape));
    int64_t n = xv.dim(0), h = xv.dim(1), w = xv.dim(2), ci = xv.dim(3);
    int64_t k = kv.dim(0), co = kv.dim(3);
    if (kv.dim(1) != k || kv.dim(2) != ci)
      raise(ErrorKind::ShapeMismatch, "conv2d: kernel " + shape_str(kv.shape) +
                                          " does not match input channels " + shape_str(xv.shape));
    if (k != 1 && k != 3)
      raise(ErrorKind::InvalidArgument, "conv2d: kernel size must be 1 or 3, got " +
                                            std::to_string(k));
    require_shape(value(bias), {co}, "conv2d bias");
    int64_t pad = padding == Padding::Same ? (k - 1) / 2 : 0;
    int64_t oh = padding == Padding::Same ? h : h - k + 1;
    int64_t ow = padding == Padding::Same ? w : w - k + 1;
    if (oh < 1 || ow < 1)
      raise(ErrorKind::ShapeMismatch, "conv2d: kernel " + std::to_string(k) +
                                          " larger than input " + shape_str(xv.shape));
    Tensor<T> out({n, oh, ow, co});
    const T* bp = value(bias).data.data();
    for (int64_t ni = 0; ni < n; ++ni)
      for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
          T* op = &out(ni, oy, ox, 0);
          for (int64_t c = 0; c < co; ++c) op[c] = bp[c];
          for (int64_t ky = 0; ky < k; ++ky) {
            int64_t iy = oy + ky - pad;
            if (iy < 0 || iy >= h) continue;
            for (int64_t kx = 0; kx < k; ++kx) {
              int64_t ix = ox + kx - pad;
              if (ix < 0 || ix >= w) continue;
              const T* xp = &xv(ni, iy, ix, 0);
              const T* kp = &kv.data[size_t(((ky * k + kx) * ci) * co)];
              for (int64_t c = 0; c < ci; ++c) {
                T xc = xp[c];
                const T* krow = kp + c * co;
                for (int64_t f = 0; f < co; ++f) op[f] += xc * krow[f];
              }
            }
          }
        }
    flops_ += uint64_t(2) * uint64_t(n) * uint64_t(oh) * uint64_t(ow) * uint64_t(k) * uint64_t(k) *
              uint64_t(ci) * uint64_t(co);
    Var y = push(std::move(out), "conv2d");
    record([this, x, kernel, bias, y, n, h, w, ci, k, co, pad, oh, ow]() {
      const Tensor<T>& dy = grads_[size_t(y.id)];
      const Tensor<T>& xv2 = values_[size_t(x.id)];
      const Tensor<T>& kv2 = values_[size_t(kernel.id)];
      Tensor<T>& dx = grads_[size_t(x.id)];
      Tensor<T>& dk = grads_[size_t(kernel.id)];
      Tensor<T>& db = grads_[size_t(bias.id)];
      for (int64_t ni = 0; ni < n; ++ni)
        for (int64_t oy = 0; oy < oh; ++oy)
          for (int64_t ox = 0; ox < ow; ++ox) {
            const T* dp = &dy(ni, oy, ox, 0);
            for (int64_t f = 0; f < co; ++f) db.data[size_t(f)] += dp[f];
            for (int64_t ky = 0; ky < k; ++ky) {
              int64_t iy = oy + ky - pad;
              if (iy < 0 || iy >= h) continue;
              for (int64_t kx = 0; kx < k; ++kx) {
                int64_t ix = ox + kx - pad;
                if (ix < 0 || ix >= w) continue;
                const T* xp = &xv2(ni, iy, ix, 0);
                T* dxp = &dx(ni, iy, ix, 0);
                for (int64_t c = 0; c < ci; ++c) {
                  const T* krow = &kv2.data[size_t(((ky * k + kx) * ci + c) * co)];
                  T* dkrow = &dk.data[size_t(((ky * k + kx) * ci + c) * co)];
                  T xc = xp[c];
                  T acc = T(0);
                  for (int64_t f = 0; f < co; ++f) {
                    acc += dp[f] * krow[f];
                    dkrow[f] += xc * dp[f];
                  }
                  dxp[c] += acc;
                }
              }
            }
          }
    });
    return y;
  }

  // ---- structure ----

  Var reshape(Var x, Shape s) {
    const Tensor<T>& xv = value(x);
    if (shape_numel(s) != xv.numel())
      raise(ErrorKind::ShapeMismatch,
            "reshape: " + shape_str(xv.shape) + " cannot view as " + shape_str(s));
    Tensor<T> out = xv;
    out.shape = std::move(s);
    Var y = push(std::move(out), "reshape");
    record([this, x, y]() {
      const Tensor<T>& dy = grads_[size_t(y.id)];
      Tensor<T>& dx = grads_[size_t(x.id)];
      for (size_t i = 0; i < dy.data.size(); ++i) dx.data[i] += dy.data[i];
    });
    return y;
  }

  // Concatenate two (batch, tokens, feat) tensors along the token axis.
  Var concat_tokens(Var a, Var b) {
    const Tensor<T>& av = value(a);
    const Tensor<T>& bv = value(b);
    if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2))
      raise(ErrorKind::ShapeMismatch,
            "concat_tokens: " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
    int64_t batch = av.dim(0), na = av.dim(1), nb = bv.dim(1), f = av.dim(2);
    Tensor<T> out({batch, na + nb, f});
    for (int64_t bi = 0; bi < batch; ++bi) {
      std::copy_n(&av(bi, 0, 0), size_t(na * f), &out(bi, 0, 0));
      std::copy_n(&bv(bi, 0, 0), size_t(nb * f), &out(bi, na, 0));
    }
    Var y = push(std::move(out), "concat_tokens");
    record([this, a, b, y, batch, na, nb, f]() {
      const Tensor<T>& dy = grads_[size_t(y.id)];
      Tensor<T>& da = grads_[size_t(a.id)];
      Tensor<T>& db = grads_[size_t(b.id)];
      for (int64_t bi = 0; bi < batch; ++bi) {
        for (int64_t i = 0; i < na * f; ++i) da.data[size_t(bi * na * f + i)] += dy(bi, i / f, i % f);
        for (int64_t i = 0; i < nb * f; ++i)
          db.data[size_t(bi * nb * f + i)] += dy(bi, na + i / f, i % f);
      }
    });
    return y;
  }

  // Gather token rows: x (batch, tokens, feat) at per-batch indices ->
  // (batch, n_idx, feat). Backward scatter-adds into the gathered rows only.
  Var gather_tokens(Var x, const std::vector<std::vector<int>>& indices) {
    const Tensor<T>& xv = value(x);
    if (xv.rank() != 3 || int64_t(indices.size()) != xv.dim(0))
      raise(ErrorKind::ShapeMismatch, "gather_tokens: need per-batch index lists for " +
                                          shape_str(xv.shape));
    int64_t batch = xv.dim(0), tokens = xv.dim(1), f = xv.dim(2);
    int64_t n_idx = int64_t(indices[0].size());
    Tensor<T> out({batch, n_idx, f});
    for (int64_t bi = 0; bi < batch; ++bi) {
      if (int64_t(indices[size_t(bi)].size()) != n_idx)
        raise(ErrorKind::InvalidArgument, "gather_tokens: ragged index lists");
      for (int64_t i = 0; i < n_idx; ++i) {
        int idx = indices[size_t(bi)][size_t(i)];
        if (idx < 0 || idx >= tokens)
          raise(ErrorKind::InvalidArgument,
                "gather_tokens: index " + std::to_string(idx) + " out of range");
        std::copy_n(&xv(bi, idx, 0), size_t(f), &out(bi, i, 0));
      }
    }
    Var y = push(std::move(out), "gather_tokens");
    auto idx_copy = indices;
    record([this, x, y, idx_copy, batch, n_idx, f]() {
      const Tensor<T>& dy = grads_[size_t(y.id)];
      Tensor<T>& dx = grads_[size_t(x.id)];
      for (int64_t bi = 0; bi < batch; ++bi)
        for (int64_t i = 0; i < n_idx; ++i) {
          int idx = idx_copy[size_t(bi)][size_t(i)];
          for (int64_t c = 0; c < f; ++c) dx(bi, idx, c) += dy(bi, i, c);
        }
    });
    return y;
  }

  // x (batch, tokens, feat) -> row t as (batch, feat).
  Var token_at(Var x, int64_t t) {
    const Tensor<T>& xv = value(x);
    if (xv.rank() != 3 || t < 0 || t >= xv.dim(1))
      raise(ErrorKind::InvalidArgument, "token_at: index " + std::to_string(t) +
                                            " invalid for " + shape_str(xv.shape));
    int64_t batch = xv.dim(0), f = xv.dim(2);
    Tensor<T> out({batch, f});
    for (int64_t bi = 0; bi < batch; ++bi) std::copy_n(&xv(bi, t, 0), size_t(f), &out(bi, 0));
    Var y = push(std::move(out), "token_at");
    record([this, x, y, t, batch, f]() {
      const Tensor<T>& dy = grads_[size_t(y.id)];
      Tensor<T>& dx = grads_[size_t(x.id)];
      for (int64_t bi = 0; bi < batch; ++bi)
        for (int64_t c = 0; c < f; ++c) dx(bi, t, c) += dy(bi, c);
    });
    return y;
  }

  // NHWC -> NC mean over the two spatial axes.
  Var mean_hw(Var x) {
    const Tensor<T>& xv = value(x);
    if (xv.rank() != 4) raise(ErrorKind::ShapeMismatch, "mean_hw: need NHWC, got " + shape_str(xv.shape));
    int64_t n = xv.dim(0), h = xv.dim(1), w = xv.dim(2), c = xv.dim(3);
    Tensor<T> out({n, c});
    T inv = T(1) / T(h * w);
    for (int64_t ni = 0; ni < n; ++ni)
      for (int64_t y2 = 0; y2 < h; ++y2)
        for (int64_t x2 = 0; x2 < w; ++x2)
          for (int64_t ci = 0; ci < c; ++ci) out(ni, ci) += xv(ni, y2, x2, ci) * inv;
    Var y = push(std::move(out), "mean_hw");
    record([this, x, y, n, h, w, c, inv]() {
      const Tensor<T>& dy = grads_[size_t(y.id)];
      Tensor<T>& dx = grads_[size_t(x.id)];
      for (int64_t ni = 0; ni < n; ++ni)
        for (int64_t y2 = 0; y2 < h; ++y2)
          for (int64_t x2 = 0; x2 < w; ++x2)
            for (int64_t ci = 0; ci < c; ++ci) dx(ni, y2, x2, ci) += dy(ni, ci) * inv;
    });
    return y;
  }

  // ---- reductions / losses ----

  Var sum_all(Var x) {
    const Tensor<T>& xv = value(x);
    T acc = T(0);
    for (T v : xv.data) acc += v;
    Var y = push(Tensor<T>::scalar(acc), "sum_all");
    record([this, x, y]() {
      T d = grads_[size_t(y.id)].data[0];
      Tensor<T>& dx = grads_[size_t(x.id)];
      for (T& v : dx.data) v += d;
    });
    return y;
  }

  Var sum_squares(Var x) {
    const Tensor<T>& xv = value(x);
    T acc = T(0);
    for (T v : xv.data) acc += v * v;
    Var y = push(Tensor<T>::scalar(acc), "sum_squares");
    record([this, x, y]() {
      T d = grads_[size_t(y.id)].data[0];
      const Tensor<T>& xv2 = values_[size_t(x.id)];
      Tensor<T>& dx = grads_[size_t(x.id)];
      for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += T(2) * xv2.data[i] * d;
    });
    return y;
  }

  // Mean softmax cross-entropy over the batch, computed via log-sum-exp with
  // max subtraction. logits: (batch, classes); labels in [0, classes).
  Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
    const Tensor<T>& lv = value(logits);
    if (lv.rank() != 2 || int64_t(labels.size()) != lv.dim(0))
      raise(ErrorKind::ShapeMismatch, "cross_entropy: logits " + shape_str(lv.shape) + " vs " +
                                          std::to_string(labels.size()) + " labels");
    int64_t batch = lv.dim(0), classes = lv.dim(1);
    for (int lab : labels)
      if (lab < 0 || lab >= int(classes))
        raise(ErrorKind::InvalidArgument, "cross_entropy: label " + std::to_string(lab) +
                                              " outside [0," + std::to_string(classes) + ")");
    T total = T(0);
    for (int64_t i = 0; i < batch; ++i) {
      const T* row = lv.data.data() + i * classes;
      T m = row[0];
      for (int64_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
      T sum = T(0);
      for (int64_t c = 0; c < classes; ++c) sum += std::exp(row[c] - m);
      total += m + std::log(sum) - row[labels[size_t(i)]];
    }
    Var y = push(Tensor<T>::scalar(total / T(batch)), "cross_entropy");
    auto labels_copy = labels;
    record([this, logits, y, labels_copy, batch, classes]() {
      T d = grads_[size_t(y.id)].data[0] / T(batch);
      const Tensor<T>& lv2 = values_[size_t(logits.id)];
      Tensor<T>& dl = grads_[size_t(logits.id)];
      for (int64_t i = 0; i < batch; ++i) {
        const T* row = lv2.data.data() + i * classes;
        T m = row[0];
        for (int64_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
        T sum = T(0);
        for (int64_t c = 0; c < classes; ++c) sum += std::exp(row[c] - m);
        T* drow = dl.data.data() + i * classes;
        for (int64_t c = 0; c < classes; ++c) {
          T p = std::exp(row[c] - m) / sum;
          drow[c] += (p - (c == labels_copy[size_t(i)] ? T(1) : T(0))) * d;
        }
      }
    });
    return y;
  }

  // Reverse sweep from a scalar loss. Gradient buffers are reset, the loss
  // seeds 1, and every recorded node runs once in reverse execution order.
  void backward(Var loss) {
    if (value(loss).numel() != 1)
      raise(ErrorKind::InvalidArgument, "backward: loss must be scalar, got " +
                                            shape_str(value(loss).shape));
    grads_.clear();
    grads_.reserve(values_.size());
    for (const Tensor<T>& v : values_) grads_.push_back(Tensor<T>::zeros(v.shape));
    grads_[size_t(loss.id)].data[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  template <typename F>
  Var unary(Var x, Tensor<T> out, const char* name, F&& df) {
    Var y = push(std::move(out), name);
    record([this, x, y, df]() {
      const Tensor<T>& xv = values_[size_t(x.id)];
      const Tensor<T>& yv = values_[size_t(y.id)];
      const Tensor<T>& dy = grads_[size_t(y.id)];
      Tensor<T>& dx = grads_[size_t(x.id)];
      for (size_t i = 0; i < dx.data.size(); ++i)
        dx.data[i] += df(xv.data[i], yv.data[i], dy.data[i]);
    });
    return y;
  }

  Var push(Tensor<T> out, const char* name) {
    check(out, name);
    values_.push_back(std::move(out));
    return Var{int(values_.size()) - 1};
  }

  void check(const Tensor<T>& t, const char* what) {
    if (!t.all_finite()) raise(ErrorKind::NonFinite, std::string("non-finite output of ") + what);
  }

  void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

  std::vector<Tensor<T>> values_;
  std::vector<Tensor<T>> grads_;
  std::vector<std::function<void()>> nodes_;
  uint64_t flops_ = 0;
};

}  // namespace gm
