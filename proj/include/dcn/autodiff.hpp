#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dcn/errors.hpp"
#include "dcn/tensor.hpp"

namespace dcn {

// Named trainable tensor. Lives outside the tape; value persists across
// steps, grad is the accumulation buffer the optimizer consumes.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor<T>(value.shape, T(0));
  }
  void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
class Graph;

// One recorded operation: its output value, the gradient buffer, and a
// closure that pushes the output gradient back to the inputs.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  std::function<void()> backward_fn;  // may be empty for leaves
  bool needs_grad = true;

  void ensure_grad() {
    if (grad.shape != value.shape) grad = Tensor<T>(value.shape, T(0));
  }
};

template <typename T>
using MatMap =
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Reverse-mode tape. Nodes are created in topological order by
// construction; backward() replays the tape once, in reverse.
template <typename T>
class Graph {
 public:
  Node<T>* input(Tensor<T> v, bool needs_grad = false) {
    Node<T>* n = make();
    n->value = std::move(v);
    n->needs_grad = needs_grad;
    return n;
  }

  // Leaf backed by an external parameter; backward adds into param.grad.
  Node<T>* param(Parameter<T>& p) {
    Node<T>* n = make();
    n->value = p.value;
    Parameter<T>* pp = &p;
    n->backward_fn = [n, pp]() {
      for (std::size_t i = 0; i < n->grad.size(); ++i) pp->grad[i] += n->grad[i];
    };
    return n;
  }

  // -- elementwise ---------------------------------------------------------

  Node<T>* relu(Node<T>* x) {
    Node<T>* n = make();
    n->value = Tensor<T>(x->value.shape);
    for (std::size_t i = 0; i < x->value.size(); ++i)
      n->value[i] = x->value[i] > T(0) ? x->value[i] : T(0);
    n->backward_fn = [n, x]() {
      x->ensure_grad();
      for (std::size_t i = 0; i < n->grad.size(); ++i)
        if (x->value[i] > T(0)) x->grad[i] += n->grad[i];
    };
    return n;
  }

  Node<T>* sigmoid(Node<T>* x) {
    Node<T>* n = make();
    n->value = Tensor<T>(x->value.shape);
    for (std::size_t i = 0; i < x->value.size(); ++i)
      n->value[i] = T(1) / (T(1) + std::exp(-x->value[i]));
    n->backward_fn = [n, x]() {
      x->ensure_grad();
      for (std::size_t i = 0; i < n->grad.size(); ++i) {
        T y = n->value[i];
        x->grad[i] += n->grad[i] * y * (T(1) - y);
      }
    };
    return n;
  }

  Node<T>* mul(Node<T>* a, Node<T>* b) {
    require_same_shape(a->value, b->value, "mul");
    Node<T>* n = make();
    n->value = Tensor<T>(a->value.shape);
    for (std::size_t i = 0; i < n->value.size(); ++i) n->value[i] = a->value[i] * b->value[i];
    n->backward_fn = [n, a, b]() {
      a->ensure_grad();
      b->ensure_grad();
      for (std::size_t i = 0; i < n->grad.size(); ++i) {
        a->grad[i] += n->grad[i] * b->value[i];
        b->grad[i] += n->grad[i] * a->value[i];
      }
    };
    return n;
  }

  Node<T>* add(Node<T>* a, Node<T>* b) {
    require_same_shape(a->value, b->value, "add");
    Node<T>* n = make();
    n->value = Tensor<T>(a->value.shape);
    for (std::size_t i = 0; i < n->value.size(); ++i) n->value[i] = a->value[i] + b->value[i];
    n->backward_fn = [n, a, b]() {
      a->ensure_grad();
      b->ensure_grad();
      for (std::size_t i = 0; i < n->grad.size(); ++i) {
        a->grad[i] += n->grad[i];
        b->grad[i] += n->grad[i];
      }
    };
    return n;
  }

  Node<T>* sum(Node<T>* x) {
    Node<T>* n = make();
    T s = T(0);
    for (T v : x->value.data) s += v;
    n->value = Tensor<T>({1}, {s});
    n->backward_fn = [n, x]() {
      x->ensure_grad();
      T g = n->grad[0];
      for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
    };
    return n;
  }

  // out = a + alpha * b, scalars. Realizes the weighted loss sum.
  Node<T>* axpy(Node<T>* a, Node<T>* b, T alpha) {
    if (a->value.size() != 1 || b->value.size() != 1) throw ConfigError("axpy: scalars expected");
    Node<T>* n = make();
    n->value = Tensor<T>({1}, {a->value[0] + alpha * b->value[0]});
    n->backward_fn = [n, a, b, alpha]() {
      a->ensure_grad();
      b->ensure_grad();
      a->grad[0] += n->grad[0];
      b->grad[0] += alpha * n->grad[0];
    };
    return n;
  }

  // -- convolution ---------------------------------------------------------

  // Cross-correlation, input (Cin,H,W), kernel (Cout,Cin,kh,kw), bias (Cout)
  // optional. im2col + GEMM; the column matrix is saved for backward.
  Node<T>* conv2d(Node<T>* x, Node<T>* w, Node<T>* b, std::size_t stride, std::size_t pad) {
    const auto& xs = x->value.shape;
    const auto& ws = w->value.shape;
    if (xs.size() != 3 || ws.size() != 4)
      throw ConfigError("conv2d: expected input (C,H,W) " + x->value.shape_str() +
                        " and kernel (Cout,Cin,kh,kw) " + w->value.shape_str());
    std::size_t cin = xs[0], h = xs[1], wdt = xs[2];
    std::size_t cout = ws[0], kh = ws[2], kw = ws[3];
    if (ws[1] != cin)
      throw ConfigError("conv2d: kernel Cin " + std::to_string(ws[1]) + " != input C " +
                        std::to_string(cin));
    if (kh < 1 || kw < 1) throw ConfigError("conv2d: kernel extent must be >= 1");
    if (h + 2 * pad < kh || wdt + 2 * pad < kw || (h + 2 * pad - kh) % stride != 0 ||
        (wdt + 2 * pad - kw) % stride != 0)
      throw ConfigError("conv2d: geometry H=" + std::to_string(h) + " W=" + std::to_string(wdt) +
                        " kh=" + std::to_string(kh) + " kw=" + std::to_string(kw) +
                        " stride=" + std::to_string(stride) + " pad=" + std::to_string(pad) +
                        " incompatible");
    if (b && b->value.shape != std::vector<std::size_t>{cout})
      throw ConfigError("conv2d: bias shape " + b->value.shape_str());

    std::size_t oh = (h + 2 * pad - kh) / stride + 1;
    std::size_t ow = (wdt + 2 * pad - kw) / stride + 1;
    std::size_t krows = cin * kh * kw;

    auto cols = std::make_shared<Tensor<T>>(std::vector<std::size_t>{krows, oh * ow});
    im2col(x->value, kh, kw, stride, pad, oh, ow, *cols);

    Node<T>* n = make();
    n->value = Tensor<T>({cout, oh, ow});
    {
      ConstMatMap<T> wm(w->value.ptr(), cout, krows);
      ConstMatMap<T> cm(cols->ptr(), krows, oh * ow);
      MatMap<T> om(n->value.ptr(), cout, oh * ow);
      om.noalias() = wm * cm;
      if (b)
        for (std::size_t c = 0; c < cout; ++c) om.row(c).array() += b->value[c];
    }

    n->backward_fn = [n, x, w, b, cols, cin, h, wdt, cout, kh, kw, stride, pad, oh, ow,
                      krows]() {
      x->ensure_grad();
      w->ensure_grad();
      ConstMatMap<T> go(n->grad.ptr(), cout, oh * ow);
      {
        MatMap<T> gw(w->grad.ptr(), cout, krows);
        ConstMatMap<T> cm(cols->ptr(), krows, oh * ow);
        gw.noalias() += go * cm.transpose();
      }
      if (b) {
        b->ensure_grad();
        // Fixed-order scalar sum: Eigen's vectorized reduction associates
        // differently depending on pointer alignment, which breaks
        // bit-reproducibility across allocations.
        for (std::size_t c = 0; c < cout; ++c) {
          T acc = T(0);
          const T* row = n->grad.ptr() + c * oh * ow;
          for (std::size_t i = 0; i < oh * ow; ++i) acc += row[i];
          b->grad[c] += acc;
        }
      }
      Tensor<T> gcols({krows, oh * ow});
      {
        ConstMatMap<T> wm(w->value.ptr(), cout, krows);
        MatMap<T> gc(gcols.ptr(), krows, oh * ow);
        gc.noalias() = wm.transpose() * go;
      }
      col2im_add(gcols, cin, h, wdt, kh, kw, stride, pad, oh, ow, x->grad);
    };
    return n;
  }

  // -- pooling -------------------------------------------------------------

  // Non-overlapping window average pool; window must tile the input.
  Node<T>* avg_pool(Node<T>* x, std::size_t wh, std::size_t ww) {
    const auto& s = x->value.shape;
    if (s.size() != 3) throw ConfigError("avg_pool: expected (C,H,W)");
    std::size_t c = s[0], h = s[1], w = s[2];
    if (wh == 0 || ww == 0 || h % wh != 0 || w % ww != 0)
      throw ConfigError("avg_pool: window " + std::to_string(wh) + "x" + std::to_string(ww) +
                        " does not tile " + std::to_string(h) + "x" + std::to_string(w));
    std::size_t oh = h / wh, ow = w / ww;
    Node<T>* n = make();
    n->value = Tensor<T>({c, oh, ow});
    T inv = T(1) / static_cast<T>(wh * ww);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          T acc = T(0);
          for (std::size_t dy = 0; dy < wh; ++dy)
            for (std::size_t dx = 0; dx < ww; ++dx)
              acc += x->value.at3(ch, i * wh + dy, j * ww + dx);
          n->value.at3(ch, i, j) = acc * inv;
        }
    n->backward_fn = [n, x, c, oh, ow, wh, ww, inv]() {
      x->ensure_grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < oh; ++i)
          for (std::size_t j = 0; j < ow; ++j) {
            T g = n->grad.at3(ch, i, j) * inv;
            for (std::size_t dy = 0; dy < wh; ++dy)
              for (std::size_t dx = 0; dx < ww; ++dx)
                x->grad.at3(ch, i * wh + dy, j * ww + dx) += g;
          }
    };
    return n;
  }

  // Adaptive average pool to (m,n). Cell (i,j) averages rows
  // [i*H/m,(i+1)*H/m) x cols [j*W/n,(j+1)*W/n) (floor bounds); the cells
  // partition the input exactly.
  Node<T>* adaptive_avg_pool(Node<T>* x, std::size_t m, std::size_t nn) {
    const auto& s = x->value.shape;
    if (s.size() != 3) throw ConfigError("adaptive_avg_pool: expected (C,H,W)");
    std::size_t c = s[0], h = s[1], w = s[2];
    if (m == 0 || nn == 0 || m > h || nn > w)
      throw ConfigError("adaptive_avg_pool: target " + std::to_string(m) + "x" +
                        std::to_string(nn) + " exceeds input " + std::to_string(h) + "x" +
                        std::to_string(w));
    Node<T>* n = make();
    n->value = Tensor<T>({c, m, nn});
    auto lo = [](std::size_t i, std::size_t total, std::size_t cells) {
      return i * total / cells;
    };
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < nn; ++j) {
          std::size_t y0 = lo(i, h, m), y1 = lo(i + 1, h, m);
          std::size_t x0 = lo(j, w, nn), x1 = lo(j + 1, w, nn);
          T acc = T(0);
          for (std::size_t y = y0; y < y1; ++y)
            for (std::size_t xx = x0; xx < x1; ++xx) acc += x->value.at3(ch, y, xx);
          n->value.at3(ch, i, j) = acc / static_cast<T>((y1 - y0) * (x1 - x0));
        }
    n->backward_fn = [n, x, c, h, w, m, nn, lo]() {
      x->ensure_grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < nn; ++j) {
            std::size_t y0 = lo(i, h, m), y1 = lo(i + 1, h, m);
            std::size_t x0 = lo(j, w, nn), x1 = lo(j + 1, w, nn);
            T g = n->grad.at3(ch, i, j) / static_cast<T>((y1 - y0) * (x1 - x0));
            for (std::size_t y = y0; y < y1; ++y)
              for (std::size_t xx = x0; xx < x1; ++xx) x->grad.at3(ch, y, xx) += g;
          }
    };
    return n;
  }

  // -- normalization -------------------------------------------------------

  // Per-channel normalization over the spatial extent of this tensor with
  // learned scale/shift. No running statistics; deterministic per sample.
  Node<T>* batchnorm(Node<T>* x, Node<T>* gamma, Node<T>* beta, T eps = T(1e-5)) {
    const auto& s = x->value.shape;
    if (s.size() != 3) throw ConfigError("batchnorm: expected (C,H,W)");
    std::size_t c = s[0], hw = s[1] * s[2];
    if (gamma->value.shape != std::vector<std::size_t>{c} ||
        beta->value.shape != std::vector<std::size_t>{c})
      throw ConfigError("batchnorm: gamma/beta must have shape (C)");
    Node<T>* n = make();
    n->value = Tensor<T>(s);
    auto xhat = std::make_shared<Tensor<T>>(s);
    auto istd = std::make_shared<Tensor<T>>(std::vector<std::size_t>{c});
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* xp = x->value.ptr() + ch * hw;
      T mean = T(0);
      for (std::size_t i = 0; i < hw; ++i) mean += xp[i];
      mean /= static_cast<T>(hw);
      T var = T(0);
      for (std::size_t i = 0; i < hw; ++i) {
        T d = xp[i] - mean;
        var += d * d;
      }
      var /= static_cast<T>(hw);
      T is = T(1) / std::sqrt(var + eps);
      (*istd)[ch] = is;
      T g = gamma->value[ch], bb = beta->value[ch];
      T* hp = xhat->ptr() + ch * hw;
      T* op = n->value.ptr() + ch * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        hp[i] = (xp[i] - mean) * is;
        op[i] = g * hp[i] + bb;
      }
    }
    n->backward_fn = [n, x, gamma, beta, xhat, istd, c, hw]() {
      x->ensure_grad();
      gamma->ensure_grad();
      beta->ensure_grad();
      T m = static_cast<T>(hw);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T* gp = n->grad.ptr() + ch * hw;
        const T* hp = xhat->ptr() + ch * hw;
        T sum_g = T(0), sum_gh = T(0);
        for (std::size_t i = 0; i < hw; ++i) {
          sum_g += gp[i];
          sum_gh += gp[i] * hp[i];
        }
        gamma->grad[ch] += sum_gh;
        beta->grad[ch] += sum_g;
        T scale = gamma->value[ch] * (*istd)[ch];
        T* xg = x->grad.ptr() + ch * hw;
        for (std::size_t i = 0; i < hw; ++i)
          xg[i] += scale * (gp[i] - sum_g / m - hp[i] * sum_gh / m);
      }
    };
    return n;
  }

  // -- backward driver -----------------------------------------------------

  // Populates gradients for everything reachable from `loss`. A second call
  // without a fresh tape is a state error.
  void backward(Node<T>* loss) {
    if (loss->value.size() != 1) throw StateError("backward: loss must be a scalar");
    if (backward_done_) throw StateError("backward: called twice on one tape");
    backward_done_ = true;
    for (auto& n : nodes_) n->ensure_grad();
    loss->grad[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
      if ((*it)->backward_fn) (*it)->backward_fn();
  }

  bool backward_done() const { return backward_done_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  Node<T>* make() {
    nodes_.push_back(std::make_unique<Node<T>>());
    return nodes_.back().get();
  }

  static void im2col(const Tensor<T>& x, std::size_t kh, std::size_t kw, std::size_t stride,
                     std::size_t pad, std::size_t oh, std::size_t ow, Tensor<T>& cols) {
    std::size_t cin = x.shape[0], h = x.shape[1], w = x.shape[2];
    T* cp = cols.ptr();
    std::size_t row = 0;
    for (std::size_t c = 0; c < cin; ++c)
      for (std::size_t ky = 0; ky < kh; ++ky)
        for (std::size_t kx = 0; kx < kw; ++kx, ++row) {
          T* dst = cp + row * oh * ow;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                static_cast<std::ptrdiff_t>(pad);
            for (std::size_t ox = 0; ox < ow; ++ox) {
              std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                  static_cast<std::ptrdiff_t>(pad);
              dst[oy * ow + ox] =
                  (iy >= 0 && iy < static_cast<std::ptrdiff_t>(h) && ix >= 0 &&
                   ix < static_cast<std::ptrdiff_t>(w))
                      ? x.at3(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix))
                      : T(0);
            }
          }
        }
  }

  static void col2im_add(const Tensor<T>& cols, std::size_t cin, std::size_t h, std::size_t w,
                         std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
                         std::size_t oh, std::size_t ow, Tensor<T>& gx) {
    const T* cp = cols.ptr();
    std::size_t row = 0;
    for (std::size_t c = 0; c < cin; ++c)
      for (std::size_t ky = 0; ky < kh; ++ky)
        for (std::size_t kx = 0; kx < kw; ++kx, ++row) {
          const T* src = cp + row * oh * ow;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                  static_cast<std::ptrdiff_t>(pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              gx.at3(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                  src[oy * ow + ox];
            }
          }
        }
  }

  std::vector<std::unique_ptr<Node<T>>> nodes_;
  bool backward_done_ = false;
};

}  // namespace dcn
