#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "dcn/autodiff.hpp"
#include "dcn/errors.hpp"
#include "dcn/tensor.hpp"

namespace dcn {

inline constexpr double kCosineEps = 1e-8;

// cos(u,v) with an epsilon guard on both norms; relu features can be
// all-zero early in training.
template <typename T>
T cosine(const T* u, const T* v, std::size_t len) {
  T dot = T(0), nu = T(0), nv = T(0);
  for (std::size_t i = 0; i < len; ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  T du = std::max(std::sqrt(nu), static_cast<T>(kCosineEps));
  T dv = std::max(std::sqrt(nv), static_cast<T>(kCosineEps));
  return dot / (du * dv);
}

template <typename T>
T cosine(const std::vector<T>& u, const std::vector<T>& v) {
  if (u.size() != v.size()) throw ConfigError("cosine: length mismatch");
  return cosine(u.data(), v.data(), u.size());
}

// Slot p = r*N + c feature vector of a (C_s,M,N) patch-feature map,
// gathered across the channel axis.
template <typename T>
std::vector<T> slot_feature(const Tensor<T>& s, std::size_t slot) {
  std::size_t c = s.dim(0), spatial = s.dim(1) * s.dim(2);
  std::vector<T> v(c);
  for (std::size_t ch = 0; ch < c; ++ch) v[ch] = s.data[ch * spatial + slot];
  return v;
}

// A_sim[p][q] = cos(feature of slot p, feature of slot q); P = M*N with
// row-major slot flattening. Plain-tensor route, used at eval time and by
// the oracles.
template <typename T>
Tensor<T> build_similarity_matrix(const Tensor<T>& s) {
  if (s.rank() != 3) throw ConfigError("build_similarity_matrix: expected (C_s,M,N)");
  std::size_t patches = s.dim(1) * s.dim(2);
  std::size_t c = s.dim(0);
  Tensor<T> a({patches, patches});
  std::vector<std::vector<T>> feats(patches);
  for (std::size_t p = 0; p < patches; ++p) feats[p] = slot_feature(s, p);
  for (std::size_t p = 0; p < patches; ++p)
    for (std::size_t q = 0; q < patches; ++q)
      a.at2(p, q) = cosine(feats[p].data(), feats[q].data(), c);
  return a;
}

// A_label[p][q] = +1 when slots p and q carry the same class, -1 otherwise.
// Class-only: cross-subdomain mixes of one class stay all ones.
template <typename T = float>
Tensor<T> build_label_matrix(const std::vector<int>& cls_mask) {
  std::size_t patches = cls_mask.size();
  Tensor<T> a({patches, patches});
  for (std::size_t p = 0; p < patches; ++p)
    for (std::size_t q = 0; q < patches; ++q)
      a.at2(p, q) = cls_mask[p] == cls_mask[q] ? T(1) : T(-1);
  return a;
}

// L_sim = ||A_sim - A_label||^2 / (P(P-1)), elementwise sum of squares,
// diagonal included (it contributes ~0 since both diagonals are one).
template <typename T>
T similarity_loss_value(const Tensor<T>& a_sim, const Tensor<T>& a_label) {
  require_same_shape(a_sim, a_label, "similarity_loss");
  std::size_t patches = a_sim.dim(0);
  if (patches < 2) throw ConfigError("similarity_loss: need P >= 2");
  T acc = T(0);
  for (std::size_t i = 0; i < a_sim.size(); ++i) {
    T d = a_sim[i] - a_label[i];
    acc += d * d;
  }
  return acc / static_cast<T>(patches * (patches - 1));
}

// -- differentiable route ---------------------------------------------------

// Tape op: (C_s,M,N) patch features -> P x P cosine matrix.
template <typename T>
Node<T>* cosine_matrix_op(Graph<T>& g, Node<T>* s) {
  if (s->value.rank() != 3) throw ConfigError("cosine_matrix: expected (C_s,M,N)");
  std::size_t c = s->value.dim(0);
  std::size_t patches = s->value.dim(1) * s->value.dim(2);
  T eps = static_cast<T>(kCosineEps);

  auto feats = std::make_shared<std::vector<std::vector<T>>>(patches);
  auto norms = std::make_shared<std::vector<T>>(patches);   // raw L2 norms
  auto denoms = std::make_shared<std::vector<T>>(patches);  // max(norm, eps)
  for (std::size_t p = 0; p < patches; ++p) {
    (*feats)[p] = slot_feature(s->value, p);
    T nn = T(0);
    for (T v : (*feats)[p]) nn += v * v;
    (*norms)[p] = std::sqrt(nn);
    (*denoms)[p] = std::max((*norms)[p], eps);
  }

  Node<T>* out = g.input(Tensor<T>({patches, patches}), true);
  for (std::size_t p = 0; p < patches; ++p)
    for (std::size_t q = 0; q < patches; ++q) {
      T dot = T(0);
      for (std::size_t i = 0; i < c; ++i) dot += (*feats)[p][i] * (*feats)[q][i];
      out->value.at2(p, q) = dot / ((*denoms)[p] * (*denoms)[q]);
    }

  out->backward_fn = [out, s, feats, norms, denoms, c, patches, eps]() {
    s->ensure_grad();
    std::vector<std::vector<T>> gu(patches, std::vector<T>(c, T(0)));
    for (std::size_t p = 0; p < patches; ++p)
      for (std::size_t q = 0; q < patches; ++q) {
        T g = out->grad.at2(p, q);
        if (g == T(0)) continue;
        T a = out->value.at2(p, q);
        T inv = T(1) / ((*denoms)[p] * (*denoms)[q]);
        // d cos / du_p = u_q/(n_p n_q) - cos * u_p / n_p^2 (second term
        // vanishes when the norm saturates at eps).
        bool live_p = (*norms)[p] > eps;
        bool live_q = (*norms)[q] > eps;
        T cp = live_p ? a / ((*denoms)[p] * (*denoms)[p]) : T(0);
        T cq = live_q ? a / ((*denoms)[q] * (*denoms)[q]) : T(0);
        for (std::size_t i = 0; i < c; ++i) {
          gu[p][i] += g * ((*feats)[q][i] * inv - cp * (*feats)[p][i]);
          gu[q][i] += g * ((*feats)[p][i] * inv - cq * (*feats)[q][i]);
        }
      }
    std::size_t spatial = patches;  // s is (C_s, M, N) with M*N == patches
    for (std::size_t p = 0; p < patches; ++p)
      for (std::size_t i = 0; i < c; ++i) s->grad.data[i * spatial + p] += gu[p][i];
  };
  return out;
}

// Tape op: Eq.-2 style loss against a constant label matrix.
template <typename T>
Node<T>* similarity_loss_op(Graph<T>& g, Node<T>* a_sim, const Tensor<T>& a_label) {
  require_same_shape(a_sim->value, a_label, "similarity_loss");
  std::size_t patches = a_sim->value.dim(0);
  if (patches < 2) throw ConfigError("similarity_loss: need P >= 2");
  T norm = T(1) / static_cast<T>(patches * (patches - 1));
  Node<T>* out = g.input(Tensor<T>({1}), true);
  T acc = T(0);
  for (std::size_t i = 0; i < a_sim->value.size(); ++i) {
    T d = a_sim->value[i] - a_label[i];
    acc += d * d;
  }
  out->value[0] = acc * norm;
  auto label = std::make_shared<Tensor<T>>(a_label);
  out->backward_fn = [out, a_sim, label, norm]() {
    a_sim->ensure_grad();
    T g = out->grad[0] * norm * T(2);
    for (std::size_t i = 0; i < a_sim->grad.size(); ++i)
      a_sim->grad[i] += g * (a_sim->value[i] - (*label)[i]);
  };
  return out;
}

// Mean-squared-error against a constant target; realizes the reflection
// loss (1/(H_f W_f)) ||R_pred - R_label||_F^2 when pred is (1,H_f,W_f).
template <typename T>
Node<T>* mse_loss_op(Graph<T>& g, Node<T>* pred, const Tensor<T>& target) {
  require_same_shape(pred->value, target, "mse_loss");
  std::size_t n = pred->value.size();
  Node<T>* out = g.input(Tensor<T>({1}), true);
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    T d = pred->value[i] - target[i];
    acc += d * d;
  }
  out->value[0] = acc / static_cast<T>(n);
  auto tgt = std::make_shared<Tensor<T>>(target);
  out->backward_fn = [out, pred, tgt, n]() {
    pred->ensure_grad();
    T g = out->grad[0] * T(2) / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) pred->grad[i] += g * (pred->value[i] - (*tgt)[i]);
  };
  return out;
}

}  // namespace dcn
