#pragma once

// Scalar losses over (C,H,W) predictions. Targets are constant tensors of the
// prediction's shape; only the prediction receives gradients.

#include <cmath>
#include <vector>

#include "auxmat/ad_ops.hpp"

namespace auxmat::ad {

namespace detail {

template <typename T>
T softplus(T z) {
  return std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z)));
}

template <typename T>
T stable_sigmoid(T z) {
  return z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

}  // namespace detail

/// mean |pred - target|.
template <typename T>
BasicTensor<T> l1_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  detail::require_same(pred.shape(), target.shape(), "l1_loss");
  const std::size_t n = pred.numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(static_cast<double>(pred.value()[i]) - target.value()[i]);
  return make_op<T>("l1_loss", {}, {static_cast<T>(acc / n)}, {pred, target}, [n](Node<T>& node) {
    const auto& p = node.inputs[0]->value;
    const auto& t = node.inputs[1]->value;
    const T s = node.grad[0] / static_cast<T>(n);
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = input_grad(node, k)) {
        const T sign_k = k == 0 ? T(1) : T(-1);
        for (std::size_t i = 0; i < n; ++i) {
          const T d = p[i] - t[i];
          if (d != T(0)) (*g)[i] += sign_k * (d > T(0) ? s : -s);
        }
      }
    }
  });
}

/// Mean |pred - target| over pixels with mask != 0. A zero-support mask
/// yields 0 and reports `empty`.
template <typename T>
BasicTensor<T> masked_l1_loss(const BasicTensor<T>& pred, const std::vector<T>& target, const std::vector<T>& mask,
                              bool* empty = nullptr) {
  if (target.size() != pred.numel() || mask.size() != pred.numel()) {
    throw std::invalid_argument("masked_l1_loss: size mismatch");
  }
  std::size_t support = 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == T(0)) continue;
    acc += std::abs(static_cast<double>(pred.value()[i]) - target[i]);
    ++support;
  }
  if (empty) *empty = support == 0;
  const double value = support ? acc / static_cast<double>(support) : 0.0;
  return make_op<T>("masked_l1_loss", {}, {static_cast<T>(value)}, {pred}, [target, mask, support](Node<T>& node) {
    auto* g = input_grad(node, 0);
    if (!g || support == 0) return;
    const auto& p = node.inputs[0]->value;
    const T s = node.grad[0] / static_cast<T>(support);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i] == T(0)) continue;
      const T d = p[i] - target[i];
      if (d != T(0)) (*g)[i] += d > T(0) ? s : -s;
    }
  });
}

/// Mean sigmoid cross-entropy on logits: max(z,0) - z t + log(1 + e^-|z|).
template <typename T>
BasicTensor<T> bce_loss(const BasicTensor<T>& logits, const BasicTensor<T>& target) {
  detail::require_same(logits.shape(), target.shape(), "bce_loss");
  const std::size_t n = logits.numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits.value()[i];
    acc += detail::softplus(z) - z * target.value()[i];
  }
  return make_op<T>("bce_loss", {}, {static_cast<T>(acc / n)}, {logits, target}, [n](Node<T>& node) {
    auto* g = input_grad(node, 0);
    if (!g) return;
    const auto& z = node.inputs[0]->value;
    const auto& t = node.inputs[1]->value;
    const T s = node.grad[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) (*g)[i] += s * (detail::stable_sigmoid(z[i]) - t[i]);
  });
}

/// Class-balanced binary cross-entropy on logits. Per sample, positives are
/// weighted by N_neg / N and negatives by N_pos / N (N_pos counts target >= 0.5).
template <typename T>
BasicTensor<T> weighted_ce_edge_loss(const BasicTensor<T>& logits, const BasicTensor<T>& target) {
  detail::require_same(logits.shape(), target.shape(), "weighted_ce_edge_loss");
  const std::size_t n = logits.numel();
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) pos += target.value()[i] >= T(0.5);
  const double w_pos = static_cast<double>(n - pos) / n;
  const double w_neg = static_cast<double>(pos) / n;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits.value()[i];
    const double t = target.value()[i];
    acc += w_pos * t * detail::softplus(-z) + w_neg * (1.0 - t) * detail::softplus(z);
  }
  return make_op<T>("weighted_ce_edge_loss", {}, {static_cast<T>(acc / n)}, {logits, target},
                    [n, w_pos, w_neg](Node<T>& node) {
                      auto* g = input_grad(node, 0);
                      if (!g) return;
                      const auto& z = node.inputs[0]->value;
                      const auto& t = node.inputs[1]->value;
                      const double s = node.grad[0] / static_cast<double>(n);
                      for (std::size_t i = 0; i < n; ++i) {
                        const double sg = detail::stable_sigmoid(static_cast<double>(z[i]));
                        (*g)[i] += static_cast<T>(s * (w_pos * t[i] * (sg - 1.0) + w_neg * (1.0 - t[i]) * sg));
                      }
                    });
}

/// Laplacian-pyramid L1: sum over levels l < `levels` of 2^l * L1(Lap_l(pred), Lap_l(gt)),
/// with G_{l+1} = subsample(blur5(G_l)) and Lap_l = G_l - upsample(G_{l+1}).
template <typename T>
BasicTensor<T> laplacian_loss(const BasicTensor<T>& pred, const BasicTensor<T>& gt, int levels = 5) {
  detail::require_same(pred.shape(), gt.shape(), "laplacian_loss");
  if (levels < 1) throw std::invalid_argument("laplacian_loss: levels must be >= 1");
  BasicTensor<T> gp = pred, gg = gt, total;
  for (int l = 0; l < levels; ++l) {
    BasicTensor<T> np = subsample_2x(binomial_blur5(gp));
    BasicTensor<T> ng = subsample_2x(binomial_blur5(gg));
    BasicTensor<T> lap_p = sub(gp, upsample_bilinear(np, gp.height(), gp.width()));
    BasicTensor<T> lap_g = sub(gg, upsample_bilinear(ng, gg.height(), gg.width()));
    BasicTensor<T> term = scale(l1_loss(lap_p, lap_g), static_cast<T>(1 << l));
    total = total.defined() ? add(total, term) : term;
    gp = np;
    gg = ng;
  }
  return total;
}

}  // namespace auxmat::ad
