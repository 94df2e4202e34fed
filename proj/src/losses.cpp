#include <cmath>

#include "locust/ops.hpp"

namespace locust::tk {

namespace {

std::shared_ptr<Node> loss_make(std::vector<std::shared_ptr<Node>> parents) {
  auto n = std::make_shared<Node>();
  n->shape = {1};
  n->data.resize(1);
  for (const auto& p : parents) {
    if (p->needs_grad) n->needs_grad = true;
  }
  if (n->needs_grad) n->parents = std::move(parents);
  return n;
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, std::size_t label) {
  const auto& sh = logits.shape();
  if (sh.size() != 1 || label >= sh[0]) {
    throw Error(ErrorCode::ShapeMismatch, "cross_entropy: logits " + format_shape(sh) +
                                              ", label " + std::to_string(label));
  }
  std::size_t n = sh[0];
  auto out = loss_make({logits.node()});
  const auto& x = logits.data();
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  double z = 0;
  for (double v : x) z += std::exp(v - mx);
  double lse = mx + std::log(z);
  out->data[0] = lse - x[label];
  if (out->needs_grad) {
    out->backward_fn = [n, label, lse](Node& self) {
      Node* p = self.parents[0].get();
      if (!p->needs_grad) return;
      double g = self.grad[0];
      for (std::size_t k = 0; k < n; ++k) {
        double soft = std::exp(p->data[k] - lse);
        p->grad[k] += g * (soft - (k == label ? 1.0 : 0.0));
      }
    };
  }
  return Tensor(out);
}

Tensor masked_pixel_cross_entropy(const Tensor& logit_map,
                                  const std::vector<std::int8_t>& mask) {
  const auto& sh = logit_map.shape();
  if (sh.size() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "masked CE: map " + format_shape(sh));
  }
  std::size_t C = sh[0], P = sh[1] * sh[2];
  if (mask.size() != P) {
    throw Error(ErrorCode::ShapeMismatch,
                "masked CE: mask length " + std::to_string(mask.size()) + " vs map " +
                    format_shape(sh));
  }
  std::size_t labeled = 0;
  for (std::int8_t m : mask) {
    if (m >= 0) {
      if (std::size_t(m) >= C) {
        throw Error(ErrorCode::ShapeMismatch, "masked CE: mask label out of range");
      }
      ++labeled;
    }
  }
  if (labeled == 0) {
    throw Error(ErrorCode::EmptyMask, "masked CE: every pixel is ignored");
  }

  auto out = loss_make({logit_map.node()});
  const auto& x = logit_map.data();
  double total = 0;
  for (std::size_t p = 0; p < P; ++p) {
    if (mask[p] < 0) continue;
    double mx = x[p];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, x[c * P + p]);
    double z = 0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(x[c * P + p] - mx);
    double lse = mx + std::log(z);
    total += lse - x[std::size_t(mask[p]) * P + p];
  }
  out->data[0] = total / double(labeled);
  if (out->needs_grad) {
    out->backward_fn = [C, P, labeled, mask](Node& self) {
      Node* pn = self.parents[0].get();
      if (!pn->needs_grad) return;
      double g = self.grad[0] / double(labeled);
      for (std::size_t p = 0; p < P; ++p) {
        if (mask[p] < 0) continue;
        double mx = pn->data[p];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, pn->data[c * P + p]);
        double z = 0;
        for (std::size_t c = 0; c < C; ++c) z += std::exp(pn->data[c * P + p] - mx);
        for (std::size_t c = 0; c < C; ++c) {
          double soft = std::exp(pn->data[c * P + p] - mx) / z;
          pn->grad[c * P + p] += g * (soft - (std::size_t(mask[p]) == c ? 1.0 : 0.0));
        }
      }
    };
  }
  return Tensor(out);
}

Tensor hinge_loss(const Tensor& scores, const std::vector<int>& labels, double margin) {
  const auto& sh = scores.shape();
  if (sh.size() != 1 || sh[0] != labels.size() || labels.empty()) {
    throw Error(ErrorCode::ShapeMismatch,
                "hinge: scores " + format_shape(sh) + " vs " + std::to_string(labels.size()) +
                    " labels");
  }
  std::size_t n = sh[0];
  auto out = loss_make({scores.node()});
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += std::max(0.0, margin - double(labels[i]) * scores.data()[i]);
  }
  out->data[0] = total / double(n);
  if (out->needs_grad) {
    out->backward_fn = [n, labels, margin](Node& self) {
      Node* p = self.parents[0].get();
      if (!p->needs_grad) return;
      double g = self.grad[0] / double(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (margin - double(labels[i]) * p->data[i] > 0) {
          p->grad[i] -= g * double(labels[i]);
        }
      }
    };
  }
  return Tensor(out);
}

}  // namespace locust::tk
