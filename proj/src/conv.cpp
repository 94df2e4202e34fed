#include <cmath>

#include "locust/ops.hpp"

namespace locust::tk {

namespace {

std::size_t conv_extent(std::size_t in, std::size_t k, std::size_t pad, std::size_t stride) {
  return (in + 2 * pad - k) / stride + 1;
}

std::shared_ptr<Node> conv_make(const std::vector<std::size_t>& shape,
                                std::vector<std::shared_ptr<Node>> parents) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->data.resize(shape_numel(shape));
  for (const auto& p : parents) {
    if (p->needs_grad) n->needs_grad = true;
  }
  if (n->needs_grad) n->parents = std::move(parents);
  return n;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias,
              std::size_t stride, Pad pad) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 3 || ws.size() != 4 || xs[0] != ws[1]) {
    throw Error(ErrorCode::ShapeMismatch,
                "conv2d: input " + format_shape(xs) + " vs kernels " + format_shape(ws));
  }
  std::size_t C = xs[0], H = xs[1], W = xs[2];
  std::size_t F = ws[0], kh = ws[2], kw = ws[3];
  if (bias && (bias->shape().size() != 1 || bias->shape()[0] != F)) {
    throw Error(ErrorCode::ShapeMismatch,
                "conv2d: bias " + format_shape(bias->shape()) + " vs F=" + std::to_string(F));
  }
  std::size_t ph = pad == Pad::same ? (kh - 1) / 2 : 0;
  std::size_t pw = pad == Pad::same ? (kw - 1) / 2 : 0;
  if (H + 2 * ph < kh || W + 2 * pw < kw) {
    throw Error(ErrorCode::ShapeMismatch, "conv2d: kernel " + format_shape(ws) +
                                              " larger than padded input " + format_shape(xs));
  }
  std::size_t OH = conv_extent(H, kh, ph, stride);
  std::size_t OW = conv_extent(W, kw, pw, stride);

  std::vector<std::shared_ptr<Node>> parents{x.node(), w.node()};
  if (bias) parents.push_back(bias->node());
  auto out = conv_make({F, OH, OW}, parents);

  const double* xd = x.data().data();
  const double* wd = w.data().data();
  double* od = out->data.data();
  if (bias) {
    const double* bd = bias->data().data();
    for (std::size_t f = 0; f < F; ++f) {
      double bv = bd[f];
      for (std::size_t i = 0; i < OH * OW; ++i) od[f * OH * OW + i] = bv;
    }
  }
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* xc = xd + c * H * W;
      const double* wf = wd + (f * C + c) * kh * kw;
      for (std::size_t oh = 0; oh < OH; ++oh) {
        double* orow = od + (f * OH + oh) * OW;
        for (std::size_t u = 0; u < kh; ++u) {
          std::ptrdiff_t ih = std::ptrdiff_t(oh * stride + u) - std::ptrdiff_t(ph);
          if (ih < 0 || ih >= std::ptrdiff_t(H)) continue;
          const double* xrow = xc + std::size_t(ih) * W;
          const double* wrow = wf + u * kw;
          for (std::size_t ow = 0; ow < OW; ++ow) {
            std::ptrdiff_t iw0 = std::ptrdiff_t(ow * stride) - std::ptrdiff_t(pw);
            double acc = 0;
            for (std::size_t v = 0; v < kw; ++v) {
              std::ptrdiff_t iw = iw0 + std::ptrdiff_t(v);
              if (iw >= 0 && iw < std::ptrdiff_t(W)) acc += xrow[iw] * wrow[v];
            }
            orow[ow] += acc;
          }
        }
      }
    }
  }

  if (out->needs_grad) {
    bool has_bias = bias.has_value();
    out->backward_fn = [C, H, W, F, kh, kw, ph, pw, OH, OW, stride, has_bias](Node& self) {
      Node* px = self.parents[0].get();
      Node* pw_ = self.parents[1].get();
      const double* g = self.grad.data();
      if (has_bias) {
        Node* pb = self.parents[2].get();
        if (pb->needs_grad) {
          for (std::size_t f = 0; f < F; ++f) {
            double acc = 0;
            for (std::size_t i = 0; i < OH * OW; ++i) acc += g[f * OH * OW + i];
            pb->grad[f] += acc;
          }
        }
      }
      if (!px->needs_grad && !pw_->needs_grad) return;
      for (std::size_t f = 0; f < F; ++f) {
        for (std::size_t c = 0; c < C; ++c) {
          const double* xc = px->data.data() + c * H * W;
          const double* wf = pw_->data.data() + (f * C + c) * kh * kw;
          double* gxc = px->needs_grad ? px->grad.data() + c * H * W : nullptr;
          double* gwf = pw_->needs_grad ? pw_->grad.data() + (f * C + c) * kh * kw : nullptr;
          for (std::size_t oh = 0; oh < OH; ++oh) {
            const double* grow = g + (f * OH + oh) * OW;
            for (std::size_t u = 0; u < kh; ++u) {
              std::ptrdiff_t ih = std::ptrdiff_t(oh * stride + u) - std::ptrdiff_t(ph);
              if (ih < 0 || ih >= std::ptrdiff_t(H)) continue;
              const double* xrow = xc + std::size_t(ih) * W;
              double* gxrow = gxc ? gxc + std::size_t(ih) * W : nullptr;
              for (std::size_t ow = 0; ow < OW; ++ow) {
                double gv = grow[ow];
                if (gv == 0) continue;
                std::ptrdiff_t iw0 = std::ptrdiff_t(ow * stride) - std::ptrdiff_t(pw);
                for (std::size_t v = 0; v < kw; ++v) {
                  std::ptrdiff_t iw = iw0 + std::ptrdiff_t(v);
                  if (iw < 0 || iw >= std::ptrdiff_t(W)) continue;
                  if (gxrow) gxrow[iw] += gv * wf[u * kw + v];
                  if (gwf) gwf[u * kw + v] += gv * xrow[iw];
                }
              }
            }
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor conv3d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias, Pad pad) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 5 || xs[0] != ws[1]) {
    throw Error(ErrorCode::ShapeMismatch,
                "conv3d: input " + format_shape(xs) + " vs kernels " + format_shape(ws));
  }
  std::size_t C = xs[0], T = xs[1], H = xs[2], W = xs[3];
  std::size_t F = ws[0], kt = ws[2], kh = ws[3], kw = ws[4];
  if (bias && (bias->shape().size() != 1 || bias->shape()[0] != F)) {
    throw Error(ErrorCode::ShapeMismatch,
                "conv3d: bias " + format_shape(bias->shape()) + " vs F=" + std::to_string(F));
  }
  std::size_t pt = pad == Pad::same ? (kt - 1) / 2 : 0;
  std::size_t ph = pad == Pad::same ? (kh - 1) / 2 : 0;
  std::size_t pw = pad == Pad::same ? (kw - 1) / 2 : 0;
  if (T + 2 * pt < kt || H + 2 * ph < kh || W + 2 * pw < kw) {
    throw Error(ErrorCode::ShapeMismatch, "conv3d: kernel " + format_shape(ws) +
                                              " larger than padded input " + format_shape(xs));
  }
  std::size_t OT = conv_extent(T, kt, pt, 1);
  std::size_t OH = conv_extent(H, kh, ph, 1);
  std::size_t OW = conv_extent(W, kw, pw, 1);

  std::vector<std::shared_ptr<Node>> parents{x.node(), w.node()};
  if (bias) parents.push_back(bias->node());
  auto out = conv_make({F, OT, OH, OW}, parents);

  const double* xd = x.data().data();
  const double* wd = w.data().data();
  double* od = out->data.data();
  if (bias) {
    const double* bd = bias->data().data();
    for (std::size_t f = 0; f < F; ++f) {
      double bv = bd[f];
      for (std::size_t i = 0; i < OT * OH * OW; ++i) od[f * OT * OH * OW + i] = bv;
    }
  }
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* xc = xd + c * T * H * W;
      const double* wf = wd + (f * C + c) * kt * kh * kw;
      for (std::size_t ot = 0; ot < OT; ++ot) {
        for (std::size_t s = 0; s < kt; ++s) {
          std::ptrdiff_t it = std::ptrdiff_t(ot + s) - std::ptrdiff_t(pt);
          if (it < 0 || it >= std::ptrdiff_t(T)) continue;
          const double* xt = xc + std::size_t(it) * H * W;
          const double* wt = wf + s * kh * kw;
          for (std::size_t oh = 0; oh < OH; ++oh) {
            double* orow = od + ((f * OT + ot) * OH + oh) * OW;
            for (std::size_t u = 0; u < kh; ++u) {
              std::ptrdiff_t ih = std::ptrdiff_t(oh + u) - std::ptrdiff_t(ph);
              if (ih < 0 || ih >= std::ptrdiff_t(H)) continue;
              const double* xrow = xt + std::size_t(ih) * W;
              const double* wrow = wt + u * kw;
              for (std::size_t ow = 0; ow < OW; ++ow) {
                std::ptrdiff_t iw0 = std::ptrdiff_t(ow) - std::ptrdiff_t(pw);
                double acc = 0;
                for (std::size_t v = 0; v < kw; ++v) {
                  std::ptrdiff_t iw = iw0 + std::ptrdiff_t(v);
                  if (iw >= 0 && iw < std::ptrdiff_t(W)) acc += xrow[iw] * wrow[v];
                }
                orow[ow] += acc;
              }
            }
          }
        }
      }
    }
  }

  if (out->needs_grad) {
    bool has_bias = bias.has_value();
    out->backward_fn = [C, T, H, W, F, kt, kh, kw, pt, ph, pw, OT, OH, OW, has_bias](Node& self) {
      Node* px = self.parents[0].get();
      Node* pw_ = self.parents[1].get();
      const double* g = self.grad.data();
      if (has_bias) {
        Node* pb = self.parents[2].get();
        if (pb->needs_grad) {
          for (std::size_t f = 0; f < F; ++f) {
            double acc = 0;
            for (std::size_t i = 0; i < OT * OH * OW; ++i) acc += g[f * OT * OH * OW + i];
            pb->grad[f] += acc;
          }
        }
      }
      if (!px->needs_grad && !pw_->needs_grad) return;
      for (std::size_t f = 0; f < F; ++f) {
        for (std::size_t c = 0; c < C; ++c) {
          const double* xc = px->data.data() + c * T * H * W;
          const double* wf = pw_->data.data() + (f * C + c) * kt * kh * kw;
          double* gxc = px->needs_grad ? px->grad.data() + c * T * H * W : nullptr;
          double* gwf = pw_->needs_grad ? pw_->grad.data() + (f * C + c) * kt * kh * kw : nullptr;
          for (std::size_t ot = 0; ot < OT; ++ot) {
            for (std::size_t s = 0; s < kt; ++s) {
              std::ptrdiff_t it = std::ptrdiff_t(ot + s) - std::ptrdiff_t(pt);
              if (it < 0 || it >= std::ptrdiff_t(T)) continue;
              const double* xt = xc + std::size_t(it) * H * W;
              double* gxt = gxc ? gxc + std::size_t(it) * H * W : nullptr;
              for (std::size_t oh = 0; oh < OH; ++oh) {
                const double* grow = g + ((f * OT + ot) * OH + oh) * OW;
                for (std::size_t u = 0; u < kh; ++u) {
                  std::ptrdiff_t ih = std::ptrdiff_t(oh + u) - std::ptrdiff_t(ph);
                  if (ih < 0 || ih >= std::ptrdiff_t(H)) continue;
                  const double* xrow = xt + std::size_t(ih) * W;
                  double* gxrow = gxt ? gxt + std::size_t(ih) * W : nullptr;
                  const std::size_t wbase = s * kh * kw + u * kw;
                  for (std::size_t ow = 0; ow < OW; ++ow) {
                    double gv = grow[ow];
                    if (gv == 0) continue;
                    std::ptrdiff_t iw0 = std::ptrdiff_t(ow) - std::ptrdiff_t(pw);
                    for (std::size_t v = 0; v < kw; ++v) {
                      std::ptrdiff_t iw = iw0 + std::ptrdiff_t(v);
                      if (iw < 0 || iw >= std::ptrdiff_t(W)) continue;
                      if (gxrow) gxrow[iw] += gv * wf[wbase + v];
                      if (gwf) gwf[wbase + v] += gv * xrow[iw];
                    }
                  }
                }
              }
            }
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias,
                        std::size_t stride) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 3 || ws.size() != 4 || xs[0] != ws[0]) {
    throw Error(ErrorCode::ShapeMismatch, "conv_transpose2d: input " + format_shape(xs) +
                                              " vs kernels " + format_shape(ws));
  }
  std::size_t C = xs[0], H = xs[1], W = xs[2];
  std::size_t F = ws[1], kh = ws[2], kw = ws[3];
  if (bias && (bias->shape().size() != 1 || bias->shape()[0] != F)) {
    throw Error(ErrorCode::ShapeMismatch, "conv_transpose2d: bias " +
                                              format_shape(bias->shape()) + " vs F=" +
                                              std::to_string(F));
  }
  std::size_t OH = (H - 1) * stride + kh;
  std::size_t OW = (W - 1) * stride + kw;

  std::vector<std::shared_ptr<Node>> parents{x.node(), w.node()};
  if (bias) parents.push_back(bias->node());
  auto out = conv_make({F, OH, OW}, parents);

  const double* xd = x.data().data();
  const double* wd = w.data().data();
  double* od = out->data.data();
  if (bias) {
    const double* bd = bias->data().data();
    for (std::size_t f = 0; f < F; ++f) {
      double bv = bd[f];
      for (std::size_t i = 0; i < OH * OW; ++i) od[f * OH * OW + i] = bv;
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    const double* xc = xd + c * H * W;
    for (std::size_t f = 0; f < F; ++f) {
      const double* wcf = wd + (c * F + f) * kh * kw;
      double* of = od + f * OH * OW;
      for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < W; ++j) {
          double xv = xc[i * W + j];
          if (xv == 0) continue;
          for (std::size_t u = 0; u < kh; ++u) {
            double* orow = of + (i * stride + u) * OW + j * stride;
            const double* wrow = wcf + u * kw;
            for (std::size_t v = 0; v < kw; ++v) orow[v] += xv * wrow[v];
          }
        }
      }
    }
  }

  if (out->needs_grad) {
    bool has_bias = bias.has_value();
    out->backward_fn = [C, H, W, F, kh, kw, OH, OW, stride, has_bias](Node& self) {
      Node* px = self.parents[0].get();
      Node* pw_ = self.parents[1].get();
      const double* g = self.grad.data();
      if (has_bias) {
        Node* pb = self.parents[2].get();
        if (pb->needs_grad) {
          for (std::size_t f = 0; f < F; ++f) {
            double acc = 0;
            for (std::size_t i = 0; i < OH * OW; ++i) acc += g[f * OH * OW + i];
            pb->grad[f] += acc;
          }
        }
      }
      if (!px->needs_grad && !pw_->needs_grad) return;
      for (std::size_t c = 0; c < C; ++c) {
        const double* xc = px->data.data() + c * H * W;
        double* gxc = px->needs_grad ? px->grad.data() + c * H * W : nullptr;
        for (std::size_t f = 0; f < F; ++f) {
          const double* wcf = pw_->data.data() + (c * F + f) * kh * kw;
          double* gwcf = pw_->needs_grad ? pw_->grad.data() + (c * F + f) * kh * kw : nullptr;
          const double* gf = g + f * OH * OW;
          for (std::size_t i = 0; i < H; ++i) {
            for (std::size_t j = 0; j < W; ++j) {
              double acc = 0;
              double xv = xc[i * W + j];
              for (std::size_t u = 0; u < kh; ++u) {
                const double* grow = gf + (i * stride + u) * OW + j * stride;
                for (std::size_t v = 0; v < kw; ++v) {
                  acc += grow[v] * wcf[u * kw + v];
                  if (gwcf) gwcf[u * kw + v] += grow[v] * xv;
                }
              }
              if (gxc) gxc[i * W + j] += acc;
            }
          }
        }
      }
    };
  }
  return Tensor(out);
}

}  // namespace locust::tk
