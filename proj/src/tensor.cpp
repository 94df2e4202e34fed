#include "locust/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace locust::tk {

namespace {

std::shared_ptr<Node> make_leaf(std::vector<double> data,
                                const std::vector<std::size_t>& shape,
                                bool requires_grad) {
  if (data.size() != shape_numel(shape)) {
    throw Error(ErrorCode::ShapeMismatch,
                "data length " + std::to_string(data.size()) + " does not fill shape " +
                    format_shape(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  n->needs_grad = requires_grad;
  return n;
}

std::shared_ptr<Node> make_op(const std::vector<std::size_t>& shape,
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

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": shapes " +
                                              format_shape(a.shape()) + " vs " +
                                              format_shape(b.shape()));
  }
}

// Broadcast category for binary elementwise ops.
enum class Bcast { same, scalar, suffix };

Bcast classify_bcast(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Bcast::same;
  if (b.numel() == 1) return Bcast::scalar;
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (bs.size() < as.size() &&
      std::equal(bs.begin(), bs.end(), as.end() - std::ptrdiff_t(bs.size()))) {
    return Bcast::suffix;
  }
  throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": shapes " +
                                            format_shape(as) + " vs " + format_shape(bs));
}

}  // namespace

Tensor Tensor::zeros(const std::vector<std::size_t>& shape, bool requires_grad) {
  return Tensor(make_leaf(std::vector<double>(shape_numel(shape), 0.0), shape, requires_grad));
}

Tensor Tensor::full(const std::vector<std::size_t>& shape, double v, bool requires_grad) {
  return Tensor(make_leaf(std::vector<double>(shape_numel(shape), v), shape, requires_grad));
}

Tensor Tensor::from(std::vector<double> data, const std::vector<std::size_t>& shape,
                    bool requires_grad) {
  return Tensor(make_leaf(std::move(data), shape, requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(make_leaf({v}, {1}, requires_grad));
}

double Tensor::item() const {
  if (numel() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "item() needs a 1-element tensor, got " +
                                              format_shape(shape()));
  }
  return n_->data[0];
}

Graph Graph::trace(const Tensor& root) {
  Graph g;
  if (!root.node()->needs_grad) return g;
  // Iterative post-order DFS over grad-needing parents.
  std::unordered_set<Node*> visited;
  struct Frame {
    std::shared_ptr<Node> node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.node(), 0});
  visited.insert(root.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      auto& p = f.node->parents[f.next_parent++];
      if (p->needs_grad && !visited.count(p.get())) {
        visited.insert(p.get());
        stack.push_back({p, 0});
      }
    } else {
      g.order_.push_back(f.node);
      stack.pop_back();
    }
  }
  return g;
}

void Graph::run_backward(double seed) {
  if (order_.empty()) return;
  for (auto& n : order_) {
    if (n->requires_grad) {
      n->ensure_grad();  // leaves accumulate across sweeps
    } else {
      n->grad.assign(n->data.size(), 0.0);
    }
  }
  Node* root = order_.back().get();
  for (double& g : root->grad) g += seed;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw Error(ErrorCode::ShapeMismatch,
                "backward() needs a scalar root, got " + format_shape(shape()));
  }
  Graph::trace(*this).run_backward(1.0);
}

// ---- binary elementwise --------------------------------------------------

namespace {

Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* name, bool is_mul) {
  Bcast bc = classify_bcast(a, b, name);
  auto out = make_op(a.shape(), {a.node(), b.node()});
  const auto& ad = a.data();
  const auto& bd = b.data();
  std::size_t n = ad.size();
  std::size_t m = bd.size();
  for (std::size_t i = 0; i < n; ++i) {
    double bv = (bc == Bcast::same) ? bd[i] : (bc == Bcast::scalar ? bd[0] : bd[i % m]);
    out->data[i] = is_mul ? ad[i] * bv : ad[i] + bv;
  }
  if (out->needs_grad) {
    out->backward_fn = [bc, is_mul](Node& self) {
      Node* pa = self.parents[0].get();
      Node* pb = self.parents[1].get();
      std::size_t n = self.data.size();
      std::size_t m = pb->data.size();
      if (pa->needs_grad) {
        for (std::size_t i = 0; i < n; ++i) {
          double bv = (bc == Bcast::same) ? pb->data[i]
                      : (bc == Bcast::scalar ? pb->data[0] : pb->data[i % m]);
          pa->grad[i] += is_mul ? self.grad[i] * bv : self.grad[i];
        }
      }
      if (pb->needs_grad) {
        for (std::size_t i = 0; i < n; ++i) {
          double contrib = is_mul ? self.grad[i] * pa->data[i] : self.grad[i];
          std::size_t j = (bc == Bcast::same) ? i : (bc == Bcast::scalar ? 0 : i % m);
          pb->grad[j] += contrib;
        }
      }
    };
  }
  return Tensor(out);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, "add", false); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, "mul", true); }
Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor add_scalar(const Tensor& a, double s) {
  auto out = make_op(a.shape(), {a.node()});
  for (std::size_t i = 0; i < a.numel(); ++i) out->data[i] = a.data()[i] + s;
  if (out->needs_grad) {
    out->backward_fn = [](Node& self) {
      Node* p = self.parents[0].get();
      if (!p->needs_grad) return;
      for (std::size_t i = 0; i < self.data.size(); ++i) p->grad[i] += self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor mul_scalar(const Tensor& a, double s) {
  auto out = make_op(a.shape(), {a.node()});
  for (std::size_t i = 0; i < a.numel(); ++i) out->data[i] = a.data()[i] * s;
  if (out->needs_grad) {
    out->backward_fn = [s](Node& self) {
      Node* p = self.parents[0].get();
      if (!p->needs_grad) return;
      for (std::size_t i = 0; i < self.data.size(); ++i) p->grad[i] += s * self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    throw Error(ErrorCode::ShapeMismatch, "matmul: shapes " + format_shape(a.shape()) +
                                              " vs " + format_shape(b.shape()));
  }
  std::size_t M = a.shape()[0], K = a.shape()[1], N = b.shape()[1];
  auto out = make_op({M, N}, {a.node(), b.node()});
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* od = out->data.data();
  for (std::size_t m = 0; m < M; ++m) {
    double* orow = od + m * N;
    for (std::size_t k = 0; k < K; ++k) {
      double av = ad[m * K + k];
      const double* brow = bd + k * N;
      for (std::size_t n = 0; n < N; ++n) orow[n] += av * brow[n];
    }
  }
  if (out->needs_grad) {
    out->backward_fn = [M, K, N](Node& self) {
      Node* pa = self.parents[0].get();
      Node* pb = self.parents[1].get();
      const double* g = self.grad.data();
      if (pa->needs_grad) {  // gA = g . B^T
        const double* bd = pb->data.data();
        double* ga = pa->grad.data();
        for (std::size_t m = 0; m < M; ++m) {
          for (std::size_t k = 0; k < K; ++k) {
            double acc = 0;
            const double* grow = g + m * N;
            const double* brow = bd + k * N;
            for (std::size_t n = 0; n < N; ++n) acc += grow[n] * brow[n];
            ga[m * K + k] += acc;
          }
        }
      }
      if (pb->needs_grad) {  // gB = A^T . g
        const double* ad = pa->data.data();
        double* gb = pb->grad.data();
        for (std::size_t m = 0; m < M; ++m) {
          const double* grow = g + m * N;
          for (std::size_t k = 0; k < K; ++k) {
            double av = ad[m * K + k];
            double* gbrow = gb + k * N;
            for (std::size_t n = 0; n < N; ++n) gbrow[n] += av * grow[n];
          }
        }
      }
    };
  }
  return Tensor(out);
}

// ---- unary elementwise -----------------------------------------------------

namespace {

// dfn(x, y) is dy/dx given input x and output y.
template <typename F, typename DF>
Tensor unary_elementwise(const Tensor& a, F fn, DF dfn) {
  auto out = make_op(a.shape(), {a.node()});
  for (std::size_t i = 0; i < a.numel(); ++i) out->data[i] = fn(a.data()[i]);
  if (out->needs_grad) {
    out->backward_fn = [dfn](Node& self) {
      Node* p = self.parents[0].get();
      if (!p->needs_grad) return;
      for (std::size_t i = 0; i < self.data.size(); ++i) {
        p->grad[i] += self.grad[i] * dfn(p->data[i], self.data[i]);
      }
    };
  }
  return Tensor(out);
}

}  // namespace

Tensor relu(const Tensor& a) {
  return unary_elementwise(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_elementwise(
      a,
      [](double x) {
        return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_t(const Tensor& a) {
  return unary_elementwise(a, [](double x) { return std::tanh(x); },
                           [](double, double y) { return 1.0 - y * y; });
}

Tensor exp_t(const Tensor& a) {
  return unary_elementwise(a, [](double x) { return std::exp(x); },
                           [](double, double y) { return y; });
}

Tensor log_t(const Tensor& a) {
  return unary_elementwise(a, [](double x) { return std::log(x); },
                           [](double x, double) { return 1.0 / x; });
}

// ---- softmax / layer_norm --------------------------------------------------

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto& sh = a.shape();
  if (axis >= sh.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "softmax axis " + std::to_string(axis) + " vs shape " + format_shape(sh));
  }
  std::size_t n = sh[axis];
  std::size_t inner = 1, outer = 1;
  for (std::size_t i = axis + 1; i < sh.size(); ++i) inner *= sh[i];
  for (std::size_t i = 0; i < axis; ++i) outer *= sh[i];

  auto out = make_op(sh, {a.node()});
  const auto& x = a.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      std::size_t base = o * n * inner + in;
      double mx = x[base];
      for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, x[base + k * inner]);
      double z = 0;
      for (std::size_t k = 0; k < n; ++k) {
        double e = std::exp(x[base + k * inner] - mx);
        out->data[base + k * inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < n; ++k) out->data[base + k * inner] /= z;
    }
  }
  if (out->needs_grad) {
    out->backward_fn = [n, inner, outer](Node& self) {
      Node* p = self.parents[0].get();
      if (!p->needs_grad) return;
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          std::size_t base = o * n * inner + in;
          double dot = 0;
          for (std::size_t k = 0; k < n; ++k) {
            dot += self.grad[base + k * inner] * self.data[base + k * inner];
          }
          for (std::size_t k = 0; k < n; ++k) {
            std::size_t i = base + k * inner;
            p->grad[i] += self.data[i] * (self.grad[i] - dot);
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor layer_norm(const Tensor& a, std::size_t n_trailing, double eps) {
  const auto& sh = a.shape();
  if (n_trailing == 0 || n_trailing > sh.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "layer_norm over " + std::to_string(n_trailing) + " trailing axes vs shape " +
                    format_shape(sh));
  }
  std::size_t m = 1;
  for (std::size_t i = sh.size() - n_trailing; i < sh.size(); ++i) m *= sh[i];
  std::size_t groups = a.numel() / m;

  auto out = make_op(sh, {a.node()});
  std::vector<double> inv_std(groups);
  const auto& x = a.data();
  for (std::size_t g = 0; g < groups; ++g) {
    const double* xg = x.data() + g * m;
    double mean = 0;
    for (std::size_t i = 0; i < m; ++i) mean += xg[i];
    mean /= double(m);
    double var = 0;
    for (std::size_t i = 0; i < m; ++i) var += (xg[i] - mean) * (xg[i] - mean);
    var /= double(m);
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[g] = is;
    for (std::size_t i = 0; i < m; ++i) out->data[g * m + i] = (xg[i] - mean) * is;
  }
  if (out->needs_grad) {
    out->backward_fn = [m, groups, inv_std = std::move(inv_std)](Node& self) {
      Node* p = self.parents[0].get();
      if (!p->needs_grad) return;
      for (std::size_t g = 0; g < groups; ++g) {
        const double* y = self.data.data() + g * m;
        const double* gy = self.grad.data() + g * m;
        double mean_g = 0, mean_gy = 0;
        for (std::size_t i = 0; i < m; ++i) {
          mean_g += gy[i];
          mean_gy += gy[i] * y[i];
        }
        mean_g /= double(m);
        mean_gy /= double(m);
        double* gx = p->grad.data() + g * m;
        for (std::size_t i = 0; i < m; ++i) {
          gx[i] += inv_std[g] * (gy[i] - mean_g - y[i] * mean_gy);
        }
      }
    };
  }
  return Tensor(out);
}

// ---- reductions ------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
  auto out = make_op({1}, {a.node()});
  double acc = 0;
  for (double v : a.data()) acc += v;
  out->data[0] = acc;
  if (out->needs_grad) {
    out->backward_fn = [](Node& self) {
      Node* p = self.parents[0].get();
      if (!p->needs_grad) return;
      for (double& g : p->grad) g += self.grad[0];
    };
  }
  return Tensor(out);
}

Tensor mean_all(const Tensor& a) { return mul_scalar(sum_all(a), 1.0 / double(a.numel())); }

Tensor global_avg_pool(const Tensor& a, std::size_t n_trailing) {
  const auto& sh = a.shape();
  if (n_trailing == 0 || n_trailing >= sh.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "global_avg_pool over " + std::to_string(n_trailing) +
                    " trailing axes vs shape " + format_shape(sh));
  }
  std::vector<std::size_t> lead(sh.begin(), sh.end() - std::ptrdiff_t(n_trailing));
  std::size_t m = a.numel() / shape_numel(lead);
  auto out = make_op(lead, {a.node()});
  for (std::size_t g = 0; g < out->data.size(); ++g) {
    double acc = 0;
    const double* xg = a.data().data() + g * m;
    for (std::size_t i = 0; i < m; ++i) acc += xg[i];
    out->data[g] = acc / double(m);
  }
  if (out->needs_grad) {
    out->backward_fn = [m](Node& self) {
      Node* p = self.parents[0].get();
      if (!p->needs_grad) return;
      for (std::size_t g = 0; g < self.data.size(); ++g) {
        double gv = self.grad[g] / double(m);
        double* gx = p->grad.data() + g * m;
        for (std::size_t i = 0; i < m; ++i) gx[i] += gv;
      }
    };
  }
  return Tensor(out);
}

Tensor mean_axis0(const Tensor& a) {
  const auto& sh = a.shape();
  if (sh.size() < 2) {
    throw Error(ErrorCode::ShapeMismatch, "mean_axis0 needs rank >= 2, got " + format_shape(sh));
  }
  std::size_t n0 = sh[0];
  std::vector<std::size_t> rest(sh.begin() + 1, sh.end());
  std::size_t m = shape_numel(rest);
  auto out = make_op(rest, {a.node()});
  for (std::size_t k = 0; k < n0; ++k) {
    const double* xr = a.data().data() + k * m;
    for (std::size_t i = 0; i < m; ++i) out->data[i] += xr[i];
  }
  for (std::size_t i = 0; i < m; ++i) out->data[i] /= double(n0);
  if (out->needs_grad) {
    out->backward_fn = [n0, m](Node& self) {
      Node* p = self.parents[0].get();
      if (!p->needs_grad) return;
      for (std::size_t k = 0; k < n0; ++k) {
        double* gx = p->grad.data() + k * m;
        for (std::size_t i = 0; i < m; ++i) gx[i] += self.grad[i] / double(n0);
      }
    };
  }
  return Tensor(out);
}

// ---- shape manipulation ------------------------------------------------

Tensor reshape(const Tensor& a, const std::vector<std::size_t>& shape) {
  if (shape_numel(shape) != a.numel()) {
    throw Error(ErrorCode::ShapeMismatch, "reshape: " + format_shape(a.shape()) + " to " +
                                              format_shape(shape));
  }
  auto out = make_op(shape, {a.node()});
  out->data = a.data();
  if (out->needs_grad) {
    out->backward_fn = [](Node& self) {
      Node* p = self.parents[0].get();
      if (!p->needs_grad) return;
      for (std::size_t i = 0; i < self.data.size(); ++i) p->grad[i] += self.grad[i];
    };
  }
  return Tensor(out);
}

namespace {

std::vector<std::size_t> row_major_strides(const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

}  // namespace

Tensor transpose(const Tensor& a, const std::vector<std::size_t>& perm) {
  const auto& sh = a.shape();
  if (perm.size() != sh.size()) {
    throw Error(ErrorCode::ShapeMismatch, "transpose: perm rank " + std::to_string(perm.size()) +
                                              " vs shape " + format_shape(sh));
  }
  std::vector<bool> seen(perm.size(), false);
  std::vector<std::size_t> out_shape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= sh.size() || seen[perm[i]]) {
      throw Error(ErrorCode::ShapeMismatch, "transpose: invalid permutation");
    }
    seen[perm[i]] = true;
    out_shape[i] = sh[perm[i]];
  }
  auto in_strides = row_major_strides(sh);
  auto out_strides = row_major_strides(out_shape);
  // in_index = sum over output axes of out_coord[i] * in_strides[perm[i]]
  std::vector<std::size_t> gather(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) gather[i] = in_strides[perm[i]];

  auto out = make_op(out_shape, {a.node()});
  std::size_t total = a.numel();
  std::size_t rank = out_shape.size();
  for (std::size_t o = 0; o < total; ++o) {
    std::size_t rem = o, src = 0;
    for (std::size_t i = 0; i < rank; ++i) {
      std::size_t c = rem / out_strides[i];
      rem %= out_strides[i];
      src += c * gather[i];
    }
    out->data[o] = a.data()[src];
  }
  if (out->needs_grad) {
    out->backward_fn = [out_strides, gather, rank](Node& self) {
      Node* p = self.parents[0].get();
      if (!p->needs_grad) return;
      for (std::size_t o = 0; o < self.data.size(); ++o) {
        std::size_t rem = o, src = 0;
        for (std::size_t i = 0; i < rank; ++i) {
          std::size_t c = rem / out_strides[i];
          rem %= out_strides[i];
          src += c * gather[i];
        }
        p->grad[src] += self.grad[o];
      }
    };
  }
  return Tensor(out);
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat of zero tensors");
  const auto& sh0 = parts[0].shape();
  if (axis >= sh0.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "concat axis " + std::to_string(axis) + " vs shape " + format_shape(sh0));
  }
  std::vector<std::size_t> out_shape = sh0;
  std::size_t axis_total = sh0[axis];
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const auto& shk = parts[k].shape();
    if (shk.size() != sh0.size()) {
      throw Error(ErrorCode::ShapeMismatch, "concat: rank mismatch " + format_shape(sh0) +
                                                " vs " + format_shape(shk));
    }
    for (std::size_t i = 0; i < shk.size(); ++i) {
      if (i != axis && shk[i] != sh0[i]) {
        throw Error(ErrorCode::ShapeMismatch, "concat: shapes " + format_shape(sh0) + " vs " +
                                                  format_shape(shk));
      }
    }
    axis_total += shk[axis];
  }
  out_shape[axis] = axis_total;

  std::size_t inner = 1, outer = 1;
  for (std::size_t i = axis + 1; i < sh0.size(); ++i) inner *= sh0[i];
  for (std::size_t i = 0; i < axis; ++i) outer *= sh0[i];

  std::vector<std::shared_ptr<Node>> parent_nodes;
  parent_nodes.reserve(parts.size());
  for (const Tensor& t : parts) parent_nodes.push_back(t.node());
  auto out = make_op(out_shape, parent_nodes);

  std::vector<std::size_t> axis_sizes(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) axis_sizes[k] = parts[k].shape()[axis];

  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    std::size_t ak = axis_sizes[k];
    const auto& src = parts[k].data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(src.begin() + std::ptrdiff_t(o * ak * inner),
                src.begin() + std::ptrdiff_t((o + 1) * ak * inner),
                out->data.begin() + std::ptrdiff_t((o * axis_total + offset) * inner));
    }
    offset += ak;
  }
  if (out->needs_grad) {
    out->backward_fn = [axis_sizes, axis_total, inner, outer](Node& self) {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < self.parents.size(); ++k) {
        Node* p = self.parents[k].get();
        std::size_t ak = axis_sizes[k];
        if (p->needs_grad) {
          for (std::size_t o = 0; o < outer; ++o) {
            const double* g = self.grad.data() + (o * axis_total + offset) * inner;
            double* gp = p->grad.data() + o * ak * inner;
            for (std::size_t i = 0; i < ak * inner; ++i) gp[i] += g[i];
          }
        }
        offset += ak;
      }
    };
  }
  return Tensor(out);
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len) {
  const auto& sh = a.shape();
  if (axis >= sh.size() || start + len > sh[axis] || len == 0) {
    throw Error(ErrorCode::ShapeMismatch,
                "slice [" + std::to_string(start) + "," + std::to_string(start + len) +
                    ") on axis " + std::to_string(axis) + " of " + format_shape(sh));
  }
  std::size_t inner = 1, outer = 1;
  for (std::size_t i = axis + 1; i < sh.size(); ++i) inner *= sh[i];
  for (std::size_t i = 0; i < axis; ++i) outer *= sh[i];
  std::size_t n_axis = sh[axis];

  std::vector<std::size_t> out_shape = sh;
  out_shape[axis] = len;
  auto out = make_op(out_shape, {a.node()});
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = a.data().data() + (o * n_axis + start) * inner;
    double* dst = out->data.data() + o * len * inner;
    std::copy(src, src + len * inner, dst);
  }
  if (out->needs_grad) {
    out->backward_fn = [inner, outer, n_axis, start, len](Node& self) {
      Node* p = self.parents[0].get();
      if (!p->needs_grad) return;
      for (std::size_t o = 0; o < outer; ++o) {
        const double* g = self.grad.data() + o * len * inner;
        double* gp = p->grad.data() + (o * n_axis + start) * inner;
        for (std::size_t i = 0; i < len * inner; ++i) gp[i] += g[i];
      }
    };
  }
  return Tensor(out);
}

// ---- axis-0 broadcasts -----------------------------------------------------

namespace {

Tensor channel_op(const Tensor& x, const Tensor& b, const char* name, bool is_mul) {
  const auto& sh = x.shape();
  if (sh.empty() || b.shape().size() != 1 || b.shape()[0] != sh[0]) {
    throw Error(ErrorCode::ShapeMismatch, std::string(name) + ": shapes " + format_shape(sh) +
                                              " vs " + format_shape(b.shape()));
  }
  std::size_t C = sh[0];
  std::size_t m = x.numel() / C;
  auto out = make_op(sh, {x.node(), b.node()});
  for (std::size_t c = 0; c < C; ++c) {
    const double* xr = x.data().data() + c * m;
    double bv = b.data()[c];
    double* orow = out->data.data() + c * m;
    for (std::size_t i = 0; i < m; ++i) orow[i] = is_mul ? xr[i] * bv : xr[i] + bv;
  }
  if (out->needs_grad) {
    out->backward_fn = [C, m, is_mul](Node& self) {
      Node* px = self.parents[0].get();
      Node* pb = self.parents[1].get();
      for (std::size_t c = 0; c < C; ++c) {
        const double* g = self.grad.data() + c * m;
        double bv = pb->data[c];
        if (px->needs_grad) {
          double* gx = px->grad.data() + c * m;
          for (std::size_t i = 0; i < m; ++i) gx[i] += is_mul ? g[i] * bv : g[i];
        }
        if (pb->needs_grad) {
          const double* xr = px->data.data() + c * m;
          double acc = 0;
          for (std::size_t i = 0; i < m; ++i) acc += is_mul ? g[i] * xr[i] : g[i];
          pb->grad[c] += acc;
        }
      }
    };
  }
  return Tensor(out);
}

}  // namespace

Tensor add_cbias(const Tensor& x, const Tensor& b) { return channel_op(x, b, "add_cbias", false); }
Tensor cmul(const Tensor& x, const Tensor& g) { return channel_op(x, g, "cmul", true); }

Tensor he_uniform(const std::vector<std::size_t>& shape, std::size_t fan_in, Rng& rng) {
  double bound = std::sqrt(6.0 / double(fan_in));
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = uniform_in(rng, -bound, bound);
  return Tensor::from(std::move(data), shape, true);
}

}  // namespace locust::tk
