#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "locust/common.hpp"

namespace locust::tk {

// One value in the computation trace. Ops create fresh nodes; leaf nodes
// created with requires_grad keep their .grad across backward calls until
// explicitly zeroed, so gradients accumulate additively.
struct Node {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // sized on demand
  bool requires_grad = false;
  bool needs_grad = false;  // this node or an ancestor requires grad
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::size_t numel() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

inline std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

  static Tensor zeros(const std::vector<std::size_t>& shape, bool requires_grad = false);
  static Tensor full(const std::vector<std::size_t>& shape, double v,
                     bool requires_grad = false);
  static Tensor from(std::vector<double> data, const std::vector<std::size_t>& shape,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return n_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return n_->shape; }
  std::size_t numel() const { return n_->data.size(); }
  std::vector<double>& data() { return n_->data; }
  const std::vector<double>& data() const { return n_->data; }
  std::vector<double>& grad() {
    n_->ensure_grad();
    return n_->grad;
  }
  bool requires_grad() const { return n_->requires_grad; }
  double item() const;
  void zero_grad() { n_->grad.assign(n_->data.size(), 0.0); }

  const std::shared_ptr<Node>& node() const { return n_; }

  // Reverse-mode sweep from a scalar root.
  void backward() const;

 private:
  std::shared_ptr<Node> n_;
};

// Topologically ordered trace of every grad-needing node reachable from a
// root. Backward walks it in reverse exactly once per node.
class Graph {
 public:
  static Graph trace(const Tensor& root);
  std::size_t size() const { return order_.size(); }
  // Seeds the root gradient and runs every vector-Jacobian product.
  void run_backward(double seed = 1.0);

 private:
  std::vector<std::shared_ptr<Node>> order_;  // parents before children
};

// ---- elementwise / linear algebra -------------------------------------

Tensor add(const Tensor& a, const Tensor& b);  // b: same shape, scalar, or trailing-suffix broadcast
Tensor sub(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor mul(const Tensor& a, const Tensor& b);  // same broadcast rules as add
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor matmul(const Tensor& a, const Tensor& b);  // [M,K] x [K,N]

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);

Tensor softmax(const Tensor& a, std::size_t axis);
// Normalizes over the trailing n_trailing axes of each leading index.
Tensor layer_norm(const Tensor& a, std::size_t n_trailing, double eps = 1e-5);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
// Mean over the trailing n_trailing axes: [C,T,H,W] with 3 -> [C].
Tensor global_avg_pool(const Tensor& a, std::size_t n_trailing);
Tensor mean_axis0(const Tensor& a);

// ---- shape manipulation ------------------------------------------------

Tensor reshape(const Tensor& a, const std::vector<std::size_t>& shape);
Tensor transpose(const Tensor& a, const std::vector<std::size_t>& perm);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len);

// ---- axis-0 broadcasts (channel bias / scale) ---------------------------

Tensor add_cbias(const Tensor& x, const Tensor& b);  // y[c,...] = x[c,...] + b[c]
Tensor cmul(const Tensor& x, const Tensor& g);       // y[c,...] = x[c,...] * g[c]

// ---- initialization ------------------------------------------------------

// Uniform in [-sqrt(6/fan_in), sqrt(6/fan_in)].
Tensor he_uniform(const std::vector<std::size_t>& shape, std::size_t fan_in, Rng& rng);

}  // namespace locust::tk
