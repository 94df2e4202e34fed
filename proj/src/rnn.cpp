#include "locust/ops.hpp"

namespace locust::tk {

// Gate order throughout: input, forget, cell, output.

RecurrentState lstm_cell(const Tensor& x, const RecurrentState& prev, const LstmParams& p) {
  const auto& ws = p.w_input.shape();
  if (ws.size() != 2 || ws[0] % 4 != 0) {
    throw Error(ErrorCode::ShapeMismatch, "lstm_cell: w_input " + format_shape(ws));
  }
  std::size_t hidden = ws[0] / 4;
  std::size_t in_dim = ws[1];
  if (x.shape() != std::vector<std::size_t>{in_dim}) {
    throw Error(ErrorCode::ShapeMismatch, "lstm_cell: input " + format_shape(x.shape()) +
                                              " vs w_input " + format_shape(ws));
  }

  Tensor gates = add(
      add(reshape(matmul(p.w_input, reshape(x, {in_dim, 1})), {4 * hidden}),
          reshape(matmul(p.w_hidden, reshape(prev.h, {hidden, 1})), {4 * hidden})),
      p.bias);
  Tensor gi = sigmoid(slice(gates, 0, 0, hidden));
  Tensor gf = sigmoid(slice(gates, 0, hidden, hidden));
  Tensor gc = tanh_t(slice(gates, 0, 2 * hidden, hidden));
  Tensor go = sigmoid(slice(gates, 0, 3 * hidden, hidden));

  Tensor c_next = add(mul(gf, prev.c), mul(gi, gc));
  Tensor h_next = mul(go, tanh_t(c_next));
  return {h_next, c_next};
}

RecurrentState convlstm_cell(const Tensor& x, const RecurrentState& prev,
                             const ConvLstmParams& p) {
  const auto& ws = p.w_input.shape();
  if (ws.size() != 4 || ws[0] % 4 != 0) {
    throw Error(ErrorCode::ShapeMismatch, "convlstm_cell: w_input " + format_shape(ws));
  }
  std::size_t hidden = ws[0] / 4;

  Tensor gates = add_cbias(
      add(conv2d(x, p.w_input, std::nullopt, 1, Pad::same),
          conv2d(prev.h, p.w_hidden, std::nullopt, 1, Pad::same)),
      p.bias);
  Tensor gi = sigmoid(slice(gates, 0, 0, hidden));
  Tensor gf = sigmoid(slice(gates, 0, hidden, hidden));
  Tensor gc = tanh_t(slice(gates, 0, 2 * hidden, hidden));
  Tensor go = sigmoid(slice(gates, 0, 3 * hidden, hidden));

  Tensor c_next = add(mul(gf, prev.c), mul(gi, gc));
  Tensor h_next = mul(go, tanh_t(c_next));
  return {h_next, c_next};
}

}  // namespace locust::tk
