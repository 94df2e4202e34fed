#include <cmath>

#include "locust/ops.hpp"

namespace locust::tk {

Tensor multi_head_attention(const Tensor& x, const AttentionParams& p, std::size_t heads) {
  const auto& xs = x.shape();
  if (xs.size() != 2) {
    throw Error(ErrorCode::ShapeMismatch, "attention: tokens " + format_shape(xs));
  }
  std::size_t d = xs[1];
  if (heads == 0 || d % heads != 0) {
    throw Error(ErrorCode::ShapeMismatch, "attention: dim " + std::to_string(d) +
                                              " not divisible by " + std::to_string(heads) +
                                              " heads");
  }
  std::size_t dh = d / heads;

  // x.W^T + b, with W stored [d_out, d_in].
  auto project = [&](const Tensor& w, const Tensor& b) {
    return add(matmul(x, transpose(w, {1, 0})), b);
  };
  Tensor q = project(p.w_q, p.b_q);
  Tensor k = project(p.w_k, p.b_k);
  Tensor v = project(p.w_v, p.b_v);

  double scale = 1.0 / std::sqrt(double(dh));
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice(q, 1, h * dh, dh);  // [N, dh]
    Tensor kh = slice(k, 1, h * dh, dh);
    Tensor vh = slice(v, 1, h * dh, dh);
    Tensor scores = mul_scalar(matmul(qh, transpose(kh, {1, 0})), scale);  // [N, N]
    Tensor attn = softmax(scores, 1);
    head_outputs.push_back(matmul(attn, vh));  // [N, dh]
  }
  Tensor merged = heads == 1 ? head_outputs[0] : concat(head_outputs, 1);
  return add(matmul(merged, transpose(p.w_o, {1, 0})), p.b_o);
}

Tensor patch_embed_3d(const Tensor& chip, std::size_t patch, const Tensor& w_embed,
                      const Tensor& b_embed) {
  const auto& cs = chip.shape();
  if (cs.size() != 4) {
    throw Error(ErrorCode::ShapeMismatch, "patch_embed_3d: chip " + format_shape(cs));
  }
  std::size_t t = cs[0], b = cs[1], H = cs[2], W = cs[3];
  if (patch == 0 || H % patch != 0 || W % patch != 0) {
    throw Error(ErrorCode::ShapeMismatch, "patch_embed_3d: patch " + std::to_string(patch) +
                                              " does not tile " + format_shape(cs));
  }
  std::size_t gh = H / patch, gw = W / patch;
  std::size_t flat = b * patch * patch;
  const auto& ws = w_embed.shape();
  if (ws.size() != 2 || ws[1] != flat) {
    throw Error(ErrorCode::ShapeMismatch, "patch_embed_3d: w_embed " + format_shape(ws) +
                                              " vs patch volume " + std::to_string(flat));
  }

  // [t,b,gh,p,gw,p] -> [t,gh,gw,b,p,p] -> [t*gh*gw, b*p*p]
  Tensor patches = reshape(
      transpose(reshape(chip, {t, b, gh, patch, gw, patch}), {0, 2, 4, 1, 3, 5}),
      {t * gh * gw, flat});
  return add(matmul(patches, transpose(w_embed, {1, 0})), b_embed);
}

}  // namespace locust::tk
