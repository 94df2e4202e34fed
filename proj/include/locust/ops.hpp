#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "locust/tensor.hpp"

namespace locust::tk {

enum class Pad { same, valid };

// Cross-correlation (no kernel flip). x [C,H,W], w [F,C,kh,kw] -> [F,H',W'].
// Same padding preserves H,W at stride 1 (odd kernels).
Tensor conv2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias,
              std::size_t stride = 1, Pad pad = Pad::same);

// x [C,T,H,W], w [F,C,kt,kh,kw] -> [F,T',H',W']; stride 1.
Tensor conv3d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias,
              Pad pad = Pad::same);

// Adjoint of stride-s valid conv2d. x [C,H,W], w [C,F,kh,kw] ->
// [F,(H-1)s+kh,(W-1)s+kw].
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias,
                        std::size_t stride = 2);

// ---- recurrent cells (compositions of primitive ops) --------------------

struct RecurrentState {
  Tensor h;
  Tensor c;
};

struct LstmParams {
  Tensor w_input;   // [4H, D]  gate order: input, forget, cell, output
  Tensor w_hidden;  // [4H, H]
  Tensor bias;      // [4H]
};

RecurrentState lstm_cell(const Tensor& x, const RecurrentState& prev, const LstmParams& p);

struct ConvLstmParams {
  Tensor w_input;   // [4Ch, Cin, k, k]
  Tensor w_hidden;  // [4Ch, Ch, k, k]
  Tensor bias;      // [4Ch]
};

// x [Cin,H,W], state h/c [Ch,H,W]; convolutions use same padding.
RecurrentState convlstm_cell(const Tensor& x, const RecurrentState& prev,
                             const ConvLstmParams& p);

// ---- attention / patch embedding ----------------------------------------

struct AttentionParams {
  Tensor w_q, w_k, w_v, w_o;  // each [d, d]
  Tensor b_q, b_k, b_v, b_o;  // each [d]
};

// x [tokens, d] -> [tokens, d]; per-head softmax rows sum to 1.
Tensor multi_head_attention(const Tensor& x, const AttentionParams& p, std::size_t heads);

// chip [t, b, H, W], square patches of side `patch`, temporal tubelet 1.
// w_embed [embed_dim, b*patch*patch], b_embed [embed_dim].
// Tokens ordered frame-major, then patch row, then patch column.
Tensor patch_embed_3d(const Tensor& chip, std::size_t patch, const Tensor& w_embed,
                      const Tensor& b_embed);

// ---- losses ---------------------------------------------------------------

// logits [C]; loss = logsumexp(logits) - logits[label].
Tensor cross_entropy(const Tensor& logits, std::size_t label);

// Pixel mask values: 0/1 class labels, -1 ignore. Averages the per-pixel
// cross-entropy over non-ignored pixels; throws EmptyMask if none.
Tensor masked_pixel_cross_entropy(const Tensor& logit_map,
                                  const std::vector<std::int8_t>& mask);

// scores [N], labels in {-1,+1}; mean of max(0, margin - y*s).
Tensor hinge_loss(const Tensor& scores, const std::vector<int>& labels, double margin = 1.0);

}  // namespace locust::tk
