#pragma once

#include <vector>

#include "birgat/rng.hpp"
#include "birgat/tape.hpp"
#include "birgat/tensor.hpp"

namespace birgat::ops {

// ---- elementwise / reductions -------------------------------------------

/// Same shape, or `b` a {1,c} row broadcast over the rows of `a`.
TensorPtr add(Tape& t, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape& t, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape& t, const TensorPtr& a, const TensorPtr& b);  // hadamard
TensorPtr scale(Tape& t, const TensorPtr& a, double c);
TensorPtr exp(Tape& t, const TensorPtr& a);
TensorPtr log(Tape& t, const TensorPtr& a);
TensorPtr tanh(Tape& t, const TensorPtr& a);
TensorPtr sigmoid(Tape& t, const TensorPtr& a);
TensorPtr relu(Tape& t, const TensorPtr& a);
TensorPtr clamp_min(Tape& t, const TensorPtr& a, double floor);
TensorPtr sum(Tape& t, const TensorPtr& a);   // {1,1}
TensorPtr mean(Tape& t, const TensorPtr& a);  // {1,1}
TensorPtr mean_over_rows(Tape& t, const TensorPtr& a);  // {1,c}

// ---- linear algebra ------------------------------------------------------

TensorPtr matmul(Tape& t, const TensorPtr& a, const TensorPtr& b);
/// a @ b^T without materializing the transpose.
TensorPtr matmul_nt(Tape& t, const TensorPtr& a, const TensorPtr& b);
TensorPtr transpose(Tape& t, const TensorPtr& a);

// ---- shape plumbing ------------------------------------------------------

TensorPtr concat_rows(Tape& t, const std::vector<TensorPtr>& parts);
TensorPtr concat_cols(Tape& t, const std::vector<TensorPtr>& parts);
TensorPtr slice_rows(Tape& t, const TensorPtr& a, int r0, int r1);
TensorPtr slice_cols(Tape& t, const TensorPtr& a, int c0, int c1);
/// Rows of `table` at `ids` (embedding lookup / row gather).
TensorPtr embedding_lookup(Tape& t, const TensorPtr& table, const std::vector<int>& ids);
inline TensorPtr gather_rows(Tape& t, const TensorPtr& table, const std::vector<int>& ids) {
  return embedding_lookup(t, table, ids);
}
/// Per-row select: out_i = use_a[i] ? a_i : b_i.
TensorPtr where_rows(Tape& t, const std::vector<uint8_t>& use_a, const TensorPtr& a, const TensorPtr& b);
TensorPtr pick(Tape& t, const TensorPtr& a, int r, int c);  // {1,1}

// ---- probabilistic -------------------------------------------------------

TensorPtr softmax_rows(Tape& t, const TensorPtr& a);
TensorPtr layer_norm(Tape& t, const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias, double eps);
/// Train mode: keeps activations with prob 1-rate, scaled by 1/(1-rate).
/// Eval mode or rate==0: identity (returns x unchanged).
TensorPtr dropout(Tape& t, const TensorPtr& x, double rate, bool train, Rng& rng);
/// -sum_i logp[i, target_i]; logp holds log-probabilities.
TensorPtr cross_entropy(Tape& t, const TensorPtr& logp, const std::vector<int>& targets);

// ---- attention -----------------------------------------------------------

/// Attention support as a CSR graph over (query row, key/value row) pairs.
/// `rel` optionally tags each edge with a relation-embedding row.
struct AttnGraph {
  int n_q = 0;
  int n_kv = 0;
  std::vector<int> offsets;  // n_q + 1
  std::vector<int> nbr;      // key/value row per edge
  std::vector<int> rel;      // relation row per edge; empty if relations unused

  bool has_rel() const { return !rel.empty(); }
  int edge_count() const { return static_cast<int>(nbr.size()); }

  static AttnGraph dense_bipartite(int n_q, int n_kv);
  static AttnGraph causal(int n);
  /// Complete graph over n positions; relation row = clip(j-i, +-k) + k when
  /// with_distance, giving a (2k+1)-row relation table indexed by distance.
  static AttnGraph complete(int n, int distance_clip, bool with_distance);
};

/// Multi-head attention over an explicit support graph with optional
/// per-edge relation embeddings added to keys and values:
///   e_ij = q_i . (k_j + z_rel(i,j)) / scale_div   for j in N(i)
///   a_i  = softmax over N(i);  out_i = sum_j a_ij (v_j + z_rel(i,j))
/// qp/kp/vp are already projected, heads laid out as column blocks. zp is
/// {R, head_dim}, shared across heads; pass nullptr when the graph has no
/// relations. attn_dropout is applied to weights post-softmax in train mode.
TensorPtr graph_attention(Tape& t, const TensorPtr& qp, const TensorPtr& kp, const TensorPtr& vp,
                          const TensorPtr& zp, const AttnGraph& g, int heads, double scale_div,
                          double attn_dropout, bool train, Rng* rng);

/// Mean over heads of dense cross-attention weights: {Tq, S} rows sum to 1.
TensorPtr pointer_weights(Tape& t, const TensorPtr& qp, const TensorPtr& kp, int heads, double scale_div);

// ---- numeric hygiene -----------------------------------------------------

bool all_finite(const Tensor& a);
void check_finite(const Tensor& a, const char* context);

}  // namespace birgat::ops
