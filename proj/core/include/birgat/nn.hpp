#pragma once

#include <utility>

#include "birgat/ops.hpp"

namespace birgat {

/// Fused LSTM weights; gate order along columns is (input, forget, cell, output).
/// w_x: {in_dim, 4*hidden}, w_h: {hidden, 4*hidden}, b: {1, 4*hidden}.
/// The four column blocks of w_x and the four of w_h are the 8 weight blocks.
struct LstmWeights {
  TensorPtr w_x, w_h, b;
  int hidden() const { return w_h->rows(); }
};

/// One step of the standard LSTM cell over a batch of rows.
/// x: {B, in}, h: {B, hidden}, c: {B, hidden} -> (h', c').
std::pair<TensorPtr, TensorPtr> lstm_cell(Tape& t, const TensorPtr& x, const TensorPtr& h,
                                          const TensorPtr& c, const LstmWeights& w);

/// x @ w (+ b row-broadcast when b != nullptr).
TensorPtr linear(Tape& t, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b = nullptr);

}  // namespace birgat
