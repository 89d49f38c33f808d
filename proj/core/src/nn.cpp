#include "birgat/nn.hpp"

namespace birgat {

std::pair<TensorPtr, TensorPtr> lstm_cell(Tape& t, const TensorPtr& x, const TensorPtr& h,
                                          const TensorPtr& c, const LstmWeights& w) {
  using namespace ops;
  const int hid = w.hidden();
  if (x->cols() != w.w_x->rows() || h->cols() != hid || c->cols() != hid || w.w_x->cols() != 4 * hid)
    throw ShapeMismatch("lstm_cell: inconsistent shapes x" + x->shape_str() + " h" + h->shape_str() +
                        " w_x" + w.w_x->shape_str());
  auto gates = add(t, add(t, matmul(t, x, w.w_x), matmul(t, h, w.w_h)), w.b);
  auto i = sigmoid(t, slice_cols(t, gates, 0, hid));
  auto f = sigmoid(t, slice_cols(t, gates, hid, 2 * hid));
  auto g = ops::tanh(t, slice_cols(t, gates, 2 * hid, 3 * hid));
  auto o = sigmoid(t, slice_cols(t, gates, 3 * hid, 4 * hid));
  auto c_next = add(t, mul(t, f, c), mul(t, i, g));
  auto h_next = mul(t, o, ops::tanh(t, c_next));
  return {h_next, c_next};
}

TensorPtr linear(Tape& t, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
  auto y = ops::matmul(t, x, w);
  return b ? ops::add(t, y, b) : y;
}

}  // namespace birgat
