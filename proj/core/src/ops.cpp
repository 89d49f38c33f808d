#include "birgat/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace birgat::ops {

namespace {

bool want_grad(const Tape& t, std::initializer_list<const TensorPtr*> ins) {
  if (!t.grad_enabled()) return false;
  for (const TensorPtr* p : ins)
    if (*p && (*p)->requires_grad) return true;
  return false;
}

TensorPtr out_like(std::vector<int> shape, bool rg) { return make_tensor(std::move(shape), rg); }

void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda, const double* b,
          int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k, alpha,
              a, lda, b, ldb, beta, c, ldc);
}

}  // namespace

// ---------------------------------------------------------------- add / sub

static TensorPtr add_sub(Tape& t, const TensorPtr& a, const TensorPtr& b, double sign, const char* name) {
  const bool bcast = b->rows() == 1 && a->rows() > 1 && a->cols() == b->cols() && b->shape.size() == 2;
  if (!bcast && a->shape != b->shape) shape_error(name, *a, *b);
  auto out = out_like(a->shape, want_grad(t, {&a, &b}));
  const size_t n = a->data.size();
  if (bcast) {
    const int c = a->cols();
    for (int r = 0; r < a->rows(); ++r) {
      const double* ap = a->row_ptr(r);
      double* op = out->row_ptr(r);
      for (int j = 0; j < c; ++j) op[j] = ap[j] + sign * b->data[j];
    }
  } else {
    for (size_t i = 0; i < n; ++i) out->data[i] = a->data[i] + sign * b->data[i];
  }
  if (out->requires_grad)
    t.record([a, b, out, sign, bcast] {
      if (a->requires_grad)
        for (size_t i = 0; i < a->data.size(); ++i) a->grad[i] += out->grad[i];
      if (b->requires_grad) {
        if (bcast) {
          const int c = out->cols();
          for (int r = 0; r < out->rows(); ++r) {
            const double* gp = out->grad.data() + static_cast<size_t>(r) * c;
            for (int j = 0; j < c; ++j) b->grad[j] += sign * gp[j];
          }
        } else {
          for (size_t i = 0; i < b->data.size(); ++i) b->grad[i] += sign * out->grad[i];
        }
      }
    });
  return out;
}

TensorPtr add(Tape& t, const TensorPtr& a, const TensorPtr& b) { return add_sub(t, a, b, 1.0, "add"); }
TensorPtr sub(Tape& t, const TensorPtr& a, const TensorPtr& b) { return add_sub(t, a, b, -1.0, "sub"); }

TensorPtr mul(Tape& t, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(*a, *b, "mul");
  auto out = out_like(a->shape, want_grad(t, {&a, &b}));
  for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] * b->data[i];
  if (out->requires_grad)
    t.record([a, b, out] {
      if (a->requires_grad)
        for (size_t i = 0; i < a->data.size(); ++i) a->grad[i] += out->grad[i] * b->data[i];
      if (b->requires_grad)
        for (size_t i = 0; i < b->data.size(); ++i) b->grad[i] += out->grad[i] * a->data[i];
    });
  return out;
}

TensorPtr scale(Tape& t, const TensorPtr& a, double c) {
  auto out = out_like(a->shape, want_grad(t, {&a}));
  for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = c * a->data[i];
  if (out->requires_grad)
    t.record([a, out, c] {
      for (size_t i = 0; i < a->data.size(); ++i) a->grad[i] += c * out->grad[i];
    });
  return out;
}

// ------------------------------------------------------------- unary maps

template <class F, class G>
static TensorPtr unary(Tape& t, const TensorPtr& a, F fwd, G bwd) {
  auto out = out_like(a->shape, want_grad(t, {&a}));
  for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = fwd(a->data[i]);
  if (out->requires_grad)
    t.record([a, out, bwd] {
      for (size_t i = 0; i < a->data.size(); ++i) a->grad[i] += bwd(a->data[i], out->data[i]) * out->grad[i];
    });
  return out;
}

TensorPtr exp(Tape& t, const TensorPtr& a) {
  return unary(t, a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}
TensorPtr log(Tape& t, const TensorPtr& a) {
  return unary(t, a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}
TensorPtr tanh(Tape& t, const TensorPtr& a) {
  return unary(t, a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}
TensorPtr sigmoid(Tape& t, const TensorPtr& a) {
  return unary(t, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}
TensorPtr relu(Tape& t, const TensorPtr& a) {
  return unary(t, a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}
TensorPtr clamp_min(Tape& t, const TensorPtr& a, double floor) {
  return unary(t, a, [floor](double x) { return x < floor ? floor : x; },
               [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

// ------------------------------------------------------------- reductions

TensorPtr sum(Tape& t, const TensorPtr& a) {
  auto out = out_like({1, 1}, want_grad(t, {&a}));
  double s = 0.0;
  for (double x : a->data) s += x;
  out->data[0] = s;
  if (out->requires_grad)
    t.record([a, out] {
      const double g = out->grad[0];
      for (size_t i = 0; i < a->data.size(); ++i) a->grad[i] += g;
    });
  return out;
}

TensorPtr mean(Tape& t, const TensorPtr& a) {
  auto s = sum(t, a);
  return scale(t, s, 1.0 / static_cast<double>(a->numel()));
}

TensorPtr mean_over_rows(Tape& t, const TensorPtr& a) {
  const int r = a->rows(), c = a->cols();
  auto out = out_like({1, c}, want_grad(t, {&a}));
  for (int i = 0; i < r; ++i) {
    const double* ap = a->row_ptr(i);
    for (int j = 0; j < c; ++j) out->data[j] += ap[j];
  }
  for (int j = 0; j < c; ++j) out->data[j] /= r;
  if (out->requires_grad)
    t.record([a, out, r, c] {
      for (int i = 0; i < r; ++i) {
        double* gp = a->grad.data() + static_cast<size_t>(i) * c;
        for (int j = 0; j < c; ++j) gp[j] += out->grad[j] / r;
      }
    });
  return out;
}

// ---------------------------------------------------------- linear algebra

TensorPtr matmul(Tape& t, const TensorPtr& a, const TensorPtr& b) {
  if (a->cols() != b->rows()) shape_error("matmul", *a, *b);
  const int r = a->rows(), k = a->cols(), c = b->cols();
  auto out = out_like({r, c}, want_grad(t, {&a, &b}));
  gemm(false, false, r, c, k, 1.0, a->data.data(), k, b->data.data(), c, 0.0, out->data.data(), c);
  if (out->requires_grad)
    t.record([a, b, out, r, k, c] {
      if (a->requires_grad)
        gemm(false, true, r, k, c, 1.0, out->grad.data(), c, b->data.data(), c, 1.0, a->grad.data(), k);
      if (b->requires_grad)
        gemm(true, false, k, c, r, 1.0, a->data.data(), k, out->grad.data(), c, 1.0, b->grad.data(), c);
    });
  return out;
}

TensorPtr matmul_nt(Tape& t, const TensorPtr& a, const TensorPtr& b) {
  if (a->cols() != b->cols()) shape_error("matmul_nt", *a, *b);
  const int r = a->rows(), k = a->cols(), c = b->rows();
  auto out = out_like({r, c}, want_grad(t, {&a, &b}));
  gemm(false, true, r, c, k, 1.0, a->data.data(), k, b->data.data(), k, 0.0, out->data.data(), c);
  if (out->requires_grad)
    t.record([a, b, out, r, k, c] {
      if (a->requires_grad)
        gemm(false, false, r, k, c, 1.0, out->grad.data(), c, b->data.data(), k, 1.0, a->grad.data(), k);
      if (b->requires_grad)
        gemm(true, false, c, k, r, 1.0, out->grad.data(), c, a->data.data(), k, 1.0, b->grad.data(), k);
    });
  return out;
}

TensorPtr transpose(Tape& t, const TensorPtr& a) {
  const int r = a->rows(), c = a->cols();
  auto out = out_like({c, r}, want_grad(t, {&a}));
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out->at(j, i) = a->at(i, j);
  if (out->requires_grad)
    t.record([a, out, r, c] {
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) a->g(i, j) += out->grad[static_cast<size_t>(j) * r + i];
    });
  return out;
}

// ---------------------------------------------------------- shape plumbing

TensorPtr concat_rows(Tape& t, const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows: no parts");
  const int c = parts[0]->cols();
  int r = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p->cols() != c) shape_error("concat_rows", *parts[0], *p);
    r += p->rows();
    rg = rg || p->requires_grad;
  }
  auto out = out_like({r, c}, t.grad_enabled() && rg);
  int at = 0;
  for (const auto& p : parts) {
    std::memcpy(out->row_ptr(at), p->data.data(), p->data.size() * sizeof(double));
    at += p->rows();
  }
  if (out->requires_grad)
    t.record([parts, out, c] {
      int at = 0;
      for (const auto& p : parts) {
        if (p->requires_grad) {
          const double* gp = out->grad.data() + static_cast<size_t>(at) * c;
          for (size_t i = 0; i < p->data.size(); ++i) p->grad[i] += gp[i];
        }
        at += p->rows();
      }
    });
  return out;
}

TensorPtr concat_cols(Tape& t, const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no parts");
  const int r = parts[0]->rows();
  int c = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p->rows() != r) shape_error("concat_cols", *parts[0], *p);
    c += p->cols();
    rg = rg || p->requires_grad;
  }
  auto out = out_like({r, c}, t.grad_enabled() && rg);
  int at = 0;
  for (const auto& p : parts) {
    const int pc = p->cols();
    for (int i = 0; i < r; ++i) std::memcpy(out->row_ptr(i) + at, p->row_ptr(i), pc * sizeof(double));
    at += pc;
  }
  if (out->requires_grad)
    t.record([parts, out, r, c] {
      int at = 0;
      for (const auto& p : parts) {
        const int pc = p->cols();
        if (p->requires_grad)
          for (int i = 0; i < r; ++i) {
            const double* gp = out->grad.data() + static_cast<size_t>(i) * c + at;
            double* dst = p->grad.data() + static_cast<size_t>(i) * pc;
            for (int j = 0; j < pc; ++j) dst[j] += gp[j];
          }
        at += pc;
      }
    });
  return out;
}

TensorPtr slice_rows(Tape& t, const TensorPtr& a, int r0, int r1) {
  if (r0 < 0 || r1 > a->rows() || r0 >= r1)
    throw ShapeMismatch("slice_rows: bad range [" + std::to_string(r0) + "," + std::to_string(r1) +
                        ") for " + a->shape_str());
  const int c = a->cols();
  auto out = out_like({r1 - r0, c}, want_grad(t, {&a}));
  std::memcpy(out->data.data(), a->row_ptr(r0), out->data.size() * sizeof(double));
  if (out->requires_grad)
    t.record([a, out, r0, c] {
      double* dst = a->grad.data() + static_cast<size_t>(r0) * c;
      for (size_t i = 0; i < out->data.size(); ++i) dst[i] += out->grad[i];
    });
  return out;
}

TensorPtr slice_cols(Tape& t, const TensorPtr& a, int c0, int c1) {
  if (c0 < 0 || c1 > a->cols() || c0 >= c1)
    throw ShapeMismatch("slice_cols: bad range [" + std::to_string(c0) + "," + std::to_string(c1) +
                        ") for " + a->shape_str());
  const int r = a->rows(), c = a->cols(), w = c1 - c0;
  auto out = out_like({r, w}, want_grad(t, {&a}));
  for (int i = 0; i < r; ++i) std::memcpy(out->row_ptr(i), a->row_ptr(i) + c0, w * sizeof(double));
  if (out->requires_grad)
    t.record([a, out, r, c, c0, w] {
      for (int i = 0; i < r; ++i) {
        double* dst = a->grad.data() + static_cast<size_t>(i) * c + c0;
        const double* gp = out->grad.data() + static_cast<size_t>(i) * w;
        for (int j = 0; j < w; ++j) dst[j] += gp[j];
      }
    });
  return out;
}

TensorPtr embedding_lookup(Tape& t, const TensorPtr& table, const std::vector<int>& ids) {
  const int c = table->cols();
  for (int id : ids)
    if (id < 0 || id >= table->rows())
      throw ShapeMismatch("embedding_lookup: id " + std::to_string(id) + " out of range for " +
                          table->shape_str());
  auto out = out_like({static_cast<int>(ids.size()), c}, want_grad(t, {&table}));
  for (size_t i = 0; i < ids.size(); ++i)
    std::memcpy(out->row_ptr(static_cast<int>(i)), table->row_ptr(ids[i]), c * sizeof(double));
  if (out->requires_grad)
    t.record([table, out, ids, c] {
      for (size_t i = 0; i < ids.size(); ++i) {
        double* dst = table->grad.data() + static_cast<size_t>(ids[i]) * c;
        const double* gp = out->grad.data() + i * c;
        for (int j = 0; j < c; ++j) dst[j] += gp[j];
      }
    });
  return out;
}

TensorPtr where_rows(Tape& t, const std::vector<uint8_t>& use_a, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(*a, *b, "where_rows");
  if (static_cast<int>(use_a.size()) != a->rows())
    throw ShapeMismatch("where_rows: mask length " + std::to_string(use_a.size()) + " vs " + a->shape_str());
  const int c = a->cols();
  auto out = out_like(a->shape, want_grad(t, {&a, &b}));
  for (int i = 0; i < a->rows(); ++i)
    std::memcpy(out->row_ptr(i), (use_a[i] ? a : b)->row_ptr(i), c * sizeof(double));
  if (out->requires_grad)
    t.record([a, b, out, use_a, c] {
      for (int i = 0; i < a->rows(); ++i) {
        const TensorPtr& dst = use_a[i] ? a : b;
        if (!dst->requires_grad) continue;
        double* dp = dst->grad.data() + static_cast<size_t>(i) * c;
        const double* gp = out->grad.data() + static_cast<size_t>(i) * c;
        for (int j = 0; j < c; ++j) dp[j] += gp[j];
      }
    });
  return out;
}

TensorPtr pick(Tape& t, const TensorPtr& a, int r, int c) {
  if (r < 0 || r >= a->rows() || c < 0 || c >= a->cols())
    throw ShapeMismatch("pick: (" + std::to_string(r) + "," + std::to_string(c) + ") out of " + a->shape_str());
  auto out = out_like({1, 1}, want_grad(t, {&a}));
  out->data[0] = a->at(r, c);
  if (out->requires_grad)
    t.record([a, out, r, c] { a->g(r, c) += out->grad[0]; });
  return out;
}

// ------------------------------------------------------------ probabilistic

TensorPtr softmax_rows(Tape& t, const TensorPtr& a) {
  const int r = a->rows(), c = a->cols();
  auto out = out_like(a->shape, want_grad(t, {&a}));
  for (int i = 0; i < r; ++i) {
    const double* ap = a->row_ptr(i);
    double* op = out->row_ptr(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < c; ++j) mx = std::max(mx, ap[j]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      op[j] = std::exp(ap[j] - mx);
      z += op[j];
    }
    for (int j = 0; j < c; ++j) op[j] /= z;
  }
  if (out->requires_grad)
    t.record([a, out, r, c] {
      for (int i = 0; i < r; ++i) {
        const double* y = out->row_ptr(i);
        const double* gy = out->grad.data() + static_cast<size_t>(i) * c;
        double dot = 0.0;
        for (int j = 0; j < c; ++j) dot += y[j] * gy[j];
        double* ga = a->grad.data() + static_cast<size_t>(i) * c;
        for (int j = 0; j < c; ++j) ga[j] += y[j] * (gy[j] - dot);
      }
    });
  return out;
}

TensorPtr layer_norm(Tape& t, const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias, double eps) {
  const int r = x->rows(), c = x->cols();
  if (gain->numel() != c || bias->numel() != c) shape_error("layer_norm", *x, *gain);
  auto out = out_like(x->shape, want_grad(t, {&x, &gain, &bias}));
  auto xhat = std::make_shared<std::vector<double>>(x->data.size());
  auto inv_std = std::make_shared<std::vector<double>>(r);
  for (int i = 0; i < r; ++i) {
    const double* xp = x->row_ptr(i);
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += xp[j];
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (xp[j] - mu) * (xp[j] - mu);
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    double* xh = xhat->data() + static_cast<size_t>(i) * c;
    double* op = out->row_ptr(i);
    for (int j = 0; j < c; ++j) {
      xh[j] = (xp[j] - mu) * is;
      op[j] = gain->data[j] * xh[j] + bias->data[j];
    }
  }
  if (out->requires_grad)
    t.record([x, gain, bias, out, xhat, inv_std, r, c] {
      for (int i = 0; i < r; ++i) {
        const double* gy = out->grad.data() + static_cast<size_t>(i) * c;
        const double* xh = xhat->data() + static_cast<size_t>(i) * c;
        const double is = (*inv_std)[i];
        if (gain->requires_grad)
          for (int j = 0; j < c; ++j) gain->grad[j] += gy[j] * xh[j];
        if (bias->requires_grad)
          for (int j = 0; j < c; ++j) bias->grad[j] += gy[j];
        if (x->requires_grad) {
          // dxhat = gy * gain; dx = is * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
          double m1 = 0.0, m2 = 0.0;
          for (int j = 0; j < c; ++j) {
            const double dxh = gy[j] * gain->data[j];
            m1 += dxh;
            m2 += dxh * xh[j];
          }
          m1 /= c;
          m2 /= c;
          double* gx = x->grad.data() + static_cast<size_t>(i) * c;
          for (int j = 0; j < c; ++j) {
            const double dxh = gy[j] * gain->data[j];
            gx[j] += is * (dxh - m1 - xh[j] * m2);
          }
        }
      }
    });
  return out;
}

TensorPtr dropout(Tape& t, const TensorPtr& x, double rate, bool train, Rng& rng) {
  if (!train || rate <= 0.0) return x;
  const double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<double>>(x->data.size());
  for (double& m : *mask) m = rng.u01() < rate ? 0.0 : 1.0 / keep;
  auto out = out_like(x->shape, want_grad(t, {&x}));
  for (size_t i = 0; i < x->data.size(); ++i) out->data[i] = x->data[i] * (*mask)[i];
  if (out->requires_grad)
    t.record([x, out, mask] {
      for (size_t i = 0; i < x->data.size(); ++i) x->grad[i] += out->grad[i] * (*mask)[i];
    });
  return out;
}

TensorPtr cross_entropy(Tape& t, const TensorPtr& logp, const std::vector<int>& targets) {
  if (static_cast<int>(targets.size()) != logp->rows())
    throw ShapeMismatch("cross_entropy: " + std::to_string(targets.size()) + " targets for " + logp->shape_str());
  auto out = out_like({1, 1}, want_grad(t, {&logp}));
  double s = 0.0;
  for (size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= logp->cols())
      throw ShapeMismatch("cross_entropy: target " + std::to_string(targets[i]) + " out of " + logp->shape_str());
    s -= logp->at(static_cast<int>(i), targets[i]);
  }
  out->data[0] = s;
  if (out->requires_grad)
    t.record([logp, out, targets] {
      for (size_t i = 0; i < targets.size(); ++i)
        logp->g(static_cast<int>(i), targets[i]) -= out->grad[0];
    });
  return out;
}

// ---------------------------------------------------------------- attention

AttnGraph AttnGraph::dense_bipartite(int n_q, int n_kv) {
  AttnGraph g;
  g.n_q = n_q;
  g.n_kv = n_kv;
  g.offsets.resize(n_q + 1);
  g.nbr.resize(static_cast<size_t>(n_q) * n_kv);
  for (int i = 0; i <= n_q; ++i) g.offsets[i] = i * n_kv;
  for (int i = 0; i < n_q; ++i)
    for (int j = 0; j < n_kv; ++j) g.nbr[static_cast<size_t>(i) * n_kv + j] = j;
  return g;
}

AttnGraph AttnGraph::causal(int n) {
  AttnGraph g;
  g.n_q = n;
  g.n_kv = n;
  g.offsets.resize(n + 1);
  g.offsets[0] = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) g.nbr.push_back(j);
    g.offsets[i + 1] = static_cast<int>(g.nbr.size());
  }
  return g;
}

AttnGraph AttnGraph::complete(int n, int distance_clip, bool with_distance) {
  AttnGraph g;
  g.n_q = n;
  g.n_kv = n;
  g.offsets.resize(n + 1);
  for (int i = 0; i <= n; ++i) g.offsets[i] = i * n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      g.nbr.push_back(j);
      if (with_distance) {
        int d = std::clamp(j - i, -distance_clip, distance_clip);
        g.rel.push_back(d + distance_clip);
      }
    }
  return g;
}

TensorPtr graph_attention(Tape& t, const TensorPtr& qp, const TensorPtr& kp, const TensorPtr& vp,
                          const TensorPtr& zp, const AttnGraph& g, int heads, double scale_div,
                          double attn_dropout, bool train, Rng* rng) {
  const int m = qp->cols();
  if (m % heads != 0) throw ShapeMismatch("graph_attention: cols " + std::to_string(m) + " not divisible by heads");
  const int dh = m / heads;
  if (kp->cols() != m || vp->cols() != m) shape_error("graph_attention", *qp, *kp);
  if (qp->rows() != g.n_q || kp->rows() != g.n_kv || vp->rows() != g.n_kv)
    throw ShapeMismatch("graph_attention: graph size mismatch with inputs " + qp->shape_str());
  if (g.has_rel()) {
    if (!zp) throw ShapeMismatch("graph_attention: graph has relations but zp is null");
    if (zp->cols() != dh) throw ShapeMismatch("graph_attention: zp cols " + zp->shape_str() + " != head dim");
  }
  for (int i = 0; i < g.n_q; ++i)
    if (g.offsets[i + 1] <= g.offsets[i])
      throw Error("graph_attention: empty neighborhood at node " + std::to_string(i));

  const int E = g.edge_count();
  const bool rel = g.has_rel();
  const double inv_scale = 1.0 / scale_div;
  const bool rg = want_grad(t, {&qp, &kp, &vp, &zp});
  auto out = out_like({g.n_q, m}, rg);

  // post-softmax weights per (edge, head); dropout scaling kept separately
  auto attn = std::make_shared<std::vector<double>>(static_cast<size_t>(E) * heads);
  std::shared_ptr<std::vector<double>> dmask;
  const bool use_drop = train && attn_dropout > 0.0;
  if (use_drop) {
    dmask = std::make_shared<std::vector<double>>(static_cast<size_t>(E) * heads);
    const double keep = 1.0 - attn_dropout;
    for (double& v : *dmask) v = rng->u01() < attn_dropout ? 0.0 : 1.0 / keep;
  }

  std::vector<double> e_buf;
  for (int h = 0; h < heads; ++h) {
    const int off = h * dh;
    for (int i = 0; i < g.n_q; ++i) {
      const int e0 = g.offsets[i], e1 = g.offsets[i + 1];
      e_buf.resize(e1 - e0);
      const double* qrow = qp->row_ptr(i) + off;
      double mx = -std::numeric_limits<double>::infinity();
      for (int e = e0; e < e1; ++e) {
        const double* krow = kp->row_ptr(g.nbr[e]) + off;
        double dot = 0.0;
        if (rel) {
          const double* zrow = zp->row_ptr(g.rel[e]);
          for (int d = 0; d < dh; ++d) dot += qrow[d] * (krow[d] + zrow[d]);
        } else {
          for (int d = 0; d < dh; ++d) dot += qrow[d] * krow[d];
        }
        e_buf[e - e0] = dot * inv_scale;
        mx = std::max(mx, e_buf[e - e0]);
      }
      double z = 0.0;
      for (double& v : e_buf) {
        v = std::exp(v - mx);
        z += v;
      }
      double* orow = out->row_ptr(i) + off;
      for (int e = e0; e < e1; ++e) {
        double a = e_buf[e - e0] / z;
        (*attn)[static_cast<size_t>(e) * heads + h] = a;
        if (use_drop) a *= (*dmask)[static_cast<size_t>(e) * heads + h];
        const double* vrow = vp->row_ptr(g.nbr[e]) + off;
        if (rel) {
          const double* zrow = zp->row_ptr(g.rel[e]);
          for (int d = 0; d < dh; ++d) orow[d] += a * (vrow[d] + zrow[d]);
        } else {
          for (int d = 0; d < dh; ++d) orow[d] += a * vrow[d];
        }
      }
    }
  }

  if (rg)
    t.record([qp, kp, vp, zp, out, attn, dmask, g, heads, dh, inv_scale, rel, use_drop] {
      const bool gq = qp->requires_grad, gk = kp->requires_grad, gv = vp->requires_grad;
      const bool gz = rel && zp->requires_grad;
      std::vector<double> da(64), de(64);
      for (int h = 0; h < heads; ++h) {
        const int off = h * dh;
        for (int i = 0; i < g.n_q; ++i) {
          const int e0 = g.offsets[i], e1 = g.offsets[i + 1], ne = e1 - e0;
          da.assign(ne, 0.0);
          de.assign(ne, 0.0);
          const double* go = out->grad.data() + (static_cast<size_t>(i) * heads + h) * dh;
          const double* qrow = qp->row_ptr(i) + off;
          // d(applied weight) and value/z gradients
          for (int e = e0; e < e1; ++e) {
            const int j = g.nbr[e];
            const double a = (*attn)[static_cast<size_t>(e) * heads + h];
            const double dm = use_drop ? (*dmask)[static_cast<size_t>(e) * heads + h] : 1.0;
            const double a_app = a * dm;
            const double* vrow = vp->row_ptr(j) + off;
            const double* zrow = rel ? zp->row_ptr(g.rel[e]) : nullptr;
            double s = 0.0;
            for (int d = 0; d < dh; ++d) s += go[d] * (vrow[d] + (rel ? zrow[d] : 0.0));
            da[e - e0] = s * dm;  // through dropout
            if (gv) {
              double* gvrow = vp->grad.data() + (static_cast<size_t>(j) * heads + h) * dh;
              for (int d = 0; d < dh; ++d) gvrow[d] += a_app * go[d];
            }
            if (gz) {
              double* gzrow = zp->grad.data() + static_cast<size_t>(g.rel[e]) * dh;
              for (int d = 0; d < dh; ++d) gzrow[d] += a_app * go[d];
            }
          }
          // softmax backward (pre-dropout weights)
          double dot = 0.0;
          for (int e = e0; e < e1; ++e) dot += (*attn)[static_cast<size_t>(e) * heads + h] * da[e - e0];
          for (int e = e0; e < e1; ++e) {
            const double a = (*attn)[static_cast<size_t>(e) * heads + h];
            de[e - e0] = a * (da[e - e0] - dot) * inv_scale;
          }
          // score backward
          double* gqrow = gq ? qp->grad.data() + (static_cast<size_t>(i) * heads + h) * dh : nullptr;
          for (int e = e0; e < e1; ++e) {
            const int j = g.nbr[e];
            const double d_e = de[e - e0];
            if (d_e == 0.0) continue;
            const double* krow = kp->row_ptr(j) + off;
            const double* zrow = rel ? zp->row_ptr(g.rel[e]) : nullptr;
            if (gq)
              for (int d = 0; d < dh; ++d) gqrow[d] += d_e * (krow[d] + (rel ? zrow[d] : 0.0));
            if (gk) {
              double* gkrow = kp->grad.data() + (static_cast<size_t>(j) * heads + h) * dh;
              for (int d = 0; d < dh; ++d) gkrow[d] += d_e * qrow[d];
            }
            if (gz) {
              double* gzrow = zp->grad.data() + static_cast<size_t>(g.rel[e]) * dh;
              for (int d = 0; d < dh; ++d) gzrow[d] += d_e * qrow[d];
            }
          }
        }
      }
    });
  return out;
}

TensorPtr pointer_weights(Tape& t, const TensorPtr& qp, const TensorPtr& kp, int heads, double scale_div) {
  const int m = qp->cols();
  if (kp->cols() != m) shape_error("pointer_weights", *qp, *kp);
  if (m % heads != 0) throw ShapeMismatch("pointer_weights: cols not divisible by heads");
  const int dh = m / heads;
  const int tq = qp->rows(), s = kp->rows();
  const double inv_scale = 1.0 / scale_div;
  auto out = out_like({tq, s}, want_grad(t, {&qp, &kp}));
  // per-head softmax weights saved for backward: layout [h][i][j]
  auto attn = std::make_shared<std::vector<double>>(static_cast<size_t>(heads) * tq * s);
  std::vector<double> e_buf(s);
  for (int h = 0; h < heads; ++h) {
    const int off = h * dh;
    for (int i = 0; i < tq; ++i) {
      const double* qrow = qp->row_ptr(i) + off;
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < s; ++j) {
        const double* krow = kp->row_ptr(j) + off;
        double dot = 0.0;
        for (int d = 0; d < dh; ++d) dot += qrow[d] * krow[d];
        e_buf[j] = dot * inv_scale;
        mx = std::max(mx, e_buf[j]);
      }
      double z = 0.0;
      for (int j = 0; j < s; ++j) {
        e_buf[j] = std::exp(e_buf[j] - mx);
        z += e_buf[j];
      }
      double* arow = attn->data() + (static_cast<size_t>(h) * tq + i) * s;
      double* orow = out->row_ptr(i);
      for (int j = 0; j < s; ++j) {
        arow[j] = e_buf[j] / z;
        orow[j] += arow[j] / heads;
      }
    }
  }
  if (out->requires_grad)
    t.record([qp, kp, out, attn, heads, dh, tq, s, inv_scale] {
      const bool gq = qp->requires_grad, gk = kp->requires_grad;
      std::vector<double> de(s);
      for (int h = 0; h < heads; ++h) {
        const int off = h * dh;
        for (int i = 0; i < tq; ++i) {
          const double* arow = attn->data() + (static_cast<size_t>(h) * tq + i) * s;
          const double* grow = out->grad.data() + static_cast<size_t>(i) * s;
          double dot = 0.0;
          for (int j = 0; j < s; ++j) dot += arow[j] * grow[j] / heads;
          const double* qrow = qp->row_ptr(i) + off;
          double* gqrow = gq ? qp->grad.data() + (static_cast<size_t>(i) * heads + h) * dh : nullptr;
          for (int j = 0; j < s; ++j) {
            de[j] = arow[j] * (grow[j] / heads - dot) * inv_scale;
            if (de[j] == 0.0) continue;
            const double* krow = kp->row_ptr(j) + off;
            if (gq)
              for (int d = 0; d < dh; ++d) gqrow[d] += de[j] * krow[d];
            if (gk) {
              double* gkrow = kp->grad.data() + (static_cast<size_t>(j) * heads + h) * dh;
              for (int d = 0; d < dh; ++d) gkrow[d] += de[j] * qrow[d];
            }
          }
        }
      }
    });
  return out;
}

bool all_finite(const Tensor& a) {
  for (double x : a.data)
    if (!std::isfinite(x)) return false;
  return true;
}

void check_finite(const Tensor& a, const char* context) {
  if (!all_finite(a)) throw NonFiniteValue(std::string(context) + ": non-finite value in tensor " + a.shape_str());
}

}  // namespace birgat::ops
