#include "capembed/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <utility>

namespace capembed {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += " x ";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

Tensor Tensor::zeros(Shape shape) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_.assign(shape_numel(t.shape_), 0.0);
  return t;
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_.assign(shape_numel(t.shape_), value);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor: shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::row(std::vector<double> values) {
  Shape s{values.size()};
  return from(std::move(s), std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return from({rows, cols}, std::move(values));
}

void Tensor::check_finite(const std::string& context) const {
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw ValidationError(context + ": non-finite value encountered");
    }
  }
}

namespace {

std::atomic<bool> g_finite_checks{false};

// C = A * B, all row-major
void mm_nn(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = ai[l];
      if (av == 0.0) continue;
      const double* bl = b + l * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
  }
}

// dA += dC * B^T: dC is m x n, B is k x n, dA is m x k
void mm_acc_nt(double* da, const double* dc, const double* b, std::size_t m, std::size_t n,
               std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* dci = dc + i * n;
    double* dai = da + i * k;
    for (std::size_t l = 0; l < k; ++l) {
      const double* bl = b + l * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += dci[j] * bl[j];
      dai[l] += s;
    }
  }
}

// dB += A^T * dC: A is m x k, dC is m x n, dB is k x n
void mm_acc_tn(double* db, const double* a, const double* dc, std::size_t m, std::size_t k,
               std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* dci = dc + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = ai[l];
      if (av == 0.0) continue;
      double* dbl = db + l * n;
      for (std::size_t j = 0; j < n; ++j) dbl[j] += av * dci[j];
    }
  }
}

void axpy(Tensor& dst, const Tensor& src, double factor = 1.0) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.numel(); ++i) d[i] += factor * s[i];
}

struct AxisSpan {
  std::size_t outer, len, inner;
};

AxisSpan axis_span(const Shape& shape, std::size_t axis) {
  AxisSpan sp{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) sp.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) sp.inner *= shape[i];
  return sp;
}

enum class BinKind { same, rowvec };

BinKind classify_binary(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return BinKind::same;
  if (a.rank() == 2 && b.rank() == 1 && a.dim(1) == b.dim(0)) return BinKind::rowvec;
  throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()) + " are neither equal nor [m x d] with [d]");
}

}  // namespace

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(); }

const Tensor& Graph::checked(Var v, const char* op) const {
  if (v.index >= nodes_.size()) {
    throw ValidationError(std::string(op) + ": var does not belong to this graph");
  }
  return nodes_[v.index].value;
}

Var Graph::push_node(std::string op, Tensor value, std::vector<Var> parents, BackwardFn fn) {
  if (g_finite_checks.load()) value.check_finite(op);
  Node node;
  node.op = std::move(op);
  node.value = std::move(value);
  node.parents = std::move(parents);
  node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::leaf(Tensor value, std::string name) {
  return push_node(std::move(name), std::move(value), {}, nullptr);
}

Tensor& Graph::grad_buffer(Var v) {
  Node& node = nodes_[v.index];
  if (node.grad.empty() && node.value.numel() > 0) {
    node.grad = Tensor::zeros(node.value.shape());
  } else if (node.grad.empty()) {
    node.grad = Tensor::zeros(node.value.shape());
  }
  return node.grad;
}

const Tensor& Graph::grad(Var v) { return grad_buffer(v); }

void Graph::backward(Var loss) {
  const Tensor& lv = checked(loss, "backward");
  if (lv.numel() != 1) {
    throw DimensionError("backward: loss must be scalar, got shape " + shape_str(lv.shape()));
  }
  if (backward_done_) {
    throw ValidationError("backward: already run on this graph");
  }
  backward_done_ = true;
  grad_buffer(loss)[0] = 1.0;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.empty() || !node.backward) continue;
    node.backward(*this, node.grad);
  }
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& av = checked(a, "matmul");
  const Tensor& bv = checked(b, "matmul");
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(av.shape()) + " and " +
                         shape_str(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out = Tensor::zeros({m, n});
  mm_nn(out.data(), av.data(), bv.data(), m, k, n);
  return push_node("matmul", std::move(out), {a, b},
                   [a, b, m, k, n](Graph& g, const Tensor& go) {
                     mm_acc_nt(g.grad_buffer(a).data(), go.data(), g.value(b).data(), m, n, k);
                     mm_acc_tn(g.grad_buffer(b).data(), g.value(a).data(), go.data(), m, k, n);
                   });
}

Var Graph::transpose(Var a) {
  const Tensor& av = checked(a, "transpose");
  if (av.rank() != 2) {
    throw DimensionError("transpose: expected 2-D, got " + shape_str(av.shape()));
  }
  const std::size_t m = av.dim(0), n = av.dim(1);
  Tensor out = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = av.at(i, j);
  return push_node("transpose", std::move(out), {a}, [a, m, n](Graph& g, const Tensor& go) {
    Tensor& da = g.grad_buffer(a);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) da.at(i, j) += go.at(j, i);
  });
}

Var Graph::add(Var a, Var b) {
  const Tensor& av = checked(a, "add");
  const Tensor& bv = checked(b, "add");
  const BinKind kind = classify_binary(av, bv, "add");
  Tensor out = av;
  if (kind == BinKind::same) {
    axpy(out, bv);
    return push_node("add", std::move(out), {a, b}, [a, b](Graph& g, const Tensor& go) {
      axpy(g.grad_buffer(a), go);
      axpy(g.grad_buffer(b), go);
    });
  }
  const std::size_t m = av.dim(0), d = av.dim(1);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) += bv[j];
  return push_node("add", std::move(out), {a, b}, [a, b, m, d](Graph& g, const Tensor& go) {
    axpy(g.grad_buffer(a), go);
    Tensor& db = g.grad_buffer(b);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j) db[j] += go.at(i, j);
  });
}

Var Graph::sub(Var a, Var b) {
  const Tensor& av = checked(a, "sub");
  const Tensor& bv = checked(b, "sub");
  const BinKind kind = classify_binary(av, bv, "sub");
  Tensor out = av;
  if (kind == BinKind::same) {
    axpy(out, bv, -1.0);
    return push_node("sub", std::move(out), {a, b}, [a, b](Graph& g, const Tensor& go) {
      axpy(g.grad_buffer(a), go);
      axpy(g.grad_buffer(b), go, -1.0);
    });
  }
  const std::size_t m = av.dim(0), d = av.dim(1);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) -= bv[j];
  return push_node("sub", std::move(out), {a, b}, [a, b, m, d](Graph& g, const Tensor& go) {
    axpy(g.grad_buffer(a), go);
    Tensor& db = g.grad_buffer(b);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j) db[j] -= go.at(i, j);
  });
}

Var Graph::mul(Var a, Var b) {
  const Tensor& av = checked(a, "mul");
  const Tensor& bv = checked(b, "mul");
  const BinKind kind = classify_binary(av, bv, "mul");
  Tensor out = av;
  if (kind == BinKind::same) {
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
    return push_node("mul", std::move(out), {a, b}, [a, b](Graph& g, const Tensor& go) {
      const Tensor& av2 = g.value(a);
      const Tensor& bv2 = g.value(b);
      Tensor& da = g.grad_buffer(a);
      Tensor& db = g.grad_buffer(b);
      for (std::size_t i = 0; i < go.numel(); ++i) {
        da[i] += go[i] * bv2[i];
        db[i] += go[i] * av2[i];
      }
    });
  }
  const std::size_t m = av.dim(0), d = av.dim(1);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) *= bv[j];
  return push_node("mul", std::move(out), {a, b}, [a, b, m, d](Graph& g, const Tensor& go) {
    const Tensor& av2 = g.value(a);
    const Tensor& bv2 = g.value(b);
    Tensor& da = g.grad_buffer(a);
    Tensor& db = g.grad_buffer(b);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        da.at(i, j) += go.at(i, j) * bv2[j];
        db[j] += go.at(i, j) * av2.at(i, j);
      }
  });
}

Var Graph::scale(Var a, double c) {
  const Tensor& av = checked(a, "scale");
  Tensor out = av;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
  return push_node("scale", std::move(out), {a}, [a, c](Graph& g, const Tensor& go) {
    axpy(g.grad_buffer(a), go, c);
  });
}

Var Graph::tanh(Var a) {
  const Tensor& av = checked(a, "tanh");
  Tensor out = av;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
  Var self = push_node("tanh", std::move(out), {a}, nullptr);
  nodes_[self.index].backward = [a, self](Graph& g, const Tensor& go) {
    const Tensor& y = g.value(self);
    Tensor& da = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.numel(); ++i) da[i] += go[i] * (1.0 - y[i] * y[i]);
  };
  return self;
}

Var Graph::sigmoid(Var a) {
  const Tensor& av = checked(a, "sigmoid");
  Tensor out = av;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  Var self = push_node("sigmoid", std::move(out), {a}, nullptr);
  nodes_[self.index].backward = [a, self](Graph& g, const Tensor& go) {
    const Tensor& y = g.value(self);
    Tensor& da = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.numel(); ++i) da[i] += go[i] * y[i] * (1.0 - y[i]);
  };
  return self;
}

Var Graph::softmax(Var a, std::size_t axis) {
  const Tensor& av = checked(a, "softmax");
  if (axis >= av.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(av.shape()));
  }
  if (av.dim(axis) == 0) {
    throw DimensionError("softmax: empty slice along axis " + std::to_string(axis));
  }
  const AxisSpan sp = axis_span(av.shape(), axis);
  Tensor out = Tensor::zeros(av.shape());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.len * sp.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < sp.len; ++l) mx = std::max(mx, av[base + l * sp.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) {
        const double e = std::exp(av[base + l * sp.inner] - mx);
        out[base + l * sp.inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < sp.len; ++l) out[base + l * sp.inner] /= z;
    }
  }
  Var self = push_node("softmax", std::move(out), {a}, nullptr);
  nodes_[self.index].backward = [a, self, sp](Graph& g, const Tensor& go) {
    const Tensor& y = g.value(self);
    Tensor& da = g.grad_buffer(a);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = o * sp.len * sp.inner + in;
        double dot = 0.0;
        for (std::size_t l = 0; l < sp.len; ++l) {
          const std::size_t idx = base + l * sp.inner;
          dot += go[idx] * y[idx];
        }
        for (std::size_t l = 0; l < sp.len; ++l) {
          const std::size_t idx = base + l * sp.inner;
          da[idx] += y[idx] * (go[idx] - dot);
        }
      }
    }
  };
  return self;
}

Var Graph::l2_normalize_rows(Var a) {
  const Tensor& av = checked(a, "l2_normalize_rows");
  if (av.rank() != 2) {
    throw DimensionError("l2_normalize_rows: expected 2-D, got " + shape_str(av.shape()));
  }
  const std::size_t m = av.dim(0), d = av.dim(1);
  Tensor out = av;
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += av.at(i, j) * av.at(i, j);
    const double norm = std::max(std::sqrt(s), kNormEpsilon);
    norms[i] = norm;
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) /= norm;
  }
  Var self = push_node("l2_normalize_rows", std::move(out), {a}, nullptr);
  nodes_[self.index].backward = [a, self, m, d, norms = std::move(norms)](Graph& g,
                                                                          const Tensor& go) {
    const Tensor& y = g.value(self);
    Tensor& da = g.grad_buffer(a);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += go.at(i, j) * y.at(i, j);
      for (std::size_t j = 0; j < d; ++j) {
        da.at(i, j) += (go.at(i, j) - y.at(i, j) * dot) / norms[i];
      }
    }
  };
  return self;
}

Var Graph::concat(Var a, Var b, std::size_t axis) {
  const Tensor& av = checked(a, "concat");
  const Tensor& bv = checked(b, "concat");
  if (av.rank() != bv.rank() || axis >= av.rank()) {
    throw DimensionError("concat: ranks/axis mismatch between " + shape_str(av.shape()) +
                         " and " + shape_str(bv.shape()) + " along axis " +
                         std::to_string(axis));
  }
  for (std::size_t i = 0; i < av.rank(); ++i) {
    if (i != axis && av.dim(i) != bv.dim(i)) {
      throw DimensionError("concat: non-axis dims differ: " + shape_str(av.shape()) + " vs " +
                           shape_str(bv.shape()));
    }
  }
  Shape out_shape = av.shape();
  out_shape[axis] += bv.dim(axis);
  const AxisSpan spa = axis_span(av.shape(), axis);
  const std::size_t la = av.dim(axis), lb = bv.dim(axis);
  Tensor out = Tensor::zeros(out_shape);
  const std::size_t blk_a = la * spa.inner, blk_b = lb * spa.inner;
  for (std::size_t o = 0; o < spa.outer; ++o) {
    std::copy_n(av.data() + o * blk_a, blk_a, out.data() + o * (blk_a + blk_b));
    std::copy_n(bv.data() + o * blk_b, blk_b, out.data() + o * (blk_a + blk_b) + blk_a);
  }
  return push_node("concat", std::move(out), {a, b},
                   [a, b, spa, blk_a, blk_b](Graph& g, const Tensor& go) {
                     Tensor& da = g.grad_buffer(a);
                     Tensor& db = g.grad_buffer(b);
                     for (std::size_t o = 0; o < spa.outer; ++o) {
                       const double* src = go.data() + o * (blk_a + blk_b);
                       for (std::size_t i = 0; i < blk_a; ++i) da[o * blk_a + i] += src[i];
                       for (std::size_t i = 0; i < blk_b; ++i) db[o * blk_b + i] += src[blk_a + i];
                     }
                   });
}

Var Graph::stack_steps(std::span<const Var> steps) {
  if (steps.empty()) throw DimensionError("stack_steps: no steps given");
  const Tensor& first = checked(steps[0], "stack_steps");
  if (first.rank() != 2) {
    throw DimensionError("stack_steps: steps must be 2-D, got " + shape_str(first.shape()));
  }
  const std::size_t batch = first.dim(0), feat = first.dim(1), t_len = steps.size();
  std::vector<Var> parents(steps.begin(), steps.end());
  for (Var v : parents) {
    const Tensor& tv = checked(v, "stack_steps");
    if (!tv.same_shape(first)) {
      throw DimensionError("stack_steps: step shape " + shape_str(tv.shape()) +
                           " differs from " + shape_str(first.shape()));
    }
  }
  Tensor out = Tensor::zeros({batch, t_len, feat});
  for (std::size_t t = 0; t < t_len; ++t) {
    const Tensor& tv = value(parents[t]);
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(tv.data() + b * feat, feat, out.data() + (b * t_len + t) * feat);
    }
  }
  return push_node("stack_steps", std::move(out), parents,
                   [parents, batch, feat, t_len](Graph& g, const Tensor& go) {
                     for (std::size_t t = 0; t < t_len; ++t) {
                       Tensor& dp = g.grad_buffer(parents[t]);
                       for (std::size_t b = 0; b < batch; ++b) {
                         const double* src = go.data() + (b * t_len + t) * feat;
                         double* dst = dp.data() + b * feat;
                         for (std::size_t f = 0; f < feat; ++f) dst[f] += src[f];
                       }
                     }
                   });
}

Var Graph::sum_axis(Var a, std::size_t axis) {
  const Tensor& av = checked(a, "sum_axis");
  if (axis >= av.rank()) {
    throw DimensionError("sum_axis: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(av.shape()));
  }
  const AxisSpan sp = axis_span(av.shape(), axis);
  Shape out_shape;
  for (std::size_t i = 0; i < av.rank(); ++i)
    if (i != axis) out_shape.push_back(av.dim(i));
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out = Tensor::zeros(out_shape);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t l = 0; l < sp.len; ++l)
      for (std::size_t in = 0; in < sp.inner; ++in)
        out[o * sp.inner + in] += av[(o * sp.len + l) * sp.inner + in];
  return push_node("sum_axis", std::move(out), {a}, [a, sp](Graph& g, const Tensor& go) {
    Tensor& da = g.grad_buffer(a);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t l = 0; l < sp.len; ++l)
        for (std::size_t in = 0; in < sp.inner; ++in)
          da[(o * sp.len + l) * sp.inner + in] += go[o * sp.inner + in];
  });
}

Var Graph::max_axis(Var a, std::size_t axis) {
  const Tensor& av = checked(a, "max_axis");
  if (axis >= av.rank()) {
    throw DimensionError("max_axis: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(av.shape()));
  }
  if (av.dim(axis) == 0) {
    throw DimensionError("max_axis: empty slice along axis " + std::to_string(axis));
  }
  const AxisSpan sp = axis_span(av.shape(), axis);
  Shape out_shape;
  for (std::size_t i = 0; i < av.rank(); ++i)
    if (i != axis) out_shape.push_back(av.dim(i));
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out = Tensor::zeros(out_shape);
  // flat source index of the winner per output element; first max wins
  std::vector<std::size_t> argmax(out.numel());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      std::size_t best = (o * sp.len) * sp.inner + in;
      double best_v = av[best];
      for (std::size_t l = 1; l < sp.len; ++l) {
        const std::size_t idx = (o * sp.len + l) * sp.inner + in;
        if (av[idx] > best_v) {
          best_v = av[idx];
          best = idx;
        }
      }
      out[o * sp.inner + in] = best_v;
      argmax[o * sp.inner + in] = best;
    }
  }
  return push_node("max_axis", std::move(out), {a},
                   [a, argmax = std::move(argmax)](Graph& g, const Tensor& go) {
                     Tensor& da = g.grad_buffer(a);
                     for (std::size_t i = 0; i < go.numel(); ++i) da[argmax[i]] += go[i];
                   });
}

Var Graph::sum(Var a) {
  const Tensor& av = checked(a, "sum");
  double s = 0.0;
  for (std::size_t i = 0; i < av.numel(); ++i) s += av[i];
  return push_node("sum", Tensor::scalar(s), {a}, [a](Graph& g, const Tensor& go) {
    Tensor& da = g.grad_buffer(a);
    for (std::size_t i = 0; i < da.numel(); ++i) da[i] += go[0];
  });
}

Var Graph::gather_rows(Var table, std::vector<int> rows) {
  const Tensor& tv = checked(table, "gather_rows");
  if (tv.rank() != 2) {
    throw DimensionError("gather_rows: table must be 2-D, got " + shape_str(tv.shape()));
  }
  const std::size_t n_rows = tv.dim(0), width = tv.dim(1);
  for (int r : rows) {
    if (r < 0 || static_cast<std::size_t>(r) >= n_rows) {
      throw ValidationError("gather_rows: index " + std::to_string(r) + " out of range [0, " +
                            std::to_string(n_rows) + ")");
    }
  }
  Tensor out = Tensor::zeros({rows.size(), width});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(tv.data() + static_cast<std::size_t>(rows[i]) * width, width,
                out.data() + i * width);
  }
  return push_node("gather_rows", std::move(out), {table},
                   [table, rows = std::move(rows), width](Graph& g, const Tensor& go) {
                     Tensor& dt = g.grad_buffer(table);
                     for (std::size_t i = 0; i < rows.size(); ++i) {
                       double* dst = dt.data() + static_cast<std::size_t>(rows[i]) * width;
                       const double* src = go.data() + i * width;
                       for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
                     }
                   });
}

Var Graph::slice_rows(Var a, std::size_t row0, std::size_t nrows) {
  const Tensor& av = checked(a, "slice_rows");
  if (av.rank() != 2 || row0 + nrows > av.dim(0)) {
    throw DimensionError("slice_rows: rows [" + std::to_string(row0) + ", " +
                         std::to_string(row0 + nrows) + ") out of range for " +
                         shape_str(av.shape()));
  }
  const std::size_t width = av.dim(1);
  Tensor out = Tensor::zeros({nrows, width});
  std::copy_n(av.data() + row0 * width, nrows * width, out.data());
  return push_node("slice_rows", std::move(out), {a},
                   [a, row0, nrows, width](Graph& g, const Tensor& go) {
                     Tensor& da = g.grad_buffer(a);
                     double* dst = da.data() + row0 * width;
                     for (std::size_t i = 0; i < nrows * width; ++i) dst[i] += go[i];
                   });
}

Var Graph::reshape(Var a, Shape shape) {
  const Tensor& av = checked(a, "reshape");
  if (shape_numel(shape) != av.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(av.shape()) + " as " +
                         shape_str(shape));
  }
  Tensor out = Tensor::from(std::move(shape), std::vector<double>(av.data(), av.data() + av.numel()));
  return push_node("reshape", std::move(out), {a}, [a](Graph& g, const Tensor& go) {
    Tensor& da = g.grad_buffer(a);
    for (std::size_t i = 0; i < da.numel(); ++i) da[i] += go[i];
  });
}

}  // namespace capembed
