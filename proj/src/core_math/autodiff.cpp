#include "mir/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mir/errors.hpp"

namespace mir {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor{}, false, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor{}, true, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward backward) {
  Node node;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape() != this) throw std::logic_error("operand recorded on a different tape");
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw std::logic_error("loss recorded on a different tape");
  const Tensor& lv = value(loss.id());
  if (lv.size() != 1) throw ShapeError("backward needs a scalar loss, got " + lv.shape_string());
  for (Node& n : nodes_) {
    if (n.requires_grad) {
      n.grad = Tensor(n.value.shape(), std::vector<double>(n.value.size(), 0.0));
    } else {
      n.grad = Tensor{};
    }
  }
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.backward) n.backward(*this, i);
  }
}

void Tape::accumulate(std::size_t id, const Tensor& delta) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  for (std::size_t i = 0; i < delta.size(); ++i) n.grad[i] += delta[i];
}

Mask::Mask(std::size_t rows, std::size_t cols, bool fill)
    : rows_(rows), cols_(cols), keep_(rows * cols, fill ? 1 : 0) {}

Mask Mask::columns(std::size_t rows, const std::vector<bool>& keep) {
  Mask m(rows, keep.size(), false);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < keep.size(); ++c) m.set(r, c, keep[c]);
  return m;
}

namespace {

enum class Broadcast { full, row };

Broadcast binary_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return Broadcast::full;
  if (a.rank() == 2 && b.rank() == 2 && b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::logic_error("operation on an empty Var");
  return *a.tape();
}

// Element-wise unary op with derivative expressed through input x and output y.
template <class F, class D>
Var unary(Var a, F f, D dfdx) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor y(x.shape(), std::vector<double>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  Var in[] = {a};
  return t.record(std::move(y), in, [ia, dfdx](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ia)) return;
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(self);
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < xv.size(); ++i) ga[i] += g[i] * dfdx(xv[i], yv[i]);
  });
}

double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double stable_softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + av.shape_string() + " x " + bv.shape_string());
  }
  const std::size_t p = av.rows(), q = av.cols(), r = bv.cols();
  Tensor out(p, r);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = av(i, k);
      for (std::size_t j = 0; j < r; ++j) out(i, j) += aik * bv(k, j);
    }
  const std::size_t ia = a.id(), ib = b.id();
  Var in[] = {a, b};
  return t.record(std::move(out), in, [ia, ib, p, q, r](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      const Tensor& bv = tp.value(ib);
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = 0; k < q; ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < r; ++j) acc += g(i, j) * bv(k, j);
          ga(i, k) += acc;
        }
    }
    if (tp.requires_grad(ib)) {
      const Tensor& av = tp.value(ia);
      Tensor& gb = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = 0; k < q; ++k) {
          const double aik = av(i, k);
          for (std::size_t j = 0; j < r; ++j) gb(k, j) += aik * g(i, j);
        }
    }
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  Var in[] = {a};
  return t.record(transpose(a.value()), in, [ia](Tape& tp, std::size_t self) {
    tp.accumulate(ia, transpose(tp.grad(self)));
  });
}

namespace {

// Shared body of add/sub/mul: out = a (op) b with optional row broadcast of b.
enum class Arith { add, sub, mul };

Var arith(Var a, Var b, Arith kind, const char* name) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast bc = binary_shape(av, bv, name);
  const std::size_t cols = av.rank() == 2 ? av.cols() : av.size();
  Tensor out(av.shape(), std::vector<double>(av.size()));
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double y = bc == Broadcast::full ? bv[i] : bv[i % cols];
    switch (kind) {
      case Arith::add: out[i] = av[i] + y; break;
      case Arith::sub: out[i] = av[i] - y; break;
      case Arith::mul: out[i] = av[i] * y; break;
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  Var in[] = {a, b};
  return t.record(std::move(out), in, [ia, ib, bc, cols, kind](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& av = tp.value(ia);
    const Tensor& bv = tp.value(ib);
    auto bidx = [&](std::size_t i) { return bc == Broadcast::full ? i : i % cols; };
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] += kind == Arith::mul ? g[i] * bv[bidx(i)] : g[i];
    }
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) {
        double d = g[i];
        if (kind == Arith::sub) d = -d;
        if (kind == Arith::mul) d *= av[i];
        gb[bidx(i)] += d;
      }
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return arith(a, b, Arith::add, "add"); }
Var sub(Var a, Var b) { return arith(a, b, Arith::sub, "sub"); }
Var mul(Var a, Var b) { return arith(a, b, Arith::mul, "mul"); }

Var neg(Var a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Var scale_by(Var s, Var a) {
  Tape& t = tape_of(a);
  if (s.value().size() != 1) throw ShapeError("scale_by: factor must be 1x1, got " + s.value().shape_string());
  const double f = s.value()[0];
  const Tensor& av = a.value();
  Tensor out(av.shape(), std::vector<double>(av.size()));
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f * av[i];
  const std::size_t is = s.id(), ia = a.id();
  Var in[] = {s, a};
  return t.record(std::move(out), in, [is, ia](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& av = tp.value(ia);
    if (tp.requires_grad(is)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
      tp.grad_buffer(is)[0] += acc;
    }
    if (tp.requires_grad(ia)) {
      const double f = tp.value(is)[0];
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += f * g[i];
    }
  });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var softplus(Var a) {
  return unary(a, stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Var leaky_relu(Var a, double slope) {
  return unary(a, [slope](double x) { return x > 0 ? x : slope * x; },
               [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var softmax_rows(Var a, const Mask* mask) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t p = x.rows(), q = x.cols();
  if (mask && (mask->rows() != p || mask->cols() != q)) {
    throw ShapeError("softmax_rows: mask " + to_string({mask->rows(), mask->cols()}) +
                     " does not match input " + x.shape_string());
  }
  auto keep = [&](std::size_t i, std::size_t j) { return !mask || mask->at(i, j); };
  Tensor y(p, q);
  for (std::size_t i = 0; i < p; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < q; ++j)
      if (keep(i, j)) mx = std::max(mx, x(i, j));
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw ShapeError("softmax_rows: row " + std::to_string(i) + " has no unmasked entry");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < q; ++j) {
      y(i, j) = keep(i, j) ? std::exp(x(i, j) - mx) : 0.0;
      total += y(i, j);
    }
    for (std::size_t j = 0; j < q; ++j) y(i, j) /= total;
  }
  const std::size_t ia = a.id();
  Var in[] = {a};
  return t.record(std::move(y), in, [ia, p, q](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ia)) return;
    const Tensor& yv = tp.value(self);
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < p; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < q; ++j) dot += yv(i, j) * g(i, j);
      for (std::size_t j = 0; j < q; ++j) ga(i, j) += yv(i, j) * (g(i, j) - dot);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
  Tape& t = tape_of(parts[0]);
  const std::size_t rows = parts[0].rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const Var& v : parts) {
    if (v.rows() != rows) {
      throw ShapeError("concat_cols: row counts differ, " + parts[0].value().shape_string() + " vs " +
                       v.value().shape_string());
    }
    offsets.push_back(total);
    total += v.cols();
  }
  Tensor out(rows, total);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, offsets[p] + j) = v(i, j);
  }
  std::vector<std::size_t> ids;
  for (const Var& v : parts) ids.push_back(v.id());
  return t.record(std::move(out), parts, [ids, offsets, rows](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (!tp.requires_grad(ids[p])) continue;
      Tensor& gp = tp.grad_buffer(ids[p]);
      const std::size_t c = gp.cols();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < c; ++j) gp(i, j) += g(i, offsets[p] + j);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: nothing to concatenate");
  Tape& t = tape_of(parts[0]);
  const std::size_t cols = parts[0].cols();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const Var& v : parts) {
    if (v.cols() != cols) {
      throw ShapeError("concat_rows: column counts differ, " + parts[0].value().shape_string() + " vs " +
                       v.value().shape_string());
    }
    offsets.push_back(total);
    total += v.rows();
  }
  std::vector<double> data;
  data.reserve(total * cols);
  for (const Var& v : parts) data.insert(data.end(), v.value().data().begin(), v.value().data().end());
  std::vector<std::size_t> ids;
  for (const Var& v : parts) ids.push_back(v.id());
  return t.record(Tensor::matrix(total, cols, std::move(data)), parts,
                  [ids, offsets, cols](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad(self);
                    for (std::size_t p = 0; p < ids.size(); ++p) {
                      if (!tp.requires_grad(ids[p])) continue;
                      Tensor& gp = tp.grad_buffer(ids[p]);
                      const std::size_t base = offsets[p] * cols;
                      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[base + i];
                    }
                  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (begin > end || end > x.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of " +
                     x.shape_string());
  }
  Tensor out(x.rows(), end - begin);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = x(i, j);
  const std::size_t ia = a.id();
  Var in[] = {a};
  return t.record(std::move(out), in, [ia, begin](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ia)) return;
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, begin + j) += g(i, j);
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (begin > end || end > x.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of " +
                     x.shape_string());
  }
  const std::size_t c = x.cols();
  std::vector<double> data(x.data().begin() + begin * c, x.data().begin() + end * c);
  const std::size_t ia = a.id();
  Var in[] = {a};
  return t.record(Tensor::matrix(end - begin, c, std::move(data)), in,
                  [ia, begin, c](Tape& tp, std::size_t self) {
                    if (!tp.requires_grad(ia)) return;
                    const Tensor& g = tp.grad(self);
                    Tensor& ga = tp.grad_buffer(ia);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * c + i] += g[i];
                  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (rows * cols != x.size()) {
    throw ShapeError("reshape: cannot view " + x.shape_string() + " as " + to_string({rows, cols}));
  }
  std::vector<double> data(x.data().begin(), x.data().end());
  const std::size_t ia = a.id();
  Var in[] = {a};
  return t.record(Tensor::matrix(rows, cols, std::move(data)), in, [ia](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ia)) return;
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var repeat_rows(Var a, std::size_t n) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (x.rows() != 1) throw ShapeError("repeat_rows: expected a 1xq row, got " + x.shape_string());
  const std::size_t c = x.cols();
  Tensor out(n, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) = x(0, j);
  const std::size_t ia = a.id();
  Var in[] = {a};
  return t.record(std::move(out), in, [ia](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ia)) return;
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(0, j) += g(i, j);
  });
}

Var gather_rows(Var table, std::span<const std::size_t> indices, bool frozen_padding_row) {
  Tape& t = tape_of(table);
  const Tensor& w = table.value();
  const std::size_t c = w.cols();
  Tensor out(indices.size(), c);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= w.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[r]) + " outside table " + w.shape_string());
    }
    for (std::size_t j = 0; j < c; ++j) out(r, j) = w(indices[r], j);
  }
  const std::size_t it = table.id();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Var in[] = {table};
  return t.record(std::move(out), in, [it, idx, c, frozen_padding_row](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(it)) return;
    const Tensor& g = tp.grad(self);
    Tensor& gt = tp.grad_buffer(it);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (frozen_padding_row && idx[r] == 0) continue;
      for (std::size_t j = 0; j < c; ++j) gt(idx[r], j) += g(r, j);
    }
  });
}

Var block_weighted_sum(Var g, Var w) {
  Tape& t = tape_of(g);
  const Tensor& gv = g.value();
  const Tensor& wv = w.value();
  const std::size_t k = wv.rows();
  if (k == 0 || wv.cols() != k || gv.rows() % k != 0 || gv.cols() % k != 0) {
    throw ShapeError("block_weighted_sum: " + gv.shape_string() + " is not tiled by " + wv.shape_string());
  }
  const std::size_t n = gv.rows() / k, m = gv.cols() / k;
  Tensor out(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t s = 0; s < k; ++s)
        for (std::size_t u = 0; u < k; ++u) acc += gv(i * k + s, j * k + u) * wv(s, u);
      out(i, j) = acc;
    }
  const std::size_t ig = g.id(), iw = w.id();
  Var in[] = {g, w};
  return t.record(std::move(out), in, [ig, iw, k, n, m](Tape& tp, std::size_t self) {
    const Tensor& d = tp.grad(self);
    const Tensor& gv = tp.value(ig);
    const Tensor& wv = tp.value(iw);
    const bool need_g = tp.requires_grad(ig), need_w = tp.requires_grad(iw);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double dij = d(i, j);
        for (std::size_t s = 0; s < k; ++s)
          for (std::size_t u = 0; u < k; ++u) {
            if (need_g) tp.grad_buffer(ig)(i * k + s, j * k + u) += dij * wv(s, u);
            if (need_w) tp.grad_buffer(iw)(s, u) += dij * gv(i * k + s, j * k + u);
          }
      }
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  const std::size_t ia = a.id();
  Var in[] = {a};
  return t.record(Tensor::scalar(acc), in, [ia](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ia)) return;
    const double g = tp.grad(self)[0];
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var mask_rows(Var a, const std::vector<bool>& keep) {
  if (keep.size() != a.rows()) throw ShapeError("mask_rows: mask length does not match " + a.value().shape_string());
  if (std::all_of(keep.begin(), keep.end(), [](bool b) { return b; })) return a;
  Tensor m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m(i, j) = keep[i] ? 1.0 : 0.0;
  return mul(a, tape_of(a).constant(std::move(m)));
}

Var bce_with_logits(Var logits, std::span<const double> labels, const std::vector<bool>& keep) {
  Tape& t = tape_of(logits);
  const Tensor& z = logits.value();
  if (z.cols() != 1 || z.rows() != labels.size() || keep.size() != labels.size()) {
    throw ShapeError("bce_with_logits: logits " + z.shape_string() + " vs " + std::to_string(labels.size()) +
                     " labels and " + std::to_string(keep.size()) + " mask entries");
  }
  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!keep[i]) continue;
    ++count;
    // softplus(z) - y z, written without overflow.
    total += std::max(z[i], 0.0) - labels[i] * z[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  if (count == 0) throw ShapeError("bce_with_logits: every item is masked");
  const std::size_t iz = logits.id();
  std::vector<double> y(labels.begin(), labels.end());
  Var in[] = {logits};
  return t.record(Tensor::scalar(total / static_cast<double>(count)), in,
                  [iz, y, keep, count](Tape& tp, std::size_t self) {
                    if (!tp.requires_grad(iz)) return;
                    const double g = tp.grad(self)[0] / static_cast<double>(count);
                    const Tensor& zv = tp.value(iz);
                    Tensor& gz = tp.grad_buffer(iz);
                    for (std::size_t i = 0; i < y.size(); ++i)
                      if (keep[i]) gz[i] += g * (stable_sigmoid(zv[i]) - y[i]);
                  });
}

}  // namespace mir
