#include "trajad/nn/ops.hpp"

#include <cmath>
#include <string>

#include "trajad/errors.hpp"

namespace trajad::nn {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

Matrix sigmoid_of(const Matrix& x) {
  return x.unaryExpr([](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); });
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Tape* t = a.tape();
  return t->record(a.value() * b.value(), {a, b}, [t, a, b](const Matrix& g) {
    if (t->requires_grad(a)) t->accumulate(a, g * b.value().transpose());
    if (t->requires_grad(b)) t->accumulate(b, a.value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tape* t = a.tape();
  return t->record(a.value() + b.value(), {a, b}, [t, a, b](const Matrix& g) {
    t->accumulate(a, g);
    t->accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tape* t = a.tape();
  return t->record(a.value() - b.value(), {a, b}, [t, a, b](const Matrix& g) {
    t->accumulate(a, g);
    if (t->requires_grad(b)) t->accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tape* t = a.tape();
  return t->record(a.value().cwiseProduct(b.value()), {a, b}, [t, a, b](const Matrix& g) {
    if (t->requires_grad(a)) t->accumulate(a, g.cwiseProduct(b.value()));
    if (t->requires_grad(b)) t->accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double s) {
  Tape* t = a.tape();
  return t->record(a.value() * s, {a}, [t, a, s](const Matrix& g) { t->accumulate(a, g * s); });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: bias must be 1 x cols");
  Tape* t = a.tape();
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return t->record(std::move(out), {a, row}, [t, a, row](const Matrix& g) {
    t->accumulate(a, g);
    if (t->requires_grad(row)) t->accumulate(row, g.colwise().sum());
  });
}

Var silu(Var a) {
  Tape* t = a.tape();
  Matrix sig = sigmoid_of(a.value());
  Matrix out = a.value().cwiseProduct(sig);
  return t->record(std::move(out), {a}, [t, a, sig = std::move(sig)](const Matrix& g) {
    const Matrix& x = a.value();
    Matrix d = sig.array() * (1.0 + x.array() * (1.0 - sig.array()));
    t->accumulate(a, g.cwiseProduct(d));
  });
}

Var tanh(Var a) {
  Tape* t = a.tape();
  Matrix y = a.value().array().tanh().matrix();
  return t->record(y, {a}, [t, a, y](const Matrix& g) {
    t->accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var sigmoid(Var a) {
  Tape* t = a.tape();
  Matrix y = sigmoid_of(a.value());
  return t->record(y, {a}, [t, a, y](const Matrix& g) {
    t->accumulate(a, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var exp(Var a) {
  Tape* t = a.tape();
  Matrix y = a.value().array().exp().matrix();
  return t->record(y, {a}, [t, a, y](const Matrix& g) { t->accumulate(a, g.cwiseProduct(y)); });
}

Var square(Var a) {
  Tape* t = a.tape();
  return t->record(a.value().array().square().matrix(), {a},
                   [t, a](const Matrix& g) { t->accumulate(a, 2.0 * g.cwiseProduct(a.value())); });
}

Var sum(Var a) {
  Tape* t = a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t->record(std::move(out), {a}, [t, a](const Matrix& g) {
    t->accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean: empty operand");
  return scale(sum(a), 1.0 / n);
}

Var row_sums(Var a) {
  Tape* t = a.tape();
  return t->record(a.value().rowwise().sum(), {a}, [t, a](const Matrix& g) {
    t->accumulate(a, g.col(0).replicate(1, a.cols()));
  });
}

Var softmax_rows(Var a) {
  Tape* t = a.tape();
  Matrix y = a.value();
  for (Index r = 0; r < y.rows(); ++r) {
    y.row(r).array() -= y.row(r).maxCoeff();
    y.row(r) = y.row(r).array().exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return t->record(y, {a}, [t, a, y](const Matrix& g) {
    const Matrix gy = g.cwiseProduct(y);
    Matrix d = gy - y.cwiseProduct(gy.rowwise().sum().replicate(1, y.cols()));
    t->accumulate(a, d);
  });
}

Var log_softmax_rows(Var a) {
  Tape* t = a.tape();
  Matrix y = a.value();
  for (Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    const double lse = m + std::log((y.row(r).array() - m).exp().sum());
    y.row(r).array() -= lse;
  }
  return t->record(y, {a}, [t, a, y](const Matrix& g) {
    const Matrix p = y.array().exp().matrix();
    Matrix d = g - p.cwiseProduct(g.rowwise().sum().replicate(1, y.cols()));
    t->accumulate(a, d);
  });
}

Var l2_normalize_rows(Var a, double eps) {
  Tape* t = a.tape();
  const Vector norms = a.value().rowwise().norm().cwiseMax(eps);
  Matrix y = a.value();
  for (Index r = 0; r < y.rows(); ++r) y.row(r) /= norms(r);
  return t->record(y, {a}, [t, a, y, norms](const Matrix& g) {
    Matrix d(g.rows(), g.cols());
    for (Index r = 0; r < g.rows(); ++r) {
      const double proj = g.row(r).dot(y.row(r));
      d.row(r) = (g.row(r) - proj * y.row(r)) / norms(r);
    }
    t->accumulate(a, d);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  Tape* t = parts.front().tape();
  return t->record(std::move(out), parts, [t, parts](const Matrix& g) {
    Index c0 = 0;
    for (const Var& p : parts) {
      if (t->requires_grad(p)) t->accumulate(p, g.middleCols(c0, p.cols()));
      c0 += p.cols();
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  Tape* t = parts.front().tape();
  return t->record(std::move(out), parts, [t, parts](const Matrix& g) {
    Index r0 = 0;
    for (const Var& p : parts) {
      if (t->requires_grad(p)) t->accumulate(p, g.middleRows(r0, p.rows()));
      r0 += p.rows();
    }
  });
}

Var slice_cols(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: out of range");
  Tape* t = a.tape();
  return t->record(a.value().middleCols(start, count), {a}, [t, a, start, count](const Matrix& g) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    d.middleCols(start, count) = g;
    t->accumulate(a, d);
  });
}

Var slice_rows(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows: out of range");
  Tape* t = a.tape();
  return t->record(a.value().middleRows(start, count), {a}, [t, a, start, count](const Matrix& g) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    d.middleRows(start, count) = g;
    t->accumulate(a, d);
  });
}

Var gather_rows(Var a, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw ShapeError("gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  Tape* t = a.tape();
  return t->record(std::move(out), {a}, [t, a, rows](const Matrix& g) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) d.row(rows[i]) += g.row(static_cast<Index>(i));
    t->accumulate(a, d);
  });
}

Var segment_mean(Var a, const std::vector<Index>& segment, Index segments) {
  if (static_cast<Index>(segment.size()) != a.rows()) throw ShapeError("segment_mean: one id per row required");
  Vector counts = Vector::Zero(segments);
  Matrix out = Matrix::Zero(segments, a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    const Index s = segment[static_cast<std::size_t>(r)];
    if (s < 0 || s >= segments) throw ShapeError("segment_mean: segment id out of range");
    out.row(s) += a.value().row(r);
    counts(s) += 1.0;
  }
  for (Index s = 0; s < segments; ++s) {
    if (counts(s) > 0) out.row(s) /= counts(s);
  }
  Tape* t = a.tape();
  return t->record(std::move(out), {a}, [t, a, segment, counts](const Matrix& g) {
    Matrix d(a.rows(), a.cols());
    for (Index r = 0; r < a.rows(); ++r) {
      const Index s = segment[static_cast<std::size_t>(r)];
      d.row(r) = g.row(s) / counts(s);
    }
    t->accumulate(a, d);
  });
}

Var group_rows(Var a, Index g) {
  if (g <= 0 || a.rows() % g != 0) throw ShapeError("group_rows: row count not divisible by group");
  const Index rows = a.rows() / g;
  const Index c = a.cols();
  Matrix out(rows, c * g);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < g; ++j) out.block(i, j * c, 1, c) = a.value().row(i * g + j);
  }
  Tape* t = a.tape();
  return t->record(std::move(out), {a}, [t, a, g, rows, c](const Matrix& grad) {
    Matrix d(a.rows(), c);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < g; ++j) d.row(i * g + j) = grad.block(i, j * c, 1, c);
    }
    t->accumulate(a, d);
  });
}

Var ungroup_rows(Var a, Index g) {
  if (g <= 0 || a.cols() % g != 0) throw ShapeError("ungroup_rows: column count not divisible by group");
  const Index c = a.cols() / g;
  Matrix out(a.rows() * g, c);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < g; ++j) out.row(i * g + j) = a.value().block(i, j * c, 1, c);
  }
  Tape* t = a.tape();
  return t->record(std::move(out), {a}, [t, a, g, c](const Matrix& grad) {
    Matrix d(a.rows(), a.cols());
    for (Index i = 0; i < a.rows(); ++i) {
      for (Index j = 0; j < g; ++j) d.block(i, j * c, 1, c) = grad.row(i * g + j);
    }
    t->accumulate(a, d);
  });
}

namespace {

// im2col for a kernel-3 same-padded dilated convolution.
Matrix unfold3(const Matrix& x, Index length, Index dilation) {
  const Index cin = x.cols();
  Matrix cols = Matrix::Zero(x.rows(), 3 * cin);
  const Index seqs = x.rows() / length;
  for (Index s = 0; s < seqs; ++s) {
    const Index base = s * length;
    for (Index k = 0; k < 3; ++k) {
      const Index shift = (k - 1) * dilation;
      const Index lo = std::max<Index>(0, -shift);
      const Index hi = std::min<Index>(length, length - shift);
      if (hi > lo) cols.block(base + lo, k * cin, hi - lo, cin) = x.middleRows(base + lo + shift, hi - lo);
    }
  }
  return cols;
}

Matrix fold3(const Matrix& cols, Index length, Index dilation, Index cin) {
  Matrix x = Matrix::Zero(cols.rows(), cin);
  const Index seqs = cols.rows() / length;
  for (Index s = 0; s < seqs; ++s) {
    const Index base = s * length;
    for (Index k = 0; k < 3; ++k) {
      const Index shift = (k - 1) * dilation;
      const Index lo = std::max<Index>(0, -shift);
      const Index hi = std::min<Index>(length, length - shift);
      if (hi > lo) x.middleRows(base + lo + shift, hi - lo) += cols.block(base + lo, k * cin, hi - lo, cin);
    }
  }
  return x;
}

}  // namespace

Var conv1d(Var x, Var weight, Var bias, Index length, Index dilation) {
  if (length <= 0 || x.rows() % length != 0) throw ShapeError("conv1d: rows must be a multiple of the sequence length");
  if (weight.rows() != 3 * x.cols()) throw ShapeError("conv1d: weight must have 3*Cin rows");
  if (bias.rows() != 1 || bias.cols() != weight.cols()) throw ShapeError("conv1d: bias must be 1 x Cout");
  Matrix cols = unfold3(x.value(), length, dilation);
  Matrix out = cols * weight.value();
  out.rowwise() += bias.value().row(0);
  Tape* t = x.tape();
  return t->record(std::move(out), {x, weight, bias},
                   [t, x, weight, bias, length, dilation, cols = std::move(cols)](const Matrix& g) {
                     if (t->requires_grad(weight)) t->accumulate(weight, cols.transpose() * g);
                     if (t->requires_grad(bias)) t->accumulate(bias, g.colwise().sum());
                     if (t->requires_grad(x)) {
                       t->accumulate(x, fold3(g * weight.value().transpose(), length, dilation, x.cols()));
                     }
                   });
}

Var temporal_diff(Var x, Index length) {
  if (length <= 0 || x.rows() % length != 0) throw ShapeError("temporal_diff: rows must be a multiple of the length");
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  const Index seqs = x.rows() / length;
  for (Index s = 0; s < seqs; ++s) {
    const Index base = s * length;
    out.middleRows(base + 1, length - 1) =
        x.value().middleRows(base + 1, length - 1) - x.value().middleRows(base, length - 1);
  }
  Tape* t = x.tape();
  return t->record(std::move(out), {x}, [t, x, length, seqs](const Matrix& g) {
    Matrix d = Matrix::Zero(x.rows(), x.cols());
    for (Index s = 0; s < seqs; ++s) {
      const Index base = s * length;
      d.middleRows(base + 1, length - 1) += g.middleRows(base + 1, length - 1);
      d.middleRows(base, length - 1) -= g.middleRows(base + 1, length - 1);
    }
    t->accumulate(x, d);
  });
}

Var smooth_l1_mean(Var prediction, Var target) {
  require_same_shape(prediction, target, "smooth_l1_mean");
  const Matrix diff = prediction.value() - target.value();
  const double n = static_cast<double>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = diff.unaryExpr([](double d) {
    const double a = std::abs(d);
    return a < 1.0 ? 0.5 * a * a : a - 0.5;
  }).sum() / n;
  Tape* t = prediction.tape();
  return t->record(std::move(out), {prediction, target}, [t, prediction, target, diff, n](const Matrix& g) {
    Matrix d = diff.unaryExpr([](double v) { return std::abs(v) < 1.0 ? v : (v > 0 ? 1.0 : -1.0); }) * (g(0, 0) / n);
    if (t->requires_grad(prediction)) t->accumulate(prediction, d);
    if (t->requires_grad(target)) t->accumulate(target, -d);
  });
}

Var bce_with_logits_mean(Var logits, const Matrix& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw ShapeError("bce_with_logits_mean: shape mismatch");
  }
  const Matrix& x = logits.value();
  const double n = static_cast<double>(x.size());
  double total = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double v = x(i);
    total += std::max(v, 0.0) - v * targets(i) + std::log1p(std::exp(-std::abs(v)));
  }
  Matrix out(1, 1);
  out(0, 0) = total / n;
  Tape* t = logits.tape();
  return t->record(std::move(out), {logits}, [t, logits, targets, n](const Matrix& g) {
    Matrix d = (sigmoid_of(logits.value()) - targets) * (g(0, 0) / n);
    t->accumulate(logits, d);
  });
}

}  // namespace trajad::nn
