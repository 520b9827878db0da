#pragma once

#include <vector>

#include "trajad/nn/tape.hpp"

namespace trajad::nn {

// Elementwise / linear algebra.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_row(Var a, Var row);  // broadcast a 1 x C row over every row of a
Var silu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var square(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator*(double s, Var a) { return scale(a, s); }

// Reductions to 1x1.
Var sum(Var a);
Var mean(Var a);
Var row_sums(Var a);  // R x 1

// Row-wise normalisers.
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var l2_normalize_rows(Var a, double eps = 1e-12);

// Structural ops.
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, Index start, Index count);
Var slice_rows(Var a, Index start, Index count);
Var gather_rows(Var a, const std::vector<Index>& rows);
// Mean of rows sharing a segment id; empty segments give zero rows.
Var segment_mean(Var a, const std::vector<Index>& segment, Index segments);
// (R x C) -> (R/g x C*g): consecutive groups of g rows become one row.
Var group_rows(Var a, Index g);
// Inverse of group_rows.
Var ungroup_rows(Var a, Index g);

// Sequences are stored as consecutive blocks of `length` rows.
// Same-padded dilated convolution with kernel 3; weight is (3*Cin) x Cout.
Var conv1d(Var x, Var weight, Var bias, Index length, Index dilation);
// Row t holds x[t] - x[t-1] (zero for t = 0) within each sequence.
Var temporal_diff(Var x, Index length);

// Losses (1x1, averaged over every element).
Var smooth_l1_mean(Var prediction, Var target);
Var bce_with_logits_mean(Var logits, const Matrix& targets);

}  // namespace trajad::nn
