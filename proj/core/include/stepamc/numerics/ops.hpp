#pragma once

#include <span>
#include <vector>

#include "stepamc/numerics/tape.hpp"

// Differentiable operations on tape values. Every value is a rows x cols
// matrix; a scalar is 1x1. Shape mismatches throw DimensionError, inputs
// outside an operation's domain throw ContractError.
namespace stepamc::num {

double sigmoid(double x) noexcept;
double log_sigmoid(double x) noexcept;

// Elementwise, identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var minimum(Var a, Var b);  // ties route the adjoint to a
Var maximum(Var a, Var b);  // ties route the adjoint to a

// a (m x n) plus a 1 x n row added to every row.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
// a (m x n) times a 1x1 value.
Var mul_scalar(Var a, Var s);

Var matmul(Var a, Var b);
Var transpose(Var a);

Var exp(Var a);
Var log(Var a);  // requires a > 0
Var square(Var a);
Var sigmoid(Var a);
Var log_sigmoid(Var a);
Var tanh(Var a);
Var gelu(Var a);  // tanh approximation

// Boundary points are treated as interior: the adjoint passes for lo <= x <= hi.
Var clamp(Var x, double lo, double hi);
Var clamp(Var x, std::span<const double> lo, std::span<const double> hi);

Var sum(Var a);
Var mean(Var a);

// Row-wise softmax with per-row max subtraction. With causal set, entry (i, j)
// for j > i is masked out (probability exactly 0).
Var softmax_rows(Var x, bool causal = false);
Var log_softmax_rows(Var x);

// Picks x(i, index[i]) for every row i; result is m x 1.
Var gather_rows(Var x, std::span<const int> index);
Var element(Var x, std::size_t r, std::size_t c);
Var slice_rows(Var x, std::size_t begin, std::size_t end);
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
// Rows of table selected by ids; result is ids.size() x table.cols().
Var embedding(Var table, std::span<const int> ids);

Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return scale(a, -1.0); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator+(Var a, double s) { return add_scalar(a, s); }
inline Var operator-(Var a, double s) { return add_scalar(a, -s); }
inline Var operator-(double s, Var a) { return add_scalar(scale(a, -1.0), s); }

}  // namespace stepamc::num
