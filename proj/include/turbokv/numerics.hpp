#pragma once

#include <vector>

#include "turbokv/matrix.hpp"

namespace turbokv {

// Dense kernels shared by the whole engine. All functions are pure: no
// hidden state, bit-identical outputs for identical inputs.

// Standard product, (a.rows x a.cols) * (b.rows x b.cols) -> (a.rows x b.cols).
Matrix matmul(const Matrix& a, const Matrix& b);

// Row-wise softmax with per-row max subtraction. Entries that are -inf map
// to exactly 0. A row that is entirely -inf throws DegenerateRowError.
Matrix softmax_rows(const Matrix& m);
void softmax_rows_inplace(Matrix& m);

// x scaled by 1/sqrt(mean(x^2) + eps), elementwise times weight.
std::vector<double> rmsnorm(const std::vector<double>& x,
                            const std::vector<double>& weight,
                            double eps);

// rmsnorm applied to every row of x with a shared weight vector.
Matrix rmsnorm_rows(const Matrix& x, const std::vector<double>& weight, double eps);

// silu(z) = z * sigmoid(z)
double silu(double z);

// (silu(x*w_gate) ⊙ (x*w_up)) * w_down for a single row vector.
// w_gate, w_up: hidden x intermediate; w_down: intermediate x hidden.
std::vector<double> swiglu(const std::vector<double>& x,
                           const Matrix& w_gate,
                           const Matrix& w_up,
                           const Matrix& w_down);

// Same, applied to every row of x at once.
Matrix swiglu_rows(const Matrix& x,
                   const Matrix& w_gate,
                   const Matrix& w_up,
                   const Matrix& w_down);

// out = a + b elementwise.
Matrix add(const Matrix& a, const Matrix& b);

} // namespace turbokv
