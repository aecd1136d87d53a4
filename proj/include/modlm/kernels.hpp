// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense kernels used by the encoder forward/backward passes. Every kernel
// comes in two flavors: a plain serial reference (`*_ref`) kept for testing,
// and an OpenMP-parallel version used everywhere else. The parallel loops
// partition output elements, so each element is reduced serially in a fixed
// order; results are bitwise identical to the reference at any thread count.

#ifndef MODLM_KERNELS_HPP
#define MODLM_KERNELS_HPP

#include <cstdint>

namespace modlm::kern {

// y = x W^T + b. x: (rows, in), w: (out, in), b: (out) or nullptr.
void linear_forward_ref(const double* x, const double* w, const double* b,
                        double* y, std::int64_t rows, std::int64_t in,
                        std::int64_t out);
void linear_forward(const double* x, const double* w, const double* b,
                    double* y, std::int64_t rows, std::int64_t in,
                    std::int64_t out);

// dx = dy W. dy: (rows, out), w: (out, in), dx: (rows, in).
void linear_backward_input_ref(const double* dy, const double* w, double* dx,
                               std::int64_t rows, std::int64_t in,
                               std::int64_t out);
void linear_backward_input(const double* dy, const double* w, double* dx,
                           std::int64_t rows, std::int64_t in,
                           std::int64_t out);

// dw += dy^T x, db += colsum(dy). db may be nullptr.
void linear_backward_params_ref(const double* dy, const double* x, double* dw,
                                double* db, std::int64_t rows, std::int64_t in,
                                std::int64_t out);
void linear_backward_params(const double* dy, const double* x, double* dw,
                            double* db, std::int64_t rows, std::int64_t in,
                            std::int64_t out);

// Row-wise layer norm over the last dimension.
// y = g * (x - mean) / sqrt(var + eps) + b; xhat is stored for backward.
void layernorm_forward_ref(const double* x, const double* g, const double* b,
                           double* y, double* xhat, double* inv_std,
                           std::int64_t rows, std::int64_t cols, double eps);
void layernorm_forward(const double* x, const double* g, const double* b,
                       double* y, double* xhat, double* inv_std,
                       std::int64_t rows, std::int64_t cols, double eps);

// dx from dy given saved xhat/inv_std; accumulates dg, db (may be nullptr
// together). dg/db accumulation is serial over rows to keep the reduction
// order fixed.
void layernorm_backward_ref(const double* dy, const double* g,
                            const double* xhat, const double* inv_std,
                            double* dx, double* dg, double* db,
                            std::int64_t rows, std::int64_t cols);
void layernorm_backward(const double* dy, const double* g, const double* xhat,
                        const double* inv_std, double* dx, double* dg,
                        double* db, std::int64_t rows, std::int64_t cols);

// Exact (erf-based) GELU and its derivative.
double gelu_scalar(double x);
double gelu_grad_scalar(double x);
void gelu_forward_ref(const double* x, double* y, std::int64_t n);
void gelu_forward(const double* x, double* y, std::int64_t n);
// dx = dy * gelu'(x)
void gelu_backward_ref(const double* x, const double* dy, double* dx,
                       std::int64_t n);
void gelu_backward(const double* x, const double* dy, double* dx,
                   std::int64_t n);

// Row-wise softmax, numerically shifted by the row max.
void softmax_rows_ref(const double* x, double* y, std::int64_t rows,
                      std::int64_t cols);
void softmax_rows(const double* x, double* y, std::int64_t rows,
                  std::int64_t cols);

// Pairwise cosine similarity: a (n, d) x b (m, d) -> sim (n, m).
// Rows are unit-normalized first; zero rows score 0 against everything and
// bitwise-identical rows score exactly 1.
void cosine_matrix_ref(const double* a, const double* b, double* sim,
                       std::int64_t n, std::int64_t m, std::int64_t d);
void cosine_matrix(const double* a, const double* b, double* sim,
                   std::int64_t n, std::int64_t m, std::int64_t d);

// Worker cap for all parallel kernels (0 = library default).
void set_threads(int n);
int max_threads();

}  // namespace modlm::kern

#endif  // MODLM_KERNELS_HPP
