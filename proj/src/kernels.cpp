// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include "modlm/kernels.hpp"

#include <cmath>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace modlm::kern {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void linear_forward_ref(const double* x, const double* w, const double* b,
                        double* y, std::int64_t rows, std::int64_t in,
                        std::int64_t out) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = x + r * in;
    double* yr = y + r * out;
    for (std::int64_t o = 0; o < out; ++o) {
      const double* wo = w + o * in;
      double acc = b ? b[o] : 0.0;
      for (std::int64_t i = 0; i < in; ++i) acc += xr[i] * wo[i];
      yr[o] = acc;
    }
  }
}

void linear_forward(const double* x, const double* w, const double* b,
                    double* y, std::int64_t rows, std::int64_t in,
                    std::int64_t out) {
#pragma omp parallel for collapse(2) if (rows * out > 256)
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t o = 0; o < out; ++o) {
      const double* xr = x + r * in;
      const double* wo = w + o * in;
      double acc = b ? b[o] : 0.0;
      for (std::int64_t i = 0; i < in; ++i) acc += xr[i] * wo[i];
      y[r * out + o] = acc;
    }
  }
}

void linear_backward_input_ref(const double* dy, const double* w, double* dx,
                               std::int64_t rows, std::int64_t in,
                               std::int64_t out) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* dyr = dy + r * out;
    double* dxr = dx + r * in;
    for (std::int64_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::int64_t o = 0; o < out; ++o) acc += dyr[o] * w[o * in + i];
      dxr[i] = acc;
    }
  }
}

void linear_backward_input(const double* dy, const double* w, double* dx,
                           std::int64_t rows, std::int64_t in,
                           std::int64_t out) {
#pragma omp parallel for collapse(2) if (rows * in > 256)
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t i = 0; i < in; ++i) {
      const double* dyr = dy + r * out;
      double acc = 0.0;
      for (std::int64_t o = 0; o < out; ++o) acc += dyr[o] * w[o * in + i];
      dx[r * in + i] = acc;
    }
  }
}

void linear_backward_params_ref(const double* dy, const double* x, double* dw,
                                double* db, std::int64_t rows, std::int64_t in,
                                std::int64_t out) {
  for (std::int64_t o = 0; o < out; ++o) {
    double* dwo = dw + o * in;
    double dbo = 0.0;
    for (std::int64_t r = 0; r < rows; ++r) {
      const double g = dy[r * out + o];
      dbo += g;
      const double* xr = x + r * in;
      for (std::int64_t i = 0; i < in; ++i) dwo[i] += g * xr[i];
    }
    if (db) db[o] += dbo;
  }
}

void linear_backward_params(const double* dy, const double* x, double* dw,
                            double* db, std::int64_t rows, std::int64_t in,
                            std::int64_t out) {
#pragma omp parallel for if (out > 4)
  for (std::int64_t o = 0; o < out; ++o) {
    double* dwo = dw + o * in;
    double dbo = 0.0;
    for (std::int64_t r = 0; r < rows; ++r) {
      const double g = dy[r * out + o];
      dbo += g;
      const double* xr = x + r * in;
      for (std::int64_t i = 0; i < in; ++i) dwo[i] += g * xr[i];
    }
    if (db) db[o] += dbo;
  }
}

namespace {
inline void layernorm_row(const double* xr, const double* g, const double* b,
                          double* yr, double* xhatr, double* inv_stdr,
                          std::int64_t cols, double eps) {
  double mean = 0.0;
  for (std::int64_t c = 0; c < cols; ++c) mean += xr[c];
  mean /= static_cast<double>(cols);
  double var = 0.0;
  for (std::int64_t c = 0; c < cols; ++c) {
    const double d = xr[c] - mean;
    var += d * d;
  }
  var /= static_cast<double>(cols);
  const double inv = 1.0 / std::sqrt(var + eps);
  *inv_stdr = inv;
  for (std::int64_t c = 0; c < cols; ++c) {
    const double xh = (xr[c] - mean) * inv;
    xhatr[c] = xh;
    yr[c] = g[c] * xh + b[c];
  }
}
}  // namespace

void layernorm_forward_ref(const double* x, const double* g, const double* b,
                           double* y, double* xhat, double* inv_std,
                           std::int64_t rows, std::int64_t cols, double eps) {
  for (std::int64_t r = 0; r < rows; ++r) {
    layernorm_row(x + r * cols, g, b, y + r * cols, xhat + r * cols,
                  inv_std + r, cols, eps);
  }
}

void layernorm_forward(const double* x, const double* g, const double* b,
                       double* y, double* xhat, double* inv_std,
                       std::int64_t rows, std::int64_t cols, double eps) {
#pragma omp parallel for if (rows > 8)
  for (std::int64_t r = 0; r < rows; ++r) {
    layernorm_row(x + r * cols, g, b, y + r * cols, xhat + r * cols,
                  inv_std + r, cols, eps);
  }
}

namespace {
inline void layernorm_row_dx(const double* dyr, const double* g,
                             const double* xhatr, double inv_std, double* dxr,
                             std::int64_t cols) {
  double sum_dyg = 0.0;
  double sum_dyg_xhat = 0.0;
  for (std::int64_t c = 0; c < cols; ++c) {
    const double t = dyr[c] * g[c];
    sum_dyg += t;
    sum_dyg_xhat += t * xhatr[c];
  }
  const double n = static_cast<double>(cols);
  for (std::int64_t c = 0; c < cols; ++c) {
    const double t = dyr[c] * g[c];
    dxr[c] = inv_std * (t - sum_dyg / n - xhatr[c] * sum_dyg_xhat / n);
  }
}
}  // namespace

void layernorm_backward_ref(const double* dy, const double* g,
                            const double* xhat, const double* inv_std,
                            double* dx, double* dg, double* db,
                            std::int64_t rows, std::int64_t cols) {
  for (std::int64_t r = 0; r < rows; ++r) {
    layernorm_row_dx(dy + r * cols, g, xhat + r * cols, inv_std[r],
                     dx + r * cols, cols);
  }
  if (dg && db) {
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* dyr = dy + r * cols;
      const double* xhr = xhat + r * cols;
      for (std::int64_t c = 0; c < cols; ++c) {
        dg[c] += dyr[c] * xhr[c];
        db[c] += dyr[c];
      }
    }
  }
}

void layernorm_backward(const double* dy, const double* g, const double* xhat,
                        const double* inv_std, double* dx, double* dg,
                        double* db, std::int64_t rows, std::int64_t cols) {
#pragma omp parallel for if (rows > 8)
  for (std::int64_t r = 0; r < rows; ++r) {
    layernorm_row_dx(dy + r * cols, g, xhat + r * cols, inv_std[r],
                     dx + r * cols, cols);
  }
  if (dg && db) {
    // column reductions run over rows in fixed order; parallel over columns
#pragma omp parallel for if (cols > 8)
    for (std::int64_t c = 0; c < cols; ++c) {
      double acc_g = 0.0;
      double acc_b = 0.0;
      for (std::int64_t r = 0; r < rows; ++r) {
        acc_g += dy[r * cols + c] * xhat[r * cols + c];
        acc_b += dy[r * cols + c];
      }
      dg[c] += acc_g;
      db[c] += acc_b;
    }
  }
}

double gelu_scalar(double x) {
  return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

double gelu_grad_scalar(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

void gelu_forward_ref(const double* x, double* y, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) y[i] = gelu_scalar(x[i]);
}

void gelu_forward(const double* x, double* y, std::int64_t n) {
#pragma omp parallel for if (n > 1024)
  for (std::int64_t i = 0; i < n; ++i) y[i] = gelu_scalar(x[i]);
}

void gelu_backward_ref(const double* x, const double* dy, double* dx,
                       std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) dx[i] = dy[i] * gelu_grad_scalar(x[i]);
}

void gelu_backward(const double* x, const double* dy, double* dx,
                   std::int64_t n) {
#pragma omp parallel for if (n > 1024)
  for (std::int64_t i = 0; i < n; ++i) dx[i] = dy[i] * gelu_grad_scalar(x[i]);
}

namespace {
inline void softmax_row(const double* xr, double* yr, std::int64_t cols) {
  double mx = xr[0];
  for (std::int64_t c = 1; c < cols; ++c) mx = xr[c] > mx ? xr[c] : mx;
  double z = 0.0;
  for (std::int64_t c = 0; c < cols; ++c) {
    yr[c] = std::exp(xr[c] - mx);
    z += yr[c];
  }
  const double inv = 1.0 / z;
  for (std::int64_t c = 0; c < cols; ++c) yr[c] *= inv;
}
}  // namespace

void softmax_rows_ref(const double* x, double* y, std::int64_t rows,
                      std::int64_t cols) {
  for (std::int64_t r = 0; r < rows; ++r)
    softmax_row(x + r * cols, y + r * cols, cols);
}

void softmax_rows(const double* x, double* y, std::int64_t rows,
                  std::int64_t cols) {
#pragma omp parallel for if (rows > 8)
  for (std::int64_t r = 0; r < rows; ++r)
    softmax_row(x + r * cols, y + r * cols, cols);
}

namespace {
inline double cosine_cell(const double* ar, double na, const double* br,
                          double nb, std::int64_t d) {
  if (na == 0.0 || nb == 0.0) return 0.0;
  if (std::memcmp(ar, br, sizeof(double) * static_cast<std::size_t>(d)) == 0)
    return 1.0;  // identical vectors score exactly 1
  double dot = 0.0;
  for (std::int64_t k = 0; k < d; ++k) dot += ar[k] * br[k];
  double s = dot / (na * nb);
  if (s > 1.0) s = 1.0;
  if (s < -1.0) s = -1.0;
  return s;
}

void row_norms(const double* a, double* out, std::int64_t n, std::int64_t d) {
  for (std::int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    const double* r = a + i * d;
    for (std::int64_t k = 0; k < d; ++k) s += r[k] * r[k];
    out[i] = std::sqrt(s);
  }
}
}  // namespace

void cosine_matrix_ref(const double* a, const double* b, double* sim,
                       std::int64_t n, std::int64_t m, std::int64_t d) {
  std::vector<double> na(static_cast<std::size_t>(n));
  std::vector<double> nb(static_cast<std::size_t>(m));
  row_norms(a, na.data(), n, d);
  row_norms(b, nb.data(), m, d);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < m; ++j)
      sim[i * m + j] = cosine_cell(a + i * d, na[i], b + j * d, nb[j], d);
}

void cosine_matrix(const double* a, const double* b, double* sim,
                   std::int64_t n, std::int64_t m, std::int64_t d) {
  std::vector<double> na(static_cast<std::size_t>(n));
  std::vector<double> nb(static_cast<std::size_t>(m));
  row_norms(a, na.data(), n, d);
  row_norms(b, nb.data(), m, d);
#pragma omp parallel for collapse(2) if (n * m > 64)
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < m; ++j)
      sim[i * m + j] = cosine_cell(a + i * d, na[i], b + j * d, nb[j], d);
}

}  // namespace modlm::kern
