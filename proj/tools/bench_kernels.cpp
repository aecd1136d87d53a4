// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0
//
// Times the serial reference kernels against the OpenMP versions and
// checks that both produce bitwise-identical output.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "modlm/kernels.hpp"
#include "modlm/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warmup
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const std::string& name, double serial_ms, double parallel_ms,
            bool identical) {
  std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n",
              name.c_str(), serial_ms, parallel_ms, serial_ms / parallel_ms,
              identical ? "bitwise-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 5;
  if (argc > 1) reps = std::atoi(argv[1]);
  std::printf("kernel benchmark, %d threads, %d reps per timing\n",
              modlm::kern::max_threads(), reps);

  modlm::Rng rng(7);
  const std::int64_t rows = 512, in = 768, out = 768;
  std::vector<double> x(rows * in), w(out * in), b(out);
  for (auto& v : x) v = rng.normal();
  for (auto& v : w) v = rng.normal() * 0.02;
  for (auto& v : b) v = rng.normal() * 0.02;

  {
    std::vector<double> y1(rows * out), y2(rows * out);
    const double s = time_ms(
        [&] {
          modlm::kern::linear_forward_ref(x.data(), w.data(), b.data(),
                                          y1.data(), rows, in, out);
        },
        reps);
    const double p = time_ms(
        [&] {
          modlm::kern::linear_forward(x.data(), w.data(), b.data(), y2.data(),
                                      rows, in, out);
        },
        reps);
    report("linear_forward", s, p,
           std::memcmp(y1.data(), y2.data(), y1.size() * 8) == 0);
  }
  {
    std::vector<double> dy(rows * out);
    for (auto& v : dy) v = rng.normal();
    std::vector<double> dx1(rows * in), dx2(rows * in);
    const double s = time_ms(
        [&] {
          modlm::kern::linear_backward_input_ref(dy.data(), w.data(),
                                                 dx1.data(), rows, in, out);
        },
        reps);
    const double p = time_ms(
        [&] {
          modlm::kern::linear_backward_input(dy.data(), w.data(), dx2.data(),
                                             rows, in, out);
        },
        reps);
    report("linear_backward_input", s, p,
           std::memcmp(dx1.data(), dx2.data(), dx1.size() * 8) == 0);
  }
  {
    std::vector<double> dy(rows * out);
    for (auto& v : dy) v = rng.normal();
    std::vector<double> dw1(out * in), dw2(out * in), db1(out), db2(out);
    const double s = time_ms(
        [&] {
          std::fill(dw1.begin(), dw1.end(), 0.0);
          std::fill(db1.begin(), db1.end(), 0.0);
          modlm::kern::linear_backward_params_ref(
              dy.data(), x.data(), dw1.data(), db1.data(), rows, in, out);
        },
        reps);
    const double p = time_ms(
        [&] {
          std::fill(dw2.begin(), dw2.end(), 0.0);
          std::fill(db2.begin(), db2.end(), 0.0);
          modlm::kern::linear_backward_params(dy.data(), x.data(), dw2.data(),
                                              db2.data(), rows, in, out);
        },
        reps);
    report("linear_backward_params", s, p,
           std::memcmp(dw1.data(), dw2.data(), dw1.size() * 8) == 0 &&
               std::memcmp(db1.data(), db2.data(), db1.size() * 8) == 0);
  }
  {
    std::vector<double> g(in), bb(in), y1(rows * in), y2(rows * in),
        xh1(rows * in), xh2(rows * in), inv1(rows), inv2(rows);
    for (auto& v : g) v = 1.0 + 0.1 * rng.normal();
    for (auto& v : bb) v = 0.1 * rng.normal();
    const double s = time_ms(
        [&] {
          modlm::kern::layernorm_forward_ref(x.data(), g.data(), bb.data(),
                                             y1.data(), xh1.data(),
                                             inv1.data(), rows, in, 1e-5);
        },
        reps);
    const double p = time_ms(
        [&] {
          modlm::kern::layernorm_forward(x.data(), g.data(), bb.data(),
                                         y2.data(), xh2.data(), inv2.data(),
                                         rows, in, 1e-5);
        },
        reps);
    report("layernorm_forward", s, p,
           std::memcmp(y1.data(), y2.data(), y1.size() * 8) == 0);
  }
  {
    std::vector<double> y1(x.size()), y2(x.size());
    const double s = time_ms(
        [&] {
          modlm::kern::gelu_forward_ref(x.data(), y1.data(),
                                        static_cast<std::int64_t>(x.size()));
        },
        reps);
    const double p = time_ms(
        [&] {
          modlm::kern::gelu_forward(x.data(), y2.data(),
                                    static_cast<std::int64_t>(x.size()));
        },
        reps);
    report("gelu_forward", s, p,
           std::memcmp(y1.data(), y2.data(), y1.size() * 8) == 0);
  }
  {
    const std::int64_t n = 256, m = 256, d = 128;
    std::vector<double> a(n * d), c(m * d), s1(n * m), s2(n * m);
    for (auto& v : a) v = rng.normal();
    for (auto& v : c) v = rng.normal();
    const double s = time_ms(
        [&] {
          modlm::kern::cosine_matrix_ref(a.data(), c.data(), s1.data(), n, m,
                                         d);
        },
        reps);
    const double p = time_ms(
        [&] {
          modlm::kern::cosine_matrix(a.data(), c.data(), s2.data(), n, m, d);
        },
        reps);
    report("cosine_matrix", s, p,
           std::memcmp(s1.data(), s2.data(), s1.size() * 8) == 0);
  }
  return 0;
}
