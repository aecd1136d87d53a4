// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstring>
#include <vector>

#include "modlm/kernels.hpp"
#include "modlm/rng.hpp"
#include "modlm/text.hpp"

using namespace modlm;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal() * scale;
  return v;
}

bool bitwise_equal(const std::vector<double>& a,
                   const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * 8) == 0;
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bitwise") {
  Rng rng(123);
  const std::int64_t rows = 37, in = 29, out = 41;
  const auto x = random_vec(rows * in, rng);
  const auto w = random_vec(out * in, rng, 0.1);
  const auto b = random_vec(out, rng, 0.1);

  for (int threads : {1, 2, 4, 8}) {
    kern::set_threads(threads);
    CAPTURE(threads);

    std::vector<double> y_ref(rows * out), y_par(rows * out);
    kern::linear_forward_ref(x.data(), w.data(), b.data(), y_ref.data(), rows,
                             in, out);
    kern::linear_forward(x.data(), w.data(), b.data(), y_par.data(), rows, in,
                         out);
    CHECK(bitwise_equal(y_ref, y_par));

    const auto dy = y_ref;
    std::vector<double> dx_ref(rows * in), dx_par(rows * in);
    kern::linear_backward_input_ref(dy.data(), w.data(), dx_ref.data(), rows,
                                    in, out);
    kern::linear_backward_input(dy.data(), w.data(), dx_par.data(), rows, in,
                                out);
    CHECK(bitwise_equal(dx_ref, dx_par));

    std::vector<double> dw_ref(out * in), dw_par(out * in), db_ref(out),
        db_par(out);
    kern::linear_backward_params_ref(dy.data(), x.data(), dw_ref.data(),
                                     db_ref.data(), rows, in, out);
    kern::linear_backward_params(dy.data(), x.data(), dw_par.data(),
                                 db_par.data(), rows, in, out);
    CHECK(bitwise_equal(dw_ref, dw_par));
    CHECK(bitwise_equal(db_ref, db_par));

    std::vector<double> g(in, 1.0), bb(in, 0.0);
    std::vector<double> ln_ref(rows * in), ln_par(rows * in),
        xh_ref(rows * in), xh_par(rows * in), inv_ref(rows), inv_par(rows);
    kern::layernorm_forward_ref(x.data(), g.data(), bb.data(), ln_ref.data(),
                                xh_ref.data(), inv_ref.data(), rows, in, 1e-5);
    kern::layernorm_forward(x.data(), g.data(), bb.data(), ln_par.data(),
                            xh_par.data(), inv_par.data(), rows, in, 1e-5);
    CHECK(bitwise_equal(ln_ref, ln_par));

    std::vector<double> dg_ref(in), dg_par(in), dbb_ref(in), dbb_par(in),
        dxn_ref(rows * in), dxn_par(rows * in);
    kern::layernorm_backward_ref(dy.data(), g.data(), xh_ref.data(),
                                 inv_ref.data(), dxn_ref.data(), dg_ref.data(),
                                 dbb_ref.data(), rows, in);
    kern::layernorm_backward(dy.data(), g.data(), xh_par.data(),
                             inv_par.data(), dxn_par.data(), dg_par.data(),
                             dbb_par.data(), rows, in);
    CHECK(bitwise_equal(dxn_ref, dxn_par));
    CHECK(bitwise_equal(dg_ref, dg_par));
    CHECK(bitwise_equal(dbb_ref, dbb_par));

    std::vector<double> gelu_ref(x.size()), gelu_par(x.size());
    kern::gelu_forward_ref(x.data(), gelu_ref.data(),
                           static_cast<std::int64_t>(x.size()));
    kern::gelu_forward(x.data(), gelu_par.data(),
                       static_cast<std::int64_t>(x.size()));
    CHECK(bitwise_equal(gelu_ref, gelu_par));

    std::vector<double> sm_ref(rows * in), sm_par(rows * in);
    kern::softmax_rows_ref(x.data(), sm_ref.data(), rows, in);
    kern::softmax_rows(x.data(), sm_par.data(), rows, in);
    CHECK(bitwise_equal(sm_ref, sm_par));

    std::vector<double> cos_ref(rows * rows), cos_par(rows * rows);
    kern::cosine_matrix_ref(x.data(), x.data(), cos_ref.data(), rows, rows,
                            in);
    kern::cosine_matrix(x.data(), x.data(), cos_par.data(), rows, rows, in);
    CHECK(bitwise_equal(cos_ref, cos_par));
  }
  kern::set_threads(0);
}

TEST_CASE("gelu derivative matches finite differences") {
  for (double x : {-3.0, -1.0, -0.1, 0.0, 0.5, 2.0, 4.0}) {
    const double h = 1e-6;
    const double fd =
        (kern::gelu_scalar(x + h) - kern::gelu_scalar(x - h)) / (2 * h);
    CHECK(kern::gelu_grad_scalar(x) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("cosine matrix: identical rows score exactly 1, zero rows 0") {
  Rng rng(5);
  auto a = random_vec(3 * 4, rng);
  for (int i = 0; i < 4; ++i) a[static_cast<std::size_t>(8 + i)] = 0.0;  // third row zero
  std::vector<double> sim(9);
  kern::cosine_matrix(a.data(), a.data(), sim.data(), 3, 3, 4);
  CHECK(sim[0] == 1.0);
  CHECK(sim[4] == 1.0);
  CHECK(sim[8] == 0.0);  // zero vector scores 0 against everything
  CHECK(sim[2] == 0.0);
}

TEST_CASE("softmax rows are normalized") {
  Rng rng(9);
  const auto x = random_vec(6 * 11, rng, 3.0);
  std::vector<double> y(x.size());
  kern::softmax_rows(x.data(), y.data(), 6, 11);
  for (int r = 0; r < 6; ++r) {
    double s = 0.0;
    for (int c = 0; c < 11; ++c) s += y[static_cast<std::size_t>(r * 11 + c)];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("text normalization") {
  CHECK(text::normalize("a  b\t c") == "a b c");
  CHECK(text::normalize("  leading and trailing  ") == "leading and trailing");
  // combining acute over e composes to the precomposed form
  CHECK(text::normalize("caf\x65\xCC\x81") == "caf\xC3\xA9");
  // no-break space collapses like a space
  CHECK(text::normalize("a\xC2\xA0"
                        "b") == "a b");
  // idempotent
  const std::string once = text::normalize("Weiss\xC2\xADtext  <x>");
  CHECK(text::normalize(once) == once);
  CHECK(text::strip_markup("<b>Hi</b> there") == "Hi there");
  CHECK(text::strip_markup("a &amp; b") == "a & b");
  CHECK(text::split_words("a b  c").size() == 3);
}
