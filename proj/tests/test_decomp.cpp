#include <doctest.h>

#include <cmath>
#include <limits>

#include "lrc/decomp.hpp"
#include "lrc/error.hpp"
#include "lrc/linalg.hpp"
#include "oracles.hpp"

using lrc::Matrix;
using lrc::MatrixD;
using lrc::Tensor;

namespace {

Tensor random_kernel(oracle::Rng& rng, std::size_t d, std::size_t s, std::size_t t) {
  return Tensor({d, d, s, t}, oracle::to_float(rng.normals(d * d * s * t)));
}

Tensor planted_kernel(oracle::Rng& rng, std::size_t d, std::size_t s, std::size_t t, std::size_t r3, std::size_t r4) {
  const oracle::Vec core = rng.normals(d * d * r3 * r4);
  const oracle::Vec u3 = oracle::random_orthonormal(rng, s, r3);
  const oracle::Vec u4 = oracle::random_orthonormal(rng, t, r4);
  return Tensor({d, d, s, t}, oracle::to_float(oracle::tucker_kernel(u3, core, u4, d, s, t, r3, r4)));
}

double rel_err(const Tensor& a, const Tensor& b) {
  return oracle::rel_error(oracle::to_vec(a.data()), oracle::to_vec(b.data()));
}

MatrixD product(const MatrixD& a, const MatrixD& b) { return lrc::matmul(a, b); }

double fc_error(const lrc::FactorizedFc& f, const Matrix& w) {
  return oracle::rel_error(oracle::to_vec(lrc::fc_reconstruct(f).data()), oracle::to_vec(w.data()));
}

} // namespace

TEST_CASE("tsvd of diag(3, 2, 1)") {
  MatrixD w(3, 3);
  w(0, 0) = 3.0;
  w(1, 1) = 2.0;
  w(2, 2) = 1.0;
  auto [a3, b3] = lrc::truncated_svd(w, 3);
  const MatrixD full = product(a3, b3);
  for (std::size_t i = 0; i < 9; ++i) CHECK(std::abs(full.data()[i] - w.data()[i]) < 1e-6);
  auto [a2, b2] = lrc::truncated_svd(w, 2);
  const MatrixD low = product(a2, b2);
  double err = 0.0;
  for (std::size_t i = 0; i < 9; ++i) err += std::pow(low.data()[i] - w.data()[i], 2);
  CHECK(std::sqrt(err) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("tsvd folds singular values into the left factor") {
  oracle::Rng rng(31);
  MatrixD w(6, 4, rng.normals(24));
  auto [a, b] = lrc::truncated_svd(w, 3);
  CHECK(lrc::orthonormality_defect(b.transpose()) < 1e-10);
  const std::vector<double> s = lrc::singular_values(w);
  for (std::size_t c = 0; c < 3; ++c) {
    double n = 0.0;
    for (std::size_t r = 0; r < 6; ++r) n += a(r, c) * a(r, c);
    CHECK(std::sqrt(n) == doctest::Approx(s[c]).epsilon(1e-10));
  }
}

TEST_CASE("tsvd at full rank is lossless") {
  oracle::Rng rng(32);
  const Matrix w(20, 8, oracle::to_float(rng.normals(160)));
  CHECK(fc_error(lrc::tsvd_truncate(w, 8), w) < 1e-5);
}

TEST_CASE("tsvd error equals the singular value tail") {
  oracle::Rng rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = rng.index(1, 40), n = rng.index(1, 40);
    const MatrixD w(m, n, rng.normals(m * n));
    const std::size_t r = rng.index(1, std::min(m, n));
    auto [a, b] = lrc::truncated_svd(w, r);
    const MatrixD ab = product(a, b);
    double err = 0.0;
    for (std::size_t i = 0; i < ab.size(); ++i) err += std::pow(ab.data()[i] - w.data()[i], 2);
    const std::vector<double> s = lrc::singular_values(w);
    double tail = 0.0;
    for (std::size_t i = r; i < s.size(); ++i) tail += s[i] * s[i];
    CHECK(std::abs(std::sqrt(err) - std::sqrt(tail)) <= 1e-5 * lrc::frobenius_norm(w) + 1e-12);
  }
}

TEST_CASE("tsvd rank bounds") {
  const Matrix w(4, 3);
  CHECK_THROWS_AS(lrc::tsvd_truncate(w, 0), lrc::Error);
  CHECK_THROWS_AS(lrc::tsvd_truncate(w, 4), lrc::Error);
}

TEST_CASE("tucker-2 at full rank is lossless") {
  oracle::Rng rng(34);
  for (auto [d, s, t] : std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>{
           {3, 4, 5}, {1, 8, 3}, {3, 16, 1}, {5, 3, 8}, {3, 16, 16}}) {
    const Tensor k = random_kernel(rng, d, s, t);
    const lrc::FactorizedConv f = lrc::tucker2_decompose(k, s, t);
    CHECK(rel_err(lrc::tucker2_reconstruct(f), k) < 1e-6);
    CHECK(lrc::orthonormality_defect(f.u3.cast<double>()) < 1e-6);
    CHECK(lrc::orthonormality_defect(f.u4.cast<double>()) < 1e-6);
  }
}

TEST_CASE("tucker-2 recovers a planted kernel") {
  oracle::Rng rng(35);
  const Tensor k = planted_kernel(rng, 3, 16, 32, 4, 8);
  const lrc::FactorizedConv f = lrc::tucker2_decompose(k, 4, 8);
  CHECK(f.rank3() == 4);
  CHECK(f.rank4() == 8);
  CHECK(f.core.shape() == lrc::Shape{3, 3, 4, 8});
  CHECK(rel_err(lrc::tucker2_reconstruct(f), k) < 1e-6);
}

TEST_CASE("rank-(1,1) fit beats random restarts") {
  oracle::Rng rng(36);
  const Tensor k = random_kernel(rng, 3, 6, 5);
  const double fit = rel_err(lrc::tucker2_reconstruct(lrc::tucker2_decompose(k, 1, 1)), k);
  const oracle::Vec kv = oracle::to_vec(k.data());
  for (int restart = 0; restart < 20; ++restart) {
    // Best core for fixed unit vectors is the projection of k onto them.
    const oracle::Vec u3 = oracle::random_orthonormal(rng, 6, 1), u4 = oracle::random_orthonormal(rng, 5, 1);
    oracle::Vec core(9, 0.0);
    for (std::size_t ij = 0; ij < 9; ++ij)
      for (std::size_t c = 0; c < 6; ++c)
        for (std::size_t o = 0; o < 5; ++o) core[ij] += kv[(ij * 6 + c) * 5 + o] * u3[c] * u4[o];
    const double err = oracle::rel_error(oracle::tucker_kernel(u3, core, u4, 3, 6, 5, 1, 1), kv);
    CHECK(fit <= err + 1e-9);
  }
}

TEST_CASE("HOOI error history is non-increasing") {
  oracle::Rng rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t s = rng.index(2, 12), t = rng.index(2, 12);
    const Tensor k = random_kernel(rng, rng.pick(std::vector<std::size_t>{1, 3, 5}), s, t);
    const lrc::Tucker2Fit fit = lrc::tucker2_fit(k, rng.index(1, s), rng.index(1, t), {20, 0.0});
    REQUIRE(!fit.error_history.empty());
    for (std::size_t i = 1; i < fit.error_history.size(); ++i)
      CHECK(fit.error_history[i] <= fit.error_history[i - 1] + 1e-9);
    CHECK(rel_err(lrc::tucker2_reconstruct(fit.factors), k) ==
          doctest::Approx(fit.error_history.back()).epsilon(1e-4));
  }
}

TEST_CASE("reconstruct with identity factors returns the core") {
  oracle::Rng rng(38);
  lrc::FactorizedConv f;
  f.core = random_kernel(rng, 3, 2, 4);
  f.u3 = Matrix::identity(2);
  f.u4 = Matrix::identity(4);
  CHECK(lrc::tucker2_reconstruct(f) == f.core);
}

TEST_CASE("reconstruct matches the quadruple loop") {
  oracle::Rng rng(39);
  lrc::FactorizedConv f;
  f.core = Tensor({3, 3, 2, 2}, oracle::to_float(rng.normals(36)));
  f.u3 = Matrix(2, 2, oracle::to_float(rng.normals(4)));
  f.u4 = Matrix(2, 2, oracle::to_float(rng.normals(4)));
  const Tensor k = lrc::tucker2_reconstruct(f);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t t = 0; t < 2; ++t) {
          double acc = 0.0;
          for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = 0; b < 2; ++b)
              acc += static_cast<double>(f.core(i, j, a, b)) * f.u3(s, a) * f.u4(t, b);
          CHECK(k(i, j, s, t) == doctest::Approx(acc).epsilon(1e-6));
        }
}

TEST_CASE("tucker-2 argument checks") {
  oracle::Rng rng(40);
  Tensor k = random_kernel(rng, 3, 4, 5);
  CHECK_THROWS_AS(lrc::tucker2_decompose(k, 0, 1), lrc::Error);
  CHECK_THROWS_AS(lrc::tucker2_decompose(k, 5, 1), lrc::Error);
  CHECK_THROWS_AS(lrc::tucker2_decompose(k, 1, 6), lrc::Error);
  k.data()[7] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(lrc::tucker2_decompose(k, 2, 2), lrc::Error);
}

TEST_CASE("factorize_conv_layer carries stride and padding") {
  oracle::Rng rng(41);
  lrc::ConvLayerSpec layer{random_kernel(rng, 1, 6, 4), 2, 1};
  const lrc::FactorizedConv f = lrc::factorize_conv_layer(layer, 3, 2);
  CHECK(f.stride == 2);
  CHECK(f.padding == 1);
  CHECK(f.kernel_size() == 1);
  CHECK(f.core.shape() == lrc::Shape{1, 1, 3, 2});
  CHECK(f.parameter_count() == 6 * 3 + 3 * 2 + 4 * 2);
}

TEST_CASE("factorize_fc_layer") {
  oracle::Rng rng(42);
  const Matrix w(4, 4, oracle::to_float(rng.normals(16)));
  CHECK(fc_error(lrc::factorize_fc_layer({w}, 4), w) < 1e-5);

  const Matrix big(512, 10, oracle::to_float(rng.normals(5120)));
  CHECK(lrc::factorize_fc_layer({big}, 5).parameter_count() == 2610);

  const oracle::Vec u = rng.normals(7), v = rng.normals(5);
  Matrix r1(7, 5);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 5; ++j) r1(i, j) = static_cast<float>(u[i] * v[j]);
  CHECK(fc_error(lrc::factorize_fc_layer({r1}, 1), r1) < 1e-5);
}
