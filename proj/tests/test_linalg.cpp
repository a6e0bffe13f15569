#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "lrc/error.hpp"
#include "lrc/linalg.hpp"
#include "oracles.hpp"

using lrc::MatrixD;

namespace {

MatrixD random_matrix(oracle::Rng& rng, std::size_t m, std::size_t n) {
  MatrixD a(m, n);
  for (double& v : a.data()) v = rng.normal();
  return a;
}

Eigen::MatrixXd to_eigen(const MatrixD& a) {
  Eigen::MatrixXd e(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) e(i, j) = a(i, j);
  return e;
}

double reconstruction_error(const MatrixD& a, const lrc::SvdResult& r) {
  double num = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < r.s.size(); ++k) v += r.u(i, k) * r.s[k] * r.vt(k, j);
      num += (v - a(i, j)) * (v - a(i, j));
    }
  return std::sqrt(num) / lrc::frobenius_norm(a);
}

void check_svd(const MatrixD& a) {
  const lrc::SvdResult r = lrc::svd(a);
  const std::size_t k = std::min(a.rows(), a.cols());
  REQUIRE(r.s.size() == k);
  REQUIRE(r.u.rows() == a.rows());
  REQUIRE(r.u.cols() == k);
  REQUIRE(r.vt.rows() == k);
  REQUIRE(r.vt.cols() == a.cols());
  for (std::size_t i = 0; i + 1 < k; ++i) CHECK(r.s[i] >= r.s[i + 1]);
  CHECK(r.s.back() >= 0.0);
  CHECK(lrc::orthonormality_defect(r.u) < 1e-6);
  CHECK(lrc::orthonormality_defect(r.vt.transpose()) < 1e-6);
  CHECK(reconstruction_error(a, r) < 1e-5);
  const Eigen::VectorXd ref = Eigen::JacobiSVD<Eigen::MatrixXd>(to_eigen(a)).singularValues();
  for (std::size_t i = 0; i < k; ++i)
    CHECK(std::abs(r.s[i] - ref(static_cast<Eigen::Index>(i))) <= 1e-5 * std::max(ref(0), 1e-300));
}

} // namespace

TEST_CASE("svd of simple matrices") {
  const lrc::SvdResult id = lrc::svd(MatrixD::identity(3));
  CHECK(id.s == std::vector<double>{1.0, 1.0, 1.0});
  MatrixD d(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 4.0;
  const lrc::SvdResult r = lrc::svd(d);
  CHECK(r.s[0] == doctest::Approx(4.0));
  CHECK(r.s[1] == doctest::Approx(3.0));
}

TEST_CASE("svd of random 8x5") {
  oracle::Rng rng(21);
  check_svd(random_matrix(rng, 8, 5));
}

TEST_CASE("svd matches Eigen on assorted shapes") {
  oracle::Rng rng(22);
  for (auto [m, n] : std::vector<std::pair<std::size_t, std::size_t>>{
           {1, 1}, {1, 7}, {7, 1}, {5, 5}, {13, 4}, {4, 13}, {64, 64}, {100, 37}, {37, 100}}) {
    CAPTURE(m);
    CAPTURE(n);
    check_svd(random_matrix(rng, m, n));
  }
}

TEST_CASE("svd of a 256x256 matrix") {
  oracle::Rng rng(23);
  check_svd(random_matrix(rng, 256, 256));
}

TEST_CASE("svd of rank-deficient input completes the basis") {
  oracle::Rng rng(24);
  MatrixD a(10, 6);
  const MatrixD x = random_matrix(rng, 10, 2), y = random_matrix(rng, 2, 6);
  a = lrc::matmul(x, y);
  check_svd(a);
  const lrc::SvdResult z = lrc::svd(MatrixD(4, 3));
  CHECK(z.s == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(lrc::orthonormality_defect(z.u) < 1e-12);
}

TEST_CASE("singular vector sign convention") {
  oracle::Rng rng(25);
  const lrc::SvdResult r = lrc::svd(random_matrix(rng, 9, 4));
  for (std::size_t c = 0; c < r.u.cols(); ++c) {
    for (std::size_t i = 0; i < r.u.rows(); ++i)
      if (std::abs(r.u(i, c)) > 1e-12) {
        CHECK(r.u(i, c) > 0.0);
        break;
      }
  }
}

TEST_CASE("singular_values agrees with svd") {
  oracle::Rng rng(26);
  const MatrixD a = random_matrix(rng, 30, 12);
  const std::vector<double> s = lrc::singular_values(a);
  const lrc::SvdResult r = lrc::svd(a);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(r.s[i]).epsilon(1e-12));
}

TEST_CASE("leading left singular vectors, including completion past min(m, n)") {
  oracle::Rng rng(27);
  const MatrixD a = random_matrix(rng, 6, 3);
  const MatrixD u = lrc::leading_left_singular_vectors(a, 6);
  CHECK(u.cols() == 6);
  CHECK(lrc::orthonormality_defect(u) < 1e-12);
  CHECK_THROWS_AS(lrc::leading_left_singular_vectors(a, 7), lrc::Error);
  CHECK_THROWS_AS(lrc::leading_left_singular_vectors(a, 0), lrc::Error);
}

TEST_CASE("non-finite input is a numeric error") {
  MatrixD a(2, 2);
  a(0, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    lrc::svd(a);
    FAIL("expected an error");
  } catch (const lrc::Error& e) {
    CHECK(e.code() == lrc::ErrorCode::numeric);
  }
}

TEST_CASE("matrix products") {
  oracle::Rng rng(28);
  const MatrixD a = random_matrix(rng, 4, 3), b = random_matrix(rng, 4, 5), c = random_matrix(rng, 6, 3);
  const Eigen::MatrixXd ea = to_eigen(a), eb = to_eigen(b), ec = to_eigen(c);
  const Eigen::MatrixXd tn = ea.transpose() * eb, nt = ea * ec.transpose();
  const MatrixD ltn = lrc::matmul_tn(a, b), lnt = lrc::matmul_nt(a, c);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(ltn(i, j) == doctest::Approx(tn(i, j)));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) CHECK(lnt(i, j) == doctest::Approx(nt(i, j)));
  CHECK_THROWS_AS(lrc::matmul(a, a), lrc::Error);
}
