#include <doctest.h>

#include <cmath>
#include <vector>

#include "cvls/crate/coding_rate.hpp"
#include "cvls/crate/network.hpp"
#include "cvls/rng.hpp"

using namespace cvls;

namespace {

MatrixD random_matrix(Eigen::Index r, Eigen::Index c, RngStream& rng) {
  MatrixD m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

/// Dense-determinant oracle: log det through Eigen's LU determinant, no
/// Cholesky, no Gram-side switching.
double coding_rate_dense(const MatrixD& Z, double eps) {
  const double h = static_cast<double>(Z.rows());
  const double n = static_cast<double>(Z.cols());
  const MatrixD M =
      MatrixD::Identity(Z.rows(), Z.rows()) + (h / (n * eps * eps)) * Z * Z.transpose();
  return 0.5 * std::log(M.determinant());
}

}  // namespace

TEST_CASE("coding rate of the zero map is zero") {
  CHECK(crate::coding_rate<double>(MatrixD::Zero(3, 5), 1.0) ==
        doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("coding rate closed form on the 2x2 identity") {
  // h = N = 2, eps = 1: R = 1/2 log det(2 I) = log 2
  CHECK(crate::coding_rate<double>(MatrixD::Identity(2, 2), 1.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-10));
}

TEST_CASE("coding rate matches the dense determinant oracle") {
  RngStream rng(100);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index h = 2 + static_cast<Eigen::Index>(rng.below(7));
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(7));
    const MatrixD Z = random_matrix(h, n, rng);
    const double eps = 0.5 + rng.uniform01();
    const double fast = crate::coding_rate<double>(Z, eps);
    const double dense = coding_rate_dense(Z, eps);
    CHECK(std::abs(fast - dense) / std::max(1e-12, std::abs(dense)) < 1e-10);
  }
}

TEST_CASE("coding rate is invariant under orthogonal rotation") {
  RngStream rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixD Z = random_matrix(6, 9, rng);
    RngStream qr_rng(200 + trial);
    const MatrixD Q = crate::detail::random_orthonormal<double>(6, 6, qr_rng);
    const double a = crate::coding_rate<double>(Z, 1.0);
    const double b = crate::coding_rate<double>(Q * Z, 1.0);
    CHECK(std::abs(a - b) < 1e-8);
  }
}

TEST_CASE("coding rate rejects non-finite input and bad epsilon") {
  MatrixD Z = MatrixD::Zero(2, 2);
  CHECK_THROWS_AS(crate::coding_rate<double>(Z, 0.0), ContractError);
  Z(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(crate::coding_rate<double>(Z, 1.0), NumericError);
}

TEST_CASE("coding rate reduction: zero map, orthogonal invariance, composition") {
  RngStream rng(102);
  SUBCASE("zero map") {
    std::vector<MatrixD> bases{MatrixD::Identity(4, 2)};
    CHECK(crate::coding_rate_reduction<double>(MatrixD::Zero(4, 6), bases, 1.0) ==
          doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("single square orthogonal basis gives zero reduction") {
    const MatrixD Z = random_matrix(5, 7, rng);
    RngStream qr_rng(300);
    std::vector<MatrixD> bases{crate::detail::random_orthonormal<double>(5, 5, qr_rng)};
    CHECK(std::abs(crate::coding_rate_reduction<double>(Z, bases, 1.0)) < 1e-8);
  }
  SUBCASE("matches hand-composed coding_rate calls") {
    const MatrixD Z = random_matrix(6, 8, rng);
    RngStream qr_rng(301);
    std::vector<MatrixD> bases;
    for (int k = 0; k < 3; ++k)
      bases.push_back(crate::detail::random_orthonormal<double>(6, 2, qr_rng));
    const double eps = 0.8;
    double by_hand = crate::coding_rate<double>(Z, eps);
    for (const auto& U : bases)
      by_hand -= crate::coding_rate<double>(MatrixD(U.transpose() * Z), eps);
    CHECK(crate::coding_rate_reduction<double>(Z, bases, eps) ==
          doctest::Approx(by_hand).epsilon(1e-12));
  }
  SUBCASE("shape mismatch is a contract error") {
    std::vector<MatrixD> bases{MatrixD::Identity(3, 2)};
    CHECK_THROWS_AS(crate::coding_rate_reduction<double>(MatrixD::Zero(4, 6), bases, 1.0),
                    ContractError);
  }
}
