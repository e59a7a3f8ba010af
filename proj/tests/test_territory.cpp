#include "cosur/territory.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <numbers>

using namespace cosur;

namespace {

RepresentationSet set_of(const Eigen::MatrixXd& m, const std::string& cat = "c") {
  return RepresentationSet(cat, m.cast<float>());
}

double max_offdiag(const Eigen::MatrixXd& v) {
  return (v.transpose() * v - Eigen::MatrixXd::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("single-direction matrix gives e1 with sigma 6") {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(4, 4);
  h.col(0).setConstant(3.0);
  const auto t = build_territory_svd(set_of(h), 1);
  CHECK(t.basis.col(0).isApprox(Eigen::Vector4d(1, 0, 0, 0)));
  CHECK(t.singular_values[0] == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(t.method == TerritoryMethod::Svd);

  CHECK(kind_of([&] { build_territory_pca(set_of(h), 1); }) == ErrorKind::RankDeficient);
  CHECK(kind_of([&] { build_territory_svd(set_of(h), 2); }) == ErrorKind::RankDeficient);
  try {
    build_territory_svd(set_of(h), 3);
  } catch (const RankDeficientError& e) {
    CHECK(e.effective_rank() == 1);
  }
}

TEST_CASE("k outside [1, min(N, d)] is rejected") {
  const auto s = set_of(oracle::gaussian(5, 3, 1));
  CHECK(kind_of([&] { build_territory_svd(s, 0); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { build_territory_svd(s, 4); }) == ErrorKind::InvalidArgument);
  CHECK(build_territory_svd(s, 3).rank() == 3);
}

TEST_CASE("SVD territory matches the Gram-matrix Jacobi oracle (8x5, k=3)") {
  const Eigen::MatrixXd h = oracle::gaussian(8, 5, 2024);
  const auto t = decompose(h, 3, "c", TerritoryMethod::Svd);
  CHECK(max_offdiag(t.basis) < 1e-12);
  CHECK(oracle::max_principal_angle(t.basis, oracle::gram_top_k(h, 3)) < 1e-8);
  const auto eig = oracle::jacobi_eigen(h.transpose() * h).first;
  for (int i = 0; i < 3; ++i) CHECK(t.singular_values[i] == doctest::Approx(std::sqrt(eig[i])).epsilon(1e-10));
}

TEST_CASE("PCA territory matches the covariance oracle (20x6, k=2) and ignores the mean") {
  Eigen::MatrixXd raw = oracle::gaussian(20, 6, 77);
  raw.rowwise() += Eigen::RowVectorXd::Constant(6, 40.0);
  const auto set = set_of(raw);
  const auto t = build_territory_pca(set, 2);
  CHECK(t.method == TerritoryMethod::Pca);
  CHECK(oracle::max_principal_angle(t.basis, oracle::covariance_top_k(set.as_double(), 2)) < 1e-8);

  Eigen::MatrixXd sym(4, 3);
  const Eigen::RowVector3d mu(5, 5, 5), v(0, 1, 0);
  sym << mu + v, mu - v, mu + 2 * v, mu - 2 * v;
  const auto p = build_territory_pca(set_of(sym), 1);
  CHECK(std::abs(p.basis(1, 0)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sign convention: largest-magnitude entry positive, lowest index on ties") {
  Eigen::MatrixXd b(3, 2);
  b << -0.5, 0.6, 0.1, -0.6, -0.8, 0.2;
  canonicalize_signs(b);
  CHECK(b(2, 0) == doctest::Approx(0.8));
  CHECK(b(0, 1) == doctest::Approx(0.6));
  CHECK(b(1, 1) == doctest::Approx(-0.6));
}

TEST_CASE("rotation equivariance and scale invariance of the span") {
  const Eigen::MatrixXd h = oracle::gaussian(30, 8, 5);
  const Eigen::MatrixXd q = oracle::orthonormal(8, 8, 6);
  const auto t = decompose(h, 3, "c", TerritoryMethod::Svd);
  const auto tq = decompose(h * q, 3, "c", TerritoryMethod::Svd);
  const Eigen::MatrixXd back = q * tq.basis;
  CHECK(subspace_ngd(t.basis, back) < 1e-6);

  const auto ts = decompose(3.5 * h, 3, "c", TerritoryMethod::Svd);
  CHECK(subspace_ngd(t.basis, ts.basis) < 1e-10);
  CHECK(ts.singular_values.isApprox(3.5 * t.singular_values, 1e-12));
}

TEST_CASE("orthonormality and sorted singular values over 100 seeded matrices") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(seed % 31);
    const Eigen::Index d = 2 + static_cast<Eigen::Index>((seed * 7) % 31);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(seed % static_cast<std::uint64_t>(std::min(n, d)));
    const auto t = decompose(oracle::gaussian(n, d, seed), k, "c", TerritoryMethod::Svd);
    REQUIRE(max_offdiag(t.basis) < 1e-8);
    for (Eigen::Index i = 1; i < k; ++i) REQUIRE(t.singular_values[i] <= t.singular_values[i - 1]);
  }
}

TEST_CASE("centroid is the column mean") {
  Eigen::MatrixXd h(2, 2);
  h << 1, 0, 0, 1;
  CHECK(build_centroid(set_of(h)).mean.isApprox(Eigen::Vector2d(0.5, 0.5)));
  Eigen::MatrixXd one(1, 3);
  one << 1, 2, 3;
  CHECK(build_centroid(set_of(one)).mean.isApprox(Eigen::Vector3d(1, 2, 3)));

  const auto s = set_of(oracle::gaussian(100, 8, 3));
  const Eigen::MatrixXd m = s.as_double();
  Eigen::VectorXd naive = Eigen::VectorXd::Zero(8);
  for (Eigen::Index i = 0; i < 100; ++i)
    for (Eigen::Index j = 0; j < 8; ++j) naive[j] += m(i, j);
  naive /= 100.0;
  const auto c = build_centroid(s).mean;
  for (Eigen::Index j = 0; j < 8; ++j) CHECK(std::abs(c[j] - naive[j]) <= 1e-12 * std::max(1.0, std::abs(naive[j])));
}

TEST_CASE("NGD and NFD on hand cases") {
  const Eigen::MatrixXd e = Eigen::MatrixXd::Identity(4, 4);
  CHECK(subspace_ngd(e.leftCols(2), e.leftCols(2)) == doctest::Approx(0.0));
  CHECK(subspace_nfd(e.leftCols(2), e.leftCols(2)) == doctest::Approx(0.0));
  CHECK(subspace_ngd(e.leftCols(2), e.rightCols(2)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(subspace_nfd(e.leftCols(2), e.rightCols(2)) == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 1), b(2, 1);
  a(0, 0) = 1.0;
  b << std::sqrt(0.5), std::sqrt(0.5);
  CHECK(principal_angles(a, b)[0] == doctest::Approx(std::numbers::pi / 4).epsilon(1e-12));
  CHECK(std::abs(subspace_ngd(a, b) - 0.5) < 1e-12);
  CHECK(std::abs(subspace_nfd(a, b) - oracle::projector_nfd(a, b)) < 1e-12);
  CHECK(std::abs(subspace_nfd(a, b) - std::sqrt(0.5)) < 1e-12);

  CHECK_THROWS_AS(subspace_ngd(e.leftCols(1), e.leftCols(2)), Error);
}

TEST_CASE("NGD/NFD are symmetric, bounded and NFD matches the projector oracle") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Eigen::Index d = 3 + static_cast<Eigen::Index>(seed % 10);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(seed % static_cast<std::uint64_t>(d - 1));
    const auto a = oracle::orthonormal(d, k, 1000 + seed);
    const auto b = oracle::orthonormal(d, k, 2000 + seed);
    const double ngd = subspace_ngd(a, b), nfd = subspace_nfd(a, b);
    CHECK(ngd == doctest::Approx(subspace_ngd(b, a)).epsilon(1e-12));
    CHECK(nfd == doctest::Approx(subspace_nfd(b, a)).epsilon(1e-12));
    CHECK(ngd >= 0.0);
    CHECK(ngd <= 1.0);
    CHECK(nfd >= 0.0);
    CHECK(nfd <= 1.0);
    CHECK(std::abs(nfd - oracle::projector_nfd(a, b)) < 1e-10);
  }
}

TEST_CASE("territory file round trip") {
  TempDir dir("territory");
  const auto t = build_territory_svd(set_of(oracle::gaussian(12, 6, 8), "self"), 3);
  write_territory(t, dir / "t.repb");
  const auto back = load_territory(dir / "t.repb");
  CHECK(back.category == "self");
  CHECK(back.method == TerritoryMethod::Svd);
  CHECK(back.rank() == 3);
  CHECK(max_offdiag(back.basis) < 1e-12);
  CHECK(subspace_ngd(back, t) < 1e-6);
  CHECK((back.basis - t.basis).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(back.singular_values.isApprox(t.singular_values, 1e-6));
}
