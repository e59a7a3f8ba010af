#include "cosur/discriminator.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <limits>

using namespace cosur;

namespace {

TerritoryBasis axis_territory(const std::string& cat, Eigen::Index d, std::vector<Eigen::Index> axes) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(axes.size()));
  for (std::size_t j = 0; j < axes.size(); ++j) b(axes[j], static_cast<Eigen::Index>(j)) = 1.0;
  return TerritoryBasis{cat, b, Eigen::VectorXd::Ones(b.cols()), TerritoryMethod::Svd};
}

TerritoryBasis random_territory(const std::string& cat, Eigen::Index d, Eigen::Index k, std::uint64_t seed) {
  return TerritoryBasis{cat, oracle::orthonormal(d, k, seed), Eigen::VectorXd::Ones(k), TerritoryMethod::Svd};
}

EnergyDecision verdict(const std::string& id, const std::string& v) {
  return EnergyDecision{id, {{"s", 0.0}, {"o", 0.0}}, v};
}

}  // namespace

TEST_CASE("projection energy on hand cases") {
  const auto t = axis_territory("s", 4, {0, 1});
  CHECK(projection_energy(Eigen::Vector4d(0, 0, 2, 5), t) == 0.0);
  CHECK(projection_energy(Eigen::Vector4d(3, 0, 0, 0), t) == doctest::Approx(3.0));
  CHECK(kind_of([&] { (void)projection_energy(Eigen::Vector3d(1, 0, 0), t); }) == ErrorKind::DimensionMismatch);
  const Eigen::Vector4d nan(std::numeric_limits<double>::quiet_NaN(), 0, 0, 0);
  CHECK(kind_of([&] { (void)projection_energy(nan, t); }) == ErrorKind::NonFinite);
}

TEST_CASE("projection energy matches the per-column loop and the Bessel bound") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto t = random_territory("s", 64, 16, seed);
    const Eigen::VectorXd h = oracle::gaussian(64, 1, 10'000 + seed).col(0);
    const double e = projection_energy(h, t);
    const double ref = oracle::energy_loop(t.basis, h);
    REQUIRE(std::abs(e - ref) <= 1e-10 * ref);
    REQUIRE(e <= h.norm() * (1 + 1e-12));
  }
}

TEST_CASE("growing the basis never lowers energy") {
  const Eigen::MatrixXd full = oracle::orthonormal(20, 10, 4);
  const Eigen::VectorXd h = oracle::gaussian(20, 1, 5).col(0);
  double prev = 0.0;
  for (Eigen::Index k = 1; k <= 10; ++k) {
    const double e = projection_energy(h, TerritoryBasis{"s", full.leftCols(k), Eigen::VectorXd::Ones(k), {}});
    CHECK(e >= prev);
    prev = e;
  }
}

TEST_CASE("decide follows the strict rule with ties going to other") {
  const auto s = axis_territory("self", 3, {0});
  const auto o = axis_territory("other", 3, {1});
  CHECK(decide(Eigen::Vector3d(2, 1, 0), s, o).verdict == "self");
  CHECK(decide(Eigen::Vector3d(1, 2, 0), s, o).verdict == "other");
  CHECK(decide(Eigen::Vector3d(1, 1, 0), s, o).verdict == "other");
  CHECK(decide(Eigen::Vector3d(-1, 1, 0), s, o).verdict == "other");
  CHECK(decide(Eigen::Vector3d(0, 0, 7), s, o).verdict == "other");
  const auto d = decide(Eigen::Vector3d(0, 4, 0), s, o, "x");
  CHECK(d.verdict == "other");
  CHECK(d.energy("self") == 0.0);
  CHECK(d.energy("other") == 4.0);
  CHECK(d.sample_id == "x");
}

TEST_CASE("decide is invariant to positive scaling") {
  const auto s = random_territory("self", 10, 3, 1);
  const auto o = random_territory("other", 10, 3, 2);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Eigen::VectorXd h = oracle::gaussian(10, 1, seed).col(0);
    CHECK(decide(h, s, o).verdict == decide(0.01 * h, s, o).verdict);
    CHECK(decide(h, s, o).verdict == decide(250.0 * h, s, o).verdict);
  }
}

TEST_CASE("decide_multi: argmax, list-order ties, self never wins a tie") {
  std::vector<TerritoryBasis> ts{axis_territory("a", 3, {0}), axis_territory("b", 3, {1}),
                                 axis_territory("c", 3, {2})};
  CHECK(decide_multi(Eigen::Vector3d(0, 1, 0), ts, "a").verdict == "b");
  CHECK(decide_multi(Eigen::Vector3d(0, 1, 1), ts, "").verdict == "b");
  CHECK(decide_multi(Eigen::Vector3d(1, 1, 1), ts, "a").verdict == "b");
  CHECK(decide_multi(Eigen::Vector3d(1, 1, 1), ts, "c").verdict == "a");
  CHECK(decide_multi(Eigen::Vector3d(2, 1, 1), ts, "a").verdict == "a");
  CHECK_THROWS_AS(decide_multi(Eigen::Vector3d(1, 0, 0), std::span<const TerritoryBasis>(ts.data(), 1), "a"), Error);
}

TEST_CASE("decide_multi matches a brute-force max scan on a synthetic batch") {
  std::vector<TerritoryBasis> ts;
  for (int c = 0; c < 4; ++c) ts.push_back(random_territory("c" + std::to_string(c), 12, 2, 50 + c));
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Eigen::VectorXd h = oracle::gaussian(12, 1, 900 + seed).col(0);
    std::size_t best = 1;
    for (std::size_t i = 2; i < ts.size(); ++i) {
      if (oracle::energy_loop(ts[i].basis, h) > oracle::energy_loop(ts[best].basis, h)) best = i;
    }
    if (oracle::energy_loop(ts[0].basis, h) > oracle::energy_loop(ts[best].basis, h)) best = 0;
    REQUIRE(decide_multi(h, ts, "c0").verdict == ts[best].category);
  }
}

TEST_CASE("centroid rule uses cosine") {
  std::vector<Centroid> cs{{"self", Eigen::Vector2d(1, 0)}, {"other", Eigen::Vector2d(0, 5)}};
  CHECK(decide_centroid(Eigen::Vector2d(3, 1), cs, "self").verdict == "self");
  CHECK(decide_centroid(Eigen::Vector2d(1, 1), cs, "self").verdict == "other");
  CHECK(decide_centroid(Eigen::Vector2d(1, 1), cs, "self").energy("self") == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("evaluate: hand confusion counts") {
  const std::vector<EnergyDecision> ds{verdict("1", "s"), verdict("2", "s"), verdict("3", "s"), verdict("4", "o"),
                                       verdict("5", "o")};
  const std::map<std::string, std::string> labels{{"1", "s"}, {"2", "s"}, {"3", "o"}, {"4", "s"}, {"5", "o"}};
  const auto r = evaluate(ds, labels, "s");
  CHECK(r.accuracy == doctest::Approx(0.6));
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.total == 5);
  CHECK(r.confusion.at("s").at("s") == 2);
  CHECK(r.confusion.at("o").at("s") == 1);
  CHECK(r.confusion.at("s").at("o") == 1);
  CHECK(r.confusion.at("o").at("o") == 1);
  CHECK(r.macro_f1 == doctest::Approx(0.5 * (2.0 / 3.0 + 0.5)));
}

TEST_CASE("evaluate: perfect, degenerate and error cases") {
  const std::vector<EnergyDecision> ds{verdict("1", "s"), verdict("2", "o")};
  const auto perfect = evaluate(ds, {{"1", "s"}, {"2", "o"}}, "s");
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.f1 == 1.0);

  const std::vector<EnergyDecision> neg{verdict("1", "o"), verdict("2", "o")};
  const auto r = evaluate(neg, {{"1", "o"}, {"2", "o"}}, "s");
  CHECK(r.f1 == 0.0);
  CHECK(r.accuracy == 1.0);

  CHECK(kind_of([&] { evaluate(ds, {{"1", "s"}}, "s"); }) == ErrorKind::Unlabeled);
  CHECK(kind_of([&] { evaluate(ds, {{"1", "s"}, {"2", "o"}}, "zzz"); }) == ErrorKind::InvalidArgument);
}
