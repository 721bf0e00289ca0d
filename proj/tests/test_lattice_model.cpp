#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>
#include <set>

#include "nhvmc/exact.hpp"
#include "support.hpp"

using namespace nhvmc;

TEST_CASE("chain of four has the ring bonds") {
  const auto lat = chain(4);
  const std::vector<std::pair<int, int>> want{{0, 1}, {1, 2}, {2, 3}, {0, 3}};
  CHECK(lat.bonds == want);
  CHECK(lat.coordination == 2);
  CHECK(lat.num_sites == 4);
}

TEST_CASE("torus bond counts") {
  const auto l3 = square(3);
  CHECK(l3.bonds.size() == 18);
  CHECK(l3.coordination == 4);
  const auto l6 = square(6);
  CHECK(l6.num_sites == 36);
  CHECK(l6.bonds.size() == 72);
  for (const auto& [i, j] : l6.bonds) {
    CHECK(i < j);
    CHECK(j < 36);
  }
}

TEST_CASE("two-site chain keeps a single bond") {
  const auto lat = chain(2);
  CHECK(lat.bonds.size() == 1);
  CHECK(lat.coordination == 1);
}

TEST_CASE("periodic chains have N bonds, no duplicates") {
  for (int n = 3; n <= 12; ++n) {
    const auto lat = chain(n);
    CHECK(lat.bonds.size() == static_cast<std::size_t>(n));
    std::set<std::pair<int, int>> uniq(lat.bonds.begin(), lat.bonds.end());
    CHECK(uniq.size() == lat.bonds.size());
  }
}

TEST_CASE("lattice construction rejects bad input") {
  CHECK_THROWS_AS(chain(1), ValidationError);
  CHECK_THROWS_AS(build_lattice(LatticeKind::square2d, {4, 4}, false), ValidationError);
  CHECK_THROWS_AS(build_lattice(LatticeKind::square2d, {1, 4}, true), ValidationError);
}

TEST_CASE("row of the all-up configuration") {
  const auto ham = testing::tfim_chain(4, 1.0, 0.5);
  const SpinConfig up(4, 1);
  const auto row = ham.row(up);
  CHECK(std::abs(row.diag - cplx(-2.0, -2.0)) < 1e-15);
  REQUIRE(row.offdiag.size() == 4);
  for (const auto& [site, elem] : row.offdiag) CHECK(elem == cplx(-1.0, 0.0));
  const auto drow = ham.adjoint_row(up);
  CHECK(std::abs(drow.diag - cplx(-2.0, 2.0)) < 1e-15);
}

TEST_CASE("Hermitian limit has real diagonal and identical dagger rows") {
  const auto ham = testing::tfim_chain(6, 0.7, 0.0);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto cfg = index_to_config(rng() % 64, 6);
    const auto r = ham.row(cfg);
    const auto d = ham.adjoint_row(cfg);
    CHECK(r.diag.imag() == 0.0);
    CHECK(r.diag == d.diag);
  }
}

TEST_CASE("nh_scale multiplies only the imaginary field") {
  HamiltonianParams p;
  p.h = 1.3;
  p.k = 0.8;
  p.nh_scale = 0.25;
  const Hamiltonian ham(chain(5), p);
  const SpinConfig cfg{1, -1, -1, 1, 1};
  const auto row = ham.row(cfg);
  // bonds: (0,1)(1,2)(2,3)(3,4)(0,4): -1 + 1 - 1 + 1 + 1 = 1
  CHECK(std::abs(row.diag - cplx(-0.5 * 1.0, -0.8 * 0.25 * 1.0)) < 1e-15);
  cplx off{};
  for (const auto& [s, e] : row.offdiag) off += e;
  CHECK(std::abs(off - cplx(-1.3 * 5)) < 1e-14);
}

TEST_CASE("rows reproduce the dense matrix entry by entry") {
  const auto ham = testing::tfim_chain(8, 0.9, 0.37);
  const auto d = dense_matrix(ham);
  const auto dd = d.adjoint().eval();
  std::mt19937_64 rng(11);
  for (int t = 0; t < 40; ++t) {
    const auto idx = static_cast<Eigen::Index>(rng() % 256);
    const auto cfg = index_to_config(idx, 8);
    Eigen::VectorXcd from_row = Eigen::VectorXcd::Zero(256), from_drow = Eigen::VectorXcd::Zero(256);
    const auto r = ham.row(cfg);
    from_row(idx) = r.diag;
    for (const auto& [s, e] : r.offdiag) from_row(idx ^ (Eigen::Index{1} << s)) += e;
    const auto dr = ham.adjoint_row(cfg);
    from_drow(idx) = dr.diag;
    for (const auto& [s, e] : dr.offdiag) from_drow(idx ^ (Eigen::Index{1} << s)) += e;
    CHECK((from_row.transpose() - d.row(idx)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((from_drow.transpose() - dd.row(idx)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("dense matrix: Hermitian at nh_scale 0, conjugation-closed spectrum otherwise") {
  HamiltonianParams p;
  p.h = 0.8;
  p.k = 0.6;
  p.nh_scale = 0.0;
  const Hamiltonian herm(chain(6), p);
  const auto d = dense_matrix(herm);
  CHECK((d - d.adjoint()).cwiseAbs().maxCoeff() == 0.0);

  for (auto [h, k] : {std::pair{0.3, 0.2}, {1.2, 0.4}, {0.5, 0.9}}) {
    const auto ham = testing::tfim_chain(7, h, k);
    const auto ed = diagonalize(dense_matrix(ham), false);
    for (Eigen::Index i = 0; i < ed.size(); ++i) {
      const cplx c = std::conj(ed.eigenvalues(i));
      CHECK((ed.eigenvalues.array() - c).abs().minCoeff() < 1e-8);
    }
  }
}

TEST_CASE("dense matrix is complex symmetric for the NH-TFIM") {
  const auto d = dense_matrix(testing::tfim_chain(6, 1.1, 0.4));
  CHECK((d - d.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("anchors") {
  HamiltonianParams p;
  p.lambda = 0.5;
  p.h = 0.0;
  p.k = 0.0;
  const auto lat = chain(9);
  CHECK(std::abs(lower_bound_anchor(lat, p) - cplx(-4.5, 0.0)) < 1e-15);
  p.h = 1.0;
  p.k = 0.5;
  CHECK(std::abs(lower_bound_anchor(lat, p) - cplx(4.5, 4.5)) < 1e-15);
  CHECK(lower_bound_anchor(lat, p, cplx(-20, -3)) == cplx(-20, -3));

  // The spectral bound lies below every eigenvalue's real part.
  const Hamiltonian ham(lat, p);
  const auto ed = diagonalize(dense_matrix(ham), false);
  CHECK(spectral_bound_anchor(lat, p).real() <= ed.eigenvalues(0).real());
}

TEST_CASE("config index round trip") {
  for (std::uint64_t i = 0; i < 512; ++i) CHECK(config_to_index(index_to_config(i, 9)) == i);
  const SpinConfig bad{1, 0, -1};
  CHECK_THROWS_AS(check_config(chain(3), bad), ValidationError);
  CHECK_THROWS_AS(check_config(chain(4), bad), ValidationError);
}
