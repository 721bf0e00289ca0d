#include <complex>
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "nhvmc/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace nhvmc {

namespace {

void check_cap(int n, int cap, const char* what) {
  if (n < 1) throw ValidationError(std::string(what) + ": lattice has no sites");
  if (n > cap) {
    throw ValidationError(std::string(what) + ": N = " + std::to_string(n) + " exceeds the exact-oracle cap of " +
                          std::to_string(cap) + " sites");
  }
}

constexpr double kClusterTol = 1e-10;
constexpr double kEpSuspect = 1e-6;

}  // namespace

Eigen::MatrixXcd dense_matrix(const Hamiltonian& ham, int cap) {
  const int n = ham.num_sites();
  check_cap(n, cap, "dense_matrix");
  const Eigen::Index dim = Eigen::Index{1} << n;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    const auto cfg = index_to_config(static_cast<std::uint64_t>(r), n);
    const auto row = ham.row(cfg);
    m(r, r) += row.diag;
    for (const auto& [site, elem] : row.offdiag) m(r, r ^ (Eigen::Index{1} << site)) += elem;
  }
  return m;
}

Eigen::MatrixXcd dense_operator(const RowAccessor& op, int num_sites, int cap) {
  check_cap(num_sites, cap, "dense_operator");
  const Eigen::Index dim = Eigen::Index{1} << num_sites;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    const auto row = op(index_to_config(static_cast<std::uint64_t>(r), num_sites));
    m(r, r) += row.diag;
    for (const auto& [site, elem] : row.offdiag) m(r, r ^ (Eigen::Index{1} << site)) += elem;
  }
  return m;
}

Eigen::VectorXcd apply_operator(const RowAccessor& op, int num_sites, const Eigen::VectorXcd& x) {
  check_cap(num_sites, kMatvecCap, "apply_operator");
  const Eigen::Index dim = Eigen::Index{1} << num_sites;
  if (x.size() != dim) throw ValidationError("apply_operator: vector length does not match 2^N");
  Eigen::VectorXcd y(dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    const auto row = op(index_to_config(static_cast<std::uint64_t>(r), num_sites));
    cplx acc = row.diag * x(r);
    for (const auto& [site, elem] : row.offdiag) acc += elem * x(r ^ (Eigen::Index{1} << site));
    y(r) = acc;
  }
  return y;
}

Eigen::VectorXcd apply_hamiltonian(const Hamiltonian& ham, const Eigen::VectorXcd& x, bool adjoint) {
  return apply_operator([&](SpinView c) { return adjoint ? ham.adjoint_row(c) : ham.row(c); }, ham.num_sites(), x);
}

std::vector<Eigen::Index> sort_spectrum(const Eigen::VectorXcd& values) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(values.size()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::stable_sort(perm.begin(), perm.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a).real() < values(b).real(); });
  // Group runs whose real parts agree to roundoff, then order each run by imaginary part.
  std::size_t start = 0;
  while (start < perm.size()) {
    const double re0 = values(perm[start]).real();
    const double tol = 1e-9 * std::max(1.0, std::abs(re0));
    std::size_t end = start + 1;
    while (end < perm.size() && values(perm[end]).real() - re0 <= tol) ++end;
    std::stable_sort(perm.begin() + static_cast<std::ptrdiff_t>(start), perm.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](Eigen::Index a, Eigen::Index b) { return values(a).imag() < values(b).imag(); });
    start = end;
  }
  return perm;
}

EDResult diagonalize(const Eigen::MatrixXcd& h, bool vectors) {
  if (h.rows() != h.cols() || h.rows() == 0) throw ValidationError("diagonalize: matrix must be square and nonempty");
  if (!h.allFinite()) throw ValidationError("diagonalize: matrix has non-finite entries");
  const auto n = static_cast<lapack_int>(h.rows());
  Eigen::MatrixXcd a = h;
  Eigen::VectorXcd w(n);
  Eigen::MatrixXcd vl, vr;
  if (vectors) {
    vl.resize(n, n);
    vr.resize(n, n);
  }
  const char job = vectors ? 'V' : 'N';
  const lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, job, job, n, a.data(), n, w.data(),
                                        vectors ? vl.data() : nullptr, n, vectors ? vr.data() : nullptr, n);
  if (info != 0) throw NumericalError("zgeev failed with info = " + std::to_string(info));

  const auto perm = sort_spectrum(w);
  EDResult out;
  out.eigenvalues.resize(n);
  for (lapack_int i = 0; i < n; ++i) out.eigenvalues(i) = w(perm[i]);
  if (!vectors) return out;

  out.right.resize(n, n);
  out.left.resize(n, n);
  for (lapack_int i = 0; i < n; ++i) {
    out.right.col(i) = vr.col(perm[i]).normalized();
    out.left.col(i) = vl.col(perm[i]).normalized();
  }
  out.pairing_condition.assign(n, 1.0);
  out.ep_suspect.assign(n, false);

  // Clusters of (numerically) degenerate eigenvalues. After sorting, members are contiguous
  // except in contrived cases, so a linear scan is enough.
  const double scale = std::max(1.0, out.eigenvalues.cwiseAbs().maxCoeff());
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i + 1;
    while (j < n && std::abs(out.eigenvalues(j) - out.eigenvalues(j - 1)) < kClusterTol * scale) ++j;
    const Eigen::Index m = j - i;
    auto r = out.right.middleCols(i, m);
    auto l = out.left.middleCols(i, m);
    const Eigen::MatrixXcd g = l.adjoint() * r;
    if (m == 1) {
      const double overlap = std::abs(g(0, 0));
      out.pairing_condition[i] = overlap > 0.0 ? 1.0 / overlap : std::numeric_limits<double>::infinity();
      out.ep_suspect[i] = overlap < kEpSuspect;
      if (overlap > 0.0) l.col(0) /= std::conj(g(0, 0));
    } else {
      // Re-pair the subspace: L' = L G^{-H} gives L'^H R = I within the cluster.
      Eigen::FullPivLU<Eigen::MatrixXcd> lu(g);
      lu.setThreshold(1e-12);
      if (lu.isInvertible()) {
        l = l * lu.inverse().adjoint();
        for (Eigen::Index c = 0; c < m; ++c) {
          const double overlap = 1.0 / l.col(c).norm();
          out.pairing_condition[i + c] = 1.0 / overlap;
          out.ep_suspect[i + c] = overlap < kEpSuspect;
        }
      } else {
        for (Eigen::Index c = 0; c < m; ++c) {
          const double overlap = std::abs(g(c, c));
          out.pairing_condition[i + c] = overlap > 0.0 ? 1.0 / overlap : std::numeric_limits<double>::infinity();
          out.ep_suspect[i + c] = true;
        }
      }
    }
    i = j;
  }
  return out;
}

GroundPair ground_state(const EDResult& ed) {
  if (ed.size() == 0) throw ValidationError("ground_state: empty result");
  if (!ed.has_vectors()) throw ValidationError("ground_state: eigenvectors were not computed");
  return {ed.eigenvalues(0), ed.right.col(0), ed.left.col(0), 0};
}

GapResult spectral_gap(const Eigen::VectorXcd& e) {
  if (e.size() < 3) throw ValidationError("spectral_gap: need at least 3 levels, got " + std::to_string(e.size()));
  GapResult g;
  g.delta = std::numeric_limits<double>::infinity();
  for (Eigen::Index n = 2; n < e.size(); ++n) g.delta = std::min(g.delta, std::abs(e(n) - e(0)));
  return g;
}

double lr_fidelity(const Eigen::VectorXcd& right, const Eigen::VectorXcd& left) {
  const double nr = right.norm();
  const double nl = left.norm();
  if (nr == 0.0 || nl == 0.0) throw ValidationError("lr_fidelity: zero vector");
  const double ov = std::abs(left.dot(right)) / (nr * nl);
  return std::min(1.0, ov * ov);
}

double lr_fidelity(const EDResult& ed) {
  const auto g = ground_state(ed);
  return lr_fidelity(g.right, g.left);
}

namespace {

cplx expectation_from_product(const Eigen::VectorXcd& right, const Eigen::VectorXcd& left,
                              const Eigen::VectorXcd& op_right, ExpectationMode mode) {
  if (mode == ExpectationMode::rr) return right.dot(op_right) / right.squaredNorm();
  const cplx den = left.dot(right);
  if (den == cplx{}) throw NumericalError("exact_observable: left and right vectors are orthogonal");
  return left.dot(op_right) / den;
}

}  // namespace

cplx exact_observable(const Eigen::VectorXcd& right, const Eigen::VectorXcd& left, const Eigen::MatrixXcd& op,
                      ExpectationMode mode) {
  return expectation_from_product(right, left, op * right, mode);
}

cplx exact_observable(const Eigen::VectorXcd& right, const Eigen::VectorXcd& left, const RowAccessor& op,
                      int num_sites, ExpectationMode mode) {
  return expectation_from_product(right, left, apply_operator(op, num_sites, right), mode);
}

cplx exact_observable(const EDResult& ed, const Eigen::MatrixXcd& op, ExpectationMode mode) {
  const auto g = ground_state(ed);
  return exact_observable(g.right, g.left, op, mode);
}

Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("self-adjoint eigensolver did not converge");
  return solver.eigenvalues();
}

void write_spectrum_csv(std::ostream& os, const EDResult& ed) {
  const auto old = os.precision(17);
  os << "n,re,im,lr_overlap\n";
  for (Eigen::Index n = 0; n < ed.size(); ++n) {
    os << n << ',' << ed.eigenvalues(n).real() << ',' << ed.eigenvalues(n).imag() << ',';
    if (ed.has_vectors()) {
      const double c = ed.pairing_condition[static_cast<std::size_t>(n)];
      os << (std::isfinite(c) ? 1.0 / c : 0.0);
    }
    os << '\n';
  }
  os.precision(old);
}

namespace {

// Translation by one site on basis indices: bit i moves to bit i+1 (mod L).
std::uint64_t rotate(std::uint64_t x, int n) {
  const std::uint64_t mask = (std::uint64_t{1} << n) - 1;
  return ((x << 1) | (x >> (n - 1))) & mask;
}

struct OrbitTable {
  std::vector<std::uint64_t> rep;  // representative (smallest index in the orbit)
  std::vector<int> shift;          // rotate^shift(x) == rep(x)
  std::vector<int> period;         // orbit length of rep, stored at the rep index
  std::vector<std::uint64_t> reps;
};

OrbitTable build_orbits(int n) {
  const std::uint64_t dim = std::uint64_t{1} << n;
  OrbitTable t;
  t.rep.assign(dim, 0);
  t.shift.assign(dim, -1);
  t.period.assign(dim, 0);
  for (std::uint64_t x = 0; x < dim; ++x) {
    if (t.shift[x] >= 0) continue;
    // x is the smallest member of its orbit because members are visited in ascending order.
    std::uint64_t y = x;
    int r = 0;
    do {
      ++r;
      y = rotate(y, n);
    } while (y != x);
    t.reps.push_back(x);
    t.period[x] = r;
    y = x;
    for (int s = 0; s < r; ++s) {
      // rotate^(r - s) (y) == x
      t.rep[y] = x;
      t.shift[y] = (r - s) % r;
      y = rotate(y, n);
    }
  }
  return t;
}

struct Sector {
  Eigen::MatrixXcd matrix;
  std::vector<std::uint64_t> basis;
};

Sector sector_matrix(const Hamiltonian& ham, const OrbitTable& orbits, int m) {
  const int n = ham.num_sites();
  const double q = 2.0 * kPi * m / n;
  Sector s;
  std::vector<long> pos(orbits.rep.size(), -1);
  for (auto r : orbits.reps) {
    if ((static_cast<long>(m) * orbits.period[r]) % n == 0) {
      pos[r] = static_cast<long>(s.basis.size());
      s.basis.push_back(r);
    }
  }
  const auto dim = static_cast<Eigen::Index>(s.basis.size());
  s.matrix = Eigen::MatrixXcd::Zero(dim, dim);
  for (Eigen::Index a = 0; a < dim; ++a) {
    const std::uint64_t ra = s.basis[static_cast<std::size_t>(a)];
    const auto cfg = index_to_config(ra, n);
    s.matrix(a, a) += ham.diagonal(cfg);
    for (int i = 0; i < n; ++i) {
      const std::uint64_t flipped = ra ^ (std::uint64_t{1} << i);
      const std::uint64_t rb = orbits.rep[flipped];
      const long b = pos[rb];
      if (b < 0) continue;
      const double amp = std::sqrt(static_cast<double>(orbits.period[ra]) / orbits.period[rb]);
      s.matrix(b, a) += ham.flip_element(i) * amp * std::polar(1.0, q * orbits.shift[flipped]);
    }
  }
  return s;
}

Eigen::VectorXcd embed(const Eigen::VectorXcd& v, const Sector& s, const OrbitTable& orbits, int n, int m) {
  const double q = 2.0 * kPi * m / n;
  Eigen::VectorXcd full = Eigen::VectorXcd::Zero(Eigen::Index{1} << n);
  for (std::size_t a = 0; a < s.basis.size(); ++a) {
    const std::uint64_t r = s.basis[a];
    const double norm = std::sqrt(static_cast<double>(orbits.period[r])) / n;
    std::uint64_t y = r;
    for (int j = 0; j < n; ++j) {
      full(static_cast<Eigen::Index>(y)) += v(static_cast<Eigen::Index>(a)) * norm * std::polar(1.0, q * j);
      y = rotate(y, n);
    }
  }
  return full;
}

}  // namespace

SectorResult translation_sector_ed(const Hamiltonian& ham, bool ground_vectors, int cap) {
  const auto& lat = ham.lattice();
  if (lat.kind != LatticeKind::chain1d || !lat.periodic) {
    throw ValidationError("translation_sector_ed: needs a periodic chain");
  }
  const int n = ham.num_sites();
  check_cap(n, cap, "translation_sector_ed");
  const auto orbits = build_orbits(n);

  std::vector<cplx> all;
  all.reserve(std::size_t{1} << n);
  cplx best{std::numeric_limits<double>::infinity(), 0.0};
  int best_m = 0;
  std::vector<Sector> sectors;
  sectors.reserve(n);
  for (int m = 0; m < n; ++m) {
    sectors.push_back(sector_matrix(ham, orbits, m));
    if (sectors.back().basis.empty()) continue;
    const auto ed = diagonalize(sectors.back().matrix, false);
    for (Eigen::Index i = 0; i < ed.size(); ++i) all.push_back(ed.eigenvalues(i));
    const cplx e0 = ed.eigenvalues(0);
    // Same ordering rule as sort_spectrum, applied across sectors.
    const double tol = 1e-9 * std::max(1.0, std::abs(e0.real()));
    if (!std::isfinite(best.real()) || e0.real() < best.real() - tol || (std::abs(e0.real() - best.real()) <= tol && e0.imag() < best.imag())) {
      best = e0;
      best_m = m;
    }
  }

  SectorResult out;
  Eigen::VectorXcd values = Eigen::Map<Eigen::VectorXcd>(all.data(), static_cast<Eigen::Index>(all.size()));
  const auto perm = sort_spectrum(values);
  out.eigenvalues.resize(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) out.eigenvalues(i) = values(perm[static_cast<std::size_t>(i)]);
  out.ground_energy = out.eigenvalues(0);
  out.ground_momentum = best_m;

  const auto ed = diagonalize(sectors[static_cast<std::size_t>(best_m)].matrix, true);
  // Pick the eigenvector whose eigenvalue is the global ground energy.
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < ed.size(); ++i) {
    if (std::abs(ed.eigenvalues(i) - out.ground_energy) < std::abs(ed.eigenvalues(k) - out.ground_energy)) k = i;
  }
  out.ground_fidelity = lr_fidelity(ed.right.col(k), ed.left.col(k));
  if (ground_vectors) {
    out.ground_right = embed(ed.right.col(k), sectors[static_cast<std::size_t>(best_m)], orbits, n, best_m);
    out.ground_left = embed(ed.left.col(k), sectors[static_cast<std::size_t>(best_m)], orbits, n, best_m);
  }
  return out;
}

}  // namespace nhvmc
