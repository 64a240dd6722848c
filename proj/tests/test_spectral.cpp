#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include "callias/engine.hpp"
#include "callias/errors.hpp"
#include "callias/spectral.hpp"

using namespace callias;
namespace fs = std::filesystem;

namespace {

// spec {-2, -1, 1, 3} on two sites
BoundaryOperator four_level() {
  Mat pot = Mat::Zero(4, 4);
  pot(0, 0) = 3;
  pot(1, 1) = -2;
  pot(2, 2) = 1;
  pot(3, 3) = -1;
  return build_points_operator(BoundarySlice::points(2), Mat::Zero(4, 4), pot, "four");
}

BoundaryOperator random_points(std::mt19937_64& rng, Index sites) {
  std::normal_distribution<double> n;
  const BoundarySlice s = BoundarySlice::points(sites);
  const Index d = s.dim();
  Mat dirac = Mat::Zero(d, d);
  // Gamma-odd entries only: even dof <-> odd dof
  for (Index i = 0; i < d; i += 2)
    for (Index j = 1; j < d; j += 2) {
      const cplx z(n(rng), n(rng));
      dirac(i, j) = z;
      dirac(j, i) = std::conj(z);
    }
  std::vector<double> f(static_cast<std::size_t>(sites));
  for (auto& v : f) v = 2 * n(rng);
  return build_points_operator(s, dirac, f, 0.0);
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("callias_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("diagonal decomposition") {
  const BoundaryOperator a = build_boundary_operator(BoundarySlice::points(1), {0.5}, 0.0);
  const SpectralData s = eigendecompose(a);
  CHECK(s.values(0) == -0.5);
  CHECK(s.values(1) == 0.5);
  CHECK(std::abs(s.vectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(s.vectors(0, 1)) == doctest::Approx(1.0));
  CHECK(s.complete());
  CHECK(s.zero_tol == doctest::Approx(0.5e-8));
}

TEST_CASE("eigen residuals and orthonormality") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 5; ++t) {
    const BoundaryOperator a = random_points(rng, 1 + t);
    const SpectralData s = eigendecompose(a);
    const SpectralQuality q = spectral_quality(a, s);
    CHECK(q.residual <= 1e-9);
    CHECK(q.orthonormality <= 1e-10);
    for (Index i = 1; i < s.size(); ++i) CHECK(s.values(i) >= s.values(i - 1));

    const SpectralData sh = eigendecompose(adjoint_boundary_operator(a));
    for (Index i = 0; i < s.size(); ++i)
      CHECK(std::abs(sh.values(i) + s.values(s.size() - 1 - i)) <= 1e-10);
  }
}

TEST_CASE("spectral projections") {
  const SpectralData s = eigendecompose(four_level());
  CHECK(spectral_projection(s, SpectralInterval::all()).cols() == 4);
  const Mat neg = spectral_projection(s, SpectralInterval::below(0.0, false));
  CHECK(neg.cols() == 2);
  const Mat P = neg * neg.adjoint();
  CHECK((P * P - P).cwiseAbs().maxCoeff() <= 1e-15);
  const Mat lo = spectral_projection(s, SpectralInterval::below(0.5, true));
  const Mat hi = spectral_projection(s, SpectralInterval::above(0.5, false));
  CHECK((lo * lo.adjoint() + hi * hi.adjoint() - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(s.count(SpectralInterval::between(-1.5, true, 0.5, false)) == 1);
  CHECK(s.kernel_dim() == 0);

  // endpoint collisions are errors; 0 is decided by the flag
  CHECK_THROWS_AS(s.check_endpoints(SpectralInterval::below(1.0, false)), PreconditionError);
  CHECK_THROWS_AS(spectral_projection(s, SpectralInterval::below(-1.0, true)), PreconditionError);
  CHECK_THROWS_AS(SpectralInterval::between(1, false, 0, false).validate(), InvalidArgument);
}

TEST_CASE("kernel membership at zero") {
  Mat pot = Mat::Zero(4, 4);
  pot(0, 0) = 1;
  pot(3, 3) = -1;
  const SpectralData s =
      eigendecompose(build_points_operator(BoundarySlice::points(2), Mat::Zero(4, 4), pot));
  CHECK(s.kernel_dim() == 2);
  CHECK(s.count(SpectralInterval::below(0.0, false)) == 1);
  CHECK(s.count(SpectralInterval::below(0.0, true)) == 3);
  const SpectralData n = s.negated();
  CHECK(n.values(0) == -1.0);
  CHECK(n.values(3) == 1.0);
}

TEST_CASE("sobolev norms") {
  const SpectralData s = eigendecompose(four_level());
  for (Index j = 0; j < 4; ++j) {
    const Vec u = s.vectors.col(j);
    const double l = s.values(j);
    for (double o : {-1.0, -0.5, 0.5, 2.0})
      CHECK(sobolev_norm(s, u, o) == doctest::Approx(std::pow(1 + l * l, o / 2)).epsilon(1e-14));
  }
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int t = 0; t < 20; ++t) {
    Vec u(4);
    for (Index i = 0; i < 4; ++i) u(i) = cplx(n(rng), n(rng));
    CHECK(sobolev_norm(s, u, 0.0) == doctest::Approx(u.norm()).epsilon(1e-14));
    CHECK(sobolev_norm(s, u, -0.5) <= sobolev_norm(s, u, 0.5));
    CHECK(sobolev_norm(s, u, 0.5) <= sobolev_norm(s, u, 1.5));
  }
  // H^s / H^-s pairing is the identity in the eigenbasis
  Mat gram(4, 4);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) {
      const double wi = std::pow(1 + s.values(i) * s.values(i), 0.5);
      const double wj = std::pow(1 + s.values(j) * s.values(j), -0.5);
      gram(i, j) = std::sqrt(wi * wj) * s.vectors.col(i).dot(s.vectors.col(j));
    }
  CHECK((gram - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("hybrid norms") {
  const SpectralData s = eigendecompose(four_level());
  for (Index j = 0; j < 4; ++j) {
    const double l = s.values(j);
    const HybridNorms h = hybrid_norms(s, s.vectors.col(j), 0.0);
    const double e = l < 0 ? 0.25 : -0.25;
    CHECK(h.check == doctest::Approx(std::pow(1 + l * l, e)).epsilon(1e-14));
    CHECK(h.hat == doctest::Approx(std::pow(1 + l * l, -e)).epsilon(1e-14));
    CHECK(h.hat_equals_negated_check);
  }
  // u orthogonal to the modes in [a1, a2] sees the same check norm
  const Vec u = s.vectors.col(0) * 0.3 + s.vectors.col(2) * cplx(0, 0.7) + s.vectors.col(3);
  CHECK(hybrid_norms(s, u, -0.5).check == hybrid_norms(s, u, 0.5).check);
  CHECK_THROWS_AS(hybrid_norms(s, u, 1.0), PreconditionError);
}

TEST_CASE("duality pairing") {
  const BoundaryOperator a = four_level();
  const SpectralData s = eigendecompose(a);
  const SpectralData sh = eigendecompose(adjoint_boundary_operator(a));
  const CliffordData& cl = a.clifford();
  const SpMat cdt = cl.cdt_on(a.slice());
  for (Index j = 0; j < 4; ++j) {
    const Vec u = s.vectors.col(j);
    const Vec v = cdt * u;
    CHECK(std::abs(duality_pairing(cl, u, v) - cplx(-1.0)) <= 1e-15);
  }
  const Vec u = s.vectors.col(0) + s.vectors.col(1);
  const Vec v = sh.vectors.col(2);
  const cplx alpha(0.3, -1.2);
  CHECK(std::abs(duality_pairing(cl, alpha * u, v) - std::conj(alpha) * duality_pairing(cl, u, v)) <= 1e-15);
  const PairingGram g = pairing_gram(s, sh, cl);
  CHECK(g.abs_det > 1e-8);
  CHECK(g.min_singular == doctest::Approx(1.0));
}

TEST_CASE("extension map and trace bounds") {
  const SpectralData s = eigendecompose(four_level());
  const TimeGrid g{1.0, 24};
  const Cutoff chi{1.0};
  CHECK(chi(0.0) == 1.0);
  CHECK(chi(0.3) == 1.0);
  CHECK(chi(0.7) == 0.0);
  for (Index j = 0; j < 4; ++j) {
    const Vec u = s.vectors.col(j);
    const CylinderSection w = extension_map(s, u, g, chi);
    CHECK((w.nodes[0] - u).norm() == 0.0);
    for (Index k = 0; k <= g.intervals; ++k) {
      const double t = g.node(k);
      const Vec expect = chi(t) * std::exp(-t * std::abs(s.values(j))) * u;
      CHECK((w.nodes[static_cast<std::size_t>(k)] - expect).norm() <= 1e-15);
      if (k > 0 && t <= 1.0 / 3)
        CHECK(w.nodes[static_cast<std::size_t>(k)].norm() <= w.nodes[static_cast<std::size_t>(k - 1)].norm());
    }
    CHECK(std::isfinite(trace_ratio(s, w)));
  }
  CylinderSection zero{g, std::vector<Vec>(25, Vec::Zero(4))};
  CHECK_THROWS_AS(trace_ratio(s, zero), InvalidArgument);

  // empirical constants stay bounded under refinement of the t-grid
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  double ext[2] = {0, 0}, tr[2] = {0, 0};
  for (int r = 0; r < 2; ++r) {
    const TimeGrid gr{1.0, r == 0 ? 48 : 96};
    rng.seed(5);
    for (int t = 0; t < 100; ++t) {
      Vec u(4);
      for (Index i = 0; i < 4; ++i) u(i) = cplx(n(rng), n(rng));
      ext[r] = std::max(ext[r], extension_ratio(s, u, gr, chi, 0.0));
      std::vector<Vec> nodes;
      for (Index k = 0; k <= gr.intervals; ++k) {
        Vec v(4);
        for (Index i = 0; i < 4; ++i) v(i) = cplx(n(rng), n(rng)) * chi(gr.node(k));
        nodes.push_back(v);
      }
      tr[r] = std::max(tr[r], trace_ratio(s, CylinderSection{gr, nodes}));
    }
  }
  CHECK(ext[1] == doctest::Approx(ext[0]).epsilon(0.2));
  CHECK(tr[1] <= 1.2 * tr[0]);
}

TEST_CASE("engine cache round trip") {
  const fs::path dir = fresh_dir("cache");
  const BoundaryOperator a = four_level();
  std::mt19937_64 rng(1);
  const BoundaryOperator b = random_points(rng, 3);

  SpectralEngine e1({}, dir);
  auto s1 = e1.decompose(b);
  CHECK(e1.stats().solver_calls == 1);
  CHECK(e1.decompose(b) == s1);
  CHECK(e1.stats().memo_hits == 1);

  SpectralEngine e2({}, dir);
  auto s2 = e2.decompose(b);
  CHECK(e2.stats().solver_calls == 0);
  CHECK(e2.stats().cache_hits == 1);
  CHECK(s2->values == s1->values);
  CHECK(s2->vectors == s1->vectors);
  CHECK(s2->zero_tol == s1->zero_tol);
  CHECK(s2->op_hash == s1->op_hash);

  // a perturbed potential misses
  const BoundaryOperator c = compact_perturbation(b, Patch{{1}, {0.125}});
  e2.decompose(c);
  CHECK(e2.stats().solver_calls == 1);
  CHECK(e2.cache_key(b, {}) != e2.cache_key(c, {}));
  CHECK(e2.cache_key(a, {}) == SpectralEngine({}, dir).cache_key(a, {}));
  fs::remove_all(dir);
}

TEST_CASE("engine rejects corrupt and foreign entries") {
  const fs::path dir = fresh_dir("corrupt");
  const BoundaryOperator a = four_level();
  std::string key;
  {
    SpectralEngine e({}, dir);
    key = e.cache_key(a, {});
    e.decompose(a);
  }
  const fs::path entry = dir / (key + ".bin");
  REQUIRE(fs::exists(entry));
  std::string bytes;
  {
    std::ifstream in(entry, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }

  SUBCASE("flipped byte") {
    std::string bad = bytes;
    bad[bad.size() / 2] ^= 0x5a;
    std::string why;
    CHECK_FALSE(deserialize_spectral(bad, key, &why).has_value());
    CHECK(why == "checksum mismatch");
    std::ofstream(entry, std::ios::binary | std::ios::trunc).write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  SUBCASE("older version tag") {
    std::string old = bytes.substr(0, bytes.size() - 64);
    const std::string tag = kVersionTag;
    const auto at = old.find(tag);
    REQUIRE(at != std::string::npos);
    std::string other = tag;
    other[other.find("0.3.0")] = '9';
    old.replace(at, tag.size(), other);
    old += sha256_hex(old);
    std::string why;
    CHECK_FALSE(deserialize_spectral(old, key, &why).has_value());
    CHECK(why == "version tag mismatch");
    std::ofstream(entry, std::ios::binary | std::ios::trunc).write(old.data(), static_cast<std::streamsize>(old.size()));
  }
  SUBCASE("truncated") {
    std::ofstream(entry, std::ios::binary | std::ios::trunc).write(bytes.data(), 20);
  }

  SpectralEngine e({}, dir);
  auto s = e.decompose(a);
  CHECK(e.stats().solver_calls == 1);
  CHECK(e.warnings().size() == 1);
  CHECK(s->values.size() == 4);
  // replaced with a good entry
  SpectralEngine again({}, dir);
  again.decompose(a);
  CHECK(again.stats().cache_hits == 1);
  CHECK(again.warnings().empty());
  fs::remove_all(dir);
}
