#include <doctest.h>

#include <cmath>
#include <random>

#include "callias/bvp.hpp"
#include "callias/errors.hpp"

using namespace callias;

namespace {

BoundaryOperator diag_pts(std::vector<double> d) {
  const Index n = static_cast<Index>(d.size());
  Mat pot = Mat::Zero(n, n);
  for (Index i = 0; i < n; ++i) pot(i, i) = d[static_cast<std::size_t>(i)];
  return build_points_operator(BoundarySlice::points(n / 2), Mat::Zero(n, n), pot);
}

// spec {-2, -1, 1, 3}
BoundaryOperator four_level() { return diag_pts({3, -2, 1, -1}); }

BoundaryOperator random_points(std::mt19937_64& rng, Index sites, double dirac_scale = 1.0) {
  std::normal_distribution<double> n;
  const BoundarySlice s = BoundarySlice::points(sites);
  const Index d = s.dim();
  Mat dirac = Mat::Zero(d, d);
  for (Index i = 0; i < d; i += 2)
    for (Index j = 1; j < d; j += 2) {
      const cplx z(dirac_scale * n(rng), dirac_scale * n(rng));
      dirac(i, j) = z;
      dirac(j, i) = std::conj(z);
    }
  std::vector<double> f(static_cast<std::size_t>(sites));
  for (auto& v : f) v = 2 * n(rng);
  return build_points_operator(s, dirac, f, 0.0);
}

Mat random_subspace(std::mt19937_64& rng, Index n, Index k) {
  std::normal_distribution<double> nd;
  Mat m(n, k);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < k; ++j) m(i, j) = cplx(nd(rng), nd(rng));
  return orthonormalize(m);
}

std::vector<Vec> random_section(std::mt19937_64& rng, Index n, Index K) {
  std::normal_distribution<double> nd;
  std::vector<Vec> u;
  for (Index k = 0; k <= K; ++k) {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v(i) = cplx(nd(rng), nd(rng));
    u.push_back(v);
  }
  return u;
}

Mat unit_cols(Index n, std::vector<Index> idx) {
  Mat m = Mat::Zero(n, static_cast<Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) m(idx[j], static_cast<Index>(j)) = 1;
  return m;
}

}  // namespace

TEST_CASE("APS condition dimensions") {
  const SpectralData s = eigendecompose(four_level());
  CHECK(aps_condition(s, 0.0).dim() == 2);
  CHECK(aps_condition(s, -5.0).dim() == 0);
  CHECK(aps_condition(s, 5.0).dim() == 4);
  CHECK(dual_aps_condition(s, 0.0).dim() == 2);
  // at the far end the condition is a subspace of -A: lambda > 0
  CHECK(aps_condition(s, 0.0, Side::End).dim() == 2);
  CHECK(aps_condition(s, 1.5, Side::End).dim() == 3);
  CHECK_THROWS_AS(aps_condition(s, 1.0), PreconditionError);
  for (const BoundaryCondition& b : {aps_condition(s, 0.5), dual_aps_condition(s, -1.5)})
    CHECK((b.basis.adjoint() * b.basis - Mat::Identity(b.dim(), b.dim())).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("adjoint conditions") {
  const BoundaryOperator a = four_level();
  const CliffordData& cl = a.clifford();
  CHECK(adjoint_condition(zero_condition(4), cl).dim() == 4);
  CHECK(adjoint_condition(full_condition(4), cl).dim() == 0);

  const SpectralData s = eigendecompose(a);
  const SpectralData sh = eigendecompose(adjoint_boundary_operator(a));
  const BoundaryCondition b = aps_condition(s, 0.0);
  const BoundaryCondition ad = adjoint_condition(b, cl);
  CHECK(ad.dim() == 2);
  CHECK(aps_adjoint_mismatch(b, cl, sh) < 1e-8);
  CHECK(aps_adjoint_mismatch(aps_condition(s, 2.0), cl, sh) < 1e-8);
  CHECK(aps_adjoint_mismatch(aps_condition(s, 0.5, Side::End), cl, sh) < 1e-8);

  // involution on random subspaces, with and without a known complement
  std::mt19937_64 rng(21);
  for (Index k = 0; k <= 6; ++k) {
    const BoundaryCondition c = custom_condition(random_subspace(rng, 6, k));
    const BoundaryCondition cc = adjoint_condition(adjoint_condition(c, cl), cl);
    CHECK(cc.dim() == k);
    if (k > 0) CHECK(subspace_distance(cc.basis, c.basis) < 1e-8);
  }
  const BoundaryCondition bb = adjoint_condition(ad, cl);
  CHECK(subspace_distance(bb.basis, b.basis) < 1e-8);
}

TEST_CASE("transmission condition") {
  const BoundarySlice s = BoundarySlice::points(2);
  const BoundaryCondition t = transmission_condition(s, s);
  CHECK(t.dim() == 4);
  CHECK(t.ambient_dim() == 8);
  Vec u(4);
  u << 1.0, cplx(0, 2), -0.5, 3.0;
  Vec uu(8), um(8);
  uu << u, u;
  um << u, -u;
  CHECK(t.residual(uu) <= 1e-15);
  CHECK(t.residual(um) > 1.0);
  // with both copies carrying the same normal the adjoint is {(v, -v)}
  const BoundaryCondition ad = adjoint_condition(t, make_clifford(2));
  Mat anti(8, 4);
  anti << Mat::Identity(4, 4), -Mat::Identity(4, 4);
  CHECK(subspace_distance(ad.basis, orthonormalize(anti)) < 1e-8);
  CHECK_THROWS_AS(transmission_condition(s, BoundarySlice::points(3)), InvalidArgument);
}

TEST_CASE("constrained operator dimensions") {
  const BoundaryOperator a = diag_pts({1, -1});
  const SpectralData s = eigendecompose(a);
  const CalliasOperator d = CalliasOperator::product(a, TimeGrid{1.0, 8});
  const ConstrainedOperator full = ConstrainedOperator::assemble(d, full_condition(2), full_condition(2));
  CHECK(full.dim_domain() == 18);
  CHECK(full.dim_codomain() == 16);
  const ConstrainedOperator aps =
      ConstrainedOperator::assemble(d, aps_condition(s, 0.0), aps_condition(s, 0.0, Side::End));
  CHECK(aps.dim_domain() == 16);
  CHECK(aps.dim_codomain() == 16);
  const ConstrainedOperator zero = ConstrainedOperator::assemble(d, zero_condition(2), zero_condition(2));
  CHECK(zero.dim_domain() == 14);
  CHECK(aps.action().rows() == 16);
  CHECK(aps.action().cols() == 16);
  CHECK(aps.domain_basis().rows() == 18);
  CHECK_THROWS_AS(ConstrainedOperator::assemble(d, full_condition(4), full_condition(2)), InvalidArgument);
}

TEST_CASE("index examples") {
  const BoundaryOperator a0 = diag_pts({1, -1});
  const BoundaryOperator a1 = diag_pts({1, 1});
  const SpectralData s0 = eigendecompose(a0);
  const SpectralData s1 = eigendecompose(a1);
  const TimeGrid g{1.0, 12};

  const CalliasOperator p = CalliasOperator::product(a0, g);
  const IndexReport rp = compute_index(
      ConstrainedOperator::assemble(p, aps_condition(s0, 0.0), aps_condition(s0, 0.0, Side::End)));
  CHECK(rp.index == 0);
  CHECK(rp.dim_ker == 0);
  CHECK(rp.consistent);
  CHECK_FALSE(rp.flagged);

  const CalliasOperator d = CalliasOperator::interpolating(a0, a1, g);
  const ConstrainedOperator c =
      ConstrainedOperator::assemble(d, aps_condition(s0, 0.0), aps_condition(s1, 0.0, Side::End));
  const IndexReport r = compute_index(c);
  CHECK(r.index == 1);
  CHECK(r.counting_index == 1);
  CHECK(r.dim_ker == 1);
  CHECK(r.consistent);
  CHECK(r.sv_gap > 10);
  CHECK(r.method == "svd_dense");

  const Verdict v = check_adjoint_duality(c);
  CHECK(v.passed);
  CHECK(v.lhs == -1);
}

TEST_CASE("random BVPs: counting identity and adjoint duality") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> sites(1, 3);
  for (int t = 0; t < 12; ++t) {
    const Index m = sites(rng);
    const BoundaryOperator a0 = random_points(rng, m);
    const BoundaryOperator a1 = random_points(rng, m);
    const CalliasOperator d = CalliasOperator::interpolating(a0, a1, TimeGrid{1.0, 9});
    const Index n = a0.dim();
    BoundaryCondition b0, b1;
    if (t % 2 == 0) {
      b0 = aps_condition(eigendecompose(a0), 0.0);
      b1 = aps_condition(eigendecompose(a1), 0.0, Side::End);
    } else {
      std::uniform_int_distribution<Index> k(0, n);
      b0 = custom_condition(random_subspace(rng, n, k(rng)));
      b1 = custom_condition(random_subspace(rng, n, k(rng)));
    }
    const ConstrainedOperator c = ConstrainedOperator::assemble(d, b0, b1);
    const IndexReport r = compute_index(c);
    CHECK(r.consistent);
    CHECK(r.dim_ker - r.dim_coker == c.dim_domain() - c.dim_codomain());
    const ConstrainedOperator ad = adjoint_bvp(c);
    const IndexReport ra = compute_index(ad);
    CHECK(ra.consistent);
    CHECK(ra.index == -r.index);
    // kernels pair up: dim coker D_B = dim ker (D*)_{B^ad}
    CHECK(ra.dim_ker == r.dim_coker);
  }
}

TEST_CASE("relative index") {
  const Mat x = unit_cols(4, {0, 1});
  const Mat y = unit_cols(4, {0});
  CHECK(relative_index(x, x) == 0);
  CHECK(relative_index(x, y) == 1);
  CHECK(relative_index(y, x) == -1);
  CHECK(relative_index(orthogonal_complement(x), orthogonal_complement(y)) == -1);
}

TEST_CASE("discrete Green identity") {
  std::mt19937_64 rng(4);
  const BoundaryOperator a0 = random_points(rng, 2);
  const BoundaryOperator a1 = random_points(rng, 2);
  const CalliasOperator d = CalliasOperator::interpolating(a0, a1, TimeGrid{1.0, 16});
  for (int t = 0; t < 20; ++t) {
    const auto u = random_section(rng, 4, 16);
    const auto v = random_section(rng, 4, 16);
    const GreenResidual g = green_residual(d, u, v);
    CHECK(g.residual <= 64 * 2.2e-16 * g.term_scale);
    CHECK(g.norm_u > 0);
  }
  // D acts like c(dt)(d/dt + A) on the node average
  const auto u = random_section(rng, 4, 16);
  const std::vector<Vec> du = apply_cylinder(d, u);
  CHECK(du.size() == 16);
  CHECK_THROWS_AS(apply_cylinder(d, std::vector<Vec>(3, Vec::Zero(4))), InvalidArgument);
}

TEST_CASE("condition change") {
  const BoundaryOperator a = four_level();
  const SpectralData s = eigendecompose(a);
  const CalliasOperator d = CalliasOperator::product(a, TimeGrid{1.0, 12});
  const BoundaryCondition end = aps_condition(s, 0.0, Side::End);
  const Verdict v = check_condition_change(d, s, -1.5, 0.5, end);
  CHECK(v.passed);
  CHECK(v.lhs == 1);
  const Verdict same = check_condition_change(d, s, -0.5, 0.5, end);
  CHECK(same.passed);
  CHECK(same.lhs == 0);
  const Verdict wide = check_condition_change(d, s, -3.0, 4.0, end);
  CHECK(wide.passed);
  CHECK(wide.rhs == 4);
  CHECK_THROWS_AS(check_condition_change(d, s, 0.5, -0.5, end), InvalidArgument);
  CHECK_THROWS_AS(check_condition_change(d, s, -1.0, 0.5, end), PreconditionError);

  // dual versus plain APS picks up the kernel
  const BoundaryOperator k = diag_pts({1, 0, 0, -2});
  const SpectralData sk = eigendecompose(k);
  const CalliasOperator dk = CalliasOperator::product(k, TimeGrid{1.0, 12});
  const Verdict dv = check_dual_change(dk, sk, full_condition(4));
  CHECK(dv.passed);
  CHECK(dv.lhs == 2);
}

TEST_CASE("splitting") {
  const BoundaryOperator a0 = diag_pts({1, -1});
  const BoundaryOperator a1 = diag_pts({1, 1});
  const TimeGrid g{1.0, 24};
  SpectralEngine engine;
  const auto s0 = engine.decompose(a0);
  const auto s1 = engine.decompose(a1);
  const BoundaryCondition b0 = aps_condition(*s0, 0.0);
  const BoundaryCondition b1 = aps_condition(*s1, 0.0, Side::End);

  const CalliasOperator d = CalliasOperator::interpolating(a0, a1, g);
  for (Index cut : {3, 6, 20}) {
    const Verdict v = check_splitting(d, b0, b1, cut, engine);
    CHECK(v.passed);
    CHECK(v.lhs == 1);
  }
  // after the crossing the left piece carries the index
  const Verdict late = check_splitting(d, b0, b1, 20, engine);
  CHECK(late.reports[1].index == 1);
  CHECK(late.reports[2].index == 0);
  CHECK(late.reports[3].index == 1);
  CHECK_THROWS_AS(check_splitting(d, b0, b1, 12, engine), PreconditionError);

  const CalliasOperator p = CalliasOperator::product(a0, g);
  const Verdict pv = check_splitting(p, b0, aps_condition(*s0, 0.0, Side::End), 7, engine);
  CHECK(pv.passed);
  CHECK(pv.lhs == 0);
  CHECK(pv.rhs == 0);
}

TEST_CASE("vanishing and doubling") {
  SpectralEngine engine;
  const BoundaryOperator m = build_boundary_operator(BoundarySlice::points(2), {3, 3}, 0.0);
  const CalliasOperator d = CalliasOperator::product(m, TimeGrid{1.0, 12});
  const Verdict v = check_vanishing(d, 1.0, engine);
  CHECK(v.passed);
  CHECK(v.lhs == 0);
  CHECK(check_double(d, d).passed);

  const BoundaryOperator a0 = diag_pts({1, -1});
  const BoundaryOperator a1 = diag_pts({1, 1});
  const CalliasOperator c = CalliasOperator::interpolating(a0, a1, TimeGrid{1.0, 12});
  CHECK_THROWS_AS(check_vanishing(c, 0.5, engine), PreconditionError);
  CHECK(check_double(c, c).passed);

  const BoundaryOperator k = diag_pts({1, 0});
  CHECK_THROWS_AS(check_vanishing(CalliasOperator::product(k, TimeGrid{1.0, 12}), 0.5, engine),
                  PreconditionError);
}

TEST_CASE("reduction and independence") {
  SpectralEngine engine;
  const BoundaryOperator a0 = diag_pts({1, -1});
  const BoundaryOperator a1 = diag_pts({1, 1});
  const TimeGrid g{1.0, 24};
  const CalliasOperator early = CalliasOperator::interpolating(a0, a1, g, Margins{0.125, 0.5});
  const Verdict r = check_reduction(early, 16, 0.5, engine);
  CHECK(r.passed);
  CHECK(r.lhs == 1);
  CHECK_THROWS_AS(check_reduction(early, 6, 0.5, engine), PreconditionError);

  const CalliasOperator mid = CalliasOperator::interpolating(a0, a1, g);
  const Verdict i = check_independence(mid, early, engine);
  CHECK(i.passed);
  CHECK(i.lhs == 1);
  CHECK_THROWS_AS(check_independence(mid, CalliasOperator::product(a0, g), engine), PreconditionError);
}

TEST_CASE("transfer route agrees with the dense route") {
  const BoundarySlice s = BoundarySlice::plane(2.0, 0.5, 2);
  const auto f = sample_sites(s, [](double x, double y) { return (x * x + y * y) / 2; });
  SpectralEngine engine;
  for (auto [m0, m1] : {std::pair{-1.0, 1.0}, std::pair{0.5, -0.75}, std::pair{0.3, 0.3}}) {
    const BoundaryOperator a0 = build_boundary_operator(s, f, m0);
    const BoundaryOperator a1 = build_boundary_operator(s, f, m1);
    const CalliasOperator d = CalliasOperator::interpolating(a0, a1, TimeGrid{1.0, 12});
    const ConstrainedOperator c = ConstrainedOperator::assemble(
        d, aps_condition(*engine.decompose(a0), 0.0), aps_condition(*engine.decompose(a1), 0.0, Side::End));
    IndexPolicy dense, transfer;
    dense.method = IndexPolicy::Method::Dense;
    transfer.method = IndexPolicy::Method::Transfer;
    transfer.engine = &engine;
    const IndexReport rd = compute_index(c, dense);
    const IndexReport rt = compute_index(c, transfer);
    CHECK(rd.index == rt.index);
    CHECK(rd.dim_ker == rt.dim_ker);
    CHECK(rt.consistent);
    CHECK(rt.method != rd.method);
  }
}
