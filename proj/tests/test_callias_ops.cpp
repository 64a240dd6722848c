#include <doctest.h>

#include <cmath>
#include <random>

#include "callias/bvp.hpp"
#include "callias/callias_ops.hpp"
#include "callias/errors.hpp"
#include "callias/spectral.hpp"

using namespace callias;

namespace {

double max_abs(const SpMat& a) {
  double m = 0;
  for (Index k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

BoundaryOperator bowl(double r, double h, double mass = 0.0) {
  const BoundarySlice s = BoundarySlice::plane(r, h, 2);
  return build_boundary_operator(s, sample_sites(s, [](double x, double y) { return (x * x + y * y) / 2; }),
                                 mass, "bowl");
}

BoundaryOperator diag_op(double a, double b) {
  const BoundarySlice s = BoundarySlice::points(1);
  Mat pot = Mat::Zero(2, 2);
  pot(0, 0) = a;
  pot(1, 1) = b;
  return build_points_operator(s, Mat::Zero(2, 2), pot);
}

}  // namespace

TEST_CASE("single-site operator is diag(mu, -mu)") {
  const BoundarySlice s = BoundarySlice::points(1);
  const BoundaryOperator a = build_points_operator(s, Mat::Zero(2, 2), {0.75}, 0.0);
  const Mat m = a.dense();
  CHECK(m(0, 0) == cplx(0.75));
  CHECK(m(1, 1) == cplx(-0.75));
  CHECK(m(0, 1) == cplx(0));
  CHECK(m(1, 0) == cplx(0));
  // mass shifts f
  const BoundaryOperator b = build_boundary_operator(s, {0.5}, 0.25);
  CHECK(b.same_as(a));
}

TEST_CASE("constant potential gives +-c with multiplicity k") {
  const BoundarySlice s = BoundarySlice::points(3);
  const BoundaryOperator a = build_boundary_operator(s, {2.0, 2.0, 2.0}, 0.0);
  const RVec ev = hermitian_eigenvalues(a.dense());
  for (Index i = 0; i < 3; ++i) CHECK(ev[i] == -2.0);
  for (Index i = 3; i < 6; ++i) CHECK(ev[i] == 2.0);
}

TEST_CASE("plane operator structure") {
  const BoundaryOperator a = bowl(2.0, 0.25, 0.3);
  const SpMat& m = a.matrix();
  CHECK(max_abs(SpMat(m - a.dirac_part() - a.potential_part())) == 0.0);
  CHECK(hermitian_defect(m) <= 1e-12 * max_abs(m));
  const SpMat g = a.clifford().grading_on(a.slice());
  CHECK(max_abs(SpMat(a.dirac_part() * g + g * a.dirac_part())) <= 1e-12);
  CHECK(max_abs(SpMat(a.potential_part() * g - g * a.potential_part())) <= 1e-12);

  // For constant f the anticommutator vanishes; otherwise it only couples
  // nearest neighbours, with weights given by differences of f.
  const BoundarySlice s = a.slice();
  const BoundaryOperator c = build_boundary_operator(s, std::vector<double>(s.site_count(), 1.5), 0.0);
  CHECK(max_abs(SpMat(c.dirac_part() * c.potential_part() + c.potential_part() * c.dirac_part())) == 0.0);
  const SpMat k = a.dirac_part() * a.potential_part() + a.potential_part() * a.dirac_part();
  for (Index col = 0; col < k.outerSize(); ++col)
    for (SpMat::InnerIterator it(k, col); it; ++it) {
      auto [x0, y0] = s.grid_position(s.site_of(it.row()));
      auto [x1, y1] = s.grid_position(s.site_of(it.col()));
      CHECK(std::abs(x0 - x1) + std::abs(y0 - y1) <= 1);
    }
}

TEST_CASE("plane dirac is the forward difference pair") {
  const BoundarySlice s = BoundarySlice::plane(1.0, 0.5, 2);
  const Mat d(plane_dirac(s));
  const double h = 0.5;
  // (1,2) block at site x: (u(x+e1) - u(x))/h + i (u(x+e2) - u(x))/h
  const Index x = s.site_at(1, 1);
  CHECK(d(s.dof(x, 0), s.dof(x, 1)) == cplx(-1 / h, -1 / h));
  CHECK(d(s.dof(x, 0), s.dof(s.site_at(2, 1), 1)) == cplx(1 / h, 0));
  CHECK(d(s.dof(x, 0), s.dof(s.site_at(1, 2), 1)) == cplx(0, 1 / h));
  CHECK(d(s.dof(x, 0), s.dof(s.site_at(0, 1), 1)) == cplx(0));
  CHECK((d - d.adjoint()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adjoint boundary operator") {
  const BoundaryOperator a = diag_op(1.25, -1.25);
  const BoundaryOperator s = adjoint_boundary_operator(a);
  CHECK(s.dense()(0, 0) == cplx(-1.25));
  CHECK(s.dense()(1, 1) == cplx(1.25));
  CHECK(adjoint_boundary_operator(s).same_as(a));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const BoundarySlice pl = BoundarySlice::plane(1.5, 0.25, 2);
  std::vector<double> f(static_cast<std::size_t>(pl.site_count()));
  for (auto& v : f) v = 2 * u(rng);
  const BoundaryOperator b = build_boundary_operator(pl, f, 0.1);
  const BoundaryOperator bs = adjoint_boundary_operator(b);
  const RVec e = hermitian_eigenvalues(b.dense());
  const RVec es = hermitian_eigenvalues(bs.dense());
  const Index n = e.size();
  for (Index i = 0; i < n; ++i) CHECK(std::abs(es[i] + e[n - 1 - i]) <= 1e-10);
  CHECK(exactly_equal(adjoint_boundary_operator(bs).matrix(), b.matrix()));
}

TEST_CASE("cylinder margins") {
  const BoundaryOperator a = diag_op(1, -1);
  const BoundaryOperator b = diag_op(1, 1);
  const TimeGrid g{1.0, 12};

  const CalliasOperator p = CalliasOperator::product(a, g);
  for (Index k = 0; k < g.intervals; ++k) CHECK(p.member(k).same_as(a));

  const CalliasOperator d = CalliasOperator::interpolating(a, b, g);
  CHECK(d.left_margin() >= 4);
  CHECK(d.right_margin() >= 4);
  // midpoints in the first third are a, in the last third b
  for (Index k = 0; k < 12; ++k) {
    const double tau = g.midpoint(k);
    if (tau <= 1.0 / 3) CHECK(d.member(k).same_as(a));
    if (tau >= 2.0 / 3) CHECK(d.member(k).same_as(b));
  }
  CHECK(d.start_operator().same_as(a));
  CHECK(d.end_operator().same_as(b));
  CHECK_FALSE(d.product_at_node(6));
  CHECK(d.product_at_node(2));

  CHECK_THROWS_AS(CalliasOperator::interpolating(a, b, TimeGrid{1.0, 4}, Margins{0.1, 0.1}),
                  InvalidArgument);
  // a family that moves inside the declared margins
  CHECK_THROWS_AS(CalliasOperator::build(
                      g, [&](double tau) { return interpolate(a, b, tau); }, Margins{0.25, 0.25}),
                  InvalidArgument);
}

TEST_CASE("audit of a constant mass") {
  const BoundaryOperator a = build_boundary_operator(BoundarySlice::points(4), {3, 3, 3, 3}, 0.0);
  const EssentialSupportReport r10 = audit_strong_callias(a, 10.0);
  CHECK(r10.violating.size() == 4);
  CHECK_FALSE(r10.empty);
  for (double g : r10.site_gap) CHECK(g == 9.0);
  const EssentialSupportReport r4 = audit_strong_callias(a, 4.0);
  CHECK(r4.empty);
  CHECK(audit_strong_callias(a, 0.0).empty);
}

TEST_CASE("bowl audit is confined near the origin") {
  const BoundaryOperator a = bowl(4.0, 0.25);
  const EssentialSupportReport r = audit_strong_callias(a, 1.0);
  CHECK_FALSE(r.empty);
  // Continuum gap r^4/4 - r stays below 1 only for r < 1.8; allow one cell
  // of discretisation slack.
  for (Index x : r.violating) {
    auto c = a.slice().coordinates(x);
    CHECK(std::hypot(c[0], c[1]) < 1.8 + 0.25);
  }
  // and every site with r < 1.5 is flagged
  for (Index x = 0; x < a.slice().site_count(); ++x) {
    auto c = a.slice().coordinates(x);
    if (std::hypot(c[0], c[1]) < 1.5)
      CHECK(std::find(r.violating.begin(), r.violating.end(), x) != r.violating.end());
  }
}

TEST_CASE("compact perturbations") {
  const BoundarySlice s = BoundarySlice::points(2);
  const BoundaryOperator a = build_boundary_operator(s, {1.0, 1.0}, 0.0);
  CHECK(compact_perturbation(a, Patch{}).same_as(a));
  const BoundaryOperator b = compact_perturbation(a, Patch{{1}, {-1.0}});
  const Mat diff = b.dense() - a.dense();
  CHECK(diff.block(0, 0, 2, 4).cwiseAbs().maxCoeff() == 0.0);
  CHECK(diff.block(0, 0, 4, 2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(diff.block(2, 2, 2, 2).cwiseAbs().maxCoeff() > 0.0);
  CHECK(differing_sites(a, b) == std::vector<Index>{1});

  const BoundaryOperator pl = bowl(1.0, 0.25);
  CHECK_THROWS_AS(compact_perturbation(pl, Patch{{0}, {1.0}}), InvalidArgument);
  const Index inner = pl.slice().site_at(3, 3);
  const BoundaryOperator q = compact_perturbation(pl, Patch{{inner}, {5.0}});
  CHECK(differing_sites(pl, q) == std::vector<Index>{inner});

  // cylinder: restrictions to the ends are untouched
  const CalliasOperator d = CalliasOperator::product(a, TimeGrid{1.0, 12});
  const CalliasOperator dp = compact_perturbation(d, Patch{{1}, {-2.0}}, 0.4, 0.6);
  CHECK(dp.start_operator().same_as(a));
  CHECK(dp.end_operator().same_as(a));
  CHECK_FALSE(dp.member(6).same_as(a));
  CHECK_THROWS_AS(compact_perturbation(d, Patch{{1}, {-2.0}}, 0.0, 0.6), InvalidArgument);
}

TEST_CASE("glued double") {
  const BoundaryOperator a = diag_op(1, -1);
  const BoundaryOperator b = diag_op(1, 1);
  const TimeGrid g{1.0, 12};
  const CalliasOperator d = CalliasOperator::interpolating(a, b, g);
  const PeriodicOperator p = glue_double(d, d);
  CHECK(p.members.size() == 24);
  CHECK(compute_index(p).index == 0);

  const CalliasOperator c = CalliasOperator::product(a, g);
  const IndexReport rc = compute_index(glue_double(c, c));
  CHECK(rc.index == 0);
  // a time-independent invertible loop has no kernel: every Fourier mode of
  // d/dt + A is invertible when A is
  CHECK(rc.dim_ker == 0);

  CHECK_THROWS_AS(glue_double(d, c), PreconditionError);
  CHECK_THROWS_AS(glue_double(d, CalliasOperator::interpolating(a, b, TimeGrid{1.0, 18})),
                  PreconditionError);
}
