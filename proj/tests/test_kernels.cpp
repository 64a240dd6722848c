#include <doctest.h>

#include "callias/errors.hpp"
#include "callias/kernels.hpp"

using namespace callias;

namespace {

BoundaryOperator bowl(double r, double h, double mass) {
  const BoundarySlice s = BoundarySlice::plane(r, h, 2);
  return build_boundary_operator(s, sample_sites(s, [](double x, double y) { return (x * x + y * y) / 2; }),
                                 mass, "bowl");
}

}  // namespace

TEST_CASE("site gaps do not depend on the worker count") {
  const BoundaryOperator a = bowl(3.0, 0.125, 0.2);
  const std::vector<double> ref = kernels::site_gaps_serial(a);
  for (int w : {1, 4}) CHECK(kernels::site_gaps(a, w) == ref);
  // continuum value at a site well inside: f^2 - |grad f| up to O(h)
  const Index x = a.slice().site_at(40, 24);
  auto c = a.slice().coordinates(x);
  const double f = (c[0] * c[0] + c[1] * c[1]) / 2 + 0.2;
  CHECK(ref[static_cast<std::size_t>(x)] == doctest::Approx(f * f - std::hypot(c[0], c[1])).epsilon(0.1));
}

TEST_CASE("batched decompositions and indices") {
  std::vector<BoundaryOperator> ops;
  for (int i = 0; i < 6; ++i) ops.push_back(bowl(1.5, 0.25, -0.5 + 0.2 * i));
  std::vector<const BoundaryOperator*> ptrs;
  for (const auto& o : ops) ptrs.push_back(&o);

  SpectralEngine e0, e1, e4;
  const auto ref = kernels::decompose_batch_serial(e0, ptrs);
  for (auto* e : {&e1, &e4}) {
    const auto got = kernels::decompose_batch(*e, ptrs, e == &e1 ? 1 : 4);
    REQUIRE(got.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(got[i]->values == ref[i]->values);
      CHECK(got[i]->vectors == ref[i]->vectors);
    }
  }

  std::vector<ConstrainedOperator> bvps;
  for (std::size_t i = 0; i + 1 < ops.size(); ++i) {
    const CalliasOperator d = CalliasOperator::interpolating(ops[i], ops[i + 1], TimeGrid{1.0, 6});
    bvps.push_back(ConstrainedOperator::assemble(d, aps_condition(*ref[i], 0.0),
                                                 aps_condition(*ref[i + 1], 0.0, Side::End)));
  }
  std::vector<const ConstrainedOperator*> bp;
  for (const auto& b : bvps) bp.push_back(&b);
  IndexPolicy p;
  p.method = IndexPolicy::Method::Dense;
  const auto r = kernels::index_batch_serial(bp, p);
  const auto r4 = kernels::index_batch(bp, p, 4);
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(r[i].index == r4[i].index);
    CHECK(r[i].rank_tol == r4[i].rank_tol);
    CHECK(r[i].sv_gap == r4[i].sv_gap);
  }
}

TEST_CASE("exceptions from workers reach the caller") {
  const BoundaryOperator a = bowl(1.0, 0.5, 0.3);
  const CalliasOperator d = CalliasOperator::product(a, TimeGrid{1.0, 4});
  BoundaryCondition both = custom_condition(Mat::Identity(2 * a.dim(), a.dim()));
  both.slice_dim = a.dim();
  both.copies = 2;
  const ConstrainedOperator joint = ConstrainedOperator::assemble_joint({d}, both);
  const ConstrainedOperator fine = ConstrainedOperator::assemble(d, full_condition(a.dim()), zero_condition(a.dim()));
  IndexPolicy p;
  p.method = IndexPolicy::Method::Transfer;
  std::vector<const ConstrainedOperator*> bp = {&fine, &joint, &fine};
  CHECK_THROWS_AS(kernels::index_batch(bp, p, 4), InvalidArgument);
  CHECK_THROWS_AS(kernels::index_batch_serial(bp, p), InvalidArgument);
  CHECK_THROWS_AS(kernels::set_default_workers(0), InvalidArgument);
}
