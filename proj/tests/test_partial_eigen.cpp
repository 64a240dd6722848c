#include <doctest.h>

#include <cmath>

#include "callias/errors.hpp"
#include "callias/partial_eigen.hpp"
#include "callias/spectral.hpp"

using namespace callias;

namespace {

BoundaryOperator bowl(double r, double h, double mass) {
  const BoundarySlice s = BoundarySlice::plane(r, h, 2);
  return build_boundary_operator(s, sample_sites(s, [](double x, double y) { return (x * x + y * y) / 2; }),
                                 mass, "bowl");
}

}  // namespace

TEST_CASE("window matches the dense spectrum") {
  const BoundaryOperator a = bowl(3.0, 0.25, 0.2);
  SpectralOptions o;
  o.window_count = 16;
  o.shift = 0.05;
  const SpectralData w = partial_eigendecompose(a, o);
  const SpectralData d = eigendecompose(a, SpectralOptions{SpectralOptions::Mode::Dense});
  REQUIRE(w.window.has_value());
  CHECK_FALSE(w.complete());
  CHECK(w.size() >= 16);
  CHECK(w.window->below + w.window->above + w.size() == a.dim());

  const Index first = w.window->below;
  for (Index k = 0; k < w.size(); ++k) CHECK(std::abs(w.values(k) - d.values(first + k)) <= 1e-9);
  const SpectralQuality q = spectral_quality(a, w);
  CHECK(q.residual <= 1e-9);
  CHECK(q.orthonormality <= 1e-10);

  // counts agree with the dense data for intervals that the window covers
  for (double cut : {-0.5, 0.0, 0.4})
    CHECK(w.count(SpectralInterval::below(cut, false)) == d.count(SpectralInterval::below(cut, false)));
  CHECK_THROWS_AS(spectral_projection(w, SpectralInterval::below(0.0, false)), PreconditionError);
  CHECK(spectral_projection(w, SpectralInterval::between(-0.5, false, 0.5, false)).cols() ==
        d.count(SpectralInterval::between(-0.5, false, 0.5, false)));
}

TEST_CASE("auto mode switches at the dense limit") {
  const BoundaryOperator a = bowl(2.0, 0.25, 0.0);
  SpectralOptions o;
  o.dense_limit = 100;
  o.window_count = 10;
  CHECK_FALSE(eigendecompose(a, o).complete());
  o.dense_limit = 4000;
  CHECK(eigendecompose(a, o).complete());
}

TEST_CASE("sparse inertia") {
  const BoundaryOperator a = bowl(2.0, 0.25, 0.3);
  const RVec ev = hermitian_eigenvalues(a.dense());
  for (double shift : {-1.3, 0.0, 0.77, 2.5}) {
    const Inertia in = sparse_inertia(a.matrix(), shift);
    Index below = 0;
    for (Index i = 0; i < ev.size(); ++i) below += ev(i) < shift;
    CHECK(in.negative == below);
    CHECK(in.positive == ev.size() - below);
    const Inertia dense = hermitian_inertia(a.dense() - shift * Mat::Identity(a.dim(), a.dim()), 1e-12);
    CHECK(dense.negative == below);
  }
}

TEST_CASE("window on a spectrum symmetric about the shift") {
  // eigenvalues +-1, ..., +-20 with an odd block, so the block always cuts a +- pair
  const Index n = 40;
  Mat pot = Mat::Zero(n, n);
  for (Index i = 0; i < n; ++i) pot(i, i) = (i % 2 ? -1.0 : 1.0) * static_cast<double>(i / 2 + 1);
  const BoundaryOperator a = build_points_operator(BoundarySlice::points(n / 2), Mat::Zero(n, n), pot);
  SpectralOptions o;
  o.window_count = 5;
  o.shift = 0.0;
  const SpectralData w = partial_eigendecompose(a, o);
  REQUIRE(w.window.has_value());
  CHECK(w.window->below + w.window->above + w.size() == n);
  CHECK(w.size() >= 5);
  CHECK(spectral_quality(a, w).residual <= 1e-9);
  for (Index k = 0; k < w.size(); ++k) CHECK(std::abs(std::abs(w.values(k)) - std::round(std::abs(w.values(k)))) <= 1e-9);
}
