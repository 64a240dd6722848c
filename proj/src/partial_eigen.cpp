#include "callias/partial_eigen.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "callias/errors.hpp"

namespace callias {

namespace {

SpMat shifted(const SpMat& a, double shift) {
  SpMat id(a.rows(), a.cols());
  id.setIdentity();
  SpMat s = a - cplx(shift, 0) * id;
  s.makeCompressed();
  return s;
}

double row_sum_bound(const SpMat& a) {
  RVec r = RVec::Zero(a.rows());
  for (Index k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) r(it.row()) += std::abs(it.value());
  return r.size() ? r.maxCoeff() : 0.0;
}

}  // namespace

Inertia sparse_inertia(const SpMat& a, double shift) {
  const double scale = std::max(1.0, row_sum_bound(a));
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  ldlt.compute(shifted(a, shift));
  if (ldlt.info() != Eigen::Success) throw NumericalError("sparse inertia: LDL factorisation failed");
  Inertia in;
  const Vec d = ldlt.vectorD();
  for (Index i = 0; i < d.size(); ++i) {
    const double v = d(i).real();
    if (!std::isfinite(v) || std::abs(v) <= 1e-14 * scale)
      throw NumericalError("sparse inertia: tiny pivot, shift too close to the spectrum");
    if (v < 0)
      ++in.negative;
    else
      ++in.positive;
  }
  return in;
}

SpectralData partial_eigendecompose(const BoundaryOperator& op, const SpectralOptions& o) {
  const SpMat& a = op.matrix();
  const Index n = a.rows();
  const double scale = std::max(1.0, row_sum_bound(a));
  Index m = std::min(o.window_count, n);
  const Index p = std::min(n, m + std::max<Index>(10, m / 2));
  if (m < 1) throw InvalidArgument("partial decomposition: window must hold at least one eigenvalue");

  double sigma = o.shift;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  for (int attempt = 0;; ++attempt) {
    lu.compute(shifted(a, sigma));
    if (lu.info() == Eigen::Success) break;
    if (attempt == 3) throw NumericalError("partial decomposition: shifted matrix is singular");
    sigma += 1e-7 * scale * (attempt + 1);
  }

  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> nd;
  Mat x(n, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i) x(i, j) = cplx(nd(rng), nd(rng));
  x = orthonormalize(x);

  RVec theta;
  Mat ritz;
  std::vector<Index> sel;
  double worst = 0;
  int it = 0;
  SpectralData s;
  s.label = op.label();
  s.op_hash = op.content_hash();
  s.dim = n;
  s.zero_tol = o.zero_tol ? *o.zero_tol : 1e-8 * scale;
  for (; it < o.max_iterations; ++it) {
    Mat y = lu.solve(x);
    x = orthonormalize(y);
    Mat ax = a * x;
    Mat h = x.adjoint() * ax;
    h = 0.5 * (h + h.adjoint()).eval();
    HermitianEig e = hermitian_eig(h);
    theta = e.values;
    ritz = x * e.vectors;
    Mat ar = ax * e.vectors;
    x = ritz;
    // The lattice spectra are often symmetric under lambda -> -lambda. When the block cuts
    // such a pair, one Ritz vector stays a fixed mix of both and never converges, so
    // only converged pairs are eligible.
    std::vector<Index> conv;
    worst = 0;
    for (Index j = 0; j < p; ++j) {
      const double r = (ar.col(j) - theta(j) * ritz.col(j)).norm() / std::max(1.0, std::abs(theta(j)));
      if (r <= o.residual_tol) conv.push_back(j);
      else worst = std::max(worst, r);
    }
    std::stable_sort(conv.begin(), conv.end(), [&](Index i, Index j) {
      return std::abs(theta(i) - sigma) < std::abs(theta(j) - sigma);
    });
    if (static_cast<Index>(conv.size()) < m) continue;
    // keep whole clusters at the edge of the window
    Index mm = m;
    while (mm < static_cast<Index>(conv.size()) &&
           std::abs(theta(conv[mm]) - theta(conv[mm - 1])) <= 1e-6 * std::max(1.0, std::abs(theta(conv[mm]))))
      ++mm;
    if (mm == static_cast<Index>(conv.size()) && mm < p) continue;
    sel.assign(conv.begin(), conv.begin() + mm);
    std::sort(sel.begin(), sel.end(), [&](Index i, Index j) { return theta(i) < theta(j); });
    s.values.resize(mm);
    s.vectors.resize(n, mm);
    for (Index k = 0; k < mm; ++k) {
      s.values(k) = theta(sel[static_cast<std::size_t>(k)]);
      s.vectors.col(k) = ritz.col(sel[static_cast<std::size_t>(k)]);
    }
    if (mm == n) return s;

    // Window edges halfway to the nearest unselected Ritz values.
    const double lo = s.values(0), hi = s.values(mm - 1);
    double below_gap = 0.5 * scale, above_gap = 0.5 * scale;
    for (Index j = 0; j < p; ++j) {
      if (std::find(sel.begin(), sel.end(), j) != sel.end()) continue;
      const double t = theta(j);
      if (t < lo) below_gap = std::min(below_gap, 0.5 * (lo - t));
      if (t > hi) above_gap = std::min(above_gap, 0.5 * (t - hi));
    }
    SpectralWindow w;
    w.lower = lo - below_gap;
    w.upper = hi + above_gap;
    const Inertia il = sparse_inertia(a, w.lower);
    const Inertia ih = sparse_inertia(a, w.upper);
    w.below = il.negative;
    w.above = ih.positive;
    // an eigenvalue inside the window is still missing; keep iterating
    if (w.below + w.above + mm != n) {
      worst = std::max(worst, o.residual_tol * 2);
      continue;
    }
    s.window = w;
    return s;
  }
  std::ostringstream os;
  os << "partial decomposition did not converge: worst residual " << worst << " after " << it << " iterations";
  throw NumericalError(os.str());
}

}  // namespace callias
