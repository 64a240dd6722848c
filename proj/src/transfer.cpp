#include <algorithm>
#include <cmath>

#include <Eigen/SparseLU>

#include "bvp_internal.hpp"
#include "callias/errors.hpp"

namespace callias::detail {

namespace {

constexpr double kResonance = 1e-12;

double row_sum_bound(const SpMat& a) {
  RVec r = RVec::Zero(a.rows());
  for (Index j = 0; j < a.outerSize(); ++j)
    for (SpMat::InnerIterator it(a, j); it; ++it) r(it.row()) += std::abs(it.value());
  return r.size() ? r.maxCoeff() : 0.0;
}

std::shared_ptr<const SpectralData> complete_data(const BoundaryOperator& a, SpectralEngine* engine) {
  if (!engine) return nullptr;
  auto s = engine->peek(a);
  if (s && s->complete() && s->op_hash == a.content_hash()) return s;
  return nullptr;
}

// Cayley factor of one eigenvalue: (1/h - s l/2) / (1/h + s l/2).
RVec cayley_factors(const RVec& l, double h, int sign) {
  RVec f(l.size());
  for (Index i = 0; i < l.size(); ++i) {
    const double num = 1.0 / h - sign * l(i) / 2, den = 1.0 / h + sign * l(i) / 2;
    if (std::min(std::abs(num), std::abs(den)) * h < kResonance)
      throw NumericalError("transfer route: step resonates with the spectrum; refine the time grid");
    f(i) = num / den;
  }
  return f;
}

// A run of identical members in eigen-coordinates: exact row scalings, with
// re-orthonormalisation once the accumulated spread exceeds 1e8.
Mat propagate_eigen(const SpectralData& e, const Mat& s, Index steps, double h, int sign) {
  const RVec f = cayley_factors(e.values, h, sign);
  const RVec af = f.cwiseAbs();
  const double spread = af.size() ? af.maxCoeff() / af.minCoeff() : 1.0;
  Mat y = e.vectors.adjoint() * s;
  double g = 1;
  for (Index r = 0; r < steps; ++r) {
    y = f.asDiagonal() * y;
    g *= spread;
    if (g > 1e8 || r + 1 == steps) {
      y = orthonormalize(y);
      g = 1;
    }
  }
  return e.vectors * y;
}

// (I/h + s A/2)^{-1}(I/h - s A/2) by sparse LU, one step at a time.
Mat propagate_lu(const BoundaryOperator& a, Mat s, Index steps, double h, int sign) {
  const SpMat& m = a.matrix();
  SpMat id(a.dim(), a.dim());
  id.setIdentity();
  Eigen::SparseLU<SpMat> lu;
  lu.compute(SpMat(id * cplx(1.0 / h) + m * cplx(sign * 0.5)));
  if (lu.info() != Eigen::Success) throw NumericalError("transfer route: singular step matrix; refine the time grid");
  const double scale = 1.0 / h + row_sum_bound(m) / 2;
  for (Index r = 0; r < steps; ++r) {
    Mat rhs = s / h - (m * s) * (sign * 0.5);
    Mat y = lu.solve(rhs);
    // Reciprocal condition estimate from the observed growth.
    const double growth = y.norm() / std::max(rhs.norm(), 1e-300);
    if (1.0 / (growth * scale) < kResonance)
      throw NumericalError("transfer route: step matrix is numerically singular; refine the time grid");
    s = orthonormalize(y);
  }
  return s;
}

// eigen_of: hash of the operator whose eigenvectors span s. Such a span is
// invariant under that operator's Cayley steps, so those runs are skipped
// until the first different member.
Mat propagate(const CalliasOperator& d, Mat s, int sign, SpectralEngine* engine, std::string eigen_of) {
  const double h = d.grid().step();
  const Index K = d.intervals();
  Index k = 0;
  while (k < K && s.cols() > 0) {
    Index run = 1;
    while (k + run < K && d.member_ptr(k + run) == d.member_ptr(k)) ++run;
    const BoundaryOperator& a = d.member(k);
    if (!eigen_of.empty() && a.content_hash() == eigen_of) {
      k += run;
      continue;
    }
    eigen_of.clear();
    if (auto e = complete_data(a, engine))
      s = propagate_eigen(*e, s, run, h, sign);
    else
      s = propagate_lu(a, std::move(s), run, h, sign);
    k += run;
  }
  return s;
}

RVec sv_or_empty(const Mat& m) {
  if (m.rows() == 0 || m.cols() == 0) return RVec(0);
  return singular_values(m);
}

}  // namespace

IndexReport transfer_index(const ConstrainedOperator& c, const IndexPolicy& policy) {
  const CalliasOperator& d = c.pieces().front();
  const Mat& q0 = c.start_condition().basis;
  const Mat& q1 = c.end_condition().basis;
  const Mat q0c = c.start_condition().complement_basis();
  const Mat q1c = c.end_condition().complement_basis();
  const std::string& inv = c.start_condition().eigen_of;
  const double tol = policy.transfer_rank_tol;

  // Kernel: solutions u_{k+1} = T_k u_k with u_0 in B0 and u_K in B1.
  Mat s = propagate(d, q0, +1, policy.engine, inv);
  IndexReport rk = rank_report(sv_or_empty(q1c.adjoint() * s), q0.cols(), q1c.cols(), tol);
  // Cokernel: y_{k+1} = T_k^{-1} y_k with y_0 in B0^perp and y_K in B1^perp.
  Mat sc = propagate(d, q0c, -1, policy.engine, c.start_condition().has_complement ? inv : std::string());
  IndexReport rc = rank_report(sv_or_empty(q1.adjoint() * sc), q0c.cols(), q1.cols(), tol);

  IndexReport r;
  r.method = "transfer";
  r.dim_domain = c.dim_domain();
  r.dim_codomain = c.dim_codomain();
  r.dim_ker = rk.dim_ker;
  r.dim_coker = rc.dim_ker;
  r.index = r.dim_ker - r.dim_coker;
  r.counting_index = c.counting_index();
  r.consistent = r.index == r.counting_index;
  r.rank_tol = tol;
  r.sv_gap = std::min(rk.sv_gap, rc.sv_gap);
  r.flagged = r.sv_gap < 10.0;
  return r;
}

}  // namespace callias::detail
