#include "callias/bvp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "bvp_internal.hpp"
#include "callias/errors.hpp"

namespace callias {

double BoundaryCondition::residual(const Vec& u) const {
  if (u.size() != ambient_dim()) throw InvalidArgument("condition residual: dimension mismatch");
  return (u - basis * (basis.adjoint() * u)).norm();
}

std::string BoundaryCondition::describe() const {
  std::ostringstream os;
  switch (tag) {
    case ConditionTag::APS: os << "APS(" << cut << ")"; break;
    case ConditionTag::DualAPS: os << "DualAPS(" << cut << ")"; break;
    case ConditionTag::SpectralSectionKernel: os << "SpectralSectionKernel"; break;
    case ConditionTag::Transmission: os << "Transmission"; break;
    case ConditionTag::Custom: os << "Custom"; break;
  }
  if (tag == ConditionTag::APS || tag == ConditionTag::DualAPS) os << (side == Side::Start ? "@start" : "@end");
  os << " dim " << dim() << "/" << ambient_dim();
  return os.str();
}

namespace {

BoundaryCondition spectral_condition(const SpectralData& s, double a, Side side, bool closed,
                                     ConditionTag tag) {
  if (!std::isfinite(a)) throw InvalidArgument("cut point must be finite");
  // At the far end the condition is a spectral subspace of -A.
  const SpectralInterval I = side == Side::Start ? SpectralInterval::below(a, closed)
                                                 : SpectralInterval::above(-a, closed);
  BoundaryCondition b;
  b.slice_dim = s.dim;
  b.basis = spectral_projection(s, I);
  if (s.complete()) {
    const std::vector<Index> in = s.members(I);
    std::vector<char> taken(static_cast<std::size_t>(s.size()), 0);
    for (Index j : in) taken[static_cast<std::size_t>(j)] = 1;
    b.complement.resize(s.dim, s.size() - static_cast<Index>(in.size()));
    Index c = 0;
    for (Index j = 0; j < s.size(); ++j)
      if (!taken[static_cast<std::size_t>(j)]) b.complement.col(c++) = s.vectors.col(j);
    b.has_complement = true;
  }
  b.eigen_of = s.op_hash;
  b.tag = tag;
  b.cut = a;
  b.side = side;
  b.source = s.label;
  return b;
}

}  // namespace

BoundaryCondition aps_condition(const SpectralData& s, double a, Side side) {
  return spectral_condition(s, a, side, false, ConditionTag::APS);
}

BoundaryCondition dual_aps_condition(const SpectralData& s, double a, Side side) {
  return spectral_condition(s, a, side, true, ConditionTag::DualAPS);
}

Mat BoundaryCondition::complement_basis() const {
  return has_complement ? complement : orthogonal_complement(basis);
}

BoundaryCondition zero_condition(Index n) {
  BoundaryCondition b;
  b.slice_dim = n;
  b.basis = Mat(n, 0);
  return b;
}

BoundaryCondition full_condition(Index n) {
  BoundaryCondition b;
  b.slice_dim = n;
  b.basis = Mat::Identity(n, n);
  return b;
}

BoundaryCondition custom_condition(const Mat& spanning, double tol) {
  BoundaryCondition b;
  b.slice_dim = spanning.rows();
  b.basis = column_space(spanning, tol);
  return b;
}

BoundaryCondition adjoint_condition(const BoundaryCondition& b, const CliffordData& cl) {
  return adjoint_condition(b, cl, std::vector<int>(static_cast<std::size_t>(b.copies), 1));
}

BoundaryCondition adjoint_condition(const BoundaryCondition& b, const CliffordData& cl,
                                    const std::vector<int>& signs) {
  if (static_cast<Index>(signs.size()) != b.copies)
    throw InvalidArgument("adjoint condition: one normal sign per slice copy expected");
  if (b.slice_dim % cl.rank != 0) throw InvalidArgument("adjoint condition: fibre rank mismatch");
  const SpMat c = cl.lift(cl.cdt, b.slice_dim / cl.rank);
  auto apply = [&](const Mat& m) {
    Mat out(m.rows(), m.cols());
    for (Index i = 0; i < b.copies; ++i)
      out.middleRows(i * b.slice_dim, b.slice_dim) =
          static_cast<double>(signs[static_cast<std::size_t>(i)]) * (c * m.middleRows(i * b.slice_dim, b.slice_dim));
    return out;
  };
  BoundaryCondition out;
  out.slice_dim = b.slice_dim;
  out.copies = b.copies;
  if (b.has_complement) {
    // The normal is unitary, so (N B)^perp = N (B^perp).
    out.basis = apply(b.complement);
    out.complement = apply(b.basis);
    out.has_complement = true;
  } else {
    out.basis = orthogonal_complement(apply(b.basis));
  }
  out.tag = ConditionTag::Custom;
  out.source = b.source.empty() ? "" : b.source + "^ad";
  return out;
}

double aps_adjoint_mismatch(const BoundaryCondition& b, const CliffordData& cl,
                            const SpectralData& sharp) {
  if (b.tag != ConditionTag::APS) throw InvalidArgument("aps_adjoint_mismatch needs an APS condition");
  BoundaryCondition ad = adjoint_condition(b, cl);
  const SpectralData& target = b.side == Side::Start ? sharp : sharp.negated();
  Mat expected = spectral_projection(target, SpectralInterval::below(-b.cut, true));
  return subspace_distance(ad.basis, expected);
}

BoundaryCondition transmission_condition(const BoundarySlice& n1, const BoundarySlice& n2) {
  if (n1 != n2) throw InvalidArgument("transmission condition: the glued slices differ");
  const Index n = n1.dim();
  BoundaryCondition b;
  b.slice_dim = n;
  b.copies = 2;
  b.basis.resize(2 * n, n);
  b.basis.topRows(n) = Mat::Identity(n, n) / std::sqrt(2.0);
  b.basis.bottomRows(n) = Mat::Identity(n, n) / std::sqrt(2.0);
  b.tag = ConditionTag::Transmission;
  return b;
}

namespace {

Mat block_diag(const std::vector<const Mat*>& blocks) {
  Index r = 0, c = 0;
  for (const Mat* b : blocks) {
    r += b->rows();
    c += b->cols();
  }
  Mat m = Mat::Zero(r, c);
  r = c = 0;
  for (const Mat* b : blocks) {
    m.block(r, c, b->rows(), b->cols()) = *b;
    r += b->rows();
    c += b->cols();
  }
  return m;
}

void check_condition(const BoundaryCondition& b, Index n, const char* what) {
  if (b.copies != 1 || b.slice_dim != n || b.basis.rows() != n)
    throw InvalidArgument(std::string("assemble_bvp: ") + what + " does not live on the cylinder's slice");
}

}  // namespace

ConstrainedOperator ConstrainedOperator::assemble(const CalliasOperator& d, const BoundaryCondition& b0,
                                                  const BoundaryCondition& b1) {
  const Index n = d.fiber_dim();
  check_condition(b0, n, "start condition");
  check_condition(b1, n, "end condition");
  ConstrainedOperator c;
  c.pieces_ = {d};
  c.b0_ = b0;
  c.b1_ = b1;
  c.joint_.slice_dim = n;
  c.joint_.copies = 2;
  c.joint_.basis = block_diag({&b0.basis, &b1.basis});
  c.separated_ = true;
  return c;
}

ConstrainedOperator ConstrainedOperator::assemble_joint(std::vector<CalliasOperator> pieces,
                                                        const BoundaryCondition& joint) {
  if (pieces.empty()) throw InvalidArgument("assemble_joint: no cylinders");
  const Index n = pieces.front().fiber_dim();
  for (const auto& p : pieces)
    if (p.slice() != pieces.front().slice()) throw InvalidArgument("assemble_joint: cylinders on different slices");
  if (joint.slice_dim != n || joint.copies != 2 * static_cast<Index>(pieces.size()))
    throw InvalidArgument("assemble_joint: joint condition must cover both ends of every cylinder");
  ConstrainedOperator c;
  c.pieces_ = std::move(pieces);
  c.joint_ = joint;
  return c;
}

Index ConstrainedOperator::dim_domain() const {
  Index v = joint_.dim();
  for (const auto& p : pieces_) v += p.fiber_dim() * (p.intervals() - 1);
  return v;
}

Index ConstrainedOperator::dim_codomain() const {
  Index w = 0;
  for (const auto& p : pieces_) w += p.fiber_dim() * p.intervals();
  return w;
}

namespace {

struct StepBlocks {
  Mat plus, minus;  // c(I/h + A/2) and c(-I/h + A/2)
};

StepBlocks step_blocks(const BoundaryOperator& a, const CliffordData& cl, double h) {
  const Index n = a.dim();
  const SpMat c = cl.lift(cl.cdt, n / cl.rank);
  Mat ca = Mat(c * a.matrix()) * 0.5;
  Mat cd = Mat(c) / h;
  return {ca + cd, ca - cd};
}

}  // namespace

Mat ConstrainedOperator::action() const {
  const Index V = dim_domain(), W = dim_codomain();
  Mat x = Mat::Zero(W, V);
  const Index n = pieces_.front().fiber_dim();
  Index interior = 0;
  for (const auto& p : pieces_) interior += n * (p.intervals() - 1);
  const Index jcol = interior;
  const Index d = joint_.dim();
  Index row = 0, off = 0;
  for (std::size_t pi = 0; pi < pieces_.size(); ++pi) {
    const CalliasOperator& p = pieces_[pi];
    const Index K = p.intervals();
    const double h = p.grid().step();
    const Index e0 = 2 * static_cast<Index>(pi), e1 = e0 + 1;
    auto place = [&](Index r, Index node, const Mat& blk) {
      if (node == 0)
        x.block(r, jcol, n, d) += blk * joint_.basis.middleRows(e0 * n, n);
      else if (node == K)
        x.block(r, jcol, n, d) += blk * joint_.basis.middleRows(e1 * n, n);
      else
        x.block(r, off + (node - 1) * n, n, n) += blk;
    };
    const BoundaryOperator* last = nullptr;
    StepBlocks sb;
    for (Index k = 0; k < K; ++k) {
      if (&p.member(k) != last) {
        last = &p.member(k);
        sb = step_blocks(*last, p.clifford(), h);
      }
      place(row, k, sb.minus);
      place(row, k + 1, sb.plus);
      row += n;
    }
    off += n * (K - 1);
  }
  return x;
}

Mat ConstrainedOperator::domain_basis() const {
  const Index n = pieces_.front().fiber_dim();
  Index rows = 0, interior = 0;
  for (const auto& p : pieces_) {
    rows += n * (p.intervals() + 1);
    interior += n * (p.intervals() - 1);
  }
  Mat b = Mat::Zero(rows, dim_domain());
  const Index d = joint_.dim();
  Index r = 0, off = 0;
  for (std::size_t pi = 0; pi < pieces_.size(); ++pi) {
    const Index K = pieces_[pi].intervals();
    const Index e0 = 2 * static_cast<Index>(pi);
    b.block(r, interior, n, d) = joint_.basis.middleRows(e0 * n, n);
    for (Index k = 1; k < K; ++k) b.block(r + k * n, off + (k - 1) * n, n, n) = Mat::Identity(n, n);
    b.block(r + K * n, interior, n, d) = joint_.basis.middleRows((e0 + 1) * n, n);
    r += n * (K + 1);
    off += n * (K - 1);
  }
  return b;
}

namespace detail {

IndexReport rank_report(const RVec& sv, Index V, Index W, double tol) {
  IndexReport r;
  r.dim_domain = V;
  r.dim_codomain = W;
  r.rank_tol = tol;
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  r.dim_ker = V - rank;
  r.dim_coker = W - rank;
  r.index = r.dim_ker - r.dim_coker;
  r.counting_index = V - W;
  r.consistent = r.index == r.counting_index;
  const double inf = std::numeric_limits<double>::infinity();
  if (rank > 0 && rank < sv.size())
    r.sv_gap = sv(rank) > 0 ? sv(rank - 1) / sv(rank) : inf;
  else if (rank > 0)
    r.sv_gap = tol > 0 ? sv(rank - 1) / tol : inf;
  else if (sv.size() > 0 && sv(0) > 0)
    r.sv_gap = tol / sv(0);
  else
    r.sv_gap = inf;
  r.flagged = r.sv_gap < 10.0;
  return r;
}

}  // namespace detail

namespace {

IndexReport dense_index(const Mat& x, Index V, Index W, const IndexPolicy& policy) {
  RVec sv = singular_values(x);
  const double smax = sv.size() ? sv(0) : 0.0;
  const double tol = policy.rank_tol ? *policy.rank_tol
                                     : static_cast<double>(std::max(V, W)) *
                                           std::numeric_limits<double>::epsilon() * smax;
  IndexReport r = detail::rank_report(sv, V, W, tol);
  r.method = "svd_dense";
  return r;
}

}  // namespace

IndexReport compute_index(const ConstrainedOperator& c, const IndexPolicy& policy) {
  bool transfer = policy.method == IndexPolicy::Method::Transfer;
  if (policy.method == IndexPolicy::Method::Auto)
    transfer = c.separated() && c.dim_domain() > policy.dense_limit;
  if (transfer) {
    if (!c.separated()) throw InvalidArgument("transfer route needs a single cylinder with separated conditions");
    return detail::transfer_index(c, policy);
  }
  return dense_index(c.action(), c.dim_domain(), c.dim_codomain(), policy);
}

IndexReport compute_index(const PeriodicOperator& p, const IndexPolicy& policy) {
  const Index n = p.fiber_dim();
  const Index K = static_cast<Index>(p.members.size());
  Mat x = Mat::Zero(n * K, n * K);
  const BoundaryOperator* last = nullptr;
  StepBlocks sb;
  for (Index k = 0; k < K; ++k) {
    if (p.members[static_cast<std::size_t>(k)].get() != last) {
      last = p.members[static_cast<std::size_t>(k)].get();
      sb = step_blocks(*last, p.clifford(), p.step);
    }
    x.block(k * n, k * n, n, n) += sb.minus;
    x.block(k * n, ((k + 1) % K) * n, n, n) += sb.plus;
  }
  IndexReport r = dense_index(x, n * K, n * K, policy);
  r.method = "svd_dense_periodic";
  return r;
}

ConstrainedOperator adjoint_bvp(const ConstrainedOperator& c) {
  const CliffordData& cl = c.pieces().front().clifford();
  if (c.separated())
    return ConstrainedOperator::assemble(c.pieces().front().adjoint(),
                                         adjoint_condition(c.start_condition(), cl),
                                         adjoint_condition(c.end_condition(), cl));
  std::vector<CalliasOperator> adj;
  std::vector<int> signs;
  for (const auto& p : c.pieces()) {
    adj.push_back(p.adjoint());
    signs.push_back(1);
    signs.push_back(-1);
  }
  return ConstrainedOperator::assemble_joint(std::move(adj), adjoint_condition(c.joint_condition(), cl, signs));
}

Index relative_index(const Mat& x1, const Mat& x2, double tol) {
  if (x1.rows() != x2.rows()) throw InvalidArgument("relative_index: subspaces of different spaces");
  const Index d1 = x1.cols(), d2 = x2.cols();
  Mat g = x2.adjoint() * x1;  // projection X1 -> X2 in orthonormal bases
  RVec sv = singular_values(g);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  const Index ind = (d1 - rank) - (d2 - rank);
  if (ind != d1 - d2) throw NumericalError("relative_index: projection index disagrees with dimensions");
  return ind;
}

std::vector<Vec> apply_cylinder(const CalliasOperator& d, const std::vector<Vec>& u) {
  const Index K = d.intervals();
  if (static_cast<Index>(u.size()) != K + 1) throw InvalidArgument("apply_cylinder: wrong node count");
  const double h = d.grid().step();
  const CliffordData& cl = d.clifford();
  const SpMat c = cl.lift(cl.cdt, d.fiber_dim() / cl.rank);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) {
    const Vec& a = u[static_cast<std::size_t>(k)];
    const Vec& b = u[static_cast<std::size_t>(k + 1)];
    Vec r = (b - a) / h + d.member(k).matrix() * (0.5 * (a + b));
    out.push_back(c * r);
  }
  return out;
}

GreenResidual green_residual(const CalliasOperator& d, const std::vector<Vec>& u, const std::vector<Vec>& v) {
  const Index K = d.intervals();
  if (static_cast<Index>(v.size()) != K + 1) throw InvalidArgument("green_residual: wrong node count");
  const double h = d.grid().step();
  const CalliasOperator adj = d.adjoint();
  std::vector<Vec> du = apply_cylinder(d, u);
  std::vector<Vec> dv = apply_cylinder(adj, v);
  const CliffordData& cl = d.clifford();
  const SpMat c = cl.lift(cl.cdt, d.fiber_dim() / cl.rank);
  GreenResidual g;
  cplx sum(0, 0);
  for (Index k = 0; k < K; ++k) {
    const std::size_t i = static_cast<std::size_t>(k);
    Vec vbar = 0.5 * (v[i] + v[i + 1]);
    Vec ubar = 0.5 * (u[i] + u[i + 1]);
    const cplx t1 = h * du[i].dot(vbar);
    const cplx t2 = h * ubar.dot(dv[i]);
    sum += t1 - t2;
    g.term_scale += std::abs(t1) + std::abs(t2);
  }
  const cplx b0 = Vec(c * u.front()).dot(v.front());
  const cplx bK = Vec(c * u.back()).dot(v.back());
  sum += b0 - bK;
  g.term_scale += std::abs(b0) + std::abs(bK);
  g.residual = std::abs(sum);
  double nu = 0, nv = 0;
  for (Index k = 0; k <= K; ++k) {
    const double w = (k == 0 || k == K) ? 0.5 * h : h;
    nu += w * u[static_cast<std::size_t>(k)].squaredNorm();
    nv += w * v[static_cast<std::size_t>(k)].squaredNorm();
  }
  g.norm_u = std::sqrt(nu);
  g.norm_v = std::sqrt(nv);
  return g;
}

namespace {

void require_start(const CalliasOperator& d, const SpectralData& s) {
  if (s.op_hash != d.start_operator().content_hash())
    throw InvalidArgument("spectral data does not belong to the cylinder's start operator");
}

IndexReport index_of(const CalliasOperator& d, const BoundaryCondition& b0, const BoundaryCondition& b1,
                     const IndexPolicy& policy) {
  return compute_index(ConstrainedOperator::assemble(d, b0, b1), policy);
}

Verdict make_verdict(std::string name, long long lhs, long long rhs, std::string detail,
                     std::vector<IndexReport> reports) {
  Verdict v;
  v.name = std::move(name);
  v.lhs = lhs;
  v.rhs = rhs;
  v.passed = lhs == rhs;
  for (const auto& r : reports) v.passed = v.passed && r.consistent;
  v.detail = std::move(detail);
  v.reports = std::move(reports);
  return v;
}

}  // namespace

Verdict check_condition_change(const CalliasOperator& d, const SpectralData& start, double a, double b,
                               const BoundaryCondition& end, const IndexPolicy& policy) {
  require_start(d, start);
  if (!(a < b)) throw InvalidArgument("condition change needs a < b");
  IndexReport ra = index_of(d, aps_condition(start, a), end, policy);
  IndexReport rb = index_of(d, aps_condition(start, b), end, policy);
  const Index count = start.count(SpectralInterval::between(a, true, b, false));
  std::ostringstream os;
  os << "ind B(" << b << ") - ind B(" << a << ") vs #spec in [a, b)";
  return make_verdict("condition_change", rb.index - ra.index, count, os.str(), {ra, rb});
}

Verdict check_dual_change(const CalliasOperator& d, const SpectralData& start, const BoundaryCondition& end,
                          const IndexPolicy& policy) {
  require_start(d, start);
  IndexReport rp = index_of(d, aps_condition(start, 0.0), end, policy);
  IndexReport rd = index_of(d, dual_aps_condition(start, 0.0), end, policy);
  return make_verdict("dual_change", rd.index - rp.index, start.kernel_dim(),
                      "ind dual APS - ind APS vs dim ker A", {rp, rd});
}

Verdict check_splitting(const CalliasOperator& d, const BoundaryCondition& b0, const BoundaryCondition& b1,
                        Index cut, SpectralEngine& engine, const IndexPolicy& policy) {
  const Index K = d.intervals();
  if (cut < 1 || cut >= K) throw InvalidArgument("splitting: cut must be an interior node");
  if (!d.product_at_node(cut)) throw PreconditionError("splitting: cut lies inside a non-product region");
  IndexReport whole = index_of(d, b0, b1, policy);
  auto s = engine.decompose(d.member(cut));
  const CalliasOperator left = d.sub_cylinder(0, cut);
  const CalliasOperator right = d.sub_cylinder(cut, K);
  IndexReport rl = index_of(left, b0, dual_aps_condition(*s, 0.0, Side::End), policy);
  IndexReport rr = index_of(right, aps_condition(*s, 0.0, Side::Start), b1, policy);

  // Transmission route: both copies of the cut slice kept, glued by {(u, u)}.
  const Index n = d.fiber_dim();
  BoundaryCondition t = transmission_condition(d.slice(), d.slice());
  BoundaryCondition joint;
  joint.slice_dim = n;
  joint.copies = 4;
  joint.tag = ConditionTag::Custom;
  joint.basis = block_diag({&b0.basis, &t.basis, &b1.basis});
  IndexPolicy dense = policy;
  dense.method = IndexPolicy::Method::Dense;
  IndexReport rt = compute_index(ConstrainedOperator::assemble_joint({left, right}, joint), dense);

  std::ostringstream os;
  os << "cut at node " << cut << ": whole " << whole.index << ", pieces " << rl.index << " + " << rr.index
     << ", transmission " << rt.index;
  Verdict v = make_verdict("splitting", whole.index, rl.index + rr.index, os.str(), {whole, rl, rr, rt});
  v.passed = v.passed && rt.index == whole.index;
  return v;
}

namespace {

void require_invertible(const SpectralData& s, const char* which) {
  if (s.kernel_dim() != 0)
    throw PreconditionError(std::string("boundary operator at the ") + which + " end is not invertible");
}

}  // namespace

Verdict check_vanishing(const CalliasOperator& d, double level, SpectralEngine& engine,
                        const IndexPolicy& policy) {
  if (!(level > 0)) throw InvalidArgument("vanishing: level must be positive");
  EssentialSupportReport sup = audit_strong_callias(d, level);
  if (!sup.empty) {
    std::ostringstream os;
    os << "vanishing: essential support at level " << level << " is not empty (" << sup.violating.size()
       << " sites)";
    throw PreconditionError(os.str());
  }
  auto s0 = engine.decompose(d.start_operator());
  auto s1 = engine.decompose(d.end_operator());
  require_invertible(*s0, "start");
  require_invertible(*s1, "far");
  IndexReport r = index_of(d, aps_condition(*s0, 0.0), aps_condition(*s1, 0.0, Side::End), policy);
  return make_verdict("vanishing", r.index, 0, "index with empty essential support", {r});
}

Verdict check_double(const CalliasOperator& d1, const CalliasOperator& d2, const IndexPolicy& policy) {
  IndexReport r = compute_index(glue_double(d1, d2), policy);
  std::ostringstream os;
  os << "doubled operator: dim ker " << r.dim_ker << ", dim coker " << r.dim_coker;
  return make_verdict("double", r.index, 0, os.str(), {r});
}

Verdict check_reduction(const CalliasOperator& d, Index t, double level, SpectralEngine& engine,
                        const IndexPolicy& policy) {
  const Index K = d.intervals();
  if (t < 1 || t >= K) throw InvalidArgument("reduction: truncation must be an interior node");
  for (Index k = t; k < K; ++k)
    if (d.member_ptr(k) != d.member_ptr(t - 1))
      throw PreconditionError("reduction: family is not product beyond the truncation");
  EssentialSupportReport sup = audit_strong_callias(d, level, t - 1, K);
  if (!sup.empty) throw PreconditionError("reduction: truncation cuts through the essential support");
  auto s0 = engine.decompose(d.start_operator());
  auto s1 = engine.decompose(d.end_operator());
  const BoundaryCondition b0 = aps_condition(*s0, 0.0);
  const BoundaryCondition b1 = aps_condition(*s1, 0.0, Side::End);
  IndexReport full = index_of(d, b0, b1, policy);
  IndexReport cut = index_of(d.sub_cylinder(0, t), b0, b1, policy);
  std::ostringstream os;
  os << "truncated at node " << t << " of " << K;
  return make_verdict("reduction", full.index, cut.index, os.str(), {full, cut});
}

Verdict check_independence(const CalliasOperator& d1, const CalliasOperator& d2, SpectralEngine& engine,
                           const IndexPolicy& policy) {
  if (d1.slice() != d2.slice() || !d1.start_operator().same_as(d2.start_operator()) ||
      !d1.end_operator().same_as(d2.end_operator()))
    throw PreconditionError("independence: cylinders are not compatible at their ends");
  auto s0 = engine.decompose(d1.start_operator());
  auto s1 = engine.decompose(d1.end_operator());
  const BoundaryCondition b0 = aps_condition(*s0, 0.0);
  const BoundaryCondition b1 = aps_condition(*s1, 0.0, Side::End);
  IndexReport r1 = index_of(d1, b0, b1, policy);
  IndexReport r2 = index_of(d2, b0, b1, policy);
  return make_verdict("independence", r1.index, r2.index, "two compatible interiors", {r1, r2});
}

Verdict check_adjoint_duality(const ConstrainedOperator& c, const IndexPolicy& policy) {
  IndexReport r = compute_index(c, policy);
  IndexReport ra = compute_index(adjoint_bvp(c), policy);
  return make_verdict("adjoint_duality", ra.index, -r.index, "ind (D*)_{B^ad} vs -ind D_B", {r, ra});
}

}  // namespace callias
