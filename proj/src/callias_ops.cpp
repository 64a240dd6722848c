#include "callias/callias_ops.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "callias/errors.hpp"
#include "callias/kernels.hpp"

namespace callias {

namespace {

constexpr double kStructureTol = 1e-12;

double scale_of(const SpMat& a) { return std::max(1.0, frobenius_norm(a)); }

SpMat from_dense(const Mat& m) { return m.sparseView(); }

}  // namespace

BoundaryOperator BoundaryOperator::from_parts(const BoundarySlice& slice, SpMat dirac,
                                              SpMat potential, std::string label,
                                              std::vector<double> samples) {
  const Index n = slice.dim();
  if (dirac.rows() != n || dirac.cols() != n || potential.rows() != n || potential.cols() != n)
    throw InvalidArgument("boundary operator: part dimensions do not match the slice");
  if (!samples.empty() && static_cast<Index>(samples.size()) != slice.site_count())
    throw InvalidArgument("boundary operator: one potential sample per site expected");

  auto cl = std::make_shared<const CliffordData>(make_clifford(slice.fiber_rank()));
  const SpMat g = cl->grading_on(slice);
  const double sd = scale_of(dirac), sp = scale_of(potential);
  if (hermitian_defect(dirac) > kStructureTol * sd)
    throw InvalidArgument("boundary operator: Dirac part is not Hermitian");
  if (hermitian_defect(potential) > kStructureTol * sp)
    throw InvalidArgument("boundary operator: potential is not Hermitian");
  SpMat anti = g * dirac + dirac * g;
  if (frobenius_norm(anti) > kStructureTol * sd)
    throw InvalidArgument("boundary operator: Dirac part does not anticommute with the grading");
  SpMat comm = g * potential - potential * g;
  if (frobenius_norm(comm) > kStructureTol * sp)
    throw InvalidArgument("boundary operator: potential does not commute with the grading");
  for (Index k = 0; k < potential.outerSize(); ++k)
    for (SpMat::InnerIterator it(potential, k); it; ++it)
      if (it.value() != cplx(0, 0) && slice.site_of(it.row()) != slice.site_of(it.col()))
        throw InvalidArgument("boundary operator: potential couples different sites");

  BoundaryOperator op;
  op.slice_ = slice;
  op.clifford_ = std::move(cl);
  op.dirac_ = prune(dirac);
  op.potential_ = prune(potential);
  op.matrix_ = prune(op.dirac_ + op.potential_);
  op.samples_ = std::move(samples);
  op.label_ = std::move(label);
  Hasher h;
  h.update(slice.describe());
  h.update(op.dirac_);
  h.update(op.potential_);
  op.hash_ = h.hex();
  return op;
}

BoundaryOperator BoundaryOperator::relabeled(std::string label) const {
  BoundaryOperator c = *this;
  c.label_ = std::move(label);
  return c;
}

bool BoundaryOperator::same_as(const BoundaryOperator& o) const {
  return hash_ == o.hash_ && exactly_equal(dirac_, o.dirac_) &&
         exactly_equal(potential_, o.potential_);
}

SpMat plane_dirac(const BoundarySlice& s) {
  if (s.kind() != SliceKind::Plane2D) throw InvalidArgument("plane_dirac needs a plane slice");
  const Index k = s.fiber_rank() / 2;
  const double ax = 1.0 / s.hx(), ay = 1.0 / s.hy();
  const cplx I(0, 1);
  std::vector<Triplet> t;
  auto add = [&](Index row, Index col, cplx v) {
    t.emplace_back(row, col, v);
    t.emplace_back(col, row, std::conj(v));
  };
  for (Index iy = 0; iy < s.ny(); ++iy)
    for (Index ix = 0; ix < s.nx(); ++ix) {
      const Index x = s.site_at(ix, iy);
      for (Index j = 0; j < k; ++j) {
        const Index row = s.dof(x, static_cast<int>(j));
        add(row, s.dof(x, static_cast<int>(k + j)), -ax - I * ay);
        if (ix + 1 < s.nx()) add(row, s.dof(s.site_at(ix + 1, iy), static_cast<int>(k + j)), ax);
        if (iy + 1 < s.ny()) add(row, s.dof(s.site_at(ix, iy + 1), static_cast<int>(k + j)), I * ay);
      }
    }
  SpMat d(s.dim(), s.dim());
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

namespace {

SpMat scalar_potential(const BoundarySlice& slice, const CliffordData& cl,
                       const std::vector<double>& v) {
  const Index r = slice.fiber_rank();
  std::vector<Triplet> t;
  for (Index x = 0; x < slice.site_count(); ++x)
    for (Index i = 0; i < r; ++i)
      if (v[static_cast<std::size_t>(x)] != 0.0)
        t.emplace_back(x * r + i, x * r + i, v[static_cast<std::size_t>(x)] * cl.grading(i, i));
  SpMat p(slice.dim(), slice.dim());
  p.setFromTriplets(t.begin(), t.end());
  return p;
}

std::vector<double> shifted(const BoundarySlice& slice, const std::vector<double>& f, double m) {
  if (static_cast<Index>(f.size()) != slice.site_count())
    throw InvalidArgument("potential: expected one value per site");
  std::vector<double> v(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i])) throw InvalidArgument("potential: non-finite value");
    v[i] = f[i] + m;
  }
  return v;
}

}  // namespace

BoundaryOperator build_boundary_operator(const BoundarySlice& slice, const std::vector<double>& f,
                                         double m, std::string label) {
  if (!std::isfinite(m)) throw InvalidArgument("mass must be finite");
  std::vector<double> v = shifted(slice, f, m);
  const CliffordData cl = make_clifford(slice.fiber_rank());
  SpMat dirac = slice.kind() == SliceKind::Plane2D ? plane_dirac(slice) : SpMat(slice.dim(), slice.dim());
  SpMat pot = scalar_potential(slice, cl, v);
  return BoundaryOperator::from_parts(slice, std::move(dirac), std::move(pot), std::move(label), std::move(v));
}

BoundaryOperator build_points_operator(const BoundarySlice& slice, const Mat& dirac,
                                       const std::vector<double>& f, double m, std::string label) {
  if (slice.kind() != SliceKind::Points) throw InvalidArgument("explicit Dirac part needs a points slice");
  std::vector<double> v = shifted(slice, f, m);
  const CliffordData cl = make_clifford(slice.fiber_rank());
  SpMat pot = scalar_potential(slice, cl, v);
  return BoundaryOperator::from_parts(slice, from_dense(dirac), std::move(pot), std::move(label), std::move(v));
}

BoundaryOperator build_points_operator(const BoundarySlice& slice, const Mat& dirac,
                                       const Mat& potential, std::string label) {
  if (slice.kind() != SliceKind::Points) throw InvalidArgument("explicit parts need a points slice");
  return BoundaryOperator::from_parts(slice, from_dense(dirac), from_dense(potential), std::move(label));
}

std::vector<double> sample_sites(const BoundarySlice& slice,
                                 const std::function<double(double, double)>& fn) {
  std::vector<double> v(static_cast<std::size_t>(slice.site_count()));
  for (Index x = 0; x < slice.site_count(); ++x) {
    auto c = slice.coordinates(x);
    v[static_cast<std::size_t>(x)] = fn(c[0], c[1]);
  }
  return v;
}

BoundaryOperator adjoint_boundary_operator(const BoundaryOperator& a) {
  std::vector<double> s = a.samples();
  for (double& x : s) x = -x;
  return BoundaryOperator::from_parts(a.slice(), a.dirac_part(), SpMat(-a.potential_part()),
                                      a.label().empty() ? "" : a.label() + "#", std::move(s));
}

BoundaryOperator negate(const BoundaryOperator& a) {
  std::vector<double> s = a.samples();
  for (double& x : s) x = -x;
  return BoundaryOperator::from_parts(a.slice(), SpMat(-a.dirac_part()), SpMat(-a.potential_part()),
                                      a.label().empty() ? "" : "-" + a.label(), std::move(s));
}

BoundaryOperator interpolate(const BoundaryOperator& a, const BoundaryOperator& b, double s) {
  if (a.slice() != b.slice()) throw InvalidArgument("interpolate: operators live on different slices");
  if (!(s >= 0.0 && s <= 1.0)) throw InvalidArgument("interpolate: parameter outside [0, 1]");
  if (s == 0.0) return a;
  if (s == 1.0) return b;
  std::vector<double> samples;
  if (!a.samples().empty() && !b.samples().empty()) {
    samples.resize(a.samples().size());
    for (std::size_t i = 0; i < samples.size(); ++i)
      samples[i] = (1 - s) * a.samples()[i] + s * b.samples()[i];
  }
  SpMat d = (1 - s) * a.dirac_part() + s * b.dirac_part();
  SpMat p = (1 - s) * a.potential_part() + s * b.potential_part();
  return BoundaryOperator::from_parts(a.slice(), std::move(d), std::move(p), "", std::move(samples));
}

std::vector<Index> differing_sites(const BoundaryOperator& a, const BoundaryOperator& b) {
  if (a.slice() != b.slice()) throw InvalidArgument("differing_sites: different slices");
  SpMat d = prune(SpMat(a.matrix() - b.matrix()));
  std::set<Index> sites;
  for (Index k = 0; k < d.outerSize(); ++k)
    for (SpMat::InnerIterator it(d, k); it; ++it) {
      sites.insert(a.slice().site_of(it.row()));
      sites.insert(a.slice().site_of(it.col()));
    }
  return {sites.begin(), sites.end()};
}

double plateau_step(double tau, double lo, double hi) {
  if (tau <= lo) return 0.0;
  if (tau >= hi) return 1.0;
  const double u = (tau - lo) / (hi - lo);
  auto psi = [](double x) { return x > 0 ? std::exp(-1.0 / x) : 0.0; };
  const double p = psi(u), q = psi(1.0 - u);
  return p / (p + q);
}

namespace {

Index leading_run(const std::vector<CalliasOperator::Member>& m) {
  Index r = 1;
  while (r < static_cast<Index>(m.size()) && m[static_cast<std::size_t>(r)] == m.front()) ++r;
  return r;
}

Index trailing_run(const std::vector<CalliasOperator::Member>& m) {
  Index r = 1;
  const Index n = static_cast<Index>(m.size());
  while (r < n && m[static_cast<std::size_t>(n - 1 - r)] == m.back()) ++r;
  return r;
}

// Share storage between consecutive identical members.
void share_runs(std::vector<CalliasOperator::Member>& m) {
  for (std::size_t k = 1; k < m.size(); ++k)
    if (m[k] != m[k - 1] && m[k]->same_as(*m[k - 1])) m[k] = m[k - 1];
}

}  // namespace

CalliasOperator CalliasOperator::from_members(const TimeGrid& grid, std::vector<Member> members,
                                              Index left_margin, Index right_margin,
                                              std::string label) {
  if (static_cast<Index>(members.size()) != grid.intervals)
    throw InvalidArgument("cylinder: one family member per interval expected");
  for (const auto& m : members) {
    if (!m) throw InvalidArgument("cylinder: null family member");
    if (m->slice() != members.front()->slice())
      throw InvalidArgument("cylinder: family members live on different slices");
  }
  share_runs(members);
  CalliasOperator d;
  d.grid_ = grid;
  d.members_ = std::move(members);
  d.left_margin_ = leading_run(d.members_);
  d.right_margin_ = trailing_run(d.members_);
  if (left_margin < 1 || right_margin < 1)
    throw InvalidArgument("cylinder: margins must contain at least one interval");
  if (d.left_margin_ < left_margin || d.right_margin_ < right_margin)
    throw InvalidArgument("cylinder: family is not constant on the declared margins");
  d.declared_left_ = left_margin;
  d.declared_right_ = right_margin;
  d.label_ = std::move(label);
  return d;
}

CalliasOperator CalliasOperator::build(const TimeGrid& grid, const OperatorFamily& family,
                                       Margins margins, std::string label) {
  if (!(margins.left > 0) || !(margins.right > 0) || margins.left + margins.right > 1.0)
    throw InvalidArgument("cylinder: margins must be positive and fit in [0, 1]");
  const Index K = grid.intervals;
  std::vector<Member> members;
  members.reserve(static_cast<std::size_t>(K));
  Index left = 0, right = 0;
  for (Index k = 0; k < K; ++k) {
    const double tau = (static_cast<double>(k) + 0.5) / static_cast<double>(K);
    members.push_back(std::make_shared<const BoundaryOperator>(family(tau)));
    if (tau <= margins.left) ++left;
    if (tau >= 1.0 - margins.right) ++right;
  }
  if (left < 1 || right < 1)
    throw InvalidArgument("cylinder: margins narrower than one time interval");
  return from_members(grid, std::move(members), left, right, std::move(label));
}

CalliasOperator CalliasOperator::product(const BoundaryOperator& a, const TimeGrid& grid,
                                         std::string label) {
  auto m = std::make_shared<const BoundaryOperator>(a);
  std::vector<Member> members(static_cast<std::size_t>(grid.intervals), m);
  return from_members(grid, std::move(members), 1, 1, std::move(label));
}

CalliasOperator CalliasOperator::interpolating(const BoundaryOperator& a, const BoundaryOperator& b,
                                               const TimeGrid& grid, Margins margins,
                                               std::string label) {
  if (a.slice() != b.slice()) throw InvalidArgument("cobordism ends live on different slices");
  const double lo = margins.left, hi = 1.0 - margins.right;
  auto pa = std::make_shared<const BoundaryOperator>(a);
  auto pb = std::make_shared<const BoundaryOperator>(b);
  const Index K = grid.intervals;
  std::vector<Member> members;
  Index left = 0, right = 0;
  for (Index k = 0; k < K; ++k) {
    const double tau = (static_cast<double>(k) + 0.5) / static_cast<double>(K);
    const double s = plateau_step(tau, lo, hi);
    if (s == 0.0)
      members.push_back(pa);
    else if (s == 1.0)
      members.push_back(pb);
    else
      members.push_back(std::make_shared<const BoundaryOperator>(interpolate(a, b, s)));
    if (tau <= lo) ++left;
    if (tau >= hi) ++right;
  }
  if (left < 1 || right < 1)
    throw InvalidArgument("cylinder: margins narrower than one time interval");
  return from_members(grid, std::move(members), left, right, std::move(label));
}

CalliasOperator CalliasOperator::sub_cylinder(Index node_begin, Index node_end) const {
  if (node_begin < 0 || node_end > intervals() || node_begin >= node_end)
    throw InvalidArgument("sub_cylinder: invalid node range");
  std::vector<Member> m(members_.begin() + node_begin, members_.begin() + node_end);
  TimeGrid g = TimeGrid::make(grid_.step() * static_cast<double>(node_end - node_begin),
                              node_end - node_begin);
  return from_members(g, std::move(m), 1, 1, label_);
}

CalliasOperator CalliasOperator::adjoint() const {
  std::vector<Member> out;
  out.reserve(members_.size());
  for (std::size_t k = 0; k < members_.size(); ++k) {
    if (k > 0 && members_[k] == members_[k - 1])
      out.push_back(out.back());
    else
      out.push_back(std::make_shared<const BoundaryOperator>(adjoint_boundary_operator(*members_[k])));
  }
  return from_members(grid_, std::move(out), 1, 1, label_.empty() ? "" : label_ + "*");
}

bool CalliasOperator::product_at_node(Index node) const {
  if (node < 1 || node >= intervals()) return false;
  return members_[static_cast<std::size_t>(node - 1)] == members_[static_cast<std::size_t>(node)];
}

PeriodicOperator glue_double(const CalliasOperator& d1, const CalliasOperator& d2) {
  if (d1.slice() != d2.slice()) throw PreconditionError("glue_double: different slices");
  if (!(d1.grid() == d2.grid())) throw PreconditionError("glue_double: different time grids");
  if (!d1.start_operator().same_as(d2.start_operator()) ||
      !d1.end_operator().same_as(d2.end_operator()))
    throw PreconditionError("glue_double: cylinders are not compatible at their ends");
  PeriodicOperator p;
  p.step = d1.grid().step();
  const Index K = d1.intervals();
  for (Index k = 0; k < K; ++k) p.members.push_back(d1.member_ptr(k));
  for (Index j = 0; j < K; ++j) p.members.push_back(d2.member_ptr(K - 1 - j));
  return p;
}

namespace {

EssentialSupportReport summarize(const BoundarySlice& s, std::vector<double> gaps, double level) {
  EssentialSupportReport r;
  r.level = level;
  r.site_gap = std::move(gaps);
  for (Index x = 0; x < s.site_count(); ++x)
    if (r.site_gap[static_cast<std::size_t>(x)] < level) {
      r.violating.push_back(x);
      auto [ix, iy] = s.grid_position(x);
      if (r.empty) {
        r.box = {ix, ix, iy, iy};
        r.empty = false;
      } else {
        r.box[0] = std::min(r.box[0], ix);
        r.box[1] = std::max(r.box[1], ix);
        r.box[2] = std::min(r.box[2], iy);
        r.box[3] = std::max(r.box[3], iy);
      }
    }
  return r;
}

}  // namespace

EssentialSupportReport audit_strong_callias(const BoundaryOperator& a, double level) {
  if (!std::isfinite(level)) throw InvalidArgument("audit level must be finite");
  return summarize(a.slice(), kernels::site_gaps(a), level);
}

EssentialSupportReport audit_strong_callias(const CalliasOperator& d, double level, Index k_begin,
                                            Index k_end) {
  if (!std::isfinite(level)) throw InvalidArgument("audit level must be finite");
  if (k_begin < 0 || k_end > d.intervals() || k_begin >= k_end)
    throw InvalidArgument("audit: invalid interval range");
  std::vector<double> gaps;
  const BoundaryOperator* last = nullptr;
  for (Index k = k_begin; k < k_end; ++k) {
    const BoundaryOperator* m = &d.member(k);
    if (m == last) continue;
    last = m;
    auto g = kernels::site_gaps(*m);
    if (gaps.empty())
      gaps = std::move(g);
    else
      for (std::size_t i = 0; i < gaps.size(); ++i) gaps[i] = std::min(gaps[i], g[i]);
  }
  return summarize(d.slice(), std::move(gaps), level);
}

EssentialSupportReport audit_strong_callias(const CalliasOperator& d, double level) {
  return audit_strong_callias(d, level, 0, d.intervals());
}

BoundaryOperator compact_perturbation(const BoundaryOperator& a, const Patch& patch,
                                      std::string label) {
  const BoundarySlice& s = a.slice();
  if (patch.sites.size() != patch.values.size())
    throw InvalidArgument("patch: one value per site expected");
  std::set<Index> seen;
  for (std::size_t i = 0; i < patch.sites.size(); ++i) {
    const Index x = patch.sites[i];
    if (x < 0 || x >= s.site_count()) throw InvalidArgument("patch: site out of range");
    if (!seen.insert(x).second) throw InvalidArgument("patch: repeated site");
    if (s.on_edge(x)) throw InvalidArgument("patch: support touches the edge of the truncated slice");
    if (!std::isfinite(patch.values[i])) throw InvalidArgument("patch: non-finite value");
  }
  const Index r = s.fiber_rank();
  const Mat& g = a.clifford().grading;
  std::vector<Triplet> t;
  const SpMat& p = a.potential_part();
  for (Index k = 0; k < p.outerSize(); ++k)
    for (SpMat::InnerIterator it(p, k); it; ++it)
      if (!seen.count(s.site_of(it.row()))) t.emplace_back(it.row(), it.col(), it.value());
  for (std::size_t i = 0; i < patch.sites.size(); ++i)
    for (Index j = 0; j < r; ++j) {
      const Index d = patch.sites[i] * r + j;
      if (patch.values[i] != 0.0) t.emplace_back(d, d, patch.values[i] * g(j, j));
    }
  SpMat np(s.dim(), s.dim());
  np.setFromTriplets(t.begin(), t.end());
  std::vector<double> samples = a.samples();
  if (!samples.empty())
    for (std::size_t i = 0; i < patch.sites.size(); ++i)
      samples[static_cast<std::size_t>(patch.sites[i])] = patch.values[i];
  return BoundaryOperator::from_parts(s, a.dirac_part(), std::move(np),
                                      label.empty() ? a.label() : std::move(label), std::move(samples));
}

CalliasOperator compact_perturbation(const CalliasOperator& d, const Patch& patch, double tau_begin,
                                     double tau_end) {
  if (!(tau_begin <= tau_end)) throw InvalidArgument("time patch: empty range");
  const Index K = d.intervals();
  std::vector<CalliasOperator::Member> m = d.members();
  std::shared_ptr<const BoundaryOperator> cached_src, cached_out;
  bool any = false;
  for (Index k = 0; k < K; ++k) {
    const double tau = (static_cast<double>(k) + 0.5) / static_cast<double>(K);
    if (tau < tau_begin || tau > tau_end) continue;
    if (k < d.declared_left() || k >= K - d.declared_right())
      throw InvalidArgument("time patch overlaps a product margin");
    auto& slot = m[static_cast<std::size_t>(k)];
    if (slot != cached_src) {
      cached_src = slot;
      cached_out = std::make_shared<const BoundaryOperator>(compact_perturbation(*slot, patch));
    }
    slot = cached_out;
    any = true;
  }
  if (!any) throw InvalidArgument("time patch contains no interval midpoint");
  return CalliasOperator::from_members(d.grid(), std::move(m), d.declared_left(), d.declared_right(),
                                       d.label());
}

}  // namespace callias
