#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "callias/errors.hpp"
#include "callias/flow_eta.hpp"

namespace callias {

namespace {

void require_restrictions(const BoundaryOperator& a0, const BoundaryOperator& a1, const CalliasOperator& d) {
  if (!d.start_operator().same_as(a0))
    throw PreconditionError("cobordism does not restrict to A0 at its start");
  if (!d.end_operator().same_as(a1))
    throw PreconditionError("cobordism does not restrict to A1 at its far end");
}

struct EtaCore {
  long long eta = 0, dual = 0, index = 0, dual_index = 0;
  std::vector<IndexReport> reports;
};

EtaCore eta_over(const CalliasOperator& d, const SpectralData& s0, const SpectralData& s1,
                 const IndexPolicy& policy) {
  const long long k0 = s0.kernel_dim(), k1 = s1.kernel_dim();
  IndexReport r = compute_index(
      ConstrainedOperator::assemble(d, aps_condition(s0, 0.0, Side::Start), aps_condition(s1, 0.0, Side::End)),
      policy);
  IndexReport rd = compute_index(ConstrainedOperator::assemble(d, dual_aps_condition(s0, 0.0, Side::Start),
                                                               dual_aps_condition(s1, 0.0, Side::End)),
                                 policy);
  EtaCore c;
  c.index = r.index;
  c.dual_index = rd.index;
  c.eta = 2 * c.index + k0 + k1;
  c.dual = 2 * c.dual_index - k0 - k1;
  c.reports = {r, rd};
  return c;
}

}  // namespace

EtaReport relative_eta(const BoundaryOperator& a0, const BoundaryOperator& a1, const CalliasOperator& cobordism,
                       SpectralEngine& engine, const IndexPolicy& policy,
                       const CalliasOperator* second_cobordism) {
  require_restrictions(a0, a1, cobordism);
  if (second_cobordism) require_restrictions(a0, a1, *second_cobordism);
  auto s0 = engine.decompose(a0);
  auto s1 = engine.decompose(a1);
  IndexPolicy p = policy;
  if (!p.engine) p.engine = &engine;

  EtaCore c = eta_over(cobordism, *s0, *s1, p);
  EtaReport r;
  r.eta = c.eta;
  r.components = {c.index, s0->kernel_dim(), s1->kernel_dim()};
  r.dual_route = c.dual;
  r.dual_index = c.dual_index;
  r.routes_agree = c.eta == c.dual;
  r.parity_ok = ((r.eta - r.components.dim_ker_a0 - r.components.dim_ker_a1) % 2) == 0;
  r.reports = c.reports;
  r.zero_tol_a0 = s0->zero_tol;
  r.zero_tol_a1 = s1->zero_tol;
  if (second_cobordism) {
    EtaCore c2 = eta_over(*second_cobordism, *s0, *s1, p);
    r.independent_eta = c2.eta;
    r.reports.insert(r.reports.end(), c2.reports.begin(), c2.reports.end());
  }
  return r;
}

bool cobordant(const BoundaryOperator& a, const BoundaryOperator& b) {
  if (a.slice() != b.slice()) return false;
  if (a.slice().kind() == SliceKind::Points) return true;
  for (Index x : differing_sites(a, b))
    if (a.slice().on_edge(x)) return false;
  return true;
}

EtaProperties eta_properties(const BoundaryOperator& a0, const BoundaryOperator& a1, const BoundaryOperator& a2,
                             const TimeGrid& grid, SpectralEngine& engine, const IndexPolicy& policy,
                             Margins margins) {
  if (!cobordant(a0, a1) || !cobordant(a1, a2) || !cobordant(a0, a2))
    throw PreconditionError("eta properties: operators are not pairwise cobordant");
  auto eta = [&](const BoundaryOperator& from, const BoundaryOperator& to) {
    return relative_eta(from, to, CalliasOperator::interpolating(from, to, grid, margins), engine, policy);
  };
  EtaProperties p;
  EtaReport r10 = eta(a0, a1), r01 = eta(a1, a0), r21 = eta(a1, a2), r20 = eta(a0, a2);
  p.eta10 = r10.eta;
  p.eta01 = r01.eta;
  p.eta21 = r21.eta;
  p.eta20 = r20.eta;
  p.antisymmetry = p.eta01 == -p.eta10;
  p.cocycle = p.eta20 == p.eta21 + p.eta10;
  p.reports = {r10, r01, r21, r20};
  return p;
}

double relative_eta_heat(const SpectralData& a0, const SpectralData& a1, const HeatOptions& o) {
  if (!a0.complete() || !a1.complete()) throw PreconditionError("heat route needs complete spectra");
  if (a0.dim != a1.dim) throw PreconditionError("heat route: operators live on different truncations");
  // Trace difference with t = u^2 on the head; dt = 2u du cancels t^{-1/2}.
  auto head = [&](double u) {
    const double t = u * u;
    double sum = 0;
    for (Index j = 0; j < a1.size(); ++j) sum += a1.values(j) * std::exp(-t * a1.values(j) * a1.values(j));
    for (Index j = 0; j < a0.size(); ++j) sum -= a0.values(j) * std::exp(-t * a0.values(j) * a0.values(j));
    return 2 * sum;
  };
  double err = 0;
  const double h = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(head, 0.0, 1.0, o.max_depth,
                                                                                 o.tolerance, &err);
  if (!(err <= o.tolerance * std::max(1.0, std::abs(h))) || !std::isfinite(h)) {
    std::ostringstream os;
    os << "heat route: quadrature did not converge (error estimate " << err << ")";
    throw NumericalError(os.str());
  }
  // Tail: int_1^inf t^{-1/2} l e^{-t l^2} dt = sign(l) sqrt(pi) erfc(|l|).
  const double sqrt_pi = std::sqrt(M_PI);
  auto tail = [&](const SpectralData& s) {
    double t = 0;
    for (Index j = 0; j < s.size(); ++j) {
      const double l = s.values(j);
      if (l != 0) t += (l > 0 ? 1.0 : -1.0) * sqrt_pi * std::erfc(std::abs(l));
    }
    return t;
  };
  return (h + tail(a1) - tail(a0)) / sqrt_pi;
}

EtaSfVerdict check_eta_equals_2sf(const FamilySpec& f, SpectralEngine& engine, const IndexPolicy& policy,
                                  const EtaSfOptions& o, const BoundaryOperator* reference) {
  if (!f.endpoint_invertible)
    throw PreconditionError("eta = 2 sf needs invertible endpoints; family declares otherwise");
  EtaSfVerdict v;
  v.flow = spectral_flow(f, o.method, engine, o.flow);
  v.sf = v.flow.sf;
  const BoundaryOperator a0 = f.operators(0.0), a1 = f.operators(1.0);
  const double lo = o.margins.left, hi = 1.0 - o.margins.right;
  auto fam = f.operators;
  const CalliasOperator d = CalliasOperator::build(
      o.grid, [&](double tau) { return fam(plateau_step(tau, lo, hi)); }, o.margins, f.label + "-cobordism");
  v.eta_report = relative_eta(a0, a1, d, engine, policy);
  v.eta = v.eta_report.eta;
  v.passed = v.eta == 2 * v.sf && v.eta_report.routes_agree;
  if (reference) {
    if (!cobordant(*reference, a0)) throw PreconditionError("reference operator is not cobordant to the family");
    auto eta_from_ref = [&](const BoundaryOperator& to) {
      return relative_eta(*reference, to, CalliasOperator::interpolating(*reference, to, o.grid, o.margins), engine,
                          policy)
          .eta;
    };
    v.eta_end_ref = eta_from_ref(a1);
    v.eta_start_ref = eta_from_ref(a0);
    v.difference_passed = *v.eta_end_ref - *v.eta_start_ref == 2 * v.sf;
  }
  return v;
}

}  // namespace callias
