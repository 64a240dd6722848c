#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "callias/errors.hpp"
#include "callias/flow_eta.hpp"
#include "callias/kernels.hpp"

namespace callias {

void FamilySpec::validate() const {
  if (!operators) throw InvalidArgument("family: no operator map");
  if (s_grid.size() < 2 || s_grid.front() != 0.0 || s_grid.back() != 1.0)
    throw InvalidArgument("family: s-grid must run from 0 to 1");
  for (std::size_t i = 1; i < s_grid.size(); ++i)
    if (!(s_grid[i] > s_grid[i - 1])) throw InvalidArgument("family: s-grid must be strictly increasing");
  const std::set<Index> allowed(compact_variation.begin(), compact_variation.end());
  for (Index x : allowed)
    if (x < 0 || x >= slice.site_count()) throw InvalidArgument("family: compact variation site out of range");
  const BoundaryOperator a0 = operators(0.0);
  if (a0.slice() != slice) throw InvalidArgument("family: members do not live on the family's slice");
  for (double s : s_grid) {
    const BoundaryOperator a = operators(s);
    if (a.slice() != slice) throw InvalidArgument("family: members do not live on the family's slice");
    for (Index x : differing_sites(a, a0))
      if (!allowed.count(x)) {
        std::ostringstream os;
        os << "family: member at s = " << s << " differs from A^0 at site " << x
           << " outside the compact variation set";
        throw InvalidArgument(os.str());
      }
    // Finite-difference continuity: a jump shows up as a Lipschitz quotient
    // growing like 1/delta.
    for (double sgn : {-1.0, 1.0}) {
      if (s + sgn * 1e-4 < 0.0 || s + sgn * 1e-4 > 1.0) continue;
      const double q6 = frobenius_norm(SpMat(operators(s + sgn * 1e-6).matrix() - a.matrix())) / 1e-6;
      const double q4 = frobenius_norm(SpMat(operators(s + sgn * 1e-4).matrix() - a.matrix())) / 1e-4;
      if (q6 > 10.0 * q4 + 1e-3) {
        std::ostringstream os;
        os << "family: not continuous near s = " << s;
        throw InvalidArgument(os.str());
      }
    }
  }
}

FamilySpec concatenate(const FamilySpec& f, const FamilySpec& g) {
  if (f.slice != g.slice) throw InvalidArgument("concatenate: families on different slices");
  if (!f.operators(1.0).same_as(g.operators(0.0)))
    throw InvalidArgument("concatenate: end of the first family differs from start of the second");
  FamilySpec c;
  c.slice = f.slice;
  for (double s : f.s_grid) c.s_grid.push_back(s / 2);
  for (std::size_t i = 1; i < g.s_grid.size(); ++i) c.s_grid.push_back(0.5 + g.s_grid[i] / 2);
  auto fo = f.operators;
  auto go = g.operators;
  c.operators = [fo, go](double s) { return s <= 0.5 ? fo(std::min(1.0, 2 * s)) : go(std::max(0.0, 2 * s - 1)); };
  std::set<Index> v(f.compact_variation.begin(), f.compact_variation.end());
  v.insert(g.compact_variation.begin(), g.compact_variation.end());
  c.compact_variation.assign(v.begin(), v.end());
  c.endpoint_invertible = f.endpoint_invertible && g.endpoint_invertible;
  c.label = f.label + "+" + g.label;
  return c;
}

FamilySpec reversed(const FamilySpec& f) {
  FamilySpec r = f;
  r.s_grid.clear();
  for (auto it = f.s_grid.rbegin(); it != f.s_grid.rend(); ++it) r.s_grid.push_back(1.0 - *it);
  r.s_grid.front() = 0.0;
  r.s_grid.back() = 1.0;
  auto fo = f.operators;
  r.operators = [fo](double s) { return fo(1.0 - s); };
  r.label = f.label + "^rev";
  return r;
}

FamilySpec negated(const FamilySpec& f) {
  FamilySpec r = f;
  auto fo = f.operators;
  r.operators = [fo](double s) { return negate(fo(s)); };
  r.label = "-" + f.label;
  return r;
}

const char* method_name(FlowResult::Method m) {
  return m == FlowResult::Method::CrossingCount ? "CrossingCount" : "DaiZhang";
}

namespace {

struct Sample {
  double s = 0;
  std::shared_ptr<const BoundaryOperator> op;
  std::shared_ptr<const SpectralData> data;

  Index offset() const { return data->window ? data->window->below : 0; }
  // Negative eigenvalues, counted globally.
  Index negatives() const { return data->count(SpectralInterval::below(0.0, false)); }
  // Every eigenvalue with |lambda| <= r is in the data.
  bool covers(double r) const {
    return !data->window || (data->window->lower <= -r && data->window->upper >= r);
  }
};

class Sampler {
 public:
  Sampler(const FamilySpec& f, SpectralEngine& engine, const FlowOptions& o) : f_(f), engine_(engine), o_(o) {
    opts_ = o.spectral;
    if (opts_.mode == SpectralOptions::Mode::Auto) {
      if (f.slice.dim() > o.window_above) {
        opts_.mode = SpectralOptions::Mode::Window;
        opts_.window_count = std::min(o.window_count, f.slice.dim());
        opts_.shift = 0.0;
      } else {
        opts_.mode = SpectralOptions::Mode::Dense;
      }
    }
  }

  // Decomposes the grid points concurrently; interior points hitting a zero
  // eigenvalue are nudged, endpoints must be invertible.
  std::vector<Sample> grid() {
    std::vector<std::shared_ptr<const BoundaryOperator>> ops;
    std::vector<const BoundaryOperator*> raw;
    for (double s : f_.s_grid) {
      ops.push_back(std::make_shared<const BoundaryOperator>(f_.operators(s)));
      raw.push_back(ops.back().get());
    }
    auto data = kernels::decompose_batch(engine_, raw, o_.workers, opts_);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      Sample smp{f_.s_grid[i], ops[i], data[i]};
      cache_[smp.s] = smp;
      const bool end = i == 0 || i + 1 == ops.size();
      if (smp.data->kernel_dim() > 0) {
        if (end) {
          std::ostringstream os;
          os << "family endpoint A^" << smp.s << " is not invertible";
          throw PreconditionError(os.str());
        }
        smp = regular(smp.s, f_.s_grid[i - 1], f_.s_grid[i + 1]);
      }
      out.push_back(smp);
    }
    return out;
  }

  Sample at(double s) {
    auto it = cache_.find(s);
    if (it != cache_.end()) return it->second;
    Sample smp{s, std::make_shared<const BoundaryOperator>(f_.operators(s)), nullptr};
    smp.data = engine_.decompose(*smp.op, opts_);
    cache_[s] = smp;
    return smp;
  }

  // A sample near s, strictly inside (lo, hi), without zero eigenvalues.
  Sample regular(double s, double lo, double hi) {
    Sample a = at(s);
    if (a.data->kernel_dim() == 0) return a;
    const double nu = std::min(o_.zero_nudge, (hi - lo) / 8);
    for (double t : {s + nu, s - nu}) {
      if (!(t > lo && t < hi)) continue;
      Sample b = at(t);
      if (b.data->kernel_dim() == 0) return b;
    }
    std::ostringstream os;
    os << "eigenvalue pinned at 0 near s = " << s << "; degenerate family";
    throw NumericalError(os.str());
  }

  double delta(const Sample& l, const Sample& r) const {
    return frobenius_norm(SpMat(r.op->matrix() - l.op->matrix()));
  }

 private:
  const FamilySpec& f_;
  SpectralEngine& engine_;
  FlowOptions o_;
  SpectralOptions opts_;
  std::map<double, Sample> cache_;
};

struct Cluster {
  Index first = 0, size = 0;  // local indices into values
  double value = 0;
};

std::vector<Cluster> clusters_within(const SpectralData& d, double r) {
  const double tol = 1e-8 * std::max(1.0, d.max_abs());
  std::vector<Cluster> out;
  for (Index j = 0; j < d.size(); ++j) {
    if (std::abs(d.values(j)) > r) continue;
    if (!out.empty() && out.back().first + out.back().size == j &&
        d.values(j) - d.values(j - 1) <= tol) {
      ++out.back().size;
      continue;
    }
    out.push_back({j, 1, d.values(j)});
  }
  // Close clusters at the edge of the radius.
  for (auto& c : out) {
    while (c.first > 0 && d.values(c.first) - d.values(c.first - 1) <= tol) {
      --c.first;
      ++c.size;
    }
    while (c.first + c.size < d.size() && d.values(c.first + c.size) - d.values(c.first + c.size - 1) <= tol)
      ++c.size;
  }
  out.erase(std::unique(out.begin(), out.end(),
                        [](const Cluster& a, const Cluster& b) { return a.first == b.first; }),
            out.end());
  return out;
}

struct MatchedCrossing {
  Index rank = 0;  // global rank at the left sample
  Index multiplicity = 1;
  int direction = 0;
};

// Overlap matching of the eigenpairs near 0 between two samples. nullopt if
// the matching is ambiguous at this resolution.
std::optional<std::vector<MatchedCrossing>> match(const Sample& l, const Sample& r, double delta, double threshold) {
  const double wide = 2 * delta + 1e-12;
  if (!l.covers(wide) || !r.covers(wide)) return std::nullopt;
  const auto cl = clusters_within(*l.data, wide);
  const auto cr = clusters_within(*r.data, wide);
  auto block = [](const SpectralData& d, const Cluster& c) { return d.vectors.middleCols(c.first, c.size); };
  Eigen::MatrixXd ov(cl.size(), cr.size());
  for (std::size_t a = 0; a < cl.size(); ++a)
    for (std::size_t b = 0; b < cr.size(); ++b) {
      const Mat g = block(*r.data, cr[b]).adjoint() * block(*l.data, cl[a]);
      ov(a, b) = g.squaredNorm() / static_cast<double>(std::max(cl[a].size, cr[b].size));
    }
  auto core = [&](const Cluster& c, const SpectralData& d) {
    for (Index j = c.first; j < c.first + c.size; ++j)
      if (std::abs(d.values(j)) <= delta + 1e-12) return true;
    return false;
  };
  std::vector<int> partner_l(cl.size(), -1), partner_r(cr.size(), -1);
  for (std::size_t a = 0; a < cl.size(); ++a) {
    if (cr.empty()) break;
    Index b;
    const double best = ov.row(static_cast<Index>(a)).maxCoeff(&b);
    Index back;
    ov.col(b).maxCoeff(&back);
    if (best > threshold && back == static_cast<Index>(a) && cl[a].size == cr[static_cast<std::size_t>(b)].size) {
      partner_l[a] = static_cast<int>(b);
      partner_r[static_cast<std::size_t>(b)] = static_cast<int>(a);
    }
  }
  for (std::size_t a = 0; a < cl.size(); ++a)
    if (partner_l[a] < 0 && core(cl[a], *l.data)) return std::nullopt;
  for (std::size_t b = 0; b < cr.size(); ++b)
    if (partner_r[b] < 0 && core(cr[b], *r.data)) return std::nullopt;

  std::vector<MatchedCrossing> out;
  Index net = 0;
  for (std::size_t a = 0; a < cl.size(); ++a) {
    if (partner_l[a] < 0) continue;
    const double la = cl[a].value, lb = cr[static_cast<std::size_t>(partner_l[a])].value;
    if ((la < 0) == (lb < 0)) continue;
    const int dir = lb > 0 ? 1 : -1;
    out.push_back({l.offset() + cl[a].first, cl[a].size, dir});
    net += dir * cl[a].size;
  }
  // Matched branches must account for the change in the negative count.
  if (net != l.negatives() - r.negatives()) return std::nullopt;
  return out;
}

class CrossingTracker {
 public:
  CrossingTracker(Sampler& sampler, const FlowOptions& o) : sampler_(sampler), o_(o) {}

  void interval(const Sample& l, const Sample& r, int depth) {
    depth_ = std::max(depth_, depth);
    const double delta = sampler_.delta(l, r);
    auto m = match(l, r, delta, o_.overlap);
    if (m && m->empty()) return;
    if (m && r.s - l.s <= o_.isolate_width) {
      for (const auto& c : *m)
        for (Index j = 0; j < c.multiplicity; ++j)
          crossings_.push_back({0.5 * (l.s + r.s), r.s - l.s, c.direction, c.rank + j});
      return;
    }
    if (depth >= o_.max_depth || r.s - l.s < 1e-12) {
      std::ostringstream os;
      os.precision(17);
      os << "unresolvable branch ambiguity in s-interval [" << l.s << ", " << r.s << "]";
      throw NumericalError(os.str());
    }
    const Sample mid = sampler_.regular(0.5 * (l.s + r.s), l.s, r.s);
    interval(l, mid, depth + 1);
    interval(mid, r, depth + 1);
  }

  std::vector<Crossing> crossings_;
  int depth_ = 0;

 private:
  Sampler& sampler_;
  FlowOptions o_;
};

long long crossing_sum(const std::vector<Crossing>& c) {
  long long s = 0;
  for (const auto& x : c) s += x.direction;
  return s;
}

// #{lambda > 0} - #{lambda > mu} on the decomposed part, via the relative
// index of the two spectral subspaces.
long long section_defect(const Sample& x, double mu) {
  const SpectralData& d = *x.data;
  auto cols = [&](double level) {
    auto idx = d.members(SpectralInterval::above(level, false));
    Mat m(d.dim, static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) m.col(static_cast<Index>(j)) = d.vectors.col(idx[j]);
    return m;
  };
  return relative_index(cols(0.0), cols(mu));
}

double distance_to_spectrum(const SpectralData& d, double mu) {
  double best = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < d.size(); ++j) best = std::min(best, std::abs(d.values(j) - mu));
  return best;
}

// A level mu whose distance to both spectra exceeds delta, smallest |mu|
// first; nullopt if none is safe on this segment.
std::optional<double> safe_level(const Sample& l, const Sample& r, double delta) {
  double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
  for (const Sample* x : {&l, &r})
    if (x->data->window) {
      lo = std::max(lo, x->data->window->lower + delta);
      hi = std::min(hi, x->data->window->upper - delta);
    }
  std::vector<double> pts;
  for (const Sample* x : {&l, &r})
    for (Index j = 0; j < x->data->size(); ++j) pts.push_back(x->data->values(j));
  std::sort(pts.begin(), pts.end());
  std::vector<double> cand{0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) cand.push_back(0.5 * (pts[i - 1] + pts[i]));
  if (!pts.empty()) {
    cand.push_back(pts.front() - 2 * delta - 1.0);
    cand.push_back(pts.back() + 2 * delta + 1.0);
  }
  std::sort(cand.begin(), cand.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  for (double mu : cand) {
    if (!(mu > lo && mu < hi)) continue;
    const double need = std::max(delta, 10 * std::max(l.data->zero_tol, r.data->zero_tol));
    if (distance_to_spectrum(*l.data, mu) > need && distance_to_spectrum(*r.data, mu) > need) return mu;
  }
  return std::nullopt;
}

class SectionFlow {
 public:
  SectionFlow(Sampler& sampler, const FlowOptions& o) : sampler_(sampler), o_(o) {}

  long long segment(const Sample& l, const Sample& r, int depth) {
    depth_ = std::max(depth_, depth);
    const double delta = sampler_.delta(l, r);
    if (auto mu = safe_level(l, r, delta)) return section_defect(r, *mu) - section_defect(l, *mu);
    if (depth >= o_.max_depth || r.s - l.s < 1e-12) {
      std::ostringstream os;
      os.precision(17);
      os << "no spectral gap for a section on s-interval [" << l.s << ", " << r.s << "]";
      throw NumericalError(os.str());
    }
    const Sample mid = sampler_.regular(0.5 * (l.s + r.s), l.s, r.s);
    return segment(l, mid, depth + 1) + segment(mid, r, depth + 1);
  }

  int depth_ = 0;

 private:
  Sampler& sampler_;
  FlowOptions o_;
};

void require_flow_family(const FamilySpec& f) {
  if (!f.endpoint_invertible)
    throw PreconditionError("spectral flow needs invertible endpoints; family declares otherwise");
  f.validate();
}

}  // namespace

EigenCurves eigencurves(const FamilySpec& f, SpectralEngine& engine, const FlowOptions& o) {
  f.validate();
  Sampler sampler(f, engine, o);
  std::vector<Sample> grid = sampler.grid();
  CrossingTracker t(sampler, o);
  for (std::size_t i = 1; i < grid.size(); ++i) t.interval(grid[i - 1], grid[i], 0);
  EigenCurves c;
  for (const auto& smp : grid) {
    c.s.push_back(smp.s);
    c.values.push_back(smp.data->values);
    std::vector<Index> ranks;
    for (Index j = 0; j < smp.data->size(); ++j) ranks.push_back(smp.offset() + j);
    c.branch.push_back(std::move(ranks));
  }
  c.crossings = std::move(t.crossings_);
  std::sort(c.crossings.begin(), c.crossings.end(),
            [](const Crossing& a, const Crossing& b) { return a.s < b.s || (a.s == b.s && a.branch < b.branch); });
  c.refinement_depth = t.depth_;
  const long long net = grid.front().negatives() - grid.back().negatives();
  if (crossing_sum(c.crossings) != net) throw NumericalError("crossing count disagrees with the inertia change");
  return c;
}

FlowResult spectral_flow(const FamilySpec& f, FlowResult::Method method, SpectralEngine& engine,
                         const FlowOptions& o) {
  require_flow_family(f);
  EigenCurves curves = eigencurves(f, engine, o);
  const long long cc = crossing_sum(curves.crossings);

  Sampler sampler(f, engine, o);
  std::vector<Sample> grid = sampler.grid();
  SectionFlow sec(sampler, o);
  long long dz = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) dz += sec.segment(grid[i - 1], grid[i], 0);

  if (cc != dz) {
    std::ostringstream os;
    os << "spectral flow methods disagree: crossing count " << cc << ", sections " << dz;
    throw NumericalError(os.str());
  }
  FlowResult r;
  r.method = method;
  r.crossings = std::move(curves.crossings);
  r.sf = method == FlowResult::Method::CrossingCount ? cc : dz;
  r.sf_other = method == FlowResult::Method::CrossingCount ? dz : cc;
  r.refinement_depth = std::max(curves.refinement_depth, sec.depth_);
  r.samples = std::move(curves.s);
  return r;
}

}  // namespace callias
