#include "callias/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "callias/errors.hpp"
#include "callias/partial_eigen.hpp"

namespace callias {

void SpectralInterval::validate() const {
  if (std::isnan(lower) || std::isnan(upper)) throw InvalidArgument("spectral interval: NaN endpoint");
  if (lower > upper) throw InvalidArgument("spectral interval: lower bound exceeds upper bound");
}

Index SpectralData::kernel_dim() const {
  Index k = 0;
  for (Index j = 0; j < values.size(); ++j)
    if (std::abs(values(j)) <= zero_tol) ++k;
  return k;
}

bool SpectralData::contains(const SpectralInterval& I, double lambda) const {
  auto above_lower = [&](double l) {
    if (std::isinf(I.lower)) return true;
    if (I.lower == 0.0) {
      const double z = std::abs(l) <= zero_tol ? 0.0 : l;
      return I.lower_closed ? z >= 0.0 : z > 0.0;
    }
    return I.lower_closed ? l >= I.lower : l > I.lower;
  };
  auto below_upper = [&](double l) {
    if (std::isinf(I.upper)) return true;
    if (I.upper == 0.0) {
      const double z = std::abs(l) <= zero_tol ? 0.0 : l;
      return I.upper_closed ? z <= 0.0 : z < 0.0;
    }
    return I.upper_closed ? l <= I.upper : l < I.upper;
  };
  return above_lower(lambda) && below_upper(lambda);
}

void SpectralData::check_endpoints(const SpectralInterval& I) const {
  I.validate();
  for (double e : {I.lower, I.upper}) {
    if (std::isinf(e) || e == 0.0) continue;
    for (Index j = 0; j < values.size(); ++j)
      if (std::abs(values(j) - e) <= zero_tol) {
        std::ostringstream os;
        os.precision(17);
        os << "spectral interval endpoint " << e << " collides with eigenvalue " << values(j)
           << " of " << (label.empty() ? "operator" : label) << "; perturb the cut point";
        throw PreconditionError(os.str());
      }
  }
}

namespace {

// Finite endpoints of a partial decomposition must lie inside its window.
void check_window(const SpectralData& s, const SpectralInterval& I) {
  if (s.complete()) return;
  for (double e : {I.lower, I.upper}) {
    if (std::isinf(e)) continue;
    if (e < s.window->lower || e > s.window->upper) {
      std::ostringstream os;
      os << "spectral interval endpoint " << e << " lies outside the decomposed window ["
         << s.window->lower << ", " << s.window->upper << "]";
      throw PreconditionError(os.str());
    }
  }
}

}  // namespace

Index SpectralData::count(const SpectralInterval& I) const {
  check_endpoints(I);
  check_window(*this, I);
  Index c = static_cast<Index>(members(I).size());
  if (window) {
    if (std::isinf(I.lower)) c += window->below;
    if (std::isinf(I.upper)) c += window->above;
  }
  return c;
}

std::vector<Index> SpectralData::members(const SpectralInterval& I) const {
  std::vector<Index> m;
  for (Index j = 0; j < values.size(); ++j)
    if (contains(I, values(j))) m.push_back(j);
  return m;
}

SpectralData SpectralData::negated() const {
  SpectralData n = *this;
  const Index k = values.size();
  for (Index j = 0; j < k; ++j) {
    n.values(j) = -values(k - 1 - j);
    n.vectors.col(j) = vectors.col(k - 1 - j);
  }
  if (window) n.window = SpectralWindow{-window->upper, -window->lower, window->above, window->below};
  n.label = label.empty() ? "" : "-" + label;
  n.op_hash.clear();
  return n;
}

double SpectralData::max_abs() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }

SpectralData eigendecompose(const BoundaryOperator& op, const SpectralOptions& o) {
  const bool dense = o.mode == SpectralOptions::Mode::Dense ||
                     (o.mode == SpectralOptions::Mode::Auto && op.dim() <= o.dense_limit);
  if (!dense) return partial_eigendecompose(op, o);
  HermitianEig e = hermitian_eig(op.dense());
  SpectralData s;
  s.label = op.label();
  s.op_hash = op.content_hash();
  s.dim = op.dim();
  s.values = std::move(e.values);
  s.vectors = std::move(e.vectors);
  s.zero_tol = o.zero_tol ? *o.zero_tol : 1e-8 * s.max_abs();
  return s;
}

SpectralQuality spectral_quality(const BoundaryOperator& op, const SpectralData& s) {
  SpectralQuality q;
  if (s.size() == 0) return q;
  Mat r = op.matrix() * s.vectors;
  for (Index j = 0; j < s.size(); ++j) {
    const double res = (r.col(j) - s.values(j) * s.vectors.col(j)).norm();
    q.residual = std::max(q.residual, res / std::max(1.0, std::abs(s.values(j))));
  }
  Mat g = s.vectors.adjoint() * s.vectors;
  q.orthonormality = (g - Mat::Identity(s.size(), s.size())).cwiseAbs().maxCoeff();
  return q;
}

Mat spectral_projection(const SpectralData& s, const SpectralInterval& I) {
  s.check_endpoints(I);
  check_window(s, I);
  if (!s.complete() && (std::isinf(I.lower) || std::isinf(I.upper))) {
    const bool misses = (std::isinf(I.lower) && s.window->below > 0) ||
                        (std::isinf(I.upper) && s.window->above > 0);
    if (misses) throw PreconditionError("spectral projection reaches beyond a partial decomposition");
  }
  std::vector<Index> m = s.members(I);
  Mat b(s.vectors.rows(), static_cast<Index>(m.size()));
  for (std::size_t k = 0; k < m.size(); ++k) b.col(static_cast<Index>(k)) = s.vectors.col(m[k]);
  return b;
}

namespace {

Vec coefficients(const SpectralData& s, const Vec& u) {
  if (u.size() != s.vectors.rows()) throw InvalidArgument("vector dimension does not match the slice");
  return s.vectors.adjoint() * u;
}

double weight(double lambda, double order) { return std::pow(1.0 + lambda * lambda, order); }

}  // namespace

double sobolev_norm(const SpectralData& s, const Vec& u, double order) {
  Vec a = coefficients(s, u);
  double sum = 0;
  for (Index j = 0; j < a.size(); ++j) sum += std::norm(a(j)) * weight(s.values(j), order);
  return std::sqrt(sum);
}

HybridNorms hybrid_norms(const SpectralData& s, const Vec& u, double a) {
  s.check_endpoints(SpectralInterval::below(a, true));
  Vec c = coefficients(s, u);
  const auto low = SpectralInterval::below(a, true);
  double check = 0, hat = 0, negcheck = 0;
  for (Index j = 0; j < c.size(); ++j) {
    const double l = s.values(j);
    const double w2 = std::norm(c(j));
    const bool below = s.contains(low, l);
    check += w2 * weight(l, below ? 0.5 : -0.5);
    hat += w2 * weight(l, below ? -0.5 : 0.5);
    // -A has eigenvalue -l, below its cut -a exactly when l is above a
    negcheck += w2 * weight(-l, below ? -0.5 : 0.5);
  }
  HybridNorms h;
  h.check = std::sqrt(check);
  h.hat = std::sqrt(hat);
  h.check_of_negated = std::sqrt(negcheck);
  h.hat_equals_negated_check = std::abs(h.hat - h.check_of_negated) <= 1e-12 * std::max(1.0, h.hat);
  return h;
}

cplx duality_pairing(const CliffordData& cl, const Vec& u, const Vec& v) {
  if (u.size() != v.size() || u.size() % cl.rank != 0)
    throw InvalidArgument("duality pairing: incompatible vector sizes");
  const Index sites = u.size() / cl.rank;
  cplx sum(0, 0);
  for (Index x = 0; x < sites; ++x) {
    Vec cu = cl.cdt * u.segment(x * cl.rank, cl.rank);
    sum += cu.dot(v.segment(x * cl.rank, cl.rank));  // <cdt u, v>, antilinear in the first slot
  }
  return -sum;
}

PairingGram pairing_gram(const SpectralData& a, const SpectralData& b, const CliffordData& cl) {
  if (a.size() != b.size()) throw InvalidArgument("pairing gram: bases of different size");
  PairingGram g;
  g.gram.resize(a.size(), b.size());
  for (Index i = 0; i < a.size(); ++i)
    for (Index j = 0; j < b.size(); ++j)
      g.gram(i, j) = duality_pairing(cl, a.vectors.col(i), b.vectors.col(j));
  RVec sv = singular_values(g.gram);
  g.min_singular = sv.size() ? sv(sv.size() - 1) : 0.0;
  double logdet = 0;
  for (Index i = 0; i < sv.size(); ++i) logdet += std::log(sv(i));
  g.abs_det = std::exp(logdet);
  return g;
}

double Cutoff::operator()(double t) const {
  if (t <= r / 3.0) return 1.0;
  if (t >= 2.0 * r / 3.0) return 0.0;
  return 1.0 - plateau_step(t / r);
}

CylinderSection extension_map(const SpectralData& s, const Vec& u, const TimeGrid& grid,
                              const Cutoff& chi) {
  Vec c = coefficients(s, u);
  if ((s.vectors * c - u).norm() > 1e-10 * std::max(1.0, u.norm()))
    throw PreconditionError("extension map: vector is not in the decomposed window");
  CylinderSection w;
  w.grid = grid;
  for (Index k = 0; k <= grid.intervals; ++k) {
    const double t = grid.node(k);
    Vec ck(c.size());
    for (Index j = 0; j < c.size(); ++j) ck(j) = chi(t) * std::exp(-t * std::abs(s.values(j))) * c(j);
    w.nodes.push_back(k == 0 ? u : Vec(s.vectors * ck));
  }
  return w;
}

namespace {

struct Norms {
  double l2 = 0, grad = 0, op = 0, dirac = 0;
};

// Node sums use the trapezoid rule; differences live on intervals.
Norms cylinder_norms(const SpectralData& s, const CylinderSection& w) {
  const TimeGrid& g = w.grid;
  const double h = g.step();
  const Index K = g.intervals;
  if (static_cast<Index>(w.nodes.size()) != K + 1) throw InvalidArgument("cylinder section: wrong node count");
  std::vector<Vec> c;
  for (const Vec& v : w.nodes) c.push_back(coefficients(s, v));
  const RVec& l = s.values;
  Norms n;
  for (Index k = 0; k <= K; ++k) {
    const double wk = (k == 0 || k == K) ? 0.5 * h : h;
    n.l2 += wk * c[static_cast<std::size_t>(k)].squaredNorm();
    n.op += wk * (l.cast<cplx>().asDiagonal() * c[static_cast<std::size_t>(k)]).squaredNorm();
  }
  for (Index k = 0; k < K; ++k) {
    const Vec& a = c[static_cast<std::size_t>(k)];
    const Vec& b = c[static_cast<std::size_t>(k + 1)];
    Vec d = (b - a) / h;
    Vec m = 0.5 * (a + b);
    n.grad += h * d.squaredNorm();
    n.dirac += h * (d + l.cast<cplx>().asDiagonal() * m).squaredNorm();
  }
  return n;
}

}  // namespace

double cylinder_h1_norm(const SpectralData& s, const CylinderSection& u) {
  Norms n = cylinder_norms(s, u);
  return std::sqrt(n.l2 + n.grad + n.op);
}

double trace_ratio(const SpectralData& s, const CylinderSection& u) {
  const double den = cylinder_h1_norm(s, u);
  if (!(den > 0)) throw InvalidArgument("trace ratio: zero section");
  return sobolev_norm(s, u.nodes.front(), 0.5) / den;
}

double extension_ratio(const SpectralData& s, const Vec& u, const TimeGrid& grid, const Cutoff& chi,
                       double a) {
  CylinderSection w = extension_map(s, u, grid, chi);
  Norms n = cylinder_norms(s, w);
  const double check = hybrid_norms(s, u, a).check;
  if (!(check > 0)) throw InvalidArgument("extension ratio: zero boundary vector");
  return std::sqrt(n.l2 + n.dirac) / check;
}

}  // namespace callias
