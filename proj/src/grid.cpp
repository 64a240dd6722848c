#include "callias/grid.hpp"

#include <cmath>
#include <sstream>

#include "callias/errors.hpp"

namespace callias {

namespace {

Index cells(double r, double h, const char* axis) {
  if (!(r > 0) || !(h > 0) || !std::isfinite(r) || !std::isfinite(h))
    throw InvalidArgument(std::string("plane slice: non-positive extent or step on ") + axis);
  const double q = 2.0 * r / h;
  const double n = std::round(q);
  if (std::abs(q - n) > 1e-9 * q || n < 1)
    throw InvalidArgument(std::string("plane slice: 2R/h is not an integer on ") + axis);
  return static_cast<Index>(n);
}

}  // namespace

BoundarySlice BoundarySlice::make(const SliceSpec& spec) {
  if (spec.fiber_rank < 2 || spec.fiber_rank % 2 != 0)
    throw InvalidArgument("fiber rank must be even and at least 2");
  BoundarySlice s;
  s.rank_ = spec.fiber_rank;
  if (const auto* p = std::get_if<PointsSpec>(&spec.geometry)) {
    if (p->count < 1) throw InvalidArgument("points slice needs at least one site");
    s.kind_ = SliceKind::Points;
    s.sites_ = p->count;
    s.nx_ = p->count;
    s.ny_ = 1;
  } else {
    const auto& g = std::get<PlaneSpec>(spec.geometry);
    s.kind_ = SliceKind::Plane2D;
    s.nx_ = cells(g.rx, g.hx, "x");
    s.ny_ = cells(g.ry, g.hy, "y");
    s.rx_ = g.rx;
    s.ry_ = g.ry;
    s.hx_ = 2.0 * g.rx / static_cast<double>(s.nx_);
    s.hy_ = 2.0 * g.ry / static_cast<double>(s.ny_);
    s.sites_ = s.nx_ * s.ny_;
  }
  return s;
}

BoundarySlice BoundarySlice::points(Index count, int fiber_rank) {
  return make(SliceSpec{PointsSpec{count}, fiber_rank});
}

BoundarySlice BoundarySlice::plane(double r, double h, int fiber_rank) {
  return make(SliceSpec{PlaneSpec{r, r, h, h}, fiber_rank});
}

std::array<double, 2> BoundarySlice::coordinates(Index site) const {
  if (kind_ == SliceKind::Points) return {static_cast<double>(site), 0.0};
  auto [ix, iy] = grid_position(site);
  return {-rx_ + (static_cast<double>(ix) + 0.5) * hx_, -ry_ + (static_cast<double>(iy) + 0.5) * hy_};
}

std::pair<Index, Index> BoundarySlice::grid_position(Index site) const {
  return {site % nx_, site / nx_};
}

bool BoundarySlice::on_edge(Index site) const {
  if (kind_ == SliceKind::Points) return false;
  auto [ix, iy] = grid_position(site);
  return ix == 0 || iy == 0 || ix == nx_ - 1 || iy == ny_ - 1;
}

bool BoundarySlice::operator==(const BoundarySlice& o) const {
  return kind_ == o.kind_ && sites_ == o.sites_ && rank_ == o.rank_ && nx_ == o.nx_ &&
         ny_ == o.ny_ && hx_ == o.hx_ && hy_ == o.hy_ && rx_ == o.rx_ && ry_ == o.ry_;
}

std::string BoundarySlice::describe() const {
  std::ostringstream os;
  if (kind_ == SliceKind::Points)
    os << "points(" << sites_ << ")";
  else
    os << "plane(" << nx_ << "x" << ny_ << ", h=" << hx_ << ")";
  os << " rank " << rank_;
  return os.str();
}

SpMat CliffordData::lift(const Mat& fibre, Index sites) const {
  const Index r = fibre.rows();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(sites * r * r));
  for (Index x = 0; x < sites; ++x)
    for (Index j = 0; j < r; ++j)
      for (Index i = 0; i < r; ++i)
        if (fibre(i, j) != cplx(0, 0)) t.emplace_back(x * r + i, x * r + j, fibre(i, j));
  SpMat m(sites * r, sites * r);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

CliffordData make_clifford(int fiber_rank) {
  if (fiber_rank < 2 || fiber_rank % 2 != 0)
    throw InvalidArgument("fiber rank must be even and at least 2");
  const Index k = fiber_rank / 2;
  const cplx I(0, 1);
  Eigen::Matrix2cd sx, sy, sz;
  sx << 0, 1, 1, 0;
  sy << 0, -I, I, 0;
  sz << 1, 0, 0, -1;
  auto kron = [&](const Eigen::Matrix2cd& p) {
    Mat out = Mat::Zero(2 * k, 2 * k);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) out.block(a * k, b * k, k, k) = p(a, b) * Mat::Identity(k, k);
    return out;
  };
  CliffordData c;
  c.rank = fiber_rank;
  c.gamma = {kron(sx), kron(sy)};
  c.grading = kron(sz);
  c.cdt = I * c.grading;
  return c;
}

TimeGrid TimeGrid::make(double length, Index intervals) {
  if (!(length > 0) || !std::isfinite(length)) throw InvalidArgument("cylinder length must be positive");
  if (intervals < 1) throw InvalidArgument("cylinder needs at least one time interval");
  return TimeGrid{length, intervals};
}

}  // namespace callias
