#pragma once

#include <array>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "callias/linalg.hpp"

namespace callias {

enum class SliceKind { Points, Plane2D };

struct PointsSpec {
  Index count = 1;
};

// Cell-centred grid on [-rx, rx] x [-ry, ry]; nx = 2 rx / hx must be integral.
struct PlaneSpec {
  double rx = 4.0;
  double ry = 4.0;
  double hx = 0.25;
  double hy = 0.25;
};

struct SliceSpec {
  std::variant<PointsSpec, PlaneSpec> geometry = PointsSpec{};
  int fiber_rank = 2;
};

class BoundarySlice {
 public:
  static BoundarySlice make(const SliceSpec& spec);
  static BoundarySlice points(Index count, int fiber_rank = 2);
  static BoundarySlice plane(double r, double h, int fiber_rank = 2);

  SliceKind kind() const { return kind_; }
  Index site_count() const { return sites_; }
  int fiber_rank() const { return rank_; }
  Index dim() const { return sites_ * rank_; }
  Index dof(Index site, int fiber) const { return site * rank_ + fiber; }
  Index site_of(Index dof) const { return dof / rank_; }

  Index nx() const { return nx_; }
  Index ny() const { return ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double rx() const { return rx_; }
  double ry() const { return ry_; }

  // Plane2D: cell centre. Points: (site, 0).
  std::array<double, 2> coordinates(Index site) const;
  std::pair<Index, Index> grid_position(Index site) const;  // (ix, iy)
  Index site_at(Index ix, Index iy) const { return iy * nx_ + ix; }
  // Sites on the outer ring of a Plane2D grid; never true for Points.
  bool on_edge(Index site) const;

  bool operator==(const BoundarySlice& o) const;
  bool operator!=(const BoundarySlice& o) const { return !(*this == o); }
  std::string describe() const;

 private:
  SliceKind kind_ = SliceKind::Points;
  Index sites_ = 0;
  int rank_ = 2;
  Index nx_ = 0, ny_ = 0;
  double hx_ = 0, hy_ = 0, rx_ = 0, ry_ = 0;
};

// Clifford module on the fibre C^{rank}, rank = 2k. Layout: fibre index
// c * k + j with c the grading component. gamma[j] are Hermitian and
// c(e_j) = i gamma[j]; grading = i c(e_1) c(e_2) = diag(I_k, -I_k).
struct CliffordData {
  int rank = 2;
  std::array<Mat, 2> gamma;
  Mat grading;
  Mat cdt;  // Clifford multiplication by dt, equal to i * grading

  // Site-diagonal lifts to the whole slice.
  SpMat lift(const Mat& fibre, Index sites) const;
  SpMat grading_on(const BoundarySlice& s) const { return lift(grading, s.site_count()); }
  SpMat cdt_on(const BoundarySlice& s) const { return lift(cdt, s.site_count()); }
};

CliffordData make_clifford(int fiber_rank);

struct TimeGrid {
  double length = 1.0;
  Index intervals = 12;

  static TimeGrid make(double length, Index intervals);
  double step() const { return length / static_cast<double>(intervals); }
  double node(Index k) const { return step() * static_cast<double>(k); }
  double midpoint(Index k) const { return step() * (static_cast<double>(k) + 0.5); }
  Index nodes() const { return intervals + 1; }
  bool operator==(const TimeGrid& o) const {
    return length == o.length && intervals == o.intervals;
  }
};

}  // namespace callias
