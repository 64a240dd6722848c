#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "callias/grid.hpp"
#include "callias/linalg.hpp"

namespace callias {

// Hermitian operator A_D + Psi on a slice: A_D anticommutes with the grading,
// Psi commutes with it and acts site by site.
class BoundaryOperator {
 public:
  static BoundaryOperator from_parts(const BoundarySlice& slice, SpMat dirac, SpMat potential,
                                     std::string label = "", std::vector<double> samples = {});

  const BoundarySlice& slice() const { return slice_; }
  const SpMat& matrix() const { return matrix_; }
  const SpMat& dirac_part() const { return dirac_; }
  const SpMat& potential_part() const { return potential_; }
  // f + m per site when the operator came from the scalar model, else empty.
  const std::vector<double>& samples() const { return samples_; }
  const std::string& label() const { return label_; }
  const std::string& content_hash() const { return hash_; }
  Index dim() const { return matrix_.rows(); }
  Mat dense() const { return Mat(matrix_); }
  const CliffordData& clifford() const { return *clifford_; }

  BoundaryOperator relabeled(std::string label) const;
  bool same_as(const BoundaryOperator& o) const;

 private:
  BoundarySlice slice_;
  std::shared_ptr<const CliffordData> clifford_;
  SpMat dirac_, potential_, matrix_;
  std::vector<double> samples_;
  std::string label_;
  std::string hash_;
};

// Forward-difference Dirac part on a plane slice, D = d+x + i d+y with zero
// values outside the box in the (1,2) block, D^dagger in the (2,1) block.
SpMat plane_dirac(const BoundarySlice& slice);

// Psi = (f + m) Gamma, with the slice's built-in Dirac part (zero on points).
BoundaryOperator build_boundary_operator(const BoundarySlice& slice, const std::vector<double>& f,
                                         double m, std::string label = "");
// Points slice with an explicit Dirac part (must anticommute with Gamma).
BoundaryOperator build_points_operator(const BoundarySlice& slice, const Mat& dirac,
                                       const std::vector<double>& f, double m,
                                       std::string label = "");
// Points slice with an arbitrary grading-commuting potential.
BoundaryOperator build_points_operator(const BoundarySlice& slice, const Mat& dirac,
                                       const Mat& potential, std::string label = "");

std::vector<double> sample_sites(const BoundarySlice& slice,
                                 const std::function<double(double, double)>& fn);

// A_D - Psi, the boundary operator of the formal adjoint.
BoundaryOperator adjoint_boundary_operator(const BoundaryOperator& a);
BoundaryOperator negate(const BoundaryOperator& a);
// (1 - s) a + s b on both parts; s == 0 and s == 1 return a and b exactly.
BoundaryOperator interpolate(const BoundaryOperator& a, const BoundaryOperator& b, double s);
// Sites where the two operators differ (rows or columns touching them).
std::vector<Index> differing_sites(const BoundaryOperator& a, const BoundaryOperator& b);

// Smooth step, 0 for tau <= lo and 1 for tau >= hi.
double plateau_step(double tau, double lo = 1.0 / 3.0, double hi = 2.0 / 3.0);

struct Margins {
  double left = 1.0 / 3.0;
  double right = 1.0 / 3.0;
};

using OperatorFamily = std::function<BoundaryOperator(double tau)>;  // tau = t / L

// c(dt) (d/dt + A(t)) on [0, L] x N. A is sampled at the interval midpoints;
// consecutive identical members share storage.
class CalliasOperator {
 public:
  using Member = std::shared_ptr<const BoundaryOperator>;

  static CalliasOperator build(const TimeGrid& grid, const OperatorFamily& family,
                               Margins margins = {}, std::string label = "");
  static CalliasOperator from_members(const TimeGrid& grid, std::vector<Member> members,
                                      Index left_margin, Index right_margin, std::string label = "");
  static CalliasOperator product(const BoundaryOperator& a, const TimeGrid& grid,
                                 std::string label = "");
  // Plateau interpolation from a to b, constant on the margins.
  static CalliasOperator interpolating(const BoundaryOperator& a, const BoundaryOperator& b,
                                       const TimeGrid& grid, Margins margins = {},
                                       std::string label = "");

  const TimeGrid& grid() const { return grid_; }
  const BoundarySlice& slice() const { return members_.front()->slice(); }
  const CliffordData& clifford() const { return members_.front()->clifford(); }
  Index fiber_dim() const { return members_.front()->dim(); }
  Index intervals() const { return grid_.intervals; }
  const BoundaryOperator& member(Index k) const { return *members_[static_cast<std::size_t>(k)]; }
  const Member& member_ptr(Index k) const { return members_[static_cast<std::size_t>(k)]; }
  const std::vector<Member>& members() const { return members_; }
  const BoundaryOperator& start_operator() const { return *members_.front(); }
  const BoundaryOperator& end_operator() const { return *members_.back(); }
  // Lengths of the constant runs at each end, in intervals.
  Index left_margin() const { return left_margin_; }
  Index right_margin() const { return right_margin_; }
  // Margins the cylinder was built with; never longer than the runs.
  Index declared_left() const { return declared_left_; }
  Index declared_right() const { return declared_right_; }
  const std::string& label() const { return label_; }

  // Intervals [node_begin, node_end) as a cylinder of their own. Margins of
  // the piece are the product stretches it inherits at each end.
  CalliasOperator sub_cylinder(Index node_begin, Index node_end) const;
  // Formal adjoint, c(dt)(d/dt + A#(t)).
  CalliasOperator adjoint() const;
  // True when the family is constant on both intervals adjacent to an
  // interior node.
  bool product_at_node(Index node) const;

 private:
  TimeGrid grid_;
  std::vector<Member> members_;
  Index left_margin_ = 1, right_margin_ = 1;
  Index declared_left_ = 1, declared_right_ = 1;
  std::string label_;
};

// c(d theta)(d/d theta + A~(theta)) on the circle of length 2L.
struct PeriodicOperator {
  double step = 0;
  std::vector<CalliasOperator::Member> members;  // 2K intervals
  Index fiber_dim() const { return members.front()->dim(); }
  const CliffordData& clifford() const { return members.front()->clifford(); }
};

PeriodicOperator glue_double(const CalliasOperator& d1, const CalliasOperator& d2);

struct EssentialSupportReport {
  double level = 0;
  std::vector<double> site_gap;   // lambda_min(Psi_x^2) - |[A_D, Psi]_+ row x|
  std::vector<Index> violating;   // sites with gap < level
  bool empty = true;
  // Bounding box of the violating sites (ix0, ix1, iy0, iy1); Points use ix.
  std::array<Index, 4> box{0, -1, 0, -1};
};

EssentialSupportReport audit_strong_callias(const BoundaryOperator& a, double level);
// Site-wise minimum over all members of the family.
EssentialSupportReport audit_strong_callias(const CalliasOperator& d, double level);
// Same as above restricted to intervals [k_begin, k_end).
EssentialSupportReport audit_strong_callias(const CalliasOperator& d, double level, Index k_begin,
                                            Index k_end);

struct Patch {
  std::vector<Index> sites;
  std::vector<double> values;  // new f + m at each site
};

BoundaryOperator compact_perturbation(const BoundaryOperator& a, const Patch& patch,
                                      std::string label = "");
// Perturb the members whose midpoints lie in [tau_begin, tau_end].
CalliasOperator compact_perturbation(const CalliasOperator& d, const Patch& patch,
                                     double tau_begin, double tau_end);

}  // namespace callias
