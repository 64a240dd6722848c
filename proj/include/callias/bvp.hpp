#pragma once

#include <optional>
#include <string>
#include <vector>

#include "callias/callias_ops.hpp"
#include "callias/engine.hpp"
#include "callias/spectral.hpp"

namespace callias {

// Which end of a cylinder a condition sits on. At the far end the boundary
// operator seen from the inward normal is -A, so End conditions are
// spectral subspaces of -A.
enum class Side { Start, End };

enum class ConditionTag { APS, DualAPS, SpectralSectionKernel, Transmission, Custom };

struct BoundaryCondition {
  Index slice_dim = 0;  // dimension of one copy of the slice
  Index copies = 1;     // 2 on a doubled cut slice
  Mat basis;            // orthonormal columns in C^{copies * slice_dim}
  ConditionTag tag = ConditionTag::Custom;
  double cut = 0;
  Side side = Side::Start;
  std::string source;
  // Exact orthonormal complement when it is known for free (spectral
  // conditions on complete data); empty columns and unset flag otherwise.
  Mat complement;
  bool has_complement = false;
  // Content hash of the operator whose eigenvectors span basis, if any.
  std::string eigen_of;

  Index ambient_dim() const { return slice_dim * copies; }
  Mat complement_basis() const;
  Index dim() const { return basis.cols(); }
  Index codim() const { return ambient_dim() - dim(); }
  // Distance from u to the subspace.
  double residual(const Vec& u) const;
  std::string describe() const;
};

// H_{(-inf, a)} of the operator seen from the boundary: A at Start, -A at End.
BoundaryCondition aps_condition(const SpectralData& s, double a, Side side = Side::Start);
// H_{(-inf, a]} likewise.
BoundaryCondition dual_aps_condition(const SpectralData& s, double a, Side side = Side::Start);
BoundaryCondition zero_condition(Index slice_dim);
BoundaryCondition full_condition(Index slice_dim);
// Any subspace; the basis is re-orthonormalised, columns below tol dropped.
BoundaryCondition custom_condition(const Mat& spanning, double tol = 1e-12);

// (normal . B)^perp where normal = blockdiag(sign_i cdt) over the copies.
// A single copy ignores the sign; a doubled slice needs both.
BoundaryCondition adjoint_condition(const BoundaryCondition& b, const CliffordData& cl);
BoundaryCondition adjoint_condition(const BoundaryCondition& b, const CliffordData& cl,
                                    const std::vector<int>& normal_signs);
// Largest principal-angle sine between the adjoint of an APS(a) condition
// and H_{(-inf, -a]}(A#).
double aps_adjoint_mismatch(const BoundaryCondition& b, const CliffordData& cl,
                            const SpectralData& sharp);

// {(u, u)} on two identical copies of a slice.
BoundaryCondition transmission_condition(const BoundarySlice& n1, const BoundarySlice& n2);

struct IndexReport {
  Index dim_ker = 0;
  Index dim_coker = 0;
  Index index = 0;
  Index counting_index = 0;
  double rank_tol = 0;
  double sv_gap = 0;  // +inf when no singular value is discarded or retained
  bool consistent = false;
  bool flagged = false;  // sv_gap < 10
  std::string method;
  Index dim_domain = 0;
  Index dim_codomain = 0;
};

struct IndexPolicy {
  enum class Method { Auto, Dense, Transfer };
  Method method = Method::Auto;
  std::optional<double> rank_tol;
  Index dense_limit = 2500;           // Auto switches to transfer above this dim V
  double transfer_rank_tol = 1e-9;    // on orthonormal-scale singular values
  SpectralEngine* engine = nullptr;   // reused decompositions for transfer steps
};

// Cylinders on one slice with a joint condition on the concatenated end
// values (start_0, end_0, start_1, end_1, ...); a single cylinder with
// separated conditions is the common case.
class ConstrainedOperator {
 public:
  static ConstrainedOperator assemble(const CalliasOperator& d, const BoundaryCondition& b0,
                                      const BoundaryCondition& b1);
  static ConstrainedOperator assemble_joint(std::vector<CalliasOperator> pieces,
                                            const BoundaryCondition& joint);

  Index dim_domain() const;
  Index dim_codomain() const;
  Index counting_index() const { return dim_domain() - dim_codomain(); }
  bool separated() const { return separated_; }
  const std::vector<CalliasOperator>& pieces() const { return pieces_; }
  const BoundaryCondition& start_condition() const { return b0_; }
  const BoundaryCondition& end_condition() const { return b1_; }
  const BoundaryCondition& joint_condition() const { return joint_; }

  // Dense matrix of the action V -> W.
  Mat action() const;
  // Node values of the domain basis, stacked piece by piece.
  Mat domain_basis() const;

 private:
  std::vector<CalliasOperator> pieces_;
  BoundaryCondition joint_, b0_, b1_;
  bool separated_ = false;
};

IndexReport compute_index(const ConstrainedOperator& c, const IndexPolicy& policy = {});
IndexReport compute_index(const PeriodicOperator& p, const IndexPolicy& policy = {});

// The formal adjoint with the adjoint boundary condition. Inward normals are
// +dt at starts and -dt at ends.
ConstrainedOperator adjoint_bvp(const ConstrainedOperator& c);

// Fredholm index of the orthogonal projection X1 -> X2.
Index relative_index(const Mat& x1, const Mat& x2, double tol = 1e-10);

// Midpoint values of c(dt)((u_{k+1}-u_k)/h + A_k (u_k+u_{k+1})/2).
std::vector<Vec> apply_cylinder(const CalliasOperator& d, const std::vector<Vec>& nodes);

struct GreenResidual {
  double residual = 0;    // |(Du,v) - (u,D*v) + <cdt u0,v0> - <cdt uK,vK>|
  double term_scale = 0;  // sum of the magnitudes of the summed terms
  double norm_u = 0, norm_v = 0;
};
GreenResidual green_residual(const CalliasOperator& d, const std::vector<Vec>& u,
                             const std::vector<Vec>& v);

struct Verdict {
  std::string name;
  bool passed = false;
  long long lhs = 0;
  long long rhs = 0;
  std::string detail;
  std::vector<IndexReport> reports;
};

// ind D_{B(b)} - ind D_{B(a)} = #{lambda in [a, b)} with the given end condition.
Verdict check_condition_change(const CalliasOperator& d, const SpectralData& start, double a,
                               double b, const BoundaryCondition& end, const IndexPolicy& policy = {});
// Dual versus plain APS at 0: the difference is dim ker A.
Verdict check_dual_change(const CalliasOperator& d, const SpectralData& start,
                          const BoundaryCondition& end, const IndexPolicy& policy = {});
// Cut at an interior node where the family is product; APS on the right
// piece, dual APS on the left, plus the transmission route.
Verdict check_splitting(const CalliasOperator& d, const BoundaryCondition& b0,
                        const BoundaryCondition& b1, Index cut_node, SpectralEngine& engine,
                        const IndexPolicy& policy = {});
Verdict check_vanishing(const CalliasOperator& d, double level, SpectralEngine& engine,
                        const IndexPolicy& policy = {});
// Doubled operator has total index 0.
Verdict check_double(const CalliasOperator& d1, const CalliasOperator& d2,
                     const IndexPolicy& policy = {});
// Truncate at node; the discarded part must be product and free of the
// essential support at the given level.
Verdict check_reduction(const CalliasOperator& d, Index truncate_node, double level,
                        SpectralEngine& engine, const IndexPolicy& policy = {});
Verdict check_independence(const CalliasOperator& d1, const CalliasOperator& d2,
                           SpectralEngine& engine, const IndexPolicy& policy = {});
// ind (D*)_{B^ad} = -ind D_B.
Verdict check_adjoint_duality(const ConstrainedOperator& c, const IndexPolicy& policy = {});

}  // namespace callias
