#pragma once

#include "callias/bvp.hpp"

namespace callias::detail {

// Kernel and cokernel by propagating the boundary subspaces through the
// Cayley transfer maps of the Crank-Nicolson recursion.
IndexReport transfer_index(const ConstrainedOperator& c, const IndexPolicy& policy);

// Rank decision shared by the routes.
IndexReport rank_report(const RVec& sv, Index dim_domain, Index dim_codomain, double tol);

}  // namespace callias::detail
