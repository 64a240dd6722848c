#pragma once

#include "callias/linalg.hpp"
#include "callias/spectral.hpp"

namespace callias {

// Eigenpairs of a sparse Hermitian matrix nearest to a shift, by shift-invert
// subspace iteration with Rayleigh-Ritz. Window counts come from inertia.
SpectralData partial_eigendecompose(const BoundaryOperator& op, const SpectralOptions& options);

// Signature of a - shift * I from a sparse LDL^* factorisation.
Inertia sparse_inertia(const SpMat& a, double shift);

}  // namespace callias
