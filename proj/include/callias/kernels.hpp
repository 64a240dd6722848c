#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "callias/bvp.hpp"
#include "callias/callias_ops.hpp"
#include "callias/engine.hpp"

// Hot loops with an OpenMP version and a plain serial reference. Results are
// written by input position, so the worker count never changes them.
namespace callias::kernels {

int default_workers();
void set_default_workers(int workers);

// Per site: lambda_min(Psi_x^2) minus the largest absolute row sum of the
// anticommutator {A_D, Psi} over the fibre rows of x.
std::vector<double> site_gaps(const BoundaryOperator& a, int workers = 0);
std::vector<double> site_gaps_serial(const BoundaryOperator& a);

// Engine options unless o is given.
std::vector<std::shared_ptr<const SpectralData>> decompose_batch(
    SpectralEngine& engine, const std::vector<const BoundaryOperator*>& ops, int workers = 0,
    const std::optional<SpectralOptions>& o = std::nullopt);
std::vector<std::shared_ptr<const SpectralData>> decompose_batch_serial(
    SpectralEngine& engine, const std::vector<const BoundaryOperator*>& ops,
    const std::optional<SpectralOptions>& o = std::nullopt);

std::vector<IndexReport> index_batch(const std::vector<const ConstrainedOperator*>& ops,
                                     const IndexPolicy& policy, int workers = 0);
std::vector<IndexReport> index_batch_serial(const std::vector<const ConstrainedOperator*>& ops,
                                            const IndexPolicy& policy);

}  // namespace callias::kernels
