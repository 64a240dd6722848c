#include "callias/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>

#include <omp.h>

#include "callias/errors.hpp"

namespace callias::kernels {

namespace {

std::atomic<int> g_workers{1};

int resolve(int workers) { return workers > 0 ? workers : g_workers.load(); }

using RowSp = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

SpMat anticommutator(const BoundaryOperator& a) {
  const SpMat& d = a.dirac_part();
  const SpMat& p = a.potential_part();
  return SpMat(d * p + p * d);
}

double min_square_eig(const Mat& block) {
  const RVec l = hermitian_eigenvalues(block);
  return l.cwiseAbs2().minCoeff();
}

// Runs body(i) for i in [0, n) and rethrows the first exception on the
// calling thread.
template <class F>
void parallel_for(Index n, int workers, F&& body) {
  std::exception_ptr err;
  std::mutex m;
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (Index i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> g(m);
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace

int default_workers() { return g_workers.load(); }

void set_default_workers(int workers) {
  if (workers < 1) throw InvalidArgument("worker count must be at least 1");
  g_workers = workers;
}

std::vector<double> site_gaps(const BoundaryOperator& a, int workers) {
  const BoundarySlice& s = a.slice();
  const Index r = s.fiber_rank();
  const RowSp k = anticommutator(a);
  const RowSp p(a.potential_part());
  std::vector<double> out(static_cast<std::size_t>(s.site_count()));
  parallel_for(s.site_count(), resolve(workers), [&](Index x) {
    Mat block = Mat::Zero(r, r);
    double rowmax = 0;
    for (Index c = 0; c < r; ++c) {
      const Index row = s.dof(x, c);
      double sum = 0;
      for (RowSp::InnerIterator it(k, row); it; ++it) sum += std::abs(it.value());
      rowmax = std::max(rowmax, sum);
      for (RowSp::InnerIterator it(p, row); it; ++it) block(c, it.col() - s.dof(x, 0)) = it.value();
    }
    out[static_cast<std::size_t>(x)] = min_square_eig(block) - rowmax;
  });
  return out;
}

std::vector<double> site_gaps_serial(const BoundaryOperator& a) {
  const BoundarySlice& s = a.slice();
  const Index n = a.dim(), r = s.fiber_rank();
  const SpMat k = anticommutator(a);
  RVec rowsum = RVec::Zero(n);
  for (Index j = 0; j < k.outerSize(); ++j)
    for (SpMat::InnerIterator it(k, j); it; ++it) rowsum(it.row()) += std::abs(it.value());
  std::vector<Mat> blocks(static_cast<std::size_t>(s.site_count()), Mat::Zero(r, r));
  const SpMat& p = a.potential_part();
  for (Index j = 0; j < p.outerSize(); ++j)
    for (SpMat::InnerIterator it(p, j); it; ++it)
      blocks[static_cast<std::size_t>(s.site_of(it.row()))](it.row() % r, it.col() % r) = it.value();
  std::vector<double> out;
  out.reserve(blocks.size());
  for (Index x = 0; x < s.site_count(); ++x) {
    double rowmax = 0;
    for (Index c = 0; c < r; ++c) rowmax = std::max(rowmax, rowsum(s.dof(x, c)));
    out.push_back(min_square_eig(blocks[static_cast<std::size_t>(x)]) - rowmax);
  }
  return out;
}

std::vector<std::shared_ptr<const SpectralData>> decompose_batch(
    SpectralEngine& engine, const std::vector<const BoundaryOperator*>& ops, int workers,
    const std::optional<SpectralOptions>& o) {
  const SpectralOptions opts = o ? *o : engine.options();
  std::vector<std::shared_ptr<const SpectralData>> out(ops.size());
  parallel_for(static_cast<Index>(ops.size()), resolve(workers), [&](Index i) {
    out[static_cast<std::size_t>(i)] = engine.decompose(*ops[static_cast<std::size_t>(i)], opts);
  });
  return out;
}

std::vector<std::shared_ptr<const SpectralData>> decompose_batch_serial(
    SpectralEngine& engine, const std::vector<const BoundaryOperator*>& ops,
    const std::optional<SpectralOptions>& o) {
  const SpectralOptions opts = o ? *o : engine.options();
  std::vector<std::shared_ptr<const SpectralData>> out;
  for (const auto* op : ops) out.push_back(engine.decompose(*op, opts));
  return out;
}

std::vector<IndexReport> index_batch(const std::vector<const ConstrainedOperator*>& ops,
                                     const IndexPolicy& policy, int workers) {
  std::vector<IndexReport> out(ops.size());
  parallel_for(static_cast<Index>(ops.size()), resolve(workers),
               [&](Index i) { out[static_cast<std::size_t>(i)] = compute_index(*ops[static_cast<std::size_t>(i)], policy); });
  return out;
}

std::vector<IndexReport> index_batch_serial(const std::vector<const ConstrainedOperator*>& ops,
                                            const IndexPolicy& policy) {
  std::vector<IndexReport> out;
  for (const auto* c : ops) out.push_back(compute_index(*c, policy));
  return out;
}

}  // namespace callias::kernels
